//! Command dispatch. Each command produces metrics, tables and extra files;
//! [`run`] writes them under a run directory named by the input hash.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use metavqt::hamiltonian::{commuting_blocks, expectation, HamiltonianFamily};
use metavqt::linalg::von_neumann_entropy;
use metavqt::qbm::{train_qbm, QbmConfig};
use metavqt::rng::SeedStream;
use metavqt::thermal::{crossover_scan, exact_gibbs};
use metavqt::training::{
    evaluate_on_grid, train, train_vqt_single, Architecture, Checkpoint, GridEvaluation, MetaTrainConfig, VqtInit,
};
use rand::Rng;

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult, ModuleContext};
use crate::record::{emit_plotdata, input_hash, write_atomic, ExperimentRecord, Table, RECORD_SCHEMA_VERSION};

#[derive(Default)]
struct Outcome {
    metrics: BTreeMap<String, f64>,
    tables: BTreeMap<String, Table>,
    /// Extra files as `(name, contents)`.
    files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    /// Non-finite values are left out so records stay valid JSON.
    fn metric(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.to_string(), value);
        }
    }

    fn table(&mut self, name: &str, t: Table) {
        self.tables.insert(name.to_string(), t);
    }
}

/// Directory of a run: `<out>/<command>-<first 12 hex digits of the hash>`.
pub fn run_dir(config: &RunConfig, hash: &str) -> PathBuf {
    config.out_dir().join(format!("{}-{}", config.command.name(), &hash[..12]))
}

pub fn run(config: &RunConfig) -> CliResult<ExperimentRecord> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();
    let checkpoint_bytes = match &config.settings.input.checkpoint {
        Some(p) => Some(std::fs::read(p).map_err(|e| CliError::io(p, e))?),
        None => None,
    };
    let hash = input_hash(config, &checkpoint_bytes.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let checkpoint = match &checkpoint_bytes {
        Some(bytes) => {
            let text = String::from_utf8_lossy(bytes);
            Some(Checkpoint::from_json(&text).during(config.command.name())?)
        }
        None => None,
    };
    let name = config.command.name();
    let family = config.family().map_err(|e| CliError::Validation(vec![e]))?;
    let outcome = match config.command {
        Command::Oracle => oracle(config, &family),
        Command::TrainMeta | Command::TrainNnMeta => train_command(config, &family),
        Command::Eval => eval(config, &family, checkpoint.as_ref().expect("validated")),
        Command::WarmstartVqt => warmstart(config, &family, checkpoint.as_ref().expect("validated")),
        Command::Qbm => qbm(config, &family, checkpoint.as_ref().expect("validated")),
        Command::PhaseScan => phase_scan(config, &family),
    }
    .during(name)?;
    let dir = run_dir(config, &hash);
    let mut record = ExperimentRecord {
        schema_version: RECORD_SCHEMA_VERSION.into(),
        command: name.into(),
        config: config.clone(),
        input_hash: hash,
        metrics: outcome.metrics,
        tables: outcome.tables,
        artifacts: Vec::new(),
        started_at,
        finished_at: String::new(),
        wall_time_s: 0.0,
    };
    let csvs = emit_plotdata(&record, &dir)?;
    for (file, contents) in &outcome.files {
        write_atomic(&dir.join(file), contents)?;
    }
    write_atomic(&dir.join("config.toml"), config.to_toml().as_bytes())?;
    record.artifacts = csvs
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .chain(outcome.files.iter().map(|(f, _)| f.clone()))
        .chain(["config.toml".to_string(), "record.json".to_string()])
        .collect();
    record.finished_at = chrono::Utc::now().to_rfc3339();
    record.wall_time_s = clock.elapsed().as_secs_f64();
    write_atomic(&dir.join("record.json"), record.to_json()?.as_bytes())?;
    Ok(record)
}

fn coord_header(dim: usize, rest: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = match dim {
        1 => vec!["h".into()],
        2 => vec!["j".into(), "h".into()],
        _ => (0..dim).map(|k| format!("c{k}")).collect(),
    };
    h.extend(rest.iter().map(|s| s.to_string()));
    h
}

fn table_with(dim: usize, rest: &[&str]) -> Table {
    Table { header: coord_header(dim, rest), rows: Vec::new() }
}

fn complexity_row(config: &RunConfig) -> Option<usize> {
    (config.settings.model.family.as_deref() == Some("complexity")).then(|| config.settings.model.row.unwrap_or(1) as usize)
}

fn oracle(config: &RunConfig, family: &HamiltonianFamily) -> metavqt::Result<Outcome> {
    let mut out = Outcome::default();
    let beta = config.beta();
    let points = config.grid(&config.settings.grid.h_test);
    let mut t = table_with(family.param_dim(), &["g_exact", "energy", "entropy", "log_partition"]);
    for h in &points {
        let hs = family.build(h)?;
        let g = exact_gibbs(&hs, beta)?;
        let mut row = h.clone();
        row.extend([
            g.free_energy,
            expectation(&hs, &g.gibbs_state)?,
            von_neumann_entropy(&g.gibbs_state)?,
            g.log_partition,
        ]);
        t.push(row);
    }
    let gs: Vec<f64> = t.rows.iter().map(|r| r[family.param_dim()]).collect();
    out.metric("n_points", points.len() as f64);
    out.metric("min_g_exact", gs.iter().copied().fold(f64::INFINITY, f64::min));
    out.metric("max_g_exact", gs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    out.table("oracle", t);
    let mut blocks = Table::new(&["row", "block_count"]);
    if complexity_row(config).is_some() {
        for r in 1..=6 {
            let hs = HamiltonianFamily::complexity(r)?.build(&[1.0, 1.0])?;
            blocks.push(vec![r as f64, commuting_blocks(&hs).count() as f64]);
        }
    } else {
        blocks.push(vec![0.0, commuting_blocks(&family.build(&points[0])?).count() as f64]);
    }
    out.table("blocks", blocks);
    out.files.push(("hamiltonian.txt".into(), family.build(&points[0])?.to_string().into_bytes()));
    Ok(out)
}

fn eval_tables(out: &mut Outcome, ev: &GridEvaluation, dim: usize) {
    let mut t = table_with(dim, &["g_var", "g_exact", "fidelity", "trace_distance", "rel_error"]);
    for p in &ev.points {
        let mut row = p.h.clone();
        row.extend([p.g_var, p.g_exact, p.fidelity, p.trace_distance, p.rel_error.unwrap_or(f64::NAN)]);
        t.push(row);
    }
    out.table("eval", t);
    out.metric("mean_fidelity", ev.mean_fidelity());
    out.metric("min_fidelity", ev.min_fidelity());
    out.metric("mean_trace_distance", ev.mean_trace_distance());
    out.metric("std_trace_distance", ev.std_trace_distance());
    out.metric("max_rel_error", ev.max_rel_error());
    out.metric("degenerate_points", ev.degenerate.len() as f64);
}

fn complexity_summary(out: &mut Outcome, row: usize, ev: &GridEvaluation) -> metavqt::Result<()> {
    let hs = HamiltonianFamily::complexity(row)?.build(&[1.0, 1.0])?;
    let mut t = Table::new(&["row", "block_count", "trace_distance_mean", "trace_distance_std"]);
    t.push(vec![row as f64, commuting_blocks(&hs).count() as f64, ev.mean_trace_distance(), ev.std_trace_distance()]);
    out.table("complexity_summary", t);
    Ok(())
}

fn train_command(config: &RunConfig, family: &HamiltonianFamily) -> metavqt::Result<Outcome> {
    let s = &config.settings;
    let tr = &s.train;
    let h_train = config.grid(&s.grid.h_train);
    let mut cfg = if config.command == Command::TrainNnMeta {
        let hidden = tr.hidden.as_ref().expect("resolved").iter().map(|&x| x as usize).collect();
        MetaTrainConfig::nn_meta(
            family.clone(),
            h_train,
            tr.su2_layers.expect("resolved") as usize,
            tr.hva_layers.expect("resolved") as usize,
            hidden,
        )
    } else {
        MetaTrainConfig::meta(
            family.clone(),
            h_train,
            tr.enc_layers.expect("resolved") as usize,
            tr.hva_layers.expect("resolved") as usize,
        )
    };
    cfg.beta = config.beta();
    cfg.n_ancilla = config.n_ancilla(family);
    cfg.epochs = tr.epochs.expect("resolved") as usize;
    cfg.lr = tr.lr.expect("resolved");
    cfg.seed = config.seed();
    cfg.gradient = config.gradient();
    cfg.execution = config.execution();
    let report = train(&cfg)?;

    let mut out = Outcome::default();
    let mut loss = Table::new(&["epoch", "loss"]);
    for (e, l) in report.loss_history.iter().enumerate() {
        loss.push(vec![e as f64, *l]);
    }
    out.table("loss", loss);
    let mut fin = table_with(family.param_dim(), &["g_var"]);
    for (h, g) in report.h_train.iter().zip(&report.final_point_free_energies) {
        let mut row = h.clone();
        row.push(*g);
        fin.push(row);
    }
    out.table("train_points", fin);
    out.metric("final_loss", report.final_point_free_energies.iter().sum());
    out.metric("epochs", cfg.epochs as f64);
    let ev = evaluate_on_grid(&report.preparer, family, &config.grid(&s.grid.h_test), cfg.beta, cfg.execution)?;
    eval_tables(&mut out, &ev, family.param_dim());
    if let Some(row) = complexity_row(config) {
        complexity_summary(&mut out, row, &ev)?;
    }
    let kind = match cfg.architecture {
        Architecture::Meta { .. } => "meta",
        Architecture::NnMeta { .. } => "nn-meta",
    };
    let cp = Checkpoint::new(family.clone(), cfg.beta, report.preparer);
    out.files.push(("checkpoint.json".into(), cp.to_json()?.into_bytes()));
    out.files.push((format!("{kind}.ansatz.json"), cp.preparer.ansatz().to_json()?.into_bytes()));
    Ok(out)
}

fn eval(config: &RunConfig, family: &HamiltonianFamily, cp: &Checkpoint) -> metavqt::Result<Outcome> {
    cp.ensure_matches(family, config.beta())?;
    let ev = evaluate_on_grid(&cp.preparer, family, &config.grid(&config.settings.grid.h_test), cp.beta, config.execution())?;
    let mut out = Outcome::default();
    eval_tables(&mut out, &ev, family.param_dim());
    if let Some(row) = complexity_row(config) {
        complexity_summary(&mut out, row, &ev)?;
    }
    Ok(out)
}

fn warmstart(config: &RunConfig, family: &HamiltonianFamily, cp: &Checkpoint) -> metavqt::Result<Outcome> {
    cp.ensure_matches(family, config.beta())?;
    let w = &config.settings.warmstart;
    let epochs = w.epochs.expect("resolved") as usize;
    let lr = w.lr.expect("resolved");
    let spec = cp.preparer.ansatz().clone();
    let method = config.gradient();
    let mut seeds = SeedStream::new(config.seed());
    let mut summary = Table::new(&[
        "h",
        "fidelity_meta_initial",
        "fidelity_meta_final",
        "fidelity_random_initial",
        "fidelity_random_final",
    ]);
    let mut curves = Table::new(&["h", "epoch", "loss_meta", "loss_random"]);
    for h in config.grid(&w.fields) {
        let warm = VqtInit::Params { params: cp.preparer.single_point_init(&h)? };
        let cold = VqtInit::Random { seed: seeds.fork().gen() };
        let a = train_vqt_single(family, &h, cp.beta, &spec, &warm, epochs, lr, method)?;
        let b = train_vqt_single(family, &h, cp.beta, &spec, &cold, epochs, lr, method)?;
        summary.push(vec![h[0], a.initial_fidelity, a.final_fidelity, b.initial_fidelity, b.final_fidelity]);
        for (e, (la, lb)) in a.loss_history.iter().zip(&b.loss_history).enumerate() {
            curves.push(vec![h[0], e as f64, *la, *lb]);
        }
    }
    let n = summary.rows.len() as f64;
    let mean = |k: usize| summary.rows.iter().map(|r| r[k]).sum::<f64>() / n;
    let mut out = Outcome::default();
    out.metric("mean_fidelity_meta", mean(2));
    out.metric("mean_fidelity_random", mean(4));
    out.metric("margin", mean(2) - mean(4));
    out.table("warmstart", summary);
    if !curves.rows.is_empty() {
        out.table("warmstart_loss", curves);
    }
    Ok(out)
}

fn qbm(config: &RunConfig, family: &HamiltonianFamily, cp: &Checkpoint) -> metavqt::Result<Outcome> {
    let q = &config.settings.qbm;
    let qc = QbmConfig {
        p_target: q.target.clone().expect("resolved"),
        beta: config.beta(),
        epochs: q.epochs.expect("resolved") as usize,
        lr: q.lr.expect("resolved"),
        grad_step: q.grad_step.expect("resolved"),
        seed: config.seed(),
        init: None,
        execution: config.execution(),
    };
    let r = train_qbm(&qc, family, cp)?;
    let mut out = Outcome::default();
    out.metric("final_kl", r.final_kl);
    out.metric("mean_trace_distance", r.mean_trace_distance());
    out.metric("preparer_calls", r.preparer_calls as f64);
    for (k, c) in r.final_coeffs.iter().enumerate() {
        out.metric(&format!("final_coeff_{k}"), *c);
    }
    let mut hist = Table::new(&["epoch", "kl", "trace_distance"]);
    for (e, (kl, td)) in r.kl_history.iter().zip(&r.trace_distance_history).enumerate() {
        hist.push(vec![e as f64, *kl, *td]);
    }
    if !hist.rows.is_empty() {
        out.table("qbm", hist);
    }
    let mut coeffs = Table { header: vec!["epoch".into()], rows: Vec::new() };
    coeffs.header.extend((0..r.final_coeffs.len()).map(|k| format!("c{k}")));
    for (e, c) in r.coeff_history.iter().enumerate() {
        let mut row = vec![e as f64];
        row.extend(c);
        coeffs.push(row);
    }
    if !coeffs.rows.is_empty() {
        out.table("qbm_coeffs", coeffs);
    }
    let mut dist = Table::new(&["index", "p_target", "p_model"]);
    for (i, (pt, pm)) in qc.p_target.iter().zip(&r.p_model).enumerate() {
        dist.push(vec![i as f64, *pt, *pm]);
    }
    out.table("qbm_distribution", dist);
    Ok(out)
}

fn phase_scan(config: &RunConfig, family: &HamiltonianFamily) -> metavqt::Result<Outcome> {
    let sc = &config.settings.scan;
    let temps: Vec<f64> = config.grid(&sc.temperatures).into_iter().map(|p| p[0]).collect();
    let dh = sc.dh.expect("resolved");
    let mut chi = Table::new(&["h", "t", "chi"]);
    let mut cross = Table::new(&["h", "t_star", "interior"]);
    let mut interior = 0;
    for h in config.grid(&sc.fields) {
        let scan = crossover_scan(family, h[0], &temps, dh, config.execution())?;
        for (t, c) in scan.temperatures.iter().zip(&scan.chi) {
            chi.push(vec![h[0], *t, *c]);
        }
        interior += scan.is_interior() as usize;
        cross.push(vec![h[0], scan.t_star(), scan.is_interior() as u8 as f64]);
    }
    let mut out = Outcome::default();
    out.metric("n_fields", cross.rows.len() as f64);
    out.metric("n_interior", interior as f64);
    out.table("chi", chi);
    out.table("crossover", cross);
    Ok(out)
}
