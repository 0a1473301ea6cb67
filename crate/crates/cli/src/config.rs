//! Run configuration: a TOML document with dotted sections, overridden by
//! `--set section.key=value` flags, then resolved and validated as a whole.

use std::path::{Path, PathBuf};

use metavqt::hamiltonian::HamiltonianFamily;
use metavqt::qbm::{DEFAULT_QBM_EPOCHS, DEFAULT_TARGET, QBM_LR};
use metavqt::training::{GradientMethod, DEFAULT_GRAD_STEP, DEFAULT_HIDDEN, DEFAULT_META_EPOCHS, META_LR, NN_META_LR};
use metavqt::thermal::DEFAULT_DH;
use metavqt::Execution;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::grid::GridSpec;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "METAVQT_OUT";
pub const DEFAULT_OUT_DIR: &str = "metavqt-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    TrainMeta,
    TrainNnMeta,
    Eval,
    WarmstartVqt,
    Qbm,
    PhaseScan,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::TrainMeta => "train-meta",
            Command::TrainNnMeta => "train-nn-meta",
            Command::Eval => "eval",
            Command::WarmstartVqt => "warmstart-vqt",
            Command::Qbm => "qbm",
            Command::PhaseScan => "phase-scan",
            Command::Oracle => "oracle",
        }
    }

    fn needs_checkpoint(self) -> bool {
        matches!(self, Command::Eval | Command::WarmstartVqt | Command::Qbm)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `tfim`, `kitaev`, `heisenberg` or `complexity`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// Row of the commuting-block study, for `complexity`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_ancilla: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enc_layers: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hva_layers: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub su2_layers: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<i64>,
    /// `reverse` or `central`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_step: Option<f64>,
    /// `parallel` or `serial`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub execution: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_train: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_test: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmstartSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QbmSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperatures: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dh: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Every key a run can set. Unset keys are filled by [`RunConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub warmstart: WarmstartSection,
    #[serde(default)]
    pub qbm: QbmSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A resolved configuration. `settings` has every applicable key filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub settings: ConfigFile,
}

/// Parses `text` as a config document and applies `overrides` in order.
pub fn parse_config(text: &str, overrides: &[String]) -> CliResult<ConfigFile> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::parse("config", e))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    ConfigFile::deserialize(toml::Value::Table(table)).map_err(|e| CliError::parse("config", e))
}

pub fn read_config(path: Option<&Path>, overrides: &[String]) -> CliResult<ConfigFile> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => String::new(),
    };
    parse_config(&text, overrides).map_err(|e| match (e, path) {
        (CliError::Parse { context, message }, Some(p)) if context == "config" => {
            CliError::parse(p.display().to_string(), message)
        }
        (e, _) => e,
    })
}

fn apply_override(table: &mut toml::Table, item: &str) -> CliResult<()> {
    let ctx = || format!("--set {item}");
    let (key, raw) = item.split_once('=').ok_or_else(|| CliError::parse(ctx(), "expected key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::parse(ctx(), "empty key segment"));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty");
    let mut cur = table;
    for seg in parents {
        let next = cur.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next.as_table_mut().ok_or_else(|| CliError::parse(ctx(), format!("'{seg}' is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn default_h_train(family: &str, dim: usize) -> String {
    match (family, dim) {
        (_, 2) => "product(random(-2, 2, 10, 1), random(-2, 2, 10, 2))".into(),
        ("kitaev", _) => "uniform(0.7, 1.2, 20)".into(),
        _ => "uniform(-2, 2, 10)".into(),
    }
}

fn default_h_test(family: &str, dim: usize) -> String {
    match (family, dim) {
        (_, 2) => "product(uniform(-2, 2, 10), uniform(-2, 2, 10))".into(),
        ("kitaev", _) => "uniform(0.7, 1.2, 40)".into(),
        _ => "uniform(-2, 2, 40)".into(),
    }
}

impl RunConfig {
    /// Fills defaults and validates. Every problem is reported at once.
    pub fn resolve(command: Command, file: ConfigFile) -> CliResult<Self> {
        let mut s = file;
        let m = &mut s.model;
        let family = m.family.get_or_insert_with(|| "tfim".into()).clone();
        let default_n = match family.as_str() {
            "kitaev" => 3,
            _ => 2,
        };
        match family.as_str() {
            "tfim" | "kitaev" => {
                m.n.get_or_insert(default_n);
                m.coupling.get_or_insert(1.0);
            }
            "complexity" => {
                m.row.get_or_insert(1);
            }
            _ => {}
        }
        m.beta.get_or_insert(1.0);
        let nn = command == Command::TrainNnMeta;
        let t = &mut s.train;
        t.seed.get_or_insert(0);
        t.gradient.get_or_insert_with(|| "reverse".into());
        t.grad_step.get_or_insert(DEFAULT_GRAD_STEP);
        t.execution.get_or_insert_with(|| "parallel".into());
        if matches!(command, Command::TrainMeta | Command::TrainNnMeta) {
            t.epochs.get_or_insert(DEFAULT_META_EPOCHS as i64);
            t.lr.get_or_insert(if nn { NN_META_LR } else { META_LR });
            if nn {
                t.su2_layers.get_or_insert(4);
                t.hva_layers.get_or_insert(0);
                t.hidden.get_or_insert_with(|| DEFAULT_HIDDEN.iter().map(|&x| x as i64).collect());
            } else {
                t.enc_layers.get_or_insert(2);
                t.hva_layers.get_or_insert(2);
            }
        }
        let mut config = RunConfig { command, settings: s };
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(CliError::Validation(problems));
        }
        let dim = config.family().expect("validated").param_dim();
        let s = &mut config.settings;
        if matches!(command, Command::TrainMeta | Command::TrainNnMeta) {
            s.grid.h_train.get_or_insert_with(|| default_h_train(&family, dim));
        }
        if matches!(command, Command::TrainMeta | Command::TrainNnMeta | Command::Eval | Command::Oracle) {
            s.grid.h_test.get_or_insert_with(|| default_h_test(&family, dim));
        }
        if command == Command::WarmstartVqt {
            s.warmstart.fields.get_or_insert_with(|| "values(0, 0.5, 1, 1.5, 2)".into());
            s.warmstart.epochs.get_or_insert(100);
            s.warmstart.lr.get_or_insert(META_LR);
        }
        if command == Command::Qbm {
            s.qbm.target.get_or_insert_with(|| DEFAULT_TARGET.to_vec());
            s.qbm.epochs.get_or_insert(DEFAULT_QBM_EPOCHS as i64);
            s.qbm.lr.get_or_insert(QBM_LR);
            s.qbm.grad_step.get_or_insert(DEFAULT_GRAD_STEP);
        }
        if command == Command::PhaseScan {
            s.scan.fields.get_or_insert_with(|| "values(0.7, 0.8, 0.9, 1.0, 1.1, 1.2)".into());
            s.scan.temperatures.get_or_insert_with(|| "uniform(0.02, 1, 50)".into());
            s.scan.dh.get_or_insert(DEFAULT_DH);
        }
        if s.output.dir.is_none() {
            let dir = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            s.output.dir = Some(dir);
        }
        // grids and values filled above are checked here too
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(CliError::Validation(problems));
        }
        Ok(config)
    }

    fn problems(&self) -> Vec<String> {
        let s = &self.settings;
        let mut p = Vec::new();
        let family = match self.family() {
            Ok(f) => Some(f),
            Err(e) => {
                p.push(e);
                None
            }
        };
        if let Some(b) = s.model.beta {
            if !(b > 0.0 && b.is_finite()) {
                p.push(format!("model.beta must be positive and finite, got {b}"));
            }
        }
        if let (Some(a), Some(f)) = (s.model.n_ancilla, &family) {
            if a < 0 || a as usize > f.n_qubits {
                p.push(format!("model.n_ancilla must be in 0..={}, got {a}", f.n_qubits));
            }
        }
        let t = &s.train;
        let non_negative = [
            ("train.enc_layers", t.enc_layers),
            ("train.hva_layers", t.hva_layers),
            ("train.su2_layers", t.su2_layers),
            ("train.epochs", t.epochs),
            ("train.seed", t.seed),
            ("warmstart.epochs", s.warmstart.epochs),
            ("qbm.epochs", s.qbm.epochs),
        ];
        for (k, v) in non_negative {
            if let Some(v) = v {
                if v < 0 {
                    p.push(format!("{k} must be non-negative, got {v}"));
                }
            }
        }
        if self.command == Command::TrainMeta && t.enc_layers == Some(0) {
            p.push("train.enc_layers must be at least 1 so the circuit depends on h".into());
        }
        if let Some(h) = &t.hidden {
            if h.iter().any(|&x| x <= 0) {
                p.push(format!("train.hidden widths must be positive, got {h:?}"));
            }
        }
        let positive = [
            ("train.lr", t.lr),
            ("train.grad_step", t.grad_step),
            ("warmstart.lr", s.warmstart.lr),
            ("qbm.lr", s.qbm.lr),
            ("qbm.grad_step", s.qbm.grad_step),
            ("scan.dh", s.scan.dh),
        ];
        for (k, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    p.push(format!("{k} must be positive and finite, got {v}"));
                }
            }
        }
        if let Some(g) = &t.gradient {
            if !matches!(g.as_str(), "reverse" | "central") {
                p.push(format!("train.gradient must be 'reverse' or 'central', got '{g}'"));
            }
        }
        if let Some(e) = &t.execution {
            if !matches!(e.as_str(), "parallel" | "serial") {
                p.push(format!("train.execution must be 'parallel' or 'serial', got '{e}'"));
            }
        }
        let dim = family.as_ref().map(HamiltonianFamily::param_dim);
        for (k, spec, want) in [
            ("grid.h_train", &s.grid.h_train, dim),
            ("grid.h_test", &s.grid.h_test, dim),
            ("warmstart.fields", &s.warmstart.fields, dim.map(|_| 1)),
            ("scan.fields", &s.scan.fields, Some(1)),
            ("scan.temperatures", &s.scan.temperatures, Some(1)),
        ] {
            let Some(text) = spec else { continue };
            match GridSpec::parse(text) {
                Err(e) => p.push(format!("{k}: {e}")),
                Ok(g) => {
                    if let Some(d) = want {
                        if g.dim() != d {
                            p.push(format!("{k} has {} coordinates per point, the model needs {d}", g.dim()));
                        }
                    }
                }
            }
        }
        if let (Some(d), Some(_)) = (dim, &s.warmstart.fields) {
            if d != 1 {
                p.push("warmstart.fields needs a single-parameter family".into());
            }
        }
        if self.command == Command::PhaseScan {
            if let Some(d) = dim {
                if d != 1 {
                    p.push("phase-scan needs a single-parameter family".into());
                }
            }
        }
        if let Some(temps) = s.scan.temperatures.as_deref().and_then(|t| GridSpec::parse(t).ok()) {
            let pts: Vec<f64> = temps.points().into_iter().map(|q| q[0]).collect();
            if pts.len() < 5 || pts[0] <= 0.0 || pts.windows(2).any(|w| w[1] <= w[0]) {
                p.push("scan.temperatures must be ascending, positive, with at least 5 points".into());
            }
        }
        if let Some(target) = &s.qbm.target {
            let sum: f64 = target.iter().sum();
            if target.iter().any(|&x| x.is_nan() || x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                p.push(format!("qbm.target must be a probability vector, sums to {sum}"));
            }
            if let Some(f) = &family {
                if target.len() != 1 << f.n_qubits {
                    p.push(format!("qbm.target has {} entries, the model needs {}", target.len(), 1 << f.n_qubits));
                }
            }
        }
        if self.command.needs_checkpoint() && s.input.checkpoint.is_none() {
            p.push(format!("{} needs input.checkpoint", self.command.name()));
        }
        p
    }

    pub fn family(&self) -> Result<HamiltonianFamily, String> {
        let m = &self.settings.model;
        let family = m.family.as_deref().unwrap_or("tfim");
        let size = |n: Option<i64>, min: i64| -> Result<usize, String> {
            match n {
                Some(n) if n >= min && n <= 8 => Ok(n as usize),
                Some(n) => Err(format!("model.n must be in {min}..=8 for {family}, got {n}")),
                None => Err("model.n is required".into()),
            }
        };
        let coupling = m.coupling.unwrap_or(1.0);
        if !coupling.is_finite() {
            return Err(format!("model.coupling must be finite, got {coupling}"));
        }
        let r = match family {
            "tfim" => HamiltonianFamily::tfim(size(m.n, 1)?, coupling),
            "kitaev" => HamiltonianFamily::kitaev_ring(size(m.n, 3)?, coupling),
            "heisenberg" => Ok(HamiltonianFamily::heisenberg_fields()),
            "complexity" => match m.row {
                Some(r) if (1..=6).contains(&r) => HamiltonianFamily::complexity(r as usize),
                r => return Err(format!("model.row must be in 1..=6, got {r:?}")),
            },
            other => return Err(format!("model.family '{other}' is not one of tfim, kitaev, heisenberg, complexity")),
        };
        r.map_err(|e| format!("model: {e}"))
    }

    pub fn beta(&self) -> f64 {
        self.settings.model.beta.unwrap_or(1.0)
    }

    pub fn n_ancilla(&self, family: &HamiltonianFamily) -> usize {
        self.settings.model.n_ancilla.map(|a| a as usize).unwrap_or(family.n_qubits)
    }

    pub fn seed(&self) -> u64 {
        self.settings.train.seed.unwrap_or(0) as u64
    }

    pub fn execution(&self) -> Execution {
        match self.settings.train.execution.as_deref() {
            Some("serial") => Execution::Serial,
            _ => Execution::Parallel,
        }
    }

    pub fn gradient(&self) -> GradientMethod {
        match self.settings.train.gradient.as_deref() {
            Some("central") => GradientMethod::CentralDifference {
                step: self.settings.train.grad_step.unwrap_or(DEFAULT_GRAD_STEP),
            },
            _ => GradientMethod::Reverse,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.settings.output.dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    /// Points of a grid key that resolution has filled in.
    pub fn grid(&self, spec: &Option<String>) -> Vec<Vec<f64>> {
        GridSpec::parse(spec.as_deref().expect("resolved grid")).expect("validated grid").points()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.settings).expect("config serializes")
    }
}
