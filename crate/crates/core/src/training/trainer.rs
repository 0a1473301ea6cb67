use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{angle_grad_to_slots, meta_vqt_ansatz, nn_meta_vqt_ansatz, AnsatzSpec, ParamVector};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianFamily;
use crate::linalg::fidelity;
use crate::par::{map_slice, ordered_sum, Execution};
use crate::rng::SeedStream;
use crate::thermal::exact_gibbs;

use super::adam::AdamState;
use super::grad::{grad_central_diff, DEFAULT_GRAD_STEP};
use super::loss::{build_targets, point_eval, point_losses, prepared_state, PointTarget};
use super::mlp::Mlp;
use super::preparer::Preparer;

pub const META_LR: f64 = 0.01;
pub const NN_META_LR: f64 = 0.001;
pub const DEFAULT_META_EPOCHS: usize = 500;
pub const DEFAULT_HIDDEN: [usize; 3] = [16, 16, 16];

/// How circuit gradients are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GradientMethod {
    /// Two loss evaluations per parameter.
    CentralDifference { step: f64 },
    /// One forward and one reverse statevector sweep per training point.
    Reverse,
}

impl Default for GradientMethod {
    fn default() -> Self {
        GradientMethod::CentralDifference { step: DEFAULT_GRAD_STEP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// Linear encoding layers followed by trainable HVA layers.
    Meta { enc_layers: usize, hva_layers: usize },
    /// Network-driven SU2 and HVA layers; `hidden` lists hidden-layer widths.
    NnMeta { su2_layers: usize, hva_layers: usize, hidden: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaTrainConfig {
    pub family: HamiltonianFamily,
    pub beta: f64,
    pub h_train: Vec<Vec<f64>>,
    pub n_ancilla: usize,
    pub architecture: Architecture,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub gradient: GradientMethod,
    pub execution: Execution,
    /// Encoding weights start at `scale * uniform(-pi, pi)`; every other slot
    /// at `uniform(-pi, pi)`. Zero starts from an `h`-independent circuit.
    #[serde(default)]
    pub encoding_weight_scale: f64,
}

impl MetaTrainConfig {
    pub fn meta(family: HamiltonianFamily, h_train: Vec<Vec<f64>>, enc_layers: usize, hva_layers: usize) -> Self {
        Self {
            n_ancilla: family.n_qubits,
            family,
            beta: 1.0,
            h_train,
            architecture: Architecture::Meta { enc_layers, hva_layers },
            epochs: DEFAULT_META_EPOCHS,
            lr: META_LR,
            seed: 0,
            gradient: GradientMethod::default(),
            execution: Execution::default(),
            encoding_weight_scale: 0.0,
        }
    }

    pub fn nn_meta(
        family: HamiltonianFamily,
        h_train: Vec<Vec<f64>>,
        su2_layers: usize,
        hva_layers: usize,
        hidden: Vec<usize>,
    ) -> Self {
        Self {
            architecture: Architecture::NnMeta { su2_layers, hva_layers, hidden },
            lr: NN_META_LR,
            ..Self::meta(family, h_train, 0, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.h_train.is_empty() {
            problems.push("h_train is empty".to_string());
        }
        if let Some(h) = self.h_train.iter().find(|h| h.len() != self.family.param_dim()) {
            problems.push(format!("training point {h:?} does not have {} parameters", self.family.param_dim()));
        }
        if self.h_train.iter().flatten().any(|x| !x.is_finite()) {
            problems.push("training point is not finite".into());
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            problems.push(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            problems.push(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.encoding_weight_scale >= 0.0 && self.encoding_weight_scale.is_finite()) {
            problems.push(format!("encoding_weight_scale must be non-negative, got {}", self.encoding_weight_scale));
        }
        if self.n_ancilla == 0 {
            problems.push("n_ancilla must be at least 1".into());
        }
        if let GradientMethod::CentralDifference { step } = self.gradient {
            if !(step > 0.0) {
                problems.push(format!("gradient step must be positive, got {step}"));
            }
        }
        if let Architecture::NnMeta { hidden, .. } = &self.architecture {
            if hidden.contains(&0) {
                problems.push("hidden layer widths must be positive".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Global loss at the start of each epoch.
    pub loss_history: Vec<f64>,
    /// Per-point free energies at the start of each epoch.
    pub point_history: Vec<Vec<f64>>,
    pub h_train: Vec<Vec<f64>>,
    /// Per-point free energies of the returned parameters.
    pub final_point_free_energies: Vec<f64>,
    pub wall_time_s: f64,
    pub preparer: Preparer,
}

fn uniform_angles(seeds: &mut SeedStream, n: usize) -> Vec<f64> {
    let mut rng = seeds.fork();
    (0..n).map(|_| rng.gen_range(-PI..PI)).collect()
}

/// Per-point losses and the gradient of their sum over trainable slots.
fn meta_loss_and_grad(
    spec: &AnsatzSpec,
    trainables: &[f64],
    targets: &[PointTarget],
    beta: f64,
    method: GradientMethod,
    exec: Execution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = 1.0 / beta;
    match method {
        GradientMethod::Reverse => {
            let rows: Vec<Result<(f64, Vec<f64>)>> = map_slice(exec, targets, |target| {
                let angles = spec.resolve_angles(trainables, &[], &target.h)?;
                let ev = point_eval(spec, &angles, target, t, true)?;
                let (gt, _) = angle_grad_to_slots(spec, &ev.angle_grad.expect("requested"), &target.h);
                Ok((ev.free_energy, gt))
            });
            let mut losses = Vec::with_capacity(targets.len());
            let mut grad = vec![0.0; trainables.len()];
            for row in rows {
                let (l, g) = row?;
                losses.push(l);
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            Ok((losses, grad))
        }
        GradientMethod::CentralDifference { step } => {
            let losses = point_losses(spec, trainables, &[], targets, beta, exec)?;
            let grad = grad_central_diff(
                |p| Ok(ordered_sum(&point_losses(spec, p, &[], targets, beta, Execution::Serial)?)),
                trainables,
                step,
                exec,
            )?;
            Ok((losses, grad))
        }
    }
}

/// Free energy at one point and its gradient over the external angles.
fn external_loss_and_grad(
    spec: &AnsatzSpec,
    externals: &[f64],
    target: &PointTarget,
    t: f64,
    method: GradientMethod,
) -> Result<(f64, Vec<f64>)> {
    let angles = spec.resolve_angles(&[], externals, &target.h)?;
    match method {
        GradientMethod::Reverse => {
            let ev = point_eval(spec, &angles, target, t, true)?;
            let (_, ge) = angle_grad_to_slots(spec, &ev.angle_grad.expect("requested"), &target.h);
            Ok((ev.free_energy, ge))
        }
        GradientMethod::CentralDifference { step } => {
            let g0 = point_eval(spec, &angles, target, t, false)?.free_energy;
            let grad = grad_central_diff(
                |p| {
                    let a = spec.resolve_angles(&[], p, &target.h)?;
                    Ok(point_eval(spec, &a, target, t, false)?.free_energy)
                },
                externals,
                step,
                Execution::Serial,
            )?;
            Ok((g0, grad))
        }
    }
}

fn nn_loss_and_grad(
    spec: &AnsatzSpec,
    mlp: &Mlp,
    targets: &[PointTarget],
    beta: f64,
    method: GradientMethod,
    exec: Execution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = 1.0 / beta;
    let rows: Vec<Result<(f64, Vec<f64>)>> = map_slice(exec, targets, |target| {
        let externals = mlp.forward(&target.h)?;
        let (l, ge) = external_loss_and_grad(spec, &externals, target, t, method)?;
        Ok((l, mlp.backward(&target.h, &ge)?))
    });
    let mut losses = Vec::with_capacity(targets.len());
    let mut grad = vec![0.0; mlp.n_params()];
    for row in rows {
        let (l, g) = row?;
        losses.push(l);
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((losses, grad))
}

fn nn_point_losses(spec: &AnsatzSpec, mlp: &Mlp, targets: &[PointTarget], beta: f64, exec: Execution) -> Result<Vec<f64>> {
    let t = 1.0 / beta;
    map_slice(exec, targets, |target| {
        let angles = spec.resolve_angles(&[], &mlp.forward(&target.h)?, &target.h)?;
        Ok(point_eval(spec, &angles, target, t, false)?.free_energy)
    })
    .into_iter()
    .collect()
}

fn check_finite(losses: &[f64]) -> Result<()> {
    match losses.iter().find(|l| !l.is_finite()) {
        Some(&l) => Err(Error::NonFiniteLoss(l)),
        None => Ok(()),
    }
}

/// Runs whichever trainer the configured architecture calls for.
pub fn train(config: &MetaTrainConfig) -> Result<TrainReport> {
    config.validate()?;
    let start = Instant::now();
    let targets = build_targets(&config.family, &config.h_train)?;
    let mut seeds = SeedStream::new(config.seed);
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut point_history = Vec::with_capacity(config.epochs);
    let (final_points, preparer) = match &config.architecture {
        Architecture::Meta { enc_layers, hva_layers } => {
            let spec = meta_vqt_ansatz(&config.family, config.n_ancilla, *enc_layers, *hva_layers)?;
            let mut params = uniform_angles(&mut seeds, spec.n_trainable);
            for slot in spec.encoding_weight_slots() {
                params[slot] *= config.encoding_weight_scale;
            }
            let mut adam = AdamState::new(params.len(), config.lr);
            for _ in 0..config.epochs {
                let (losses, grad) =
                    meta_loss_and_grad(&spec, &params, &targets, config.beta, config.gradient, config.execution)?;
                check_finite(&losses)?;
                loss_history.push(ordered_sum(&losses));
                point_history.push(losses);
                adam.update(&mut params, &grad)?;
            }
            let finals = point_losses(&spec, &params, &[], &targets, config.beta, config.execution)?;
            (finals, Preparer::Meta { ansatz: spec, trainables: ParamVector(params) })
        }
        Architecture::NnMeta { su2_layers, hva_layers, hidden } => {
            let spec = nn_meta_vqt_ansatz(&config.family, config.n_ancilla, *su2_layers, *hva_layers)?;
            let mut sizes = vec![config.family.param_dim()];
            sizes.extend(hidden);
            sizes.push(spec.n_external);
            let mut mlp = Mlp::random(&sizes, &mut seeds.fork())?;
            let mut params = mlp.params();
            let mut adam = AdamState::new(params.len(), config.lr);
            for _ in 0..config.epochs {
                let (losses, grad) =
                    nn_loss_and_grad(&spec, &mlp, &targets, config.beta, config.gradient, config.execution)?;
                check_finite(&losses)?;
                loss_history.push(ordered_sum(&losses));
                point_history.push(losses);
                adam.update(&mut params, &grad)?;
                mlp.set_params(&params)?;
            }
            let finals = nn_point_losses(&spec, &mlp, &targets, config.beta, config.execution)?;
            (finals, Preparer::NnMeta { ansatz: spec, mlp })
        }
    };
    Ok(TrainReport {
        loss_history,
        point_history,
        h_train: config.h_train.clone(),
        final_point_free_energies: final_points,
        wall_time_s: start.elapsed().as_secs_f64(),
        preparer,
    })
}

pub fn train_meta_vqt(config: &MetaTrainConfig) -> Result<TrainReport> {
    if !matches!(config.architecture, Architecture::Meta { .. }) {
        return Err(Error::ConfigInvalid("train_meta_vqt needs a Meta architecture".into()));
    }
    train(config)
}

pub fn train_nn_meta_vqt(config: &MetaTrainConfig) -> Result<TrainReport> {
    if !matches!(config.architecture, Architecture::NnMeta { .. }) {
        return Err(Error::ConfigInvalid("train_nn_meta_vqt needs an NnMeta architecture".into()));
    }
    train(config)
}

/// Starting point of a single-point run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "init", rename_all = "snake_case")]
pub enum VqtInit {
    /// Trainable slots followed by external slots.
    Params { params: ParamVector },
    /// Uniform(-pi, pi) from this seed.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleReport {
    pub h: Vec<f64>,
    pub loss_history: Vec<f64>,
    pub params: ParamVector,
    pub initial_fidelity: f64,
    pub final_fidelity: f64,
    pub final_free_energy: f64,
    pub exact_free_energy: f64,
}

/// Ordinary variational thermalizer at one parameter point. All slots of
/// `spec` (trainable then external) are optimized directly.
#[allow(clippy::too_many_arguments)]
pub fn train_vqt_single(
    family: &HamiltonianFamily,
    h: &[f64],
    beta: f64,
    spec: &AnsatzSpec,
    init: &VqtInit,
    epochs: usize,
    lr: f64,
    method: GradientMethod,
) -> Result<SingleReport> {
    if !(lr > 0.0) {
        return Err(Error::ConfigInvalid(format!("lr must be positive, got {lr}")));
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    if spec.n_system != family.n_qubits || spec.param_dim != family.param_dim() {
        return Err(Error::ConfigInvalid("ansatz does not fit the family".into()));
    }
    let n_tr = spec.n_trainable;
    let n_all = n_tr + spec.n_external;
    let mut params = match init {
        VqtInit::Params { params } => {
            if params.len() != n_all {
                return Err(Error::ConfigInvalid(format!("{} initial values for {n_all} slots", params.len())));
            }
            params.0.clone()
        }
        VqtInit::Random { seed } => uniform_angles(&mut SeedStream::new(*seed), n_all),
    };
    let target = PointTarget::new(family, h)?;
    let exact = exact_gibbs(&target.hamiltonian, beta)?;
    let t = 1.0 / beta;
    let loss_of = |p: &[f64]| -> Result<f64> {
        let angles = spec.resolve_angles(&p[..n_tr], &p[n_tr..], h)?;
        Ok(point_eval(spec, &angles, &target, t, false)?.free_energy)
    };
    let fidelity_of = |p: &[f64]| -> Result<f64> {
        let angles = spec.resolve_angles(&p[..n_tr], &p[n_tr..], h)?;
        fidelity(&exact.gibbs_state, &prepared_state(spec, &angles)?)
    };
    let initial_fidelity = fidelity_of(&params)?;
    let mut adam = AdamState::new(n_all, lr);
    let mut loss_history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let (loss, grad) = match method {
            GradientMethod::Reverse => {
                let angles = spec.resolve_angles(&params[..n_tr], &params[n_tr..], h)?;
                let ev = point_eval(spec, &angles, &target, t, true)?;
                let (mut gt, ge) = angle_grad_to_slots(spec, &ev.angle_grad.expect("requested"), h);
                gt.extend(ge);
                (ev.free_energy, gt)
            }
            GradientMethod::CentralDifference { step } => {
                (loss_of(&params)?, grad_central_diff(loss_of, &params, step, Execution::Serial)?)
            }
        };
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(loss));
        }
        loss_history.push(loss);
        adam.update(&mut params, &grad)?;
    }
    Ok(SingleReport {
        h: h.to_vec(),
        loss_history,
        final_fidelity: fidelity_of(&params)?,
        final_free_energy: loss_of(&params)?,
        exact_free_energy: exact.free_energy,
        initial_fidelity,
        params: ParamVector(params),
    })
}
