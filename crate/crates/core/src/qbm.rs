//! Visible-only quantum Boltzmann machine trained through a frozen Gibbs
//! state preparer: only the Hamiltonian coefficients are optimized.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianFamily;
use crate::linalg::{kl_divergence, trace_distance, DensityMatrix, ZeroSupport};
use crate::par::Execution;
use crate::rng::SeedStream;
use crate::thermal::exact_gibbs;
use crate::training::{grad_central_diff, Checkpoint, GibbsPreparer, DEFAULT_GRAD_STEP};

pub const QBM_LR: f64 = 0.1;
pub const DEFAULT_QBM_EPOCHS: usize = 200;
/// Target distribution of the two-qubit reproduction run.
pub const DEFAULT_TARGET: [f64; 4] = [0.62, 0.17, 0.17, 0.04];

/// Computational-basis populations `p_v = <v|rho|v>`.
pub fn visible_distribution(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let p = rho.populations();
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < -1e-9) {
        return Err(Error::InvalidDensityMatrix(format!("populations sum to {sum}")));
    }
    Ok(p.into_iter().map(|x| x.max(0.0)).collect())
}

/// `KL(p_target || p_model)`
pub fn qbm_loss(p_target: &[f64], rho_model: &DensityMatrix) -> Result<f64> {
    kl_divergence(p_target, &visible_distribution(rho_model)?, ZeroSupport::Floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QbmConfig {
    pub p_target: Vec<f64>,
    pub beta: f64,
    pub epochs: usize,
    pub lr: f64,
    pub grad_step: f64,
    pub seed: u64,
    /// Overrides the seeded uniform(-1, 1) start.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for QbmConfig {
    fn default() -> Self {
        Self {
            p_target: DEFAULT_TARGET.to_vec(),
            beta: 1.0,
            epochs: DEFAULT_QBM_EPOCHS,
            lr: QBM_LR,
            grad_step: DEFAULT_GRAD_STEP,
            seed: 0,
            init: None,
            execution: Execution::default(),
        }
    }
}

impl QbmConfig {
    pub fn validate(&self, n_visible: usize, param_dim: usize) -> Result<()> {
        let mut problems = Vec::new();
        let sum: f64 = self.p_target.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.p_target.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            problems.push(format!("p_target must be a probability vector (sum {sum})"));
        }
        if self.p_target.len() != 1 << n_visible {
            problems.push(format!("p_target has {} entries, expected {}", self.p_target.len(), 1usize << n_visible));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            problems.push(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.grad_step > 0.0) {
            problems.push(format!("grad_step must be positive, got {}", self.grad_step));
        }
        if !(self.beta > 0.0) {
            problems.push(format!("beta must be positive, got {}", self.beta));
        }
        if let Some(x) = &self.init {
            if x.len() != param_dim {
                problems.push(format!("init has {} entries, expected {param_dim}", x.len()));
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
pub struct QbmReport {
    pub kl_history: Vec<f64>,
    /// Prepared vs exact Gibbs state at the coefficients of each epoch.
    pub trace_distance_history: Vec<f64>,
    pub coeff_history: Vec<Vec<f64>>,
    pub initial_coeffs: Vec<f64>,
    pub final_coeffs: Vec<f64>,
    pub final_kl: f64,
    pub p_model: Vec<f64>,
    pub preparer_calls: usize,
}

impl QbmReport {
    pub fn mean_trace_distance(&self) -> f64 {
        if self.trace_distance_history.is_empty() {
            return f64::NAN;
        }
        self.trace_distance_history.iter().sum::<f64>() / self.trace_distance_history.len() as f64
    }
}

/// Wraps a preparer and counts every state it hands out.
pub struct CountingPreparer<'a> {
    inner: &'a dyn GibbsPreparer,
    calls: AtomicUsize,
}

impl<'a> CountingPreparer<'a> {
    pub fn new(inner: &'a dyn GibbsPreparer) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GibbsPreparer for CountingPreparer<'_> {
    fn prepare(&self, h: &[f64]) -> Result<DensityMatrix> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.prepare(h)
    }
}

/// Trains `family` through a checkpoint that must have been trained for the
/// same family and inverse temperature.
pub fn train_qbm(config: &QbmConfig, family: &HamiltonianFamily, checkpoint: &Checkpoint) -> Result<QbmReport> {
    checkpoint.ensure_matches(family, config.beta)?;
    train_qbm_with(config, family, &checkpoint.preparer)
}

/// Gradient descent on the coefficients: one loss evaluation plus two probes
/// per coefficient per epoch, so `epochs * (1 + 2 p)` preparer calls.
pub fn train_qbm_with(
    config: &QbmConfig,
    family: &HamiltonianFamily,
    preparer: &dyn GibbsPreparer,
) -> Result<QbmReport> {
    let p = family.param_dim();
    config.validate(family.n_qubits, p)?;
    let counter = CountingPreparer::new(preparer);
    let mut x = match &config.init {
        Some(v) => v.clone(),
        None => {
            let mut rng = SeedStream::new(config.seed).fork();
            (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()
        }
    };
    let initial_coeffs = x.clone();
    let loss_at = |c: &[f64]| -> Result<f64> {
        let l = qbm_loss(&config.p_target, &counter.prepare(c)?)?;
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss(l));
        }
        Ok(l)
    };
    let mut kl_history = Vec::with_capacity(config.epochs);
    let mut trace_distance_history = Vec::with_capacity(config.epochs);
    let mut coeff_history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let rho = counter.prepare(&x)?;
        let kl = qbm_loss(&config.p_target, &rho)?;
        if !kl.is_finite() {
            return Err(Error::NonFiniteLoss(kl));
        }
        let exact = exact_gibbs(&family.build(&x)?, config.beta)?;
        trace_distance_history.push(trace_distance(&exact.gibbs_state, &rho)?);
        kl_history.push(kl);
        coeff_history.push(x.clone());
        let g = grad_central_diff(loss_at, &x, config.grad_step, config.execution)?;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= config.lr * gi;
        }
    }
    let calls = counter.calls();
    // final read-out goes through the inner preparer so the count stays per-epoch
    let p_model = visible_distribution(&preparer.prepare(&x)?)?;
    let final_kl = kl_divergence(&config.p_target, &p_model, ZeroSupport::Floor)?;
    Ok(QbmReport {
        kl_history,
        trace_distance_history,
        coeff_history,
        initial_coeffs,
        final_coeffs: x,
        final_kl,
        p_model,
        preparer_calls: calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;
    use crate::training::ExactPreparer;

    #[test]
    fn visible_distribution_examples() {
        let rho = DensityMatrix::from_diagonal(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(visible_distribution(&rho).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!(visible_distribution(&mixed).unwrap().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn visible_distribution_of_heisenberg_gibbs_is_its_diagonal() {
        let hs = HamiltonianFamily::heisenberg_fields().build(&[1.0, 1.0]).unwrap();
        let rho = exact_gibbs(&hs, 1.0).unwrap().gibbs_state;
        let p = visible_distribution(&rho).unwrap();
        let m: &ComplexMatrix = rho.matrix();
        for (i, pi) in p.iter().enumerate() {
            assert!((pi - m.get(i, i).re).abs() < 1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        let target = DensityMatrix::from_diagonal(&DEFAULT_TARGET).unwrap();
        assert!(qbm_loss(&DEFAULT_TARGET, &target).unwrap().abs() < 1e-15);
        let uniform = DensityMatrix::maximally_mixed(2);
        let oracle: f64 = DEFAULT_TARGET.iter().map(|p| p * (p / 0.25).ln()).sum();
        assert!((qbm_loss(&DEFAULT_TARGET, &uniform).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.358_692).abs() < 1e-6);
        // moving along the mixing path toward the target lowers the loss
        let mut last = f64::INFINITY;
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let q: Vec<f64> = DEFAULT_TARGET.iter().map(|p| t * p + (1.0 - t) * 0.25).collect();
            let l = qbm_loss(&DEFAULT_TARGET, &DensityMatrix::from_diagonal(&q).unwrap()).unwrap();
            assert!(l <= last);
            last = l;
        }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let fam = HamiltonianFamily::heisenberg_fields();
        let oracle = ExactPreparer { family: fam.clone(), beta: 1.0 };
        let cfg = QbmConfig { epochs: 0, seed: 4, ..QbmConfig::default() };
        let r = train_qbm_with(&cfg, &fam, &oracle).unwrap();
        assert!(r.kl_history.is_empty());
        assert_eq!(r.final_coeffs, r.initial_coeffs);
        assert!(r.initial_coeffs.iter().all(|x| x.abs() <= 1.0));
        assert_eq!(r.preparer_calls, 0);
    }

    #[test]
    fn oracle_run_converges_and_counts_calls() {
        let fam = HamiltonianFamily::heisenberg_fields();
        let oracle = ExactPreparer { family: fam.clone(), beta: 1.0 };
        let cfg = QbmConfig { epochs: 200, ..QbmConfig::default() };
        let r = train_qbm_with(&cfg, &fam, &oracle).unwrap();
        assert_eq!(r.preparer_calls, 200 * 5);
        assert!(r.kl_history.iter().all(|&k| k >= 0.0));
        assert!(r.final_kl < 0.005, "{}", r.final_kl);
        assert!(r.mean_trace_distance() < 1e-9);
        let serial = train_qbm_with(&QbmConfig { execution: Execution::Serial, ..cfg }, &fam, &oracle).unwrap();
        assert_eq!(serial.kl_history, r.kl_history);
    }

    #[test]
    fn gradient_vanishes_at_matching_distribution() {
        // target chosen as the oracle's own distribution at (0.3, 0.8)
        let fam = HamiltonianFamily::heisenberg_fields();
        let oracle = ExactPreparer { family: fam.clone(), beta: 1.0 };
        let at = [0.3, 0.8];
        let p_target = visible_distribution(&oracle.prepare(&at).unwrap()).unwrap();
        let g = grad_central_diff(
            |c| qbm_loss(&p_target, &oracle.prepare(c)?),
            &at,
            DEFAULT_GRAD_STEP,
            Execution::Serial,
        )
        .unwrap();
        assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-4);
    }

    #[test]
    fn checkpoint_family_is_enforced() {
        use crate::circuit::nn_meta_vqt_ansatz;
        use crate::training::{Mlp, Preparer};
        let fam = HamiltonianFamily::heisenberg_fields();
        let ansatz = nn_meta_vqt_ansatz(&fam, 2, 1, 0).unwrap();
        let mlp = Mlp::zeros(&[2, 3, ansatz.n_external]).unwrap();
        let cp = Checkpoint::new(fam.clone(), 1.0, Preparer::NnMeta { ansatz, mlp });
        let before = cp.to_json().unwrap();
        let cfg = QbmConfig { epochs: 3, ..QbmConfig::default() };
        let r = train_qbm(&cfg, &fam, &cp).unwrap();
        assert_eq!(r.preparer_calls, 15);
        assert_eq!(cp.to_json().unwrap(), before);
        let other = HamiltonianFamily::complexity(6).unwrap();
        assert!(matches!(train_qbm(&cfg, &other, &cp), Err(Error::CheckpointMismatch(_))));
        let hot = QbmConfig { beta: 2.0, ..cfg };
        assert!(matches!(train_qbm(&hot, &fam, &cp), Err(Error::CheckpointMismatch(_))));
    }

    #[test]
    fn config_validation() {
        let bad = QbmConfig { p_target: vec![0.5, 0.6, 0.0, 0.0], lr: 0.0, ..QbmConfig::default() };
        match bad.validate(2, 2) {
            Err(Error::ConfigInvalid(msg)) => {
                assert!(msg.contains("p_target") && msg.contains("lr"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(QbmConfig::default().validate(3, 2).is_err());
    }
}
