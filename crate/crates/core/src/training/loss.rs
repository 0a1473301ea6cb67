//! Free-energy cost of a circuit output and its summed meta-loss.

use crate::circuit::{adjoint_angle_gradient, reduced_state, simulate_angles, AnsatzSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::{to_dense, HamiltonianFamily, PauliSum};
use crate::linalg::{entropy_of_spectrum, hermitian_eig, ComplexMatrix, DensityMatrix, C64, EIG_CLAMP};
use crate::par::{map_slice, ordered_sum, Execution};
use crate::thermal::exact_gibbs;

/// One training or test point with its Hamiltonian prebuilt.
#[derive(Debug, Clone)]
pub struct PointTarget {
    pub h: Vec<f64>,
    pub hamiltonian: PauliSum,
    pub dense: ComplexMatrix,
}

impl PointTarget {
    pub fn new(family: &HamiltonianFamily, h: &[f64]) -> Result<Self> {
        let hamiltonian = family.build(h)?;
        let dense = to_dense(&hamiltonian)?;
        Ok(Self { h: h.to_vec(), hamiltonian, dense })
    }

    pub fn exact_free_energy(&self, beta: f64) -> Result<f64> {
        Ok(exact_gibbs(&self.hamiltonian, beta)?.free_energy)
    }
}

pub fn build_targets(family: &HamiltonianFamily, points: &[Vec<f64>]) -> Result<Vec<PointTarget>> {
    points.iter().map(|h| PointTarget::new(family, h)).collect()
}

/// Free energy of a point, optionally with its gradient over every gate angle.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub free_energy: f64,
    pub angle_grad: Option<Vec<f64>>,
}

fn real_trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a.get(i, j) * b.get(j, i)).re;
        }
    }
    acc
}

/// `G = Tr[rho H] - T S(rho)` for the reduced output of `angles`. With
/// `with_grad`, also `dG/d angle` from one reverse sweep using
/// `dG = Tr[d rho (H + T ln rho)]`.
pub fn point_eval(
    spec: &AnsatzSpec,
    angles: &[f64],
    target: &PointTarget,
    temperature: f64,
    with_grad: bool,
) -> Result<PointEval> {
    let psi = simulate_angles(spec, angles)?;
    let rho = reduced_state(&psi, spec.n_system)?;
    if rho.dim() != target.dense.rows() {
        return Err(Error::DimensionMismatch { expected: target.dense.rows(), found: rho.dim() });
    }
    let spectrum = hermitian_eig(rho.matrix())?;
    let energy = real_trace_product(rho.matrix(), &target.dense);
    let free_energy = energy - temperature * entropy_of_spectrum(&spectrum.eigenvalues);
    if !free_energy.is_finite() {
        return Err(Error::NonFiniteLoss(free_energy));
    }
    if !with_grad {
        return Ok(PointEval { free_energy, angle_grad: None });
    }
    let log_rho = spectrum.map(|l| l.max(EIG_CLAMP).ln());
    let mut k = target.dense.clone();
    for (kv, lv) in k.as_mut_slice().iter_mut().zip(log_rho.as_slice()) {
        *kv += lv * temperature;
    }
    let o_psi = apply_system_operator(&k, psi.amplitudes(), spec.n_qubits() - spec.n_system);
    let grad = adjoint_angle_gradient(spec, angles, &psi, o_psi)?;
    Ok(PointEval { free_energy, angle_grad: Some(grad) })
}

/// `(K (x) I_anc) psi` with the system register on the high bits.
fn apply_system_operator(k: &ComplexMatrix, psi: &[C64], n_ancilla: usize) -> Vec<C64> {
    let da = 1usize << n_ancilla;
    let ds = k.rows();
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for s in 0..ds {
        let row = &mut out[s * da..(s + 1) * da];
        for t in 0..ds {
            let kst = k.get(s, t);
            if kst == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, &p) in row.iter_mut().zip(&psi[t * da..(t + 1) * da]) {
                *o += kst * p;
            }
        }
    }
    out
}

/// Reduced system state for resolved angles.
pub fn prepared_state(spec: &AnsatzSpec, angles: &[f64]) -> Result<DensityMatrix> {
    reduced_state(&simulate_angles(spec, angles)?, spec.n_system)
}

/// Sum over training points of the free energy of the prepared state, in
/// training-point order.
pub fn global_loss(
    spec: &AnsatzSpec,
    trainables: &[f64],
    externals: &[f64],
    targets: &[PointTarget],
    beta: f64,
    exec: Execution,
) -> Result<f64> {
    let per_point = point_losses(spec, trainables, externals, targets, beta, exec)?;
    Ok(ordered_sum(&per_point))
}

pub fn point_losses(
    spec: &AnsatzSpec,
    trainables: &[f64],
    externals: &[f64],
    targets: &[PointTarget],
    beta: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    let t = 1.0 / beta;
    map_slice(exec, targets, |target| {
        let angles = spec.resolve_angles(trainables, externals, &target.h)?;
        Ok(point_eval(spec, &angles, target, t, false)?.free_energy)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{meta_vqt_ansatz, nn_meta_vqt_ansatz};
    use crate::hamiltonian::expectation;
    use crate::linalg::von_neumann_entropy;
    use crate::thermal::free_energy_of_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()
    }

    #[test]
    fn point_matches_free_energy_of_state() {
        let fam = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let spec = meta_vqt_ansatz(&fam, 2, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tr = random_vec(&mut rng, spec.n_trainable);
        let target = PointTarget::new(&fam, &[0.7]).unwrap();
        let angles = spec.resolve_angles(&tr, &[], &[0.7]).unwrap();
        let g = point_eval(&spec, &angles, &target, 0.5, false).unwrap().free_energy;
        let rho = prepared_state(&spec, &angles).unwrap();
        let oracle = expectation(&target.hamiltonian, &rho).unwrap() - 0.5 * von_neumann_entropy(&rho).unwrap();
        assert!((g - oracle).abs() < 1e-10);
        assert!((g - free_energy_of_state(&rho, &target.hamiltonian, 0.5).unwrap()).abs() < 1e-10);
        // single training point sum equals that point
        let single = global_loss(&spec, &tr, &[], std::slice::from_ref(&target), 2.0, Execution::Serial).unwrap();
        assert!((single - g).abs() < 1e-12);
    }

    #[test]
    fn global_loss_above_exact_sum() {
        let fam = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let spec = meta_vqt_ansatz(&fam, 2, 2, 2).unwrap();
        let hs: Vec<Vec<f64>> = (0..10).map(|i| vec![-2.0 + 4.0 * i as f64 / 9.0]).collect();
        let targets = build_targets(&fam, &hs).unwrap();
        let exact: f64 = targets.iter().map(|t| t.exact_free_energy(1.0).unwrap()).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let tr = random_vec(&mut rng, spec.n_trainable);
            let l = global_loss(&spec, &tr, &[], &targets, 1.0, Execution::Serial).unwrap();
            assert!(l >= exact - 1e-9);
            let p = global_loss(&spec, &tr, &[], &targets, 1.0, Execution::Parallel).unwrap();
            assert_eq!(l, p);
        }
    }

    fn fd_angle_grad(spec: &AnsatzSpec, angles: &[f64], target: &PointTarget, t: f64) -> Vec<f64> {
        let step = 1e-5;
        (0..angles.len())
            .map(|i| {
                let mut a = angles.to_vec();
                a[i] += step;
                let up = point_eval(spec, &a, target, t, false).unwrap().free_energy;
                a[i] -= 2.0 * step;
                let down = point_eval(spec, &a, target, t, false).unwrap().free_energy;
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn reverse_sweep_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for fam in [
            HamiltonianFamily::tfim(2, 1.0).unwrap(),
            HamiltonianFamily::kitaev_ring(3, 1.0).unwrap(),
            HamiltonianFamily::heisenberg_fields(),
        ] {
            let spec = nn_meta_vqt_ansatz(&fam, fam.n_qubits, 2, 1).unwrap();
            let h = random_vec(&mut rng, fam.param_dim());
            let target = PointTarget::new(&fam, &h).unwrap();
            let angles = random_vec(&mut rng, spec.gates.len());
            let t = 0.7;
            let adj = point_eval(&spec, &angles, &target, t, true).unwrap().angle_grad.unwrap();
            let fd = fd_angle_grad(&spec, &angles, &target, t);
            for (a, f) in adj.iter().zip(&fd) {
                assert!((a - f).abs() < 1e-6, "{} {a} vs {f}", fam.label());
            }
        }
    }

    #[test]
    fn system_operator_matches_kron() {
        let k = ComplexMatrix::from_vec(
            2,
            2,
            vec![C64::new(1.0, 0.0), C64::new(0.0, -2.0), C64::new(0.0, 2.0), C64::new(-0.5, 0.0)],
        )
        .unwrap();
        let psi: Vec<C64> = (0..8).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let full = k.kron(&ComplexMatrix::identity(4)).mul_vec(&psi).unwrap();
        let fast = apply_system_operator(&k, &psi, 2);
        for (a, b) in full.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
