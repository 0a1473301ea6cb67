//! Exact reference thermodynamics from dense diagonalization (k_B = 1).

use crate::error::{Error, Result};
use crate::hamiltonian::{expectation, to_dense, HamiltonianFamily, Pauli, PauliString, PauliSum, DENSE_LIMIT};
use crate::linalg::{hermitian_eig, von_neumann_entropy, DensityMatrix};
use crate::par::{map_slice, Execution};

/// Exact Gibbs state of `H` at inverse temperature `beta`.
#[derive(Debug, Clone)]
pub struct ThermalPoint {
    pub beta: f64,
    pub gibbs_state: DensityMatrix,
    /// `ln Z`, kept in log form so large `beta * |E|` cannot overflow.
    pub log_partition: f64,
    pub free_energy: f64,
}

impl ThermalPoint {
    pub fn partition_fn(&self) -> f64 {
        self.log_partition.exp()
    }
}

pub fn exact_gibbs(hs: &PauliSum, beta: f64) -> Result<ThermalPoint> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::NonPositiveBeta(beta));
    }
    if hs.n_qubits() > DENSE_LIMIT {
        return Err(Error::TooLarge { n_qubits: hs.n_qubits(), limit: DENSE_LIMIT });
    }
    let spec = hermitian_eig(&to_dense(hs)?)?;
    let e0 = spec.eigenvalues[0];
    let weights: Vec<f64> = spec.eigenvalues.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let shifted_z: f64 = weights.iter().sum();
    let log_partition = -beta * e0 + shifted_z.ln();
    let gibbs = spec.map(|e| (-beta * (e - e0)).exp() / shifted_z);
    Ok(ThermalPoint {
        beta,
        gibbs_state: DensityMatrix::new_unchecked(gibbs),
        log_partition,
        free_energy: -log_partition / beta,
    })
}

/// `G = <H> - T S(rho)`
pub fn free_energy_of_state(rho: &DensityMatrix, hs: &PauliSum, temperature: f64) -> Result<f64> {
    Ok(expectation(hs, rho)? - temperature * von_neumann_entropy(rho)?)
}

fn total_z(n: usize) -> PauliSum {
    PauliSum::new(n, (0..n).map(|q| PauliString::single(1.0, n, q, Pauli::Z))).expect("uniform width")
}

fn single_param(family: &HamiltonianFamily) -> Result<()> {
    if family.param_dim() != 1 {
        return Err(Error::ConfigInvalid(format!(
            "{} has {} parameters; magnetization scans need exactly one field parameter",
            family.label(),
            family.param_dim()
        )));
    }
    Ok(())
}

/// `M = <sum_i Z_i>` on the exact Gibbs state at field `h` and temperature `T`.
pub fn magnetization(family: &HamiltonianFamily, h: f64, temperature: f64) -> Result<f64> {
    single_param(family)?;
    let point = exact_gibbs(&family.build(&[h])?, 1.0 / temperature)?;
    expectation(&total_z(family.n_qubits), &point.gibbs_state)
}

/// Default finite-difference step for [`susceptibility`].
pub const DEFAULT_DH: f64 = 1e-3;

/// Central difference `dM/dh`.
pub fn susceptibility(family: &HamiltonianFamily, h: f64, temperature: f64, dh: f64) -> Result<f64> {
    if !(dh > 0.0 && dh <= 0.1) {
        return Err(Error::ConfigInvalid(format!("dh = {dh} outside (0, 0.1]")));
    }
    let up = magnetization(family, h + dh, temperature)?;
    let down = magnetization(family, h - dh, temperature)?;
    Ok((up - down) / (2.0 * dh))
}

/// `T = 0.02, 0.04, ..., 1.0`
pub fn default_temperature_grid() -> Vec<f64> {
    (1..=50).map(|k| k as f64 * 0.02).collect()
}

/// Index of the first maximum (ties resolve to the smallest index).
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverScan {
    pub h: f64,
    pub temperatures: Vec<f64>,
    pub chi: Vec<f64>,
    pub argmax: usize,
}

impl CrossoverScan {
    pub fn t_star(&self) -> f64 {
        self.temperatures[self.argmax]
    }

    /// Maximum strictly inside the grid.
    pub fn is_interior(&self) -> bool {
        self.argmax > 0 && self.argmax + 1 < self.temperatures.len()
    }
}

/// Susceptibility over an ascending temperature grid and its maximizer.
pub fn crossover_scan(
    family: &HamiltonianFamily,
    h: f64,
    grid: &[f64],
    dh: f64,
    exec: Execution,
) -> Result<CrossoverScan> {
    if grid.len() < 5 || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
        return Err(Error::EmptyGrid);
    }
    let chi = map_slice(exec, grid, |&t| susceptibility(family, h, t, dh)).into_iter().collect::<Result<Vec<_>>>()?;
    let argmax = argmax_first(&chi).ok_or(Error::EmptyGrid)?;
    Ok(CrossoverScan { h, temperatures: grid.to_vec(), chi, argmax })
}

/// Grid temperature maximizing the susceptibility at field `h`.
pub fn crossover_temperature(family: &HamiltonianFamily, h: f64, grid: &[f64]) -> Result<f64> {
    Ok(crossover_scan(family, h, grid, DEFAULT_DH, Execution::default())?.t_star())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_tfim;
    use crate::linalg::fidelity;

    #[test]
    fn zero_hamiltonian() {
        let p = exact_gibbs(&PauliSum::empty(2), 2.0).unwrap();
        assert!(p.gibbs_state.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-14);
        assert!((p.free_energy + 4f64.ln() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_spin_and_two_site_tfim() {
        let h = PauliSum::new(1, [PauliString::from_letters(-1.0, "Z").unwrap()]).unwrap();
        let p = exact_gibbs(&h, 1.0).unwrap();
        assert!((p.free_energy + (2.0 * 1f64.cosh()).ln()).abs() < 1e-12);
        assert!((p.free_energy + 1.1269).abs() < 1e-4);

        let p = exact_gibbs(&build_tfim(2, 1.0, 0.0).unwrap(), 1.0).unwrap();
        let expected = -(2.0 * 1f64.exp() + 2.0 * (-1f64).exp()).ln();
        assert!((p.free_energy - expected).abs() < 1e-12);
        assert!((p.free_energy + 1.8201).abs() < 1e-4);
        assert!((p.partition_fn() - (2.0 * 1f64.exp() + 2.0 * (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn beta_errors() {
        assert!(matches!(exact_gibbs(&PauliSum::empty(1), 0.0), Err(Error::NonPositiveBeta(_))));
        assert!(matches!(exact_gibbs(&PauliSum::empty(1), -1.0), Err(Error::NonPositiveBeta(_))));
        let big = build_tfim(11, 1.0, 1.0).unwrap();
        assert!(matches!(exact_gibbs(&big, 1.0), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn high_temperature_limit() {
        let p = exact_gibbs(&build_tfim(3, 1.0, 0.7).unwrap(), 1e-6).unwrap();
        let f = fidelity(&p.gibbs_state, &DensityMatrix::maximally_mixed(3)).unwrap();
        assert!(f >= 1.0 - 1e-6);
    }

    #[test]
    fn free_energy_examples() {
        let g = free_energy_of_state(&DensityMatrix::maximally_mixed(2), &PauliSum::empty(2), 1.0).unwrap();
        assert!((g + 2.0 * 2f64.ln()).abs() < 1e-12);

        let hs = build_tfim(2, 1.0, 1.0).unwrap();
        let p = exact_gibbs(&hs, 1.0).unwrap();
        let g = free_energy_of_state(&p.gibbs_state, &hs, 1.0).unwrap();
        assert!((g - p.free_energy).abs() < 1e-8);

        let field = PauliSum::new(2, [PauliString::from_letters(-1.0, "ZI").unwrap(), PauliString::from_letters(-1.0, "IZ").unwrap()])
            .unwrap();
        let zz = DensityMatrix::from_diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((free_energy_of_state(&zz, &field, 1.0).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn beta_derivative_identity() {
        // d(beta G)/d beta = -d ln Z / d beta = <H>
        let hs = build_tfim(2, 1.0, 1.0).unwrap();
        let b = 1.0;
        let db = 1e-4;
        let lnz = |beta: f64| exact_gibbs(&hs, beta).unwrap().log_partition;
        let numeric = -(lnz(b + db) - lnz(b - db)) / (2.0 * db);
        let energy = expectation(&hs, &exact_gibbs(&hs, b).unwrap().gibbs_state).unwrap();
        assert!((numeric - energy).abs() < 1e-4);
    }

    #[test]
    fn magnetization_limits() {
        let kitaev = HamiltonianFamily::kitaev_ring(3, 1.0).unwrap();
        assert!(magnetization(&kitaev, 0.0, 0.5).unwrap().abs() < 1e-10);
        let m = magnetization(&kitaev, 50.0, 0.1).unwrap();
        assert!((m - 3.0).abs() < 1e-3);
        let m = magnetization(&kitaev, 1.0, 0.1).unwrap();
        assert!(m > 0.0 && m < 3.0);
        assert!(magnetization(&HamiltonianFamily::heisenberg_fields(), 1.0, 1.0).is_err());
    }

    #[test]
    fn free_spin_susceptibility() {
        // H = -h Z: M = tanh(beta h), chi = beta sech^2(beta h)
        let basis = vec![PauliSum::new(1, [PauliString::from_letters(-1.0, "Z").unwrap()]).unwrap()];
        let fam = HamiltonianFamily::generic(basis).unwrap();
        let chi = susceptibility(&fam, 0.0, 1.0, 1e-3).unwrap();
        assert!((chi - 1.0).abs() < 1e-6);
        assert!(susceptibility(&fam, 0.0, 1.0, 0.0).is_err());
        assert!(susceptibility(&fam, 0.0, 1.0, 0.2).is_err());
        // chi = 1/T at h = 0 decreases with T: boundary maximum
        let scan = crossover_scan(&fam, 0.0, &default_temperature_grid(), DEFAULT_DH, Execution::Serial).unwrap();
        assert_eq!(scan.argmax, 0);
        assert!(!scan.is_interior());
    }

    #[test]
    fn kitaev_susceptibility_not_field_symmetric() {
        // the Y..Y boundary string breaks h -> -h; values from an independent numpy diagonalization
        let fam = HamiltonianFamily::kitaev_ring(3, 1.0).unwrap();
        let a = susceptibility(&fam, 0.3, 0.5, DEFAULT_DH).unwrap();
        let b = susceptibility(&fam, -0.3, 0.5, DEFAULT_DH).unwrap();
        assert!((a - 3.0 * 0.465_385_496_182_233).abs() < 1e-6, "{a}");
        assert!((b - 3.0 * 0.694_361_104_632_946).abs() < 1e-6, "{b}");
        for &h in &[0.7, 0.9, 1.1, 1.4] {
            assert!(susceptibility(&fam, h, 0.3, DEFAULT_DH).unwrap() >= 0.0);
        }
    }

    #[test]
    fn argmax_ties_take_smallest() {
        assert_eq!(argmax_first(&[1.0, 3.0, 2.0, 3.0]), Some(1));
        assert_eq!(argmax_first(&[5.0, 4.0, 3.0]), Some(0));
        assert_eq!(argmax_first(&[]), None);
    }

    #[test]
    fn scan_grid_validation() {
        let fam = HamiltonianFamily::kitaev_ring(3, 1.0).unwrap();
        assert!(matches!(crossover_scan(&fam, 0.9, &[0.1, 0.2], DEFAULT_DH, Execution::Serial), Err(Error::EmptyGrid)));
        assert!(matches!(
            crossover_scan(&fam, 0.9, &[0.5, 0.4, 0.3, 0.2, 0.1], DEFAULT_DH, Execution::Serial),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn kitaev_interior_maximum_off_the_crossing() {
        let fam = HamiltonianFamily::kitaev_ring(3, 1.0).unwrap();
        let scan = crossover_scan(&fam, 0.9, &default_temperature_grid(), DEFAULT_DH, Execution::Serial).unwrap();
        assert!(scan.is_interior());
        assert!((crossover_temperature(&fam, 0.9, &default_temperature_grid()).unwrap() - scan.t_star()).abs() < 1e-15);
    }
}
