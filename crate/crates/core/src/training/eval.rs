use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianFamily;
use crate::linalg::{fidelity, trace_distance};
use crate::par::{map_slice, Execution};
use crate::thermal::{exact_gibbs, free_energy_of_state};

use super::preparer::GibbsPreparer;

/// Denominator guard for the relative free-energy error.
pub const REL_ERROR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub h: Vec<f64>,
    pub fidelity: f64,
    pub trace_distance: f64,
    pub g_var: f64,
    pub g_exact: f64,
    /// `|G_var - G_exact| / |G_exact|`, absent when `|G_exact|` is below the floor.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEvaluation {
    pub beta: f64,
    pub points: Vec<PointMetrics>,
    /// Indices whose relative error was skipped because `|G_exact|` is below the floor.
    pub degenerate: Vec<usize>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

impl GridEvaluation {
    pub fn mean_fidelity(&self) -> f64 {
        mean(self.points.iter().map(|p| p.fidelity))
    }

    pub fn min_fidelity(&self) -> f64 {
        self.points.iter().map(|p| p.fidelity).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_trace_distance(&self) -> f64 {
        mean(self.points.iter().map(|p| p.trace_distance))
    }

    pub fn std_trace_distance(&self) -> f64 {
        std_dev(self.points.iter().map(|p| p.trace_distance))
    }

    /// One [`Error::DegenerateDenominator`] per skipped point.
    pub fn warnings(&self) -> Vec<Error> {
        self.degenerate.iter().map(|&index| Error::DegenerateDenominator { index }).collect()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.points.iter().filter_map(|p| p.rel_error).fold(0.0, f64::max)
    }
}

/// Compares a preparer against the dense oracle at every test point.
pub fn evaluate_on_grid(
    preparer: &dyn GibbsPreparer,
    family: &HamiltonianFamily,
    h_test: &[Vec<f64>],
    beta: f64,
    exec: Execution,
) -> Result<GridEvaluation> {
    if h_test.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let t = 1.0 / beta;
    let rows: Vec<Result<PointMetrics>> = map_slice(exec, h_test, |h| {
        let hs = family.build(h)?;
        let exact = exact_gibbs(&hs, beta)?;
        let rho = preparer.prepare(h)?;
        let g_var = free_energy_of_state(&rho, &hs, t)?;
        let g_exact = exact.free_energy;
        let rel_error =
            (g_exact.abs() >= REL_ERROR_FLOOR).then(|| (g_var - g_exact).abs() / g_exact.abs());
        Ok(PointMetrics {
            h: h.clone(),
            fidelity: fidelity(&exact.gibbs_state, &rho)?,
            trace_distance: trace_distance(&exact.gibbs_state, &rho)?,
            g_var,
            g_exact,
            rel_error,
        })
    });
    let points: Vec<PointMetrics> = rows.into_iter().collect::<Result<_>>()?;
    let degenerate = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.rel_error.is_none())
        .map(|(index, _)| index)
        .collect();
    Ok(GridEvaluation { beta, points, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::preparer::ExactPreparer;

    #[test]
    fn oracle_evaluates_perfectly() {
        let fam = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let oracle = ExactPreparer { family: fam.clone(), beta: 1.0 };
        let grid: Vec<Vec<f64>> = (0..40).map(|i| vec![-2.0 + 4.0 * i as f64 / 39.0]).collect();
        let ev = evaluate_on_grid(&oracle, &fam, &grid, 1.0, Execution::Parallel).unwrap();
        assert_eq!(ev.points.len(), 40);
        assert!(ev.points.iter().all(|p| (p.fidelity - 1.0).abs() < 1e-9));
        assert!(ev.mean_trace_distance() < 1e-9);
        assert!(ev.max_rel_error() < 1e-12);
        assert!(ev.degenerate.is_empty());
        assert!(evaluate_on_grid(&oracle, &fam, &[], 1.0, Execution::Serial).is_err());
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        // H = c I on one qubit has G_exact = c - ln 2 at T = 1
        use crate::hamiltonian::{PauliString, PauliSum};
        let basis = vec![PauliSum::new(1, [PauliString::new(1.0, vec![crate::hamiltonian::Pauli::I])]).unwrap()];
        let fam = HamiltonianFamily::generic(basis).unwrap();
        let oracle = ExactPreparer { family: fam.clone(), beta: 1.0 };
        let ln2 = std::f64::consts::LN_2;
        let ev = evaluate_on_grid(&oracle, &fam, &[vec![ln2], vec![1.0]], 1.0, Execution::Serial).unwrap();
        assert!(ev.points[0].rel_error.is_none());
        assert!(ev.points[1].rel_error.is_some());
        assert_eq!(ev.degenerate, vec![0]);
        assert_eq!(ev.warnings(), vec![Error::DegenerateDenominator { index: 0 }]);
    }
}
