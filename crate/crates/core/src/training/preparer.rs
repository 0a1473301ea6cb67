use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{check_schema_major, AnsatzSpec, ParamVector};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianFamily;
use crate::linalg::DensityMatrix;
use crate::thermal::exact_gibbs;

use super::loss::prepared_state;
use super::mlp::Mlp;

pub const CHECKPOINT_SCHEMA_VERSION: &str = "1.0";

/// Anything that maps Hamiltonian parameters to an approximate Gibbs state.
pub trait GibbsPreparer: Sync {
    fn prepare(&self, h: &[f64]) -> Result<DensityMatrix>;
}

/// A trained circuit: either encoded trainable angles or a network feeding
/// external angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preparer {
    Meta { ansatz: AnsatzSpec, trainables: ParamVector },
    NnMeta { ansatz: AnsatzSpec, mlp: Mlp },
}

impl Preparer {
    pub fn ansatz(&self) -> &AnsatzSpec {
        match self {
            Preparer::Meta { ansatz, .. } | Preparer::NnMeta { ansatz, .. } => ansatz,
        }
    }

    pub fn angles(&self, h: &[f64]) -> Result<Vec<f64>> {
        match self {
            Preparer::Meta { ansatz, trainables } => ansatz.resolve_angles(trainables.as_slice(), &[], h),
            Preparer::NnMeta { ansatz, mlp } => ansatz.resolve_angles(&[], &mlp.forward(h)?, h),
        }
    }

    /// Circuit parameters to start a single-point run at `h`: the trainables
    /// for an encoded circuit, the network output otherwise.
    pub fn single_point_init(&self, h: &[f64]) -> Result<ParamVector> {
        match self {
            Preparer::Meta { trainables, .. } => Ok(trainables.clone()),
            Preparer::NnMeta { mlp, .. } => Ok(ParamVector(mlp.forward(h)?)),
        }
    }
}

impl GibbsPreparer for Preparer {
    fn prepare(&self, h: &[f64]) -> Result<DensityMatrix> {
        prepared_state(self.ansatz(), &self.angles(h)?)
    }
}

/// Dense reference, used to check evaluation plumbing.
#[derive(Debug, Clone)]
pub struct ExactPreparer {
    pub family: HamiltonianFamily,
    pub beta: f64,
}

impl GibbsPreparer for ExactPreparer {
    fn prepare(&self, h: &[f64]) -> Result<DensityMatrix> {
        Ok(exact_gibbs(&self.family.build(h)?, self.beta)?.gibbs_state)
    }
}

/// Trained preparer with the family and temperature it was trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: String,
    pub family: HamiltonianFamily,
    pub beta: f64,
    pub preparer: Preparer,
}

impl Checkpoint {
    pub fn new(family: HamiltonianFamily, beta: f64, preparer: Preparer) -> Self {
        Self { schema_version: CHECKPOINT_SCHEMA_VERSION.into(), family, beta, preparer }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(text)?;
        check_schema_major(&cp.schema_version, CHECKPOINT_SCHEMA_VERSION)
            .map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
        let spec = cp.preparer.ansatz();
        if spec.n_system != cp.family.n_qubits || spec.param_dim != cp.family.param_dim() {
            return Err(Error::CheckpointMismatch(format!(
                "ansatz for {} system qubits / {} parameters does not fit {}",
                spec.n_system,
                spec.param_dim,
                cp.family.label()
            )));
        }
        spec.validate()?;
        if let Preparer::NnMeta { mlp, ansatz } = &cp.preparer {
            if mlp.input_dim() != ansatz.param_dim || mlp.output_dim() != ansatz.n_external {
                return Err(Error::CheckpointMismatch("network shape does not fit the ansatz".into()));
            }
        }
        Ok(cp)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fails unless this checkpoint was trained for `family` at `beta`.
    pub fn ensure_matches(&self, family: &HamiltonianFamily, beta: f64) -> Result<()> {
        if &self.family != family {
            return Err(Error::CheckpointMismatch(format!(
                "trained for {}, requested {}",
                self.family.label(),
                family.label()
            )));
        }
        if (self.beta - beta).abs() > 1e-12 {
            return Err(Error::CheckpointMismatch(format!("trained at beta {}, requested {beta}", self.beta)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{meta_vqt_ansatz, nn_meta_vqt_ansatz};

    #[test]
    fn checkpoint_round_trip_and_checks() {
        let fam = HamiltonianFamily::heisenberg_fields();
        let ansatz = nn_meta_vqt_ansatz(&fam, 2, 1, 1).unwrap();
        let mlp = Mlp::zeros(&[2, 4, ansatz.n_external]).unwrap();
        let cp = Checkpoint::new(fam.clone(), 1.0, Preparer::NnMeta { ansatz, mlp });
        let back = Checkpoint::from_json(&cp.to_json().unwrap()).unwrap();
        assert_eq!(back, cp);
        assert!(back.ensure_matches(&fam, 1.0).is_ok());
        assert!(matches!(back.ensure_matches(&fam, 2.0), Err(Error::CheckpointMismatch(_))));
        let tfim = HamiltonianFamily::tfim(2, 1.0).unwrap();
        assert!(matches!(back.ensure_matches(&tfim, 1.0), Err(Error::CheckpointMismatch(_))));

        let bumped = cp.to_json().unwrap().replace("\"schema_version\": \"1.0\"", "\"schema_version\": \"2.0\"");
        assert!(matches!(Checkpoint::from_json(&bumped), Err(Error::CheckpointMismatch(_))));
    }

    #[test]
    fn checkpoint_rejects_wrong_family() {
        let tfim = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let ansatz = meta_vqt_ansatz(&tfim, 2, 1, 1).unwrap();
        let n = ansatz.n_trainable;
        let mut cp = Checkpoint::new(tfim, 1.0, Preparer::Meta { ansatz, trainables: ParamVector::zeros(n) });
        cp.family = HamiltonianFamily::tfim(3, 1.0).unwrap();
        assert!(matches!(Checkpoint::from_json(&cp.to_json().unwrap()), Err(Error::CheckpointMismatch(_))));
    }

    #[test]
    fn zero_angle_circuit_prepares_basis_state() {
        let tfim = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let ansatz = meta_vqt_ansatz(&tfim, 2, 1, 1).unwrap();
        let n = ansatz.n_trainable;
        let p = Preparer::Meta { ansatz, trainables: ParamVector::zeros(n) };
        let rho = p.prepare(&[0.3]).unwrap();
        assert!((rho.populations()[0] - 1.0).abs() < 1e-12);
    }
}
