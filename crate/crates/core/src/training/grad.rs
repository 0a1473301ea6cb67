use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};

pub const DEFAULT_GRAD_STEP: f64 = 1e-4;

/// `g_i = (L(p + s e_i) - L(p - s e_i)) / 2s`. Coordinates are probed in
/// parallel when `exec` allows; the result does not depend on the mode.
pub fn grad_central_diff<F>(loss: F, params: &[f64], step: f64, exec: Execution) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if !(step > 0.0) {
        return Err(Error::ConfigInvalid(format!("finite-difference step must be positive, got {step}")));
    }
    let probe = |i: usize| -> Result<f64> {
        let mut p = params.to_vec();
        p[i] = params[i] + step;
        let up = loss(&p)?;
        p[i] = params[i] - step;
        let down = loss(&p)?;
        if !up.is_finite() {
            return Err(Error::NonFiniteLoss(up));
        }
        if !down.is_finite() {
            return Err(Error::NonFiniteLoss(down));
        }
        Ok((up - down) / (2.0 * step))
    };
    map_indexed(exec, params.len(), probe).into_iter().collect()
}
