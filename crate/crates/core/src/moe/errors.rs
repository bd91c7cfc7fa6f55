//! Classic mixture-of-experts error functions on plain vectors.

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

fn check<S: Scalar>(y: &[S], outputs: &[&[S]], gates: &[S]) -> Result<()> {
    if outputs.len() != gates.len() || outputs.is_empty() {
        return Err(shape_err!("{} expert outputs vs {} gates", outputs.len(), gates.len()));
    }
    if outputs.iter().any(|o| o.len() != y.len()) {
        return Err(shape_err!("expert outputs must match target length {}", y.len()));
    }
    let total: f64 = gates.iter().map(|g| g.to_f64().unwrap()).sum();
    if (total - 1.0).abs() > 1e-6 || gates.iter().any(|g| *g < S::zero()) {
        return Err(Error::Contract(format!("gates must lie on the simplex, sum = {total}")));
    }
    Ok(())
}

/// ||y - sum_i g_i o_i||^2
pub fn coop_error<S: Scalar>(y: &[S], outputs: &[&[S]], gates: &[S]) -> Result<S> {
    check(y, outputs, gates)?;
    Ok(y.iter()
        .enumerate()
        .map(|(k, yk)| {
            let blend: S = outputs.iter().zip(gates).map(|(o, g)| *g * o[k]).sum();
            (*yk - blend).powi(2)
        })
        .sum())
}

/// sum_i g_i ||y - o_i||^2
pub fn comp_error<S: Scalar>(y: &[S], outputs: &[&[S]], gates: &[S]) -> Result<S> {
    check(y, outputs, gates)?;
    Ok(outputs
        .iter()
        .zip(gates)
        .map(|(o, g)| *g * y.iter().zip(o.iter()).map(|(a, b)| (*a - *b).powi(2)).sum::<S>())
        .sum())
}
