use crate::error::{Error, Result};

use super::{Tape, Tensor, Var};

/// Compares reverse-mode gradients of `f` at `point` against central
/// differences with step `step`, in double precision.
///
/// `f` receives a fresh tape and the variable holding the point and must
/// return a one-element loss. The result is the largest per-coordinate
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check<F>(f: F, point: &Tensor<f64>, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    finite_difference_report(f, point, step).map(|r| r.max_relative_error)
}

/// Outcome of a gradient check, with the worst coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// [`finite_difference_check`] with details about the worst coordinate.
pub fn finite_difference_report<F>(f: F, point: &Tensor<f64>, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    if !point.is_finite() {
        return Err(Error::Numeric("finite-difference point is not finite".into()));
    }
    let eval = |p: Tensor<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.constant(p);
        let y = f(&mut tape, x)?;
        let v = tape
            .value(y)
            .item()
            .ok_or_else(|| Error::Contract("function under check must return a scalar".into()))?;
        if !v.is_finite() {
            return Err(Error::Numeric(format!("function value {v} is not finite")));
        }
        Ok(v)
    };

    let mut tape = Tape::new();
    let x = tape.variable(point.clone());
    let y = f(&mut tape, x)?;
    if let Some(v) = tape.value(y).item() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("function value {v} is not finite")));
        }
    }
    let grads = tape.backward(y)?;
    let analytic = grads
        .get(x)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; point.len()]);

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: 0.0,
    };
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = point.clone();
        plus.values_mut()[i] += step;
        let mut minus = point.clone();
        minus.values_mut()[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        let err = (a - numeric).abs() / denom;
        if err > report.max_relative_error || i == 0 {
            report = GradCheckReport {
                max_relative_error: err,
                worst_index: i,
                analytic: a,
                numeric,
            };
        }
    }
    Ok(report)
}
