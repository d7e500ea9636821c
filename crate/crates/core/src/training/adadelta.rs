use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

use super::TrainConfig;

/// Per-coordinate running averages `E[g²]` and `E[Δx²]`, one buffer per
/// parameter tensor in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub mean_sq_grad: Vec<Vec<T>>,
    pub mean_sq_step: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        OptimizerState {
            mean_sq_grad: zeros.clone(),
            mean_sq_step: zeros,
        }
    }
}

/// Global L2 norm of all accumulated gradients.
pub fn grad_norm<T: Scalar>(params: &ModelParams<T>) -> f64 {
    params
        .iter()
        .filter_map(|p| p.grad())
        .flat_map(|g| g.values().iter())
        .map(|&g| {
            let g = g.to_f64_lossy();
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescales gradients so their global norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(params: &mut ModelParams<T>, max_norm: f64) -> f64 {
    let norm = grad_norm(params);
    if max_norm > 0.0 && norm > max_norm {
        let k = T::from_f64_lossy(max_norm / norm);
        for p in params.iter_mut() {
            if let Some(g) = p.grad_mut() {
                g.values_mut().iter_mut().for_each(|v| *v *= k);
            }
        }
    }
    norm
}

/// One Adadelta update from the accumulated gradients, which are cleared
/// afterwards. A non-finite gradient aborts before anything is modified.
pub fn adadelta_step<T: Scalar>(
    params: &mut ModelParams<T>,
    opt: &mut OptimizerState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    if opt.mean_sq_grad.len() != params.len() {
        return Err(Error::Contract("optimizer state does not match the model".into()));
    }
    for p in params.iter() {
        if let Some(g) = p.grad() {
            if !g.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient in {}", p.name())));
            }
        }
    }
    let rho = T::from_f64_lossy(cfg.rho);
    let one_minus = T::from_f64_lossy(1.0 - cfg.rho);
    let eps = T::from_f64_lossy(cfg.epsilon);
    for ((p, eg2), edx2) in params
        .iter_mut()
        .zip(&mut opt.mean_sq_grad)
        .zip(&mut opt.mean_sq_step)
    {
        let Some(grad) = p.take_grad() else {
            continue;
        };
        let x = p.value_mut().values_mut();
        for (i, &g) in grad.values().iter().enumerate() {
            eg2[i] = rho * eg2[i] + one_minus * g * g;
            let dx = -((edx2[i] + eps).sqrt() / (eg2[i] + eps).sqrt()) * g;
            edx2[i] = rho * edx2[i] + one_minus * dx * dx;
            x[i] += dx;
        }
    }
    Ok(())
}
