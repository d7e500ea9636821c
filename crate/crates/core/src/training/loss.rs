use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Var};

/// `-Σ log p(target)` over masked-in positions, one `[B, V]` matrix per
/// step. Returns the scalar loss and the number of scored tokens.
pub fn nll_loss<T: Scalar>(
    tape: &mut Tape<T>,
    log_probs: &[Var],
    targets: &[Vec<usize>],
    mask: &[Vec<bool>],
) -> Result<(Var, usize)> {
    if log_probs.is_empty() || log_probs.len() != targets.len() || targets.len() != mask.len() {
        return Err(Error::Contract(format!(
            "nll over {} steps with {} target and {} mask columns",
            log_probs.len(),
            targets.len(),
            mask.len()
        )));
    }
    let mut total = None;
    let mut count = 0;
    for ((&lp, tgt), m) in log_probs.iter().zip(targets).zip(mask) {
        let weights: Vec<T> = m.iter().map(|&k| if k { T::one() } else { T::zero() }).collect();
        count += m.iter().filter(|&&k| k).count();
        let l = tape.nll(lp, tgt, &weights)?;
        total = Some(match total {
            None => l,
            Some(acc) => tape.add(acc, l)?,
        });
    }
    Ok((total.expect("non-empty"), count))
}
