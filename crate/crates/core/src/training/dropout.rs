use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};

fn check_p(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Input(format!("dropout probability {p} outside [0, 1)")))
    }
}

fn keep_mask<T: Scalar>(shape: &[usize], p: f64, rng: &mut impl Rng) -> Tensor<T> {
    let scale = T::from_f64_lossy(1.0 / (1.0 - p));
    let mut mask = Tensor::zeros(shape);
    for v in mask.values_mut() {
        if rng.random::<f64>() >= p {
            *v = scale;
        }
    }
    mask
}

/// Inverted dropout on a plain tensor: in training mode every element is
/// zeroed with probability `p` and survivors are scaled by `1 / (1 - p)`;
/// otherwise `x` is returned unchanged.
pub fn dropout_apply<T: Scalar>(
    x: &Tensor<T>,
    p: f64,
    training: bool,
    rng: &mut impl Rng,
) -> Result<Tensor<T>> {
    check_p(p)?;
    if !training || p == 0.0 {
        return Ok(x.clone());
    }
    let mask = keep_mask::<T>(x.shape(), p, rng);
    let values = x
        .values()
        .iter()
        .zip(mask.values())
        .map(|(&a, &m)| a * m)
        .collect();
    Tensor::new(x.shape().to_vec(), values)
}

/// Dropout site handle threaded through a forward pass.
#[derive(Debug, Clone)]
pub struct Dropout {
    p: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    /// Active dropout drawing from the seed's dropout stream.
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        check_p(p)?;
        Ok(Dropout {
            p,
            rng: Some(stream(seed, Stream::Dropout)),
        })
    }

    /// Identity at every site (evaluation and decoding).
    pub fn inactive() -> Self {
        Dropout { p: 0.0, rng: None }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_active(&self) -> bool {
        self.rng.is_some() && self.p > 0.0
    }

    pub fn apply<T: Scalar>(&mut self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let p = self.p;
        match &mut self.rng {
            Some(rng) if p > 0.0 => {
                let mask = keep_mask::<T>(tape.shape(x), p, rng);
                tape.mul_const(x, mask)
            }
            _ => Ok(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_disabled() {
        let x = Tensor::vector(vec![1.0f64, -2.0, 3.5]);
        let mut rng = stream(0, Stream::Dropout);
        assert_eq!(dropout_apply(&x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.9, false, &mut rng).unwrap(), x);
        assert!(dropout_apply(&x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn inverted_scaling_preserves_mean() {
        let x = Tensor::full(&[1_000_000], 1.0f64);
        let mut rng = stream(3, Stream::Dropout);
        let y = dropout_apply(&x, 0.5, true, &mut rng).unwrap();
        let mean = y.values().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!(y.values().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn inactive_site_is_bit_exact() {
        let mut tape = Tape::<f32>::new();
        let x = tape.constant(Tensor::vector(vec![0.1, 0.2]));
        let y = Dropout::inactive().apply(&mut tape, x).unwrap();
        assert_eq!(x, y);
    }
}
