use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::model::{ModelConfig, ModelParams, ParamKind};
use crate::rng::{stream, Stream};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Weights drawn from `scale · N(0, 1)` on the seed's init stream, biases
/// zero. Tensors are filled in layout order, so the result depends only on
/// `(config, scale, seed)`.
pub fn init_params<T: Scalar>(config: ModelConfig, scale: f64, seed: u64) -> Result<ModelParams<T>> {
    let mut rng = stream(seed, Stream::Init);
    ModelParams::with_init(config, |spec| {
        let n: usize = spec.shape.iter().product();
        let values = match spec.kind {
            ParamKind::Bias => vec![T::zero(); n],
            ParamKind::Weight => (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::from_f64_lossy(scale * z)
                })
                .collect(),
        };
        Tensor::new(spec.shape.clone(), values).expect("layout shapes are valid")
    })
}
