use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Gradients, Parameter, Tape, Tensor, Var};

use super::variant::{DecoderVariant, Mode, ModelConfig, Scoring};

/// Whether a tensor is a bias (zero-initialised) or a weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Name, shape and kind of one trainable tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

fn gru_specs(out: &mut Vec<ParamSpec>, prefix: &str, input: usize, d: usize) {
    out.push(w(&format!("{prefix}.wx"), &[input, 3 * d]));
    out.push(w(&format!("{prefix}.uzr"), &[d, 2 * d]));
    out.push(w(&format!("{prefix}.un"), &[d, d]));
    out.push(b(&format!("{prefix}.b"), &[3 * d]));
}

fn w(name: &str, shape: &[usize]) -> ParamSpec {
    ParamSpec {
        name: name.to_string(),
        shape: shape.to_vec(),
        kind: ParamKind::Weight,
    }
}

fn b(name: &str, shape: &[usize]) -> ParamSpec {
    ParamSpec {
        name: name.to_string(),
        shape: shape.to_vec(),
        kind: ParamKind::Bias,
    }
}

/// Every tensor of a model, in a fixed order.
///
/// Matrices are stored input-major (`[in, out]`) because activations are
/// row vectors.
pub fn layout(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let (e, d, vt) = (cfg.embed_dim, cfg.hidden_dim, cfg.tgt_vocab);
    let mut specs = Vec::new();
    let translation = cfg.mode == Mode::Translation;
    if translation {
        specs.push(w("src.embed", &[cfg.src_vocab, e]));
        gru_specs(&mut specs, "enc.fwd", e, d);
        gru_specs(&mut specs, "enc.bwd", e, d);
        specs.push(w("dec.init.w", &[d, d]));
        specs.push(b("dec.init.b", &[d]));
        specs.push(w("att.w", &[d, d]));
        specs.push(w("att.u", &[2 * d, d]));
        specs.push(w("att.v", &[d, 1]));
    }
    specs.push(w("tgt.embed", &[vt, e]));
    gru_specs(&mut specs, "dec.gru", e, d);
    if translation {
        specs.push(w("dec.gru.wc", &[2 * d, 3 * d]));
    }
    specs.push(w("out.ls", &[d, e]));
    specs.push(w("out.ld", &[e, e]));
    if translation {
        specs.push(w("out.lc", &[2 * d, e]));
    }
    specs.push(b("out.b", &[e]));
    specs.push(w("out.w", &[e, vt]));
    specs.push(b("out.bias", &[vt]));
    match cfg.variant {
        DecoderVariant::Baseline | DecoderVariant::MeanResidual => {}
        DecoderVariant::AttnResidual(scoring) => {
            specs.push(w("res.wy", &[e, e]));
            specs.push(w("res.v", &[e, 1]));
            if scoring == Scoring::ContentScope {
                specs.push(w("res.ws", &[d, e]));
            }
        }
        DecoderVariant::MemoryRnn => {
            specs.push(w("mem.wh", &[d, d]));
            specs.push(w("mem.wy", &[e, d]));
            specs.push(w("mem.ws", &[d, d]));
            specs.push(w("mem.v", &[d, 1]));
        }
        DecoderVariant::SelfAttentiveRnn => {
            specs.push(w("sa.wh", &[d, d]));
            specs.push(w("sa.ws", &[d, d]));
            specs.push(w("sa.v", &[d, 1]));
            specs.push(w("out.lm", &[d, e]));
        }
    }
    specs
}

/// Exact number of scalars in a model with this configuration.
pub fn param_count(cfg: &ModelConfig) -> usize {
    layout(cfg)
        .iter()
        .map(|s| s.shape.iter().product::<usize>())
        .sum()
}

/// All trainable tensors of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    params: Vec<Parameter<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ModelParams<T> {
    /// Allocates every tensor of the layout, filled by `init`.
    pub fn with_init<F>(config: ModelConfig, mut init: F) -> Result<Self>
    where
        F: FnMut(&ParamSpec) -> Tensor<T>,
    {
        config.validate()?;
        let params = layout(&config)
            .iter()
            .map(|spec| {
                let t = init(spec);
                if t.shape() != spec.shape.as_slice() {
                    return Err(Error::Dimension {
                        op: "init",
                        shapes: vec![spec.shape.clone(), t.shape().to_vec()],
                    });
                }
                Ok(Parameter::new(spec.name.clone(), t))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(config, params))
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        Self::with_init(config, |s| Tensor::zeros(&s.shape))
    }

    /// Reassembles a model from named tensors, which must match the layout
    /// of `config` exactly (names, order-independent, and shapes).
    pub fn from_tensors(config: ModelConfig, tensors: Vec<(String, Tensor<T>)>) -> Result<Self> {
        config.validate()?;
        let mut by_name: HashMap<String, Tensor<T>> = HashMap::new();
        for (name, t) in tensors {
            if by_name.insert(name.clone(), t).is_some() {
                return Err(Error::Input(format!("duplicate tensor {name:?}")));
            }
        }
        let specs = layout(&config);
        if by_name.len() != specs.len() {
            return Err(Error::Input(format!(
                "expected {} tensors for {}, found {}",
                specs.len(),
                config.variant,
                by_name.len()
            )));
        }
        let mut params = Vec::with_capacity(specs.len());
        for spec in specs {
            let t = by_name
                .remove(&spec.name)
                .ok_or_else(|| Error::Input(format!("missing tensor {:?}", spec.name)))?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::Input(format!(
                    "tensor {:?} has shape {:?}, expected {:?}",
                    spec.name,
                    t.shape(),
                    spec.shape
                )));
            }
            params.push(Parameter::new(spec.name, t));
        }
        Ok(Self::assemble(config, params))
    }

    fn assemble(config: ModelConfig, params: Vec<Parameter<T>>) -> Self {
        let index = params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name().to_string(), i))
            .collect();
        ModelParams {
            config,
            params,
            index,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn count(&self) -> usize {
        self.params.iter().map(Parameter::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn get(&self, name: &str) -> Option<&Parameter<T>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter<T>> {
        self.index.get(name).map(|&i| &mut self.params[i])
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value().is_finite())
    }

    /// Records every tensor on `tape` as a differentiable input.
    pub fn bind(&self, tape: &mut Tape<T>) -> BoundParams<'_> {
        let vars = self
            .params
            .iter()
            .map(|p| tape.variable(p.value().clone()))
            .collect();
        BoundParams {
            config: self.config,
            vars,
            index: &self.index,
        }
    }

    /// Like [`bind`](Self::bind) but records constants (no gradients needed).
    pub fn bind_frozen(&self, tape: &mut Tape<T>) -> BoundParams<'_> {
        let vars = self
            .params
            .iter()
            .map(|p| tape.constant(p.value().clone()))
            .collect();
        BoundParams {
            config: self.config,
            vars,
            index: &self.index,
        }
    }

    /// Adds the gradients of a bound copy into the parameters' buffers.
    pub fn accumulate_grads(&mut self, bound: &[Var], grads: &Gradients<T>) -> Result<()> {
        for (p, &v) in self.params.iter_mut().zip(bound) {
            if let Some(g) = grads.get(v) {
                p.accumulate_grad(g)?;
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    /// Converts all tensors to another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let params = self
            .params
            .iter()
            .map(|p| Parameter::new(p.name(), p.value().cast()))
            .collect();
        ModelParams::assemble(self.config, params)
    }

    /// All values in layout order, flattened.
    pub fn flatten(&self) -> Vec<T> {
        self.params
            .iter()
            .flat_map(|p| p.value().values().iter().copied())
            .collect()
    }
}

/// A model's parameters as variables on one tape.
#[derive(Debug)]
pub struct BoundParams<'p> {
    config: ModelConfig,
    vars: Vec<Var>,
    index: &'p HashMap<String, usize>,
}

impl<'p> BoundParams<'p> {
    /// Binds externally created variables (one per layout entry, in order).
    pub fn from_vars(params: &'p ModelParams<impl Scalar>, vars: Vec<Var>) -> Result<Self> {
        if vars.len() != params.len() {
            return Err(Error::Contract(format!(
                "expected {} bound variables, got {}",
                params.len(),
                vars.len()
            )));
        }
        Ok(BoundParams {
            config: params.config,
            vars,
            index: &params.index,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::Contract(format!("{} model has no tensor {name:?}", self.config.variant)))
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}
