use rand::Rng;

use crate::scalar::Scalar;
use crate::tensor::{fan_in_bound, uniform_init, Gradients, Graph, Tensor, Var};

/// Named parameter tensors in creation order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<S> {
    names: Vec<String>,
    values: Vec<Tensor<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>) -> usize {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor<S>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor<S>] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|t| t.len()).sum()
    }

    /// Puts every parameter on `graph`.
    pub fn bind<'g>(&self, graph: &'g Graph<S>, trainable: bool) -> Bound<'g, S> {
        Bound {
            vars: self.values.iter().map(|v| graph.leaf(v.clone(), trainable)).collect(),
        }
    }

    /// One gradient per parameter, zeros where nothing flowed.
    pub fn gradients(&self, bound: &Bound<'_, S>, grads: &Gradients<S>) -> Vec<Tensor<S>> {
        bound.vars.iter().map(|&v| grads.get_or_zeros(v)).collect()
    }

    pub fn to_records(&self) -> Vec<(String, Tensor<f32>)> {
        self.names.iter().cloned().zip(self.values.iter().map(|t| t.cast())).collect()
    }

    /// Overwrites every parameter from `records` by name.
    pub fn load_records(&mut self, records: &[(String, Tensor<f32>)], prefix: &str) -> Result<(), String> {
        for (name, value) in self.names.iter().zip(&mut self.values) {
            let key = format!("{prefix}{name}");
            let (_, t) = records
                .iter()
                .find(|(n, _)| *n == key)
                .ok_or_else(|| format!("missing parameter {key}"))?;
            if t.shape() != value.shape() {
                return Err(format!("{key}: shape {:?}, expected {:?}", t.shape(), value.shape()));
            }
            *value = t.cast();
        }
        Ok(())
    }
}

/// Graph handles of a [`ParamStore`], indexed like the store.
pub struct Bound<'g, S: Scalar> {
    vars: Vec<Var<'g, S>>,
}

impl<'g, S: Scalar> Bound<'g, S> {
    pub fn var(&self, i: usize) -> Var<'g, S> {
        self.vars[i]
    }

    pub fn vars(&self) -> &[Var<'g, S>] {
        &self.vars
    }
}

/// Stride-`s` convolution, `k = 3`, "same" padding.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Conv {
    pub weight: usize,
    pub bias: Option<usize>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        rng: &mut impl Rng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        bias: Option<f64>,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            uniform_init(&[c_out, c_in, k, k], fan_in_bound(c_in, k), rng),
        );
        let bias = bias.map(|b| store.add(format!("{name}.bias"), Tensor::full(&[c_out], S::lit(b))));
        Self {
            weight,
            bias,
            stride,
            pad: k / 2,
        }
    }

    pub fn forward<'g, S: Scalar>(&self, p: &Bound<'g, S>, x: Var<'g, S>) -> crate::tensor::Result<Var<'g, S>> {
        x.conv2d(p.var(self.weight), self.bias.map(|b| p.var(b)), self.stride, self.pad)
    }
}

/// Transposed convolution; the output extent is given explicitly.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvT {
    pub weight: usize,
    pub bias: Option<usize>,
    pub stride: usize,
    pub pad: usize,
}

impl ConvT {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        rng: &mut impl Rng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        bias: Option<f64>,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            uniform_init(&[c_in, c_out, k, k], fan_in_bound(c_in, k), rng),
        );
        let bias = bias.map(|b| store.add(format!("{name}.bias"), Tensor::full(&[c_out], S::lit(b))));
        Self {
            weight,
            bias,
            stride,
            pad: k / 2,
        }
    }

    pub fn forward<'g, S: Scalar>(
        &self,
        p: &Bound<'g, S>,
        x: Var<'g, S>,
        out: (usize, usize),
    ) -> crate::tensor::Result<Var<'g, S>> {
        x.conv_transpose2d(p.var(self.weight), self.bias.map(|b| p.var(b)), self.stride, self.pad, Some(out))
    }
}
