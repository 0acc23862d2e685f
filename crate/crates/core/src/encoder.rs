//! Multi-layer perceptron feature extractor with a final l2-normalization stage and
//! hand-written back-propagation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::Rng;
use crate::types::{FeatureMatrix, NORM_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative expressed through the pre-activation `x` and the output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Layer widths from input to embedding, plus the hidden nonlinearity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub dims: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn mlp(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            dims: vec![input, hidden, output],
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(invalid("dims", "need at least an input and an output width"));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(invalid("dims", "widths must be positive"));
        }
        if *self.dims.last().unwrap() < 2 {
            return Err(invalid("dims", "embedding dimension must be at least 2"));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.dims.len() - 1);
        let mut at = 0;
        for w in self.dims.windows(2) {
            let weights = at;
            at += w[0] * w[1];
            out.push((weights, at));
            at += w[1];
        }
        out
    }
}

/// Parameters are one flat vector: for each layer the row-major `out x in` weights then the biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    arch: Architecture,
    offsets: Vec<(usize, usize)>,
    params: Vec<f64>,
}

/// Activations recorded by [`Encoder::forward`] for [`Encoder::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    param_count: usize,
    /// Input of every layer, column-major; entry 0 is the raw observation batch.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of every layer; the last one is the un-normalized embedding.
    pre: Vec<Vec<f64>>,
    norms: Vec<f64>,
    outputs: Vec<f64>,
}

impl ForwardCache {
    /// Pre-normalization embeddings, `d x m`.
    pub fn unnormalized(&self) -> &[f64] {
        self.pre.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Encoder {
    /// Uniform fan-in initialization `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(arch: Architecture, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let offsets = arch.offsets();
        let mut params = vec![0.0; arch.parameter_count()];
        for (l, w) in arch.dims.windows(2).enumerate() {
            let bound = 1.0 / libm::sqrt(w[0] as f64);
            let (wo, bo) = offsets[l];
            for p in &mut params[wo..bo + w[1]] {
                *p = rng.uniform_range(-bound, bound);
            }
        }
        Ok(Self { arch, offsets, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: arch.parameter_count(),
                actual: params.len(),
            });
        }
        let offsets = arch.offsets();
        Ok(Self { arch, offsets, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.arch.dims.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weights and biases of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (wo, bo) = self.offsets[l];
        let out = self.arch.dims[l + 1];
        (&self.params[wo..bo], &self.params[bo..bo + out])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (wo, bo) = self.offsets[l];
        let out = self.arch.dims[l + 1];
        let (w, rest) = self.params[wo..bo + out].split_at_mut(bo - wo);
        (w, rest)
    }

    fn layers(&self) -> usize {
        self.offsets.len()
    }

    /// Encodes a column-major `input_dim x m` batch into unit-norm embeddings.
    pub fn forward(&self, input: &[f64]) -> Result<(FeatureMatrix, ForwardCache)> {
        let din = self.input_dim();
        if input.len() % din != 0 {
            return Err(Error::DimensionMismatch {
                expected: din,
                actual: input.len() % din,
            });
        }
        let m = input.len() / din;
        let nl = self.layers();
        let mut inputs = Vec::with_capacity(nl);
        let mut pre = Vec::with_capacity(nl);
        let mut current = input.to_vec();
        for l in 0..nl {
            let (fan_in, fan_out) = (self.arch.dims[l], self.arch.dims[l + 1]);
            let (w, b) = self.layer(l);
            let mut z = Vec::with_capacity(fan_out * m);
            for col in current.chunks_exact(fan_in) {
                for (row, bias) in w.chunks_exact(fan_in).zip(b) {
                    z.push(bias + crate::types::dot(row, col));
                }
            }
            let next = if l + 1 < nl {
                z.iter().map(|&x| self.arch.activation.apply(x)).collect()
            } else {
                Vec::new()
            };
            inputs.push(core::mem::replace(&mut current, next));
            pre.push(z);
        }
        let d = self.output_dim();
        let last = pre.last().expect("at least one layer");
        let mut norms = Vec::with_capacity(m);
        let mut outputs = Vec::with_capacity(d * m);
        for col in last.chunks_exact(d) {
            let r = crate::types::norm(col);
            if !(r >= NORM_FLOOR) {
                return Err(Error::DegenerateVector { norm: r });
            }
            norms.push(r);
            outputs.extend(col.iter().map(|x| x / r));
        }
        let features = if m == 0 {
            FeatureMatrix::empty(d)
        } else {
            FeatureMatrix::from_unit_columns(d, outputs.clone())?
        };
        Ok((
            features,
            ForwardCache {
                batch: m,
                param_count: self.params.len(),
                inputs,
                pre,
                norms,
                outputs,
            },
        ))
    }

    /// Parameter gradient of a scalar loss given `dL/du` for the unit outputs (`d x m`).
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Vec<f64>> {
        let d = self.output_dim();
        if cache.param_count != self.params.len() || cache.inputs.len() != self.layers() {
            return Err(Error::CacheMismatch(format!(
                "cache built for {} parameters, encoder has {}",
                cache.param_count,
                self.params.len()
            )));
        }
        if upstream.len() != d * cache.batch {
            return Err(Error::CacheMismatch(format!(
                "upstream gradient has {} values, expected {}",
                upstream.len(),
                d * cache.batch
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        // Through u = z / |z|: dL/dz = (g - u (u . g)) / |z|.
        let mut delta = Vec::with_capacity(upstream.len());
        for ((g, u), &r) in upstream
            .chunks_exact(d)
            .zip(cache.outputs.chunks_exact(d))
            .zip(&cache.norms)
        {
            let radial = crate::types::dot(u, g);
            delta.extend(g.iter().zip(u).map(|(gi, ui)| (gi - ui * radial) / r));
        }
        for l in (0..self.layers()).rev() {
            let (fan_in, fan_out) = (self.arch.dims[l], self.arch.dims[l + 1]);
            let (wo, bo) = self.offsets[l];
            let w = &self.params[wo..bo];
            let x = &cache.inputs[l];
            {
                let (gw, gb) = grads[wo..bo + fan_out].split_at_mut(bo - wo);
                for (dcol, xcol) in delta.chunks_exact(fan_out).zip(x.chunks_exact(fan_in)) {
                    for (o, &dz) in dcol.iter().enumerate() {
                        if dz == 0.0 {
                            continue;
                        }
                        gb[o] += dz;
                        for (gwi, xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(xcol) {
                            *gwi += dz * xi;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let below = &cache.pre[l - 1];
            let mut next = vec![0.0; fan_in * cache.batch];
            for ((dcol, ncol), (zcol, acol)) in delta
                .chunks_exact(fan_out)
                .zip(next.chunks_exact_mut(fan_in))
                .zip(below.chunks_exact(fan_in).zip(x.chunks_exact(fan_in)))
            {
                for (o, &dz) in dcol.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    for (ni, wi) in ncol.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *ni += dz * wi;
                    }
                }
                for ((ni, &z), &a) in ncol.iter_mut().zip(zcol).zip(acol) {
                    *ni *= self.arch.activation.derivative(z, a);
                }
            }
            delta = next;
        }
        Ok(grads)
    }
}

/// Column-major `f64` batch from `f32` observation vectors.
pub fn stack_observations<'a>(obs: impl IntoIterator<Item = &'a [f32]>) -> Vec<f64> {
    obs.into_iter().flat_map(|o| o.iter().map(|&v| v as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> Encoder {
        Encoder::new(Architecture::mlp(4, 6, 3), &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn constant_final_layer() {
        let mut enc = tiny(1);
        let (w, b) = enc.layer_mut(1);
        w.iter_mut().for_each(|x| *x = 0.0);
        b.copy_from_slice(&[1.0, 2.0, 2.0]);
        let input = [0.3, -1.0, 2.0, 0.5, 1.0, 1.0, -1.0, 0.0];
        let (u, _) = enc.forward(&input).unwrap();
        for col in u.columns() {
            for (a, e) in col.iter().zip([1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]) {
                assert!((a - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_batch() {
        let (u, cache) = tiny(2).forward(&[]).unwrap();
        assert!(u.is_empty());
        assert_eq!(u.dim(), 3);
        assert!(tiny(2).backward(&cache, &[]).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scale_invariance_of_normalization() {
        // Doubling the last layer doubles every pre-normalization activation.
        let enc = tiny(3);
        let mut doubled = enc.clone();
        let (w, b) = doubled.layer_mut(1);
        w.iter_mut().for_each(|x| *x *= 2.0);
        b.iter_mut().for_each(|x| *x *= 2.0);
        let input = [0.1, 0.2, -0.3, 0.9];
        let (a, ca) = enc.forward(&input).unwrap();
        let (b, cb) = doubled.forward(&input).unwrap();
        for (x, y) in ca.unnormalized().iter().zip(cb.unnormalized()) {
            assert!((2.0 * x - y).abs() < 1e-14);
        }
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn radial_upstream_has_no_effect() {
        let enc = tiny(4);
        let input = [0.4, -0.2, 0.7, 0.1, -0.5, 0.3, 0.2, 0.9];
        let (u, cache) = enc.forward(&input).unwrap();
        let upstream: Vec<f64> = u.as_slice().iter().map(|x| 3.0 * x).collect();
        let g = enc.backward(&cache, &upstream).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12));
        let zero = enc.backward(&cache, &vec![0.0; upstream.len()]).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cache_mismatch() {
        let enc = tiny(5);
        let (_, cache) = enc.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(matches!(enc.backward(&cache, &[0.0; 6]), Err(Error::CacheMismatch(_))));
        let other = Encoder::new(Architecture::mlp(4, 5, 3), &mut Rng::new(1)).unwrap();
        assert!(matches!(other.backward(&cache, &[0.0; 3]), Err(Error::CacheMismatch(_))));
    }

    #[test]
    fn parameter_layout() {
        let enc = tiny(6);
        assert_eq!(enc.parameter_count(), 4 * 6 + 6 + 6 * 3 + 3);
        assert_eq!(enc.layer(0).0.len(), 24);
        assert_eq!(enc.layer(1).1.len(), 3);
        assert!(Encoder::from_params(Architecture::mlp(4, 6, 3), vec![0.0; 3]).is_err());
        assert!(Architecture::mlp(4, 6, 1).validate().is_err());
    }
}
