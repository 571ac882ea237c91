//! Fully connected network with a squared-error loss.
//!
//! Loss convention: `ℓ(w) = (1/n) Σᵢ ‖f(xᵢ; w) − yᵢ‖²`, i.e. mean over
//! examples and sum over outputs. Hidden layers use the configured
//! activation; the output layer is linear.
//!
//! Parameters are packed layer by layer: the `fan_out × fan_in` weight matrix
//! in row-major order followed by the `fan_out` biases.

use std::sync::Arc;

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::objectives::{finite_gradient, GradientInfo, Objective};
use crate::params::Params;
use crate::scalar::Scalar;

/// Rows processed per block of the forward/backward tape.
const BLOCK: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => {
                if z > S::zero() {
                    z
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative written in terms of the pre-activation `z` and output `a`.
    /// relu'(0) is taken to be 0.
    #[inline]
    fn derivative<S: Scalar>(self, z: S, a: S) -> S {
        match self {
            Activation::Relu => {
                if z > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => S::one() - a * a,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid("activation", format!("unknown activation `{other}`"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

/// Row-major inputs (`n × input_dim`) and targets (`n × output_dim`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    inputs: Vec<T>,
    targets: Vec<T>,
    input_dim: usize,
    output_dim: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: Vec<T>, targets: Vec<T>, input_dim: usize, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Dataset("feature and target dimensions must be positive".into()));
        }
        if inputs.len() % input_dim != 0 || targets.len() % output_dim != 0 {
            return Err(Error::Dataset("buffer length is not a multiple of the row width".into()));
        }
        let n = inputs.len() / input_dim;
        if n == 0 || targets.len() / output_dim != n {
            return Err(Error::Dataset(format!(
                "{} input rows but {} target rows",
                n,
                targets.len() / output_dim
            )));
        }
        Ok(Dataset {
            inputs,
            targets,
            input_dim,
            output_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> &[T] {
        &self.targets[i * self.output_dim..(i + 1) * self.output_dim]
    }

    pub fn inputs(&self) -> &[T] {
        &self.inputs
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    /// Copy of the listed rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(rows.len() * self.input_dim);
        let mut targets = Vec::with_capacity(rows.len() * self.output_dim);
        for &r in rows {
            if r >= self.len() {
                return Err(Error::Dataset(format!("row {r} out of range")));
            }
            inputs.extend_from_slice(self.input(r));
            targets.extend_from_slice(self.target(r));
        }
        Self::new(inputs, targets, self.input_dim, self.output_dim)
    }
}

/// One unpacked layer: `weights` is `fan_out × fan_in`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    activation: Activation,
    data: Arc<Dataset<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// `widths` lists every layer width including input and output, so a
    /// network with two hidden layers has four entries.
    pub fn new(widths: Vec<usize>, activation: Activation, data: Arc<Dataset<T>>) -> Result<Self> {
        validate_widths(&widths)?;
        if widths[0] != data.input_dim() || *widths.last().unwrap() != data.output_dim() {
            return Err(Error::invalid(
                "widths",
                format!(
                    "network maps {} -> {} but data is {} -> {}",
                    widths[0],
                    widths.last().unwrap(),
                    data.input_dim(),
                    data.output_dim()
                ),
            ));
        }
        Ok(Mlp {
            widths,
            activation,
            data,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn data(&self) -> &Arc<Dataset<T>> {
        &self.data
    }

    /// Same network evaluated on different data.
    pub fn with_data(&self, data: Arc<Dataset<T>>) -> Result<Self> {
        Mlp::new(self.widths.clone(), self.activation, data)
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.widths)
    }

    pub fn unpack(&self, w: &Params<T>) -> Result<Vec<LayerParams<T>>> {
        w.check_dim(self.param_count())?;
        let mut out = Vec::with_capacity(self.widths.len() - 1);
        let mut off = 0;
        for pair in self.widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let weights = w.as_slice()[off..off + fan_in * fan_out].to_vec();
            off += fan_in * fan_out;
            let bias = w.as_slice()[off..off + fan_out].to_vec();
            off += fan_out;
            out.push(LayerParams {
                fan_in,
                fan_out,
                weights,
                bias,
            });
        }
        Ok(out)
    }

    pub fn pack(&self, layers: &[LayerParams<T>]) -> Result<Params<T>> {
        if layers.len() + 1 != self.widths.len() {
            return Err(Error::invalid("layers", "layer count does not match widths"));
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (layer, pair) in layers.iter().zip(self.widths.windows(2)) {
            if layer.fan_in != pair[0]
                || layer.fan_out != pair[1]
                || layer.weights.len() != pair[0] * pair[1]
                || layer.bias.len() != pair[1]
            {
                return Err(Error::invalid("layers", "layer shape does not match widths"));
            }
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        Params::new(flat)
    }

    /// Network outputs for every example, row-major `n × output_dim`.
    pub fn predict(&self, w: &Params<T>) -> Result<Vec<T>> {
        w.check_dim(self.param_count())?;
        let n = self.data.len();
        let mut out = Vec::with_capacity(n * self.data.output_dim());
        let rows: Vec<usize> = (0..n).collect();
        for block in rows.chunks(BLOCK) {
            let tape = self.forward::<T>(w.as_slice(), block[0], block.len());
            out.extend_from_slice(tape.acts.last().unwrap());
        }
        Ok(out)
    }

    fn forward<S: Scalar + From<T>>(&self, params: &[S], start: usize, rows: usize) -> Tape<S> {
        let p = self.data.input_dim();
        let layers = self.widths.len() - 1;
        let mut acts: Vec<Vec<S>> = Vec::with_capacity(layers + 1);
        let mut pres: Vec<Vec<S>> = Vec::with_capacity(layers);
        acts.push(
            self.data.inputs()[start * p..(start + rows) * p]
                .iter()
                .map(|&x| <S as From<T>>::from(x))
                .collect(),
        );
        let mut off = 0;
        for (l, pair) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let weights = &params[off..off + fan_in * fan_out];
            let bias = &params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            off += (fan_in + 1) * fan_out;
            let input = &acts[l];
            let mut z = Vec::with_capacity(rows * fan_out);
            for i in 0..rows {
                let a = &input[i * fan_in..(i + 1) * fan_in];
                for o in 0..fan_out {
                    let wrow = &weights[o * fan_in..(o + 1) * fan_in];
                    let mut acc = bias[o];
                    for k in 0..fan_in {
                        acc += a[k] * wrow[k];
                    }
                    z.push(acc);
                }
            }
            let a = if l + 1 == layers {
                z.clone()
            } else {
                z.iter().map(|&zz| self.activation.apply(zz)).collect()
            };
            pres.push(z);
            acts.push(a);
        }
        Tape { acts, pres }
    }

    /// Sum of squared residuals over the block and, when `grad` is given, the
    /// accumulated gradient of `(1/n) Σ ‖r‖²` into it.
    fn block<S: Scalar + From<T>>(
        &self,
        params: &[S],
        start: usize,
        rows: usize,
        grad: Option<&mut [S]>,
    ) -> S {
        let tape = self.forward(params, start, rows);
        let q = self.data.output_dim();
        let out = tape.acts.last().unwrap();
        let targets = &self.data.targets()[start * q..(start + rows) * q];
        let mut sse = S::zero();
        let mut delta: Vec<S> = Vec::with_capacity(rows * q);
        let scale = S::of(2.0 / self.data.len() as f64);
        for (&f, &y) in out.iter().zip(targets) {
            let r = f - <S as From<T>>::from(y);
            sse += r * r;
            delta.push(r * scale);
        }
        let Some(grad) = grad else {
            return sse;
        };

        let layers = self.widths.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for pair in self.widths.windows(2) {
            offsets.push(off);
            off += (pair[0] + 1) * pair[1];
        }
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let off = offsets[l];
            let input = &tape.acts[l];
            {
                let (gw, gb) = grad[off..off + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
                for i in 0..rows {
                    let a = &input[i * fan_in..(i + 1) * fan_in];
                    for o in 0..fan_out {
                        let d = delta[i * fan_out + o];
                        gb[o] += d;
                        let grow = &mut gw[o * fan_in..(o + 1) * fan_in];
                        for k in 0..fan_in {
                            grow[k] += d * a[k];
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let weights = &params[off..off + fan_in * fan_out];
            let mut prev = vec![S::zero(); rows * fan_in];
            for i in 0..rows {
                let dp = &mut prev[i * fan_in..(i + 1) * fan_in];
                for o in 0..fan_out {
                    let d = delta[i * fan_out + o];
                    let wrow = &weights[o * fan_in..(o + 1) * fan_in];
                    for k in 0..fan_in {
                        dp[k] += d * wrow[k];
                    }
                }
            }
            let (z, a) = (&tape.pres[l - 1], &tape.acts[l]);
            for ((dp, &zz), &aa) in prev.iter_mut().zip(z).zip(a) {
                *dp *= self.activation.derivative(zz, aa);
            }
            delta = prev;
        }
        sse
    }

    fn evaluate<S: Scalar + From<T>>(&self, params: &[S], want_grad: bool) -> (S, Vec<S>) {
        let n = self.data.len();
        let mut grad = if want_grad {
            vec![S::zero(); params.len()]
        } else {
            Vec::new()
        };
        let mut sse = S::zero();
        let mut start = 0;
        while start < n {
            let rows = BLOCK.min(n - start);
            let g = want_grad.then_some(grad.as_mut_slice());
            sse += self.block(params, start, rows, g);
            start += rows;
        }
        (sse / S::of(n as f64), grad)
    }
}

struct Tape<S> {
    /// `acts[0]` is the input block, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<S>>,
    /// Pre-activations of every layer.
    pres: Vec<Vec<S>>,
}

pub(crate) fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::invalid("widths", "need at least input and output widths"));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::invalid("widths", "layer widths must be positive"));
    }
    Ok(())
}

pub(crate) fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|p| (p[0] + 1) * p[1]).sum()
}

impl<T: Scalar> Objective<T> for Mlp<T> {
    fn dim(&self) -> usize {
        self.param_count()
    }

    fn loss(&self, w: &Params<T>) -> Result<T> {
        w.check_dim(self.dim())?;
        Ok(self.evaluate::<T>(w.as_slice(), false).0)
    }

    fn gradient(&self, w: &Params<T>) -> Result<GradientInfo<T>> {
        w.check_dim(self.dim())?;
        let (_, grad) = self.evaluate::<T>(w.as_slice(), true);
        finite_gradient(grad)
    }

    fn hvp(&self, w: &Params<T>, v: &Params<T>) -> Result<Params<T>> {
        w.check_dim(self.dim())?;
        v.check_dim(self.dim())?;
        let seeded: Vec<Dual<T>> = w
            .iter()
            .zip(v.iter())
            .map(|(&x, &dx)| Dual::new(x, dx))
            .collect();
        let (_, grad) = self.evaluate::<Dual<T>>(&seeded, true);
        Ok(Params::from_vec(grad.into_iter().map(|g| g.eps).collect()))
    }

    fn loss_and_gradient(&self, w: &Params<T>) -> Result<(T, GradientInfo<T>)> {
        w.check_dim(self.dim())?;
        let (loss, grad) = self.evaluate::<T>(w.as_slice(), true);
        Ok((loss, finite_gradient(grad)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::glorot_init;

    fn tiny(act: Activation) -> Mlp<f64> {
        let inputs = vec![0.5, -1.0, 0.2, 0.3, -0.7, 1.1];
        let targets = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let data = Dataset::new(inputs, targets, 2, 2).unwrap();
        Mlp::new(vec![2, 3, 2], act, Arc::new(data)).unwrap()
    }

    #[test]
    fn param_count_matches_layer_sum() {
        let m = tiny(Activation::Tanh);
        assert_eq!(m.param_count(), (2 + 1) * 3 + (3 + 1) * 2);
        assert_eq!(param_count(&[8, 16, 16, 4]), 9 * 16 + 17 * 16 + 17 * 4);
    }

    #[test]
    fn zero_network_on_zero_targets_has_zero_loss() {
        let data = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4], 2, 2).unwrap();
        let m = Mlp::new(vec![2, 4, 2], Activation::Relu, Arc::new(data)).unwrap();
        let w = Params::zeros(m.param_count());
        assert_eq!(m.loss(&w).unwrap(), 0.0);
    }

    #[test]
    fn loss_matches_hand_computed_linear_model() {
        // single linear layer: f(x) = Wx + b
        let data = Dataset::new(vec![1.0, 2.0, -1.0, 0.5], vec![1.0, 0.0], 2, 1).unwrap();
        let m = Mlp::new(vec![2, 1], Activation::Tanh, Arc::new(data)).unwrap();
        let w = Params::new(vec![0.5, -1.0, 0.25]).unwrap();
        let r0: f64 = 0.5 - 2.0 + 0.25 - 1.0;
        let r1: f64 = -0.5 - 0.5 + 0.25;
        let expected = (r0 * r0 + r1 * r1) / 2.0;
        assert!((m.loss(&w).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn pack_unpack_roundtrip_preserves_loss() {
        let m = tiny(Activation::Tanh);
        let w = glorot_init::<f64>(m.widths(), 3).unwrap();
        let layers = m.unpack(&w).unwrap();
        assert_eq!(layers[0].weights.len(), 6);
        let w2 = m.pack(&layers).unwrap();
        assert_eq!(w, w2);
        assert_eq!(m.loss(&w).unwrap(), m.loss(&w2).unwrap());
    }

    #[test]
    fn mismatched_widths_are_rejected() {
        let data = Dataset::new(vec![1.0, 2.0], vec![0.0], 2, 1).unwrap();
        assert!(Mlp::new(vec![3, 1], Activation::Tanh, Arc::new(data.clone())).is_err());
        assert!(Mlp::new(vec![2, 0, 1], Activation::Tanh, Arc::new(data)).is_err());
    }

    #[test]
    fn relu_hvp_has_no_activation_curvature() {
        // With relu the Hessian of the output layer weights is still nonzero
        // (Gauss-Newton part), but the second derivative of relu itself is 0.
        let m = tiny(Activation::Relu);
        let w = glorot_init::<f64>(m.widths(), 11).unwrap();
        let v = glorot_init::<f64>(m.widths(), 12).unwrap();
        let hv = m.hvp(&w, &v).unwrap();
        let eps = 1e-6;
        let gp = m.gradient(&w.add_scaled(eps, &v)).unwrap().grad;
        let gm = m.gradient(&w.add_scaled(-eps, &v)).unwrap().grad;
        for i in 0..hv.dim() {
            let fd = (gp[i] - gm[i]) / (2.0 * eps);
            assert!((fd - hv[i]).abs() < 1e-6 * (1.0 + hv[i].abs()), "{i}: {fd} vs {}", hv[i]);
        }
    }

    #[test]
    fn f32_model_tracks_f64() {
        let m64 = tiny(Activation::Tanh);
        let d = m64.data();
        let d32 = Dataset::new(
            d.inputs().iter().map(|&x| x as f32).collect(),
            d.targets().iter().map(|&x| x as f32).collect(),
            2,
            2,
        )
        .unwrap();
        let m32 = Mlp::new(vec![2, 3, 2], Activation::Tanh, Arc::new(d32)).unwrap();
        let w64 = glorot_init::<f64>(m64.widths(), 5).unwrap();
        let w32 = Params::new(w64.iter().map(|&x| x as f32).collect()).unwrap();
        let l64 = m64.loss(&w64).unwrap();
        let l32 = m32.loss(&w32).unwrap() as f64;
        assert!((l64 - l32).abs() < 1e-5 * l64.max(1.0));
    }
}
