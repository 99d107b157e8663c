//! Masked policy/value network.
//!
//! ```text
//! input ─ shared (ReLU) ─┬─ policy_hidden (ReLU) ─ policy_out ─ + mask ─ softmax
//!                        └─ value_hidden (ReLU) ── value_out ─ value
//! ```
//!
//! Layers are dense with weights stored row-major as `inputs x outputs`.
//! Everything is batched: row `i` of every matrix belongs to sample `i`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::action::{ActionIndex, NUM_ACTIONS};
use crate::encoder::ENCODING_LEN;
use crate::linalg::{gemm, Layout};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("every action of batch row {row} is masked out")]
    AllMasked { row: usize },
    #[error("{what}: expected {expected} values, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetworkShape {
    pub input: usize,
    pub shared: usize,
    pub head: usize,
    pub actions: usize,
}

impl NetworkShape {
    /// 412 -> 512 -> (256 -> 1695, 256 -> 1).
    pub const STANDARD: NetworkShape = NetworkShape {
        input: ENCODING_LEN,
        shared: 512,
        head: 256,
        actions: NUM_ACTIONS,
    };
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape::STANDARD
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Dense<T> {
        Dense {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn orthogonal<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Dense<T> {
        Dense {
            inputs,
            outputs,
            weight: orthogonal(inputs, outputs, gain, rng),
            bias: vec![T::zero(); outputs],
        }
    }

    /// `out = x * W + b` for `batch` rows.
    fn forward(&self, x: &[T], batch: usize, out: &mut Vec<T>) {
        out.clear();
        for _ in 0..batch {
            out.extend_from_slice(&self.bias);
        }
        gemm(
            batch,
            self.inputs,
            self.outputs,
            T::one(),
            x,
            Layout::Normal,
            &self.weight,
            Layout::Normal,
            T::one(),
            out,
        );
    }

    /// Accumulates parameter gradients for upstream gradient `dy` and
    /// returns nothing; `x` is the layer input.
    fn accumulate(&mut self, x: &[T], dy: &[T], batch: usize) {
        gemm(
            self.inputs,
            batch,
            self.outputs,
            T::one(),
            x,
            Layout::Transposed,
            dy,
            Layout::Normal,
            T::one(),
            &mut self.weight,
        );
        for row in dy.chunks_exact(self.outputs) {
            for (b, &g) in self.bias.iter_mut().zip(row) {
                *b += g;
            }
        }
    }

    /// `dx = dy * W^T` (overwrites or accumulates into `dx`).
    fn input_grad(&self, dy: &[T], batch: usize, dx: &mut [T], accumulate: bool) {
        let beta = if accumulate { T::one() } else { T::zero() };
        gemm(
            batch,
            self.outputs,
            self.inputs,
            T::one(),
            dy,
            Layout::Normal,
            &self.weight,
            Layout::Transposed,
            beta,
            dx,
        );
    }
}

/// Gaussian matrix orthonormalised along its shorter side and scaled by
/// `gain`, returned row-major as `rows x cols`.
fn orthogonal<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<T> {
    let (count, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut v: Vec<f64> = (0..count * len).map(|_| rng.sample(StandardNormal)).collect();
    for i in 0..count {
        let (done, rest) = v.split_at_mut(i * len);
        let vi = &mut rest[..len];
        for j in 0..i {
            let vj = &done[j * len..(j + 1) * len];
            let dot: f64 = vi.iter().zip(vj).map(|(a, b)| a * b).sum();
            vi.iter_mut().zip(vj).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = libm::sqrt(vi.iter().map(|a| a * a).sum::<f64>());
        vi.iter_mut().for_each(|a| *a /= norm);
    }
    let mut out = vec![T::zero(); rows * cols];
    for i in 0..count {
        for r in 0..len {
            let x = T::lit(gain * v[i * len + r]);
            if rows <= cols {
                out[i * cols + r] = x;
            } else {
                out[r * cols + i] = x;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub shape: NetworkShape,
    pub shared: Dense<T>,
    pub policy_hidden: Dense<T>,
    pub policy_out: Dense<T>,
    pub value_hidden: Dense<T>,
    pub value_out: Dense<T>,
}

/// Gradients mirror the parameter layout exactly.
pub type ParameterGradients<T> = Network<T>;

/// Layer names in storage order.
pub const LAYER_NAMES: [&str; 5] = [
    "shared",
    "policy_hidden",
    "policy_out",
    "value_hidden",
    "value_out",
];

impl<T: Scalar> Network<T> {
    pub fn zeros(shape: NetworkShape) -> Network<T> {
        Network {
            shape,
            shared: Dense::zeros(shape.input, shape.shared),
            policy_hidden: Dense::zeros(shape.shared, shape.head),
            policy_out: Dense::zeros(shape.head, shape.actions),
            value_hidden: Dense::zeros(shape.shared, shape.head),
            value_out: Dense::zeros(shape.head, 1),
        }
    }

    /// Orthogonal initialisation: gain sqrt(2) on the ReLU layers, 1 on the
    /// value output and 0.01 on the policy output so the initial policy is
    /// close to uniform over legal moves. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(shape: NetworkShape, rng: &mut R) -> Network<T> {
        let relu_gain = core::f64::consts::SQRT_2;
        Network {
            shape,
            shared: Dense::orthogonal(shape.input, shape.shared, relu_gain, rng),
            policy_hidden: Dense::orthogonal(shape.shared, shape.head, relu_gain, rng),
            policy_out: Dense::orthogonal(shape.head, shape.actions, 0.01, rng),
            value_hidden: Dense::orthogonal(shape.shared, shape.head, relu_gain, rng),
            value_out: Dense::orthogonal(shape.head, 1, 1.0, rng),
        }
    }

    pub fn layers(&self) -> [&Dense<T>; 5] {
        [
            &self.shared,
            &self.policy_hidden,
            &self.policy_out,
            &self.value_hidden,
            &self.value_out,
        ]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense<T>; 5] {
        [
            &mut self.shared,
            &mut self.policy_hidden,
            &mut self.policy_out,
            &mut self.value_hidden,
            &mut self.value_out,
        ]
    }

    /// Parameter tensors in storage order: each layer's weight then bias.
    pub fn tensors(&self) -> impl Iterator<Item = &[T]> {
        self.layers()
            .into_iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<T>> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().map(<[T]>::len).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.tensors().flatten()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.tensors_mut().flat_map(|t| t.iter_mut())
    }

    pub fn fill(&mut self, value: T) {
        self.params_mut().for_each(|p| *p = value);
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Network<T>, scale: T) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.params_mut().zip(other.params()) {
            *a += scale * *b;
        }
    }

    pub fn scale(&mut self, s: T) {
        self.params_mut().for_each(|p| *p *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.params().map(|p| p.as_f64() * p.as_f64()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let conv = |d: &Dense<T>| Dense {
            inputs: d.inputs,
            outputs: d.outputs,
            weight: d.weight.iter().map(|x| U::lit(x.as_f64())).collect(),
            bias: d.bias.iter().map(|x| U::lit(x.as_f64())).collect(),
        };
        Network {
            shape: self.shape,
            shared: conv(&self.shared),
            policy_hidden: conv(&self.policy_hidden),
            policy_out: conv(&self.policy_out),
            value_hidden: conv(&self.value_hidden),
            value_out: conv(&self.value_out),
        }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, state: &[T], additive_mask: &[T]) -> Result<PolicyValueOutput<T>, NetError> {
        let cache = self.forward_batch(state, additive_mask, 1)?;
        Ok(PolicyValueOutput {
            value: cache.values[0],
            probs: cache.probs,
            log_probs: cache.log_probs,
        })
    }

    /// Batched forward pass through both heads.
    pub fn forward_batch(&self, inputs: &[T], masks: &[T], batch: usize) -> Result<ForwardCache<T>, NetError> {
        self.run(inputs, masks, batch, true)
    }

    /// Batched forward pass through the policy head only.
    pub fn policy_batch(&self, inputs: &[T], masks: &[T], batch: usize) -> Result<ForwardCache<T>, NetError> {
        self.run(inputs, masks, batch, false)
    }

    fn run(&self, inputs: &[T], masks: &[T], batch: usize, with_value: bool) -> Result<ForwardCache<T>, NetError> {
        let s = self.shape;
        check_len("inputs", batch * s.input, inputs.len())?;
        check_len("masks", batch * s.actions, masks.len())?;

        let mut cache = ForwardCache {
            batch,
            shared: Vec::new(),
            policy_hidden: Vec::new(),
            value_hidden: Vec::new(),
            probs: Vec::new(),
            log_probs: Vec::new(),
            values: Vec::new(),
        };
        self.shared.forward(inputs, batch, &mut cache.shared);
        relu(&mut cache.shared);
        self.policy_hidden.forward(&cache.shared, batch, &mut cache.policy_hidden);
        relu(&mut cache.policy_hidden);
        self.policy_out.forward(&cache.policy_hidden, batch, &mut cache.probs);

        cache.log_probs = vec![T::zero(); batch * s.actions];
        for row in 0..batch {
            let range = row * s.actions..(row + 1) * s.actions;
            masked_log_softmax(
                &mut cache.probs[range.clone()],
                &masks[range.clone()],
                &mut cache.log_probs[range],
            )
            .map_err(|()| NetError::AllMasked { row })?;
        }

        if with_value {
            self.value_hidden.forward(&cache.shared, batch, &mut cache.value_hidden);
            relu(&mut cache.value_hidden);
            self.value_out.forward(&cache.value_hidden, batch, &mut cache.values);
        }
        Ok(cache)
    }

    /// Back-propagates loss gradients with respect to the (masked) logits
    /// and the value outputs, adding parameter gradients into `grads`.
    ///
    /// `d_logits` must be zero at masked entries; with the softmax-based
    /// losses in this crate that holds automatically because masked
    /// probabilities are exactly zero.
    pub fn backward(
        &self,
        inputs: &[T],
        cache: &ForwardCache<T>,
        d_logits: &[T],
        d_values: &[T],
        grads: &mut ParameterGradients<T>,
    ) -> Result<(), NetError> {
        let s = self.shape;
        let b = cache.batch;
        check_len("inputs", b * s.input, inputs.len())?;
        check_len("d_logits", b * s.actions, d_logits.len())?;
        check_len("d_values", b, d_values.len())?;
        if grads.shape != s {
            return Err(NetError::ShapeMismatch {
                what: "gradient shape",
                expected: self.num_parameters(),
                actual: grads.num_parameters(),
            });
        }

        let mut d_shared = vec![T::zero(); b * s.shared];

        grads.policy_out.accumulate(&cache.policy_hidden, d_logits, b);
        let mut d_policy_hidden = vec![T::zero(); b * s.head];
        self.policy_out.input_grad(d_logits, b, &mut d_policy_hidden, false);
        relu_grad(&mut d_policy_hidden, &cache.policy_hidden);
        grads.policy_hidden.accumulate(&cache.shared, &d_policy_hidden, b);
        self.policy_hidden.input_grad(&d_policy_hidden, b, &mut d_shared, false);

        if d_values.iter().any(|g| *g != T::zero()) {
            if cache.values.is_empty() {
                return Err(NetError::ShapeMismatch {
                    what: "value activations",
                    expected: b,
                    actual: 0,
                });
            }
            grads.value_out.accumulate(&cache.value_hidden, d_values, b);
            let mut d_value_hidden = vec![T::zero(); b * s.head];
            self.value_out.input_grad(d_values, b, &mut d_value_hidden, false);
            relu_grad(&mut d_value_hidden, &cache.value_hidden);
            grads.value_hidden.accumulate(&cache.shared, &d_value_hidden, b);
            self.value_hidden.input_grad(&d_value_hidden, b, &mut d_shared, true);
        }

        relu_grad(&mut d_shared, &cache.shared);
        grads.shared.accumulate(inputs, &d_shared, b);
        Ok(())
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), NetError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NetError::ShapeMismatch {
            what,
            expected,
            actual,
        })
    }
}

fn relu<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

fn relu_grad<T: Scalar>(grad: &mut [T], activation: &[T]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Turns `logits` into probabilities in place after adding `mask`, writing
/// log-probabilities (`-inf` where masked) to `log_probs`. The maximum of
/// the finite masked logits is subtracted before exponentiating.
fn masked_log_softmax<T: Scalar>(logits: &mut [T], mask: &[T], log_probs: &mut [T]) -> Result<(), ()> {
    let mut max = T::neg_infinity();
    for (z, &m) in logits.iter_mut().zip(mask) {
        *z += m;
        if z.is_finite() && *z > max {
            max = *z;
        }
    }
    if !max.is_finite() {
        return Err(());
    }
    let mut sum = T::zero();
    for z in logits.iter_mut() {
        *z = if z.is_finite() { (*z - max).exp() } else { T::zero() };
        sum += *z;
    }
    let log_sum = sum.ln();
    for ((p, lp), &m) in logits.iter_mut().zip(log_probs.iter_mut()).zip(mask) {
        if *p == T::zero() && !m.is_finite() {
            *lp = T::neg_infinity();
        } else {
            *lp = p.ln() - log_sum;
            if !lp.is_finite() {
                // Underflowed allowed entry: recover from the shifted logit.
                *lp = T::neg_infinity();
            }
        }
        *p = *p / sum;
    }
    Ok(())
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub batch: usize,
    pub shared: Vec<T>,
    pub policy_hidden: Vec<T>,
    pub value_hidden: Vec<T>,
    /// `batch x actions`, exactly zero at masked entries.
    pub probs: Vec<T>,
    /// `batch x actions`, `-inf` at masked entries.
    pub log_probs: Vec<T>,
    /// `batch` value estimates (empty for policy-only passes).
    pub values: Vec<T>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn probs_row(&self, row: usize) -> &[T] {
        let a = self.probs.len() / self.batch.max(1);
        &self.probs[row * a..(row + 1) * a]
    }

    pub fn log_probs_row(&self, row: usize) -> &[T] {
        let a = self.log_probs.len() / self.batch.max(1);
        &self.log_probs[row * a..(row + 1) * a]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueOutput<T> {
    pub probs: Vec<T>,
    /// `-inf` at masked entries.
    pub log_probs: Vec<T>,
    pub value: T,
}

impl<T: Scalar> PolicyValueOutput<T> {
    pub fn entropy(&self) -> T {
        masked_entropy(&self.probs, &self.log_probs)
    }
}

/// Entropy over the support of `probs` (`0 * log 0` counts as zero).
pub fn masked_entropy<T: Scalar>(probs: &[T], log_probs: &[T]) -> T {
    let mut h = T::zero();
    for (&p, &lp) in probs.iter().zip(log_probs) {
        if p > T::zero() {
            h -= p * lp;
        }
    }
    h
}

/// Draws an index from a discrete distribution.
pub fn sample_index<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if p > T::zero() {
            acc += p.as_f64();
            last = Some(i);
            if u < acc {
                return i;
            }
        }
    }
    // Rounding left the cumulative sum just below one.
    last.expect("distribution has no support")
}

/// Highest-probability index; ties go to the lowest index.
pub fn argmax<T: Scalar>(probs: &[T]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Samples an action from a full-size output and returns its log-probability.
pub fn sample_action<T: Scalar, R: Rng + ?Sized>(output: &PolicyValueOutput<T>, rng: &mut R) -> (ActionIndex, T) {
    let i = sample_index(&output.probs, rng);
    (ActionIndex::new(i).expect("output has one entry per action"), output.log_probs[i])
}

/// Deterministic counterpart of [`sample_action`].
pub fn greedy_action<T: Scalar>(output: &PolicyValueOutput<T>) -> (ActionIndex, T) {
    let i = argmax(&output.probs);
    (ActionIndex::new(i).expect("output has one entry per action"), output.log_probs[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TINY: NetworkShape = NetworkShape {
        input: 6,
        shared: 8,
        head: 5,
        actions: 7,
    };

    fn mask(allowed: &[usize], n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| if allowed.contains(&i) { 0.0 } else { f64::NEG_INFINITY })
            .collect()
    }

    #[test]
    fn single_allowed_action_is_certain() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net: Network<f64> = Network::init(TINY, &mut rng);
        let out = net.forward(&[1.0, 0.0, 1.0, 1.0, 0.0, 1.0], &mask(&[3], 7)).unwrap();
        assert_eq!(out.probs[3], 1.0);
        assert_eq!(out.log_probs[3], 0.0);
        assert!(out.probs.iter().enumerate().all(|(i, &p)| i == 3 || p == 0.0));
    }

    #[test]
    fn zero_network_is_uniform_over_allowed() {
        let net: Network<f32> = Network::zeros(NetworkShape::STANDARD);
        let mut m = vec![f32::NEG_INFINITY; NUM_ACTIONS];
        for i in [0, 20, 500, 1694] {
            m[i] = 0.0;
        }
        let out = net.forward(&vec![1.0; ENCODING_LEN], &m).unwrap();
        for i in [0, 20, 500, 1694] {
            assert!((out.probs[i] - 0.25).abs() < 1e-7);
        }
        assert_eq!(out.value, 0.0);
        assert!((out.entropy() - 4f32.ln()).abs() < 1e-6);
    }

    #[test]
    fn all_masked_is_an_error() {
        let net: Network<f64> = Network::zeros(TINY);
        let err = net.forward(&[0.0; 6], &mask(&[], 7)).unwrap_err();
        assert_eq!(err, NetError::AllMasked { row: 0 });
    }

    #[test]
    fn huge_logits_stay_finite() {
        let mut net: Network<f32> = Network::zeros(TINY);
        net.policy_out.bias = vec![1000.0, -1000.0, 999.0, 0.0, 500.0, -3.0, 1000.0];
        let m: Vec<f32> = mask(&[0, 1, 2, 4, 6], 7).iter().map(|&x| x as f32).collect();
        let out = net.forward(&[0.0; 6], &m).unwrap();
        let sum: f32 = out.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(out.probs.iter().all(|p| p.is_finite()));
        assert!((out.probs[0] - out.probs[6]).abs() < 1e-6);
        assert_eq!(out.probs[3], 0.0);
    }

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<f64> = orthogonal(4, 9, 2.0, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..9).map(|k| w[i * 9 + k] * w[j * 9 + k]).sum();
                let want = if i == j { 4.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
        let w: Vec<f64> = orthogonal(9, 4, 1.0, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..9).map(|k| w[k * 4 + i] * w[k * 4 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn argmax_ignores_rng_and_prefers_lowest() {
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
    }

    #[test]
    fn one_hot_sample_has_zero_log_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut probs = vec![0.0f32; NUM_ACTIONS];
        probs[77] = 1.0;
        let mut log_probs = vec![f32::NEG_INFINITY; NUM_ACTIONS];
        log_probs[77] = 0.0;
        let out = PolicyValueOutput {
            probs,
            log_probs,
            value: 0.0,
        };
        for _ in 0..10 {
            let (a, lp) = sample_action(&out, &mut rng);
            assert_eq!(a.value(), 77);
            assert_eq!(lp, 0.0);
        }
        assert_eq!(greedy_action(&out).0.value(), 77);
    }
}
