//! Small feed-forward networks trained with Adam.
//!
//! Weights are stored input-major: layer `l` keeps an `in x out` matrix
//! followed by `out` biases in one flat parameter vector, so a forward pass over
//! a batch is one matrix product per layer.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "tomosplit-mlp 1";

/// Multi-layer perceptron: rectifier on hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Activations of every layer for a batch, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    rows: usize,
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Network outputs, `rows x out`, row-major.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has an input layer")
    }
}

// c = a * b + beta * c, with arbitrary strides on a and b and c row-major m x n.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_strides: (isize, isize), b: &[f64], b_strides: (isize, isize), beta: f64, c: &mut [f64]) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: callers pass slices covering the strided extents of m x k, k x n and m x n.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    fn layout(sizes: &[usize]) -> Result<Vec<usize>> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let mut offsets = vec![0];
        for w in sizes.windows(2) {
            offsets.push(offsets.last().unwrap() + w[0] * w[1] + w[1]);
        }
        Ok(offsets)
    }

    /// Uniform `±1/sqrt(fan_in)` initialization of weights and biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for l in 0..net.n_layers() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            let range = net.offsets[l]..net.offsets[l + 1];
            for p in &mut net.params[range] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        let offsets = Self::layout(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; *offsets.last().unwrap()],
            offsets,
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let offsets = Self::layout(sizes)?;
        let expected = *offsets.last().unwrap();
        if params.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite network parameter".into()));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
            offsets,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Index range of layer `l`'s `in x out` weight matrix within [`Mlp::params`].
    pub fn weight_range(&self, l: usize) -> Range<usize> {
        let start = self.offsets[l];
        start..start + self.sizes[l] * self.sizes[l + 1]
    }

    pub fn bias_range(&self, l: usize) -> Range<usize> {
        let end = self.offsets[l + 1];
        end - self.sizes[l + 1]..end
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Forward pass over `inputs.len() / input_dim` rows, keeping every layer's activations.
    pub fn forward_trace(&self, inputs: &[f64]) -> Result<Trace> {
        let d = self.input_dim();
        if inputs.len() % d != 0 {
            return Err(Error::Dimension {
                expected: d,
                got: inputs.len() % d,
            });
        }
        let rows = inputs.len() / d;
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(inputs.to_vec());
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let bias = &self.params[self.bias_range(l)];
            let mut out = Vec::with_capacity(rows * fan_out);
            for _ in 0..rows {
                out.extend_from_slice(bias);
            }
            let w = &self.params[self.weight_range(l)];
            let prev = acts.last().unwrap();
            if rows == 1 {
                for (x, row) in prev.iter().zip(w.chunks_exact(fan_out)) {
                    if *x != 0.0 {
                        for (o, wij) in out.iter_mut().zip(row) {
                            *o += x * wij;
                        }
                    }
                }
            } else {
                gemm(rows, fan_in, fan_out, prev, (fan_in as isize, 1), w, (fan_out as isize, 1), 1.0, &mut out);
            }
            if l + 1 < self.n_layers() {
                for o in &mut out {
                    *o = o.max(0.0);
                }
            }
            acts.push(out);
        }
        Ok(Trace { rows, acts })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        Ok(self.forward_trace(input)?.acts.pop().unwrap())
    }

    /// Scalar output of a single-output network.
    pub fn forward_scalar(&self, input: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.output_dim(),
            });
        }
        Ok(self.forward(input)?[0])
    }

    /// Outputs for a row-major batch of inputs.
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(inputs)?.acts.pop().unwrap())
    }

    /// Backpropagates `out_grad` (dL/d output, `rows x out`) through `trace`.
    /// Returns the parameter gradient and, if asked, dL/d input (`rows x in`).
    pub fn backward(&self, trace: &Trace, out_grad: &[f64], want_input: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let rows = trace.rows;
        if out_grad.len() != rows * self.output_dim() {
            return Err(Error::Dimension {
                expected: rows * self.output_dim(),
                got: out_grad.len(),
            });
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = out_grad.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let prev = &trace.acts[l];
            let wr = self.weight_range(l);
            // dW = prev^T * delta
            gemm(fan_in, rows, fan_out, prev, (1, fan_in as isize), &delta, (fan_out as isize, 1), 0.0, &mut grad[wr.clone()]);
            let br = self.bias_range(l);
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in grad[br.clone()].iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 && !want_input {
                break;
            }
            // delta_prev = delta * W^T, masked by the rectifier below.
            let mut next = vec![0.0; rows * fan_in];
            gemm(rows, fan_out, fan_in, &delta, (fan_out as isize, 1), &self.params[wr], (1, fan_out as isize), 0.0, &mut next);
            if l > 0 {
                for (n, a) in next.iter_mut().zip(prev) {
                    if *a <= 0.0 {
                        *n = 0.0;
                    }
                }
            }
            delta = next;
        }
        Ok((grad, want_input.then_some(delta)))
    }

    /// Mean squared error `(1/M) sum (c - Q(x))^2` over a batch and its parameter gradient.
    pub fn grad_params(&self, batch: &[(Vec<f64>, f64)]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if self.output_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.output_dim(),
            });
        }
        let mut inputs = Vec::with_capacity(batch.len() * self.input_dim());
        for (x, _) in batch {
            self.check_input(x.len())?;
            inputs.extend_from_slice(x);
        }
        let trace = self.forward_trace(&inputs)?;
        let m = batch.len() as f64;
        let mut loss = 0.0;
        let out_grad: Vec<f64> = trace
            .output()
            .iter()
            .zip(batch)
            .map(|(q, (_, c))| {
                loss += (q - c) * (q - c);
                2.0 * (q - c) / m
            })
            .collect();
        let (grad, _) = self.backward(&trace, &out_grad, false)?;
        Ok((loss / m, grad))
    }

    /// Gradient of the scalar output with respect to `input[range]`.
    pub fn grad_input(&self, input: &[f64], range: Range<usize>) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        if range.start > range.end || range.end > input.len() {
            return Err(Error::Config(format!(
                "input slice {range:?} outside 0..{}",
                input.len()
            )));
        }
        if self.output_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.output_dim(),
            });
        }
        let trace = self.forward_trace(input)?;
        let (_, g) = self.backward(&trace, &[1.0], true)?;
        Ok(g.unwrap()[range].to_vec())
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes
    }

    /// Text checkpoint: a magic line, the layer sizes, then one parameter per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.params.len() * 24);
        out.push_str(CHECKPOINT_MAGIC);
        out.push('\n');
        out.push_str("layers");
        for s in &self.sizes {
            write!(out, " {s}").unwrap();
        }
        out.push('\n');
        for p in &self.params {
            writeln!(out, "{p}").unwrap();
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == CHECKPOINT_MAGIC => {}
            _ => return Err(Error::parse(origin, 1, format!("expected `{CHECKPOINT_MAGIC}`"))),
        }
        let sizes = match lines.next() {
            Some((i, l)) => {
                let mut fields = l.split_whitespace();
                if fields.next() != Some("layers") {
                    return Err(Error::parse(origin, i + 1, "expected `layers ...`"));
                }
                fields
                    .map(|f| f.parse::<usize>().map_err(|e| Error::parse(origin, i + 1, e.to_string())))
                    .collect::<Result<Vec<_>>>()?
            }
            None => return Err(Error::parse(origin, 2, "missing layer sizes")),
        };
        let mut params = Vec::new();
        for (i, l) in lines {
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            params.push(l.parse::<f64>().map_err(|e| Error::parse(origin, i + 1, e.to_string()))?);
        }
        Self::from_params(&sizes, params).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }
}

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam descent step.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                got: if params.len() != self.m.len() { params.len() } else { grads.len() },
            });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powf(self.t as f64);
        let c2 = 1.0 - self.beta2.powf(self.t as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
        Ok(())
    }
}

/// `target <- tau * live + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, live: &Mlp, tau: f64) -> Result<()> {
    if !target.same_architecture(live) {
        return Err(Error::Config(format!(
            "soft update between {:?} and {:?}",
            target.sizes, live.sizes
        )));
    }
    for (t, l) in target.params.iter_mut().zip(&live.params) {
        *t = tau * l + (1.0 - tau) * *t;
    }
    Ok(())
}

/// A network and its slowly tracking target copy.
#[derive(Debug, Clone)]
pub struct TargetPair {
    pub live: Mlp,
    pub target: Mlp,
    pub tau: f64,
}

impl TargetPair {
    pub fn new(live: Mlp, tau: f64) -> Self {
        Self {
            target: live.clone(),
            live,
            tau,
        }
    }

    pub fn soft_update(&mut self) -> Result<()> {
        soft_update(&mut self.target, &self.live, self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(w: f64) -> Mlp {
        Mlp::from_params(&[1, 1, 1], vec![w, 0.0, w, 0.0]).unwrap()
    }

    #[test]
    fn bias_only_network() {
        let mut net = Mlp::zeros(&[3, 4, 1]).unwrap();
        let b = net.bias_range(1);
        net.params_mut()[b][0] = 0.7;
        assert_eq!(net.forward_scalar(&[1.0, -5.0, 9.0]).unwrap(), 0.7);
        assert_eq!(net.grad_input(&[1.0, -5.0, 9.0], 0..3).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rectifier_pass_and_clamp() {
        let net = chain(1.0);
        assert_eq!(net.forward_scalar(&[2.0]).unwrap(), 2.0);
        assert_eq!(net.forward_scalar(&[-2.0]).unwrap(), 0.0);
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn linear_neuron_gradients() {
        let net = Mlp::from_params(&[1, 1], vec![1.0, 0.0]).unwrap();
        let (loss, g) = net.grad_params(&[(vec![1.0], 2.0)]).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(g[0], -2.0);
        let lin = Mlp::from_params(&[3, 1], vec![0.5, -1.0, 2.0, 0.3]).unwrap();
        assert_eq!(lin.grad_input(&[1.0, 1.0, 1.0], 1..3).unwrap(), vec![-1.0, 2.0]);
        assert!(lin.grad_input(&[1.0, 1.0, 1.0], 2..4).is_err());
    }

    #[test]
    fn zero_gradient_at_fit() {
        let net = chain(1.0);
        let (loss, g) = net.grad_params(&[(vec![2.0], 2.0), (vec![3.0], 3.0)]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = Mlp::new(&[5, 8, 6, 1], &mut rng).unwrap();
        let batch: Vec<(Vec<f64>, f64)> = (0..4)
            .map(|_| ((0..5).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(-1.0..1.0)))
            .collect();
        let (_, g) = net.grad_params(&batch).unwrap();
        let h = 1e-5;
        for i in 0..net.params().len() {
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let up = p.grad_params(&batch).unwrap().0;
            p.params_mut()[i] -= 2.0 * h;
            let down = p.grad_params(&batch).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 + 1e-4 * fd.abs(), "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[4, 16, 3], &mut rng).unwrap();
        let inputs: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = net.forward_batch(&inputs).unwrap();
        for (row, x) in inputs.chunks(4).enumerate() {
            let single = net.forward(x).unwrap();
            for k in 0..3 {
                assert!((single[k] - batch[row * 3 + k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adam_first_step_and_symmetry() {
        let mut adam = AdamState::new(2, 0.05);
        let mut p = vec![1.0, 1.0];
        adam.step(&mut p, &[1.0, -1.0]).unwrap();
        assert!((p[0] - 0.95).abs() < 1e-6);
        assert!(((1.0 - p[0]) - (p[1] - 1.0)).abs() < 1e-15);
        let mut still = AdamState::new(1, 0.05);
        let mut q = vec![3.0];
        for _ in 0..100 {
            still.step(&mut q, &[0.0]).unwrap();
        }
        assert_eq!(q, vec![3.0]);
        assert!(still.step(&mut q, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn soft_update_endpoints_and_contraction() {
        let live = Mlp::from_params(&[1, 1], vec![2.0, 2.0]).unwrap();
        let mut target = Mlp::from_params(&[1, 1], vec![1.0, 1.0]).unwrap();
        soft_update(&mut target, &live, 0.1).unwrap();
        assert!((target.params()[0] - 1.1).abs() < 1e-15);
        let before = target.clone();
        soft_update(&mut target, &live, 0.0).unwrap();
        assert_eq!(target, before);
        soft_update(&mut target, &live, 1.0).unwrap();
        assert_eq!(target, live);
        assert!(soft_update(&mut target, &Mlp::zeros(&[2, 1]).unwrap(), 0.5).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&[3, 7, 2], &mut rng).unwrap();
        let back = Mlp::parse(&net.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back, net);
        assert!(Mlp::parse("garbage\n", Path::new("mem")).is_err());
        let truncated: String = net.to_text().lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(Mlp::parse(&truncated, Path::new("mem")).is_err());
    }

    #[test]
    fn learns_a_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<(Vec<f64>, f64)> = (0..256)
            .map(|_| {
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = x[0] * x[0] + 0.5 * x[0] * x[1] - x[1] * x[1];
                (x, y)
            })
            .collect();
        let mut net = Mlp::new(&[2, 32, 32, 1], &mut rng).unwrap();
        let mut adam = AdamState::new(net.params().len(), 0.001);
        let initial = net.grad_params(&data).unwrap().0;
        for _ in 0..5000 {
            let (_, g) = net.grad_params(&data).unwrap();
            adam.step(net.params_mut(), &g).unwrap();
        }
        let fin = net.grad_params(&data).unwrap().0;
        assert!(fin * 10.0 <= initial, "{initial} -> {fin}");
    }
}
