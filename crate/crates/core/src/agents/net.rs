//! Fully connected layers with hand-written backpropagation.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `inputs x outputs`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    /// Uniform init in `+-1/sqrt(inputs)`.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        Self {
            w: Array2::from_shape_fn((inputs, outputs), |_| rng.gen_range(-bound..bound)),
            b: Array1::from_shape_fn(outputs, |_| rng.gen_range(-bound..bound)),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.w);
        y += &self.b;
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

/// Stack of linear layers with ReLU between them. The last layer is linear
/// unless `relu_output` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub relu_output: bool,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTrace {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl MlpTrace {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|x| if x > 0.0 { x } else { 0.0 });
}

fn relu_mask(grad: &mut Array2<f64>, activated: &Array2<f64>) {
    ndarray::Zip::from(grad).and(activated).for_each(|g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
}

impl Mlp {
    /// `sizes` lists the input width followed by each layer's output width.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], relu_output: bool, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        Self {
            layers: sizes.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect(),
            relu_output,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.inputs(), l.outputs()))
                .collect(),
            relu_output: self.relu_output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn activates(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.relu_output
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(&h);
            if self.activates(i) {
                relu_inplace(&mut h);
            }
        }
        h
    }

    pub fn forward_trace(&self, x: Array2<f64>) -> MlpTrace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            let mut next = l.forward(&h);
            if self.activates(i) {
                relu_inplace(&mut next);
            }
            inputs.push(h);
            h = next;
        }
        MlpTrace { inputs, output: h }
    }

    pub fn backward(&self, trace: &MlpTrace, d_out: Array2<f64>, grad: &mut Mlp) -> Array2<f64> {
        self.backward_inner(trace, d_out, grad, true)
            .expect("input gradient requested")
    }

    /// Like [`Mlp::backward`] but skips the input gradient.
    pub fn backward_params(&self, trace: &MlpTrace, d_out: Array2<f64>, grad: &mut Mlp) {
        self.backward_inner(trace, d_out, grad, false);
    }

    fn backward_inner(
        &self,
        trace: &MlpTrace,
        d_out: Array2<f64>,
        grad: &mut Mlp,
        input_grad: bool,
    ) -> Option<Array2<f64>> {
        let mut dy = d_out;
        for i in (0..self.layers.len()).rev() {
            if self.activates(i) {
                let activated = if i + 1 < self.layers.len() {
                    &trace.inputs[i + 1]
                } else {
                    &trace.output
                };
                relu_mask(&mut dy, activated);
            }
            let layer = &self.layers[i];
            let g = &mut grad.layers[i];
            if i == 0 && !input_grad {
                g.w += &trace.inputs[0].t().dot(&dy);
                g.b += &dy.sum_axis(Axis(0));
                return None;
            }
            dy = layer.backward(&trace.inputs[i], &dy, g);
        }
        Some(dy)
    }

    pub fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for l in &self.layers {
            f(l.w.as_slice().expect("standard layout"));
            f(l.b.as_slice().expect("standard layout"));
        }
    }

    /// Visits matching blocks of `self` and a same-shaped `other`.
    pub fn visit_pair_mut(&mut self, other: &Mlp, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            f(l.w.as_slice_mut().expect("standard layout"), o.w.as_slice().expect("standard layout"));
            f(l.b.as_slice_mut().expect("standard layout"), o.b.as_slice().expect("standard layout"));
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(l.w.as_slice_mut().expect("standard layout"));
            f(l.b.as_slice_mut().expect("standard layout"));
        }
    }
}

/// Row-wise softmax of a logit vector, shifted for stability.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(net: &Mlp, x: &Array2<f64>) -> f64 {
        // weighted sum so every output gets a distinct gradient
        net.forward(x)
            .iter()
            .enumerate()
            .map(|(i, v)| v * (1.0 + i as f64 * 0.1))
            .sum()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[4, 6, 5, 3], false, &mut rng);
        let x = Array2::from_shape_fn((3, 4), |_| rng.gen_range(-1.0..1.0));
        let trace = net.forward_trace(x.clone());
        let d_out = Array2::from_shape_fn(trace.output().dim(), |(r, c)| 1.0 + (r * 3 + c) as f64 * 0.1);
        let mut grad = net.zeros_like();
        let dx = net.backward(&trace, d_out, &mut grad);

        let mut analytic = Vec::new();
        grad.visit(&mut |s| analytic.extend_from_slice(s));
        let mut numeric = Vec::new();
        let h = 1e-5;
        let n = analytic.len();
        for k in 0..n {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut idx = 0;
            plus.visit_mut(&mut |s| {
                for v in s.iter_mut() {
                    if idx == k {
                        *v += h;
                    }
                    idx += 1;
                }
            });
            idx = 0;
            minus.visit_mut(&mut |s| {
                for v in s.iter_mut() {
                    if idx == k {
                        *v -= h;
                    }
                    idx += 1;
                }
            });
            numeric.push((loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
            + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / scale < 1e-6, "rel err {}", diff / scale);

        for r in 0..3 {
            for c in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[[r, c]] += h;
                xm[[r, c]] -= h;
                let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
                assert!((fd - dx[[r, c]]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1000.0, 999.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| *x >= 0.0));
        let lp = log_softmax(&[0.3, -1.2, 2.0]);
        let p = softmax(&[0.3, -1.2, 2.0]);
        for (a, b) in lp.iter().zip(&p) {
            assert!((a.exp() - b).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
