use super::policy::Policy;

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Policy, grads: &Policy) {
        if self.m.is_empty() {
            let n = params.param_count();
            self.m = vec![0.0; n];
            self.v = vec![0.0; n];
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powf(self.t as f64);
        let bc2 = 1.0 - self.beta2.powf(self.t as f64);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut k = 0;
        params.visit_pair_mut(grads, &mut |s, g| {
            let n = s.len();
            let moments = m[k..k + n].iter_mut().zip(v[k..k + n].iter_mut());
            for ((p, &g), (m, v)) in s.iter_mut().zip(g).zip(moments) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
            k += n;
        });
    }
}
