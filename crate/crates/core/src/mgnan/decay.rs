//! Learnable nondecreasing function on `[0, 1]`.

use serde::{Deserialize, Serialize};

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Piecewise-linear curve through `M + 1` evenly spaced knots on `[0, 1]`.
///
/// Knot `m` has value `base + sum(softplus(increments[..m]))`, so every
/// parameter setting gives a nondecreasing curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneDecay {
    pub increments: Vec<f64>,
    pub base: f64,
}

impl MonotoneDecay {
    /// `rho(t) = t` up to rounding.
    pub fn linear(knots: usize) -> Self {
        assert!(knots >= 1, "at least one segment");
        let step = 1.0 / knots as f64;
        Self {
            increments: vec![step.exp_m1().ln(); knots],
            base: 0.0,
        }
    }

    pub fn segments(&self) -> usize {
        self.increments.len()
    }

    pub fn knot_values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.segments() + 1);
        let mut acc = self.base;
        v.push(acc);
        for &a in &self.increments {
            acc += softplus(a);
            v.push(acc);
        }
        v
    }

    /// Segment index and the weights of its two knots at `t` (clamped to `[0, 1]`).
    pub(crate) fn locate(&self, t: f64) -> (usize, f64, f64) {
        let m = self.segments();
        let pos = t.clamp(0.0, 1.0) * m as f64;
        let seg = (pos.floor() as usize).min(m - 1);
        let frac = pos - seg as f64;
        (seg, 1.0 - frac, frac)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with(&self.knot_values(), t)
    }

    pub(crate) fn eval_with(&self, knots: &[f64], t: f64) -> f64 {
        let (s, _, frac) = self.locate(t);
        // clamped so rounding can never step below the left knot or above the right
        (knots[s] + frac * (knots[s + 1] - knots[s])).clamp(knots[s], knots[s + 1])
    }

    /// Chain rule from knot-value gradients to `(increments, base)` gradients.
    pub(crate) fn backprop_knots(
        &self,
        d_knots: &[f64],
        d_increments: &mut [f64],
        d_base: &mut f64,
    ) {
        *d_base += d_knots.iter().sum::<f64>();
        let mut tail = 0.0;
        for l in (0..self.segments()).rev() {
            tail += d_knots[l + 1];
            d_increments[l] += sigmoid(self.increments[l]) * tail;
        }
    }

    pub fn param_count(&self) -> usize {
        self.segments() + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_init_is_identity() {
        let r = MonotoneDecay::linear(16);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert!((r.eval(t) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn knot_gradient_matches_finite_differences() {
        let r = MonotoneDecay {
            increments: vec![0.3, -1.2, 2.0, 0.1],
            base: -0.4,
        };
        let dk = [0.5, -1.0, 2.0, 0.25, 1.5];
        let loss = |r: &MonotoneDecay| {
            r.knot_values()
                .iter()
                .zip(dk)
                .map(|(v, d)| v * d)
                .sum::<f64>()
        };
        let mut da = vec![0.0; 4];
        let mut db = 0.0;
        r.backprop_knots(&dk, &mut da, &mut db);
        let h = 1e-6;
        for (l, expected) in da.iter().enumerate() {
            let (mut p, mut m) = (r.clone(), r.clone());
            p.increments[l] += h;
            m.increments[l] -= h;
            assert!(((loss(&p) - loss(&m)) / (2.0 * h) - expected).abs() < 1e-7);
        }
        let (mut p, mut m) = (r.clone(), r.clone());
        p.base += h;
        m.base -= h;
        assert!(((loss(&p) - loss(&m)) / (2.0 * h) - db).abs() < 1e-7);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((sigmoid(-800.0)).abs() < 1e-300 && sigmoid(800.0) == 1.0);
    }

    proptest! {
        #[test]
        fn nondecreasing_for_any_parameters(
            inc in proptest::collection::vec(-30.0f64..30.0, 1..24),
            base in -10.0f64..10.0,
        ) {
            let r = MonotoneDecay { increments: inc, base };
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=100 {
                let v = r.eval(i as f64 / 100.0);
                prop_assert!(v >= prev);
                prev = v;
            }
        }
    }
}
