//! Piecewise-linear functions of one variable.

use crate::error::{invalid, Result};

/// Behaviour outside the node range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outside {
    /// The function is zero outside the nodes.
    Zero,
    /// The first and last values are held constant.
    Clamp,
}

/// A continuous piecewise-linear function given by its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
    outside: Outside,
}

impl PiecewiseLinear {
    /// Nodes must be finite with strictly increasing abscissae.
    pub fn new(nodes: &[(f64, f64)], outside: Outside) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("nodes", "at least one node is required"));
        }
        if nodes.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(invalid("nodes", "nodes must be finite"));
        }
        if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid("nodes", "abscissae must be strictly increasing"));
        }
        Ok(Self {
            xs: nodes.iter().map(|n| n.0).collect(),
            ys: nodes.iter().map(|n| n.1).collect(),
            outside,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            xs: vec![0.0],
            ys: vec![value],
            outside: Outside::Clamp,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn outside(&self) -> Outside {
        self.outside
    }

    pub fn min_value(&self) -> f64 {
        let m = self.ys.iter().copied().fold(f64::INFINITY, f64::min);
        match self.outside {
            Outside::Zero => m.min(0.0),
            Outside::Clamp => m,
        }
    }

    pub fn max_value(&self) -> f64 {
        let m = self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self.outside {
            Outside::Zero => m.max(0.0),
            Outside::Clamp => m,
        }
    }

    /// True when the function takes a single value everywhere.
    pub fn is_constant(&self) -> bool {
        let first = self.ys[0];
        self.ys.iter().all(|&y| y == first) && (self.outside == Outside::Clamp || first == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return match self.outside {
                Outside::Zero => 0.0,
                Outside::Clamp if x < self.xs[0] => self.ys[0],
                Outside::Clamp => self.ys[n - 1],
            };
        }
        let k = self.xs.partition_point(|&a| a <= x);
        if k == n {
            return self.ys[n - 1];
        }
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        if y0 == y1 {
            y0
        } else {
            y0 + (x - x0) * (y1 - y0) / (x1 - x0)
        }
    }

    /// Right derivative at `x`.
    pub fn slope(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x < self.xs[0] || x >= self.xs[n - 1] {
            return 0.0;
        }
        let k = self.xs.partition_point(|&a| a <= x);
        (self.ys[k] - self.ys[k - 1]) / (self.xs[k] - self.xs[k - 1])
    }

    /// Exact integral over `[a, b]`; negative when `b < a`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let n = self.xs.len();
        let mut total = 0.0;
        // Constant extensions on the left and right.
        if self.outside == Outside::Clamp {
            let left_end = b.min(self.xs[0]);
            if left_end > a {
                total += (left_end - a) * self.ys[0];
            }
            let right_start = a.max(self.xs[n - 1]);
            if b > right_start {
                total += (b - right_start) * self.ys[n - 1];
            }
        }
        for k in 1..n {
            let lo = a.max(self.xs[k - 1]);
            let hi = b.min(self.xs[k]);
            if hi > lo {
                total += 0.5 * (hi - lo) * (self.eval(lo) + self.eval(hi));
            }
        }
        total
    }

    /// Interior breakpoints where the slope may change, including the end nodes.
    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_nodes() {
        assert!(PiecewiseLinear::new(&[(1.0, 0.0), (0.5, 1.0)], Outside::Zero).is_err());
        assert!(PiecewiseLinear::new(&[], Outside::Zero).is_err());
    }

    #[test]
    fn evaluates_between_nodes_and_outside() {
        let p = PiecewiseLinear::new(&[(0.0, 2.0), (0.4, 5.0), (0.6, 5.0), (1.0, 2.0)], Outside::Clamp).unwrap();
        assert_eq!(p.eval(0.5), 5.0);
        assert_eq!(p.eval(-1.0), 2.0);
        assert_eq!(p.eval(3.0), 2.0);
        assert!((p.eval(0.2) - 3.5).abs() < 1e-12);
        let z = PiecewiseLinear::new(&[(0.0, 1.0), (1.0, 1.0)], Outside::Zero).unwrap();
        assert_eq!(z.eval(1.5), 0.0);
    }

    #[test]
    fn integral_matches_riemann_sum() {
        let p = PiecewiseLinear::new(&[(0.0, 0.0), (0.4, 4000.0), (0.6, 4000.0), (1.0, 0.0)], Outside::Zero).unwrap();
        let n = 200_000;
        let h = 1.3 / n as f64;
        let riemann: f64 = (0..n).map(|i| p.eval((i as f64 + 0.5) * h) * h).sum();
        assert!((p.integral(0.0, 1.3) - riemann).abs() < 1e-6);
        assert!((p.integral(0.0, 1.0) - 2400.0).abs() < 1e-9);
    }

    #[test]
    fn clamped_integral_includes_tails() {
        let p = PiecewiseLinear::constant(3.0);
        assert!((p.integral(-1.0, 2.0) - 9.0).abs() < 1e-12);
        assert!(p.is_constant());
    }
}
