//! Network fundamental diagrams: speed-density and flow-density relations.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_non_negative, invalid, Error, Result};

/// Functional form of a fundamental diagram.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `min{u, w(kappa/rho - 1)}`.
    Triangular { u: f64, w: f64, kappa: f64 },
    /// `min{u, C/rho, w(kappa/rho - 1)}`.
    Trapezoidal { u: f64, capacity: f64, w: f64, kappa: f64 },
    /// `u(1 - rho/kappa)`.
    Greenshields { u: f64, kappa: f64 },
    /// Left-continuous steps: the speed of `[rho_k, rho_{k+1})` is `speed_k`.
    PiecewiseConstant { steps: Vec<(f64, f64)> },
    /// Linear interpolation between samples, clamped beyond the last one.
    Tabulated { samples: Vec<(f64, f64)> },
}

/// Per-lane capacity and the smallest density attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capacity {
    pub flow: f64,
    pub density: f64,
}

/// A validated, immutable fundamental diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalDiagram {
    shape: Shape,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn check_table(name: &'static str, pts: &[(f64, f64)], allow_increasing: bool) -> Result<()> {
    if pts.is_empty() {
        return Err(invalid(name, "needs at least one sample"));
    }
    if pts.iter().any(|(r, s)| !r.is_finite() || !s.is_finite()) {
        return Err(Error::Data(format!("{name} contains non-finite values")));
    }
    if pts[0].0 != 0.0 {
        return Err(invalid(name, "first density must be 0"));
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid(name, "densities must be strictly increasing"));
    }
    if pts.iter().any(|p| p.1 < 0.0) {
        return Err(invalid(name, "speeds must be non-negative"));
    }
    if !allow_increasing && pts.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(invalid(name, "speeds must be non-increasing in density"));
    }
    Ok(())
}

impl FundamentalDiagram {
    pub fn triangular(u: f64, w: f64, kappa: f64) -> Result<Self> {
        positive("u", u)?;
        positive("w", w)?;
        positive("kappa", kappa)?;
        Ok(Self { shape: Shape::Triangular { u, w, kappa } })
    }

    pub fn trapezoidal(u: f64, capacity: f64, w: f64, kappa: f64) -> Result<Self> {
        positive("u", u)?;
        positive("C", capacity)?;
        positive("w", w)?;
        positive("kappa", kappa)?;
        Ok(Self { shape: Shape::Trapezoidal { u, capacity, w, kappa } })
    }

    pub fn greenshields(u: f64, kappa: f64) -> Result<Self> {
        positive("u", u)?;
        positive("kappa", kappa)?;
        Ok(Self { shape: Shape::Greenshields { u, kappa } })
    }

    /// `steps` are `(density, speed)` pairs starting at density 0.
    pub fn piecewise_constant(steps: Vec<(f64, f64)>, allow_increasing: bool) -> Result<Self> {
        check_table("breakpoints", &steps, allow_increasing)?;
        Ok(Self { shape: Shape::PiecewiseConstant { steps } })
    }

    /// `samples` are `(density, speed)` pairs starting at density 0.
    pub fn tabulated(samples: Vec<(f64, f64)>, allow_increasing: bool) -> Result<Self> {
        check_table("samples", &samples, allow_increasing)?;
        if samples.len() < 2 {
            return Err(invalid("samples", "needs at least two samples"));
        }
        Ok(Self { shape: Shape::Tabulated { samples } })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Free-flow speed, the speed on an empty network.
    pub fn free_flow_speed(&self) -> f64 {
        self.speed_at(0.0)
    }

    /// Density at which speed first reaches zero, if it does.
    pub fn jam_density(&self) -> Option<f64> {
        match &self.shape {
            Shape::Triangular { kappa, .. }
            | Shape::Trapezoidal { kappa, .. }
            | Shape::Greenshields { kappa, .. } => Some(*kappa),
            Shape::PiecewiseConstant { steps } => steps.iter().find(|p| p.1 == 0.0).map(|p| p.0),
            Shape::Tabulated { samples } => samples.iter().find(|p| p.1 == 0.0).map(|p| p.0),
        }
    }

    /// Upper end of the density range the diagram describes.
    pub fn density_span(&self) -> f64 {
        match &self.shape {
            Shape::PiecewiseConstant { steps: pts } | Shape::Tabulated { samples: pts } => {
                self.jam_density().unwrap_or(pts[pts.len() - 1].0)
            }
            _ => self.jam_density().unwrap_or(f64::INFINITY),
        }
    }

    /// `V(rho)`; errors on negative density.
    pub fn speed(&self, rho: f64) -> Result<f64> {
        check_non_negative("density", rho)?;
        Ok(self.speed_at(rho))
    }

    /// `Q(rho) = rho V(rho)`; errors on negative density.
    pub fn flow(&self, rho: f64) -> Result<f64> {
        check_non_negative("density", rho)?;
        Ok(self.flow_at(rho))
    }

    /// Speed without the domain check; negative densities are treated as zero.
    pub(crate) fn speed_at(&self, rho: f64) -> f64 {
        let rho = rho.max(0.0);
        match &self.shape {
            Shape::Triangular { u, w, kappa } => {
                if rho >= *kappa {
                    0.0
                } else if rho == 0.0 {
                    *u
                } else {
                    u.min(w * (kappa / rho - 1.0))
                }
            }
            Shape::Trapezoidal { u, capacity, w, kappa } => {
                if rho >= *kappa {
                    0.0
                } else if rho == 0.0 {
                    *u
                } else {
                    u.min(capacity / rho).min(w * (kappa / rho - 1.0))
                }
            }
            Shape::Greenshields { u, kappa } => {
                if rho >= *kappa {
                    0.0
                } else {
                    u * (1.0 - rho / kappa)
                }
            }
            Shape::PiecewiseConstant { steps } => {
                let k = steps.partition_point(|p| p.0 <= rho);
                steps[k - 1].1
            }
            Shape::Tabulated { samples } => {
                let k = samples.partition_point(|p| p.0 <= rho);
                if k == samples.len() {
                    return samples[k - 1].1;
                }
                let (r0, s0) = samples[k - 1];
                let (r1, s1) = samples[k];
                s0 + (rho - r0) * (s1 - s0) / (r1 - r0)
            }
        }
    }

    pub(crate) fn flow_at(&self, rho: f64) -> f64 {
        rho.max(0.0) * self.speed_at(rho)
    }

    /// Maximum per-lane flow and its smallest maximizer.
    pub fn capacity(&self) -> Capacity {
        match &self.shape {
            Shape::Triangular { u, w, kappa } => {
                let density = w * kappa / (u + w);
                Capacity { flow: u * density, density }
            }
            Shape::Trapezoidal { u, capacity, w, kappa } => {
                let peak = u * w * kappa / (u + w);
                if *capacity >= peak {
                    let density = w * kappa / (u + w);
                    Capacity { flow: u * density, density }
                } else {
                    Capacity { flow: *capacity, density: capacity / u }
                }
            }
            Shape::Greenshields { u, kappa } => Capacity { flow: u * kappa / 4.0, density: kappa / 2.0 },
            Shape::PiecewiseConstant { steps } => {
                // Flow rises within each step; the supremum sits at the right end of a step.
                let span = self.density_span();
                let mut best = Capacity { flow: 0.0, density: 0.0 };
                for (k, &(_, s)) in steps.iter().enumerate() {
                    let right = steps.get(k + 1).map_or(span, |p| p.0);
                    let q = right * s;
                    if q > best.flow {
                        best = Capacity { flow: q, density: right };
                    }
                }
                best
            }
            Shape::Tabulated { .. } => self.scanned_capacity(),
        }
    }

    fn scanned_capacity(&self) -> Capacity {
        const N: usize = 4096;
        let span = self.density_span();
        let h = span / N as f64;
        let mut k_best = 0;
        let mut q_best = f64::NEG_INFINITY;
        for k in 0..=N {
            let q = self.flow_at(k as f64 * h);
            if q > q_best {
                q_best = q;
                k_best = k;
            }
        }
        let mut a = (k_best.saturating_sub(1)) as f64 * h;
        let mut b = ((k_best + 1).min(N)) as f64 * h;
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        while b - a > 1e-12 * span.max(1.0) {
            if self.flow_at(c) >= self.flow_at(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - ratio * (b - a);
            d = a + ratio * (b - a);
        }
        let mid = 0.5 * (a + b);
        let grid_rho = k_best as f64 * h;
        if self.flow_at(mid) > q_best {
            Capacity { flow: self.flow_at(mid), density: mid }
        } else {
            Capacity { flow: q_best, density: grid_rho }
        }
    }

    /// Sign of `dQ/drho` by a central difference with step `kappa * 1e-6`.
    pub fn flow_slope_sign(&self, rho: f64) -> i8 {
        let span = self.density_span();
        let scale = if span.is_finite() { span } else { 1.0 };
        let h = scale * 1e-6;
        let lo = (rho - h).max(0.0);
        let hi = rho + h;
        let slope = (self.flow_at(hi) - self.flow_at(lo)) / (hi - lo);
        if slope.abs() < scale * 1e-9 {
            0
        } else if slope > 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Speed relation for systems where vehicles and trips are decoupled,
/// `V(rho, lambda, f, g)`.
#[derive(Clone)]
pub enum ExtendedSpeedRelation {
    /// Base diagram speed times `1 / (1 + alpha (f + g) / L)`.
    BoardingDelay {
        fd: FundamentalDiagram,
        lane_miles: f64,
        alpha: f64,
    },
    /// Arbitrary user relation of `(rho, lambda, f, g)`.
    Custom(Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ExtendedSpeedRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BoardingDelay { fd, lane_miles, alpha } => f
                .debug_struct("BoardingDelay")
                .field("fd", fd)
                .field("lane_miles", lane_miles)
                .field("alpha", alpha)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ExtendedSpeedRelation {
    pub fn boarding_delay(fd: FundamentalDiagram, lane_miles: f64, alpha: f64) -> Result<Self> {
        positive("L", lane_miles)?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be non-negative, got {alpha}")));
        }
        Ok(Self::BoardingDelay { fd, lane_miles, alpha })
    }

    pub fn speed(&self, rho: f64, lambda: f64, f: f64, g: f64) -> Result<f64> {
        check_non_negative("density", rho)?;
        check_non_negative("trip count", lambda)?;
        check_non_negative("in-flux", f)?;
        check_non_negative("out-flux", g)?;
        Ok(self.speed_at(rho, lambda, f, g))
    }

    pub(crate) fn speed_at(&self, rho: f64, lambda: f64, f: f64, g: f64) -> f64 {
        match self {
            Self::BoardingDelay { fd, lane_miles, alpha } => {
                fd.speed_at(rho) / (1.0 + alpha * (f + g).max(0.0) / lane_miles)
            }
            Self::Custom(rel) => rel(rho, lambda, f, g).max(0.0),
        }
    }
}
