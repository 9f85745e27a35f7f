//! Composite Gauss–Legendre quadrature.
//!
//! Every integral in the crate is a sum over fixed-order Gauss–Legendre
//! panels. Accuracy is controlled by doubling the panel count until two
//! successive estimates agree to `rel_tol` relative to `∫|f|`.

use std::ops::{Add, Mul};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes per panel.
pub const RULE_ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Base number of panels over the integration domain.
    pub panel_count: usize,
    /// How many times the panel count may be doubled.
    pub refinement_levels: usize,
    /// Relative agreement required between two successive refinements.
    pub rel_tol: f64,
    /// Upper frequency for spectral integrals. `None` lets the model decide.
    pub freq_cutoff: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panel_count: 64,
            refinement_levels: 6,
            rel_tol: 1e-10,
            freq_cutoff: None,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.panel_count < 8 {
            return Err(Error::param("panel_count", "must be at least 8"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::param("rel_tol", "must lie in (0, 1e-2]"));
        }
        if let Some(w) = self.freq_cutoff {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::param("freq_cutoff", "must be finite and positive"));
            }
        }
        Ok(())
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.freq_cutoff = Some(cutoff);
        self
    }
}

/// A Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on the Legendre
    /// three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Maps the rule onto `[a, b]`, calling `visit(x, w)` for each node.
    #[inline]
    pub fn for_each_on(&self, a: f64, b: f64, mut visit: impl FnMut(f64, f64)) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            visit(mid + half * x, half * w);
        }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// The shared panel rule of order [`RULE_ORDER`].
pub fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(RULE_ORDER))
}

/// Values that can be integrated: reals and complex numbers.
pub trait Integrand: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Composite rule over `panels` equal panels on `[a, b]`.
///
/// Returns the integral and the integral of the magnitude, the latter used
/// as the scale for convergence tests.
pub fn integrate_panels<T: Integrand>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    panels: usize,
) -> (T, f64) {
    let gl = rule();
    let width = (b - a) / panels as f64;
    let mut sum = T::zero();
    let mut scale = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        gl.for_each_on(lo, hi, |x, w| {
            let v = f(x);
            sum = sum + v * w;
            scale += v.magnitude() * w.abs();
        });
    }
    (sum, scale)
}

/// Integrates over `[a, b]`, doubling the panel count from `cfg.panel_count`
/// until successive estimates agree.
pub fn integrate_refined<T: Integrand>(
    op: &'static str,
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<T> {
    refine(op, cfg, cfg.panel_count, |panels| {
        integrate_panels(&f, a, b, panels)
    })
}

/// Runs `estimate(panels)` with doubling panel counts until converged.
pub(crate) fn refine<T: Integrand>(
    op: &'static str,
    cfg: &QuadratureConfig,
    base_panels: usize,
    mut estimate: impl FnMut(usize) -> (T, f64),
) -> Result<T> {
    let mut panels = base_panels.max(1);
    let (mut prev, _) = estimate(panels);
    let mut last_change = f64::INFINITY;
    let mut last_tol = 0.0;
    for _ in 0..cfg.refinement_levels {
        panels *= 2;
        let (next, scale) = estimate(panels);
        let change = (next + prev * -1.0).magnitude();
        let tol = cfg.rel_tol * scale;
        if change <= tol || change <= f64::MIN_POSITIVE {
            return Ok(next);
        }
        last_change = change;
        last_tol = tol;
        prev = next;
    }
    Err(Error::NonConvergence {
        op,
        estimate: prev.magnitude(),
        change: last_change,
        tolerance: last_tol,
        panels,
    })
}
