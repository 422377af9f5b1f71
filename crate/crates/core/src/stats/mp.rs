//! Marchenko-Pastur law, the spiked-eigenvalue (BBP) limit and the
//! Kolmogorov-Smirnov distance between an empirical spectrum and a reference.

use std::f64::consts::PI;

/// Support edges `sigma2 (1 ± sqrt(gamma))^2`.
pub fn mp_edges(gamma: f64, sigma2: f64) -> (f64, f64) {
    let r = gamma.sqrt();
    (sigma2 * (1.0 - r).powi(2), sigma2 * (1.0 + r).powi(2))
}

/// Mass of the point at zero, `1 - 1/gamma` when `gamma > 1`.
pub fn mp_atom(gamma: f64) -> f64 {
    if gamma > 1.0 {
        1.0 - 1.0 / gamma
    } else {
        0.0
    }
}

/// Density of the absolutely continuous part.
pub fn mp_density(x: f64, gamma: f64, sigma2: f64) -> f64 {
    let (lo, hi) = mp_edges(gamma, sigma2);
    if x <= lo || x >= hi || x <= 0.0 {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * PI * sigma2 * gamma * x)
}

/// Density in the angle variable `x = lo + (hi - lo)(1 - cos t)/2`, which
/// removes the square-root behaviour at both edges.
fn angular_density(t: f64, lo: f64, hi: f64, gamma: f64, sigma2: f64) -> f64 {
    let w = hi - lo;
    let x = lo + 0.5 * w * (1.0 - t.cos());
    let s = t.sin();
    if x <= 0.0 {
        // gamma = 1: sin^2 t / (1 - cos t) -> 2 as t -> 0
        return w / (2.0 * PI * sigma2 * gamma);
    }
    0.25 * w * w * s * s / (2.0 * PI * sigma2 * gamma * x)
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let h = b - a;
    let left = h / 12.0 * (fa + 4.0 * flm + fm);
    let right = h / 12.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 48)
}

const QUAD_TOL: f64 = 1e-10;

/// Mass of the continuous part on `(-inf, x]`.
fn continuous_mass(x: f64, gamma: f64, sigma2: f64) -> f64 {
    let (lo, hi) = mp_edges(gamma, sigma2);
    if x <= lo {
        return 0.0;
    }
    let total = 1.0 - mp_atom(gamma);
    if x >= hi {
        return total;
    }
    let theta = (1.0 - 2.0 * (x - lo) / (hi - lo)).clamp(-1.0, 1.0).acos();
    let f = |t: f64| angular_density(t, lo, hi, gamma, sigma2);
    // Integrate the shorter side for accuracy near the upper edge.
    if theta <= 0.5 * PI {
        adaptive_simpson(f, 0.0, theta, QUAD_TOL).min(total)
    } else {
        (total - adaptive_simpson(f, theta, PI, QUAD_TOL)).max(0.0)
    }
}

/// CDF of the Marchenko-Pastur law with ratio `gamma` and scale `sigma2`,
/// including the atom at zero when `gamma > 1`.
pub fn mp_cdf(x: f64, gamma: f64, sigma2: f64) -> f64 {
    let atom = if x >= 0.0 { mp_atom(gamma) } else { 0.0 };
    (atom + continuous_mass(x, gamma, sigma2)).min(1.0)
}

/// CDF of the continuous part renormalized to total mass one.
pub fn mp_continuous_cdf(x: f64, gamma: f64, sigma2: f64) -> f64 {
    continuous_mass(x, gamma, sigma2) / (1.0 - mp_atom(gamma))
}

/// Almost-sure limit of a sample eigenvalue whose population value is
/// `sigma2 * a` against a bulk of level `sigma2`: `sigma2 (a + gamma a/(a - 1))`
/// above the threshold `a > 1 + sqrt(gamma)`, the bulk edge `sigma2 (1 + sqrt(gamma))^2`
/// otherwise.
pub fn bbp_limit(a: f64, gamma: f64, sigma2: f64) -> f64 {
    if a > 1.0 + gamma.sqrt() {
        sigma2 * (a + gamma * a / (a - 1.0))
    } else {
        sigma2 * (1.0 + gamma.sqrt()).powi(2)
    }
}

/// A distribution function that may have jumps.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;
    /// Left limit `F(x-)`; equal to `cdf` for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
    /// Jump locations, empty for continuous laws.
    fn jumps(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Wraps a continuous CDF given as a closure.
pub struct Continuous<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> Cdf for Continuous<F> {
    fn cdf(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// Marchenko-Pastur reference. With `continuous_only` the atom at zero is
/// dropped and the rest renormalized.
#[derive(Debug, Clone, Copy)]
pub struct MpLaw {
    pub gamma: f64,
    pub sigma2: f64,
    pub continuous_only: bool,
}

impl Cdf for MpLaw {
    fn cdf(&self, x: f64) -> f64 {
        if self.continuous_only {
            mp_continuous_cdf(x, self.gamma, self.sigma2)
        } else {
            mp_cdf(x, self.gamma, self.sigma2)
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        if x == 0.0 && !self.continuous_only {
            0.0
        } else {
            self.cdf(x)
        }
    }

    fn jumps(&self) -> Vec<f64> {
        if self.gamma > 1.0 && !self.continuous_only {
            vec![0.0]
        } else {
            Vec::new()
        }
    }
}

/// Empirical distribution of a sample.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        EmpiricalCdf { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

impl Cdf for EmpiricalCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v < x) as f64 / self.sorted.len() as f64
    }

    fn jumps(&self) -> Vec<f64> {
        let mut j = self.sorted.clone();
        j.dedup();
        j
    }
}

/// `sup_x |F(x) - G(x)|` between the empirical law of `sample` and `reference`.
/// Both functions are right-continuous step or continuous functions, so the
/// supremum is attained at, or just before, a jump of either.
pub fn ks_distance<R: Cdf + ?Sized>(sample: &[f64], reference: &R) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    let emp = EmpiricalCdf::new(sample);
    let mut points = emp.jumps();
    points.extend(reference.jumps());
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
        .iter()
        .map(|&x| {
            let at = (emp.cdf(x) - reference.cdf(x)).abs();
            let before = (emp.cdf_left(x) - reference.cdf_left(x)).abs();
            at.max(before)
        })
        .fold(0.0, f64::max)
}
