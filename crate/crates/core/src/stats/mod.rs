//! Separability test statistics computed from a sample core, their
//! transformed versions, and the random-matrix reference quantities used to
//! centre and scale them.

pub mod mp;
pub mod tw;

use std::cell::OnceCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::Distribution;
use crate::kcd::SeparableFactor;
use crate::matcore::{clamp_psd, log_det_spd, rearrange, singular_values, Shape, Spectrum, SymMatrix};

pub use mp::{bbp_limit, ks_distance, mp_cdf, mp_density, mp_edges, Cdf, EmpiricalCdf, MpLaw};
pub use tw::{tw1_cdf, tw1_quantile, Tw1Table, TwQuantile};

/// Statistic selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    /// Largest core eigenvalue.
    T1,
    /// `T1` centred at the deterministic edge `E+` and scaled by `gamma0 n^(2/3)`.
    T1a,
    /// `T1` centred at the data-dependent edge of `K~^{-1}`.
    T1b,
    /// `-sum log(u_i + 1) + p log p` over core eigenvalues `u_i`.
    T2,
    /// `T2` shifted by `p F^{p/n}(log(x + 1)) - p log p`.
    T2t,
    /// `||C||_F^2 / p - 1`.
    T3,
    /// `n T3 - p - 1`.
    T3t,
    /// Sum of singular values of the rearranged core over `sqrt(p)`, minus one.
    T3s,
    /// Likelihood ratio statistic `n (log|K| - log|S|)`.
    Lrt,
}

impl StatKind {
    pub const ALL: [StatKind; 9] = [
        StatKind::T1,
        StatKind::T1a,
        StatKind::T1b,
        StatKind::T2,
        StatKind::T2t,
        StatKind::T3,
        StatKind::T3t,
        StatKind::T3s,
        StatKind::Lrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatKind::T1 => "t1",
            StatKind::T1a => "t1a",
            StatKind::T1b => "t1b",
            StatKind::T2 => "t2",
            StatKind::T2t => "t2t",
            StatKind::T3 => "t3",
            StatKind::T3t => "t3t",
            StatKind::T3s => "t3s",
            StatKind::Lrt => "lrt",
        }
    }

    /// The untransformed statistic a kind is derived from.
    pub fn base(self) -> StatKind {
        match self {
            StatKind::T1a | StatKind::T1b => StatKind::T1,
            StatKind::T2t => StatKind::T2,
            StatKind::T3t => StatKind::T3,
            k => k,
        }
    }

    pub fn is_transform(self) -> bool {
        self.base() != self
    }

    /// Whether an asymptotic (Tracy-Widom) reference exists.
    pub fn has_asymptotic_reference(self) -> bool {
        matches!(self, StatKind::T1a | StatKind::T1b)
    }

    fn needs_eigenvalues(self) -> bool {
        matches!(
            self,
            StatKind::T1 | StatKind::T1a | StatKind::T1b | StatKind::T2 | StatKind::T2t
        )
    }
}

impl std::fmt::Display for StatKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StatKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        StatKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown statistic '{s}'")))
    }
}

/// Largest core eigenvalue.
pub fn t1(core_eigs: &Spectrum) -> f64 {
    core_eigs.largest()
}

/// `-sum_i log(u_i + 1) + p log p`.
pub fn t2(core_eigs: &Spectrum, p: usize) -> Result<f64> {
    if core_eigs.len() != p {
        return Err(crate::error::dim_mismatch(p, core_eigs.len()));
    }
    let mut u = core_eigs.values().to_vec();
    clamp_psd(&mut u)?;
    let pf = p as f64;
    Ok(-u.iter().map(|&x| x.ln_1p()).sum::<f64>() + pf * pf.ln())
}

/// `||C||_F^2 / p - 1`.
pub fn t3(c: &SymMatrix) -> f64 {
    c.frobenius_sq() / c.dim() as f64 - 1.0
}

/// `sum_{j >= 2} sigma_j^2 / sigma_1^2` over singular values of the rearranged
/// core; equal to [`t3`] on cores because `sigma_1^2 = p`.
pub fn t3_ratio_form(c: &SymMatrix, shape: Shape) -> Result<f64> {
    let sv = singular_values(&rearrange(c.as_matrix(), shape)?)?;
    let top = sv.largest();
    Ok(sv.values()[1..].iter().map(|s| s * s).sum::<f64>() / (top * top))
}

/// `sum_j sigma_j(R(C)) / sqrt(p) - 1`.
pub fn t3_singular_sum(c: &SymMatrix, shape: Shape) -> Result<f64> {
    let sv = singular_values(&rearrange(c.as_matrix(), shape)?)?;
    Ok(sv.sum() / (shape.p() as f64).sqrt() - 1.0)
}

/// `n (log|K2 ⊗ K1| - log|S|)`.
pub fn lrt(s: &SymMatrix, k: &SeparableFactor, n: usize) -> Result<f64> {
    let p = s.dim();
    if n < p {
        return Err(Error::SingularSample { n, p });
    }
    let log_s = log_det_spd(s).map_err(|_| Error::SingularSample { n, p })?;
    Ok(n as f64 * (k.log_det()? - log_s))
}

/// Centring and scaling constants for the largest eigenvalue of a sample
/// covariance with population spectrum `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeQuantities {
    pub gamma_hat: f64,
    pub xi_plus: f64,
    pub gamma0: f64,
    pub e_plus: f64,
}

/// `x -> mean_t (t x / (1 - t x))^2`, increasing on `[0, 1/max t)`.
pub fn edge_equation(eigs: &[f64], x: f64) -> f64 {
    eigs.iter()
        .map(|&t| {
            let r = t * x / (1.0 - t * x);
            r * r
        })
        .sum::<f64>()
        / eigs.len() as f64
}

fn edge_equation_derivative(eigs: &[f64], x: f64) -> f64 {
    eigs.iter()
        .map(|&t| {
            let d = 1.0 - t * x;
            2.0 * t * t * x / (d * d * d)
        })
        .sum::<f64>()
        / eigs.len() as f64
}

/// Root of `mean_t (t x / (1 - t x))^2 = 1 / gamma_hat` on `[0, 1/max t)`.
pub fn xi_plus(eigs: &[f64], gamma_hat: f64) -> Result<f64> {
    if eigs.is_empty() || eigs.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter("population eigenvalues must be positive".into()));
    }
    if !(gamma_hat > 0.0) {
        return Err(Error::InvalidParameter("gamma_hat must be positive".into()));
    }
    let target = 1.0 / gamma_hat;
    let tmax = eigs.iter().fold(0.0_f64, |a, &b| a.max(b));
    let (mut lo, mut hi) = (0.0_f64, 1.0 / tmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if edge_equation(eigs, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    // Newton polish inside the bracket.
    for _ in 0..5 {
        let f = edge_equation(eigs, x) - target;
        let d = edge_equation_derivative(eigs, x);
        let next = x - f / d;
        if !(next > lo && next < hi) || next == x {
            break;
        }
        x = next;
    }
    let residual = (edge_equation(eigs, x) - target).abs();
    if residual > 1e-12 * target.max(1.0) {
        return Err(Error::Convergence {
            routine: "edge equation",
            iterations: 200,
        });
    }
    Ok(x)
}

/// `xi_plus`, `gamma0` and `E+` for population eigenvalues `eigs` with
/// `gamma_hat = p / n`.
pub fn edge_quantities(eigs: &[f64], n: usize, p: usize) -> Result<EdgeQuantities> {
    let gamma_hat = p as f64 / n as f64;
    let xi = xi_plus(eigs, gamma_hat)?;
    let m = eigs.len() as f64;
    let cube = eigs
        .iter()
        .map(|&t| (t / (1.0 - t * xi)).powi(3))
        .sum::<f64>()
        / m;
    let inv_gamma0_cubed = gamma_hat * cube + 1.0 / xi.powi(3);
    let gamma0 = inv_gamma0_cubed.powf(-1.0 / 3.0);
    let mean_ratio = eigs.iter().map(|&t| t * xi / (1.0 - t * xi)).sum::<f64>() / m;
    let e_plus = (1.0 + gamma_hat * mean_ratio) / xi;
    Ok(EdgeQuantities {
        gamma_hat,
        xi_plus: xi,
        gamma0,
        e_plus,
    })
}

/// Edge quantities for an identity population covariance.
pub fn edge_identity(n: usize, p: usize) -> EdgeQuantities {
    edge_quantities(&[1.0], n, p).expect("identity spectrum is valid")
}

/// `(T1a, T1b)`: both use the scaling `gamma0` of the identity; `T1b` is
/// centred at `edge_hat.e_plus` when available.
pub fn t1_transforms(
    t1_val: f64,
    edge_i: &EdgeQuantities,
    edge_hat: Option<&EdgeQuantities>,
    n: usize,
) -> (f64, Option<f64>) {
    let scale = edge_i.gamma0 * (n as f64).powf(2.0 / 3.0);
    (
        scale * (t1_val - edge_i.e_plus),
        edge_hat.map(|e| scale * (t1_val - e.e_plus)),
    )
}

/// `a1(y) = (y + 2 - sqrt(y^2 + 4)) / (2 sqrt(y))`.
pub fn a1(y: f64) -> f64 {
    (y + 2.0 - (y * y + 4.0).sqrt()) / (2.0 * y.sqrt())
}

/// Closed form of `∫ log(x + 1) dF^y(x)` for the Marchenko-Pastur law `F^y`.
pub fn mp_log1p_mean(y: f64) -> f64 {
    let a = a1(y);
    let s = y.sqrt();
    let mut v = -0.5 * (2.0 * a / s - (y + 1.0) / y * (s / a).ln());
    if y < 1.0 {
        v -= 0.5 * ((1.0 - y) / y * (1.0 - a * s).ln() + (1.0 - y) / y * (s / a - y).ln());
    } else {
        v -= 0.5 * ((y - 1.0) / y * (1.0 - a / s).ln() + (y - 1.0) / y * (s / a - 1.0).ln());
    }
    v
}

/// `T2 + p F^{p/n}(log(x + 1)) - p log p`.
pub fn t2_transform(t2_val: f64, n: usize, p: usize) -> f64 {
    let pf = p as f64;
    t2_val + pf * mp_log1p_mean(pf / n as f64) - pf * pf.ln()
}

/// `n T3 - p - 1`.
pub fn t3_transform(t3_val: f64, n: usize, p: usize) -> f64 {
    n as f64 * t3_val - p as f64 - 1.0
}

/// Everything needed to evaluate statistics for one sample.
pub struct CoreSample<'a> {
    pub s: &'a SymMatrix,
    pub n: usize,
    pub shape: Shape,
    pub factor: &'a SeparableFactor,
    pub core: &'a SymMatrix,
    /// Separable component of the sample covariance with the nuisance
    /// separable factor removed; needed only for `T1b`.
    pub k_tilde: Option<&'a SeparableFactor>,
}

/// Evaluates statistics on one sample, computing the core spectrum at most once.
pub struct Evaluator<'a> {
    x: CoreSample<'a>,
    eigs: OnceCell<Result<Spectrum>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(x: CoreSample<'a>) -> Self {
        Evaluator {
            x,
            eigs: OnceCell::new(),
        }
    }

    fn eigs(&self) -> Result<&Spectrum> {
        self.eigs
            .get_or_init(|| self.x.core.eigenvalues())
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn value(&self, kind: StatKind) -> Result<f64> {
        let (n, p) = (self.x.n, self.x.shape.p());
        if kind.needs_eigenvalues() {
            let e = self.eigs()?;
            return match kind {
                StatKind::T1 => Ok(t1(e)),
                StatKind::T1a => Ok(t1_transforms(t1(e), &edge_identity(n, p), None, n).0),
                StatKind::T1b => {
                    let kt = self
                        .x
                        .k_tilde
                        .ok_or_else(|| Error::Unavailable("t1b (no separable reference supplied)".into()))?;
                    let inv: Vec<f64> = kt.eigenvalues()?.values().iter().map(|v| 1.0 / v).collect();
                    let hat = edge_quantities(&inv, n, p)?;
                    Ok(t1_transforms(t1(e), &edge_identity(n, p), Some(&hat), n)
                        .1
                        .expect("edge supplied"))
                }
                StatKind::T2 => t2(e, p),
                StatKind::T2t => Ok(t2_transform(t2(e, p)?, n, p)),
                _ => unreachable!(),
            };
        }
        match kind {
            StatKind::T3 => Ok(t3(self.x.core)),
            StatKind::T3t => Ok(t3_transform(t3(self.x.core), n, p)),
            StatKind::T3s => t3_singular_sum(self.x.core, self.x.shape),
            StatKind::Lrt => lrt(self.x.s, self.x.factor, n),
            _ => unreachable!(),
        }
    }
}

/// How a critical value was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibration {
    MonteCarlo { reps: usize, seed: u64, dist: Distribution },
    Asymptotic,
}

/// Outcome of one separability test.
///
/// For Monte Carlo calibration the decision compares the value of `kind`
/// itself (the transformed value for transform kinds) with the Monte Carlo
/// quantile of the same quantity; for asymptotic calibration it compares the
/// transformed value with the Tracy-Widom quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: StatKind,
    /// Value of the untransformed base statistic.
    pub raw: f64,
    /// Value of the transformed statistic, for transform kinds.
    pub transformed: Option<f64>,
    pub n: usize,
    pub shape: Shape,
    pub calibration: Calibration,
    pub critical_value: f64,
    pub reject: bool,
    pub alpha: f64,
}

impl TestReport {
    pub fn decision_value(&self) -> f64 {
        self.transformed.unwrap_or(self.raw)
    }
}

/// Evaluates each requested kind and its base statistic.
pub fn evaluate(kinds: &[StatKind], x: CoreSample<'_>) -> BTreeMap<StatKind, Result<f64>> {
    let ev = Evaluator::new(x);
    let mut out = BTreeMap::new();
    for &k in kinds {
        out.entry(k).or_insert_with(|| ev.value(k));
        out.entry(k.base()).or_insert_with(|| ev.value(k.base()));
    }
    out
}
