//! Monte Carlo calibration, empirical size and power, and the simulation
//! studies (BBP spikes, spectral distribution, first-order limit of `T3`).
//!
//! Replicate `j` draws its data from a `ChaCha8Rng` seeded with
//! `splitmix64(master_seed, j)`, so results do not depend on how rayon
//! schedules the replicates. Results are reduced in replicate order.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{covariance_of, make_rank_r_core, partial_isotropy_core, predicted_spikes, Construction, CoreModel, Distribution};
use crate::kcd::{check_sample_size, core_matrix, kronecker_mle, FlipFlopConfig, RootKind, SeparableFactor};
use crate::matcore::{apply_kron, cholesky, rearrange, singular_values, RectMatrix, Shape, SymMatrix};
use crate::stats::{bbp_limit, evaluate, ks_distance, t3, tw1_quantile, CoreSample, MpLaw, StatKind};

/// Default replicate count.
pub const DEFAULT_REPS: usize = 1000;

/// Seed of replicate `j`.
pub fn splitmix64(master: u64, j: u64) -> u64 {
    let mut z = master.wrapping_add(j.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Index (0-based) of the `ceil((1 - alpha) J)`-th order statistic.
pub fn quantile_index(reps: usize, alpha: f64) -> usize {
    let k = ((1.0 - alpha) * reps as f64 - 1e-9).ceil() as usize;
    k.clamp(1, reps) - 1
}

/// Upper `alpha` critical value of `samples`.
pub fn critical_value(samples: &[f64], alpha: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s[quantile_index(s.len(), alpha)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Replicate count `J` (or `K` for power).
    pub reps: usize,
    pub n: usize,
    pub shape: Shape,
    pub dist: Distribution,
    /// Centre the data before forming the sample covariance.
    #[serde(default)]
    pub centered: bool,
    pub alpha: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub root_kind: RootKind,
    pub stats: Vec<StatKind>,
    #[serde(default)]
    pub flip_flop: FlipFlopConfig,
    /// Separable nuisance `K`; data are premultiplied by its root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nuisance: Option<SeparableFactor>,
}

impl McConfig {
    pub fn new(n: usize, shape: Shape, stats: &[StatKind]) -> Self {
        McConfig {
            reps: DEFAULT_REPS,
            n,
            shape,
            dist: Distribution::Gaussian,
            centered: false,
            alpha: 0.05,
            master_seed: 0,
            root_kind: RootKind::default(),
            stats: stats.to_vec(),
            flip_flop: FlipFlopConfig::default(),
            nuisance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidParameter("replicate count must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.stats.is_empty() {
            return Err(Error::InvalidParameter("no statistics requested".into()));
        }
        self.dist.validate()?;
        check_sample_size(self.n, self.shape)?;
        if self.centered && self.n < 2 {
            return Err(Error::InvalidParameter("centring needs n >= 2".into()));
        }
        if self.stats.contains(&StatKind::Lrt) && self.n < self.shape.p() {
            return Err(Error::IncompatibleParameters(format!(
                "lrt needs n >= p, got n = {} and p = {}",
                self.n,
                self.shape.p()
            )));
        }
        if let Some(k) = &self.nuisance {
            if k.shape() != self.shape {
                return Err(Error::ConfigMismatch("nuisance shape differs from the study shape".into()));
            }
        }
        Ok(())
    }

    /// Requested kinds plus their base statistics, in canonical order.
    pub fn all_kinds(&self) -> Vec<StatKind> {
        let mut v: Vec<StatKind> = self.stats.iter().flat_map(|k| [*k, k.base()]).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Statistics of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStatistics {
    pub values: BTreeMap<StatKind, f64>,
    pub converged: bool,
}

/// Evaluates `kinds` for the `n x p` data matrix `x` (rows `vec(Y_i)`).
///
/// With a nuisance `K`, the reference `K~` for `T1b` is the estimate whitened
/// by the known roots of `K`, so that `T1b` is computed as if `K = I`.
pub fn statistics_from_data(
    x: RectMatrix,
    shape: Shape,
    centered: bool,
    kinds: &[StatKind],
    root_kind: RootKind,
    cfg: &FlipFlopConfig,
    nuisance: Option<&SeparableFactor>,
) -> Result<SampleStatistics> {
    let n = x.nrows();
    let s = covariance_of(x, centered)?;
    statistics_from_covariance(&s, n, shape, kinds, root_kind, cfg, nuisance)
}

/// As [`statistics_from_data`], from a sample covariance built from `n` rows.
pub fn statistics_from_covariance(
    s: &SymMatrix,
    n: usize,
    shape: Shape,
    kinds: &[StatKind],
    root_kind: RootKind,
    cfg: &FlipFlopConfig,
    nuisance: Option<&SeparableFactor>,
) -> Result<SampleStatistics> {
    let fit = kronecker_mle(s, n, shape, cfg)?;
    let c = core_matrix(s, &fit.factor, root_kind)?;
    let k_tilde = match nuisance {
        Some(k) => {
            let (g1, g2) = k.inverse_roots(root_kind)?;
            Some(fit.factor.transform(&g1, &g2)?)
        }
        None => None,
    };
    let sample = CoreSample {
        s,
        n,
        shape,
        factor: &fit.factor,
        core: &c,
        k_tilde: Some(k_tilde.as_ref().unwrap_or(&fit.factor)),
    };
    let mut values = BTreeMap::new();
    for (k, v) in evaluate(kinds, sample) {
        values.insert(k, v?);
    }
    Ok(SampleStatistics {
        values,
        converged: fit.converged,
    })
}

/// Draws replicate `j`: `X = Z root^T`, premultiplied by the nuisance root.
fn draw(cfg: &McConfig, root: Option<&RectMatrix>, j: usize) -> Result<RectMatrix> {
    let p = cfg.shape.p();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.master_seed, j as u64));
    let mut z = DMatrix::zeros(cfg.n, p);
    cfg.dist.fill(z.as_mut_slice(), &mut rng)?;
    let mut x = match root {
        Some(r) => z * r.transpose(),
        None => z,
    };
    if let Some(k) = &cfg.nuisance {
        let (h1, h2) = k.roots(cfg.root_kind)?;
        x = apply_kron(&h1, &h2, &x.transpose())?.transpose();
    }
    Ok(x)
}

fn run_replicates(cfg: &McConfig, root: Option<&RectMatrix>) -> Result<(Vec<BTreeMap<StatKind, f64>>, usize)> {
    cfg.validate()?;
    if let Some(r) = root {
        if r.nrows() != cfg.shape.p() || r.ncols() != cfg.shape.p() {
            return Err(crate::error::dim_mismatch(cfg.shape.p(), r.nrows()));
        }
    }
    let kinds = cfg.all_kinds();
    let results: Vec<Result<SampleStatistics>> = (0..cfg.reps)
        .into_par_iter()
        .map(|j| {
            let x = draw(cfg, root, j)?;
            statistics_from_data(x, cfg.shape, cfg.centered, &kinds, cfg.root_kind, &cfg.flip_flop, cfg.nuisance.as_ref())
        })
        .collect();
    let mut out = Vec::with_capacity(cfg.reps);
    let mut nonconverged = 0;
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                nonconverged += usize::from(!s.converged);
                out.push(s.values);
            }
            Err(e) => {
                return Err(Error::ReplicateFailed {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok((out, nonconverged))
}

fn transpose_samples(rows: Vec<BTreeMap<StatKind, f64>>, kinds: &[StatKind]) -> BTreeMap<StatKind, Vec<f64>> {
    kinds
        .iter()
        .map(|k| (*k, rows.iter().map(|r| r[k]).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub config: McConfig,
    /// Per-statistic values in replicate order, for every requested kind and
    /// its base statistic.
    pub samples: BTreeMap<StatKind, Vec<f64>>,
    pub critical_values: BTreeMap<StatKind, f64>,
    /// Replicates whose flip-flop hit the iteration cap.
    pub nonconverged: usize,
    pub wall_seconds: f64,
}

impl McResult {
    pub fn critical_value(&self, kind: StatKind) -> Result<f64> {
        self.critical_values
            .get(&kind)
            .copied()
            .ok_or_else(|| Error::Unavailable(format!("no critical value for {kind}")))
    }

    /// Wide CSV: one column per statistic, one row per replicate.
    pub fn samples_csv(&self) -> String {
        let kinds: Vec<&StatKind> = self.samples.keys().collect();
        let mut out = String::from("replicate");
        for k in &kinds {
            out.push(',');
            out.push_str(k.name());
        }
        out.push('\n');
        for j in 0..self.config.reps {
            out.push_str(&j.to_string());
            for k in &kinds {
                out.push_str(&format!(",{:.16e}", self.samples[*k][j]));
            }
            out.push('\n');
        }
        out
    }
}

/// Null calibration with `Σ = I` (or the nuisance `K`, if set).
pub fn simulate_null(cfg: &McConfig) -> Result<McResult> {
    let start = Instant::now();
    let (rows, nonconverged) = run_replicates(cfg, None)?;
    let samples = transpose_samples(rows, &cfg.all_kinds());
    let critical_values = samples
        .iter()
        .map(|(k, v)| (*k, critical_value(v, cfg.alpha)))
        .collect();
    Ok(McResult {
        config: cfg.clone(),
        samples,
        critical_values,
        nonconverged,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Threshold a statistic is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// Upper quantile of the Tracy-Widom law of order one.
    Tw1,
    /// Upper quantile of a normal law.
    Normal { mean: f64, var: f64 },
    /// A fixed critical value.
    MonteCarlo { critical_value: f64 },
}

impl Reference {
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        match *self {
            Reference::Tw1 => Ok(tw1_quantile(1.0 - alpha)?.x),
            Reference::Normal { mean, var } => {
                let z = statrs::distribution::Normal::new(mean, var.sqrt())
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                Ok(statrs::distribution::ContinuousCDF::inverse_cdf(&z, 1.0 - alpha))
            }
            Reference::MonteCarlo { critical_value } => Ok(critical_value),
        }
    }
}

/// Fraction of `samples` strictly above `threshold`.
pub fn exceedance_rate(samples: &[f64], threshold: f64) -> f64 {
    samples.iter().filter(|&&v| v > threshold).count() as f64 / samples.len() as f64
}

/// Empirical size of `kind` against `reference` over fresh null replicates.
pub fn empirical_size(cfg: &McConfig, kind: StatKind, reference: &Reference) -> Result<f64> {
    let mut c = cfg.clone();
    c.stats = vec![kind];
    let null = simulate_null(&c)?;
    size_from_result(&null, kind, reference)
}

/// Empirical size from already simulated null samples.
pub fn size_from_result(null: &McResult, kind: StatKind, reference: &Reference) -> Result<f64> {
    let samples = null
        .samples
        .get(&kind)
        .ok_or_else(|| Error::Unavailable(format!("{kind} was not simulated")))?;
    Ok(exceedance_rate(samples, reference.critical_value(null.config.alpha)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub label: String,
    pub reps: usize,
    pub rates: BTreeMap<StatKind, f64>,
    pub standard_errors: BTreeMap<StatKind, f64>,
    pub nonconverged: usize,
}

fn check_calibration(cfg: &McConfig, cal: &McConfig) -> Result<()> {
    let mut diffs = Vec::new();
    if cfg.n != cal.n {
        diffs.push(format!("n {} vs {}", cfg.n, cal.n));
    }
    if cfg.shape != cal.shape {
        diffs.push("shape".to_string());
    }
    if cfg.dist != cal.dist {
        diffs.push(format!("distribution {} vs {}", cfg.dist, cal.dist));
    }
    if cfg.centered != cal.centered {
        diffs.push("centering".to_string());
    }
    if cfg.alpha != cal.alpha {
        diffs.push(format!("alpha {} vs {}", cfg.alpha, cal.alpha));
    }
    if let Some(k) = cfg.stats.iter().find(|k| !cal.stats.contains(k)) {
        diffs.push(format!("{k} not calibrated"));
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(Error::ConfigMismatch(diffs.join(", ")))
    }
}

/// Rejection rates for data drawn with population core `core`, each
/// statistic compared with its critical value from `calibration`.
pub fn empirical_power(core: &CoreModel, cfg: &McConfig, calibration: &McResult, label: &str) -> Result<PowerResult> {
    check_calibration(cfg, &calibration.config)?;
    if core.shape != cfg.shape {
        return Err(Error::ConfigMismatch("core shape differs from the study shape".into()));
    }
    let root = core.root()?;
    let (rows, nonconverged) = run_replicates(cfg, Some(&root))?;
    let samples = transpose_samples(rows, &cfg.all_kinds());
    let mut rates = BTreeMap::new();
    let mut standard_errors = BTreeMap::new();
    for k in &cfg.stats {
        let r = exceedance_rate(&samples[k], calibration.critical_value(*k)?);
        rates.insert(*k, r);
        standard_errors.insert(*k, (r * (1.0 - r) / cfg.reps as f64).sqrt());
    }
    Ok(PowerResult {
        label: label.to_string(),
        reps: cfg.reps,
        rates,
        standard_errors,
        nonconverged,
    })
}

/// CSV table of power results: `label,stat,rate,se`.
pub fn power_csv(results: &[PowerResult]) -> String {
    let mut out = String::from("label,stat,rate,se,reps\n");
    for r in results {
        for (k, v) in &r.rates {
            out.push_str(&format!("{},{},{:.16e},{:.16e},{}\n", r.label, k, v, r.standard_errors[k], r.reps));
        }
    }
    out
}

/// One row of a BBP study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbpRow {
    pub c: f64,
    pub lambda: f64,
    /// Population spikes of the core.
    pub spikes: Vec<f64>,
    /// Almost-sure limits of the top sample core eigenvalues.
    pub limits: Vec<f64>,
    /// Means of the top sample core eigenvalues over the replicates.
    pub means: Vec<f64>,
}

/// Rank of the partial-isotropy core each construction produces.
pub fn construction_rank(construction: Construction, p1: usize, p2: usize) -> usize {
    match construction {
        Construction::Square2 | Construction::Ladder2 => 2,
        Construction::OrthoBlock => p1.max(p2) / p1.min(p2),
    }
}

/// Top core eigenvalues under rank-`r` alternatives with
/// `λ = 1 / (1 + r c / p)`, compared with their BBP limits.
pub fn bbp_study(
    construction: Construction,
    c_values: &[f64],
    shape: Shape,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<BbpRow>> {
    let (p1, p2) = (shape.p1, shape.p2);
    let r = construction_rank(construction, p1, p2);
    let p = shape.p() as f64;
    let gamma = p / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = make_rank_r_core(p1, p2, r, construction, &mut rng)?;
    let mut rows = Vec::new();
    for (ci, &c) in c_values.iter().enumerate() {
        if !(c >= 0.0) {
            return Err(Error::InvalidParameter(format!("c must be nonnegative, got {c}")));
        }
        let lambda = 1.0 / (1.0 + r as f64 * c / p);
        let spikes: Vec<f64> = predicted_spikes(&a, lambda, construction)?.values()[..r].to_vec();
        let limits = spikes.iter().map(|s| bbp_limit(s / lambda, gamma, lambda)).collect();
        let core = CoreModel::explicit(shape, partial_isotropy_core(&a, lambda)?)?;
        let mut cfg = McConfig::new(n, shape, &[StatKind::T1]);
        cfg.reps = reps;
        cfg.master_seed = splitmix64(seed, 1_000_000 + ci as u64);
        let tops = top_core_eigenvalues(&core, &cfg, r)?;
        let means = (0..r)
            .map(|i| tops.iter().map(|t| t[i]).sum::<f64>() / reps as f64)
            .collect();
        rows.push(BbpRow {
            c,
            lambda,
            spikes,
            limits,
            means,
        });
    }
    Ok(rows)
}

fn sample_cores(core: Option<&CoreModel>, cfg: &McConfig) -> Result<Vec<SymMatrix>> {
    cfg.validate()?;
    let root = core.map(|c| c.root()).transpose()?;
    let results: Vec<Result<SymMatrix>> = (0..cfg.reps)
        .into_par_iter()
        .map(|j| {
            let x = draw(cfg, root.as_ref(), j)?;
            let s = covariance_of(x, cfg.centered)?;
            let fit = kronecker_mle(&s, cfg.n, cfg.shape, &cfg.flip_flop)?;
            core_matrix(&s, &fit.factor, cfg.root_kind)
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| Error::ReplicateFailed { index, source: Box::new(e) }))
        .collect()
}

fn top_core_eigenvalues(core: &CoreModel, cfg: &McConfig, r: usize) -> Result<Vec<Vec<f64>>> {
    sample_cores(Some(core), cfg)?
        .iter()
        .map(|c| Ok(c.eigenvalues()?.values()[..r].to_vec()))
        .collect()
}

/// Pooled spectral distribution of the sample core against the
/// Marchenko-Pastur law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsdDiagnostic {
    pub gamma: f64,
    pub ks: f64,
    /// Eigenvalues kept per replicate (`min(n, p)`).
    pub retained_per_replicate: usize,
    /// `(left edge, right edge, density)` bins of the pooled eigenvalues.
    pub histogram: Vec<(f64, f64, f64)>,
}

/// KS distance between the pooled spectrum of the sample cores and
/// `MP(p/n, 1)`. When `p > n` the `p - n` zero eigenvalues of each replicate
/// are dropped and compared with the continuous part of the law.
pub fn esd_diagnostic(cfg: &McConfig, bins: usize) -> Result<EsdDiagnostic> {
    let p = cfg.shape.p();
    let gamma = p as f64 / cfg.n as f64;
    let keep = p.min(cfg.n);
    let mut pooled = Vec::with_capacity(keep * cfg.reps);
    for c in sample_cores(None, cfg)? {
        pooled.extend_from_slice(&c.eigenvalues()?.values()[..keep]);
    }
    let law = MpLaw {
        gamma,
        sigma2: 1.0,
        continuous_only: gamma > 1.0,
    };
    let ks = ks_distance(&pooled, &law);
    let hi = pooled.iter().cloned().fold(0.0, f64::max);
    let lo = pooled.iter().cloned().fold(f64::INFINITY, f64::min).min(hi);
    let bins = bins.max(1);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0usize; bins];
    for v in &pooled {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = pooled.len() as f64;
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(i, &k)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, k as f64 / (total * width)))
        .collect();
    Ok(EsdDiagnostic {
        gamma,
        ks,
        retained_per_replicate: keep,
        histogram,
    })
}

/// `||S||_F^2 / sigma_1(R(S))^2 - 1`, a non-invariant analogue of `T3`.
pub fn t3_contrast(s: &SymMatrix, shape: Shape) -> Result<f64> {
    let top = singular_values(&rearrange(s.as_matrix(), shape)?)?.largest();
    Ok(s.frobenius_sq() / (top * top) - 1.0)
}

/// Mean of `T3` over Gaussian null replicates with `Σ = I`.
pub fn t3_limit_check(n: usize, shape: Shape, reps: usize, seed: u64) -> Result<f64> {
    let (t3_mean, _) = t3_contrast_check(n, shape, None, reps, seed)?;
    Ok(t3_mean)
}

/// Means of `T3` and of [`t3_contrast`] over Gaussian replicates with a
/// separable population covariance `K` (identity if absent).
pub fn t3_contrast_check(
    n: usize,
    shape: Shape,
    k: Option<&SeparableFactor>,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut cfg = McConfig::new(n, shape, &[StatKind::T3]);
    cfg.reps = reps;
    cfg.master_seed = seed;
    cfg.validate()?;
    let root = k.map(|k| cholesky(&k.kron())).transpose()?;
    let vals: Vec<Result<(f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|j| {
            let x = draw(&cfg, root.as_ref(), j)?;
            let s = covariance_of(x, false)?;
            let fit = kronecker_mle(&s, n, shape, &cfg.flip_flop)?;
            let c = core_matrix(&s, &fit.factor, cfg.root_kind)?;
            Ok((t3(&c), t3_contrast(&s, shape)?))
        })
        .collect();
    let mut a = 0.0;
    let mut b = 0.0;
    for (index, v) in vals.into_iter().enumerate() {
        let (x, y) = v.map_err(|e| Error::ReplicateFailed { index, source: Box::new(e) })?;
        a += x;
        b += y;
    }
    Ok((a / reps as f64, b / reps as f64))
}
