//! Subcommand implementations. Each returns the text of its primary output.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sepcore::generators::{CoreModel, CorePreset, Distribution, SeparablePreset};
use sepcore::montecarlo::{
    bbp_study, empirical_power, esd_diagnostic, simulate_null, size_from_result, splitmix64, statistics_from_data,
    t3_contrast_check, t3_limit_check, BbpRow, EsdDiagnostic, McConfig, Reference,
};
use sepcore::stats::{tw1_quantile, Calibration};
use sepcore::{FlipFlopConfig, RootKind, Shape, StatKind, TestReport};

use crate::config::{self, CoreSpec, DiagnoseConfig, NullDistConfig, PowerConfig};
use crate::data::{csv_text, fmt_f64, read_data};
use crate::error::{CliError, CliResult};
use crate::{Calib, TestArgs};

fn pretty<T: Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn warn(message: &str) {
    eprintln!("{}", serde_json::json!({ "warning": message }));
}

pub fn test(a: &TestArgs) -> CliResult<String> {
    let shape = Shape::new(a.p1, a.p2)?;
    if a.stat.is_empty() {
        return Err(CliError::input("no statistics requested"));
    }
    if a.calib == Calib::Asymptotic {
        if let Some(k) = a.stat.iter().find(|k| !k.has_asymptotic_reference()) {
            return Err(CliError::input(format!(
                "{k} has no asymptotic reference; use --calib mc (asymptotic calibration supports t1a and t1b)"
            )));
        }
    }
    let x = read_data(&a.data, shape, a.row_major)?;
    let cfg = McConfig {
        reps: a.reps,
        n: x.nrows(),
        shape,
        dist: a.dist,
        centered: a.center,
        alpha: a.alpha,
        master_seed: a.seed,
        root_kind: a.root,
        stats: a.stat.clone(),
        flip_flop: FlipFlopConfig::default(),
        nuisance: None,
    };
    cfg.validate()?;
    let obs = statistics_from_data(x, shape, a.center, &cfg.all_kinds(), a.root, &cfg.flip_flop, None)?;
    if !obs.converged {
        warn("flip-flop reached its iteration cap on the data");
    }
    let (calibration, critical): (Calibration, BTreeMap<StatKind, f64>) = match a.calib {
        Calib::Mc => {
            let null = simulate_null(&cfg)?;
            if null.nonconverged > 0 {
                warn(&format!("{} calibration replicates reached the iteration cap", null.nonconverged));
            }
            let q = cfg
                .stats
                .iter()
                .map(|k| Ok((*k, null.critical_value(*k)?)))
                .collect::<sepcore::Result<_>>()?;
            (
                Calibration::MonteCarlo {
                    reps: a.reps,
                    seed: a.seed,
                    dist: a.dist,
                },
                q,
            )
        }
        Calib::Asymptotic => {
            let q = tw1_quantile(1.0 - a.alpha)?.x;
            (Calibration::Asymptotic, cfg.stats.iter().map(|k| (*k, q)).collect())
        }
    };
    let reports: Vec<TestReport> = cfg
        .stats
        .iter()
        .map(|&k| {
            let q = critical[&k];
            TestReport {
                kind: k,
                raw: obs.values[&k.base()],
                transformed: k.is_transform().then(|| obs.values[&k]),
                n: cfg.n,
                shape,
                calibration: calibration.clone(),
                critical_value: q,
                reject: obs.values[&k] > q,
                alpha: a.alpha,
            }
        })
        .collect();
    pretty(&reports)
}

pub fn calibrate(path: &Path) -> CliResult<(String, Option<std::path::PathBuf>)> {
    let c: config::CalibrateConfig = config::load(path)?;
    if c.stats.is_empty() {
        return Err(CliError::input("no statistics requested"));
    }
    if c.cases.is_empty() {
        return Err(CliError::input("no cases given"));
    }
    let samp = c.sampling();
    let mut header = vec!["p1", "p2", "n"];
    header.extend(c.stats.iter().map(|k| k.name()));
    header.push("nonconverged");
    let mut rows = Vec::new();
    for case in &c.cases {
        let cfg = samp.mc_config(case, &c.stats)?;
        let r = simulate_null(&cfg)?;
        let mut row = vec![case.p1.to_string(), case.p2.to_string(), case.n.to_string()];
        for k in &c.stats {
            row.push(fmt_f64(r.critical_value(*k)?));
        }
        row.push(r.nonconverged.to_string());
        rows.push(row);
    }
    Ok((csv_text(&header, &rows)?, c.out))
}

fn base_core(spec: &CoreSpec, shape: Shape) -> CliResult<CoreModel> {
    match spec {
        CoreSpec::Preset { name, seed } => {
            let preset: CorePreset = name.parse()?;
            let c = preset.core(shape, &mut ChaCha8Rng::seed_from_u64(*seed))?;
            Ok(CoreModel::explicit(shape, c)?)
        }
        CoreSpec::PartialIsotropy {
            construction,
            rank,
            lambda,
            seed,
        } => Ok(CoreModel::partial_isotropy(
            shape,
            *rank,
            *lambda,
            *construction,
            &mut ChaCha8Rng::seed_from_u64(*seed),
        )?),
    }
}

pub fn power(path: &Path) -> CliResult<(String, Option<std::path::PathBuf>)> {
    let c: PowerConfig = config::load(path)?;
    if c.stats.is_empty() {
        return Err(CliError::input("no statistics requested"));
    }
    if c.cases.is_empty() || c.w.is_empty() {
        return Err(CliError::input("power needs at least one case and one weight"));
    }
    let samp = c.sampling();
    let header = [
        "stat", "w", "n", "p1", "p2", "gamma1_hat", "gamma2_hat", "power", "se", "reps", "nonconverged",
    ];
    let mut rows = Vec::new();
    for case in &c.cases {
        let shape = case.shape()?;
        // the likelihood ratio statistic is undefined when p > n
        let stats: Vec<StatKind> = c
            .stats
            .iter()
            .copied()
            .filter(|k| *k != StatKind::Lrt || case.n >= shape.p())
            .collect();
        if stats.is_empty() {
            continue;
        }
        let mut cal = samp.mc_config(case, &stats)?;
        cal.reps = c.calibration_reps.unwrap_or(c.reps);
        cal.validate()?;
        let null = simulate_null(&cal)?;
        let base = base_core(&c.core, shape)?;
        let sqrt_n = (case.n as f64).sqrt();
        for (i, &w) in c.w.iter().enumerate() {
            let model = CoreModel::shrunk(base.clone(), w)?;
            let mut cfg = cal.clone();
            cfg.reps = c.reps;
            cfg.master_seed = splitmix64(c.seed, 1 + i as u64);
            let pr = empirical_power(&model, &cfg, &null, &format!("w = {w}"))?;
            for k in &stats {
                rows.push(vec![
                    k.name().to_string(),
                    fmt_f64(w),
                    case.n.to_string(),
                    case.p1.to_string(),
                    case.p2.to_string(),
                    fmt_f64(case.p1 as f64 / sqrt_n),
                    fmt_f64(case.p2 as f64 / sqrt_n),
                    fmt_f64(pr.rates[k]),
                    fmt_f64(pr.standard_errors[k]),
                    pr.reps.to_string(),
                    pr.nonconverged.to_string(),
                ]);
            }
        }
    }
    Ok((csv_text(&header, &rows)?, c.out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub reference: Reference,
    pub threshold: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    pub variance: f64,
    pub critical_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<SizeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub n: usize,
    pub shape: Shape,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub dist: Distribution,
    pub centered: bool,
    pub root: RootKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nuisance: Option<SeparablePreset>,
    pub nonconverged: usize,
    pub statistics: BTreeMap<StatKind, StatSummary>,
}

/// Samples CSV and summary JSON of a null simulation.
pub fn null_dist(c: &NullDistConfig) -> CliResult<(String, String)> {
    let samp = c.sampling();
    let mut cfg = samp.mc_config(&c.case(), &c.stats)?;
    if let Some(nu) = &c.nuisance {
        cfg.nuisance = Some(nu.preset.factor(cfg.shape, &mut ChaCha8Rng::seed_from_u64(nu.seed))?);
        cfg.validate()?;
    }
    let r = simulate_null(&cfg)?;
    let mut statistics = BTreeMap::new();
    for &k in &c.stats {
        let v = &r.samples[&k];
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
        } else {
            0.0
        };
        let reference = c
            .references
            .get(&k)
            .copied()
            .or_else(|| k.has_asymptotic_reference().then_some(Reference::Tw1));
        let size = match reference {
            Some(reference) => Some(SizeSummary {
                reference,
                threshold: reference.critical_value(c.alpha)?,
                rate: size_from_result(&r, k, &reference)?,
            }),
            None => None,
        };
        statistics.insert(
            k,
            StatSummary {
                mean: m,
                variance: var,
                critical_value: r.critical_value(k)?,
                size,
            },
        );
    }
    let summary = NullSummary {
        n: c.n,
        shape: cfg.shape,
        reps: c.reps,
        alpha: c.alpha,
        seed: c.seed,
        dist: c.dist,
        centered: c.centered,
        root: c.root,
        nuisance: c.nuisance.as_ref().map(|s| s.preset),
        nonconverged: r.nonconverged,
        statistics,
    };
    Ok((r.samples_csv(), pretty(&summary)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbpBlock {
    pub construction: String,
    pub n: usize,
    pub shape: Shape,
    pub reps: usize,
    pub rows: Vec<BbpRow>,
    /// Largest `|mean - limit|` over all rows and spikes.
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub nuisance: SeparablePreset,
    pub mean_t3: f64,
    pub mean_contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T3Block {
    pub n: usize,
    pub shape: Shape,
    pub reps: usize,
    pub mean_t3: f64,
    /// First-order limit `p / n`.
    pub limit: f64,
    pub contrast: Vec<ContrastRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub esd: Option<EsdDiagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbp: Option<BbpBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t3: Option<T3Block>,
}

pub fn diagnose(c: &DiagnoseConfig) -> CliResult<String> {
    if c.esd.is_none() && c.bbp.is_none() && c.t3.is_none() {
        return Err(CliError::input("config has no [esd], [bbp] or [t3] block"));
    }
    let esd = match &c.esd {
        Some(s) => {
            let mut cfg = McConfig::new(s.n, Shape::new(s.p1, s.p2)?, &[StatKind::T1]);
            cfg.reps = s.reps;
            cfg.master_seed = s.seed;
            Some(esd_diagnostic(&cfg, s.bins)?)
        }
        None => None,
    };
    let bbp = match &c.bbp {
        Some(s) => {
            let shape = Shape::new(s.p1, s.p2)?;
            let rows = bbp_study(s.construction, &s.c, shape, s.n, s.reps, s.seed)?;
            let max_abs_error = rows
                .iter()
                .flat_map(|r| r.means.iter().zip(&r.limits).map(|(m, l)| (m - l).abs()))
                .fold(0.0, f64::max);
            Some(BbpBlock {
                construction: s.construction.to_string(),
                n: s.n,
                shape,
                reps: s.reps,
                rows,
                max_abs_error,
            })
        }
        None => None,
    };
    let t3 = match &c.t3 {
        Some(s) => {
            let shape = Shape::new(s.p1, s.p2)?;
            let mean_t3 = t3_limit_check(s.n, shape, s.reps, s.seed)?;
            let mut contrast = Vec::new();
            for (i, preset) in s.nuisance.iter().enumerate() {
                let k = preset.factor(shape, &mut ChaCha8Rng::seed_from_u64(splitmix64(s.seed, i as u64)))?;
                let (mt, mc) = t3_contrast_check(s.n, shape, Some(&k), s.reps, s.seed)?;
                contrast.push(ContrastRow {
                    nuisance: *preset,
                    mean_t3: mt,
                    mean_contrast: mc,
                });
            }
            Some(T3Block {
                n: s.n,
                shape,
                reps: s.reps,
                mean_t3,
                limit: shape.p() as f64 / s.n as f64,
                contrast,
            })
        }
        None => None,
    };
    pretty(&DiagnoseReport { esd, bbp, t3 })
}
