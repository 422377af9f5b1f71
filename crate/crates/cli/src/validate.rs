//! Cross-module invariant suite behind `sepcore validate`.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sepcore::generators::Distribution;
use sepcore::kcd::{counterexample_core, counterexample_covariance, kcd, kronecker_mle};
use sepcore::matcore::{kron, numerical_rank, partial_trace_1, partial_trace_2, rearrange, rearrange_inverse, singular_values};
use sepcore::montecarlo::statistics_from_data;
use sepcore::stats::Tw1Table;
use sepcore::{FlipFlopConfig, RootKind, SeparableFactor, Shape, StatKind, SymMatrix};

type Check = Result<String, String>;

pub struct Outcome {
    pub name: &'static str,
    pub result: Check,
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    Distribution::Gaussian
        .fill(m.as_mut_slice(), rng)
        .expect("gaussian parameters are valid");
    m
}

fn spd(dim: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let a = gaussian(dim, dim, rng);
    SymMatrix::from_matrix(&a * a.transpose() + DMatrix::identity(dim, dim)).expect("square")
}

fn sample_cov(n: usize, p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let x = gaussian(n, p, rng);
    SymMatrix::from_matrix(x.transpose() * &x / n as f64).expect("square")
}

fn s<E: ToString>(e: E) -> String {
    e.to_string()
}

fn within(name: &str, err: f64, tol: f64) -> Check {
    if err <= tol {
        Ok(format!("{name} {err:.2e} <= {tol:.0e}"))
    } else {
        Err(format!("{name} {err:.2e} > {tol:.0e}"))
    }
}

const SHAPES: [(usize, usize); 3] = [(2, 3), (4, 4), (5, 2)];

fn partial_traces() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for (p1, p2) in SHAPES {
        let shape = Shape::new(p1, p2).map_err(s)?;
        let (a, b) = (spd(p1, &mut rng), spd(p2, &mut rng));
        let m = SymMatrix::from_matrix(kron(b.as_matrix(), a.as_matrix())).map_err(s)?;
        let t1 = partial_trace_1(&m, shape).map_err(s)?;
        let t2 = partial_trace_2(&m, shape).map_err(s)?;
        worst = worst.max((t1.as_matrix() - a.as_matrix() * b.trace()).amax());
        worst = worst.max((t2.as_matrix() - b.as_matrix() * a.trace()).amax());
        let cov = sample_cov(p1 * p2 + 3, p1 * p2, &mut rng);
        let c = kcd(&cov, p1 * p2 + 3, shape, RootKind::Cholesky, &FlipFlopConfig::default())
            .map_err(s)?
            .c;
        let c1 = partial_trace_1(&c, shape).map_err(s)?;
        let c2 = partial_trace_2(&c, shape).map_err(s)?;
        worst = worst.max((c1.as_matrix() - DMatrix::identity(p1, p1) * p2 as f64).amax());
        worst = worst.max((c2.as_matrix() - DMatrix::identity(p2, p2) * p1 as f64).amax());
    }
    within("max deviation", worst, 1e-6)
}

fn rearrangement() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (p1, p2) in SHAPES {
        let shape = Shape::new(p1, p2).map_err(s)?;
        let m = gaussian(p1 * p2, p1 * p2, &mut rng);
        let r = rearrange(&m, shape).map_err(s)?;
        if rearrange_inverse(&r, shape).map_err(s)? != m {
            return Err(format!("round trip not exact at ({p1}, {p2})"));
        }
        let mut a: Vec<f64> = m.iter().copied().collect();
        let mut b: Vec<f64> = r.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        if a != b {
            return Err(format!("not a permutation of entries at ({p1}, {p2})"));
        }
        let k = kron(spd(p2, &mut rng).as_matrix(), spd(p1, &mut rng).as_matrix());
        let rank = numerical_rank(&rearrange(&k, shape).map_err(s)?).map_err(s)?;
        if rank != 1 {
            return Err(format!("rearranged Kronecker product has rank {rank}"));
        }
    }
    Ok("exact permutation, Kronecker products map to rank one".into())
}

fn equivariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = FlipFlopConfig::default();
    let mut worst = 0.0f64;
    for (p1, p2) in SHAPES {
        let shape = Shape::new(p1, p2).map_err(s)?;
        let n = p1 * p2 + 2;
        let cov = sample_cov(n, p1 * p2, &mut rng);
        let k = kronecker_mle(&cov, n, shape, &cfg).map_err(s)?.factor.kron();
        let g1 = gaussian(p1, p1, &mut rng) + DMatrix::identity(p1, p1) * 3.0;
        let g2 = gaussian(p2, p2, &mut rng) + DMatrix::identity(p2, p2) * 3.0;
        let g = kron(&g2, &g1);
        let moved = SymMatrix::from_matrix(&g * cov.as_matrix() * g.transpose()).map_err(s)?;
        let kg = kronecker_mle(&moved, n, shape, &cfg).map_err(s)?.factor.kron();
        let expected = &g * k.as_matrix() * g.transpose();
        worst = worst.max((kg.as_matrix() - &expected).amax() / expected.amax());
    }
    within("max relative deviation", worst, 1e-7)
}

fn invariance() -> Check {
    let shape = Shape::new(3, 3).map_err(s)?;
    let n = 30;
    let cfg = FlipFlopConfig::default();
    let mut worst = 0.0f64;
    for pair in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(140 + pair);
        let k = SeparableFactor::new(spd(3, &mut rng), spd(3, &mut rng)).map_err(s)?;
        let z = gaussian(n, shape.p(), &mut rng);
        for root in [RootKind::Cholesky, RootKind::Symmetric] {
            let base = statistics_from_data(z.clone(), shape, false, &StatKind::ALL, root, &cfg, None).map_err(s)?;
            let (h1, h2) = k.roots(root).map_err(s)?;
            let x = &z * kron(&h2, &h1).transpose();
            let moved = statistics_from_data(x, shape, false, &StatKind::ALL, root, &cfg, Some(&k)).map_err(s)?;
            for kind in StatKind::ALL {
                let (a, b) = (base.values[&kind], moved.values[&kind]);
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
            }
        }
    }
    within("max relative difference", worst, 1e-7)
}

fn core_norm() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = 0.0f64;
    for (p1, p2) in SHAPES {
        let shape = Shape::new(p1, p2).map_err(s)?;
        let p = p1 * p2;
        for root in [RootKind::Cholesky, RootKind::Symmetric] {
            let cov = sample_cov(p + 4, p, &mut rng);
            let c = kcd(&cov, p + 4, shape, root, &FlipFlopConfig::default()).map_err(s)?.c;
            let top = singular_values(&rearrange(c.as_matrix(), shape).map_err(s)?).map_err(s)?.largest();
            worst = worst.max((top - (p as f64).sqrt()).abs());
        }
    }
    within("max |sigma1(R(C)) - sqrt(p)|", worst, 1e-7)
}

fn counterexample() -> Check {
    let shape = Shape::new(2, 2).map_err(s)?;
    let r = kcd(&counterexample_covariance(), 2, shape, RootKind::Cholesky, &FlipFlopConfig::default()).map_err(s)?;
    let k_err = (r.k.kron().as_matrix() - DMatrix::identity(4, 4) * 0.5).amax();
    let c_err = (r.c.as_matrix() - counterexample_core().as_matrix()).amax();
    within("max deviation of K and C", k_err.max(c_err), 1e-8)
}

fn tw_table(path: Option<&Path>) -> Check {
    let owned;
    let table = match path {
        Some(p) => {
            owned = Tw1Table::from_path(p).map_err(s)?;
            &owned
        }
        None => Tw1Table::embedded(),
    };
    let issues = table.check();
    if issues.is_empty() {
        let (lo, hi) = table.range();
        Ok(format!("{} grid points on [{lo}, {hi}]", table.grid_values().len()))
    } else {
        Err(issues.join("; "))
    }
}

pub fn run(tw_path: Option<&Path>) -> Vec<Outcome> {
    vec![
        Outcome {
            name: "partial-traces",
            result: partial_traces(),
        },
        Outcome {
            name: "rearrangement",
            result: rearrangement(),
        },
        Outcome {
            name: "equivariance",
            result: equivariance(),
        },
        Outcome {
            name: "invariance",
            result: invariance(),
        },
        Outcome {
            name: "core-norm",
            result: core_norm(),
        },
        Outcome {
            name: "counterexample",
            result: counterexample(),
        },
        Outcome {
            name: "tw1-table",
            result: tw_table(tw_path),
        },
    ]
}

/// One `PASS name: detail` or `FAIL name: detail` line per invariant.
pub fn report(outcomes: &[Outcome]) -> String {
    outcomes
        .iter()
        .map(|o| match &o.result {
            Ok(d) => format!("PASS {}: {d}\n", o.name),
            Err(d) => format!("FAIL {}: {d}\n", o.name),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_embedded_table() {
        let out = run(None);
        for o in &out {
            assert!(o.result.is_ok(), "{}: {:?}", o.name, o.result);
        }
        assert_eq!(report(&out).lines().count(), 7);
    }

    #[test]
    fn missing_table_is_a_named_failure() {
        let r = tw_table(Some(Path::new("/nonexistent/tw1.txt")));
        assert!(r.is_err());
    }
}
