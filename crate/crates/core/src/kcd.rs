//! Kronecker-core decomposition.
//!
//! A covariance `Σ` is split as `Σ = H C H^T`, where `K = H H^T = K2 ⊗ K1`
//! minimizes `d(Ω; Σ) = tr(Ω^{-1} Σ) + log|Ω|` over separable `Ω` and `C` is
//! the core. `K` is found by the flip-flop algorithm; `H` is either the
//! Cholesky factor or the symmetric square root of `K`, built factor-wise.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::matcore::{
    cholesky, kron, kron_congruence, log_det_spd, lower_triangular_inverse, spd_inverse,
    sym_eigenvalues, sym_power, RectMatrix, Shape, Spectrum, SymMatrix,
};

/// Separable covariance `K2 ⊗ K1`, normalized so that
/// `|K1|^(1/p1) = |K2|^(1/p2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableFactor {
    k1: SymMatrix,
    k2: SymMatrix,
    shape: Shape,
}

impl SeparableFactor {
    /// Builds a factor pair and applies the determinant normalization.
    pub fn new(k1: SymMatrix, k2: SymMatrix) -> Result<Self> {
        let shape = Shape::new(k1.dim(), k2.dim())?;
        let (k1, k2) = normalize(k1, k2)?;
        Ok(SeparableFactor { k1, k2, shape })
    }

    pub fn identity(shape: Shape) -> Self {
        SeparableFactor {
            k1: SymMatrix::identity(shape.p1),
            k2: SymMatrix::identity(shape.p2),
            shape,
        }
    }

    pub fn k1(&self) -> &SymMatrix {
        &self.k1
    }

    pub fn k2(&self) -> &SymMatrix {
        &self.k2
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// The full `p x p` matrix `K2 ⊗ K1`.
    pub fn kron(&self) -> SymMatrix {
        SymMatrix::from_matrix(kron(self.k2.as_matrix(), self.k1.as_matrix()))
            .expect("Kronecker product of square matrices is square")
    }

    /// `log |K2 ⊗ K1| = p2 log|K1| + p1 log|K2|`.
    pub fn log_det(&self) -> Result<f64> {
        Ok(self.shape.p2 as f64 * log_det_spd(&self.k1)?
            + self.shape.p1 as f64 * log_det_spd(&self.k2)?)
    }

    /// `|log|K1|/p1 - log|K2|/p2|`, zero for a normalized pair.
    pub fn identification_gap(&self) -> Result<f64> {
        Ok((log_det_spd(&self.k1)? / self.shape.p1 as f64
            - log_det_spd(&self.k2)? / self.shape.p2 as f64)
            .abs())
    }

    /// Eigenvalues of `K2 ⊗ K1` (all pairwise products).
    pub fn eigenvalues(&self) -> Result<Spectrum> {
        let e1 = sym_eigenvalues(&self.k1)?;
        let e2 = sym_eigenvalues(&self.k2)?;
        let mut out = Vec::with_capacity(self.shape.p());
        for a in e2.values() {
            for b in e1.values() {
                out.push(a * b);
            }
        }
        Ok(Spectrum::from_unsorted(out))
    }

    /// Factor-wise square roots `(H1, H2)` with `H2 ⊗ H1` the chosen root of `K`.
    pub fn roots(&self, kind: RootKind) -> Result<(RectMatrix, RectMatrix)> {
        Ok((root(&self.k1, kind)?, root(&self.k2, kind)?))
    }

    /// Factor-wise inverse roots `(H1^{-1}, H2^{-1})`.
    pub fn inverse_roots(&self, kind: RootKind) -> Result<(RectMatrix, RectMatrix)> {
        Ok((inverse_root(&self.k1, kind)?, inverse_root(&self.k2, kind)?))
    }

    /// `(G1 K1 G1^T, G2 K2 G2^T)` for a separable transformation `G2 ⊗ G1`.
    pub fn transform(&self, g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> Result<SeparableFactor> {
        if g1.shape() != (self.shape.p1, self.shape.p1)
            || g2.shape() != (self.shape.p2, self.shape.p2)
        {
            return Err(dim_mismatch(
                format!("{0}x{0} and {1}x{1}", self.shape.p1, self.shape.p2),
                format!("{:?} and {:?}", g1.shape(), g2.shape()),
            ));
        }
        let k1 = SymMatrix::from_matrix(g1 * self.k1.as_matrix() * g1.transpose())?;
        let k2 = SymMatrix::from_matrix(g2 * self.k2.as_matrix() * g2.transpose())?;
        SeparableFactor::new(k1, k2)
    }
}

fn normalize(k1: SymMatrix, k2: SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let a = log_det_spd(&k1)? / k1.dim() as f64;
    let b = log_det_spd(&k2)? / k2.dim() as f64;
    let c = (0.5 * (b - a)).exp();
    Ok((k1.scaled(c), k2.scaled(1.0 / c)))
}

/// Which square root of the separable component identifies the core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootKind {
    #[default]
    Cholesky,
    Symmetric,
}

impl std::str::FromStr for RootKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cholesky" => Ok(RootKind::Cholesky),
            "symmetric" => Ok(RootKind::Symmetric),
            other => Err(Error::InvalidParameter(format!("unknown root kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for RootKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RootKind::Cholesky => "cholesky",
            RootKind::Symmetric => "symmetric",
        })
    }
}

fn root(m: &SymMatrix, kind: RootKind) -> Result<RectMatrix> {
    match kind {
        RootKind::Cholesky => cholesky(m),
        RootKind::Symmetric => Ok(sym_power(m, 0.5)?.into_inner()),
    }
}

fn inverse_root(m: &SymMatrix, kind: RootKind) -> Result<RectMatrix> {
    match kind {
        RootKind::Cholesky => Ok(lower_triangular_inverse(&cholesky(m)?)),
        RootKind::Symmetric => Ok(sym_power(m, -0.5)?.into_inner()),
    }
}

/// Starting value for the column factor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum FlipFlopInit {
    #[default]
    Identity,
    UserSupplied(SymMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipFlopConfig {
    pub max_iter: usize,
    /// Relative change of the objective below which the iteration may stop.
    pub rel_tol: f64,
    pub init: FlipFlopInit,
}

impl Default for FlipFlopConfig {
    fn default() -> Self {
        FlipFlopConfig {
            max_iter: 500,
            rel_tol: 1e-11,
            init: FlipFlopInit::Identity,
        }
    }
}

impl FlipFlopConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Output of the flip-flop iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipFlopFit {
    pub factor: SeparableFactor,
    pub iterations: usize,
    /// Final value of `d(K; S)`.
    pub objective: f64,
    pub converged: bool,
    /// Relative fixed-point residual of the row factor at exit.
    pub residual: f64,
    /// Objective after every sweep.
    pub history: Vec<f64>,
}

/// Result of a full decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KcdResult {
    pub k: SeparableFactor,
    pub h: RectMatrix,
    pub c: SymMatrix,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

/// Existence condition `n > p1/p2 + p2/p1`, evaluated in integers.
///
/// The boundary `n p1 p2 = p1^2 + p2^2` is admitted: the iteration is
/// attempted there and fails with [`Error::SingularIterate`] if the data do not
/// support a maximizer.
pub fn check_sample_size(n: usize, shape: Shape) -> Result<()> {
    let (p1, p2) = (shape.p1 as u128, shape.p2 as u128);
    if (n as u128) * p1 * p2 < p1 * p1 + p2 * p2 {
        return Err(Error::InsufficientSamples {
            n,
            p1: shape.p1,
            p2: shape.p2,
        });
    }
    Ok(())
}

/// The two half-step contractions of the flip-flop, either from the blocks of
/// `S` or directly from the data matrices.
trait Contractions {
    fn shape(&self) -> Shape;
    /// `sum_i Z_i W Z_i^T / (n p2)`.
    fn row_update(&self, w: &DMatrix<f64>) -> DMatrix<f64>;
    /// `sum_i Z_i^T V Z_i / (n p1)`.
    fn col_update(&self, v: &DMatrix<f64>) -> DMatrix<f64>;
    /// `tr((K2^{-1} ⊗ K1^{-1}) S)`.
    fn trace_term(&self, k1_inv: &DMatrix<f64>, k2_inv: &DMatrix<f64>) -> f64 {
        let v = self.col_update(k1_inv);
        self.shape().p1 as f64 * v.dot(k2_inv)
    }
}

struct BlockForm<'a> {
    s: &'a SymMatrix,
    shape: Shape,
}

impl Contractions for BlockForm<'_> {
    fn shape(&self) -> Shape {
        self.shape
    }

    fn row_update(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let (p1, p2) = (self.shape.p1, self.shape.p2);
        let p = self.shape.p();
        let s = self.s.as_matrix().as_slice();
        let mut out = DMatrix::<f64>::zeros(p1, p1);
        let o = out.as_mut_slice();
        for b in 0..p2 {
            for a in 0..p2 {
                let wab = w[(a, b)];
                if wab == 0.0 {
                    continue;
                }
                for c in 0..p1 {
                    let col = &s[(b * p1 + c) * p + a * p1..(b * p1 + c) * p + a * p1 + p1];
                    let dst = &mut o[c * p1..(c + 1) * p1];
                    for (d, x) in dst.iter_mut().zip(col) {
                        *d += wab * x;
                    }
                }
            }
        }
        out / p2 as f64
    }

    fn col_update(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let (p1, p2) = (self.shape.p1, self.shape.p2);
        let p = self.shape.p();
        let s = self.s.as_matrix().as_slice();
        let vs = v.as_slice();
        let mut out = DMatrix::<f64>::zeros(p2, p2);
        for b in 0..p2 {
            for a in 0..=b {
                let mut acc = 0.0;
                for c in 0..p1 {
                    let col = &s[(b * p1 + c) * p + a * p1..(b * p1 + c) * p + a * p1 + p1];
                    let vc = &vs[c * p1..(c + 1) * p1];
                    acc += col.iter().zip(vc).map(|(x, y)| x * y).sum::<f64>();
                }
                out[(a, b)] = acc / p1 as f64;
                out[(b, a)] = acc / p1 as f64;
            }
        }
        out
    }
}

struct DataForm {
    z: Vec<DMatrix<f64>>,
    shape: Shape,
}

impl Contractions for DataForm {
    fn shape(&self) -> Shape {
        self.shape
    }

    fn row_update(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(self.shape.p1, self.shape.p1);
        for z in &self.z {
            out += z * w * z.transpose();
        }
        out / (self.z.len() * self.shape.p2) as f64
    }

    fn col_update(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(self.shape.p2, self.shape.p2);
        for z in &self.z {
            out += z.transpose() * v * z;
        }
        out / (self.z.len() * self.shape.p1) as f64
    }
}

fn symmetric(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_matrix(m).expect("flip-flop updates are square")
}

fn flip_flop<F: Contractions>(form: &F, cfg: &FlipFlopConfig) -> Result<FlipFlopFit> {
    cfg.validate()?;
    let shape = form.shape();
    let (p1, p2) = (shape.p1 as f64, shape.p2 as f64);
    let s2_init = match &cfg.init {
        FlipFlopInit::Identity => SymMatrix::identity(shape.p2),
        FlipFlopInit::UserSupplied(m) => {
            if m.dim() != shape.p2 {
                return Err(dim_mismatch(shape.p2, m.dim()));
            }
            m.clone()
        }
    };
    let singular = |sweep: usize| move |_| Error::SingularIterate { sweep };
    let s2_inv = spd_inverse(&s2_init).map_err(singular(0))?;
    let mut s1 = symmetric(form.row_update(s2_inv.as_matrix()));

    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut last: Option<(SymMatrix, SymMatrix, f64, f64)> = None;
    for sweep in 1..=cfg.max_iter {
        let s1_inv = spd_inverse(&s1).map_err(singular(sweep))?;
        let s2 = symmetric(form.col_update(s1_inv.as_matrix()));
        let (k1, k2) = normalize(s1, s2).map_err(singular(sweep))?;
        let k1_inv = spd_inverse(&k1).map_err(singular(sweep))?;
        let k2_inv = spd_inverse(&k2).map_err(singular(sweep))?;
        let log_det = p2 * log_det_spd(&k1).map_err(singular(sweep))?
            + p1 * log_det_spd(&k2).map_err(singular(sweep))?;
        let obj = form.trace_term(k1_inv.as_matrix(), k2_inv.as_matrix()) + log_det;
        history.push(obj);

        let next = symmetric(form.row_update(k2_inv.as_matrix()));
        let residual = (next.as_matrix() - k1.as_matrix()).norm() / k1.as_matrix().norm();
        let small_change = (prev - obj).abs() <= cfg.rel_tol * obj.abs().max(1.0);
        if !obj.is_finite() || !residual.is_finite() {
            return Err(Error::SingularIterate { sweep });
        }
        if small_change && residual <= 10.0 * cfg.rel_tol {
            return Ok(FlipFlopFit {
                factor: SeparableFactor { k1, k2, shape },
                iterations: sweep,
                objective: obj,
                converged: true,
                residual,
                history,
            });
        }
        prev = obj;
        s1 = next;
        last = Some((k1, k2, obj, residual));
    }
    let (k1, k2, objective, residual) = last.expect("max_iter >= 1");
    Ok(FlipFlopFit {
        factor: SeparableFactor { k1, k2, shape },
        iterations: cfg.max_iter,
        objective,
        converged: false,
        residual,
        history,
    })
}

/// Kronecker component `k(Σ)` of a positive definite (population) matrix.
/// No sample-size condition applies.
pub fn kronecker_component(sigma: &SymMatrix, shape: Shape, cfg: &FlipFlopConfig) -> Result<FlipFlopFit> {
    if sigma.dim() != shape.p() {
        return Err(dim_mismatch(shape.p(), sigma.dim()));
    }
    flip_flop(&BlockForm { s: sigma, shape }, cfg)
}

/// Kronecker MLE from a sample covariance `S` built from `n` observations.
pub fn kronecker_mle(s: &SymMatrix, n: usize, shape: Shape, cfg: &FlipFlopConfig) -> Result<FlipFlopFit> {
    check_sample_size(n, shape)?;
    if !s.is_finite() {
        return Err(Error::InvalidParameter("sample covariance has non-finite entries".into()));
    }
    kronecker_component(s, shape, cfg)
}

/// Kronecker MLE from an `n x p` data matrix whose rows are `vec(Y_i)`.
pub fn kronecker_mle_data(data: &DMatrix<f64>, shape: Shape, cfg: &FlipFlopConfig) -> Result<FlipFlopFit> {
    let n = data.nrows();
    if data.ncols() != shape.p() {
        return Err(dim_mismatch(shape.p(), data.ncols()));
    }
    check_sample_size(n, shape)?;
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("data has non-finite entries".into()));
    }
    let z = (0..n)
        .map(|i| DMatrix::from_fn(shape.p1, shape.p2, |r, c| data[(i, c * shape.p1 + r)]))
        .collect();
    flip_flop(&DataForm { z, shape }, cfg)
}

/// `d(K; S) = tr(K^{-1} S) + log|K|`.
pub fn objective(s: &SymMatrix, k: &SeparableFactor) -> Result<f64> {
    let form = BlockForm { s, shape: k.shape };
    let k1_inv = spd_inverse(&k.k1)?;
    let k2_inv = spd_inverse(&k.k2)?;
    Ok(form.trace_term(k1_inv.as_matrix(), k2_inv.as_matrix()) + k.log_det()?)
}

/// Relative residuals of the two fixed-point equations at `k`.
pub fn fixed_point_residuals(s: &SymMatrix, k: &SeparableFactor) -> Result<(f64, f64)> {
    let form = BlockForm { s, shape: k.shape };
    let k1_inv = spd_inverse(&k.k1)?;
    let k2_inv = spd_inverse(&k.k2)?;
    let r1 = form.row_update(k2_inv.as_matrix());
    let r2 = form.col_update(k1_inv.as_matrix());
    Ok((
        (r1 - k.k1.as_matrix()).norm() / k.k1.as_matrix().norm(),
        (r2 - k.k2.as_matrix()).norm() / k.k2.as_matrix().norm(),
    ))
}

/// Core `C = H^{-1} S H^{-T}` together with the root `H = H2 ⊗ H1`.
pub fn core(s: &SymMatrix, k: &SeparableFactor, kind: RootKind) -> Result<(RectMatrix, SymMatrix)> {
    let c = core_matrix(s, k, kind)?;
    let (h1, h2) = k.roots(kind)?;
    Ok((kron(&h2, &h1), c))
}

/// Core only, without materializing `H`.
pub fn core_matrix(s: &SymMatrix, k: &SeparableFactor, kind: RootKind) -> Result<SymMatrix> {
    if s.dim() != k.shape.p() {
        return Err(dim_mismatch(k.shape.p(), s.dim()));
    }
    let (g1, g2) = k.inverse_roots(kind)?;
    kron_congruence(&g1, &g2, s)
}

/// Full decomposition of a sample covariance.
pub fn kcd(s: &SymMatrix, n: usize, shape: Shape, kind: RootKind, cfg: &FlipFlopConfig) -> Result<KcdResult> {
    let fit = kronecker_mle(s, n, shape, cfg)?;
    let (h, c) = core(s, &fit.factor, kind)?;
    Ok(KcdResult {
        k: fit.factor,
        h,
        c,
        iterations: fit.iterations,
        objective: fit.objective,
        converged: fit.converged,
    })
}

/// The sample covariance used as a regression case: two `2 x 2` observations
/// `Y1 = I` and `Y2 = [[0, 1], [-1, 0]]`.
pub fn counterexample_covariance() -> SymMatrix {
    SymMatrix::from_matrix(DMatrix::from_row_slice(
        4,
        4,
        &[
            0.5, 0.0, 0.0, 0.5, //
            0.0, 0.5, -0.5, 0.0, //
            0.0, -0.5, 0.5, 0.0, //
            0.5, 0.0, 0.0, 0.5,
        ],
    ))
    .expect("square")
}

/// The core of [`counterexample_covariance`] under the Cholesky root.
pub fn counterexample_core() -> SymMatrix {
    counterexample_covariance().scaled(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{partial_trace_1, partial_trace_2, rearrange, singular_values};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn rand_spd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let a = randn(n, n + 3, rng);
        SymMatrix::from_matrix(&a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2).unwrap()
    }

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn cfg() -> FlipFlopConfig {
        FlipFlopConfig::default()
    }

    #[test]
    fn counterexample_separable_component_and_core() {
        let s = counterexample_covariance();
        let shape = Shape::new(2, 2).unwrap();
        let fit = kronecker_mle(&s, 2, shape, &cfg()).unwrap();
        assert!(fit.converged);
        let k = fit.factor.kron();
        assert!((k.as_matrix() - DMatrix::identity(4, 4) * 0.5).amax() < 1e-12);
        let (h, c) = core(&s, &fit.factor, RootKind::Cholesky).unwrap();
        assert!((h - DMatrix::identity(4, 4) * 0.5f64.sqrt()).amax() < 1e-12);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[1., 0., 0., 1., 0., 1., -1., 0., 0., -1., 1., 0., 1., 0., 0., 1.],
        );
        assert!((c.as_matrix() - expected).amax() < 1e-12);
    }

    #[test]
    fn separable_input_is_its_own_component_with_identity_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (p1, p2) in [(2, 3), (3, 3), (4, 2)] {
            let shape = Shape::new(p1, p2).unwrap();
            let sigma = SeparableFactor::new(rand_spd(p1, &mut rng), rand_spd(p2, &mut rng)).unwrap();
            let s = sigma.kron();
            for kind in [RootKind::Cholesky, RootKind::Symmetric] {
                let res = kcd(&s, 100, shape, kind, &cfg()).unwrap();
                assert!(rel(res.k.kron().as_matrix(), s.as_matrix()) < 1e-8);
                assert!((res.c.as_matrix() - DMatrix::identity(shape.p(), shape.p())).amax() < 1e-8);
                assert!(rel(&(&res.h * res.h.transpose()), s.as_matrix()) < 1e-8);
            }
        }
    }

    #[test]
    fn equivariance_under_separable_transformations() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for (p1, p2) in [(2, 3), (4, 4)] {
            let shape = Shape::new(p1, p2).unwrap();
            for _ in 0..20 {
                let sigma = rand_spd(shape.p(), &mut rng);
                let g1 = randn(p1, p1, &mut rng) + DMatrix::identity(p1, p1) * 2.0;
                let g2 = randn(p2, p2, &mut rng) + DMatrix::identity(p2, p2) * 2.0;
                let g = kron(&g2, &g1);
                let moved = SymMatrix::from_matrix(&g * sigma.as_matrix() * g.transpose()).unwrap();
                let k = kronecker_component(&sigma, shape, &cfg()).unwrap().factor;
                let k_moved = kronecker_component(&moved, shape, &cfg()).unwrap().factor;
                let expected = &g * k.kron().as_matrix() * g.transpose();
                assert!(rel(k_moved.kron().as_matrix(), &expected) < 1e-7);
            }
        }
    }

    #[test]
    fn core_satisfies_partial_trace_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for (p1, p2) in [(2, 3), (4, 4), (4, 2)] {
            let shape = Shape::new(p1, p2).unwrap();
            let p = shape.p();
            for n in [3, p, 3 * p] {
                let x = randn(n, p, &mut rng);
                let s = SymMatrix::from_matrix(x.transpose() * &x / n as f64).unwrap();
                if check_sample_size(n, shape).is_err() {
                    continue;
                }
                // close to the existence boundary the iteration contracts slowly
                let slow = FlipFlopConfig { max_iter: 20_000, ..cfg() };
                for kind in [RootKind::Cholesky, RootKind::Symmetric] {
                    let res = kcd(&s, n, shape, kind, &slow).unwrap();
                    assert!(res.converged, "({p1},{p2}) n={n} {kind} iters={}", res.iterations);
                    let c = &res.c;
                    assert_relative_eq!(c.trace(), p as f64, max_relative = 1e-6);
                    let t1 = partial_trace_1(c, shape).unwrap();
                    let t2 = partial_trace_2(c, shape).unwrap();
                    assert!((t1.as_matrix() - DMatrix::identity(p1, p1) * p2 as f64).amax() < 1e-6);
                    assert!((t2.as_matrix() - DMatrix::identity(p2, p2) * p1 as f64).amax() < 1e-6);
                    let sv = singular_values(&rearrange(c.as_matrix(), shape).unwrap()).unwrap();
                    assert!((sv.largest() - (p as f64).sqrt()).abs() < 1e-7);
                    // the core's own Kronecker component is the identity
                    let kc = kronecker_component(c, shape, &cfg()).unwrap().factor;
                    assert!((kc.kron().as_matrix() - DMatrix::identity(p, p)).amax() < 1e-6);
                    assert!(rel(&(&res.h * res.h.transpose()), res.k.kron().as_matrix()) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn fixed_point_residual_and_monotone_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let shape = Shape::new(4, 3).unwrap();
        let n = 5;
        let x = randn(n, 12, &mut rng) * kron(&rand_spd(3, &mut rng).into_inner(), &DMatrix::identity(4, 4));
        let s = SymMatrix::from_matrix(x.transpose() * &x / n as f64).unwrap();
        let c = cfg();
        let fit = kronecker_mle(&s, n, shape, &c).unwrap();
        assert!(fit.converged);
        let (r1, r2) = fixed_point_residuals(&s, &fit.factor).unwrap();
        assert!(r1 <= 10.0 * c.rel_tol, "row residual {r1}");
        assert!(r2 <= 10.0 * c.rel_tol, "column residual {r2}");
        for w in fit.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        assert_relative_eq!(objective(&s, &fit.factor).unwrap(), fit.objective, max_relative = 1e-12);
        assert!(fit.factor.identification_gap().unwrap() < 1e-8);
    }

    #[test]
    fn data_and_block_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let shape = Shape::new(3, 2).unwrap();
        let n = 7;
        let x = randn(n, 6, &mut rng);
        let s = SymMatrix::from_matrix(x.transpose() * &x / n as f64).unwrap();
        let a = kronecker_mle(&s, n, shape, &cfg()).unwrap().factor;
        let b = kronecker_mle_data(&x, shape, &cfg()).unwrap().factor;
        assert!(rel(a.k1().as_matrix(), b.k1().as_matrix()) < 1e-9);
        assert!(rel(a.k2().as_matrix(), b.k2().as_matrix()) < 1e-9);
    }

    #[test]
    fn spectrum_of_core_does_not_depend_on_separable_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let shape = Shape::new(3, 4).unwrap();
        let n = 20;
        let x = randn(n, 12, &mut rng);
        let s0 = SymMatrix::from_matrix(x.transpose() * &x / n as f64).unwrap();
        for kind in [RootKind::Cholesky, RootKind::Symmetric] {
            let base = kcd(&s0, n, shape, kind, &cfg()).unwrap().c.eigenvalues().unwrap();
            for _ in 0..5 {
                let k = SeparableFactor::new(rand_spd(3, &mut rng), rand_spd(4, &mut rng)).unwrap();
                let (h1, h2) = k.roots(kind).unwrap();
                let h = kron(&h2, &h1);
                let s = SymMatrix::from_matrix(&h * s0.as_matrix() * h.transpose()).unwrap();
                let e = kcd(&s, n, shape, kind, &cfg()).unwrap().c.eigenvalues().unwrap();
                for (a, b) in e.values().iter().zip(base.values()) {
                    assert!((a - b).abs() <= 1e-8 * base.largest());
                }
            }
        }
    }

    #[test]
    fn sample_size_condition() {
        let s = Shape::new(4, 2).unwrap();
        // 4/2 + 2/4 = 2.5
        assert!(matches!(check_sample_size(2, s), Err(Error::InsufficientSamples { .. })));
        assert!(check_sample_size(3, s).is_ok());
        // boundary case p1 = p2, n = 2 is attempted
        assert!(check_sample_size(2, Shape::new(3, 3).unwrap()).is_ok());
        assert!(check_sample_size(1, Shape::new(3, 3).unwrap()).is_err());
        let big = SymMatrix::identity(8);
        assert!(kronecker_mle(&big, 2, s, &cfg()).is_err());
    }

    #[test]
    fn config_validation_and_user_init() {
        let s = counterexample_covariance();
        let shape = Shape::new(2, 2).unwrap();
        let bad = FlipFlopConfig { max_iter: 0, ..cfg() };
        assert!(kronecker_mle(&s, 2, shape, &bad).is_err());
        let user = FlipFlopConfig {
            init: FlipFlopInit::UserSupplied(SymMatrix::from_diagonal(&[2.0, 0.5])),
            ..cfg()
        };
        let fit = kronecker_mle(&s, 2, shape, &user).unwrap();
        assert!((fit.factor.kron().as_matrix() - DMatrix::identity(4, 4) * 0.5).amax() < 1e-9);
        let capped = FlipFlopConfig { max_iter: 1, ..cfg() };
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let x = randn(6, 4, &mut rng);
        let s = SymMatrix::from_matrix(x.transpose() * &x / 6.0).unwrap();
        let fit = kronecker_mle(&s, 6, shape, &capped).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn root_kind_parsing() {
        assert_eq!("Cholesky".parse::<RootKind>().unwrap(), RootKind::Cholesky);
        assert_eq!("symmetric".parse::<RootKind>().unwrap(), RootKind::Symmetric);
        assert!("qr".parse::<RootKind>().is_err());
        assert_eq!(RootKind::default(), RootKind::Cholesky);
    }
}
