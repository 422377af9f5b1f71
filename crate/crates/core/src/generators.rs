//! Population cores (partial-isotropy rank-r, random and shrunk), separable
//! nuisance factors, and data samplers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::kcd::{core_matrix, kronecker_component, FlipFlopConfig, RootKind, SeparableFactor};
use crate::matcore::{cholesky, gram, RectMatrix, Shape, Spectrum, SymMatrix};

/// Classification of `q = p1^2 + p2^2 - r p1 p2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleCase {
    /// `q < 0`.
    Strict,
    /// `q = 0`, which happens only for `(p, p, 2)`.
    Zero,
    /// `q = gcd(p1, p2)^2`.
    GcdSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible(FeasibleCase),
    Infeasible,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Whether a rank-`r` core exists for the shape `(p1, p2)`.
pub fn rank_feasible(p1: usize, p2: usize, r: usize) -> Feasibility {
    if p1 == 0 || p2 == 0 || r == 0 {
        return Feasibility::Infeasible;
    }
    let q = (p1 * p1 + p2 * p2) as i128 - (r * p1 * p2) as i128;
    let d = gcd(p1, p2) as i128;
    if q < 0 {
        Feasibility::Feasible(FeasibleCase::Strict)
    } else if q == 0 {
        Feasibility::Feasible(FeasibleCase::Zero)
    } else if q == d * d {
        Feasibility::Feasible(FeasibleCase::GcdSquare)
    } else {
        Feasibility::Infeasible
    }
}

/// Explicit rank-`r` core constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// `(p, p, 2)`.
    Square2,
    /// `((k+1)m, km, 2)`.
    Ladder2,
    /// `(r p2, p2, r)`.
    OrthoBlock,
}

impl std::str::FromStr for Construction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "square2" | "square" => Ok(Construction::Square2),
            "ladder2" | "ladder" => Ok(Construction::Ladder2),
            "orthoblock" | "ortho" => Ok(Construction::OrthoBlock),
            _ => Err(Error::InvalidParameter(format!("unknown construction '{s}'"))),
        }
    }
}

impl std::fmt::Display for Construction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Construction::Square2 => "square2",
            Construction::Ladder2 => "ladder2",
            Construction::OrthoBlock => "orthoblock",
        })
    }
}

/// `(k, m)` with `(big, small) = ((k+1)m, km)`.
fn ladder_params(big: usize, small: usize) -> Option<(usize, usize)> {
    if big <= small {
        return None;
    }
    let m = big - small;
    (small % m == 0 && small > 0).then(|| (small / m, m))
}

impl Construction {
    /// Whether this construction applies to `(p1, p2, r)` in either orientation.
    pub fn compatible(self, p1: usize, p2: usize, r: usize) -> bool {
        let (big, small) = (p1.max(p2), p1.min(p2));
        match self {
            Construction::Square2 => p1 == p2 && r == 2,
            Construction::Ladder2 => r == 2 && ladder_params(big, small).is_some(),
            Construction::OrthoBlock => r >= 1 && small > 0 && big == r * small,
        }
    }

    /// The first construction that applies to `(p1, p2, r)`.
    pub fn for_shape(p1: usize, p2: usize, r: usize) -> Option<Construction> {
        [Construction::OrthoBlock, Construction::Square2, Construction::Ladder2]
            .into_iter()
            .find(|c| c.compatible(p1, p2, r))
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `diag(R)` moved into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> RectMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn block_diag(blocks: &[RectMatrix]) -> RectMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

fn stack_vecs(blocks: &[RectMatrix]) -> RectMatrix {
    let p = blocks[0].len();
    DMatrix::from_fn(p, blocks.len(), |i, j| blocks[j].as_slice()[i])
}

/// Splits the columns of `A` (`p x r`) into the `p1 x p2` matrices `A_i`.
pub fn blocks_of(a: &RectMatrix, shape: Shape) -> Result<Vec<RectMatrix>> {
    if a.nrows() != shape.p() {
        return Err(dim_mismatch(shape.p(), a.nrows()));
    }
    Ok((0..a.ncols())
        .map(|j| DMatrix::from_column_slice(shape.p1, shape.p2, a.column(j).as_slice()))
        .collect())
}

/// Square2 blocks with `k = 1`: `A1 = sqrt(p) U d V^T`,
/// `A2 = sqrt(p) U sqrt(1 - d^2) O V^T` with `O != ±I`.
fn square2_blocks<R: Rng + ?Sized>(p: usize, rng: &mut R) -> [RectMatrix; 2] {
    let u = haar_orthogonal(p, rng);
    let v = haar_orthogonal(p, rng);
    let d: f64 = rng.random_range(0.2..0.8);
    let eye = DMatrix::<f64>::identity(p, p);
    let o = loop {
        let o = haar_orthogonal(p, rng);
        if (&o - &eye).norm() >= 1e-6 && (&o + &eye).norm() >= 1e-6 {
            break o;
        }
    };
    let s = (p as f64).sqrt();
    let a1 = &u * (s * d) * v.transpose();
    let a2 = &u * (s * (1.0 - d * d).sqrt()) * &o * v.transpose();
    [a1, a2]
}

/// Ladder2 blocks for `((k+1)m, km)`.
fn ladder2_blocks<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> [RectMatrix; 2] {
    let p1 = (k + 1) * m;
    let p2 = k * m;
    let u = haar_orthogonal(p1, rng);
    let v = haar_orthogonal(p2, rng);
    let d1 = block_diag(
        &(1..=k)
            .map(|i| DMatrix::identity(m, m) * ((k + 1 - i) as f64).sqrt())
            .collect::<Vec<_>>(),
    );
    let d2 = block_diag(
        &(1..=k)
            .map(|i| haar_orthogonal(m, rng) * (i as f64).sqrt())
            .collect::<Vec<_>>(),
    );
    let s = (m as f64).sqrt();
    let first = u.columns(0, k * m).into_owned();
    let last = u.columns(m, k * m).into_owned();
    [first * d1 * v.transpose() * s, last * d2 * v.transpose() * s]
}

/// OrthoBlock: `[A_1, ..., A_r] = sqrt(p2) O` for `p1 = r p2`.
fn orthoblock_blocks<R: Rng + ?Sized>(p2: usize, r: usize, rng: &mut R) -> Vec<RectMatrix> {
    let p1 = r * p2;
    let o = haar_orthogonal(p1, rng) * (p2 as f64).sqrt();
    (0..r).map(|i| o.columns(i * p2, p2).into_owned()).collect()
}

/// A `p x r` matrix `A` of full column rank with `A A^T` a core.
pub fn make_rank_r_core<R: Rng + ?Sized>(
    p1: usize,
    p2: usize,
    r: usize,
    construction: Construction,
    rng: &mut R,
) -> Result<RectMatrix> {
    if !construction.compatible(p1, p2, r) {
        return Err(Error::IncompatibleParameters(format!(
            "{construction} does not apply to (p1, p2, r) = ({p1}, {p2}, {r})"
        )));
    }
    let transposed = p2 > p1;
    let (big, small) = (p1.max(p2), p1.min(p2));
    let blocks: Vec<RectMatrix> = match construction {
        Construction::Square2 => square2_blocks(big, rng).into(),
        Construction::Ladder2 => {
            let (k, m) = ladder_params(big, small).expect("checked");
            ladder2_blocks(k, m, rng).into()
        }
        Construction::OrthoBlock => orthoblock_blocks(small, r, rng),
    };
    let blocks: Vec<RectMatrix> = if transposed {
        blocks.iter().map(|b| b.transpose()).collect()
    } else {
        blocks
    };
    Ok(stack_vecs(&blocks))
}

/// `(1 - λ) A A^T + λ I`.
pub fn partial_isotropy_core(a: &RectMatrix, lambda: f64) -> Result<SymMatrix> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    let p = a.nrows();
    SymMatrix::from_matrix(a * a.transpose() * (1.0 - lambda) + DMatrix::identity(p, p) * lambda)
}

/// Eigenvalues of `(1 - λ) A A^T + λ I`: the `r` spikes followed by `p - r`
/// copies of `λ`.
pub fn predicted_spikes(a: &RectMatrix, lambda: f64, construction: Construction) -> Result<Spectrum> {
    let p = a.nrows();
    let r = a.ncols();
    let mut values = match construction {
        Construction::Square2 => {
            if r != 2 {
                return Err(Error::IncompatibleParameters("square2 needs r = 2".into()));
            }
            let pf = p as f64;
            // Gram determinant of vec(A1), vec(A2) equals p1^2 β.
            let g = a.transpose() * a;
            let beta = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]) / pf;
            let disc = (1.0 - 4.0 * beta / pf).max(0.0).sqrt();
            [(1.0 + disc) / 2.0, (1.0 - disc) / 2.0]
                .iter()
                .map(|al| pf * (1.0 - lambda) * al + lambda)
                .collect::<Vec<_>>()
        }
        Construction::Ladder2 | Construction::OrthoBlock => {
            vec![(1.0 - lambda) * p as f64 / r as f64 + lambda; r]
        }
    };
    values.extend(std::iter::repeat(lambda).take(p - r));
    Ok(Spectrum::from_unsorted(values))
}

/// Alternative or null population core.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreKind {
    Explicit(SymMatrix),
    PartialIsotropy { a: RectMatrix, lambda: f64 },
    Shrunk { base: Box<CoreModel>, w: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreModel {
    pub shape: Shape,
    pub kind: CoreKind,
    pub predicted_spikes: Option<Spectrum>,
}

impl CoreModel {
    pub fn identity(shape: Shape) -> Self {
        CoreModel {
            shape,
            kind: CoreKind::Explicit(SymMatrix::identity(shape.p())),
            predicted_spikes: None,
        }
    }

    pub fn explicit(shape: Shape, c: SymMatrix) -> Result<Self> {
        if c.dim() != shape.p() {
            return Err(dim_mismatch(shape.p(), c.dim()));
        }
        Ok(CoreModel {
            shape,
            kind: CoreKind::Explicit(c),
            predicted_spikes: None,
        })
    }

    /// Random rank-`r` partial-isotropy core.
    pub fn partial_isotropy<R: Rng + ?Sized>(
        shape: Shape,
        r: usize,
        lambda: f64,
        construction: Construction,
        rng: &mut R,
    ) -> Result<Self> {
        let a = make_rank_r_core(shape.p1, shape.p2, r, construction, rng)?;
        let spikes = predicted_spikes(&a, lambda, construction)?;
        partial_isotropy_core(&a, lambda)?;
        Ok(CoreModel {
            shape,
            kind: CoreKind::PartialIsotropy { a, lambda },
            predicted_spikes: Some(spikes),
        })
    }

    pub fn shrunk(base: CoreModel, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!("w must lie in [0, 1], got {w}")));
        }
        Ok(CoreModel {
            shape: base.shape,
            kind: CoreKind::Shrunk { base: Box::new(base), w },
            predicted_spikes: None,
        })
    }

    pub fn materialize(&self) -> Result<SymMatrix> {
        match &self.kind {
            CoreKind::Explicit(c) => Ok(c.clone()),
            CoreKind::PartialIsotropy { a, lambda } => partial_isotropy_core(a, *lambda),
            CoreKind::Shrunk { base, w } => shrink_core(&base.materialize()?, *w),
        }
    }

    /// Lower-triangular `L` with `L L^T` equal to the core.
    pub fn root(&self) -> Result<RectMatrix> {
        cholesky(&self.materialize()?)
    }
}

/// `w C + (1 - w) I`.
pub fn shrink_core(c: &SymMatrix, w: f64) -> Result<SymMatrix> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidParameter(format!("w must lie in [0, 1], got {w}")));
    }
    let p = c.dim();
    SymMatrix::from_matrix(c.as_matrix() * w + DMatrix::identity(p, p) * (1.0 - w))
}

/// Core of `Γ diag(spectrum) Γ^T` for a Haar `Γ`.
pub fn random_core<R: Rng + ?Sized>(shape: Shape, spectrum: &[f64], rng: &mut R) -> Result<SymMatrix> {
    let p = shape.p();
    if spectrum.len() != p {
        return Err(dim_mismatch(p, spectrum.len()));
    }
    if spectrum.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("spectrum must be positive".into()));
    }
    let g = haar_orthogonal(p, rng);
    let sigma = SymMatrix::from_matrix(
        &g * DMatrix::from_fn(p, p, |i, j| if i == j { spectrum[i] } else { 0.0 }) * g.transpose(),
    )?;
    let cfg = FlipFlopConfig {
        max_iter: 5_000,
        ..FlipFlopConfig::default()
    };
    let fit = kronecker_component(&sigma, shape, &cfg)?;
    core_matrix(&sigma, &fit.factor, RootKind::Cholesky)
}

/// Named population spectra for [`random_core`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorePreset {
    /// `(10, 4 x (p/2 - 1), 1 x p/2)`.
    #[serde(rename = "C1")]
    C1,
    /// `(4, 3 x (p/2 - 1), 2 x p/2)`.
    #[serde(rename = "C2")]
    C2,
}

impl CorePreset {
    pub fn name(self) -> &'static str {
        match self {
            CorePreset::C1 => "C1",
            CorePreset::C2 => "C2",
        }
    }

    pub fn spectrum(self, p: usize) -> Result<Vec<f64>> {
        if p < 2 || p % 2 != 0 {
            return Err(Error::InvalidParameter(format!("preset {} needs even p >= 2, got {p}", self.name())));
        }
        let (top, mid, low) = match self {
            CorePreset::C1 => (10.0, 4.0, 1.0),
            CorePreset::C2 => (4.0, 3.0, 2.0),
        };
        let mut v = vec![top];
        v.extend(std::iter::repeat(mid).take(p / 2 - 1));
        v.extend(std::iter::repeat(low).take(p / 2));
        Ok(v)
    }

    pub fn core<R: Rng + ?Sized>(self, shape: Shape, rng: &mut R) -> Result<SymMatrix> {
        random_core(shape, &self.spectrum(shape.p())?, rng)
    }
}

impl std::str::FromStr for CorePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c1" => Ok(CorePreset::C1),
            "c2" => Ok(CorePreset::C2),
            _ => Err(Error::InvalidParameter(format!("unknown core preset '{s}'"))),
        }
    }
}

/// Named separable covariances `Σ2 ⊗ Σ1` with Haar eigenvectors, used as
/// nuisance parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeparablePreset {
    /// `Λ1 = (4 x p1/2, 1 x p1/2)`, `Λ2 = (3 x p2/2, 2 x p2/2)`.
    B1,
    /// `Λ1 = (8 x p1/2, 3 x p1/2)`, `Λ2 = (5 x p2/2, 1 x p2/2)`.
    B2,
    /// AR(1) factors with correlations 0.5 (rows) and 0.3 (columns).
    Ar1,
}

fn two_level(dim: usize, hi: f64, lo: f64) -> Vec<f64> {
    (0..dim).map(|i| if i < dim / 2 { hi } else { lo }).collect()
}

fn rotated<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Result<SymMatrix> {
    let g = haar_orthogonal(values.len(), rng);
    let d = DMatrix::from_fn(values.len(), values.len(), |i, j| if i == j { values[i] } else { 0.0 });
    SymMatrix::from_matrix(&g * d * g.transpose())
}

/// AR(1) correlation matrix `rho^|i - j|`.
pub fn ar1(dim: usize, rho: f64) -> Result<SymMatrix> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("AR(1) needs |rho| < 1, got {rho}")));
    }
    SymMatrix::from_matrix(DMatrix::from_fn(dim, dim, |i, j| rho.powi((i as i32 - j as i32).abs())))
}

impl SeparablePreset {
    pub fn factor<R: Rng + ?Sized>(self, shape: Shape, rng: &mut R) -> Result<SeparableFactor> {
        match self {
            SeparablePreset::B1 => SeparableFactor::new(
                rotated(&two_level(shape.p1, 4.0, 1.0), rng)?,
                rotated(&two_level(shape.p2, 3.0, 2.0), rng)?,
            ),
            SeparablePreset::B2 => SeparableFactor::new(
                rotated(&two_level(shape.p1, 8.0, 3.0), rng)?,
                rotated(&two_level(shape.p2, 5.0, 1.0), rng)?,
            ),
            SeparablePreset::Ar1 => SeparableFactor::new(ar1(shape.p1, 0.5)?, ar1(shape.p2, 0.3)?),
        }
    }
}

impl std::str::FromStr for SeparablePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "b1" => Ok(SeparablePreset::B1),
            "b2" => Ok(SeparablePreset::B2),
            "ar1" => Ok(SeparablePreset::Ar1),
            _ => Err(Error::InvalidParameter(format!("unknown separable preset '{s}'"))),
        }
    }
}

/// Entry distribution of the innovations `z_i`.
///
/// Text form: `gaussian`, `gamma:ALPHA:BETA`, `t:NU`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Distribution {
    #[default]
    Gaussian,
    /// `(W - α/β) / sqrt(α/β²)` for `W ~ Gamma(shape α, rate β)`.
    GammaStd { alpha: f64, beta: f64 },
    /// Student t with `nu` degrees of freedom, not rescaled.
    StudentT { nu: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Gaussian => Ok(()),
            Distribution::GammaStd { alpha, beta } if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() => {
                Ok(())
            }
            Distribution::StudentT { nu } if nu > 2.0 && nu.is_finite() => Ok(()),
            d => Err(Error::InvalidParameter(format!("invalid distribution parameters: {d}"))),
        }
    }

    /// Fills `out` with i.i.d. draws.
    pub fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) -> Result<()> {
        match *self {
            Distribution::Gaussian => out.iter_mut().for_each(|x| *x = rng.sample(StandardNormal)),
            Distribution::GammaStd { alpha, beta } => {
                let g = Gamma::new(alpha, 1.0 / beta).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let mean = alpha / beta;
                let sd = alpha.sqrt() / beta;
                out.iter_mut().for_each(|x| *x = (g.sample(rng) - mean) / sd);
            }
            Distribution::StudentT { nu } => {
                let t = StudentT::new(nu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                out.iter_mut().for_each(|x| *x = t.sample(rng));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distribution::Gaussian => write!(f, "gaussian"),
            Distribution::GammaStd { alpha, beta } => write!(f, "gamma:{alpha}:{beta}"),
            Distribution::StudentT { nu } => write!(f, "t:{nu}"),
        }
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = lower.split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number '{t}' in distribution '{s}'")))
        };
        let d = match parts.as_slice() {
            ["gaussian"] | ["normal"] => Distribution::Gaussian,
            ["gamma", a, b] => Distribution::GammaStd { alpha: num(a)?, beta: num(b)? },
            ["t", nu] | ["student-t", nu] | ["studentt", nu] => Distribution::StudentT { nu: num(nu)? },
            _ => return Err(Error::InvalidParameter(format!("unknown distribution '{s}'"))),
        };
        d.validate()?;
        Ok(d)
    }
}

impl TryFrom<String> for Distribution {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Distribution> for String {
    fn from(d: Distribution) -> String {
        d.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub dist: Distribution,
    pub seed: u64,
    /// Subtract the sample mean before forming the covariance.
    pub centered: bool,
}

/// `n x p` data matrix with rows `root z_i`.
pub fn sample_data_with<R: Rng + ?Sized>(
    n: usize,
    root: &RectMatrix,
    dist: &Distribution,
    rng: &mut R,
) -> Result<RectMatrix> {
    let p = root.nrows();
    if root.ncols() != p {
        return Err(dim_mismatch(format!("{p} x {p}"), format!("{} x {}", root.nrows(), root.ncols())));
    }
    let mut z = DMatrix::zeros(n, p);
    dist.fill(z.as_mut_slice(), rng)?;
    Ok(z * root.transpose())
}

/// Subtracts column means in place.
pub fn center_columns(x: &mut RectMatrix) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let m = col.sum() / n;
        col.add_scalar_mut(-m);
    }
}

/// `(1/n) X^T X`, after centring when requested.
pub fn covariance_of(mut x: RectMatrix, centered: bool) -> Result<SymMatrix> {
    let n = x.nrows();
    if centered {
        if n < 2 {
            return Err(Error::InvalidParameter("centring needs n >= 2".into()));
        }
        center_columns(&mut x);
    }
    Ok(gram(&x, 1.0 / n as f64))
}

/// Sample data for `SamplerSpec` with its own seed.
pub fn sample_data(n: usize, root: &RectMatrix, spec: &SamplerSpec) -> Result<RectMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_data_with(n, root, &spec.dist, &mut rng)
}

/// Sample covariance of `n` draws of `root z`.
pub fn sample_covariance(n: usize, root: &RectMatrix, spec: &SamplerSpec) -> Result<SymMatrix> {
    covariance_of(sample_data(n, root, spec)?, spec.centered)
}
