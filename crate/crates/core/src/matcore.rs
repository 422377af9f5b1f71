//! Dense matrix primitives with the block structure of a `p1 x p2` array
//! variate: Kronecker products, partial traces, the rearrangement operator,
//! square roots and spectra.
//!
//! Throughout, `vec` stacks the columns of a `p1 x p2` matrix, so a
//! `p x p` covariance is partitioned into `p2 x p2` blocks `M[i,j]`, each of
//! size `p1 x p1`.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};

/// General dense real matrix.
pub type RectMatrix = DMatrix<f64>;

/// Eigenvalues in `[-PSD_CLAMP * lambda_1, 0]` are treated as zero.
pub const PSD_CLAMP: f64 = 1e-10;

/// Singular values below `RANK_TOL * sigma_1` count as zero.
pub const RANK_TOL: f64 = 1e-8;

const EIG_EPS: f64 = f64::EPSILON;
const EIG_MAX_ITER: usize = 10_000;

/// Row and column dimensions of the array variate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub p1: usize,
    pub p2: usize,
}

impl Shape {
    pub fn new(p1: usize, p2: usize) -> Result<Self> {
        if p1 == 0 || p2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "shape dimensions must be positive, got ({p1}, {p2})"
            )));
        }
        Ok(Shape { p1, p2 })
    }

    /// Total dimension `p1 * p2`.
    pub fn p(&self) -> usize {
        self.p1 * self.p2
    }

    /// The shape with the roles of rows and columns exchanged.
    pub fn transposed(&self) -> Shape {
        Shape {
            p1: self.p2,
            p2: self.p1,
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.p() {
            return Err(dim_mismatch(
                format!("{} = {} x {}", self.p(), self.p1, self.p2),
                dim,
            ));
        }
        Ok(())
    }
}

/// Dense symmetric matrix. Symmetry is enforced on construction by averaging
/// with the transpose, so `m[(i, j)] == m[(j, i)]` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(dim_mismatch(
                "square matrix",
                format!("{} x {}", m.nrows(), m.ncols()),
            ));
        }
        let mut m = m;
        symmetrize_in_place(&mut m);
        Ok(SymMatrix(m))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn scaled(&self, a: f64) -> SymMatrix {
        SymMatrix(&self.0 * a)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Descending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Spectrum> {
        sym_eigenvalues(self)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigenvalues or singular values sorted in non-increasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn from_unsorted(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Spectrum(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest value, `NaN` when empty.
    pub fn largest(&self) -> f64 {
        self.0.first().copied().unwrap_or(f64::NAN)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> RectMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for l in 0..bc {
                for k in 0..br {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Sum of the diagonal blocks, `sum_i M[i,i]` (a `p1 x p1` matrix).
pub fn partial_trace_1(m: &SymMatrix, s: Shape) -> Result<SymMatrix> {
    s.check(m.dim())?;
    let (p1, p2) = (s.p1, s.p2);
    let a = m.as_matrix();
    let mut out = DMatrix::zeros(p1, p1);
    for b in 0..p2 {
        out += a.view((b * p1, b * p1), (p1, p1));
    }
    SymMatrix::from_matrix(out)
}

/// Matrix of block traces, entry `(i, j)` equal to `tr(M[i,j])` (a `p2 x p2` matrix).
pub fn partial_trace_2(m: &SymMatrix, s: Shape) -> Result<SymMatrix> {
    s.check(m.dim())?;
    let (p1, p2) = (s.p1, s.p2);
    let a = m.as_matrix();
    let out = DMatrix::from_fn(p2, p2, |i, j| {
        (0..p1).map(|k| a[(i * p1 + k, j * p1 + k)]).sum::<f64>()
    });
    SymMatrix::from_matrix(out)
}

/// Rearrangement operator. Row `j * p2 + i` of the `p2^2 x p1^2` result is
/// `vec(M[i,j])`, so that `rearrange(A ⊗ B) = vec(A) vec(B)^T`.
pub fn rearrange(m: &DMatrix<f64>, s: Shape) -> Result<RectMatrix> {
    if m.nrows() != s.p() || m.ncols() != s.p() {
        return Err(dim_mismatch(
            format!("{0} x {0}", s.p()),
            format!("{} x {}", m.nrows(), m.ncols()),
        ));
    }
    let (p1, p2) = (s.p1, s.p2);
    let mut out = DMatrix::zeros(p2 * p2, p1 * p1);
    for j in 0..p2 {
        for i in 0..p2 {
            let row = j * p2 + i;
            for c in 0..p1 {
                for r in 0..p1 {
                    out[(row, c * p1 + r)] = m[(i * p1 + r, j * p1 + c)];
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`rearrange`].
pub fn rearrange_inverse(r: &DMatrix<f64>, s: Shape) -> Result<RectMatrix> {
    let (p1, p2) = (s.p1, s.p2);
    if r.nrows() != p2 * p2 || r.ncols() != p1 * p1 {
        return Err(dim_mismatch(
            format!("{} x {}", p2 * p2, p1 * p1),
            format!("{} x {}", r.nrows(), r.ncols()),
        ));
    }
    let p = s.p();
    let mut out = DMatrix::zeros(p, p);
    for j in 0..p2 {
        for i in 0..p2 {
            let row = j * p2 + i;
            for c in 0..p1 {
                for rr in 0..p1 {
                    out[(i * p1 + rr, j * p1 + c)] = r[(row, c * p1 + rr)];
                }
            }
        }
    }
    Ok(out)
}

/// Lower Cholesky factor `L` with `L L^T = M`.
///
/// A pivot at or below `1e-13` times the largest diagonal entry is reported
/// as [`Error::NotPositiveDefinite`].
pub fn cholesky(m: &SymMatrix) -> Result<RectMatrix> {
    let n = m.dim();
    let a = m.as_matrix();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(l)
}

/// `log |M|` for a positive definite `M`, from the Cholesky pivots.
pub fn log_det_spd(m: &SymMatrix) -> Result<f64> {
    let l = cholesky(m)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Inverse of a lower triangular matrix with nonzero diagonal.
pub fn lower_triangular_inverse(l: &DMatrix<f64>) -> RectMatrix {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::identity(n, n);
    // Forward substitution column by column; the result is lower triangular.
    for c in 0..n {
        for i in c..n {
            let mut v = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                v -= l[(i, k)] * inv[(k, c)];
            }
            inv[(i, c)] = v / l[(i, i)];
        }
    }
    inv
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky(m)?;
    let li = lower_triangular_inverse(&l);
    SymMatrix::from_matrix(li.transpose() * li)
}

/// Descending eigenvalues with matching orthonormal eigenvectors (columns).
pub fn eig_sym(m: &SymMatrix) -> Result<(Spectrum, RectMatrix)> {
    let n = m.dim();
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), EIG_EPS, EIG_MAX_ITER).ok_or(
        Error::Convergence {
            routine: "symmetric eigendecomposition",
            iterations: EIG_MAX_ITER,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((Spectrum(values), vectors))
}

/// Descending eigenvalues only.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Spectrum> {
    let vals = m.as_matrix().clone().symmetric_eigenvalues();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Convergence {
            routine: "symmetric eigenvalues",
            iterations: EIG_MAX_ITER,
        });
    }
    Ok(Spectrum::from_unsorted(vals.iter().copied().collect()))
}

/// Clamp a PSD spectrum: values in `[-PSD_CLAMP * lambda_1, 0)` become zero,
/// anything more negative is an error.
pub fn clamp_psd(values: &mut [f64]) -> Result<()> {
    let top = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -PSD_CLAMP * top {
                return Err(Error::NegativeEigenvalue { value: *v });
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// Symmetric positive semidefinite square root.
pub fn sym_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    sym_power(m, 0.5)
}

/// `M^a` for symmetric PSD `M` (positive definite when `a < 0`).
pub fn sym_power(m: &SymMatrix, a: f64) -> Result<SymMatrix> {
    let (spec, v) = eig_sym(m)?;
    let mut vals = spec.into_vec();
    clamp_psd(&mut vals)?;
    if a < 0.0 {
        if let Some(&v) = vals.iter().find(|&&v| v <= 0.0) {
            return Err(Error::NegativeEigenvalue { value: v });
        }
    }
    let mut scaled = v.clone();
    for (j, lam) in vals.iter().enumerate() {
        let f = lam.powf(a);
        scaled.column_mut(j).scale_mut(f);
    }
    SymMatrix::from_matrix(scaled * v.transpose())
}

/// Descending singular values.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Spectrum> {
    let svd = SVD::try_new(m.clone(), false, false, EIG_EPS, EIG_MAX_ITER).ok_or(
        Error::Convergence {
            routine: "singular value decomposition",
            iterations: EIG_MAX_ITER,
        },
    )?;
    Ok(Spectrum::from_unsorted(
        svd.singular_values.iter().copied().collect(),
    ))
}

/// Number of singular values at or above `RANK_TOL * sigma_1`.
pub fn numerical_rank(m: &DMatrix<f64>) -> Result<usize> {
    let sv = singular_values(m)?;
    let top = sv.largest();
    if !(top > 0.0) {
        return Ok(0);
    }
    Ok(sv.values().iter().filter(|&&s| s >= RANK_TOL * top).count())
}

/// `scale * X^T X` for an `n x p` matrix `X`.
pub fn gram(x: &DMatrix<f64>, scale: f64) -> SymMatrix {
    let (n, p) = x.shape();
    let mut out = DMatrix::<f64>::zeros(p, p);
    // X is column-major: X[i, j] sits at i + j * n. X^T is read with swapped strides.
    unsafe {
        matrixmultiply::dgemm(
            p,
            n,
            p,
            scale,
            x.as_ptr(),
            n as isize,
            1,
            x.as_ptr(),
            1,
            n as isize,
            0.0,
            out.as_mut_ptr(),
            1,
            p as isize,
        );
    }
    SymMatrix::from_matrix(out).expect("gram matrix is square")
}

/// `(G2 ⊗ G1) M` for a matrix `M` with `p1 * p2` rows, without forming the
/// Kronecker product.
pub fn apply_kron(g1: &DMatrix<f64>, g2: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<RectMatrix> {
    let (p1, p2) = (g1.nrows(), g2.nrows());
    if !g1.is_square() || !g2.is_square() || m.nrows() != p1 * p2 {
        return Err(dim_mismatch(
            format!("{} rows with square factors", p1 * p2),
            format!(
                "{} rows, factors {}x{} and {}x{}",
                m.nrows(),
                g1.nrows(),
                g1.ncols(),
                g2.nrows(),
                g2.ncols()
            ),
        ));
    }
    let cols = m.ncols();
    let p = p1 * p2;
    // Each column of M is vec(X) with X of size p1 x p2; (G2 ⊗ G1) vec(X) = vec(G1 X G2^T).
    let wide = DMatrixView::from_slice(m.as_slice(), p1, p2 * cols);
    let left = g1 * wide;
    let g2t = g2.transpose();
    let mut out = DMatrix::<f64>::zeros(p, cols);
    let src = left.as_slice();
    let dst = out.as_mut_slice();
    for c in 0..cols {
        let x = DMatrixView::from_slice(&src[c * p..(c + 1) * p], p1, p2);
        let mut y = DMatrixViewMut::from_slice(&mut dst[c * p..(c + 1) * p], p1, p2);
        y.gemm(1.0, &x, &g2t, 0.0);
    }
    Ok(out)
}

/// `(G2 ⊗ G1) S (G2 ⊗ G1)^T`.
pub fn kron_congruence(g1: &DMatrix<f64>, g2: &DMatrix<f64>, s: &SymMatrix) -> Result<SymMatrix> {
    let a = apply_kron(g1, g2, s.as_matrix())?;
    let b = apply_kron(g1, g2, &a.transpose())?;
    SymMatrix::from_matrix(b)
}

/// Reshape a length-`p1 p2` vector into the `p1 x p2` matrix it vectorizes.
pub fn unvec(v: &[f64], s: Shape) -> Result<RectMatrix> {
    s.check(v.len())?;
    Ok(DMatrix::from_column_slice(s.p1, s.p2, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn rand_spd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let a = randn(n, n + 2, rng);
        SymMatrix::from_matrix(&a * a.transpose() / (n as f64) + DMatrix::identity(n, n) * 0.1)
            .unwrap()
    }

    fn rand_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        SymMatrix::from_matrix(randn(n, n, rng)).unwrap()
    }

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn kron_trivial_cases() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(kron(&i2, &i2), DMatrix::<f64>::identity(4, 4));
        assert_eq!(
            kron(&DMatrix::from_element(1, 1, 2.0), &DMatrix::from_element(1, 1, 3.0)),
            DMatrix::from_element(1, 1, 6.0)
        );
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 2.0]));
        let k = SymMatrix::from_matrix(kron(&d, &i2)).unwrap();
        assert_eq!(k.eigenvalues().unwrap().values(), &[5.0, 5.0, 2.0, 2.0]);
    }

    #[test]
    fn kron_shape_multiplies() {
        let a = DMatrix::from_element(2, 3, 1.0);
        let b = DMatrix::from_element(4, 5, 1.0);
        assert_eq!(kron(&a, &b).shape(), (8, 15));
    }

    #[test]
    fn partial_traces_of_identity() {
        let s = Shape::new(2, 2).unwrap();
        let i4 = SymMatrix::identity(4);
        let two_i = SymMatrix::identity(2).scaled(2.0);
        assert_eq!(partial_trace_1(&i4, s).unwrap(), two_i);
        assert_eq!(partial_trace_2(&i4, s).unwrap(), two_i);
    }

    #[test]
    fn partial_traces_of_kronecker_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Shape::new(3, 2).unwrap();
        let k1 = rand_spd(3, &mut rng);
        let k2 = rand_spd(2, &mut rng);
        let k = SymMatrix::from_matrix(kron(k2.as_matrix(), k1.as_matrix())).unwrap();
        let t1 = partial_trace_1(&k, s).unwrap();
        let t2 = partial_trace_2(&k, s).unwrap();
        assert!(rel_err(t1.as_matrix(), &(k1.as_matrix() * k2.trace())) < 1e-12);
        assert!(rel_err(t2.as_matrix(), &(k2.as_matrix() * k1.trace())) < 1e-12);

        // brute-force block summation
        let mut bf1 = DMatrix::zeros(3, 3);
        for b in 0..2 {
            for r in 0..3 {
                for c in 0..3 {
                    bf1[(r, c)] += k[(b * 3 + r, b * 3 + c)];
                }
            }
        }
        assert!(rel_err(t1.as_matrix(), &bf1) < 1e-14);
    }

    #[test]
    fn partial_traces_reject_wrong_dimension() {
        let s = Shape::new(2, 3).unwrap();
        assert!(matches!(
            partial_trace_1(&SymMatrix::identity(5), s),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(partial_trace_2(&SymMatrix::identity(5), s).is_err());
        assert!(rearrange(&DMatrix::identity(5, 5), s).is_err());
    }

    #[test]
    fn rearrange_of_kronecker_product_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Shape::new(3, 2).unwrap();
        let a = randn(2, 2, &mut rng);
        let b = randn(3, 3, &mut rng);
        let r = rearrange(&kron(&a, &b), s).unwrap();
        let va = DMatrix::from_column_slice(4, 1, a.as_slice());
        let vb = DMatrix::from_column_slice(9, 1, b.as_slice());
        assert!(rel_err(&r, &(va * vb.transpose())) < 1e-14);
        assert_eq!(numerical_rank(&r).unwrap(), 1);
    }

    #[test]
    fn rearrange_of_rank_one_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Shape::new(3, 2).unwrap();
        let a: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        let av = DMatrix::from_column_slice(6, 1, &a);
        let am = unvec(&a, s).unwrap();
        let r = rearrange(&(&av * av.transpose()), s).unwrap();
        let expected = kron(&am.transpose(), &am.transpose());
        assert!(rel_err(&r, &expected) < 1e-14);
    }

    #[test]
    fn rearrange_rank_counts_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (p1, p2) in [(2, 2), (3, 2), (4, 3), (4, 4)] {
            let s = Shape::new(p1, p2).unwrap();
            for terms in 1..=3usize.min(p1 * p1).min(p2 * p2) {
                let mut m = DMatrix::zeros(s.p(), s.p());
                for _ in 0..terms {
                    m += kron(&randn(p2, p2, &mut rng), &randn(p1, p1, &mut rng));
                }
                let r = rearrange(&m, s).unwrap();
                assert_eq!(numerical_rank(&r).unwrap(), terms, "shape ({p1},{p2})");
            }
        }
    }

    #[test]
    fn cholesky_trivial_and_errors() {
        assert_eq!(cholesky(&SymMatrix::identity(3)).unwrap(), DMatrix::identity(3, 3));
        let four = SymMatrix::identity(2).scaled(4.0);
        assert_eq!(cholesky(&four).unwrap(), DMatrix::identity(2, 2) * 2.0);
        let singular = SymMatrix::from_matrix(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert!(matches!(
            cholesky(&singular),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn cholesky_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 5, 12] {
            let m = rand_spd(n, &mut rng);
            let l = cholesky(&m).unwrap();
            for j in 0..n {
                assert!(l[(j, j)] > 0.0);
                for i in 0..j {
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
            assert!(rel_err(&(&l * l.transpose()), m.as_matrix()) < 1e-10);
            let li = lower_triangular_inverse(&l);
            assert!(rel_err(&(&l * &li), &DMatrix::identity(n, n)) < 1e-10);
        }
    }

    #[test]
    fn log_det_matches_product_of_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = rand_spd(6, &mut rng);
        let ld: f64 = m.eigenvalues().unwrap().values().iter().map(|v| v.ln()).sum();
        assert_relative_eq!(log_det_spd(&m).unwrap(), ld, max_relative = 1e-10);
    }

    #[test]
    fn sym_sqrt_cases() {
        assert_relative_eq!(
            sym_sqrt(&SymMatrix::identity(3)).unwrap().as_matrix(),
            &DMatrix::identity(3, 3),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            sym_sqrt(&SymMatrix::identity(2).scaled(4.0)).unwrap().as_matrix(),
            &(DMatrix::identity(2, 2) * 2.0),
            epsilon = 1e-14
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = rand_spd(7, &mut rng);
        let r = sym_sqrt(&m).unwrap();
        assert!(rel_err(&(r.as_matrix() * r.as_matrix()), m.as_matrix()) < 1e-10);
        let neg = SymMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(sym_sqrt(&neg), Err(Error::NegativeEigenvalue { .. })));
        // roundoff-level negatives are clamped
        let tiny = SymMatrix::from_diagonal(&[1.0, -1e-13]);
        assert_eq!(sym_sqrt(&tiny).unwrap()[(1, 1)], 0.0);
    }

    #[test]
    fn eig_trivial_cases() {
        let (s, _) = eig_sym(&SymMatrix::identity(4)).unwrap();
        assert_eq!(s.values(), &[1.0; 4]);
        let (s, v) = eig_sym(&SymMatrix::from_diagonal(&[1.0, 3.0])).unwrap();
        assert_eq!(s.values(), &[3.0, 1.0]);
        assert_relative_eq!(v[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn eig_matches_characteristic_polynomial_2x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let m = rand_sym(2, &mut rng);
            let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let tr = a + d;
            let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
            let (s, v) = eig_sym(&m).unwrap();
            assert_relative_eq!(s.values()[0], 0.5 * (tr + disc), epsilon = 1e-12);
            assert_relative_eq!(s.values()[1], 0.5 * (tr - disc), epsilon = 1e-12);
            assert!(rel_err(&(v.transpose() * &v), &DMatrix::identity(2, 2)) < 1e-9);
        }
    }

    #[test]
    fn eig_roots_annihilate_characteristic_polynomial() {
        // det(M - lambda I) evaluated by cofactor expansion must vanish at every eigenvalue.
        fn det(m: &DMatrix<f64>) -> f64 {
            let n = m.nrows();
            if n == 1 {
                return m[(0, 0)];
            }
            (0..n)
                .map(|j| {
                    let minor = m.clone().remove_row(0).remove_column(j);
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * m[(0, j)] * det(&minor)
                })
                .sum()
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [3, 4] {
            let m = rand_sym(n, &mut rng);
            let (s, v) = eig_sym(&m).unwrap();
            let scale = s.values().iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            for &lam in s.values() {
                let shifted = m.as_matrix() - DMatrix::identity(n, n) * lam;
                assert!(det(&shifted).abs() < 1e-10 * scale.powi(n as i32));
            }
            assert!(rel_err(&(v.transpose() * &v), &DMatrix::identity(n, n)) < 1e-9);
            let eigs_only = sym_eigenvalues(&m).unwrap();
            for (a, b) in eigs_only.values().iter().zip(s.values()) {
                assert_relative_eq!(a, b, epsilon = 1e-12 * scale);
            }
        }
    }

    #[test]
    fn singular_values_of_identity_and_eig_oracle() {
        assert_eq!(
            singular_values(&DMatrix::identity(4, 4)).unwrap().values(),
            &[1.0; 4]
        );
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = randn(5, 3, &mut rng);
        let sv = singular_values(&m).unwrap();
        let g = SymMatrix::from_matrix(m.transpose() * &m).unwrap();
        let ev = g.eigenvalues().unwrap();
        for (s, e) in sv.values().iter().zip(ev.values()) {
            assert_relative_eq!(*s, e.sqrt(), max_relative = 1e-10);
        }
    }

    #[test]
    fn gram_matches_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = randn(7, 5, &mut rng);
        let g = gram(&x, 0.5);
        assert!(rel_err(g.as_matrix(), &(x.transpose() * &x * 0.5)) < 1e-14);
    }

    #[test]
    fn kron_application_matches_explicit_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g1 = randn(3, 3, &mut rng);
        let g2 = randn(4, 4, &mut rng);
        let m = randn(12, 5, &mut rng);
        let fast = apply_kron(&g1, &g2, &m).unwrap();
        let slow = kron(&g2, &g1) * &m;
        assert!(rel_err(&fast, &slow) < 1e-13);

        let s = rand_spd(12, &mut rng);
        let g = kron(&g2, &g1);
        let c = kron_congruence(&g1, &g2, &s).unwrap();
        assert!(rel_err(c.as_matrix(), &(&g * s.as_matrix() * g.transpose())) < 1e-13);
    }

    #[test]
    fn spectrum_sorted_descending() {
        let s = Spectrum::from_unsorted(vec![1.0, 3.0, 2.0]);
        assert_eq!(s.values(), &[3.0, 2.0, 1.0]);
        assert_eq!(s.largest(), 3.0);
        assert_eq!(s.sum(), 6.0);
    }

    #[test]
    fn shape_validation() {
        assert!(Shape::new(0, 3).is_err());
        let s = Shape::new(4, 3).unwrap();
        assert_eq!(s.p(), 12);
        assert_eq!(s.transposed(), Shape { p1: 3, p2: 4 });
    }

    fn shape_and_matrix() -> impl Strategy<Value = (Shape, Vec<f64>)> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(p1, p2)| {
            let p = p1 * p2;
            (
                Just(Shape { p1, p2 }),
                proptest::collection::vec(-10.0f64..10.0, p * p),
            )
        })
    }

    proptest! {
        #[test]
        fn prop_partial_traces_preserve_trace((s, data) in shape_and_matrix()) {
            let m = SymMatrix::from_matrix(DMatrix::from_vec(s.p(), s.p(), data)).unwrap();
            let t = m.trace();
            let t1 = partial_trace_1(&m, s).unwrap().trace();
            let t2 = partial_trace_2(&m, s).unwrap().trace();
            let tol = 1e-10 * t.abs().max(1.0);
            prop_assert!((t1 - t).abs() <= tol);
            prop_assert!((t2 - t).abs() <= tol);
        }

        #[test]
        fn prop_rearrange_is_exact_permutation((s, data) in shape_and_matrix()) {
            let m = DMatrix::from_vec(s.p(), s.p(), data);
            let r = rearrange(&m, s).unwrap();
            prop_assert_eq!(rearrange_inverse(&r, s).unwrap(), m.clone());
            let mut a: Vec<f64> = m.iter().copied().collect();
            let mut b: Vec<f64> = r.iter().copied().collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn prop_kron_mixed_product(
            (a, b, c, d) in (1usize..=4, 1usize..=4, 1usize..=4, 1usize..=4, 1usize..=4, 1usize..=4)
                .prop_flat_map(|(m, n, k, q, r, t)| (
                    proptest::collection::vec(-3.0f64..3.0, m * n).prop_map(move |v| DMatrix::from_vec(m, n, v)),
                    proptest::collection::vec(-3.0f64..3.0, q * r).prop_map(move |v| DMatrix::from_vec(q, r, v)),
                    proptest::collection::vec(-3.0f64..3.0, n * k).prop_map(move |v| DMatrix::from_vec(n, k, v)),
                    proptest::collection::vec(-3.0f64..3.0, r * t).prop_map(move |v| DMatrix::from_vec(r, t, v)),
                ))
        ) {
            let lhs = kron(&a, &b) * kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            prop_assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }
    }
}
