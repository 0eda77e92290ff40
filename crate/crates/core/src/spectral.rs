//! Dense real symmetric matrices and the spectral and trace inequalities used
//! by the Laplace-transform bounds.
//!
//! Every checker returns both sides of the inequality so that callers (and
//! the verification suites) can report the slack, not just a boolean.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance shared by all inequality checkers.
pub const REL_TOL: f64 = 1e-9;
/// Absolute tolerance used when both operands are zero matrices.
pub const ZERO_TOL: f64 = 1e-12;
/// Largest asymmetry `|a_ij - a_ji|` accepted (and averaged away) at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

const LOG_DOMAIN_THRESHOLD: f64 = 700.0;

/// A dense real symmetric `d x d` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawMatrix> for SymMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        SymMatrix::new(raw.dim, raw.entries)
    }
}

impl From<SymMatrix> for RawMatrix {
    fn from(m: SymMatrix) -> Self {
        RawMatrix { dim: m.dim, entries: m.data }
    }
}

impl SymMatrix {
    /// Builds a matrix from `dim * dim` row-major entries.
    ///
    /// Entries must be finite. Pairs that differ by at most [`SYMMETRY_TOL`]
    /// (relative to their magnitude) are replaced by their average; larger
    /// asymmetry is rejected.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::RejectedInput("dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::RejectedInput(format!(
                "expected {} entries for dim {dim}, found {}",
                dim * dim,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite()) {
            return Err(Error::RejectedInput(format!("non-finite entry {bad}")));
        }
        let mut data = entries;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                let scale = 1.0 + a.abs().max(b.abs());
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::RejectedInput(format!(
                        "asymmetric entries ({i},{j}) = {a} vs ({j},{i}) = {b}"
                    )));
                }
                let mid = 0.5 * (a + b);
                data[i * dim + j] = mid;
                data[j * dim + i] = mid;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::RejectedInput("rows must form a square matrix".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = x;
        }
        m
    }

    /// Wraps a nalgebra matrix that is symmetric by construction, averaging
    /// away rounding-level asymmetry.
    fn from_dmatrix_symmetrized(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        Self { dim, data }
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j) == 0.0))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, data })
    }

    /// In-place `self += other`. Panics on dimension mismatch; used in hot loops.
    pub fn add_assign(&mut self, other: &SymMatrix) {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// In-place `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &SymMatrix) {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&self, alpha: f64) -> SymMatrix {
        Self { dim: self.dim, data: self.data.iter().map(|x| alpha * x).collect() }
    }

    /// `self * self`, which is symmetric again.
    pub fn square(&self) -> SymMatrix {
        let d = self.dim;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let s: f64 = (0..d).map(|k| self.get(i, k) * self.get(k, j)).sum();
                data[i * d + j] = s;
                data[j * d + i] = s;
            }
        }
        Self { dim: d, data }
    }

    /// `Tr(self * other)` without forming the (generally non-symmetric) product.
    pub fn trace_product(&self, other: &SymMatrix) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Largest eigenvalue. Diagonal matrices short-circuit.
    pub fn lambda_max(&self) -> f64 {
        if self.is_diagonal() {
            return self.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max);
        }
        eig_sym(self).map(|s| s.lambda_max).unwrap_or(f64::NAN)
    }
}

/// Eigenvalues sorted in descending order, with the matching orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Column `k` is the unit eigenvector for `eigenvalues[k]`.
    eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.lambda_max.abs().max(self.lambda_min.abs())
    }

    /// `V f(Λ) Vᵀ` for a scalar function applied to the spectrum.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let values = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&x| f(x)),
        ));
        let v = &self.eigenvectors;
        SymMatrix::from_dmatrix_symmetrized(&(v * values * v.transpose()))
    }
}

pub fn eig_sym(a: &SymMatrix) -> Result<Spectrum> {
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::RejectedInput("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(a.to_dmatrix());
    let mut order: Vec<usize> = (0..a.dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(a.dim, a.dim);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Spectrum {
        lambda_max: eigenvalues[0],
        lambda_min: eigenvalues[a.dim - 1],
        eigenvalues,
        eigenvectors,
    })
}

/// Matrix exponential through the eigendecomposition `V e^Λ Vᵀ`.
pub fn expm_sym(a: &SymMatrix) -> Result<SymMatrix> {
    if a.is_diagonal() {
        let diag: Vec<f64> = a.diagonal().into_iter().map(f64::exp).collect();
        return Ok(SymMatrix::from_diag(&diag));
    }
    Ok(eig_sym(a)?.reconstruct_with(f64::exp))
}

/// `Tr exp(tA)` together with its logarithm.
///
/// `value` overflows to `+inf` once `t λ` exceeds the double range, while
/// `log_value` is always computed by a shifted log-sum-exp and stays finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceExp {
    pub value: f64,
    pub log_value: f64,
}

pub fn trace_exp(t: f64, a: &SymMatrix) -> Result<TraceExp> {
    if !t.is_finite() {
        return Err(invalid(format!("t must be finite, got {t}")));
    }
    if t == 0.0 {
        let d = a.dim as f64;
        return Ok(TraceExp { value: d, log_value: d.ln() });
    }
    let eigenvalues = if a.is_diagonal() { a.diagonal() } else { eig_sym(a)?.eigenvalues };
    Ok(trace_exp_from_eigenvalues(t, &eigenvalues))
}

pub(crate) fn trace_exp_from_eigenvalues(t: f64, eigenvalues: &[f64]) -> TraceExp {
    let scaled: Vec<f64> = eigenvalues.iter().map(|&l| t * l).collect();
    let top = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: f64 = scaled.iter().map(|&s| (s - top).exp()).sum();
    let log_value = top + shifted.ln();
    let value = if top > LOG_DOMAIN_THRESHOLD {
        log_value.exp()
    } else {
        scaled.iter().map(|s| s.exp()).sum()
    };
    TraceExp { value, log_value }
}

/// Schatten `p`-norm: the `ℓ^p` norm of the eigenvalue vector. `p = ∞` gives
/// the spectral radius.
pub fn schatten_norm(a: &SymMatrix, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid(format!("Schatten exponent must be >= 1, got {p}")));
    }
    let eigenvalues = if a.is_diagonal() { a.diagonal() } else { eig_sym(a)?.eigenvalues };
    Ok(lp_norm(&eigenvalues, p))
}

fn lp_norm(values: &[f64], p: f64) -> f64 {
    let top = values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if p.is_infinite() || top == 0.0 {
        return top;
    }
    let s: f64 = values.iter().map(|x| (x.abs() / top).powf(p)).sum();
    top * s.powf(1.0 / p)
}

/// Both sides of an inequality `lhs <= rhs` and whether it holds within tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn relative(lhs: f64, rhs: f64, degenerate: bool) -> Self {
        let tol = if degenerate { ZERO_TOL } else { REL_TOL * (1.0 + rhs.abs()) };
        Self { lhs, rhs, holds: lhs <= rhs + tol }
    }
}

/// `Tr e^{A+B} <= Tr(e^A e^B)`.
pub fn check_golden_thompson(a: &SymMatrix, b: &SymMatrix) -> Result<InequalityCheck> {
    a.check_dim(b)?;
    let lhs = expm_sym(&a.add(b)?)?.trace();
    let rhs = expm_sym(a)?.trace_product(&expm_sym(b)?)?;
    Ok(InequalityCheck::relative(lhs, rhs, false))
}

/// Non-commutative Hölder: `|Tr(AB)| <= ‖A‖_p ‖B‖_q` with `1/p + 1/q = 1`.
pub fn check_trace_holder(a: &SymMatrix, b: &SymMatrix, p: f64) -> Result<InequalityCheck> {
    a.check_dim(b)?;
    if p.is_nan() || p <= 1.0 {
        return Err(invalid(format!("Hölder exponent must exceed 1, got {p}")));
    }
    let q = if p.is_infinite() { 1.0 } else { p / (p - 1.0) };
    let lhs = a.trace_product(b)?.abs();
    let rhs = schatten_norm(a, p)? * schatten_norm(b, q)?;
    Ok(InequalityCheck::relative(lhs, rhs, a.is_zero() && b.is_zero()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylBound {
    pub lambda_max_of_sum: f64,
    pub sum_of_lambda_max: f64,
}

impl WeylBound {
    pub fn holds(&self) -> bool {
        self.lambda_max_of_sum <= self.sum_of_lambda_max + REL_TOL * (1.0 + self.sum_of_lambda_max.abs())
    }
}

/// Both sides of `λ_max(Σ A_i) <= Σ λ_max(A_i)`.
pub fn weyl_lambda_max_bound(list: &[SymMatrix]) -> Result<WeylBound> {
    let first = list.first().ok_or_else(|| invalid("Weyl bound needs a nonempty list"))?;
    let mut sum = SymMatrix::zeros(first.dim);
    let mut sum_of_lambda_max = 0.0;
    for m in list {
        first.check_dim(m)?;
        sum.add_assign(m);
        sum_of_lambda_max += m.lambda_max();
    }
    Ok(WeylBound { lambda_max_of_sum: sum.lambda_max(), sum_of_lambda_max })
}

/// Largest absolute row sum, which dominates the spectral radius.
pub fn gerschgorin_bound(a: &SymMatrix) -> f64 {
    (0..a.dim)
        .map(|k| (0..a.dim).map(|l| a.get(k, l).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap() -> SymMatrix {
        SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn eig_examples() {
        let s = eig_sym(&SymMatrix::identity(2)).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0]);
        let s = eig_sym(&SymMatrix::from_diag(&[3.0, -1.0])).unwrap();
        assert_eq!((s.lambda_max, s.lambda_min), (3.0, -1.0));
        let s = eig_sym(&swap()).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(SymMatrix::new(0, vec![]).is_err());
        assert!(SymMatrix::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(SymMatrix::new(2, vec![0.0, 1.0, 1.1, 0.0]).is_err());
        assert!(SymMatrix::new(1, vec![f64::NAN]).is_err());
        let m = SymMatrix::new(2, vec![0.0, 1.0, 1.0 + 1e-13, 0.0]).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn json_round_trip_uses_flat_layout() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, -3.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"dim":2,"entries":[1.0,2.0,2.0,-3.0]}"#);
        let back: SymMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<SymMatrix>(r#"{"dim":2,"entries":[0,1,5,0]}"#).is_err());
    }

    #[test]
    fn expm_examples() {
        assert_eq!(expm_sym(&SymMatrix::zeros(3)).unwrap(), SymMatrix::identity(3));
        let e = expm_sym(&SymMatrix::from_diag(&[2f64.ln(), 0.0])).unwrap();
        assert!((e.get(0, 0) - 2.0).abs() < 1e-15);
        assert_eq!(e.get(1, 1), 1.0);
        let e = expm_sym(&swap()).unwrap();
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        for (i, j, want) in [(0, 0, ch), (0, 1, sh), (1, 0, sh), (1, 1, ch)] {
            assert!((e.get(i, j) - want).abs() < 1e-13, "({i},{j})");
        }
    }

    #[test]
    fn trace_exp_examples() {
        let a = SymMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, -2.0]]).unwrap();
        assert_eq!(trace_exp(0.0, &a).unwrap().value, 2.0);
        assert_eq!(trace_exp(1.0, &SymMatrix::zeros(2)).unwrap().value, 2.0);
        let v = trace_exp(1.0, &SymMatrix::from_diag(&[1.0, -1.0])).unwrap().value;
        assert!((v - (1f64.exp() + (-1f64).exp())).abs() < 1e-14);
        assert!((v - 3.0862).abs() < 1e-4);
        assert!(trace_exp(f64::INFINITY, &a).is_err());
    }

    #[test]
    fn trace_exp_log_domain_stays_finite() {
        let a = SymMatrix::from_diag(&[1000.0, 999.0]);
        let r = trace_exp(1.0, &a).unwrap();
        assert!(r.value.is_infinite());
        let want = 1000.0 + (1.0 + (-1f64).exp()).ln();
        assert!((r.log_value - want).abs() < 1e-12);
    }

    #[test]
    fn schatten_examples() {
        assert!((schatten_norm(&SymMatrix::identity(3), 2.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(schatten_norm(&SymMatrix::from_diag(&[3.0, -4.0]), f64::INFINITY).unwrap(), 4.0);
        assert!((schatten_norm(&SymMatrix::from_diag(&[1.0, -1.0]), 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(schatten_norm(&SymMatrix::identity(2), 0.5).is_err());
    }

    #[test]
    fn golden_thompson_examples() {
        let a = SymMatrix::from_diag(&[1.0, -0.5]);
        let b = SymMatrix::from_diag(&[0.3, 2.0]);
        let c = check_golden_thompson(&a, &b).unwrap();
        assert!((c.lhs - c.rhs).abs() < 1e-12 && c.holds);
        let c = check_golden_thompson(&swap(), &SymMatrix::from_diag(&[1.0, -1.0])).unwrap();
        assert!(c.holds && c.lhs < c.rhs);
        let z = SymMatrix::zeros(3);
        let c = check_golden_thompson(&z, &z).unwrap();
        assert_eq!((c.lhs, c.rhs), (3.0, 3.0));
        assert!(check_golden_thompson(&z, &SymMatrix::zeros(2)).is_err());
    }

    #[test]
    fn holder_examples() {
        let i = SymMatrix::identity(2);
        let c = check_trace_holder(&i, &i, 2.0).unwrap();
        assert!((c.lhs - 2.0).abs() < 1e-15 && (c.rhs - 2.0).abs() < 1e-14 && c.holds);
        let c = check_trace_holder(&SymMatrix::zeros(2), &swap(), 3.0).unwrap();
        assert!(c.lhs == 0.0 && c.holds);
        assert!(check_trace_holder(&i, &i, 1.0).is_err());
        assert!(check_trace_holder(&i, &SymMatrix::identity(3), 2.0).is_err());
    }

    #[test]
    fn weyl_examples() {
        let w = weyl_lambda_max_bound(&[SymMatrix::from_diag(&[1.0, 0.0]), SymMatrix::from_diag(&[0.0, 1.0])])
            .unwrap();
        assert_eq!((w.lambda_max_of_sum, w.sum_of_lambda_max), (1.0, 2.0));
        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let w = weyl_lambda_max_bound(std::slice::from_ref(&a)).unwrap();
        assert_eq!(w.lambda_max_of_sum, w.sum_of_lambda_max);
        let w = weyl_lambda_max_bound(&[a.clone(), a.scale(-1.0)]).unwrap();
        assert_eq!(w.lambda_max_of_sum, 0.0);
        assert!((w.sum_of_lambda_max - (a.lambda_max() + a.scale(-1.0).lambda_max())).abs() < 1e-15);
        assert!(weyl_lambda_max_bound(&[]).is_err());
    }

    #[test]
    fn gerschgorin_examples() {
        assert_eq!(gerschgorin_bound(&SymMatrix::from_diag(&[2.0, -5.0])), 5.0);
        assert_eq!(gerschgorin_bound(&swap()), 1.0);
        assert_eq!(gerschgorin_bound(&SymMatrix::identity(4)), 1.0);
    }
}
