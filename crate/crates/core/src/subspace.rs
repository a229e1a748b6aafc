//! Subspace geometry on complex matrices.
//!
//! Orthonormal bases, principal angles and the angle-derived measures used by
//! the scheduling criteria. Channel matrices are `M_R × M_T`; every subspace a
//! criterion compares lives in the transmit space, so "the subspace of a
//! channel" here always means its row space, `range(H^H)`.
//!
//! Principal angles come from the SVD of `U^H V`. Small angles are recovered
//! from the sines (SVD of the residual `U - V V^H U`) because `acos` loses
//! about half the digits near zero.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative singular-value threshold for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthonormal columns spanning a subspace of `C^ambient_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    columns: CMatrix,
}

impl OrthonormalBasis {
    /// Wraps `columns` after checking `columns^H columns = I`.
    pub fn from_columns(columns: CMatrix) -> Result<Self> {
        check_finite(&columns)?;
        let gram = columns.adjoint() * &columns;
        let err = (gram - CMatrix::identity(columns.ncols(), columns.ncols())).norm();
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "columns are not orthonormal (error {err:e})"
            )));
        }
        Ok(Self { columns })
    }

    pub fn identity(ambient_dim: usize) -> Self {
        Self {
            columns: CMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &CMatrix {
        &self.columns
    }

    /// Orthogonal projector `Q Q^H`.
    pub fn projector(&self) -> CMatrix {
        &self.columns * self.columns.adjoint()
    }

    /// Basis of the orthogonal complement, `None` when this basis spans everything.
    pub fn complement(&self) -> Option<OrthonormalBasis> {
        let n = self.ambient_dim();
        let d = n - self.dim();
        if d == 0 {
            return None;
        }
        let residual = CMatrix::identity(n, n) - self.projector();
        let eig = residual.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        Some(Self {
            columns: eig.eigenvectors.select_columns(&order[..d]),
        })
    }
}

/// Sorted principal angles between two subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngleSet {
    angles: Vec<f64>,
    dims: (usize, usize),
}

impl PrincipalAngleSet {
    /// Angles in radians, ascending, each in `[0, π/2]`.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Dimensions `(p, q)` of the two subspaces, in argument order.
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn smallest(&self) -> f64 {
        self.angles.first().copied().unwrap_or(std::f64::consts::FRAC_PI_2)
    }

    pub fn largest(&self) -> f64 {
        self.angles.last().copied().unwrap_or(std::f64::consts::FRAC_PI_2)
    }

    pub fn cos2_product(&self) -> f64 {
        self.angles.iter().map(|a| a.cos().powi(2)).product()
    }

    pub fn sin2_product(&self) -> f64 {
        self.angles.iter().map(|a| a.sin().powi(2)).product()
    }

    pub fn cos2_sum(&self) -> f64 {
        self.angles.iter().map(|a| a.cos().powi(2)).sum()
    }

    pub fn sin2_sum(&self) -> f64 {
        self.angles.iter().map(|a| a.sin().powi(2)).sum()
    }
}

pub(crate) fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn sorted_singular_values(m: CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis of `range(m)`; the dimension is the number of singular
/// values above `tol × σ_max`. Pass `m^H` for a row space.
pub fn orthonormal_range_basis(m: &CMatrix, tol: f64) -> Result<OrthonormalBasis> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("rank tolerance must be > 0, got {tol}")));
    }
    check_finite(m)?;
    if m.is_empty() {
        return Err(Error::ZeroSubspace);
    }
    let svd = m.clone().svd(true, false);
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::ZeroSubspace);
    }
    let mut keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > tol * smax).collect();
    keep.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u = svd.u.expect("left singular vectors requested");
    Ok(OrthonormalBasis {
        columns: u.select_columns(&keep),
    })
}

/// Orthonormal basis of the row space `range(h^H)`.
pub fn row_space_basis(h: &CMatrix) -> Result<OrthonormalBasis> {
    orthonormal_range_basis(&h.adjoint(), DEFAULT_RANK_TOL)
}

/// Numerical rank at [`DEFAULT_RANK_TOL`].
pub fn numerical_rank(m: &CMatrix) -> usize {
    match orthonormal_range_basis(m, DEFAULT_RANK_TOL) {
        Ok(b) => b.dim(),
        Err(_) => 0,
    }
}

/// Orthonormal basis of `{x : m x = 0}` in `C^ambient_dim`.
///
/// A matrix with no rows constrains nothing and yields the identity basis.
pub fn null_space_basis(m: &CMatrix, ambient_dim: usize, tol: f64) -> Result<OrthonormalBasis> {
    if ambient_dim == 0 {
        return Err(Error::InvalidParameter("ambient dimension must be >= 1".into()));
    }
    if m.nrows() == 0 {
        return Ok(OrthonormalBasis::identity(ambient_dim));
    }
    if m.ncols() != ambient_dim {
        return Err(Error::DimensionMismatch {
            left: m.ncols(),
            right: ambient_dim,
        });
    }
    let rows = match orthonormal_range_basis(&m.adjoint(), tol) {
        Ok(b) => b,
        Err(Error::ZeroSubspace) => return Ok(OrthonormalBasis::identity(ambient_dim)),
        Err(e) => return Err(e),
    };
    rows.complement()
        .ok_or(Error::EmptyNullSpace { rank: rows.dim() })
}

/// Orthonormal basis of the sum of several subspaces, `None` if there are
/// none. Stacking unit-norm bases keeps the rank decision independent of the
/// channels' gains.
pub fn span_union<'a, I>(bases: I, ambient_dim: usize) -> Result<Option<OrthonormalBasis>>
where
    I: IntoIterator<Item = &'a OrthonormalBasis>,
{
    let parts: Vec<&OrthonormalBasis> = bases.into_iter().collect();
    if parts.is_empty() {
        return Ok(None);
    }
    let total: usize = parts.iter().map(|b| b.dim()).sum();
    let mut stacked = CMatrix::zeros(ambient_dim, total);
    let mut col = 0;
    for b in parts {
        if b.ambient_dim() != ambient_dim {
            return Err(Error::DimensionMismatch {
                left: b.ambient_dim(),
                right: ambient_dim,
            });
        }
        stacked.columns_mut(col, b.dim()).copy_from(b.columns());
        col += b.dim();
    }
    orthonormal_range_basis(&stacked, DEFAULT_RANK_TOL).map(Some)
}

/// Principal angles between `range(u)` and `range(v)`.
pub fn principal_angles(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<PrincipalAngleSet> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(Error::DimensionMismatch {
            left: u.ambient_dim(),
            right: v.ambient_dim(),
        });
    }
    let (small, large) = if u.dim() <= v.dim() { (u, v) } else { (v, u) };
    let p = small.dim();
    let cross = large.columns.adjoint() * &small.columns;
    let cosines = sorted_singular_values(cross.clone());
    let residual = &small.columns - &large.columns * cross;
    let mut sines = sorted_singular_values(residual);
    sines.reverse();

    let mut angles = (0..p)
        .map(|i| {
            let c = cosines[i].clamp(0.0, 1.0);
            let s = sines[i].clamp(0.0, 1.0);
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect::<Vec<_>>();
    // The two branches can disagree in the last ulp around π/4.
    angles.sort_by(f64::total_cmp);
    Ok(PrincipalAngleSet {
        angles,
        dims: (u.dim(), v.dim()),
    })
}

/// Principal angles of `u` against `v`, padded with π/2 up to `dim(u)`.
///
/// When `dim(u) > dim(v)` the directions of `u` left over after pairing are
/// orthogonal to `v`. Sums over "all `M_R` angles of a user" need them.
pub fn padded_angles(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<PrincipalAngleSet> {
    let mut set = principal_angles(u, v)?;
    while set.angles.len() < u.dim() {
        set.angles.push(std::f64::consts::FRAC_PI_2);
    }
    set.dims = (u.dim(), v.dim());
    Ok(set)
}

/// `cos² ψ`: product of `cos²` over the principal angles between the row
/// spaces of `hk` and `hj`.
pub fn geometrical_angle_cos2(hk: &CMatrix, hj: &CMatrix) -> Result<f64> {
    let a = row_space_basis(hk)?;
    let b = row_space_basis(hj)?;
    Ok(principal_angles(&a, &b)?.cos2_product().clamp(0.0, 1.0))
}

/// `sin² ψ`: product of `sin²` over the same angles.
pub fn geometrical_angle_sin2(hk: &CMatrix, hj: &CMatrix) -> Result<f64> {
    let a = row_space_basis(hk)?;
    let b = row_space_basis(hj)?;
    Ok(principal_angles(&a, &b)?.sin2_product().clamp(0.0, 1.0))
}

/// `det(M M^H)` as the product of squared singular values, which avoids
/// squaring the condition number the way an LU of the Gram matrix does.
/// Zero when `M` has more rows than columns.
pub fn gram_determinant(m: &CMatrix) -> f64 {
    if m.nrows() > m.ncols() {
        return 0.0;
    }
    m.singular_values().iter().map(|x| x * x).product()
}

fn determinant_ratio(small: &CMatrix, large_rows: &CMatrix) -> Result<f64> {
    let cross = small * large_rows.adjoint();
    let num = gram_determinant(&cross);
    let den = gram_determinant(small);
    if !(den > 0.0) {
        return Err(Error::InvalidParameter(
            "smaller channel must have full row rank for the determinant form".into(),
        ));
    }
    Ok(num / den)
}

fn order_by_rank<'a>(hk: &'a CMatrix, hj: &'a CMatrix) -> Result<(&'a CMatrix, &'a CMatrix)> {
    let rk = numerical_rank(hk);
    let rj = numerical_rank(hj);
    if rk == 0 || rj == 0 {
        return Err(Error::ZeroSubspace);
    }
    if hk.ncols() != hj.ncols() {
        return Err(Error::DimensionMismatch {
            left: hk.ncols(),
            right: hj.ncols(),
        });
    }
    Ok(if rk <= rj { (hk, hj) } else { (hj, hk) })
}

/// Determinant form `det(M M^H) / det(H_k H_k^H)` with `M = H_k Q_j`, where
/// the larger channel is replaced by its orthonormalized rows `Q_j^H`.
pub fn geometrical_angle_cos2_determinant(hk: &CMatrix, hj: &CMatrix) -> Result<f64> {
    let (small, large) = order_by_rank(hk, hj)?;
    let rows = row_space_basis(large)?.columns().adjoint();
    determinant_ratio(small, &rows)
}

/// Determinant form evaluated on the raw larger channel. Only equal to the
/// angle product when that channel already has orthonormal rows.
pub fn geometrical_angle_cos2_raw(hk: &CMatrix, hj: &CMatrix) -> Result<f64> {
    let (small, large) = order_by_rank(hk, hj)?;
    determinant_ratio(small, large)
}

pub fn chordal_distance(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<f64> {
    Ok(principal_angles(u, v)?.sin2_sum().sqrt())
}

/// `|tr(A B^H)| / (‖A‖_F ‖B‖_F)`.
pub fn collinearity(ma: &CMatrix, mb: &CMatrix) -> Result<f64> {
    if ma.shape() != mb.shape() {
        return Err(Error::ShapeMismatch {
            left: ma.shape(),
            right: mb.shape(),
        });
    }
    check_finite(ma)?;
    check_finite(mb)?;
    let na = ma.norm();
    let nb = mb.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroSubspace);
    }
    let trace: Complex64 = ma.iter().zip(mb.iter()).map(|(a, b)| a * b.conj()).sum();
    Ok((trace.norm() / (na * nb)).min(1.0))
}

/// `(P_A P_B P_A)^κ`, the alternating-projection approximation of the
/// projector onto `range(A) ∩ range(B)`.
pub fn subspace_intersection_projector(
    a: &OrthonormalBasis,
    b: &OrthonormalBasis,
    kappa: u32,
) -> Result<CMatrix> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch {
            left: a.ambient_dim(),
            right: b.ambient_dim(),
        });
    }
    if kappa == 0 {
        return Err(Error::InvalidParameter("kappa must be >= 1".into()));
    }
    let pa = a.projector();
    let step = &pa * b.projector() * &pa;
    let mut out = step.clone();
    for _ in 1..kappa {
        out = &out * &step;
    }
    Ok(out)
}
