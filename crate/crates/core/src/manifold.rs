//! Manifold-agnostic geometry: the [`Manifold`] trait, orthonormal tangent
//! bases, tangent-space linear operators and the Newton-system solve.
//!
//! Linear algebra on a tangent space goes through coordinates in an explicit
//! orthonormal basis. An operator is assembled as the matrix
//! `M[i][j] = <b_i, op(b_j)>`, its adjoint is the transpose of that matrix,
//! and Newton systems are solved by dense LU with partial pivoting.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::ambient::Ambient;
use crate::error::{CoreError, RetractionError};

/// See [`Manifold::metric_at`].
pub type MetricAt<'a> = Box<dyn Fn(&Ambient, &Ambient) -> f64 + 'a>;

/// See [`Manifold::retraction_curve`].
pub type RetractionCurve<'a> = Box<dyn Fn(f64) -> Result<Ambient, RetractionError> + 'a>;

/// Membership and tangency tolerance used by [`Manifold::check_point`] and
/// [`Manifold::check_tangent`].
pub const GEOMETRY_TOL: f64 = 1e-10;

/// Relative residual below which a tangent basis candidate is always
/// dropped.
pub const BASIS_DROP_TOL: f64 = 1e-12;
/// Relative residual below which the first basis sweep skips a candidate.
pub const BASIS_KEEP_TOL: f64 = 1e-6;

/// Relative pivot threshold below which a Newton system is declared singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Relative residual above which a Newton solve is rejected.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// A Riemannian manifold embedded in a product of matrix spaces.
pub trait Manifold {
    /// Retractions available on this manifold.
    type Retraction: Copy + PartialEq + fmt::Debug + fmt::Display + 'static;

    /// Intrinsic dimension.
    fn dim(&self) -> usize;

    /// Distance of `p` from satisfying the membership constraints.
    fn membership_residual(&self, p: &Ambient) -> f64;

    /// Distance of `v` from the tangent space at `p`.
    fn tangency_residual(&self, p: &Ambient, v: &Ambient) -> f64;

    /// Orthogonal (w.r.t. the ambient Frobenius product) projection onto the
    /// tangent space at `p`.
    fn project(&self, p: &Ambient, w: &Ambient) -> Ambient;

    /// Riemannian metric at `p`. Defaults to the Frobenius product.
    fn inner(&self, _p: &Ambient, u: &Ambient, v: &Ambient) -> f64 {
        u.dot(v)
    }

    fn norm(&self, p: &Ambient, v: &Ambient) -> f64 {
        self.inner(p, v, v).max(0.0).sqrt()
    }

    /// The inner product at a fixed `p`, for repeated use. Implementations
    /// may factor `p` once up front.
    fn metric_at(&self, p: &Ambient) -> MetricAt<'_> {
        let p = p.clone();
        Box::new(move |u, v| self.inner(&p, u, v))
    }

    fn retractions(&self) -> Vec<Self::Retraction>;

    fn retract(
        &self,
        kind: Self::Retraction,
        p: &Ambient,
        v: &Ambient,
    ) -> Result<Ambient, RetractionError>;

    /// `t ↦ R_p(t v)`, for line searches that evaluate many step lengths
    /// along one direction. Implementations may factor `p` once up front.
    fn retraction_curve<'a>(
        &'a self,
        kind: Self::Retraction,
        p: &'a Ambient,
        v: &'a Ambient,
    ) -> RetractionCurve<'a> {
        Box::new(move |t| self.retract(kind, p, &v.scale(t)))
    }

    /// Orthonormal basis of the tangent space at `p`.
    ///
    /// The default projects the canonical ambient basis onto the tangent
    /// space and runs modified Gram–Schmidt (with one reorthogonalisation
    /// pass) under the manifold metric. A candidate is kept when its residual
    /// is not small relative to its projection; a second, more permissive
    /// sweep covers the unlikely case that the first falls short of `dim`.
    fn tangent_basis(&self, p: &Ambient) -> TangentBasis {
        let d = self.dim();
        let mut vectors: Vec<Ambient> = Vec::with_capacity(d);
        for tol in [BASIS_KEEP_TOL, BASIS_DROP_TOL] {
            for k in 0..p.len() {
                if vectors.len() == d {
                    break;
                }
                let mut w = self.project(p, &Ambient::unit_like(p, k));
                let projected = self.norm(p, &w);
                if projected <= BASIS_DROP_TOL {
                    continue;
                }
                for _ in 0..2 {
                    for b in &vectors {
                        let c = self.inner(p, b, &w);
                        w.axpy(-c, b);
                    }
                }
                let nrm = self.norm(p, &w);
                if nrm > tol * projected {
                    vectors.push(w.scale(1.0 / nrm));
                }
            }
        }
        TangentBasis::new(p.clone(), vectors)
    }

    /// Coordinates of a tangent vector in an orthonormal basis.
    fn coordinates(&self, basis: &TangentBasis, w: &Ambient) -> DVector<f64> {
        DVector::from_iterator(
            basis.len(),
            basis.vectors.iter().map(|b| self.inner(&basis.base, b, w)),
        )
    }

    fn check_point(&self, p: &Ambient) -> Result<(), CoreError> {
        let residual = self.membership_residual(p);
        if residual <= GEOMETRY_TOL {
            Ok(())
        } else {
            Err(CoreError::NotOnManifold { residual })
        }
    }

    fn check_tangent(&self, p: &Ambient, v: &Ambient) -> Result<(), CoreError> {
        if !p.same_shape(v) {
            return Err(CoreError::ShapeMismatch);
        }
        let residual = self.tangency_residual(p, v);
        if residual <= GEOMETRY_TOL {
            Ok(())
        } else {
            Err(CoreError::NotTangent { residual })
        }
    }
}

/// An ordered orthonormal basis of a tangent space.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    pub base: Ambient,
    pub vectors: Vec<Ambient>,
    /// Manifold-specific data that lets [`Manifold::coordinates`] avoid one
    /// metric evaluation per basis vector (the inverse square root of the
    /// base point on the SPD cone).
    pub coordinate_map: Option<DMatrix<f64>>,
}

impl TangentBasis {
    pub fn new(base: Ambient, vectors: Vec<Ambient>) -> Self {
        Self {
            base,
            vectors,
            coordinate_map: None,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `sum_i c_i b_i`
    pub fn combine(&self, coords: &DVector<f64>) -> Ambient {
        let mut out = Ambient::zeros_like(&self.base);
        for (c, b) in coords.iter().zip(&self.vectors) {
            out.axpy(*c, b);
        }
        out
    }

    /// Gram matrix of the basis under the manifold metric.
    pub fn gram<M: Manifold + ?Sized>(&self, manifold: &M) -> DMatrix<f64> {
        let d = self.len();
        DMatrix::from_fn(d, d, |i, j| {
            manifold.inner(&self.base, &self.vectors[i], &self.vectors[j])
        })
    }
}

type LinearMap<'a> = Box<dyn Fn(&Ambient) -> Ambient + 'a>;
type InverseMap<'a> = Box<dyn Fn(&Ambient) -> Option<Ambient> + 'a>;

/// A linear map of the tangent space at `base` into itself, such as the
/// covariant derivative of a vector field or a Riemannian Hessian.
pub struct TangentOperator<'a> {
    base: Ambient,
    apply: LinearMap<'a>,
    self_adjoint: bool,
    inverse: Option<InverseMap<'a>>,
}

impl<'a> TangentOperator<'a> {
    pub fn new(base: Ambient, apply: impl Fn(&Ambient) -> Ambient + 'a) -> Self {
        Self {
            base,
            apply: Box::new(apply),
            self_adjoint: false,
            inverse: None,
        }
    }

    /// Marks the operator as self-adjoint under the manifold metric, which
    /// lets the adjoint be applied without assembling a matrix.
    pub fn self_adjoint(mut self) -> Self {
        self.self_adjoint = true;
        self
    }

    /// Attaches a structured solver for `op(v) = rhs`, used instead of the
    /// assembled dense LU. It returns `None` when the operator is singular
    /// and is trusted otherwise: no residual check follows, since evaluating
    /// `op` at an ill-conditioned base point can lose more accuracy than the
    /// structured solve itself.
    pub fn with_inverse(mut self, inverse: impl Fn(&Ambient) -> Option<Ambient> + 'a) -> Self {
        self.inverse = Some(Box::new(inverse));
        self
    }

    pub fn base(&self) -> &Ambient {
        &self.base
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn apply(&self, v: &Ambient) -> Ambient {
        (self.apply)(v)
    }

    fn apply_inverse(&self, rhs: &Ambient) -> Option<Option<Ambient>> {
        self.inverse.as_ref().map(|inv| inv(rhs))
    }
}

impl fmt::Debug for TangentOperator<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TangentOperator")
            .field("self_adjoint", &self.self_adjoint)
            .field("structured_inverse", &self.inverse.is_some())
            .finish_non_exhaustive()
    }
}

/// Metric inner product of two tangent vectors at `p`.
pub fn inner<M: Manifold + ?Sized>(manifold: &M, p: &Ambient, u: &Ambient, v: &Ambient) -> f64 {
    manifold.inner(p, u, v)
}

/// Matrix of `op` in an orthonormal basis: `M[i][j] = <b_i, op(b_j)>`.
pub fn operator_to_matrix<M: Manifold + ?Sized>(
    manifold: &M,
    op: &TangentOperator<'_>,
    basis: &TangentBasis,
) -> Result<DMatrix<f64>, CoreError> {
    if op.base() != &basis.base {
        return Err(CoreError::BaseMismatch);
    }
    let d = basis.len();
    let mut m = DMatrix::zeros(d, d);
    for (j, b) in basis.vectors.iter().enumerate() {
        let col = manifold.coordinates(basis, &op.apply(b));
        m.set_column(j, &col);
    }
    Ok(m)
}

/// Applies the metric adjoint of `op`, realised as the transpose of its
/// matrix in an orthonormal basis.
pub fn apply_adjoint<M: Manifold + ?Sized>(
    manifold: &M,
    op: &TangentOperator<'_>,
    basis: &TangentBasis,
    u: &Ambient,
) -> Result<Ambient, CoreError> {
    let m = operator_to_matrix(manifold, op, basis)?;
    Ok(basis.combine(&(m.transpose() * manifold.coordinates(basis, u))))
}

/// Dense LU solve with partial pivoting; `None` when a pivot falls below
/// `PIVOT_TOL * max|M|`.
pub fn dense_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let d = m.nrows();
    if d == 0 {
        return Some(DVector::zeros(0));
    }
    let scale = m.amax();
    if !(scale.is_finite() && scale > 0.0) {
        return None;
    }
    let lu = m.clone().lu();
    let u = lu.u();
    if (0..d).any(|i| u[(i, i)].abs() < PIVOT_TOL * scale) {
        return None;
    }
    lu.solve(rhs)
}

/// Whether `op(v) = -rhs` holds to the acceptance residual.
fn residual_ok<M: Manifold + ?Sized>(
    manifold: &M,
    op: &TangentOperator<'_>,
    rhs: &Ambient,
    v: &Ambient,
) -> bool {
    let p = op.base();
    let mut r = op.apply(v);
    r.axpy(1.0, rhs);
    let res = manifold.norm(p, &r);
    res.is_finite() && res <= RESIDUAL_TOL * manifold.norm(p, rhs).max(1.0)
}

/// Solves the Newton equation `rhs + op(v) = 0` for `v` in the tangent
/// space at the operator's base point.
///
/// Returns `None` when the system is numerically singular: a tiny LU pivot
/// or a residual above `RESIDUAL_TOL` on the dense path, or a failed
/// structured solve.
pub fn solve_newton_system<M: Manifold + ?Sized>(
    manifold: &M,
    op: &TangentOperator<'_>,
    rhs: &Ambient,
) -> Option<Ambient> {
    solve_with(manifold, op, rhs, None)
}

/// Shared by [`solve_newton_system`] and the solver's local model, which may
/// already hold an assembled matrix.
pub(crate) fn solve_with<M: Manifold + ?Sized>(
    manifold: &M,
    op: &TangentOperator<'_>,
    rhs: &Ambient,
    assembled: Option<(&TangentBasis, &DMatrix<f64>)>,
) -> Option<Ambient> {
    let neg = -rhs;
    if let Some(structured) = op.apply_inverse(&neg) {
        return structured;
    }
    let v = match assembled {
        Some((basis, m)) => basis.combine(&dense_solve(m, &manifold.coordinates(basis, &neg))?),
        None => {
            let basis = manifold.tangent_basis(op.base());
            let m = operator_to_matrix(manifold, op, &basis).ok()?;
            basis.combine(&dense_solve(&m, &manifold.coordinates(&basis, &neg))?)
        }
    };
    residual_ok(manifold, op, rhs, &v).then_some(v)
}
