//! Vector-field problems and the merit function `phi(p) = ½‖X(p)‖²`.

use std::cell::OnceCell;

use nalgebra::DMatrix;

use crate::ambient::Ambient;
use crate::manifold::{
    operator_to_matrix, solve_with, Manifold, MetricAt, TangentBasis, TangentOperator,
};

/// A tangent vector field `X` on a manifold together with its covariant
/// derivative. For gradient fields `X = grad f` and the derivative is
/// `Hess f`.
pub trait FieldProblem {
    type Space: Manifold;

    fn manifold(&self) -> &Self::Space;

    /// `X(p)`, tangent at `p`.
    fn value(&self, p: &Ambient) -> Ambient;

    /// `∇X(p)` as an operator on the tangent space at `p`.
    fn operator<'a>(&'a self, p: &Ambient) -> TangentOperator<'a>;

    /// `f(p)` when the field is a gradient.
    fn objective(&self, _p: &Ambient) -> Option<f64> {
        None
    }

    fn is_gradient_field(&self) -> bool {
        false
    }

    /// Stopping measure evaluated from an already computed field value:
    /// `‖grad f(p)‖` for gradient fields, `‖X(p)‖` otherwise. Both are the
    /// metric norm of `X(p)`.
    fn stationarity(&self, p: &Ambient, value: &Ambient) -> f64 {
        self.manifold().norm(p, value)
    }
}

/// `phi(p) = ½ <X(p), X(p)>_p`
pub fn merit_value<P: FieldProblem + ?Sized>(problem: &P, p: &Ambient) -> f64 {
    let x = problem.value(p);
    0.5 * problem.manifold().inner(p, &x, &x)
}

/// `grad phi(p) = ∇X(p)* X(p)`
pub fn merit_gradient<P: FieldProblem + ?Sized>(problem: &P, p: &Ambient) -> Ambient {
    LocalModel::new(problem, p.clone()).merit_gradient().clone()
}

/// Everything the solvers need at one iterate: the field value, the
/// covariant derivative, and (lazily) its matrix in an orthonormal basis,
/// the Newton direction and the merit gradient.
pub struct LocalModel<'a, P: FieldProblem + ?Sized> {
    problem: &'a P,
    point: Ambient,
    value: Ambient,
    operator: TangentOperator<'a>,
    metric: MetricAt<'a>,
    assembled: OnceCell<(TangentBasis, DMatrix<f64>)>,
    merit_gradient: OnceCell<Ambient>,
}

impl<'a, P: FieldProblem + ?Sized> LocalModel<'a, P> {
    /// Evaluates `X(p)` and `∇X(p)`.
    pub fn new(problem: &'a P, point: Ambient) -> Self {
        let value = problem.value(&point);
        Self::with_value(problem, point, value)
    }

    /// Reuses an already computed `X(p)`.
    pub fn with_value(problem: &'a P, point: Ambient, value: Ambient) -> Self {
        let operator = problem.operator(&point);
        let metric = problem.manifold().metric_at(&point);
        Self {
            problem,
            point,
            value,
            operator,
            metric,
            assembled: OnceCell::new(),
            merit_gradient: OnceCell::new(),
        }
    }

    pub fn point(&self) -> &Ambient {
        &self.point
    }

    pub fn value(&self) -> &Ambient {
        &self.value
    }

    pub fn operator(&self) -> &TangentOperator<'a> {
        &self.operator
    }

    pub fn into_point(self) -> Ambient {
        self.point
    }

    /// `(p, X(p))`
    pub fn into_parts(self) -> (Ambient, Ambient) {
        (self.point, self.value)
    }

    fn space(&self) -> &P::Space {
        self.problem.manifold()
    }

    pub fn inner(&self, u: &Ambient, v: &Ambient) -> f64 {
        (self.metric)(u, v)
    }

    pub fn norm(&self, v: &Ambient) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    pub fn merit(&self) -> f64 {
        0.5 * self.inner(&self.value, &self.value)
    }

    pub fn stationarity(&self) -> f64 {
        self.problem.stationarity(&self.point, &self.value)
    }

    fn assembled(&self) -> &(TangentBasis, DMatrix<f64>) {
        self.assembled.get_or_init(|| {
            let basis = self.space().tangent_basis(&self.point);
            let m = operator_to_matrix(self.space(), &self.operator, &basis)
                .expect("basis and operator share the base point");
            (basis, m)
        })
    }

    /// Solution of `X(p) + ∇X(p) v = 0`, or `None` when the system is
    /// numerically singular.
    pub fn newton_direction(&self) -> Option<Ambient> {
        let assembled = if self.operator.has_inverse() {
            None
        } else {
            let (b, m) = self.assembled();
            Some((b, m))
        };
        solve_with(self.space(), &self.operator, &self.value, assembled)
    }

    /// `∇X(p)* X(p)`; the adjoint is the transpose of the assembled matrix
    /// unless the operator is known to be self-adjoint.
    pub fn merit_gradient(&self) -> &Ambient {
        self.merit_gradient.get_or_init(|| {
            if self.operator.is_self_adjoint() {
                self.operator.apply(&self.value)
            } else {
                let (basis, m) = self.assembled();
                let coords = self.space().coordinates(basis, &self.value);
                basis.combine(&(m.transpose() * coords))
            }
        })
    }
}
