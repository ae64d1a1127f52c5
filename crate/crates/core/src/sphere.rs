//! The unit sphere `Sⁿ ⊂ ℝⁿ⁺¹` with the Euclidean metric, its exponential
//! and projective retractions, and two vector fields on it: a
//! nonconservative rotation field and the gradient of the Rayleigh quotient.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::ambient::Ambient;
use crate::error::{CoreError, RetractionError};
use crate::manifold::{Manifold, TangentOperator};
use crate::merit::FieldProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SphereRetraction {
    /// `cos‖v‖ p + sin‖v‖ v/‖v‖`
    Exp,
    /// `(p + v)/‖p + v‖`
    Proj,
}

impl SphereRetraction {
    pub const ALL: [SphereRetraction; 2] = [SphereRetraction::Exp, SphereRetraction::Proj];
}

impl fmt::Display for SphereRetraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SphereRetraction::Exp => "exp",
            SphereRetraction::Proj => "proj",
        })
    }
}

impl FromStr for SphereRetraction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp" => Ok(SphereRetraction::Exp),
            "proj" => Ok(SphereRetraction::Proj),
            other => Err(format!(
                "unknown sphere retraction '{other}' (expected exp|proj)"
            )),
        }
    }
}

/// `(I − ppᵀ) w`
pub fn project_tangent_sphere(p: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    w - p * p.dot(w)
}

pub fn retract_sphere(kind: SphereRetraction, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let t = v.norm();
    if t < 1e-14 {
        return p.clone();
    }
    match kind {
        SphereRetraction::Exp => p * t.cos() + v * (t.sin() / t),
        SphereRetraction::Proj => {
            let w = p + v;
            let n = w.norm();
            w / n
        }
    }
}

/// `Sⁿ` embedded in `ℝⁿ⁺¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sphere {
    n: usize,
}

impl Sphere {
    /// The sphere of intrinsic dimension `n`.
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn ambient_dim(&self) -> usize {
        self.n + 1
    }

    pub fn point(v: DVector<f64>) -> Ambient {
        Ambient::from_vector(v)
    }
}

impl Manifold for Sphere {
    type Retraction = SphereRetraction;

    fn dim(&self) -> usize {
        self.n
    }

    fn membership_residual(&self, p: &Ambient) -> f64 {
        (p.as_vector().norm() - 1.0).abs()
    }

    fn tangency_residual(&self, p: &Ambient, v: &Ambient) -> f64 {
        p.dot(v).abs()
    }

    fn project(&self, p: &Ambient, w: &Ambient) -> Ambient {
        Ambient::from_vector(project_tangent_sphere(&p.as_vector(), &w.as_vector()))
    }

    fn retractions(&self) -> Vec<SphereRetraction> {
        SphereRetraction::ALL.to_vec()
    }

    fn retract(
        &self,
        kind: SphereRetraction,
        p: &Ambient,
        v: &Ambient,
    ) -> Result<Ambient, RetractionError> {
        Ok(Ambient::from_vector(retract_sphere(
            kind,
            &p.as_vector(),
            &v.as_vector(),
        )))
    }
}

fn check_unit(p: &DVector<f64>, what: &str) -> Result<(), CoreError> {
    if (p.norm() - 1.0).abs() > 1e-12 {
        return Err(CoreError::InvalidProblem(format!(
            "{what} must have unit norm"
        )));
    }
    Ok(())
}

/// `X(p) = Q(p − p̄) − <p, Q(p − p̄)> p` with `Q` skew-symmetric; `p̄` is a
/// singularity and, `Q` being nonsymmetric, `X` is not a gradient.
#[derive(Debug, Clone)]
pub struct SphereProblemNC {
    sphere: Sphere,
    q: DMatrix<f64>,
    pbar: DVector<f64>,
}

impl SphereProblemNC {
    pub fn new(q: DMatrix<f64>, pbar: DVector<f64>) -> Result<Self, CoreError> {
        if !q.is_square() || q.nrows() != pbar.len() || pbar.len() < 2 {
            return Err(CoreError::ShapeMismatch);
        }
        if (&q + q.transpose()).amax() > 1e-12 {
            return Err(CoreError::InvalidProblem("Q must be skew-symmetric".into()));
        }
        check_unit(&pbar, "p̄")?;
        Ok(Self {
            sphere: Sphere::new(pbar.len() - 1),
            q,
            pbar,
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn pbar(&self) -> &DVector<f64> {
        &self.pbar
    }

    pub fn field(&self, p: &DVector<f64>) -> DVector<f64> {
        project_tangent_sphere(p, &(&self.q * (p - &self.pbar)))
    }

    /// `∇X(p) v = (I − ppᵀ) Q v − <p, Q(p − p̄)> v`
    pub fn covariant_derivative(&self, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let shift = p.dot(&(&self.q * (p - &self.pbar)));
        project_tangent_sphere(p, &(&self.q * v)) - v * shift
    }
}

impl FieldProblem for SphereProblemNC {
    type Space = Sphere;

    fn manifold(&self) -> &Sphere {
        &self.sphere
    }

    fn value(&self, p: &Ambient) -> Ambient {
        Ambient::from_vector(self.field(&p.as_vector()))
    }

    fn operator<'a>(&'a self, p: &Ambient) -> TangentOperator<'a> {
        let pv = p.as_vector();
        let shift = pv.dot(&(&self.q * (&pv - &self.pbar)));
        TangentOperator::new(p.clone(), move |v: &Ambient| {
            let v = v.as_vector();
            Ambient::from_vector(project_tangent_sphere(&pv, &(&self.q * &v)) - v * shift)
        })
    }
}

/// Rayleigh quotient `f(p) = pᵀAp` with `A` symmetric.
#[derive(Debug, Clone)]
pub struct SphereProblemRayleigh {
    sphere: Sphere,
    a: DMatrix<f64>,
}

impl SphereProblemRayleigh {
    pub fn new(a: DMatrix<f64>) -> Result<Self, CoreError> {
        if !a.is_square() || a.nrows() < 2 {
            return Err(CoreError::ShapeMismatch);
        }
        if (&a - a.transpose()).amax() > 1e-12 {
            return Err(CoreError::InvalidProblem("A must be symmetric".into()));
        }
        Ok(Self {
            sphere: Sphere::new(a.nrows() - 1),
            a,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn value_at(&self, p: &DVector<f64>) -> f64 {
        p.dot(&(&self.a * p))
    }

    /// `grad f(p) = 2 (I − ppᵀ) A p`
    pub fn grad(&self, p: &DVector<f64>) -> DVector<f64> {
        project_tangent_sphere(p, &(&self.a * p)) * 2.0
    }

    /// `Hess f(p) v = 2 (I − ppᵀ) A v − 2 (pᵀAp) v`
    pub fn hess(&self, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let f = self.value_at(p);
        project_tangent_sphere(p, &(&self.a * v)) * 2.0 - v * (2.0 * f)
    }
}

impl FieldProblem for SphereProblemRayleigh {
    type Space = Sphere;

    fn manifold(&self) -> &Sphere {
        &self.sphere
    }

    fn value(&self, p: &Ambient) -> Ambient {
        Ambient::from_vector(self.grad(&p.as_vector()))
    }

    fn operator<'a>(&'a self, p: &Ambient) -> TangentOperator<'a> {
        let pv = p.as_vector();
        let f = self.value_at(&pv);
        TangentOperator::new(p.clone(), move |v: &Ambient| {
            let v = v.as_vector();
            Ambient::from_vector(project_tangent_sphere(&pv, &(&self.a * &v)) * 2.0 - v * (2.0 * f))
        })
        .self_adjoint()
    }

    fn objective(&self, p: &Ambient) -> Option<f64> {
        Some(self.value_at(&p.as_vector()))
    }

    fn is_gradient_field(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{operator_to_matrix, solve_newton_system};
    use crate::merit::{merit_gradient, merit_value};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn projector_examples() {
        let e1 = e(3, 0);
        assert_eq!(project_tangent_sphere(&e1, &e1).norm(), 0.0);
        assert_eq!(project_tangent_sphere(&e1, &e(3, 1)), e(3, 1));
        let p = DVector::from_vec(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
        let w = project_tangent_sphere(&p, &e1);
        assert!(close(&w, &DVector::from_vec(vec![0.5, -0.5, 0.0]), 1e-15));
        assert!(close(&project_tangent_sphere(&p, &w), &w, 1e-15));
    }

    #[test]
    fn retraction_examples() {
        let e1 = e(3, 0);
        let r = retract_sphere(SphereRetraction::Exp, &e1, &(e(3, 1) * FRAC_PI_2));
        assert!(close(&r, &e(3, 1), 1e-15));
        let r = retract_sphere(SphereRetraction::Proj, &e1, &e(3, 1));
        let expect = (e(3, 0) + e(3, 1)) * FRAC_1_SQRT_2;
        assert!(close(&r, &expect, 1e-15));
        for kind in SphereRetraction::ALL {
            assert_eq!(retract_sphere(kind, &e1, &DVector::zeros(3)), e1);
        }
    }

    #[test]
    fn metric_and_basis() {
        let s = Sphere::new(2);
        let p = Sphere::point(e(3, 0));
        let u = Sphere::point(e(3, 1));
        assert_eq!(s.inner(&p, &u, &u), 1.0);
        assert_eq!(s.inner(&p, &u, &Ambient::zeros_like(&u)), 0.0);
        let basis = s.tangent_basis(&p);
        assert_eq!(basis.len(), 2);
        assert!(close(&basis.vectors[0].as_vector(), &e(3, 1), 0.0));
        assert!(close(&basis.vectors[1].as_vector(), &e(3, 2), 0.0));
    }

    fn nc_instance() -> SphereProblemNC {
        let q = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        SphereProblemNC::new(q, e(3, 2)).unwrap()
    }

    #[test]
    fn nonconservative_field_examples() {
        let prob = nc_instance();
        assert_eq!(prob.field(&e(3, 2)).norm(), 0.0);
        let x = prob.field(&e(3, 0));
        assert!(close(&x, &DVector::from_vec(vec![0.0, -1.0, 0.0]), 0.0));
        assert_eq!(e(3, 0).dot(&x), 0.0);
        let d = prob.covariant_derivative(&e(3, 0), &e(3, 1));
        assert_eq!(d.norm(), 0.0);
        assert_eq!(
            prob.covariant_derivative(&e(3, 0), &DVector::zeros(3))
                .norm(),
            0.0
        );
        // at p̄ the second term vanishes
        let v = e(3, 0);
        let at_bar = prob.covariant_derivative(&e(3, 2), &v);
        assert!(close(
            &at_bar,
            &project_tangent_sphere(&e(3, 2), &(prob.q() * &v)),
            0.0
        ));
    }

    #[test]
    fn nonconservative_operator_is_not_self_adjoint() {
        let prob = nc_instance();
        let p = Sphere::point(DVector::from_vec(vec![0.6, 0.0, 0.8]));
        let op = prob.operator(&p);
        let basis = prob.manifold().tangent_basis(&p);
        let m = operator_to_matrix(prob.manifold(), &op, &basis).unwrap();
        assert!((&m - m.transpose()).amax() > 1e-3);
    }

    #[test]
    fn rayleigh_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let prob = SphereProblemRayleigh::new(a).unwrap();
        assert_eq!(prob.grad(&e(3, 0)).norm(), 0.0);
        assert!(close(&prob.hess(&e(3, 0), &e(3, 1)), &(e(3, 1) * 2.0), 0.0));
        assert_eq!(prob.hess(&e(3, 0), &DVector::zeros(3)).norm(), 0.0);

        let a2 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let prob2 = SphereProblemRayleigh::new(a2).unwrap();
        let p = DVector::from_vec(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        let g = prob2.grad(&p);
        assert!(close(
            &g,
            &DVector::from_vec(vec![-FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
            1e-15
        ));
        assert!(p.dot(&g).abs() < 1e-15);
        assert!((merit_value(&prob2, &Sphere::point(p)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rayleigh_hessian_matrix_at_eigenvector() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 5.0]));
        let prob = SphereProblemRayleigh::new(a).unwrap();
        let p = Sphere::point(e(3, 0));
        let basis = prob.manifold().tangent_basis(&p);
        let m = operator_to_matrix(prob.manifold(), &prob.operator(&p), &basis).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 8.0]));
        assert!((m - expect).amax() < 1e-15);
        assert_eq!(merit_gradient(&prob, &p).norm(), 0.0);
        let v = solve_newton_system(prob.manifold(), &prob.operator(&p), &prob.value(&p)).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let q = DMatrix::identity(3, 3);
        assert!(SphereProblemNC::new(q, e(3, 0)).is_err());
        let q = DMatrix::zeros(3, 3);
        assert!(SphereProblemNC::new(q, DVector::from_vec(vec![1.0, 1.0, 0.0])).is_err());
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(SphereProblemRayleigh::new(a).is_err());
    }
}
