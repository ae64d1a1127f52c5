//! Stiefel manifolds `St(p, m) = {P ∈ ℝ^{m×p} : PᵀP = I}` with the
//! embedded Frobenius metric, four retractions, the product
//! `St(p, m) × St(p, n)` and the truncated SVD problem on it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::ambient::Ambient;
use crate::error::{CoreError, RetractionError};
use crate::linalg::{compact_qr_tolerant, qf, sym, sym_fn};
use crate::manifold::{Manifold, TangentOperator};
use crate::merit::FieldProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StiefelRetraction {
    /// Geodesic of the embedded metric, via a `2p × 2p` matrix exponential.
    Exp,
    /// Cayley transform of a low-rank skew generator.
    Cayley,
    /// `(P + V)(I + VᵀV)^{-1/2}`
    Polar,
    /// `qf(P + V)`
    Qf,
}

impl StiefelRetraction {
    pub const ALL: [StiefelRetraction; 4] = [
        StiefelRetraction::Exp,
        StiefelRetraction::Cayley,
        StiefelRetraction::Polar,
        StiefelRetraction::Qf,
    ];
}

impl fmt::Display for StiefelRetraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StiefelRetraction::Exp => "exp",
            StiefelRetraction::Cayley => "cayley",
            StiefelRetraction::Polar => "polar",
            StiefelRetraction::Qf => "qf",
        })
    }
}

impl FromStr for StiefelRetraction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp" => Ok(StiefelRetraction::Exp),
            "cayley" => Ok(StiefelRetraction::Cayley),
            "polar" => Ok(StiefelRetraction::Polar),
            "qf" => Ok(StiefelRetraction::Qf),
            other => Err(format!(
                "unknown Stiefel retraction '{other}' (expected exp|cayley|polar|qf)"
            )),
        }
    }
}

/// `W − P sym(PᵀW)`
pub fn project_tangent_stiefel(p: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    w - p * sym(&(p.transpose() * w))
}

pub fn orthonormality_residual(p: &DMatrix<f64>) -> f64 {
    (p.transpose() * p - DMatrix::identity(p.ncols(), p.ncols())).amax()
}

pub fn retract_stiefel(
    kind: StiefelRetraction,
    p: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>, RetractionError> {
    if v.iter().all(|x| *x == 0.0) {
        return Ok(p.clone());
    }
    match kind {
        StiefelRetraction::Exp => Ok(exp_retraction(p, v)),
        StiefelRetraction::Cayley => cayley_retraction(p, v),
        StiefelRetraction::Polar => {
            let k = p.ncols();
            let g = DMatrix::identity(k, k) + v.transpose() * v;
            Ok((p + v) * sym_fn(&g, |x| 1.0 / x.sqrt()))
        }
        StiefelRetraction::Qf => qf(&(p + v)),
    }
}

fn exp_retraction(p: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let k = p.ncols();
    let ptv = p.transpose() * v;
    let normal = v - p * &ptv;
    let (q, r) = compact_qr_tolerant(&normal, Some(p));
    let mut block = DMatrix::zeros(2 * k, 2 * k);
    block.view_mut((0, 0), (k, k)).copy_from(&ptv);
    block.view_mut((0, k), (k, k)).copy_from(&(-r.transpose()));
    block.view_mut((k, 0), (k, k)).copy_from(&r);
    let e = block.exp();
    let m = e.view((0, 0), (k, k));
    let n = e.view((k, 0), (k, k));
    p * m + q * n
}

fn cayley_retraction(p: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>, RetractionError> {
    let (rows, k) = p.shape();
    // Π_P V with Π_P = I − PPᵀ/2
    let u = v - p * (p.transpose() * v) * 0.5;
    let mut left = DMatrix::zeros(rows, 2 * k);
    left.view_mut((0, 0), (rows, k)).copy_from(&u);
    left.view_mut((0, k), (rows, k)).copy_from(p);
    let mut right = DMatrix::zeros(rows, 2 * k);
    right.view_mut((0, 0), (rows, k)).copy_from(p);
    right.view_mut((0, k), (rows, k)).copy_from(&(-&u));
    let kernel = DMatrix::identity(2 * k, 2 * k) - right.transpose() * &left * 0.5;
    let rhs = right.transpose() * p;
    let solved = kernel
        .lu()
        .solve(&rhs)
        .ok_or(RetractionError::DegenerateFactor)?;
    Ok(p + left * solved)
}

/// A single Stiefel manifold `St(p, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stiefel {
    m: usize,
    p: usize,
}

impl Stiefel {
    pub fn new(m: usize, p: usize) -> Self {
        assert!(p >= 1 && p <= m, "St(p, m) needs 1 <= p <= m");
        Self { m, p }
    }
}

fn stiefel_dim(m: usize, p: usize) -> usize {
    m * p - p * (p + 1) / 2
}

fn tangency(p: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    sym(&(p.transpose() * v)).amax()
}

impl Manifold for Stiefel {
    type Retraction = StiefelRetraction;

    fn dim(&self) -> usize {
        stiefel_dim(self.m, self.p)
    }

    fn membership_residual(&self, p: &Ambient) -> f64 {
        orthonormality_residual(p.block(0))
    }

    fn tangency_residual(&self, p: &Ambient, v: &Ambient) -> f64 {
        tangency(p.block(0), v.block(0))
    }

    fn project(&self, p: &Ambient, w: &Ambient) -> Ambient {
        Ambient::single(project_tangent_stiefel(p.block(0), w.block(0)))
    }

    fn retractions(&self) -> Vec<StiefelRetraction> {
        StiefelRetraction::ALL.to_vec()
    }

    fn retract(
        &self,
        kind: StiefelRetraction,
        p: &Ambient,
        v: &Ambient,
    ) -> Result<Ambient, RetractionError> {
        retract_stiefel(kind, p.block(0), v.block(0)).map(Ambient::single)
    }
}

/// `St(p, m) × St(p, n)` with the sum of the factor metrics. A point is an
/// [`Ambient`] with blocks `[P, Q]`; the same retraction kind acts on both
/// factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StiefelProduct {
    m: usize,
    n: usize,
    p: usize,
}

impl StiefelProduct {
    pub fn new(m: usize, n: usize, p: usize) -> Self {
        assert!(
            p >= 1 && p <= n && p <= m,
            "St(p, m) x St(p, n) needs p <= min(m, n)"
        );
        Self { m, n, p }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.p)
    }
}

impl Manifold for StiefelProduct {
    type Retraction = StiefelRetraction;

    fn dim(&self) -> usize {
        stiefel_dim(self.m, self.p) + stiefel_dim(self.n, self.p)
    }

    fn membership_residual(&self, x: &Ambient) -> f64 {
        orthonormality_residual(x.block(0)).max(orthonormality_residual(x.block(1)))
    }

    fn tangency_residual(&self, x: &Ambient, v: &Ambient) -> f64 {
        tangency(x.block(0), v.block(0)).max(tangency(x.block(1), v.block(1)))
    }

    fn project(&self, x: &Ambient, w: &Ambient) -> Ambient {
        w.map_blocks(|i, b| project_tangent_stiefel(x.block(i), b))
    }

    fn retractions(&self) -> Vec<StiefelRetraction> {
        StiefelRetraction::ALL.to_vec()
    }

    fn retract(
        &self,
        kind: StiefelRetraction,
        x: &Ambient,
        v: &Ambient,
    ) -> Result<Ambient, RetractionError> {
        Ok(Ambient::pair(
            retract_stiefel(kind, x.block(0), v.block(0))?,
            retract_stiefel(kind, x.block(1), v.block(1))?,
        ))
    }
}

/// A point `(P, Q)` of `St(p, m) × St(p, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl ProductPoint {
    pub fn new(p: DMatrix<f64>, q: DMatrix<f64>) -> Self {
        Self { p, q }
    }

    pub fn residual(&self) -> f64 {
        orthonormality_residual(&self.p).max(orthonormality_residual(&self.q))
    }

    pub fn to_ambient(&self) -> Ambient {
        Ambient::pair(self.p.clone(), self.q.clone())
    }

    pub fn from_ambient(x: &Ambient) -> Self {
        Self::new(x.block(0).clone(), x.block(1).clone())
    }
}

/// Truncated SVD: minimise `F(P, Q) = −tr(PᵀAQN)` over `St(p, m) × St(p, n)`
/// with `N = diag(μ₁ > … > μ_p > 0)`.
#[derive(Debug, Clone)]
pub struct TsvdProblem {
    space: StiefelProduct,
    a: DMatrix<f64>,
    weights: DMatrix<f64>,
}

impl TsvdProblem {
    pub fn new(a: DMatrix<f64>, mu: &[f64]) -> Result<Self, CoreError> {
        let (m, n) = a.shape();
        let p = mu.len();
        if p == 0 || p > n || n > m {
            return Err(CoreError::InvalidProblem(format!(
                "need p <= n <= m, got (m, n, p) = ({m}, {n}, {p})"
            )));
        }
        if mu.windows(2).any(|w| w[0] <= w[1]) || mu[p - 1] <= 0.0 {
            return Err(CoreError::InvalidProblem(
                "N must have strictly decreasing positive diagonal".into(),
            ));
        }
        Ok(Self {
            space: StiefelProduct::new(m, n, p),
            a,
            weights: DMatrix::from_diagonal(&DVector::from_column_slice(mu)),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.space.dims()
    }

    pub fn objective_at(&self, x: &ProductPoint) -> f64 {
        -(x.p.transpose() * &self.a * &x.q * &self.weights).trace()
    }

    fn s_terms(
        &self,
        x: &ProductPoint,
    ) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let aqn = &self.a * &x.q * &self.weights;
        let atpn = self.a.transpose() * &x.p * &self.weights;
        let s1 = sym(&(x.p.transpose() * &aqn));
        let s2 = sym(&(x.q.transpose() * &atpn));
        (aqn, atpn, s1, s2)
    }

    /// `X(P, Q) = (P S₁ − AQN, Q S₂ − AᵀPN)` with `S₁ = sym(PᵀAQN)`,
    /// `S₂ = sym(QᵀAᵀPN)`; the Riemannian gradient of `F`.
    pub fn field(&self, x: &ProductPoint) -> (DMatrix<f64>, DMatrix<f64>) {
        let (aqn, atpn, s1, s2) = self.s_terms(x);
        (&x.p * s1 - aqn, &x.q * s2 - atpn)
    }

    /// Riemannian Hessian of `F` applied to `(U, V)`, where `U` perturbs `P`
    /// and `V` perturbs `Q`:
    /// `(Π_P(U S₁ − A V N), Π_Q(V S₂ − Aᵀ U N))`.
    pub fn hessian(
        &self,
        x: &ProductPoint,
        u: &DMatrix<f64>,
        v: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let (_, _, s1, s2) = self.s_terms(x);
        hessian_with(&self.a, &self.weights, x, &s1, &s2, u, v)
    }
}

fn hessian_with(
    a: &DMatrix<f64>,
    weights: &DMatrix<f64>,
    x: &ProductPoint,
    s1: &DMatrix<f64>,
    s2: &DMatrix<f64>,
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let first = u * s1 - a * v * weights;
    let second = v * s2 - a.transpose() * u * weights;
    (
        project_tangent_stiefel(&x.p, &first),
        project_tangent_stiefel(&x.q, &second),
    )
}

impl FieldProblem for TsvdProblem {
    type Space = StiefelProduct;

    fn manifold(&self) -> &StiefelProduct {
        &self.space
    }

    fn value(&self, x: &Ambient) -> Ambient {
        let (vp, vq) = self.field(&ProductPoint::from_ambient(x));
        Ambient::pair(vp, vq)
    }

    fn operator<'a>(&'a self, x: &Ambient) -> TangentOperator<'a> {
        let point = ProductPoint::from_ambient(x);
        let (_, _, s1, s2) = self.s_terms(&point);
        TangentOperator::new(x.clone(), move |d: &Ambient| {
            let (hp, hq) = hessian_with(
                &self.a,
                &self.weights,
                &point,
                &s1,
                &s2,
                d.block(0),
                d.block(1),
            );
            Ambient::pair(hp, hq)
        })
        .self_adjoint()
    }

    fn objective(&self, x: &Ambient) -> Option<f64> {
        Some(self.objective_at(&ProductPoint::from_ambient(x)))
    }

    fn is_gradient_field(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qf;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn e3(i: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(3, 1);
        m[i] = 1.0;
        m
    }

    fn pseudo_random(rows: usize, cols: usize, salt: u64) -> DMatrix<f64> {
        // deterministic filler, not a statistical generator
        DMatrix::from_fn(rows, cols, |i, j| {
            let k = (i * 31 + j * 17) as u64 + salt * 101;
            let x = k as f64;
            (x * x * 0.013_7 + x * 0.754_877_666).sin() * 1.3
        })
    }

    #[test]
    fn projector_examples() {
        let p = qf(&pseudo_random(5, 2, 1)).unwrap();
        assert!(project_tangent_stiefel(&p, &p).amax() < 1e-15);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.5, -1.5, 0.0]);
        let w = &p * &b;
        assert!((project_tangent_stiefel(&p, &w) - &w).amax() < 1e-15);
        let w = pseudo_random(5, 2, 7);
        let t = project_tangent_stiefel(&p, &w);
        assert!(tangency(&p, &t) < 1e-14);
        assert!((project_tangent_stiefel(&p, &t) - &t).amax() < 1e-15);
    }

    #[test]
    fn projector_matches_basis_projection() {
        let st = Stiefel::new(5, 2);
        let p = qf(&pseudo_random(5, 2, 3)).unwrap();
        let x = Ambient::single(p.clone());
        let basis = st.tangent_basis(&x);
        assert_eq!(basis.len(), 7);
        assert!((basis.gram(&st) - DMatrix::identity(7, 7)).amax() < 1e-12);
        let w = Ambient::single(pseudo_random(5, 2, 11));
        let via_basis = basis.combine(&st.coordinates(&basis, &w));
        assert!((via_basis.block(0) - project_tangent_stiefel(&p, w.block(0))).amax() < 1e-10);
    }

    #[test]
    fn st_1_3_is_the_two_sphere() {
        let st = Stiefel::new(3, 1);
        let basis = st.tangent_basis(&Ambient::single(e3(0)));
        assert_eq!(basis.len(), 2);
        assert_eq!(basis.vectors[0].block(0), &e3(1));
        assert_eq!(basis.vectors[1].block(0), &e3(2));
    }

    #[test]
    fn single_column_polar_and_qf_normalise() {
        let expect = (e3(0) + e3(1)) * FRAC_1_SQRT_2;
        for kind in [StiefelRetraction::Polar, StiefelRetraction::Qf] {
            let r = retract_stiefel(kind, &e3(0), &e3(1)).unwrap();
            assert!((r - &expect).amax() < 1e-15, "{kind}");
        }
    }

    #[test]
    fn zero_step_returns_base_point() {
        let p = qf(&pseudo_random(5, 2, 5)).unwrap();
        for kind in StiefelRetraction::ALL {
            assert_eq!(retract_stiefel(kind, &p, &DMatrix::zeros(5, 2)).unwrap(), p);
        }
    }

    #[test]
    fn all_retractions_stay_orthonormal() {
        let p = qf(&pseudo_random(6, 3, 2)).unwrap();
        let v = project_tangent_stiefel(&p, &pseudo_random(6, 3, 9)) * 3.0;
        for kind in StiefelRetraction::ALL {
            let r = retract_stiefel(kind, &p, &v).unwrap();
            assert!(orthonormality_residual(&r) < 1e-10, "{kind}");
        }
    }

    #[test]
    fn exp_handles_purely_rotational_directions() {
        // V = P B with B skew: (I − PPᵀ)V = 0, the QR input is all zeros
        let p = qf(&pseudo_random(5, 2, 4)).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.7, -0.7, 0.0]);
        let v = &p * &b;
        let r = retract_stiefel(StiefelRetraction::Exp, &p, &v).unwrap();
        assert!(orthonormality_residual(&r) < 1e-12);
        assert!((r - &p * b.exp()).amax() < 1e-12);
    }

    #[test]
    fn qf_is_deterministic_and_detects_degeneracy() {
        let p = qf(&pseudo_random(5, 2, 6)).unwrap();
        let v = project_tangent_stiefel(&p, &pseudo_random(5, 2, 8));
        let a = retract_stiefel(StiefelRetraction::Qf, &p, &v).unwrap();
        let b = retract_stiefel(StiefelRetraction::Qf, &p, &v).unwrap();
        assert_eq!(a, b);
        let p = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let v = DMatrix::from_row_slice(2, 1, &[-1.0, 0.0]);
        assert_eq!(
            retract_stiefel(StiefelRetraction::Qf, &p, &v),
            Err(RetractionError::DegenerateFactor)
        );
    }

    fn solution_instance() -> (TsvdProblem, ProductPoint) {
        let p = qf(&pseudo_random(5, 2, 21)).unwrap();
        let q = qf(&pseudo_random(3, 2, 22)).unwrap();
        let mu = [2.0, 1.0];
        let n = DMatrix::from_diagonal(&DVector::from_column_slice(&mu));
        let a = &p * n * q.transpose();
        (TsvdProblem::new(a, &mu).unwrap(), ProductPoint::new(p, q))
    }

    #[test]
    fn field_vanishes_at_constructed_solution() {
        let (prob, star) = solution_instance();
        let (vp, vq) = prob.field(&star);
        assert!(vp.amax() < 1e-14 && vq.amax() < 1e-14);
    }

    #[test]
    fn field_is_tangent() {
        let (prob, _) = solution_instance();
        let x = ProductPoint::new(
            qf(&pseudo_random(5, 2, 31)).unwrap(),
            qf(&pseudo_random(3, 2, 32)).unwrap(),
        );
        let (vp, vq) = prob.field(&x);
        assert!(tangency(&x.p, &vp) < 1e-12 && tangency(&x.q, &vq) < 1e-12);
    }

    #[test]
    fn product_dimension_and_hessian_symmetry() {
        let (prob, _) = solution_instance();
        let x = ProductPoint::new(
            qf(&pseudo_random(5, 2, 41)).unwrap(),
            qf(&pseudo_random(3, 2, 42)).unwrap(),
        )
        .to_ambient();
        let space = prob.manifold();
        let basis = space.tangent_basis(&x);
        assert_eq!(basis.len(), (10 - 3) + (6 - 3));
        assert_eq!(basis.len(), space.dim());
        let m = crate::manifold::operator_to_matrix(space, &prob.operator(&x), &basis).unwrap();
        assert!((&m - m.transpose()).amax() < 1e-9);
    }

    #[test]
    fn newton_at_solution_is_zero() {
        let (prob, star) = solution_instance();
        let x = star.to_ambient();
        let v = crate::manifold::solve_newton_system(
            prob.manifold(),
            &prob.operator(&x),
            &prob.value(&x),
        )
        .expect("Hessian is nonsingular at the minimiser");
        assert!(v.norm() < 1e-13);
    }

    #[test]
    fn rejects_bad_weights() {
        let a = DMatrix::zeros(5, 3);
        assert!(TsvdProblem::new(a.clone(), &[1.0, 2.0]).is_err());
        assert!(TsvdProblem::new(a.clone(), &[1.0, 0.0]).is_err());
        assert!(TsvdProblem::new(a.transpose(), &[2.0, 1.0]).is_err());
    }
}
