//! The cone of symmetric positive definite matrices with the
//! affine-invariant metric `<U, V>_P = tr(V P⁻¹ U P⁻¹)`, four retractions,
//! and the objectives
//!
//! * `f₁(P) = ln det P + tr P⁻¹`, with `grad f₁ = P − I`,
//! * `f₂(P) = ln det P − tr P`, with `grad f₂ = P − P²`,
//!
//! whose unique critical point is the identity.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::ambient::Ambient;
use crate::error::RetractionError;
use crate::linalg::{sym, sym_fn};
use crate::manifold::{
    Manifold, MetricAt, RetractionCurve, TangentBasis, TangentOperator, PIVOT_TOL,
};
use crate::merit::FieldProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpdRetraction {
    /// `P^{1/2} exp(P^{-1/2} V P^{-1/2}) P^{1/2}`
    ExpAffine,
    /// `P exp(P⁻¹V)`
    ExpFactored,
    /// `P + V + ½ V P⁻¹ V`
    SecondOrder,
    /// `P + V`
    FirstOrder,
}

impl SpdRetraction {
    pub const ALL: [SpdRetraction; 4] = [
        SpdRetraction::ExpAffine,
        SpdRetraction::ExpFactored,
        SpdRetraction::SecondOrder,
        SpdRetraction::FirstOrder,
    ];
}

impl fmt::Display for SpdRetraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpdRetraction::ExpAffine => "exp-affine",
            SpdRetraction::ExpFactored => "exp-factored",
            SpdRetraction::SecondOrder => "second-order",
            SpdRetraction::FirstOrder => "first-order",
        })
    }
}

impl FromStr for SpdRetraction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp-affine" => Ok(SpdRetraction::ExpAffine),
            "exp-factored" => Ok(SpdRetraction::ExpFactored),
            "second-order" => Ok(SpdRetraction::SecondOrder),
            "first-order" => Ok(SpdRetraction::FirstOrder),
            other => Err(format!(
                "unknown SPD retraction '{other}' \
                 (expected exp-affine|exp-factored|second-order|first-order)"
            )),
        }
    }
}

/// Lower Cholesky factor `L` of `P = LLᵀ` (upper triangle zeroed), or
/// `None` unless `P` is numerically positive definite. Reads only the lower
/// triangle of `P`.
fn cholesky(p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = p.nrows();
    let mut l = p.clone();
    let a = l.as_mut_slice();
    for j in 0..n {
        // column j -= sum_k L[j,k] L[j.., k]
        let (done, rest) = a.split_at_mut(j * n);
        let col = &mut rest[j..n];
        for k in 0..j {
            let ck = &done[k * n + j..k * n + n];
            let f = ck[0];
            if f != 0.0 {
                col.iter_mut().zip(ck).for_each(|(c, x)| *c -= f * x);
            }
        }
        let d = col[0];
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        let root = d.sqrt();
        col[0] = root;
        col[1..].iter_mut().for_each(|c| *c /= root);
        if col[1..].iter().any(|c| !c.is_finite()) {
            return None;
        }
    }
    l.fill_upper_triangle(0.0, 1);
    Some(l)
}

pub fn retract_spd(
    kind: SpdRetraction,
    p: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>, RetractionError> {
    SpdCurve::new(kind, p, v)?.at(1.0)
}

/// `t ↦ R_P(tV)` with the `P`-dependent factors computed once.
enum SpdCurve<'a> {
    Zero(&'a DMatrix<f64>),
    /// `S exp(t W) S` with `S = P^{1/2}`, `W = S⁻¹VS⁻¹ = U diag(w) Uᵀ`
    ExpAffine {
        root_u: DMatrix<f64>,
        w: DVector<f64>,
    },
    /// `P exp(t P⁻¹V)`
    ExpFactored {
        p: &'a DMatrix<f64>,
        pinv_v: DMatrix<f64>,
    },
    /// `P + tV + ½t² VP⁻¹V`
    SecondOrder {
        p: &'a DMatrix<f64>,
        v: &'a DMatrix<f64>,
        curvature: DMatrix<f64>,
    },
    FirstOrder {
        p: &'a DMatrix<f64>,
        v: &'a DMatrix<f64>,
    },
}

impl<'a> SpdCurve<'a> {
    fn new(
        kind: SpdRetraction,
        p: &'a DMatrix<f64>,
        v: &'a DMatrix<f64>,
    ) -> Result<Self, RetractionError> {
        if v.iter().all(|x| *x == 0.0) {
            return Ok(SpdCurve::Zero(p));
        }
        Ok(match kind {
            SpdRetraction::ExpAffine => {
                let root = sym_fn(p, f64::sqrt);
                let inv_root = sym_fn(p, |x| 1.0 / x.sqrt());
                let eig = SymmetricEigen::new(sym(&(&inv_root * v * &inv_root)));
                SpdCurve::ExpAffine {
                    root_u: root * eig.eigenvectors,
                    w: eig.eigenvalues,
                }
            }
            SpdRetraction::ExpFactored => {
                let pinv = spd_inverse(p).ok_or(RetractionError::Infeasible)?;
                SpdCurve::ExpFactored {
                    p,
                    pinv_v: pinv * v,
                }
            }
            SpdRetraction::SecondOrder => {
                let pinv = spd_inverse(p).ok_or(RetractionError::Infeasible)?;
                SpdCurve::SecondOrder {
                    p,
                    v,
                    curvature: v * (pinv * v) * 0.5,
                }
            }
            SpdRetraction::FirstOrder => SpdCurve::FirstOrder { p, v },
        })
    }

    fn at(&self, t: f64) -> Result<DMatrix<f64>, RetractionError> {
        let out = match self {
            SpdCurve::Zero(p) => return Ok((*p).clone()),
            SpdCurve::ExpAffine { root_u, w } => {
                let scaled = root_u * DMatrix::from_diagonal(&w.map(|x| (t * x).exp()));
                &scaled * root_u.transpose()
            }
            SpdCurve::ExpFactored { p, pinv_v } => *p * (pinv_v * t).exp(),
            SpdCurve::SecondOrder { p, v, curvature } => *p + *v * t + curvature * (t * t),
            SpdCurve::FirstOrder { p, v } => *p + *v * t,
        };
        let out = sym(&out);
        if cholesky(&out).is_none() {
            return Err(RetractionError::Infeasible);
        }
        Ok(out)
    }
}

/// Overwrites `m` with `L⁻¹m` for lower-triangular `L` with nonzero
/// diagonal, by forward substitution on each column.
fn lower_solve_in_place(l: &DMatrix<f64>, m: &mut DMatrix<f64>) {
    let n = l.nrows();
    let ls = l.as_slice();
    for x in m.as_mut_slice().chunks_exact_mut(n.max(1)) {
        for k in 0..n {
            let xk = x[k] / ls[k * n + k];
            x[k] = xk;
            if xk != 0.0 {
                x[k + 1..]
                    .iter_mut()
                    .zip(&ls[k * n + k + 1..(k + 1) * n])
                    .for_each(|(xi, lik)| *xi -= xk * lik);
            }
        }
    }
}

fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let mut inv = DMatrix::identity(l.nrows(), l.nrows());
    lower_solve_in_place(l, &mut inv);
    inv
}

/// `L⁻¹ M L⁻ᵀ` for symmetric `M`.
fn whiten(l: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut half = m.clone();
    lower_solve_in_place(l, &mut half);
    half.transpose_mut();
    lower_solve_in_place(l, &mut half);
    half
}

/// `P⁻¹` through the Cholesky factor, as `L⁻ᵀL⁻¹`.
fn spd_inverse(p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let linv = lower_inverse(&cholesky(p)?);
    Some(sym(&(linv.transpose() * linv)))
}

fn inverse(p: &DMatrix<f64>) -> DMatrix<f64> {
    spd_inverse(p).expect("base point must be positive definite")
}

/// `tr(V P⁻¹ U P⁻¹)`, as the Frobenius product of `L⁻¹UL⁻ᵀ` and `L⁻¹VL⁻ᵀ`
/// with `P = LLᵀ`.
pub fn affine_inner(p: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let l = cholesky(p).expect("base point must be positive definite");
    inner_with_factor(&l, u, v)
}

fn inner_with_factor(l: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let wu = whiten(l, u);
    if std::ptr::eq(u, v) {
        wu.norm_squared()
    } else {
        wu.dot(&whiten(l, v))
    }
}

/// The SPD cone of `n × n` matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpdCone {
    n: usize,
}

impl SpdCone {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn size(&self) -> usize {
        self.n
    }
}

/// Index pairs `(i, j)`, `i <= j`, in basis order.
fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(|j| (0..=j).map(move |i| (i, j)))
}

impl Manifold for SpdCone {
    type Retraction = SpdRetraction;

    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn membership_residual(&self, p: &Ambient) -> f64 {
        let p = p.block(0);
        if cholesky(&sym(p)).is_none() {
            return f64::INFINITY;
        }
        (p - p.transpose()).amax()
    }

    fn tangency_residual(&self, _p: &Ambient, v: &Ambient) -> f64 {
        let v = v.block(0);
        (v - v.transpose()).amax()
    }

    fn project(&self, _p: &Ambient, w: &Ambient) -> Ambient {
        Ambient::single(sym(w.block(0)))
    }

    fn inner(&self, p: &Ambient, u: &Ambient, v: &Ambient) -> f64 {
        affine_inner(p.block(0), u.block(0), v.block(0))
    }

    fn metric_at(&self, p: &Ambient) -> MetricAt<'_> {
        let l = cholesky(p.block(0)).expect("base point must be positive definite");
        Box::new(move |u, v| inner_with_factor(&l, u.block(0), v.block(0)))
    }

    fn retractions(&self) -> Vec<SpdRetraction> {
        SpdRetraction::ALL.to_vec()
    }

    fn retract(
        &self,
        kind: SpdRetraction,
        p: &Ambient,
        v: &Ambient,
    ) -> Result<Ambient, RetractionError> {
        retract_spd(kind, p.block(0), v.block(0)).map(Ambient::single)
    }

    fn retraction_curve<'a>(
        &'a self,
        kind: SpdRetraction,
        p: &'a Ambient,
        v: &'a Ambient,
    ) -> RetractionCurve<'a> {
        match SpdCurve::new(kind, p.block(0), v.block(0)) {
            Ok(curve) => Box::new(move |t| curve.at(t).map(Ambient::single)),
            Err(e) => Box::new(move |_| Err(e)),
        }
    }

    /// `b = P^{1/2} E P^{1/2}` for the Frobenius-orthonormal symmetric units
    /// `E`, which is orthonormal under the affine metric.
    fn tangent_basis(&self, p: &Ambient) -> TangentBasis {
        let n = self.n;
        let root = sym_fn(p.block(0), f64::sqrt);
        let inv_root = sym_fn(p.block(0), |x| 1.0 / x.sqrt());
        let vectors = upper_pairs(n)
            .map(|(i, j)| {
                let b = if i == j {
                    root.column(i) * root.row(i)
                } else {
                    (root.column(i) * root.row(j) + root.column(j) * root.row(i))
                        * std::f64::consts::FRAC_1_SQRT_2
                };
                Ambient::single(b)
            })
            .collect();
        let mut basis = TangentBasis::new(p.clone(), vectors);
        basis.coordinate_map = Some(inv_root);
        basis
    }

    fn coordinates(&self, basis: &TangentBasis, w: &Ambient) -> DVector<f64> {
        let Some(inv_root) = &basis.coordinate_map else {
            return DVector::from_iterator(
                basis.len(),
                basis.vectors.iter().map(|b| self.inner(&basis.base, b, w)),
            );
        };
        let white = inv_root * w.block(0) * inv_root;
        DVector::from_iterator(
            basis.len(),
            upper_pairs(self.n).map(|(i, j)| {
                if i == j {
                    white[(i, i)]
                } else {
                    (white[(i, j)] + white[(j, i)]) * std::f64::consts::FRAC_1_SQRT_2
                }
            }),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpdObjective {
    /// `ln det P + tr P⁻¹`
    F1,
    /// `ln det P − tr P`
    F2,
}

impl fmt::Display for SpdObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpdObjective::F1 => "f1",
            SpdObjective::F2 => "f2",
        })
    }
}

impl FromStr for SpdObjective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f1" => Ok(SpdObjective::F1),
            "f2" => Ok(SpdObjective::F2),
            other => Err(format!("unknown SPD objective '{other}' (expected f1|f2)")),
        }
    }
}

pub fn spd_objective_value(which: SpdObjective, p: &DMatrix<f64>) -> f64 {
    let l = cholesky(p).expect("point must be positive definite");
    let logdet = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    match which {
        SpdObjective::F1 => logdet + inverse(p).trace(),
        SpdObjective::F2 => logdet - p.trace(),
    }
}

/// Riemannian gradient under the affine metric: `P − I` or `P − P²`.
pub fn spd_field(which: SpdObjective, p: &DMatrix<f64>) -> DMatrix<f64> {
    let id = DMatrix::identity(p.nrows(), p.ncols());
    match which {
        SpdObjective::F1 => p - id,
        SpdObjective::F2 => sym(&(p - p * p)),
    }
}

/// Riemannian Hessian: `½(P⁻¹V + VP⁻¹)` for `f₁`, `−½(PV + VP)` for `f₂`.
pub fn spd_newton_operator(
    which: SpdObjective,
    p: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> DMatrix<f64> {
    match which {
        SpdObjective::F1 => {
            let pinv = inverse(p);
            sym(&(&pinv * v))
        }
        SpdObjective::F2 => -sym(&(p * v)),
    }
}

/// Eigenvalue weights `h(λᵢ, λⱼ)` of the Hessian acting on `U E_ij Uᵀ`.
fn hessian_weight(which: SpdObjective, li: f64, lj: f64) -> f64 {
    match which {
        SpdObjective::F1 => 0.5 * (1.0 / li + 1.0 / lj),
        SpdObjective::F2 => -0.5 * (li + lj),
    }
}

/// Minimisation of `f₁` or `f₂` on the SPD cone.
#[derive(Debug, Clone, Copy)]
pub struct SpdProblem {
    cone: SpdCone,
    which: SpdObjective,
}

impl SpdProblem {
    pub fn new(n: usize, which: SpdObjective) -> Self {
        Self {
            cone: SpdCone::new(n),
            which,
        }
    }

    pub fn objective_kind(&self) -> SpdObjective {
        self.which
    }
}

impl FieldProblem for SpdProblem {
    type Space = SpdCone;

    fn manifold(&self) -> &SpdCone {
        &self.cone
    }

    fn value(&self, p: &Ambient) -> Ambient {
        Ambient::single(spd_field(self.which, p.block(0)))
    }

    /// The Hessian operator carries a structured inverse: both Hessians are
    /// diagonal in the eigenbasis of `P`, so `H(V) = R` is solved entrywise
    /// there in `O(n³)`.
    fn operator<'a>(&'a self, p: &Ambient) -> TangentOperator<'a> {
        let which = self.which;
        let pm = p.block(0).clone();
        let pinv = match which {
            SpdObjective::F1 => Some(inverse(&pm)),
            SpdObjective::F2 => None,
        };
        let eig = SymmetricEigen::new(pm.clone());
        let apply_p = pm.clone();
        TangentOperator::new(p.clone(), move |v: &Ambient| {
            let v = v.block(0);
            Ambient::single(match &pinv {
                Some(pinv) => sym(&(pinv * v)),
                None => -sym(&(&apply_p * v)),
            })
        })
        .self_adjoint()
        .with_inverse(move |rhs: &Ambient| {
            let u = &eig.eigenvectors;
            let lam = &eig.eigenvalues;
            let n = lam.len();
            let weights = DMatrix::from_fn(n, n, |i, j| hessian_weight(which, lam[i], lam[j]));
            // analogue of the LU pivot test: the weights are the eigenvalues
            // of the operator
            let largest = weights.amax();
            if !(largest.is_finite() && weights.iter().all(|h| h.abs() >= PIVOT_TOL * largest)) {
                return None;
            }
            let t = (u.transpose() * rhs.block(0) * u).component_div(&weights);
            Some(Ambient::single(sym(&(u * t * u.transpose()))))
        })
    }

    fn objective(&self, p: &Ambient) -> Option<f64> {
        Some(spd_objective_value(self.which, p.block(0)))
    }

    fn is_gradient_field(&self) -> bool {
        true
    }
}
