//! Newton iterations for finding a singularity of a vector field:
//!
//! * [`Algorithm::Pure`]: full Newton steps, stop when the Newton system is
//!   singular;
//! * [`Algorithm::Damped`]: Armijo backtracking on the merit function, with
//!   the steepest-descent direction `-grad phi` when the Newton system is
//!   singular;
//! * [`Algorithm::ModifiedDamped`]: as `Damped`, but a Newton direction is
//!   only used when it makes an angle with `-grad phi` whose cosine is at
//!   least `theta`.

use std::fmt;
use std::str::FromStr;

use crate::ambient::Ambient;
use crate::error::CoreError;
use crate::manifold::Manifold;
use crate::merit::{FieldProblem, LocalModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Pure,
    Damped,
    ModifiedDamped,
}

impl Algorithm {
    /// Numeric label used on the command line and in records.
    pub fn number(self) -> u8 {
        match self {
            Algorithm::Pure => 1,
            Algorithm::Damped => 2,
            Algorithm::ModifiedDamped => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Algorithm::Pure),
            2 => Some(Algorithm::Damped),
            3 => Some(Algorithm::ModifiedDamped),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u8>()
            .ok()
            .and_then(Algorithm::from_number)
            .ok_or_else(|| format!("unknown algorithm '{s}' (expected 1, 2 or 3)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionKind {
    Newton,
    Safeguard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    SmallStep,
    MaxIter,
    SingularStop,
    CriticalOfMerit,
}

impl Status {
    pub const ALL: [Status; 5] = [
        Status::Converged,
        Status::SmallStep,
        Status::MaxIter,
        Status::SingularStop,
        Status::CriticalOfMerit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::SmallStep => "small-step",
            Status::MaxIter => "max-iter",
            Status::SingularStop => "singular-stop",
            Status::CriticalOfMerit => "critical-of-merit",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Status::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown status '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("sigma must lie in (0, 1/2), got {0}")]
    Sigma(f64),
    #[error("theta must lie in [0, 1], got {0}")]
    Theta(f64),
    #[error("tolerances must be positive")]
    Tolerance,
    #[error(transparent)]
    Geometry(#[from] CoreError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<R> {
    pub algorithm: Algorithm,
    pub retraction: R,
    /// Armijo sufficient-decrease constant.
    pub sigma: f64,
    /// Angle-condition constant (modified damped method only).
    pub theta: f64,
    /// Converged once the stationarity measure drops below this.
    pub stat_tol: f64,
    /// Backtracking gives up once the trial step drops below this.
    pub min_step: f64,
    pub max_iter: usize,
}

impl<R> SolverConfig<R> {
    pub const DEFAULT_SIGMA: f64 = 1e-3;
    pub const DEFAULT_THETA: f64 = 0.9;
    pub const DEFAULT_STAT_TOL: f64 = 1e-6;
    pub const DEFAULT_MIN_STEP: f64 = 1e-10;
    pub const DEFAULT_MAX_ITER: usize = 2000;

    pub fn new(algorithm: Algorithm, retraction: R) -> Self {
        Self {
            algorithm,
            retraction,
            sigma: Self::DEFAULT_SIGMA,
            theta: Self::DEFAULT_THETA,
            stat_tol: Self::DEFAULT_STAT_TOL,
            min_step: Self::DEFAULT_MIN_STEP,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(SolverError::Sigma(self.sigma));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(SolverError::Theta(self.theta));
        }
        if !(self.stat_tol > 0.0 && self.min_step > 0.0) {
            return Err(SolverError::Tolerance);
        }
        Ok(())
    }
}

/// One accepted step, recorded with quantities at the iterate it left.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub merit: f64,
    pub stationarity: f64,
    pub alpha: f64,
    pub direction: DirectionKind,
    /// `<grad phi(p_k), v_k>`
    pub slope: f64,
    pub merit_grad_norm: f64,
    pub direction_norm: f64,
    /// Field evaluations so far, including those of this step's line search.
    pub field_evals: usize,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub steps: Vec<IterationRecord>,
    pub status: Status,
    pub final_point: Ambient,
    pub final_merit: f64,
    pub final_stationarity: f64,
    pub field_evals: usize,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Stationarity at every iterate, including the final one.
    pub fn stationarity_history(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.stationarity)
            .chain(std::iter::once(self.final_stationarity))
            .collect()
    }
}

/// `<g, v> <= -theta ‖g‖ ‖v‖` from precomputed scalars.
pub fn angle_condition(slope: f64, grad_norm: f64, dir_norm: f64, theta: f64) -> bool {
    slope <= -theta * grad_norm * dir_norm
}

/// The angle condition under the metric at `p`. Holds trivially when either
/// vector vanishes.
pub fn angle_test<M: Manifold + ?Sized>(
    manifold: &M,
    p: &Ambient,
    grad_merit: &Ambient,
    v: &Ambient,
    theta: f64,
) -> bool {
    angle_condition(
        manifold.inner(p, grad_merit, v),
        manifold.norm(p, grad_merit),
        manifold.norm(p, v),
        theta,
    )
}

/// Solution of `X(p) + ∇X(p) v = 0`, `None` if the system is singular.
pub fn newton_direction<P: FieldProblem + ?Sized>(problem: &P, p: &Ambient) -> Option<Ambient> {
    LocalModel::new(problem, p.clone()).newton_direction()
}

/// `-grad phi(p) = -∇X(p)* X(p)`
pub fn safeguard_direction<P: FieldProblem + ?Sized>(problem: &P, p: &Ambient) -> Ambient {
    -LocalModel::new(problem, p.clone()).merit_gradient()
}

/// Result of a successful backtracking search.
#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub alpha: f64,
    pub point: Ambient,
    /// `X` at the accepted point, reused by the next iteration.
    pub value: Ambient,
    /// Field evaluations spent, one per feasible trial.
    pub field_evals: usize,
}

/// Largest `alpha = 2^-j`, `j = 0, 1, …`, with
/// `phi(R_p(alpha v)) <= phi(p) + sigma alpha <grad phi(p), v>`.
///
/// A trial the retraction rejects counts as failed. Returns `None` once
/// `alpha < min_step`, or at once if `v` is not a descent direction.
pub fn armijo<P: FieldProblem + ?Sized>(
    problem: &P,
    retraction: <P::Space as Manifold>::Retraction,
    p: &Ambient,
    v: &Ambient,
    sigma: f64,
    min_step: f64,
) -> Option<ArmijoStep> {
    let model = LocalModel::new(problem, p.clone());
    let slope = model.inner(model.merit_gradient(), v);
    backtrack(
        problem,
        retraction,
        p,
        model.merit(),
        slope,
        v,
        sigma,
        min_step,
    )
}

#[allow(clippy::too_many_arguments)]
fn backtrack<P: FieldProblem + ?Sized>(
    problem: &P,
    retraction: <P::Space as Manifold>::Retraction,
    p: &Ambient,
    merit: f64,
    slope: f64,
    v: &Ambient,
    sigma: f64,
    min_step: f64,
) -> Option<ArmijoStep> {
    // a non-descent direction (possible only through roundoff in the Newton
    // solve) admits no admissible step
    if slope.is_nan() || slope >= 0.0 {
        return None;
    }
    let space = problem.manifold();
    let curve = space.retraction_curve(retraction, p, v);
    let mut alpha = 1.0_f64;
    let mut evals = 0;
    while alpha >= min_step {
        if let Ok(trial) = curve(alpha) {
            let value = problem.value(&trial);
            evals += 1;
            let trial_merit = 0.5 * space.inner(&trial, &value, &value);
            // compared as a difference so that a decrease below one ulp of
            // phi(p) is not absorbed
            if trial_merit.is_finite() && trial_merit - merit <= sigma * alpha * slope {
                return Some(ArmijoStep {
                    alpha,
                    point: trial,
                    value,
                    field_evals: evals,
                });
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Runs the selected Newton variant from `p0`.
///
/// Field-evaluation accounting: one evaluation of `X` at `p0`, then one per
/// feasible line-search trial (a pure Newton step is a single trial). The
/// value at an accepted point is reused as `X(p_{k+1})`.
pub fn run<P: FieldProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig<<P::Space as Manifold>::Retraction>,
    p0: &Ambient,
) -> Result<IterationTrace, SolverError> {
    config.validate()?;
    let space = problem.manifold();
    space.check_point(p0)?;

    let mut steps = Vec::new();
    let mut point = p0.clone();
    let mut value = problem.value(&point);
    let mut evals = 1usize;

    let status = loop {
        let model = LocalModel::with_value(problem, point, value);
        let stationarity = model.stationarity();
        let merit = model.merit();
        if stationarity < config.stat_tol {
            (point, value) = model.into_parts();
            break Status::Converged;
        }
        if steps.len() >= config.max_iter {
            (point, value) = model.into_parts();
            break Status::MaxIter;
        }

        let newton = model.newton_direction();
        let grad = model.merit_gradient();
        let grad_norm = model.norm(grad);

        let (direction, kind) = match (config.algorithm, newton) {
            (Algorithm::Pure, None) => {
                (point, value) = model.into_parts();
                break Status::SingularStop;
            }
            (Algorithm::Pure | Algorithm::Damped, Some(v)) => (v, DirectionKind::Newton),
            (Algorithm::ModifiedDamped, Some(v))
                if angle_condition(
                    model.inner(grad, &v),
                    grad_norm,
                    model.norm(&v),
                    config.theta,
                ) =>
            {
                (v, DirectionKind::Newton)
            }
            _ => (-grad, DirectionKind::Safeguard),
        };
        if kind == DirectionKind::Safeguard && grad_norm == 0.0 {
            (point, value) = model.into_parts();
            break Status::CriticalOfMerit;
        }
        let slope = model.inner(grad, &direction);
        let direction_norm = model.norm(&direction);

        let step = match config.algorithm {
            Algorithm::Pure => space
                .retract(config.retraction, model.point(), &direction)
                .ok()
                .map(|next| {
                    let value = problem.value(&next);
                    ArmijoStep {
                        alpha: 1.0,
                        point: next,
                        value,
                        field_evals: 1,
                    }
                }),
            Algorithm::Damped | Algorithm::ModifiedDamped => backtrack(
                problem,
                config.retraction,
                model.point(),
                merit,
                slope,
                &direction,
                config.sigma,
                config.min_step,
            ),
        };
        let Some(step) = step else {
            (point, value) = model.into_parts();
            break Status::SmallStep;
        };

        evals += step.field_evals;
        steps.push(IterationRecord {
            merit,
            stationarity,
            alpha: step.alpha,
            direction: kind,
            slope,
            merit_grad_norm: grad_norm,
            direction_norm,
            field_evals: evals,
        });
        point = step.point;
        value = step.value;
    };

    let final_stationarity = problem.stationarity(&point, &value);
    let final_merit = 0.5 * space.inner(&point, &value, &value);
    Ok(IterationTrace {
        steps,
        status,
        final_point: point,
        final_merit,
        final_stationarity,
        field_evals: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::TangentOperator;
    use crate::spd::{SpdObjective, SpdProblem, SpdRetraction};
    use crate::sphere::{Sphere, SphereProblemRayleigh, SphereRetraction};
    use nalgebra::{DMatrix, DVector};

    fn scalar(x: f64) -> Ambient {
        Ambient::single(DMatrix::from_element(1, 1, x))
    }

    #[test]
    fn config_validation() {
        let c = SolverConfig::new(Algorithm::Damped, SphereRetraction::Exp);
        assert!(c.validate().is_ok());
        assert_eq!(c.with_sigma(0.5).validate(), Err(SolverError::Sigma(0.5)));
        assert_eq!(c.with_theta(1.5).validate(), Err(SolverError::Theta(1.5)));
    }

    #[test]
    fn angle_test_examples() {
        let s = Sphere::new(2);
        let p = Sphere::point(DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let g = Sphere::point(DVector::from_vec(vec![0.0, 1.0, 0.0]));
        let descent = Sphere::point(DVector::from_vec(vec![0.0, -0.1, 3.0]));
        assert!(angle_test(&s, &p, &g, &descent, 0.0));
        let ortho = Sphere::point(DVector::from_vec(vec![0.0, 0.0, 1.0]));
        assert!(!angle_test(&s, &p, &g, &ortho, 0.5));
        let zero = Ambient::zeros_like(&g);
        assert!(angle_test(&s, &p, &g, &zero, 1.0));
        assert!(angle_test(&s, &p, &zero, &ortho, 1.0));

        let circle = Sphere::new(1);
        let p = Sphere::point(DVector::from_vec(vec![1.0, 0.0]));
        let g = Sphere::point(DVector::from_vec(vec![0.0, 1.0]));
        let v = Sphere::point(DVector::from_vec(vec![0.0, -2.0]));
        assert!(angle_test(&circle, &p, &g, &v, 1.0));
    }

    #[test]
    fn directions_at_scalar_spd_point() {
        let prob = SpdProblem::new(1, SpdObjective::F1);
        let v = newton_direction(&prob, &scalar(3.0)).unwrap();
        assert!((v.block(0)[(0, 0)] + 6.0).abs() < 1e-13);
        let s = safeguard_direction(&prob, &scalar(3.0));
        assert!((s.block(0)[(0, 0)] + 2.0 / 3.0).abs() < 1e-15);
        let at_solution = newton_direction(&prob, &scalar(1.0)).unwrap();
        assert_eq!(at_solution.norm(), 0.0);
    }

    #[test]
    fn armijo_hand_trace() {
        let prob = SpdProblem::new(1, SpdObjective::F1);
        let p = scalar(3.0);
        let v = scalar(-6.0);
        let step = armijo(&prob, SpdRetraction::FirstOrder, &p, &v, 1e-3, 1e-10).unwrap();
        assert_eq!(step.alpha, 0.25);
        assert_eq!(step.point.block(0)[(0, 0)], 1.5);
        // j = 0 and j = 1 are infeasible: only the accepted trial evaluates X
        assert_eq!(step.field_evals, 1);
    }

    #[test]
    fn armijo_fails_on_ascent_direction() {
        let prob = SpdProblem::new(1, SpdObjective::F1);
        let up = scalar(1.0);
        assert!(armijo(
            &prob,
            SpdRetraction::ExpAffine,
            &scalar(3.0),
            &up,
            1e-3,
            1e-10
        )
        .is_none());
    }

    #[test]
    fn converged_start_takes_no_steps() {
        let prob = SpdProblem::new(1, SpdObjective::F1);
        for alg in [
            Algorithm::Pure,
            Algorithm::Damped,
            Algorithm::ModifiedDamped,
        ] {
            let cfg = SolverConfig::new(alg, SpdRetraction::FirstOrder);
            let trace = run(&prob, &cfg, &scalar(1.0)).unwrap();
            assert_eq!(trace.status, Status::Converged);
            assert_eq!(trace.iterations(), 0);
            assert_eq!(trace.field_evals, 1);
        }
    }

    #[test]
    fn scalar_spd_modified_damped_run() {
        let prob = SpdProblem::new(1, SpdObjective::F1);
        let cfg = SolverConfig::new(Algorithm::ModifiedDamped, SpdRetraction::FirstOrder)
            .with_theta(0.9999);
        let trace = run(&prob, &cfg, &scalar(3.0)).unwrap();
        assert_eq!(trace.status, Status::Converged);
        assert_eq!(trace.steps[0].alpha, 0.25);
        assert!((trace.final_point.block(0)[(0, 0)] - 1.0).abs() < 1e-6);
        assert!(trace.final_stationarity < 1e-6);
    }

    /// `X(p) = Π_p c` paired with a vanishing operator: every Newton system
    /// is singular and `grad phi = 0`.
    struct FlatOperator {
        sphere: Sphere,
        c: DVector<f64>,
    }

    impl FieldProblem for FlatOperator {
        type Space = Sphere;
        fn manifold(&self) -> &Sphere {
            &self.sphere
        }
        fn value(&self, p: &Ambient) -> Ambient {
            self.sphere.project(p, &Sphere::point(self.c.clone()))
        }
        fn operator<'a>(&'a self, p: &Ambient) -> TangentOperator<'a> {
            TangentOperator::new(p.clone(), |v: &Ambient| Ambient::zeros_like(v))
        }
    }

    #[test]
    fn singular_systems_stop_or_hit_merit_critical_point() {
        let prob = FlatOperator {
            sphere: Sphere::new(2),
            c: DVector::from_vec(vec![0.0, 1.0, 0.0]),
        };
        let p = Sphere::point(DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!(newton_direction(&prob, &p).is_none());
        let pure = run(
            &prob,
            &SolverConfig::new(Algorithm::Pure, SphereRetraction::Exp),
            &p,
        )
        .unwrap();
        assert_eq!(pure.status, Status::SingularStop);
        assert_eq!(pure.iterations(), 0);
        for alg in [Algorithm::Damped, Algorithm::ModifiedDamped] {
            let t = run(&prob, &SolverConfig::new(alg, SphereRetraction::Exp), &p).unwrap();
            assert_eq!(t.status, Status::CriticalOfMerit);
        }
    }

    #[test]
    fn damped_rayleigh_run_descends_and_converges() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 5.0]));
        let prob = SphereProblemRayleigh::new(a).unwrap();
        let p = Sphere::point(DVector::from_vec(vec![0.6, 0.0, 0.8]));
        for alg in [Algorithm::Damped, Algorithm::ModifiedDamped] {
            let t = run(&prob, &SolverConfig::new(alg, SphereRetraction::Proj), &p).unwrap();
            assert_eq!(t.status, Status::Converged);
            let merits: Vec<f64> = t.steps.iter().map(|s| s.merit).collect();
            assert!(merits.windows(2).all(|w| w[1] <= w[0]));
            assert!(t.steps.iter().all(|s| s.slope < 0.0));
        }
    }

    #[test]
    fn rejects_off_manifold_start() {
        let prob = SpdProblem::new(1, SpdObjective::F1);
        let cfg = SolverConfig::new(Algorithm::Damped, SpdRetraction::FirstOrder);
        assert!(matches!(
            run(&prob, &cfg, &scalar(-1.0)),
            Err(SolverError::Geometry(_))
        ));
    }
}
