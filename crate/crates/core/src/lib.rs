//! Newton-type methods for finding singularities of vector fields on
//! Riemannian manifolds, with the sphere, products of Stiefel manifolds and
//! the cone of symmetric positive definite matrices as concrete spaces.

pub mod ambient;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod merit;
pub mod solver;
pub mod spd;
pub mod sphere;
pub mod stiefel;

pub use ambient::Ambient;
pub use error::{CoreError, RetractionError};
pub use manifold::{
    apply_adjoint, inner, operator_to_matrix, solve_newton_system, Manifold, TangentBasis,
    TangentOperator,
};
pub use merit::{merit_gradient, merit_value, FieldProblem, LocalModel};
pub use solver::{
    angle_test, armijo, newton_direction, run, safeguard_direction, Algorithm, ArmijoStep,
    DirectionKind, IterationRecord, IterationTrace, SolverConfig, SolverError, Status,
};
