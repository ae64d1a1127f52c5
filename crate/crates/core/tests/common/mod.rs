#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use riemann_newton::linalg::qf;
use riemann_newton::spd::{SpdObjective, SpdProblem};
use riemann_newton::sphere::{project_tangent_sphere, SphereProblemNC, SphereProblemRayleigh};
use riemann_newton::stiefel::{project_tangent_stiefel, ProductPoint, TsvdProblem};
use riemann_newton::Ambient;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn mat(r: &mut StdRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0))
}

pub fn vec(r: &mut StdRng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0))
}

pub fn unit(r: &mut StdRng, n: usize) -> DVector<f64> {
    let v = vec(r, n);
    let norm = v.norm();
    v / norm
}

pub fn sphere_tangent(r: &mut StdRng, p: &DVector<f64>) -> DVector<f64> {
    project_tangent_sphere(p, &vec(r, p.len()))
}

pub fn stiefel_point(r: &mut StdRng, m: usize, p: usize) -> DMatrix<f64> {
    qf(&mat(r, m, p)).expect("full rank with probability one")
}

pub fn stiefel_tangent(r: &mut StdRng, p: &DMatrix<f64>) -> DMatrix<f64> {
    project_tangent_stiefel(p, &mat(r, p.nrows(), p.ncols()))
}

/// Well-conditioned SPD matrix with spectrum in roughly `[0.5, 1.5]`.
pub fn spd_point(r: &mut StdRng, n: usize) -> DMatrix<f64> {
    let b = mat(r, n, n);
    &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5
}

pub fn symmetric(r: &mut StdRng, n: usize) -> DMatrix<f64> {
    let b = mat(r, n, n);
    (&b + b.transpose()) * 0.5
}

pub fn nc_problem(r: &mut StdRng, n: usize) -> SphereProblemNC {
    let a = mat(r, n + 1, n + 1);
    SphereProblemNC::new(&a - a.transpose(), unit(r, n + 1)).unwrap()
}

pub fn rayleigh_problem(r: &mut StdRng, n: usize) -> SphereProblemRayleigh {
    SphereProblemRayleigh::new(symmetric(r, n)).unwrap()
}

pub fn tsvd_problem(r: &mut StdRng, m: usize, n: usize, p: usize) -> TsvdProblem {
    let mu: Vec<f64> = (1..=p).rev().map(|k| k as f64).collect();
    TsvdProblem::new(mat(r, m, n), &mu).unwrap()
}

pub fn product_point(r: &mut StdRng, m: usize, n: usize, p: usize) -> Ambient {
    ProductPoint::new(stiefel_point(r, m, p), stiefel_point(r, n, p)).to_ambient()
}

pub fn spd_problem(n: usize, which: SpdObjective) -> SpdProblem {
    SpdProblem::new(n, which)
}

/// `|a - b| / max(|a|, |b|, floor)`
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Same as [`rel_err`] with Frobenius norms of ambient differences.
pub fn rel_err_ambient(a: &Ambient, b: &Ambient, floor: f64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(floor)
}

/// Central difference `(f(h) - f(-h)) / 2h`.
pub fn central<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}
