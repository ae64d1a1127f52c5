//! Seeded instance generators for the sphere, Stiefel-product and SPD
//! experiments.

use nalgebra::{DMatrix, DVector};
use riemann_newton::linalg::{is_positive_definite, qf};
use riemann_newton::sphere::{Sphere, SphereProblemNC, SphereProblemRayleigh};
use riemann_newton::stiefel::{ProductPoint, TsvdProblem};
use riemann_newton::Ambient;

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("matrix family must be 1..=5, got {0}")]
    Family(u8),
    #[error("dimension {0} too small (need at least 2)")]
    Dimension(usize),
    #[error("tSVD dimensions need 1 <= p <= n <= m, got ({0}, {1}, {2})")]
    TsvdDims(usize, usize, usize),
    #[error("perturbation scale must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("degenerate random draw: {0}")]
    Degenerate(String),
}

/// Salts separating the random streams of one seed.
const SALT_MATRIX: u64 = 1;
const SALT_TARGET: u64 = 2;
const SALT_START: u64 = 3;
const SALT_FACTOR_P: u64 = 4;
const SALT_FACTOR_Q: u64 = 5;
const SALT_PERTURB: u64 = 6;

pub struct SphereNcInstance {
    pub problem: SphereProblemNC,
    pub start: Ambient,
}

/// Skew `Q = A − Aᵀ` from a Gaussian `(n+1)×(n+1)` matrix, with independent
/// unit vectors for `p̄` and the starting point. The sphere is `Sⁿ ⊂ R^{n+1}`.
pub fn gen_sphere_nc(n: usize, seed: u64) -> Result<SphereNcInstance, GenError> {
    if n < 2 {
        return Err(GenError::Dimension(n));
    }
    let a = Rng::derived(seed, SALT_MATRIX).normal_matrix(n + 1, n + 1);
    let q = &a - a.transpose();
    let pbar = Rng::derived(seed, SALT_TARGET).unit_vector(n + 1);
    let p0 = Rng::derived(seed, SALT_START).unit_vector(n + 1);
    let problem = SphereProblemNC::new(q, pbar).map_err(|e| GenError::Degenerate(e.to_string()))?;
    Ok(SphereNcInstance {
        problem,
        start: Sphere::point(p0),
    })
}

/// Side of the grid for the Poisson family.
pub fn poisson_grid_side(n: usize) -> usize {
    (n as f64).sqrt().ceil() as usize + 1
}

/// Order of the matrix produced by [`gen_spd_matrix`].
pub fn family_order(family: u8, n: usize) -> usize {
    if family == 1 {
        poisson_grid_side(n).pow(2)
    } else {
        n
    }
}

/// Symmetric test matrices:
///
/// 1. five-point Dirichlet Laplacian on a `k×k` grid, `k = ⌈√n⌉ + 1`
///    (order `k²`, which may exceed `n`);
/// 2. all-ones matrix plus `2n I`;
/// 3. tridiagonal `(1, 10, 1)`;
/// 4. uniform `(0, 1)` diagonal with unit corner entries (may be
///    indefinite);
/// 5. `Q Λ Qᵀ` with random orthogonal `Q` and eigenvalues log-spaced on
///    `[0.1, 1]`.
pub fn gen_spd_matrix(family: u8, n: usize, seed: u64) -> Result<DMatrix<f64>, GenError> {
    if n < 2 {
        return Err(GenError::Dimension(n));
    }
    let mut rng = Rng::derived(seed, SALT_MATRIX);
    let m = match family {
        1 => {
            let k = poisson_grid_side(n);
            let order = k * k;
            let mut m = DMatrix::zeros(order, order);
            for bi in 0..k {
                for i in 0..k {
                    let r = bi * k + i;
                    m[(r, r)] = 4.0;
                    if i + 1 < k {
                        m[(r, r + 1)] = -1.0;
                        m[(r + 1, r)] = -1.0;
                    }
                    if bi + 1 < k {
                        m[(r, r + k)] = -1.0;
                        m[(r + k, r)] = -1.0;
                    }
                }
            }
            m
        }
        2 => DMatrix::from_element(n, n, 1.0) + DMatrix::identity(n, n) * (2.0 * n as f64),
        3 => DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 10.0,
            1 => 1.0,
            _ => 0.0,
        }),
        4 => {
            let mut m =
                DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|_| rng.uniform())));
            m[(0, n - 1)] = 1.0;
            m[(n - 1, 0)] = 1.0;
            m
        }
        5 => {
            let q =
                qf(&rng.normal_matrix(n, n)).map_err(|e| GenError::Degenerate(e.to_string()))?;
            let lambda = DVector::from_iterator(
                n,
                (0..n).map(|i| 10f64.powf(-1.0 + i as f64 / (n - 1) as f64)),
            );
            let m = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
            (&m + m.transpose()) * 0.5
        }
        other => return Err(GenError::Family(other)),
    };
    Ok(m)
}

/// An SPD matrix from a family: shifted by `(1 + |λ_min|) I` when the
/// Cholesky factorization fails. Returns the shift applied (0 if none).
pub fn gen_spd_point(family: u8, n: usize, seed: u64) -> Result<(DMatrix<f64>, f64), GenError> {
    let m = gen_spd_matrix(family, n, seed)?;
    if is_positive_definite(&m) {
        return Ok((m, 0.0));
    }
    let lambda_min = m.clone().symmetric_eigenvalues().min();
    let shift = 1.0 + lambda_min.abs();
    let order = m.nrows();
    Ok((m + DMatrix::identity(order, order) * shift, shift))
}

pub struct RayleighInstance {
    pub problem: SphereProblemRayleigh,
    pub start: Ambient,
}

/// Rayleigh quotient of a family matrix with a uniformly random start.
pub fn gen_rayleigh(family: u8, n: usize, seed: u64) -> Result<RayleighInstance, GenError> {
    let a = gen_spd_matrix(family, n, seed)?;
    let start = Rng::derived(seed, SALT_START).unit_vector(a.nrows());
    let problem = SphereProblemRayleigh::new(a).map_err(|e| GenError::Degenerate(e.to_string()))?;
    Ok(RayleighInstance {
        problem,
        start: Sphere::point(start),
    })
}

pub struct TsvdInstance {
    pub problem: TsvdProblem,
    pub start: ProductPoint,
    pub solution: ProductPoint,
}

/// `A = P* N Q*ᵀ` with `N = diag(p, …, 1)` and `P*`, `Q*` the `qf` factors of
/// Gaussian matrices; the start is `(qf(P* + ε G₁), qf(Q* + ε G₂))`.
pub fn gen_tsvd(
    m: usize,
    n: usize,
    p: usize,
    seed: u64,
    epsilon: f64,
) -> Result<TsvdInstance, GenError> {
    if !(p >= 1 && p <= n && n <= m) {
        return Err(GenError::TsvdDims(m, n, p));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(GenError::Epsilon(epsilon));
    }
    let degenerate = |e: riemann_newton::RetractionError| GenError::Degenerate(e.to_string());
    let p_star = qf(&Rng::derived(seed, SALT_FACTOR_P).normal_matrix(m, p)).map_err(degenerate)?;
    let q_star = qf(&Rng::derived(seed, SALT_FACTOR_Q).normal_matrix(n, p)).map_err(degenerate)?;
    let mu: Vec<f64> = (1..=p).rev().map(|k| k as f64).collect();
    let a = &p_star * DMatrix::from_diagonal(&DVector::from_column_slice(&mu)) * q_star.transpose();

    let mut perturb = Rng::derived(seed, SALT_PERTURB);
    let p0 = qf(&(&p_star + perturb.normal_matrix(m, p) * epsilon)).map_err(degenerate)?;
    let q0 = qf(&(&q_star + perturb.normal_matrix(n, p) * epsilon)).map_err(degenerate)?;
    let problem = TsvdProblem::new(a, &mu).map_err(|e| GenError::Degenerate(e.to_string()))?;
    Ok(TsvdInstance {
        problem,
        start: ProductPoint::new(p0, q0),
        solution: ProductPoint::new(p_star, q_star),
    })
}

/// The perturbation scales `10⁻⁴, 10⁻³, …, 10³`.
pub fn epsilon_sweep() -> Vec<f64> {
    (-4..=3).map(|k| 10f64.powi(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use riemann_newton::FieldProblem;

    #[test]
    fn sphere_nc_instance() {
        let inst = gen_sphere_nc(5, 11).unwrap();
        let q = inst.problem.q();
        assert!((q + q.transpose()).amax() <= 1e-15);
        assert!((inst.start.norm() - 1.0).abs() < 1e-15);
        let again = gen_sphere_nc(5, 11).unwrap();
        assert_eq!(again.problem.q(), q);
        assert_eq!(again.start, inst.start);
        assert!(gen_sphere_nc(1, 0).is_err());
    }

    #[test]
    fn family_three_example() {
        let m = gen_spd_matrix(3, 3, 0).unwrap();
        let expect =
            DMatrix::from_row_slice(3, 3, &[10.0, 1.0, 0.0, 1.0, 10.0, 1.0, 0.0, 1.0, 10.0]);
        assert_eq!(m, expect);
    }

    #[test]
    fn family_two_row_sums() {
        let n = 6;
        let m = gen_spd_matrix(2, n, 0).unwrap();
        for i in 0..n {
            assert_eq!(m.row(i).sum(), 3.0 * n as f64);
        }
    }

    #[test]
    fn family_one_is_the_grid_laplacian() {
        let m = gen_spd_matrix(1, 4, 0).unwrap();
        assert_eq!(m.shape(), (9, 9));
        assert!(m.diagonal().iter().all(|&d| d == 4.0));
        // centre of the 3×3 grid couples to four neighbours
        assert_eq!(m.row(4).iter().filter(|&&x| x == -1.0).count(), 4);
        assert_eq!(m.row(0).iter().filter(|&&x| x == -1.0).count(), 2);
        // eigenvalues 4 − 2cos(iπ/4) − 2cos(jπ/4)
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let c = (std::f64::consts::PI / 4.0).cos();
        assert!((eig[0] - (4.0 - 4.0 * c)).abs() < 1e-12);
        assert!((eig[8] - (4.0 + 4.0 * c)).abs() < 1e-12);
    }

    #[test]
    fn families_four_and_five() {
        let m = gen_spd_matrix(4, 5, 2).unwrap();
        assert_eq!(m[(0, 4)], 1.0);
        assert_eq!(m[(4, 0)], 1.0);
        assert!(m.diagonal().iter().all(|&d| (0.0..1.0).contains(&d)));

        let m = gen_spd_matrix(5, 8, 2).unwrap();
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 0.1).abs() < 1e-12);
        assert!((eig[7] - 1.0).abs() < 1e-12);
        assert_eq!(gen_spd_matrix(6, 3, 0), Err(GenError::Family(6)));
    }

    #[test]
    fn spd_points_are_positive_definite() {
        for family in 1..=5 {
            for seed in 0..4 {
                let (m, shift) = gen_spd_point(family, 6, seed).unwrap();
                assert!(is_positive_definite(&m));
                if family != 4 {
                    assert_eq!(shift, 0.0);
                }
            }
        }
    }

    #[test]
    fn tsvd_instance() {
        let inst = gen_tsvd(5, 3, 2, 0, 1e-4).unwrap();
        assert_eq!(
            inst.problem.weights(),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]))
        );
        let x = inst.problem.value(&inst.solution.to_ambient());
        assert!(x.norm() < 1e-13);
        assert!(inst.start.residual() < 1e-13);
        let dist = ((&inst.start.p - &inst.solution.p).norm_squared()
            + (&inst.start.q - &inst.solution.q).norm_squared())
        .sqrt();
        assert!(dist < 1e-3, "{dist}");
        assert!(gen_tsvd(3, 5, 2, 0, 1.0).is_err());
        assert!(gen_tsvd(5, 3, 2, 0, 0.0).is_err());
    }

    #[test]
    fn sweep_values() {
        let s = epsilon_sweep();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], 1e-4);
        assert_eq!(s[7], 1e3);
    }
}
