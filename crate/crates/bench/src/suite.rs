//! Experiment runner: instance enumeration and one solver run per
//! (instance, solver) pair.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use riemann_newton::spd::{SpdObjective, SpdProblem, SpdRetraction};
use riemann_newton::sphere::{SphereProblemNC, SphereProblemRayleigh, SphereRetraction};
use riemann_newton::stiefel::{StiefelRetraction, TsvdProblem};
use riemann_newton::{
    run, Algorithm, Ambient, FieldProblem, IterationTrace, Manifold, SolverConfig,
};

use crate::generators::{
    epsilon_sweep, family_order, gen_rayleigh, gen_spd_point, gen_sphere_nc, gen_tsvd, GenError,
};
use crate::record::BenchmarkRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    SphereNc,
    Rayleigh,
    Tsvd,
    SpdF1,
    SpdF2,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::SphereNc => "sphere-nc",
            Suite::Rayleigh => "rayleigh",
            Suite::Tsvd => "tsvd",
            Suite::SpdF1 => "spd-f1",
            Suite::SpdF2 => "spd-f2",
        }
    }

    /// Retraction names accepted by this suite.
    pub fn retractions(self) -> Vec<String> {
        match self {
            Suite::SphereNc | Suite::Rayleigh => SphereRetraction::ALL
                .iter()
                .map(|r| r.to_string())
                .collect(),
            Suite::Tsvd => StiefelRetraction::ALL
                .iter()
                .map(|r| r.to_string())
                .collect(),
            Suite::SpdF1 | Suite::SpdF2 => {
                SpdRetraction::ALL.iter().map(|r| r.to_string()).collect()
            }
        }
    }

    /// Dimensions used unless overridden.
    pub fn default_dims(self, paper_scale: bool) -> Vec<Vec<usize>> {
        let single = |v: &[usize]| v.iter().map(|&n| vec![n]).collect();
        match (self, paper_scale) {
            (Suite::SphereNc, false) => single(&[2, 50]),
            (Suite::SphereNc, true) => single(&[2, 50, 500, 1000]),
            (Suite::Rayleigh, false) => single(&[100, 200]),
            (Suite::Rayleigh, true) => single(&[500, 750, 1000, 1250, 1500]),
            (Suite::Tsvd, _) => vec![
                vec![5, 3, 2],
                vec![7, 5, 2],
                vec![10, 5, 3],
                vec![20, 10, 3],
            ],
            (Suite::SpdF1 | Suite::SpdF2, false) => single(&[10, 50, 100]),
            (Suite::SpdF1 | Suite::SpdF2, true) => (1..=10).map(|k| vec![100 * k]).collect(),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Suite::SphereNc,
            Suite::Rayleigh,
            Suite::Tsvd,
            Suite::SpdF1,
            Suite::SpdF2,
        ]
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

/// One solver: algorithm, retraction name and line-search constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub algorithm: Algorithm,
    pub retraction: String,
    pub theta: f64,
    pub sigma: f64,
}

impl SolverSpec {
    pub fn new(algorithm: Algorithm, retraction: impl Into<String>, theta: f64) -> Self {
        Self {
            algorithm,
            retraction: retraction.into(),
            theta,
            sigma: SolverConfig::<()>::DEFAULT_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub suite: Suite,
    /// `[n]` for sphere and SPD suites, `[m, n, p]` for tSVD.
    pub dims: Vec<Vec<usize>>,
    pub seeds: Vec<u64>,
    /// Matrix families (Rayleigh and SPD suites).
    pub families: Vec<u8>,
    /// Perturbation scales (tSVD suite).
    pub epsilons: Vec<f64>,
    pub solvers: Vec<SolverSpec>,
    pub max_iter: usize,
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            dims: suite.default_dims(false),
            seeds: (0..5).collect(),
            families: (1..=5).collect(),
            epsilons: vec![1e-4],
            solvers: Vec::new(),
            max_iter: SolverConfig::<()>::DEFAULT_MAX_ITER,
        }
    }

    pub fn with_epsilon_sweep(mut self) -> Self {
        self.epsilons = epsilon_sweep();
        self
    }

    /// Single-line description for the file header.
    pub fn describe(&self) -> String {
        let dims: Vec<String> = self
            .dims
            .iter()
            .map(|d| {
                d.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join("x")
            })
            .collect();
        let solvers: Vec<String> = self
            .solvers
            .iter()
            .map(|s| {
                format!(
                    "{}:{}:theta={}:sigma={}",
                    s.algorithm, s.retraction, s.theta, s.sigma
                )
            })
            .collect();
        format!(
            "suite={} dims={} seeds={} families={} epsilons={} solvers={} max_iter={}",
            self.suite,
            dims.join(","),
            join(&self.seeds),
            join(&self.families),
            join(&self.epsilons),
            solvers.join(","),
            self.max_iter
        )
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SuiteError {
    #[error("retraction '{retraction}' is not available for suite {suite}")]
    Retraction { suite: Suite, retraction: String },
    #[error("suite {suite} expects {expected} dimension(s) per entry, got {got:?}")]
    Dims {
        suite: Suite,
        expected: usize,
        got: Vec<usize>,
    },
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error("invalid solver settings: {0}")]
    Solver(String),
}

pub enum ProblemKind {
    SphereNc(SphereProblemNC),
    Rayleigh(SphereProblemRayleigh),
    Tsvd(TsvdProblem),
    Spd(SpdProblem),
}

/// Identifying data copied into every record of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMeta {
    pub problem_id: String,
    pub manifold: String,
    pub family: String,
    pub dims: String,
    pub seed: u64,
    pub epsilon: Option<f64>,
}

pub struct Instance {
    pub meta: InstanceMeta,
    pub problem: ProblemKind,
    pub start: Ambient,
    /// Known solution when the generator constructs one.
    pub reference: Option<Ambient>,
    /// Identity shift applied to make an SPD starting matrix definite.
    pub spd_shift: f64,
}

fn dims_of(suite: Suite, d: &[usize], expected: usize) -> Result<(), SuiteError> {
    if d.len() == expected {
        Ok(())
    } else {
        Err(SuiteError::Dims {
            suite,
            expected,
            got: d.to_vec(),
        })
    }
}

/// All instances of a configuration, in a fixed order.
pub fn instances(config: &SuiteConfig) -> Result<Vec<Instance>, SuiteError> {
    let suite = config.suite;
    let mut out = Vec::new();
    for d in &config.dims {
        match suite {
            Suite::SphereNc => {
                dims_of(suite, d, 1)?;
                let n = d[0];
                for &seed in &config.seeds {
                    let inst = gen_sphere_nc(n, seed)?;
                    out.push(Instance {
                        meta: InstanceMeta {
                            problem_id: format!("sphere-nc-n{n}-s{seed}"),
                            manifold: "sphere".into(),
                            family: "nc".into(),
                            dims: n.to_string(),
                            seed,
                            epsilon: None,
                        },
                        problem: ProblemKind::SphereNc(inst.problem),
                        start: inst.start,
                        reference: None,
                        spd_shift: 0.0,
                    });
                }
            }
            Suite::Rayleigh => {
                dims_of(suite, d, 1)?;
                let n = d[0];
                for &family in &config.families {
                    for &seed in &config.seeds {
                        let inst = gen_rayleigh(family, n, seed)?;
                        out.push(Instance {
                            meta: InstanceMeta {
                                problem_id: format!("rayleigh-fam{family}-n{n}-s{seed}"),
                                manifold: "sphere".into(),
                                family: family.to_string(),
                                dims: family_order(family, n).to_string(),
                                seed,
                                epsilon: None,
                            },
                            problem: ProblemKind::Rayleigh(inst.problem),
                            start: inst.start,
                            reference: None,
                            spd_shift: 0.0,
                        });
                    }
                }
            }
            Suite::Tsvd => {
                dims_of(suite, d, 3)?;
                let (m, n, p) = (d[0], d[1], d[2]);
                for &eps in &config.epsilons {
                    for &seed in &config.seeds {
                        let inst = gen_tsvd(m, n, p, seed, eps)?;
                        out.push(Instance {
                            meta: InstanceMeta {
                                problem_id: format!("tsvd-{m}x{n}x{p}-eps{eps:e}-s{seed}"),
                                manifold: "stiefel-product".into(),
                                family: "tsvd".into(),
                                dims: format!("{m}x{n}x{p}"),
                                seed,
                                epsilon: Some(eps),
                            },
                            problem: ProblemKind::Tsvd(inst.problem),
                            start: inst.start.to_ambient(),
                            reference: Some(inst.solution.to_ambient()),
                            spd_shift: 0.0,
                        });
                    }
                }
            }
            Suite::SpdF1 | Suite::SpdF2 => {
                dims_of(suite, d, 1)?;
                let n = d[0];
                let which = if suite == Suite::SpdF1 {
                    SpdObjective::F1
                } else {
                    SpdObjective::F2
                };
                for &family in &config.families {
                    for &seed in &config.seeds {
                        let (p0, shift) = gen_spd_point(family, n, seed)?;
                        let order = p0.nrows();
                        out.push(Instance {
                            meta: InstanceMeta {
                                problem_id: format!("spd-{which}-fam{family}-n{n}-s{seed}"),
                                manifold: "spd".into(),
                                family: family.to_string(),
                                dims: order.to_string(),
                                seed,
                                epsilon: None,
                            },
                            problem: ProblemKind::Spd(SpdProblem::new(order, which)),
                            start: Ambient::single(p0),
                            reference: Some(Ambient::single(nalgebra::DMatrix::identity(
                                order, order,
                            ))),
                            spd_shift: shift,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Result of one solver run.
pub struct Outcome {
    pub record: BenchmarkRecord,
    pub trace: IterationTrace,
}

fn timed_run<P: FieldProblem>(
    problem: &P,
    config: &SolverConfig<<P::Space as Manifold>::Retraction>,
    start: &Ambient,
) -> Result<(IterationTrace, f64), SuiteError> {
    let clock = Instant::now();
    let trace = run(problem, config, start).map_err(|e| SuiteError::Solver(e.to_string()))?;
    Ok((trace, clock.elapsed().as_secs_f64()))
}

fn solver_config<R>(spec: &SolverSpec, retraction: R, max_iter: usize) -> SolverConfig<R> {
    let mut c = SolverConfig::new(spec.algorithm, retraction)
        .with_theta(spec.theta)
        .with_sigma(spec.sigma);
    c.max_iter = max_iter;
    c
}

fn parse_retraction<R: FromStr>(suite: Suite, name: &str) -> Result<R, SuiteError> {
    name.parse().map_err(|_| SuiteError::Retraction {
        suite,
        retraction: name.to_string(),
    })
}

/// Runs one solver on one instance. Solver failures end up in the record's
/// status; only invalid settings produce an error.
pub fn solve(
    instance: &Instance,
    suite: Suite,
    spec: &SolverSpec,
    max_iter: usize,
) -> Result<Outcome, SuiteError> {
    let (trace, secs) = match &instance.problem {
        ProblemKind::SphereNc(p) => {
            let r: SphereRetraction = parse_retraction(suite, &spec.retraction)?;
            timed_run(p, &solver_config(spec, r, max_iter), &instance.start)?
        }
        ProblemKind::Rayleigh(p) => {
            let r: SphereRetraction = parse_retraction(suite, &spec.retraction)?;
            timed_run(p, &solver_config(spec, r, max_iter), &instance.start)?
        }
        ProblemKind::Tsvd(p) => {
            let r: StiefelRetraction = parse_retraction(suite, &spec.retraction)?;
            timed_run(p, &solver_config(spec, r, max_iter), &instance.start)?
        }
        ProblemKind::Spd(p) => {
            let r: SpdRetraction = parse_retraction(suite, &spec.retraction)?;
            timed_run(p, &solver_config(spec, r, max_iter), &instance.start)?
        }
    };
    let meta = &instance.meta;
    let record = BenchmarkRecord {
        problem_id: meta.problem_id.clone(),
        manifold: meta.manifold.clone(),
        family: meta.family.clone(),
        dims: meta.dims.clone(),
        seed: meta.seed,
        epsilon: meta.epsilon,
        algorithm: spec.algorithm.number(),
        retraction: spec.retraction.clone(),
        theta: spec.theta,
        sigma: spec.sigma,
        iters: trace.iterations(),
        field_evals: trace.field_evals,
        cpu_seconds: secs,
        status: trace.status,
        final_merit: trace.final_merit,
        final_stationarity: trace.final_stationarity,
    };
    Ok(Outcome { record, trace })
}

/// One record per (instance × solver), instance-major.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<BenchmarkRecord>, SuiteError> {
    if config.solvers.is_empty() {
        return Ok(Vec::new());
    }
    for spec in &config.solvers {
        if !config.suite.retractions().contains(&spec.retraction) {
            return Err(SuiteError::Retraction {
                suite: config.suite,
                retraction: spec.retraction.clone(),
            });
        }
        solver_config(spec, (), config.max_iter)
            .validate()
            .map_err(|e| SuiteError::Solver(e.to_string()))?;
    }
    let mut records = Vec::new();
    for inst in instances(config)? {
        for spec in &config.solvers {
            records.push(solve(&inst, config.suite, spec, config.max_iter)?.record);
        }
    }
    Ok(records)
}
