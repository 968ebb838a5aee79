//! Separation-oracle convex feasibility by random walks: cutting-plane
//! iterations anchored at approximate centroids, with a ball-walk sampler
//! whose step ellipsoid adapts to the covariance of surviving warm-start
//! points.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::linalg;

/// Answer from a separation oracle.
#[derive(Debug, Clone)]
pub enum Separation {
    Inside,
    /// Halfspace `<normal, z> <= offset` containing the target set and
    /// excluding the queried point.
    Cut { normal: DVector<f64>, offset: f64 },
}

pub trait SeparationOracle {
    fn separate(&mut self, z: &DVector<f64>) -> Separation;
}

impl<F: FnMut(&DVector<f64>) -> Separation> SeparationOracle for F {
    fn separate(&mut self, z: &DVector<f64>) -> Separation {
        self(z)
    }
}

/// A convex feasibility problem described through a separation oracle, with
/// inner radius `r` and outer radius `R` bounding the target set between two
/// infinity-norm cubes.
pub struct ConvexProblem<'a> {
    pub dim: usize,
    pub oracle: &'a mut dyn SeparationOracle,
    pub r: f64,
    pub big_r: f64,
    pub delta: f64,
}

/// Tuning knobs for the walk. The asymptotic orders come from the source
/// algorithm; the constants are empirical and exposed here.
#[derive(Debug, Clone)]
pub struct WalkConfig {
    /// Step size; `None` means `0.5 / sqrt(d)`.
    pub eta: Option<f64>,
    /// Samples per batch: `N = ceil(c_samples * d * ln(1/delta))`.
    pub c_samples: f64,
    /// Accepted steps between emitted samples: `N' = ceil(c_inner * d^3 * N)`.
    pub c_inner: f64,
    /// Hard override for the accepted steps between samples.
    pub inner_override: Option<usize>,
    /// Hard override for the cutting iteration budget
    /// (default `ceil(2 d ln(R / (delta r)))`).
    pub max_cuts_override: Option<usize>,
    /// Cut through the oracle's offset instead of the queried centroid.
    pub tighter_cuts: bool,
    /// Consecutive rejected proposals before the sampler reports a stall.
    pub stall_limit: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            eta: None,
            c_samples: 4.0,
            c_inner: 8.0,
            inner_override: None,
            max_cuts_override: None,
            tighter_cuts: false,
            stall_limit: 10_000,
        }
    }
}

impl WalkConfig {
    pub fn num_samples(&self, dim: usize, delta: f64) -> usize {
        ((self.c_samples * dim as f64 * (1.0 / delta).ln()).ceil() as usize).max(4)
    }

    pub fn inner_iters(&self, dim: usize, n_samples: usize) -> usize {
        self.inner_override.unwrap_or_else(|| {
            ((self.c_inner * (dim as f64).powi(3) * n_samples as f64).ceil() as usize).max(1)
        })
    }

    pub fn max_cuts(&self, dim: usize, r: f64, big_r: f64, delta: f64) -> usize {
        self.max_cuts_override.unwrap_or_else(|| {
            ((2.0 * dim as f64 * (big_r / (delta * r)).ln()).ceil() as usize).max(1)
        })
    }
}

/// Result of a feasibility solve.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(DVector<f64>),
    Empty,
}

/// Diagnostics accumulated over one solve.
#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub oracle_calls: usize,
    pub cuts: usize,
    pub proposals: usize,
    pub accepted: usize,
}

impl SolveTrace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

impl std::fmt::Display for SolveTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "oracle_calls = {}", self.oracle_calls)?;
        writeln!(f, "cuts = {}", self.cuts)?;
        writeln!(f, "proposals = {}", self.proposals)?;
        writeln!(f, "accepted = {}", self.accepted)?;
        write!(f, "acceptance_rate = {}", self.acceptance_rate())
    }
}

/// The current localization set: the initial cube intersected with the
/// accumulated halfspace cuts.
struct CutRegion {
    half_width: f64,
    cuts: Vec<(DVector<f64>, f64)>,
}

impl CutRegion {
    fn contains(&self, z: &DVector<f64>) -> bool {
        z.amax() <= self.half_width && self.cuts.iter().all(|(a, b)| a.dot(z) <= *b)
    }
}

/// Runs the cutting-plane loop. On `Feasible(z)` the oracle has confirmed
/// `z`; `Empty` means the iteration budget was exhausted without finding a
/// point, which certifies emptiness up to the walk's failure probability.
pub fn solve_feasibility(
    problem: ConvexProblem<'_>,
    config: &WalkConfig,
    rng: &mut dyn RngCore,
) -> Result<(Feasibility, SolveTrace)> {
    let dim = problem.dim;
    let n = config.num_samples(dim, problem.delta);
    let max_cuts = config.max_cuts(dim, problem.r, problem.big_r, problem.delta);
    let mut trace = SolveTrace::default();

    let mut region = CutRegion {
        half_width: problem.big_r,
        cuts: Vec::new(),
    };
    // The initial batch is exact: uniform samples from the cube.
    let mut points: Vec<DVector<f64>> = (0..2 * n)
        .map(|_| {
            DVector::from_fn(dim, |_, _| {
                ((&mut *rng).random::<f64>() * 2.0 - 1.0) * problem.big_r
            })
        })
        .collect();

    let oracle = problem.oracle;
    for _ in 0..max_cuts {
        let centroid = average(&points[..n], dim);
        trace.oracle_calls += 1;
        match oracle.separate(&centroid) {
            Separation::Inside => return Ok((Feasibility::Feasible(centroid), trace)),
            Separation::Cut { normal, offset } => {
                let at_query = normal.dot(&centroid);
                if at_query <= offset {
                    return Err(Error::SeparationContract {
                        lhs: at_query,
                        rhs: offset,
                    });
                }
                let bound = if config.tighter_cuts { offset } else { at_query };
                region.cuts.push((normal, bound));
                trace.cuts += 1;
            }
        }
        let warm = points[n..].to_vec();
        points = match ball_walk_sampler(
            |z| region.contains(z),
            &warm,
            n,
            config,
            dim,
            rng,
            Some(&mut trace),
        ) {
            Ok(points) => points,
            // A collapsed warm start or a stalled walk means the localized
            // region has (numerically) vanished.
            Err(Error::EmptyWarmStart) | Err(Error::SamplerStall { .. }) => {
                return Ok((Feasibility::Empty, trace))
            }
            Err(e) => return Err(e),
        };
    }
    Ok((Feasibility::Empty, trace))
}

fn average(points: &[DVector<f64>], dim: usize) -> DVector<f64> {
    let mut sum = DVector::zeros(dim);
    for p in points {
        sum += p;
    }
    sum / points.len() as f64
}

/// Ball walk over a membership-testable convex region. Returns `2n` points,
/// each separated by the configured number of accepted steps. The proposal
/// ellipsoid is `eta * Lambda^{1/2} B_2(1)` where `Lambda` is the covariance
/// of the surviving warm-start points, floored to keep full rank.
pub fn ball_walk_sampler<F: Fn(&DVector<f64>) -> bool>(
    region: F,
    warm_start: &[DVector<f64>],
    n: usize,
    config: &WalkConfig,
    dim: usize,
    rng: &mut dyn RngCore,
    mut trace: Option<&mut SolveTrace>,
) -> Result<Vec<DVector<f64>>> {
    let survivors: Vec<&DVector<f64>> = warm_start.iter().filter(|z| region(z)).collect();
    if survivors.is_empty() {
        return Err(Error::EmptyWarmStart);
    }
    let mean = {
        let mut sum = DVector::zeros(dim);
        for z in &survivors {
            sum += *z;
        }
        sum / survivors.len() as f64
    };
    let mut cov = DMatrix::zeros(dim, dim);
    for z in &survivors {
        let c = *z - &mean;
        cov.ger(1.0 / survivors.len() as f64, &c, &c, 1.0);
    }
    // Floor the spectrum relative to the leading eigenvalue so rank-deficient
    // warm starts still move in every direction; a fully degenerate warm
    // start (single point) falls back to unit proposals.
    let max_eig = cov.symmetric_eigenvalues().max();
    let sqrt_cov = if max_eig <= 1e-12 {
        DMatrix::identity(dim, dim)
    } else {
        linalg::psd_sqrt(&cov, 1e-4 * max_eig)
    };
    let eta = config.eta.unwrap_or(0.5 / (dim as f64).sqrt());
    let inner = config.inner_iters(dim, n);

    let mut current = survivors[0].clone();
    let mut out = Vec::with_capacity(2 * n);
    let mut proposals = 0usize;
    let mut accepted = 0usize;
    while out.len() < 2 * n {
        let mut steps = 0usize;
        let mut stall = 0usize;
        while steps < inner {
            let ball = sample_unit_ball(dim, rng);
            let candidate = &current + eta * (&sqrt_cov * ball);
            proposals += 1;
            if region(&candidate) {
                current = candidate;
                steps += 1;
                accepted += 1;
                stall = 0;
            } else {
                stall += 1;
                if stall >= config.stall_limit {
                    return Err(Error::SamplerStall {
                        proposals: stall,
                        warm_size: survivors.len(),
                        dim,
                    });
                }
            }
        }
        out.push(current.clone());
    }
    if let Some(t) = trace.as_deref_mut() {
        t.proposals += proposals;
        t.accepted += accepted;
    }
    Ok(out)
}

fn sample_unit_ball(dim: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    // Gaussian direction scaled by a radius with the right density.
    let gauss = DVector::from_fn(dim, |_, _| crate::envs::standard_normal(rng));
    let norm = gauss.norm().max(1e-300);
    let radius = (&mut *rng).random::<f64>().powf(1.0 / dim as f64);
    gauss * (radius / norm)
}

/// Separation oracle for an explicit halfspace intersection; handy for tests
/// and for the polytope suites.
pub struct PolytopeOracle {
    /// Rows `(a, b)` encoding `<a, z> <= b`.
    pub constraints: Vec<(DVector<f64>, f64)>,
}

impl SeparationOracle for PolytopeOracle {
    fn separate(&mut self, z: &DVector<f64>) -> Separation {
        for (a, b) in &self.constraints {
            if a.dot(z) > *b {
                return Separation::Cut {
                    normal: a.clone(),
                    offset: *b,
                };
            }
        }
        Separation::Inside
    }
}
