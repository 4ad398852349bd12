//! Numerical certification toolkit: finite-difference Jacobians, spectral
//! classification of fixed points, separatrix tracing, heteroclinic
//! membership tests, and basin censuses.
//!
//! Everything here works on an opaque `Fn(&x) -> Result<x>` map so the same
//! machinery serves the cylinder flow, the tube-conjugated diffeomorphism,
//! and the glued sphere maps (through their chart representations).

use nalgebra::{DMatrix, DVector, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Default step for central-difference Jacobians.
pub const DEFAULT_JACOBIAN_EPS: f64 = 1e-5;
/// Dead zone around modulus 1: a multiplier inside it makes the point
/// non-hyperbolic. The model's analytic multipliers (e^{±4/3}, e^{−1},
/// 1/2, 2) sit far outside.
pub const HYPERBOLICITY_BAND: f64 = 1e-3;
/// A point farther than this from its image is not accepted as fixed.
pub const FIXED_RESIDUAL_TOL: f64 = 1e-6;
/// Default offset of the separatrix seed from the saddle.
pub const DEFAULT_SEED_DIST: f64 = 1e-4;
/// Default number of map iterations when tracing a separatrix.
pub const DEFAULT_TRACE_STEPS: usize = 40;
/// Interpolated points inserted per iteration step (geometric spacing).
pub const TRACE_INTERP_PER_STEP: usize = 8;
/// Iterates beyond this norm abort the trace.
pub const TRACE_DIVERGENCE_NORM: f64 = 1e15;
/// Default forward/backward orbit length for heteroclinic membership.
pub const DEFAULT_HETEROCLINIC_STEPS: usize = 20;
/// Certification bar for heteroclinic membership: forward iteration along
/// a stable set is transversally repelling, so the bar is deliberately
/// coarse and the orbit short.
pub const DEFAULT_HETEROCLINIC_TOL: f64 = 1e-2;
/// A sample is assigned to the first sink it approaches this closely.
pub const BASIN_CAPTURE_TOL: f64 = 1e-4;
/// Default iteration budget per basin sample.
pub const DEFAULT_BASIN_ITERS: usize = 200;

/// Central-difference Jacobian of `map` at `x`.
pub fn numerical_jacobian<const N: usize>(
    map: impl Fn(&SVector<f64, N>) -> Result<SVector<f64, N>>,
    x: &SVector<f64, N>,
    eps: f64,
) -> Result<DMatrix<f64>> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::EvaluationFailed(format!(
            "difference step must be positive, got {eps}"
        )));
    }
    let mut jac = DMatrix::zeros(N, N);
    for j in 0..N {
        let mut plus = *x;
        let mut minus = *x;
        plus[j] += eps;
        minus[j] -= eps;
        let fp = map(&plus).map_err(|e| {
            Error::EvaluationFailed(format!("map failed at +eps stencil, coordinate {j}: {e}"))
        })?;
        let fm = map(&minus).map_err(|e| {
            Error::EvaluationFailed(format!("map failed at -eps stencil, coordinate {j}: {e}"))
        })?;
        for i in 0..N {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    }
    Ok(jac)
}

/// Spectral type of a fixed point, decided from multiplier moduli with a
/// dead zone of [`HYPERBOLICITY_BAND`] around modulus 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Sink,
    Source,
    /// `unstable` counts multipliers of modulus > 1.
    Saddle { unstable: usize },
    Nonhyperbolic,
}

impl FixedPointKind {
    pub fn as_str(&self) -> String {
        match self {
            FixedPointKind::Sink => "SINK".into(),
            FixedPointKind::Source => "SOURCE".into(),
            FixedPointKind::Saddle { unstable } => format!("SADDLE(u={unstable})"),
            FixedPointKind::Nonhyperbolic => "NONHYPERBOLIC".into(),
        }
    }

    pub fn unstable_count(&self) -> Option<usize> {
        match self {
            FixedPointKind::Sink => Some(0),
            FixedPointKind::Source => None,
            FixedPointKind::Saddle { unstable } => Some(*unstable),
            FixedPointKind::Nonhyperbolic => None,
        }
    }
}

/// Classification record for one fixed point.
#[derive(Debug, Clone)]
pub struct FixedPointReport<const N: usize> {
    pub location: SVector<f64, N>,
    /// |map(x) − x| at the reported location.
    pub residual: f64,
    /// Multiplier moduli, sorted descending.
    pub multipliers: Vec<f64>,
    pub kind: FixedPointKind,
    /// Unit eigenvector for the largest-modulus multiplier (inverse
    /// iteration on the shifted Jacobian). Present whenever that
    /// eigenvalue is real and simple enough for the iteration to settle;
    /// separatrix tracing seeds from it.
    pub dominant_direction: Option<SVector<f64, N>>,
}

fn kind_from_moduli(moduli: &[f64]) -> FixedPointKind {
    if moduli
        .iter()
        .any(|m| (m - 1.0).abs() <= HYPERBOLICITY_BAND)
    {
        return FixedPointKind::Nonhyperbolic;
    }
    let unstable = moduli.iter().filter(|m| **m > 1.0).count();
    if unstable == 0 {
        FixedPointKind::Sink
    } else if unstable == moduli.len() {
        FixedPointKind::Source
    } else {
        FixedPointKind::Saddle { unstable }
    }
}

/// Inverse iteration on (J − shift·I) targeted at the eigenvalue of
/// largest modulus. Tries both signs of the shift since only the modulus
/// is known; keeps the candidate with the smaller spectral residual.
fn dominant_eigenvector<const N: usize>(
    jac: &DMatrix<f64>,
    modulus: f64,
) -> Option<SVector<f64, N>> {
    let mut best: Option<(f64, DVector<f64>)> = None;
    for sign in [1.0, -1.0] {
        // Offset keeps the shifted matrix invertible when the modulus is
        // exact; it is far smaller than any spectral gap in the models.
        let shift = sign * modulus * (1.0 + 1e-8);
        let shifted = jac.clone() - DMatrix::identity(N, N) * shift;
        let Some(lu) = shifted.clone().try_inverse() else {
            continue;
        };
        let mut v = DVector::from_element(N, 1.0 / (N as f64).sqrt());
        for _ in 0..64 {
            v = &lu * v;
            let norm = v.norm();
            if !norm.is_finite() || norm == 0.0 {
                break;
            }
            v /= norm;
        }
        if !v.iter().all(|c| c.is_finite()) {
            continue;
        }
        let rayleigh = v.dot(&(jac * &v));
        let residual = (jac * &v - &v * rayleigh).norm();
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, v));
        }
    }
    let (residual, v) = best?;
    // Reject rotational (complex-pair) leading eigenvalues: no real
    // eigenvector exists and the iteration never settles.
    if residual > 1e-6 * modulus.max(1.0) {
        return None;
    }
    Some(SVector::<f64, N>::from_fn(|i, _| v[i]))
}

/// Classify `x` as a fixed point of `map`: residual gate, multiplier
/// moduli (descending) from the finite-difference Jacobian's eigenvalues,
/// and the dead-zone type rule.
pub fn classify_fixed_point<const N: usize>(
    map: impl Fn(&SVector<f64, N>) -> Result<SVector<f64, N>>,
    x: &SVector<f64, N>,
) -> Result<FixedPointReport<N>> {
    classify_fixed_point_with_eps(map, x, DEFAULT_JACOBIAN_EPS)
}

/// [`classify_fixed_point`] with an explicit difference step.
pub fn classify_fixed_point_with_eps<const N: usize>(
    map: impl Fn(&SVector<f64, N>) -> Result<SVector<f64, N>>,
    x: &SVector<f64, N>,
    eps: f64,
) -> Result<FixedPointReport<N>> {
    let image = map(x).map_err(|e| {
        Error::NotFixed(format!("map undefined at the candidate point: {e}"))
    })?;
    let residual = (image - x).norm();
    if residual.is_nan() || residual >= FIXED_RESIDUAL_TOL {
        return Err(Error::NotFixed(format!(
            "residual {residual:.3e} exceeds {FIXED_RESIDUAL_TOL:.0e}"
        )));
    }
    let jac = numerical_jacobian(&map, x, eps)?;
    let mut multipliers: Vec<f64> = jac
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    multipliers.sort_by(|a, b| b.total_cmp(a));
    let kind = kind_from_moduli(&multipliers);
    let dominant_direction = dominant_eigenvector::<N>(&jac, multipliers[0]);
    Ok(FixedPointReport {
        location: *x,
        residual,
        multipliers,
        kind,
        dominant_direction,
    })
}

/// Trace a separatrix of a one-unstable-direction saddle: seed at
/// `saddle ± seed_dist · (dominant eigenvector)` and iterate `map`,
/// inserting [`TRACE_INTERP_PER_STEP`] geometrically spaced points per
/// step (matching the exponential crawl of the linearized orbit). The
/// saddle report supplies the seed direction, so the same report can be
/// traced under the map or its inverse.
pub fn trace_separatrix<const N: usize>(
    map: impl Fn(&SVector<f64, N>) -> Result<SVector<f64, N>>,
    saddle: &FixedPointReport<N>,
    side: f64,
    steps: usize,
    seed_dist: f64,
) -> Result<Vec<SVector<f64, N>>> {
    if saddle.kind != (FixedPointKind::Saddle { unstable: 1 }) {
        return Err(Error::ConstructionFailed(format!(
            "separatrix tracing needs a saddle with one expanding direction, got {}",
            saddle.kind.as_str()
        )));
    }
    let Some(direction) = saddle.dominant_direction else {
        return Err(Error::ConstructionFailed(
            "saddle report carries no dominant eigenvector".into(),
        ));
    };
    let ratio = saddle.multipliers[0];
    let mut current = saddle.location + direction * (side.signum() * seed_dist);
    let mut out = Vec::with_capacity(1 + steps * TRACE_INTERP_PER_STEP);
    out.push(current);
    for step in 0..steps {
        let next = map(&current).map_err(|e| {
            Error::DivergedOffChart(format!("iterate {step} left the chart: {e}"))
        })?;
        if !next.iter().all(|c| c.is_finite()) || next.norm() > TRACE_DIVERGENCE_NORM {
            return Err(Error::DivergedOffChart(format!(
                "iterate {step} diverged to {next:?}"
            )));
        }
        for i in 1..=TRACE_INTERP_PER_STEP {
            let t = i as f64 / TRACE_INTERP_PER_STEP as f64;
            let w = if (ratio - 1.0).abs() < 1e-9 {
                t
            } else {
                (ratio.powf(t) - 1.0) / (ratio - 1.0)
            };
            out.push(current + (next - current) * w);
        }
        current = next;
    }
    Ok(out)
}

/// Outcome of a heteroclinic membership test: distance of the forward
/// orbit to one saddle and of the backward orbit to the other, with the
/// full sequences kept for diagnostics.
#[derive(Debug, Clone)]
pub struct HeteroclinicReport {
    pub pass: bool,
    pub tol: f64,
    /// dist(f^j(x), σ₁) for j = 0..=n_fwd (truncated if the map failed).
    pub forward_distances: Vec<f64>,
    /// dist(f^{−j}(x), σ₂) for j = 0..=n_bwd (truncated if the map failed).
    pub backward_distances: Vec<f64>,
    /// Diagnostic when either orbit left the map's domain.
    pub failure: Option<String>,
}

impl HeteroclinicReport {
    /// Re-evaluate the pass criterion at a different tolerance using the
    /// recorded orbit data. Monotone: passing at `tol` implies passing at
    /// any larger tolerance.
    pub fn passes_at(&self, tol: f64) -> bool {
        self.failure.is_none()
            && self.forward_distances.last().is_some_and(|d| *d < tol)
            && self.backward_distances.last().is_some_and(|d| *d < tol)
    }
}

/// Test whether `x` behaves like a point of W^s(σ₁) ∩ W^u(σ₂): the forward
/// orbit must come within `tol` of σ₁ after `n_fwd` steps and the backward
/// orbit within `tol` of σ₂ after `n_bwd` steps. Generic over the point
/// representation so chart-tagged sphere points work unchanged.
#[allow(clippy::too_many_arguments)]
pub fn heteroclinic_test<P: Clone>(
    forward: impl Fn(&P) -> Result<P>,
    backward: impl Fn(&P) -> Result<P>,
    dist_to_sigma1: impl Fn(&P) -> f64,
    dist_to_sigma2: impl Fn(&P) -> f64,
    x: &P,
    n_fwd: usize,
    n_bwd: usize,
    tol: f64,
) -> HeteroclinicReport {
    let mut failure = None;
    let mut forward_distances = vec![dist_to_sigma1(x)];
    let mut current = x.clone();
    for step in 0..n_fwd {
        match forward(&current) {
            Ok(next) => {
                forward_distances.push(dist_to_sigma1(&next));
                current = next;
            }
            Err(e) => {
                failure = Some(format!("forward iterate {step} failed: {e}"));
                break;
            }
        }
    }
    let mut backward_distances = vec![dist_to_sigma2(x)];
    current = x.clone();
    for step in 0..n_bwd {
        match backward(&current) {
            Ok(next) => {
                backward_distances.push(dist_to_sigma2(&next));
                current = next;
            }
            Err(e) => {
                if failure.is_none() {
                    failure = Some(format!("backward iterate {step} failed: {e}"));
                }
                break;
            }
        }
    }
    let complete =
        forward_distances.len() == n_fwd + 1 && backward_distances.len() == n_bwd + 1;
    let mut report = HeteroclinicReport {
        pass: false,
        tol,
        forward_distances,
        backward_distances,
        failure: if complete { None } else { failure },
    };
    report.pass = report.passes_at(tol);
    report
}

/// Census of where sampled orbits end up.
#[derive(Debug, Clone)]
pub struct BasinCensus {
    /// Samples captured per sink, indexed like the input sink list.
    pub sink_counts: Vec<usize>,
    pub unresolved: usize,
    pub total: usize,
}

impl BasinCensus {
    /// Fractions per sink followed by the unresolved fraction; sums to 1.
    pub fn fractions(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .sink_counts
            .iter()
            .map(|c| *c as f64 / self.total as f64)
            .collect();
        out.push(self.unresolved_fraction());
        out
    }

    pub fn unresolved_fraction(&self) -> f64 {
        self.unresolved as f64 / self.total as f64
    }
}

/// Iterate `n_samples` starts drawn from `sampler` up to `max_iters` times
/// each, assigning every orbit to the first sink it approaches within
/// [`BASIN_CAPTURE_TOL`], or UNRESOLVED. Deterministic for a fixed seed;
/// samples are independent, so the census is order-free.
pub fn basin_sample<P: Clone>(
    map: impl Fn(&P) -> Result<P>,
    sampler: impl Fn(&mut ChaCha8Rng) -> P,
    sinks: &[P],
    dist: impl Fn(&P, &P) -> f64,
    n_samples: usize,
    max_iters: usize,
    seed: u64,
) -> BasinCensus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sink_counts = vec![0usize; sinks.len()];
    let mut unresolved = 0usize;
    for _ in 0..n_samples {
        let mut x = sampler(&mut rng);
        let mut captured = false;
        for _ in 0..=max_iters {
            if let Some(hit) = sinks
                .iter()
                .position(|s| dist(&x, s) < BASIN_CAPTURE_TOL)
            {
                sink_counts[hit] += 1;
                captured = true;
                break;
            }
            match map(&x) {
                Ok(next) => x = next,
                Err(_) => break,
            }
        }
        if !captured {
            unresolved += 1;
        }
    }
    BasinCensus {
        sink_counts,
        unresolved,
        total: n_samples,
    }
}
