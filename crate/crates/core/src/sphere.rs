//! The model diffeomorphism suspended to the sphere `S^n`.
//!
//! Points of the sphere are carried in a two-chart stereographic atlas
//! ([`ChartPoint`]). In the south chart the map *is* the model
//! diffeomorphism of [`crate::tube`]; the north pole — the chart's removed
//! point — is an added fixed point, and near it the computation switches
//! to the north chart where the map becomes the doubling up to the chart
//! transition. The resulting diffeomorphism has exactly four fixed points
//! (two sinks, a saddle, a source); with the frame tube around the wild
//! arc in dimension three it is the Pixton diffeomorphism, whose
//! one-dimensional saddle separatrix closure is wildly embedded.
//!
//! The module also selects the collar annuli used by the 4-sphere
//! surgeries: the smallest shell indices `k_S`, `k_N` whose annuli stay a
//! definite margin away from the saddle's invariant sets and from the
//! region where the map differs from the plain scaling.

use nalgebra::SVector;

use crate::analysis::{classify_fixed_point, trace_separatrix, FixedPointReport};
use crate::arc::{self, WildArc, DEFAULT_LEVELS, DEFAULT_SAMPLES, DEFAULT_THETA0};
use crate::flow;
use crate::geometry::{chart_transition, stereo_from_plane, Pole, ZERO_NORM_CUTOFF};
use crate::tube::{model_diffeo, model_diffeo_inv, TubeChart, RADIAL_THETA0};
use crate::{Error, Result};

/// Chart-coordinate magnitude above which a result is re-expressed in the
/// opposite chart. Far from both the tube and the collar annuli, so the
/// inversion stays well conditioned on everything we compute with.
pub const CHART_SWAP_NORM: f64 = 10.0;
/// Distance the avoidance clouds must keep from a candidate collar annulus
/// for its index to be accepted.
pub const ANNULUS_MARGIN: f64 = 1e-2;
/// Largest annulus index tried before concluding the tube is mis-built.
pub const MAX_ANNULUS_K: u32 = 64;
/// Residual bound enforced at the four fixed points when a spec is built.
pub const FIXED_POINT_RESIDUAL_MAX: f64 = 1e-8;
/// Axial chart window outside of which the suspended map provably equals
/// the plain scaling; the avoidance clouds sample the tube boundary over
/// this window so the chosen annuli stay clear of the nontrivial region.
pub const ACTIVE_AXIAL_WINDOW: (f64, f64) = (-4.0, 3.0);

// ---------------------------------------------------------------------------
// Chart-tagged points.
// ---------------------------------------------------------------------------

/// A point of `S^n` in stereographic coordinates, tagged with the chart.
///
/// `Pole::South` tags the chart that sends the south pole to the origin
/// (domain `S^n ∖ N`); `Pole::North` the opposite one. The same sphere
/// point near neither pole has two representations, exchanged by the
/// inversion `y ↦ y/|y|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint<const N: usize> {
    pub chart: Pole,
    pub coords: SVector<f64, N>,
}

impl<const N: usize> ChartPoint<N> {
    pub fn south(coords: SVector<f64, N>) -> Self {
        ChartPoint { chart: Pole::South, coords }
    }

    pub fn north(coords: SVector<f64, N>) -> Self {
        ChartPoint { chart: Pole::North, coords }
    }

    /// The represented point of the unit sphere in `ℝ^{n+1}`.
    pub fn embed(&self) -> Vec<f64> {
        stereo_from_plane(self.coords.as_slice(), self.chart)
    }

    /// Re-express in `chart`; fails at the chart origin, which represents
    /// the removed pole of the other chart.
    pub fn to_chart(&self, chart: Pole) -> Result<Self> {
        if chart == self.chart {
            Ok(*self)
        } else {
            Ok(ChartPoint { chart, coords: chart_transition(&self.coords)? })
        }
    }

    /// Distance between the represented sphere points in the ambient
    /// `ℝ^{n+1}` (chordal metric; total, unlike chart-coordinate distance).
    pub fn chordal_distance(&self, other: &ChartPoint<N>) -> f64 {
        let a = self.embed();
        let b = other.embed();
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// South-chart norm band outside of which the model diffeomorphism *and*
/// its inverse are provably the exact scaling. The tube's quick-reject
/// range pads the nontrivial axial window by a full 2⁵ octave factor while
/// the window itself only reaches 2³, so shrinking the range by 4 on both
/// ends still brackets everything nontrivial.
fn exact_scaling_band(chart: &TubeChart) -> (f64, f64) {
    let (lo, hi) = chart.active_scale_range();
    (4.0 * lo, 0.25 * hi)
}

/// Keep coordinates bounded: swap chart when the representation grows
/// past [`CHART_SWAP_NORM`]. Leaves the tag alone otherwise.
fn normalize_chart<const N: usize>(p: ChartPoint<N>) -> ChartPoint<N> {
    let q = p.coords.norm_squared();
    if q > CHART_SWAP_NORM * CHART_SWAP_NORM {
        ChartPoint { chart: p.chart.other(), coords: p.coords / q }
    } else {
        p
    }
}

// ---------------------------------------------------------------------------
// The suspended map and its spec.
// ---------------------------------------------------------------------------

/// Which model arc the tube follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcModel {
    /// The straight control arc (radial-ray tube chart).
    Trivial,
    /// The Fox–Artin arc (frame tube chart around the certified period).
    FoxArtin,
}

impl ArcModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcModel::Trivial => "trivial",
            ArcModel::FoxArtin => "fox-artin",
        }
    }
}

/// The four fixed points of the suspended map, in their natural charts.
///
/// Under the forward map `omega` and `south_pole` are sinks, `sigma` is
/// the saddle with one expanding direction, `north_pole` is the source.
#[derive(Debug, Clone)]
pub struct SphereFixedPoints<const N: usize> {
    /// Interior sink: chart image of the flow's attracting equilibrium.
    pub omega: ChartPoint<N>,
    /// Interior saddle: chart image of the flow's saddle equilibrium.
    pub sigma: ChartPoint<N>,
    /// The south chart origin (deep end of the tube).
    pub south_pole: ChartPoint<N>,
    /// The added point at infinity.
    pub north_pole: ChartPoint<N>,
}

/// A chosen collar annulus: in its chart the shell
/// `2^{-k-1} ≤ |y| ≤ 2^{-k}`, kept `margin` away from the avoidance cloud.
#[derive(Debug, Clone, Copy)]
pub struct AnnulusChoice {
    pub k: u32,
    pub margin: f64,
}

impl AnnulusChoice {
    pub fn outer_radius(&self) -> f64 {
        2f64.powi(-(self.k as i32))
    }

    pub fn inner_radius(&self) -> f64 {
        0.5 * self.outer_radius()
    }
}

/// Everything needed to evaluate one suspended sphere diffeomorphism.
#[derive(Debug, Clone)]
pub struct SphereMapSpec<const N: usize> {
    pub arc_model: ArcModel,
    pub arc: WildArc,
    pub chart: TubeChart,
    /// South-chart collar: its annulus avoids the saddle's stable set.
    pub k_s: AnnulusChoice,
    /// North-chart collar: its annulus avoids the saddle's unstable set.
    pub k_n: AnnulusChoice,
    pub fixed_points: SphereFixedPoints<N>,
}

impl<const N: usize> SphereMapSpec<N> {
    pub fn dim(&self) -> usize {
        N
    }
}

/// Apply the suspended diffeomorphism. Total on the sphere: both poles are
/// fixed, and every other point is regular in at least one chart.
///
/// South-chart points go through the model diffeomorphism directly. For
/// north-chart coordinates `z` with `|z|` outside the band where the tube
/// can act, the south-chart map is the exact halving at both ends
/// (`|y| = 1/|z|` too large or too small), and conjugating the halving by
/// the inversion gives the exact doubling `z ↦ 2z` — returned without any
/// round trip so the far field is bitwise a scaling. In between, the point
/// is moved to the south chart and mapped there. Results are re-expressed
/// in the opposite chart when their coordinates exceed [`CHART_SWAP_NORM`].
pub fn sphere_map_apply<const N: usize>(
    spec: &SphereMapSpec<N>,
    x: &ChartPoint<N>,
) -> ChartPoint<N> {
    let out = match x.chart {
        Pole::North => {
            let q = x.coords.norm();
            let (lo, hi) = exact_scaling_band(&spec.chart);
            if q <= 1.0 / hi || q >= 1.0 / lo {
                ChartPoint::north(x.coords * 2.0)
            } else {
                let y = chart_transition(&x.coords)
                    .expect("north-chart coords in the active band are nonzero");
                let img = model_diffeo(&y, &spec.chart)
                    .expect("the model diffeomorphism is total away from the origin");
                ChartPoint::south(img)
            }
        }
        Pole::South => {
            let rho = x.coords.norm();
            if rho <= ZERO_NORM_CUTOFF {
                return *x;
            }
            let img = model_diffeo(&x.coords, &spec.chart)
                .expect("the model diffeomorphism is total away from the origin");
            ChartPoint::south(img)
        }
    };
    normalize_chart(out)
}

/// Inverse of [`sphere_map_apply`]: the doubling in the south chart far
/// field, hence the exact halving `z ↦ z/2` in the north chart's safe
/// band, and the conjugated backward time-one map inside the tube.
pub fn sphere_map_apply_inv<const N: usize>(
    spec: &SphereMapSpec<N>,
    x: &ChartPoint<N>,
) -> ChartPoint<N> {
    let out = match x.chart {
        Pole::North => {
            let q = x.coords.norm();
            let (lo, hi) = exact_scaling_band(&spec.chart);
            if q <= 1.0 / hi || q >= 1.0 / lo {
                ChartPoint::north(x.coords * 0.5)
            } else {
                let y = chart_transition(&x.coords)
                    .expect("north-chart coords in the active band are nonzero");
                let img = model_diffeo_inv(&y, &spec.chart)
                    .expect("the model diffeomorphism is total away from the origin");
                ChartPoint::south(img)
            }
        }
        Pole::South => {
            let rho = x.coords.norm();
            if rho <= ZERO_NORM_CUTOFF {
                return *x;
            }
            let img = model_diffeo_inv(&x.coords, &spec.chart)
                .expect("the model diffeomorphism is total away from the origin");
            ChartPoint::south(img)
        }
    };
    normalize_chart(out)
}

/// The suspended map expressed as a self-map of one fixed chart, for
/// Jacobian-based classification near points away from the opposite pole.
pub fn chart_map<const N: usize>(
    spec: &SphereMapSpec<N>,
    chart: Pole,
) -> impl Fn(&SVector<f64, N>) -> Result<SVector<f64, N>> + '_ {
    move |x: &SVector<f64, N>| {
        let img = sphere_map_apply(spec, &ChartPoint { chart, coords: *x });
        Ok(img.to_chart(chart)?.coords)
    }
}

/// Same for the inverse map.
pub fn chart_map_inv<const N: usize>(
    spec: &SphereMapSpec<N>,
    chart: Pole,
) -> impl Fn(&SVector<f64, N>) -> Result<SVector<f64, N>> + '_ {
    move |x: &SVector<f64, N>| {
        let img = sphere_map_apply_inv(spec, &ChartPoint { chart, coords: *x });
        Ok(img.to_chart(chart)?.coords)
    }
}

// ---------------------------------------------------------------------------
// Collar annulus selection.
// ---------------------------------------------------------------------------

/// Distance from a point at radius `r` to the closed shell
/// `[outer/2, outer]` (radial distance; the shells are rotation-invariant
/// so only norms matter).
fn shell_distance(r: f64, outer: f64) -> f64 {
    let inner = 0.5 * outer;
    if r > outer {
        r - outer
    } else if r < inner {
        inner - r
    } else {
        0.0
    }
}

/// Smallest `k ≤ MAX_ANNULUS_K` whose shell keeps more than
/// [`ANNULUS_MARGIN`] from every radius in `cloud`.
fn pick_annulus(cloud: &[f64], what: &str) -> Result<AnnulusChoice> {
    for k in 1..=MAX_ANNULUS_K {
        let outer = 2f64.powi(-(k as i32));
        let margin = cloud
            .iter()
            .map(|&r| shell_distance(r, outer))
            .fold(f64::INFINITY, f64::min);
        if margin > ANNULUS_MARGIN {
            return Ok(AnnulusChoice { k, margin });
        }
    }
    Err(Error::NotFound(format!(
        "no collar annulus with k <= {MAX_ANNULUS_K} clears the {what} cloud by {ANNULUS_MARGIN}"
    )))
}

/// Unit directions spanning the transverse factor of the chart cylinder
/// (coordinates `1..N`), as full chart vectors with zero axial part.
fn transverse_directions<const N: usize>(count: usize) -> Vec<SVector<f64, N>> {
    let mut dirs = Vec::with_capacity(count);
    if N >= 4 {
        // Fibonacci lattice on the transverse 2-sphere.
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        for i in 0..count {
            let t = (i as f64 + 0.5) / count as f64;
            let z = 1.0 - 2.0 * t;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = std::f64::consts::TAU * (i as f64 / golden).fract();
            let mut d = SVector::<f64, N>::zeros();
            d[1] = r * phi.cos();
            d[2] = r * phi.sin();
            d[3] = z;
            dirs.push(d);
        }
    } else {
        for i in 0..count {
            let phi = std::f64::consts::TAU * i as f64 / count as f64;
            let mut d = SVector::<f64, N>::zeros();
            d[1] = phi.cos();
            d[2] = phi.sin();
            dirs.push(d);
        }
    }
    dirs
}

/// Norms of ambient south-chart points on the tube boundary over the
/// active axial window — the region where the map can differ from the
/// plain scaling. Both collar annuli must stay clear of it so the collars
/// sit in the exact-scaling far field.
fn tube_window_norms<const N: usize>(chart: &TubeChart) -> Result<Vec<f64>> {
    let dirs = transverse_directions::<N>(if N >= 4 { 48 } else { 24 });
    let (lam_lo, lam_hi) = ACTIVE_AXIAL_WINDOW;
    let steps = ((lam_hi - lam_lo) / 0.1).round() as usize;
    let mut norms = Vec::with_capacity((steps + 1) * dirs.len());
    for i in 0..=steps {
        let lam = lam_lo + (lam_hi - lam_lo) * i as f64 / steps as f64;
        for d in &dirs {
            let mut c = d * 2.0;
            c[0] = lam;
            norms.push(chart.zeta_inv(&c)?.norm());
        }
    }
    Ok(norms)
}

/// The saddle's stable set, sampled in ambient south-chart coordinates.
///
/// In the chart cylinder the stable set of the saddle `(1, 0)` is the
/// surface of revolution of the backward orbit of `(1, δ)`: transversally
/// the backward flow expands away from the axis until the orbit leaves the
/// perturbed ball, after which the transverse radius is frozen and the
/// profile continues as an exact cylinder. The cloud revolves that profile
/// and maps it through the tube chart.
fn stable_cloud_norms<const N: usize>(chart: &TubeChart) -> Result<Vec<f64>> {
    let dirs = transverse_directions::<N>(if N >= 4 { 48 } else { 24 });
    let mut profile: Vec<(f64, f64)> = vec![(1.0, 1e-8)];
    let mut state = SVector::<f64, 2>::new(1.0, 1e-8);
    for _ in 0..4000 {
        state = flow::integrate(&state, -0.05, flow::DEFAULT_DT)?;
        profile.push((state[0], state[1]));
        if state[0] < ACTIVE_AXIAL_WINDOW.0 - 0.5 {
            break;
        }
    }
    let mut norms = Vec::with_capacity(profile.len() * dirs.len());
    for &(lam, w) in &profile {
        for d in &dirs {
            let mut c = d * w;
            c[0] = lam;
            norms.push(chart.zeta_inv(&c)?.norm());
        }
    }
    Ok(norms)
}

/// The saddle's unstable set (closure), in ambient south-chart
/// coordinates: both traced separatrices plus a grid on the invariant tube
/// core from the interior sink through the saddle into the deep end.
fn unstable_cloud_norms<const N: usize>(chart: &TubeChart) -> Result<Vec<f64>> {
    let map = |x: &SVector<f64, N>| model_diffeo(x, chart);
    let mut sigma_chart = SVector::<f64, N>::zeros();
    sigma_chart[0] = 1.0;
    let sigma = chart.zeta_inv(&sigma_chart)?;
    let report = classify_fixed_point(map, &sigma)?;
    let mut norms = Vec::new();
    for side in [1.0, -1.0] {
        for p in trace_separatrix(map, &report, side, 60, 1e-4)? {
            norms.push(p.norm());
        }
    }
    // Core grid over the closure's axial extent (sink at level -1 through
    // the saddle at level +1, then the deep escape branch).
    for i in 0..=280 {
        let lam = -1.0 + i as f64 * 0.025;
        let mut c = SVector::<f64, N>::zeros();
        c[0] = lam;
        norms.push(chart.zeta_inv(&c)?.norm());
    }
    Ok(norms)
}

/// Choose the collar annulus indices for a spec in progress.
///
/// `k_S` indexes the south-chart shell `2^{-k_S-1} ≤ |y| ≤ 2^{-k_S}`,
/// which must avoid the saddle's stable set; `k_N` the north-chart shell
/// avoiding the unstable set. Both clouds also include the tube boundary
/// over the active axial window, which keeps the collars inside the
/// far field where the map is the exact scaling. Returns the smallest
/// passing indices with the margins achieved.
pub fn choose_k<const N: usize>(chart: &TubeChart) -> Result<(AnnulusChoice, AnnulusChoice)> {
    let window = tube_window_norms::<N>(chart)?;

    let mut south_cloud = stable_cloud_norms::<N>(chart)?;
    south_cloud.extend_from_slice(&window);
    let k_s = pick_annulus(&south_cloud, "stable-set")?;

    let mut north_cloud: Vec<f64> = unstable_cloud_norms::<N>(chart)?
        .into_iter()
        .map(|r| 1.0 / r)
        .collect();
    north_cloud.extend(window.iter().map(|&r| 1.0 / r));
    let k_n = pick_annulus(&north_cloud, "unstable-set")?;

    Ok((k_s, k_n))
}

// ---------------------------------------------------------------------------
// Spec construction.
// ---------------------------------------------------------------------------

/// Build the suspended-map spec for the given arc model in dimension `N`.
///
/// The interior fixed points are the chart images of the flow's two
/// equilibria on the axis; the poles complete the four. The collar indices
/// are chosen by [`choose_k`], and the four fixed-point residuals are
/// verified against [`FIXED_POINT_RESIDUAL_MAX`] before the spec is
/// returned.
pub fn build_sphere_map<const N: usize>(model: ArcModel) -> Result<SphereMapSpec<N>> {
    let (arc, chart) = match model {
        ArcModel::Trivial => (
            arc::trivial_arc(DEFAULT_LEVELS, DEFAULT_SAMPLES),
            TubeChart::radial(RADIAL_THETA0)?,
        ),
        ArcModel::FoxArtin => {
            let gen = arc::build_generator(DEFAULT_SAMPLES)?;
            let wild = arc::assemble_wild_arc(&gen, DEFAULT_LEVELS);
            let chart = TubeChart::around_period(gen.period_polyline(), DEFAULT_THETA0)?;
            (wild, chart)
        }
    };

    let mut omega_c = SVector::<f64, N>::zeros();
    omega_c[0] = -1.0;
    let mut sigma_c = SVector::<f64, N>::zeros();
    sigma_c[0] = 1.0;
    let fixed_points = SphereFixedPoints {
        omega: ChartPoint::south(chart.zeta_inv(&omega_c)?),
        sigma: ChartPoint::south(chart.zeta_inv(&sigma_c)?),
        south_pole: ChartPoint::south(SVector::zeros()),
        north_pole: ChartPoint::north(SVector::zeros()),
    };

    let (k_s, k_n) = choose_k::<N>(&chart)?;
    let spec = SphereMapSpec { arc_model: model, arc, chart, k_s, k_n, fixed_points };

    for (name, p) in [
        ("omega", &spec.fixed_points.omega),
        ("sigma", &spec.fixed_points.sigma),
        ("south pole", &spec.fixed_points.south_pole),
        ("north pole", &spec.fixed_points.north_pole),
    ] {
        let residual = sphere_map_apply(&spec, p).chordal_distance(p);
        if residual.is_nan() || residual >= FIXED_POINT_RESIDUAL_MAX {
            return Err(Error::ConstructionFailed(format!(
                "suspended map moves {name} by {residual:.3e}"
            )));
        }
    }
    Ok(spec)
}

/// The Pixton diffeomorphism: the suspended map of the Fox–Artin frame
/// tube on `S³`.
pub fn pixton_map() -> Result<SphereMapSpec<3>> {
    build_sphere_map::<3>(ArcModel::FoxArtin)
}

/// Classify the four fixed points (each in its natural chart).
///
/// Returns `(name, report)` pairs in the order omega, south pole, sigma,
/// north pole. For the forward map the expected spectral types are
/// sink, sink, saddle with one expanding direction, source.
pub fn sphere_census<const N: usize>(
    spec: &SphereMapSpec<N>,
) -> Result<Vec<(&'static str, FixedPointReport<N>)>> {
    let mut out = Vec::with_capacity(4);
    let south = chart_map(spec, Pole::South);
    out.push(("omega", classify_fixed_point(&south, &spec.fixed_points.omega.coords)?));
    out.push(("south-pole", classify_fixed_point(&south, &spec.fixed_points.south_pole.coords)?));
    out.push(("sigma", classify_fixed_point(&south, &spec.fixed_points.sigma.coords)?));
    let north = chart_map(spec, Pole::North);
    out.push(("north-pole", classify_fixed_point(&north, &spec.fixed_points.north_pole.coords)?));
    Ok(out)
}
