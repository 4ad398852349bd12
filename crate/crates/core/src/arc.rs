//! Construction and certification of the self-similar arc chain.
//!
//! One period of the chain is a three-piece generator `a ∪ h⁻¹(b) ∪ c`
//! running from `α = (1,0,0)` through `β`, `γ` and ending at `h(α)`; the
//! full arc is the union of all `h^k` images of that period, which makes it
//! invariant under the homothety by construction. The pieces are sampled
//! from smooth cylindrical profiles that are *exactly* radial and planar
//! near every junction, so the chain passes straight through each junction
//! and all self-similarity identities hold bitwise.
//!
//! The module also builds the spanning strip between `b` and `h(d)` (the
//! half-scale copy of the equatorial arc `d`), certifies the arc conditions
//! with exact intersection counts, and produces the knot obtained by
//! projecting one period to the mapping torus of the homothety — the
//! closed curve whose winding number distinguishes the wild chain from the
//! straight one.

use crate::geometry::{covering_project, MonotoneCubic};
use crate::predicates::{
    boxes_overlap, perturbation_offset, segment_triangle, SegTri,
};
use crate::{Error, Result, V3};
use serde::Serialize;

/// Default number of segments for pieces `a`, `c` (piece `b` uses twice as
/// many).
pub const DEFAULT_SAMPLES: usize = 64;
/// Default number of homothety levels on each side of the base period.
pub const DEFAULT_LEVELS: u32 = 3;
/// Default relative tube radius used by the embedding diagnostics.
pub const DEFAULT_THETA0: f64 = 0.05;

/// Largest admissible junction angle defect, in degrees.
pub const JUNCTION_DEFECT_MAX_DEG: f64 = 5.0;
/// The strip stays outside the half-scale sphere when every ruling has
/// endpoint dot product above this bound.
pub const RULING_DOT_MIN: f64 = 0.25;
/// Tubes around distinct strands must be separated by more than the sum of
/// their radii: clearance ratio strictly above one.
pub const CLEARANCE_RATIO_MIN: f64 = 1.0;
/// Curvature times tube radius must stay below this bound for the tube to
/// be locally embedded (and for the clearance skip window to be sound).
pub const CURVATURE_RADIUS_MAX: f64 = 0.5;

// Pairs closer than this factor times the sum of tube radii *along the
// curve* are neighbours of the same strand, not separate strands.
const CLEARANCE_SKIP_FACTOR: f64 = 3.0;
// Scale of the deterministic perturbation used to resolve degenerate
// incidences in the crossing counts.
const PERTURBATION_SCALE: f64 = 1e-10;
// Dense parameter sampling of the smooth profiles before resampling.
const DENSE_SAMPLES: usize = 4096;

// ---------------------------------------------------------------------------
// Smooth cylindrical profiles for the generator pieces.
//
// All three pieces are given as (radius, angle°, height) functions of a
// parameter u ∈ [0,1], built from clamped quintic ramps. Near u = 0 and
// u = 1 the angle and height are exactly constant, so the curves enter and
// leave every junction along an exact radial line.
// ---------------------------------------------------------------------------

// Radial dip of piece `a` below the unit sphere.
const A_DIP: f64 = 0.34;
// Piece `a` angle ramp is active on this parameter window.
const A_SWEEP: (f64, f64) = (0.10, 0.80);

// Piece `b`: the shape parameters live in one bundle so the defaults can
// be exercised (and stress-tested) as a unit. The gate swing carries `b`
// into the neighbouring sector below the equatorial plane; the height
// comes back up through zero near the swing apex (the fold), which is
// what threads the strip once through `a` (and, on the mirror gate, once
// through `c`) away from the junction spokes. All ramps overlap broadly:
// whenever one velocity component hands off to another, a third carries
// the speed, keeping the tube curvature bound comfortable.
#[derive(Debug, Clone, Copy)]
struct BParams {
    /// Main 120°→240° sweep window (start, width).
    sweep: (f64, f64),
    /// Gate swing amplitude (degrees below 120° / above 240°).
    gate_amp_deg: f64,
    /// Gate bump center and half-width in parameter space.
    gate_center: f64,
    gate_width: f64,
    /// Radial rise above 1/2 and its ramp width.
    rise: f64,
    rise_width: f64,
    /// Radial overshoot at the gates: keeps the in-plane speed up while
    /// the height dives and climbs, so the space curve bends gently. The
    /// rise and fall windows are independent (the fall is slower, easing
    /// the hand-back to the plateau radius after the fold).
    over: f64,
    over_rise: (f64, f64),
    over_fall: (f64, f64),
    /// Shallow radial dip across the plateau.
    plateau_dip: f64,
    plateau_dip_width: f64,
    /// Depth, center and half-width of the below-plane dives at the gates.
    dip: f64,
    dip_center: f64,
    dip_width: f64,
    /// Height and ramp geometry of the above-plane plateau hump.
    hump: f64,
    hump_start: f64,
    hump_width: f64,
}

const B_DEFAULTS: BParams = BParams {
    sweep: (0.26, 0.48),
    gate_amp_deg: 12.0,
    gate_center: 0.24,
    gate_width: 0.17,
    rise: 0.26,
    rise_width: 0.22,
    over: 0.20,
    over_rise: (0.15, 0.15),
    over_fall: (0.44, 0.16),
    plateau_dip: 0.03,
    plateau_dip_width: 0.26,
    dip: 0.20,
    dip_center: 0.20,
    dip_width: 0.13,
    hump: 0.22,
    hump_start: 0.26,
    hump_width: 0.13,
};

// Piece `c`: first and final radial descents and the angle ramp window.
const C_DROP1: f64 = 0.28;
const C_DROP1_WIDTH: f64 = 0.36;
const C_DROP2: f64 = 0.22;
const C_DROP2_START: f64 = 0.70;
const C_DROP2_WIDTH: f64 = 0.30;
const C_SWEEP: (f64, f64) = (0.10, 0.80);

// Arclength-fraction pairing between the strip rim `b` and the half-scale
// equatorial arc: flat near the corners (keeping rulings short where the
// rim sits on the half sphere) and steep across the gates so the fold
// chords overshoot the junction spokes.
const PAIRING_KNOTS: [(f64, f64); 9] = [
    (0.0, 0.0),
    (0.06, 0.004),
    (0.145, 0.118),
    (0.26, 0.138),
    (0.5, 0.5),
    (0.74, 0.862),
    (0.855, 0.882),
    (0.94, 0.996),
    (1.0, 1.0),
];

/// Clamped quintic smoothstep: 0 for `x ≤ 0`, 1 for `x ≥ 1`, C² everywhere.
fn qstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// C² bump supported on `|x| < 1` with unit height at `x = 0`.
fn qbump(x: f64) -> f64 {
    qstep(1.0 - x.abs())
}

/// Cartesian point from cylindrical data with the angle in degrees.
fn cyl(r: f64, theta_deg: f64, z: f64) -> V3 {
    let t = theta_deg.rem_euclid(360.0).to_radians();
    V3::new(r * t.cos(), r * t.sin(), z)
}

fn profile_a(u: f64) -> V3 {
    let r = 1.0 - A_DIP * (std::f64::consts::PI * u).sin();
    let theta = 120.0 * qstep((u - A_SWEEP.0) / A_SWEEP.1);
    cyl(r, theta, 0.0)
}

fn profile_b_with(p: &BParams, u: f64) -> V3 {
    let theta = 120.0 + 120.0 * qstep((u - p.sweep.0) / p.sweep.1)
        - p.gate_amp_deg * qbump((u - p.gate_center) / p.gate_width)
        + p.gate_amp_deg * qbump((u - (1.0 - p.gate_center)) / p.gate_width);
    let over_gate = |v: f64| {
        p.over * qstep((v - p.over_rise.0) / p.over_rise.1) * qstep((p.over_fall.0 - v) / p.over_fall.1)
    };
    let r = 0.5 + p.rise * qstep(u / p.rise_width) * qstep((1.0 - u) / p.rise_width)
        + over_gate(u)
        + over_gate(1.0 - u)
        - p.plateau_dip * qbump((u - 0.5) / p.plateau_dip_width);
    let z = -p.dip * qbump((u - p.dip_center) / p.dip_width)
        - p.dip * qbump((u - (1.0 - p.dip_center)) / p.dip_width)
        + p.hump
            * qstep((u - p.hump_start) / p.hump_width)
            * qstep((1.0 - u - p.hump_start) / p.hump_width);
    cyl(r, theta, z)
}

fn profile_b(u: f64) -> V3 {
    profile_b_with(&B_DEFAULTS, u)
}

fn profile_c(u: f64) -> V3 {
    let r = 1.0
        - C_DROP1 * qstep(u / C_DROP1_WIDTH)
        - C_DROP2 * qstep((u - C_DROP2_START) / C_DROP2_WIDTH);
    let theta = 240.0 + 120.0 * qstep((u - C_SWEEP.0) / C_SWEEP.1);
    cyl(r, theta, 0.0)
}

/// First junction of the chain: `α = (1, 0, 0)`.
pub fn alpha() -> V3 {
    V3::new(1.0, 0.0, 0.0)
}

/// Second junction `β` on the unit sphere at 120°.
pub fn beta() -> V3 {
    cyl(1.0, 120.0, 0.0)
}

/// Third junction `γ` on the unit sphere at 240°.
pub fn gamma() -> V3 {
    cyl(1.0, 240.0, 0.0)
}

// ---------------------------------------------------------------------------
// Polyline utilities.
// ---------------------------------------------------------------------------

/// Resample a polyline to `segments` equal-arclength segments. The first
/// and last output vertices are the input endpoints, bit for bit.
pub fn resample_polyline(points: &[V3], segments: usize) -> Result<Vec<V3>> {
    if points.len() < 2 || segments == 0 {
        return Err(Error::ConstructionFailed(
            "resampling needs at least two points and one segment".into(),
        ));
    }
    let mut cum = Vec::with_capacity(points.len());
    cum.push(0.0);
    for w in points.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::ConstructionFailed(
            "cannot resample a polyline of zero length".into(),
        ));
    }
    let mut out = Vec::with_capacity(segments + 1);
    out.push(points[0]);
    for k in 1..segments {
        let target = total * k as f64 / segments as f64;
        let idx = cum
            .partition_point(|&v| v < target)
            .clamp(1, points.len() - 1);
        let seg = cum[idx] - cum[idx - 1];
        let t = if seg > 0.0 {
            ((target - cum[idx - 1]) / seg).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[idx - 1] + (points[idx] - points[idx - 1]) * t);
    }
    out.push(points[points.len() - 1]);
    Ok(out)
}

fn sample_piece(profile: impl Fn(f64) -> V3, segments: usize) -> Result<Vec<V3>> {
    let dense: Vec<V3> = (0..=DENSE_SAMPLES)
        .map(|i| profile(i as f64 / DENSE_SAMPLES as f64))
        .collect();
    resample_polyline(&dense, segments)
}

// ---------------------------------------------------------------------------
// The generator.
// ---------------------------------------------------------------------------

/// One period of the chain: pieces `a` (α→β, in-plane), `b` (h(β)→h(γ),
/// the rim of the spanning strip) and `c` (γ→h(α), in-plane). Piece `b`
/// carries twice the segment count of the other two.
#[derive(Debug, Clone)]
pub struct Generator {
    pub a: Vec<V3>,
    pub b: Vec<V3>,
    pub c: Vec<V3>,
    pub samples: usize,
}

/// Build the generator at a given density (segments on `a` and `c`).
pub fn build_generator(samples: usize) -> Result<Generator> {
    if samples < 16 {
        return Err(Error::ConstructionFailed(format!(
            "generator needs at least 16 segments per piece, got {samples}"
        )));
    }
    let mut a = sample_piece(profile_a, samples)?;
    let mut b = sample_piece(profile_b, 2 * samples)?;
    let mut c = sample_piece(profile_c, samples)?;
    // Junction snapping: shared endpoints must agree bit for bit across
    // pieces and across homothety levels.
    a[0] = alpha();
    a[samples] = beta();
    b[0] = beta() * 0.5;
    b[2 * samples] = gamma() * 0.5;
    c[0] = gamma();
    c[samples] = alpha() * 0.5;
    Ok(Generator { a, b, c, samples })
}

impl Generator {
    /// The full period polyline `a ∪ h⁻¹(b) ∪ c` from `α` to `h(α)`,
    /// with `4·samples + 1` vertices.
    pub fn period_polyline(&self) -> Vec<V3> {
        let s = self.samples;
        let mut p = Vec::with_capacity(4 * s + 1);
        p.extend_from_slice(&self.a[..s]);
        p.extend(self.b.iter().take(2 * s).map(|v| v * 2.0));
        p.extend_from_slice(&self.c);
        p
    }

    /// Negative control: replace `b` by the straight chord between its
    /// endpoints. The chord cuts inside the half-scale sphere and carries
    /// no height, so both the shell condition and the strip crossing
    /// counts must fail.
    pub fn with_chord_b(&self) -> Generator {
        let m = self.b.len() - 1;
        let p = self.b[0];
        let q = self.b[m];
        let b = (0..=m)
            .map(|j| p + (q - p) * (j as f64 / m as f64))
            .collect();
        Generator {
            a: self.a.clone(),
            b,
            c: self.c.clone(),
            samples: self.samples,
        }
    }

    /// Negative control: flatten `b` into the equatorial plane. The
    /// flattened rim collides with the junction spokes, so the embedding
    /// clearance must fail.
    pub fn with_flat_b(&self) -> Generator {
        let b = self.b.iter().map(|v| V3::new(v.x, v.y, 0.0)).collect();
        Generator {
            a: self.a.clone(),
            b,
            c: self.c.clone(),
            samples: self.samples,
        }
    }
}

/// The equatorial arc `d` from `β` to `γ` through 180°, on the unit
/// sphere.
pub fn d_arc(segments: usize) -> Vec<V3> {
    let mut pts: Vec<V3> = (0..=segments)
        .map(|j| cyl(1.0, 120.0 + 120.0 * j as f64 / segments as f64, 0.0))
        .collect();
    pts[0] = beta();
    pts[segments] = gamma();
    pts
}

// ---------------------------------------------------------------------------
// Spanning strip between h(d) and b.
// ---------------------------------------------------------------------------

/// The ruled strip bounded by `b` and the half-scale equatorial arc.
#[derive(Debug, Clone)]
pub struct SpanningStrip {
    /// Points on `h(d)` paired with the vertices of `b`.
    pub inner: Vec<V3>,
    /// Triangulation of the strip (the two corner slivers are skipped).
    pub triangles: Vec<[V3; 3]>,
}

/// The monotone pairing from rim arclength fraction to equatorial arc
/// fraction.
pub fn strip_pairing() -> MonotoneCubic {
    MonotoneCubic::new(&PAIRING_KNOTS).expect("pairing knots are valid")
}

/// Build the spanning strip over the rim polyline `b`.
pub fn spanning_strip(b: &[V3]) -> Result<SpanningStrip> {
    let m = b.len() - 1;
    if m < 4 {
        return Err(Error::ConstructionFailed(
            "spanning strip needs a rim with at least 4 segments".into(),
        ));
    }
    let pairing = strip_pairing();
    let mut inner: Vec<V3> = (0..=m)
        .map(|j| {
            let s = j as f64 / m as f64;
            cyl(0.5, 120.0 + 120.0 * pairing.eval(s), 0.0)
        })
        .collect();
    inner[0] = b[0];
    inner[m] = b[m];
    let mut triangles = Vec::with_capacity(2 * m - 2);
    for j in 0..m {
        if j > 0 {
            triangles.push([inner[j], inner[j + 1], b[j]]);
        }
        if j < m - 1 {
            triangles.push([inner[j + 1], b[j + 1], b[j]]);
        }
    }
    Ok(SpanningStrip { inner, triangles })
}

// ---------------------------------------------------------------------------
// Exact crossing counts with deterministic perturbation fallback.
// ---------------------------------------------------------------------------

/// Result of an exact crossing count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossingCount {
    pub count: usize,
    /// Whether the count needed the deterministic perturbation pass.
    pub perturbed: bool,
}

fn count_once(poly: &[V3], tris: &[[V3; 3]]) -> Option<usize> {
    let mut n = 0;
    for seg in poly.windows(2) {
        for t in tris {
            if !boxes_overlap(&seg[0], &seg[1], &t[0], &t[1], &t[2], 0.0) {
                continue;
            }
            match segment_triangle(&seg[0], &seg[1], &t[0], &t[1], &t[2]) {
                SegTri::Crossing => n += 1,
                SegTri::Miss => {}
                SegTri::Degenerate => return None,
            }
        }
    }
    Some(n)
}

/// Count transversal crossings between a polyline and a triangle list.
///
/// Degenerate incidences are resolved by displacing the *polyline*
/// vertices with a fixed pseudorandom offset (a symbolic-perturbation
/// stand-in: deterministic, index-based, ~1e-10 of the arc scale) and
/// recounting once; a degeneracy that survives the perturbation is an
/// error.
pub fn count_crossings(poly: &[V3], tris: &[[V3; 3]], salt: u64) -> Result<CrossingCount> {
    if let Some(count) = count_once(poly, tris) {
        return Ok(CrossingCount {
            count,
            perturbed: false,
        });
    }
    let scale = poly
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let moved: Vec<V3> = poly
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let key = salt
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add(i as u64);
            v + perturbation_offset(key, PERTURBATION_SCALE * scale)
        })
        .collect();
    match count_once(&moved, tris) {
        Some(count) => Ok(CrossingCount {
            count,
            perturbed: true,
        }),
        None => Err(Error::DegenerateAfterPerturbation(
            "crossing count still degenerate after perturbing the polyline".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Assembly, self-similarity, projection to the mapping torus.
// ---------------------------------------------------------------------------

/// The assembled arc: `2·levels + 1` homothety images of the period.
#[derive(Debug, Clone)]
pub struct WildArc {
    pub vertices: Vec<V3>,
    pub levels: u32,
    pub samples: usize,
}

/// Assemble the arc from `h^{-levels}(U)` (outermost) down to
/// `h^{levels}(U)`.
pub fn assemble_wild_arc(gen: &Generator, levels: u32) -> WildArc {
    let period = gen.period_polyline();
    let g = period.len();
    let n_periods = 2 * levels as usize + 1;
    let mut vertices = Vec::with_capacity(n_periods * (g - 1) + 1);
    let kk = levels as i32;
    for k in -kk..=kk {
        let s = 2f64.powi(-k);
        let upto = if k == kk { g } else { g - 1 };
        vertices.extend(period[..upto].iter().map(|v| v * s));
    }
    WildArc {
        vertices,
        levels,
        samples: gen.samples,
    }
}

/// The straight comparison arc covering the same shells: radial segments
/// along the x-axis with the same period segment count.
pub fn trivial_arc(levels: u32, samples: usize) -> WildArc {
    let per = 4 * samples;
    let kk = levels as i32;
    let mut vertices = Vec::new();
    for k in -kk..=kk {
        let s = 2f64.powi(-k);
        let upto = if k == kk { per + 1 } else { per };
        for j in 0..upto {
            let r = 1.0 - j as f64 / (2.0 * per as f64);
            vertices.push(V3::new(s * r, 0.0, 0.0));
        }
    }
    WildArc {
        vertices,
        levels,
        samples,
    }
}

fn point_segment_distance(p: &V3, a: &V3, b: &V3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn directed_hausdorff(p: &[V3], q: &[V3]) -> f64 {
    let mut worst = 0.0f64;
    for v in p {
        let mut best = f64::INFINITY;
        for seg in q.windows(2) {
            let d = point_segment_distance(v, &seg[0], &seg[1]);
            if d < best {
                best = d;
            }
            if best == 0.0 {
                break;
            }
        }
        worst = worst.max(best);
    }
    worst
}

/// Symmetric Hausdorff distance between two polylines (vertices against
/// segments).
pub fn hausdorff_distance(p: &[V3], q: &[V3]) -> f64 {
    directed_hausdorff(p, q).max(directed_hausdorff(q, p))
}

impl WildArc {
    /// Hausdorff gap between `h(arc minus innermost period)` and
    /// `arc minus outermost period`. Exactly zero for the assembled arc,
    /// because scaling by powers of two commutes with rounding.
    pub fn self_similarity_gap(&self) -> f64 {
        let g1 = 4 * self.samples; // vertices per period minus the shared one
        let n_periods = 2 * self.levels as usize + 1;
        if n_periods < 2 {
            return 0.0;
        }
        let head = &self.vertices[..(n_periods - 1) * g1 + 1];
        let tail = &self.vertices[g1..];
        let scaled: Vec<V3> = head.iter().map(|v| v * 0.5).collect();
        hausdorff_distance(&scaled, tail)
    }
}

/// Unwrapped winding of a polyline around the fiber of the covering
/// `x ↦ (x/|x|, -log₂|x| mod 1)`, with increments folded into
/// `(-1/2, 1/2]`. Returns the integer winding and the fractional
/// remainder (zero when the projected endpoints agree).
pub fn covering_winding(poly: &[V3]) -> Result<(i64, f64)> {
    if poly.len() < 2 {
        return Err(Error::ConstructionFailed(
            "winding needs at least two points".into(),
        ));
    }
    let mut wraps: i64 = 0;
    let (_, first) = covering_project(&poly[0])?;
    let mut prev = first;
    for v in &poly[1..] {
        let (_, f) = covering_project(v)?;
        let d = f - prev;
        // Fold the raw fiber jump into (-1/2, 1/2].
        let k = (d - 0.5).ceil();
        wraps -= k as i64;
        prev = f;
    }
    let (_, last) = covering_project(&poly[poly.len() - 1])?;
    let drift = last - first;
    let winding = wraps + drift.round() as i64;
    let gap = (drift - drift.round()).abs();
    Ok((winding, gap))
}

/// One period projected to the mapping torus of the homothety: a closed
/// knotted curve.
#[derive(Debug, Clone)]
pub struct MazurKnot {
    /// Projected points: unit direction plus fiber coordinate in `[0, 1)`.
    pub points: Vec<(V3, f64)>,
    /// Distance between the projections of the two period endpoints
    /// (direction gap plus fiber gap); exactly zero by construction.
    pub closure_gap: f64,
    /// Integer winding around the fiber.
    pub winding: i64,
}

/// Project one period of the generator to the mapping torus.
pub fn mazur_knot(gen: &Generator) -> Result<MazurKnot> {
    let period = gen.period_polyline();
    let mut points = Vec::with_capacity(period.len());
    for v in &period {
        let (dir, fiber) = covering_project(v)?;
        points.push((dir, fiber));
    }
    let (winding, fiber_gap) = covering_winding(&period)?;
    let dir_gap = (points[0].0 - points[points.len() - 1].0).norm();
    Ok(MazurKnot {
        points,
        closure_gap: dir_gap + fiber_gap,
        winding,
    })
}

// ---------------------------------------------------------------------------
// Embedding diagnostics: strand clearance and curvature.
// ---------------------------------------------------------------------------

fn segment_segment_distance(p1: &V3, q1: &V3, p2: &V3, q2: &V3) -> f64 {
    // Standard closest-point computation between two segments.
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (mut s, mut t);
    if a == 0.0 && e == 0.0 {
        return (p1 - p2).norm();
    }
    if a == 0.0 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e == 0.0 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            s = if denom != 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Minimum over far segment pairs of
/// `distance / (θ₀·(|x| + |y|))` — the factor by which the strand tubes
/// of relative radius `θ₀` clear each other. Pairs closer along the curve
/// than a few tube radii are the same strand and are skipped.
pub fn min_clearance_ratio(vertices: &[V3], theta0: f64) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return f64::INFINITY;
    }
    let mut cum = Vec::with_capacity(n);
    cum.push(0.0);
    for w in vertices.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + (w[1] - w[0]).norm());
    }
    let seg_norm: Vec<f64> = (0..n - 1)
        .map(|i| vertices[i].norm().max(vertices[i + 1].norm()))
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..n - 1 {
        let ri = theta0 * seg_norm[i];
        for j in i + 1..n - 1 {
            let rj = theta0 * seg_norm[j];
            let along = cum[j] - cum[i + 1];
            if along <= CLEARANCE_SKIP_FACTOR * (ri + rj) {
                continue;
            }
            let d = segment_segment_distance(
                &vertices[i],
                &vertices[i + 1],
                &vertices[j],
                &vertices[j + 1],
            );
            let ratio = d / (ri + rj);
            if ratio < best {
                best = ratio;
            }
        }
    }
    best
}

/// Maximum over interior vertices of (discrete curvature) × (tube radius
/// `θ₀·|x|`). Below one the tube is locally embedded; we design for one
/// half.
pub fn max_curvature_radius(vertices: &[V3], theta0: f64) -> f64 {
    let mut worst = 0.0f64;
    for w in vertices.windows(3) {
        let u = w[1] - w[0];
        let v = w[2] - w[1];
        let lu = u.norm();
        let lv = v.norm();
        if lu == 0.0 || lv == 0.0 {
            continue;
        }
        let cosang = (u.dot(&v) / (lu * lv)).clamp(-1.0, 1.0);
        let angle = cosang.acos();
        let kappa = angle / (0.5 * (lu + lv));
        worst = worst.max(kappa * theta0 * w[1].norm());
    }
    worst
}

// ---------------------------------------------------------------------------
// Certification.
// ---------------------------------------------------------------------------

/// Plane and shell containment of the generator pieces.
#[derive(Debug, Clone, Serialize)]
pub struct PlaneShellCheck {
    pub a_max_abs_z: f64,
    pub c_max_abs_z: f64,
    pub a_norm_min: f64,
    pub a_norm_max: f64,
    pub b_norm_min: f64,
    pub b_norm_max: f64,
    pub c_norm_min: f64,
    pub c_norm_max: f64,
    /// Interior vertices stay strictly between the two spheres; the
    /// pieces touch them only at the junctions.
    pub interior_strict: bool,
    pub ok: bool,
}

/// Spanning-strip condition: the strip avoids both spheres and its
/// interior crosses `a` and `c` exactly once each.
#[derive(Debug, Clone, Serialize)]
pub struct DiskCheck {
    pub crossings_a: usize,
    pub crossings_c: usize,
    pub perturbed: bool,
    pub min_ruling_dot: f64,
    pub rim_norm_min: f64,
    pub rim_norm_max: f64,
    pub ok: bool,
}

/// Angle defects at the three chain junctions (β, γ, h(α)), in degrees.
#[derive(Debug, Clone, Serialize)]
pub struct JunctionCheck {
    pub defects_deg: [f64; 3],
    pub max_defect_deg: f64,
    pub ok: bool,
}

/// Tube-embedding diagnostics on the assembled arc.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingCheck {
    pub theta0: f64,
    pub min_clearance_ratio: f64,
    pub max_curvature_radius: f64,
    pub ok: bool,
}

/// Full certification report for one generator.
#[derive(Debug, Clone, Serialize)]
pub struct ArcCertificate {
    pub samples: usize,
    pub plane_shell: PlaneShellCheck,
    pub disk: DiskCheck,
    pub junctions: JunctionCheck,
    pub embedding: EmbeddingCheck,
    pub ok: bool,
}

fn angle_deg(u: &V3, v: &V3) -> f64 {
    let cross = u.cross(v).norm();
    let dot = u.dot(v);
    cross.atan2(dot).to_degrees()
}

fn norm_range(pts: &[V3]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in pts {
        let n = p.norm();
        lo = lo.min(n);
        hi = hi.max(n);
    }
    (lo, hi)
}

fn interior_strict(pts: &[V3]) -> bool {
    pts[1..pts.len() - 1]
        .iter()
        .all(|p| p.norm() > 0.5 && p.norm() < 1.0)
}

/// Verify all arc conditions for a generator, using relative tube radius
/// `theta0` for the embedding diagnostics.
pub fn verify_generator(gen: &Generator, theta0: f64) -> Result<ArcCertificate> {
    let tol = 1e-12;

    // Plane and shell containment.
    let max_abs_z = |pts: &[V3]| pts.iter().map(|p| p.z.abs()).fold(0.0f64, f64::max);
    let a_max_abs_z = max_abs_z(&gen.a);
    let c_max_abs_z = max_abs_z(&gen.c);
    let (a_norm_min, a_norm_max) = norm_range(&gen.a);
    let (b_norm_min, b_norm_max) = norm_range(&gen.b);
    let (c_norm_min, c_norm_max) = norm_range(&gen.c);
    let interior = interior_strict(&gen.a) && interior_strict(&gen.b) && interior_strict(&gen.c);
    let plane_shell_ok = a_max_abs_z <= tol
        && c_max_abs_z <= tol
        && a_norm_min >= 0.5 - tol
        && a_norm_max <= 1.0 + tol
        && b_norm_min >= 0.5 - tol
        && b_norm_max <= 1.0 + tol
        && c_norm_min >= 0.5 - tol
        && c_norm_max <= 1.0 + tol
        && interior;
    let plane_shell = PlaneShellCheck {
        a_max_abs_z,
        c_max_abs_z,
        a_norm_min,
        a_norm_max,
        b_norm_min,
        b_norm_max,
        c_norm_min,
        c_norm_max,
        interior_strict: interior,
        ok: plane_shell_ok,
    };

    // Spanning strip and exact crossing counts.
    let strip = spanning_strip(&gen.b)?;
    let m = gen.b.len() - 1;
    let ca = count_crossings(&gen.a, &strip.triangles, 0xA1)?;
    let cc = count_crossings(&gen.c, &strip.triangles, 0xC1)?;
    let mut min_ruling_dot = f64::INFINITY;
    for j in 1..m {
        min_ruling_dot = min_ruling_dot.min(strip.inner[j].dot(&gen.b[j]));
    }
    let (rim_norm_min, rim_norm_max) = norm_range(&gen.b[1..m]);
    let disk_ok = ca.count == 1
        && cc.count == 1
        && min_ruling_dot > RULING_DOT_MIN
        && rim_norm_min > 0.5
        && rim_norm_max < 1.0;
    let disk = DiskCheck {
        crossings_a: ca.count,
        crossings_c: cc.count,
        perturbed: ca.perturbed || cc.perturbed,
        min_ruling_dot,
        rim_norm_min,
        rim_norm_max,
        ok: disk_ok,
    };

    // Junction angle defects. The chain enters and leaves each junction
    // radially, so these are zero up to roundoff.
    let s = gen.samples;
    let dir = |p: &V3, q: &V3| (q - p).normalize();
    let a_in = dir(&gen.a[s - 1], &gen.a[s]);
    let b_out = dir(&(gen.b[0] * 2.0), &(gen.b[1] * 2.0));
    let b_in = dir(&(gen.b[2 * s - 1] * 2.0), &(gen.b[2 * s] * 2.0));
    let c_out = dir(&gen.c[0], &gen.c[1]);
    let c_in = dir(&gen.c[s - 1], &gen.c[s]);
    let a_next = dir(&gen.a[0], &gen.a[1]); // next period starts like `a`, rescaled
    let defects_deg = [
        angle_deg(&a_in, &b_out),
        angle_deg(&b_in, &c_out),
        angle_deg(&c_in, &a_next),
    ];
    let max_defect_deg = defects_deg.iter().cloned().fold(0.0f64, f64::max);
    let junctions = JunctionCheck {
        defects_deg,
        max_defect_deg,
        ok: max_defect_deg < JUNCTION_DEFECT_MAX_DEG,
    };

    // Embedding diagnostics on a five-period assembly (captures every
    // distinct pair of neighbouring strands thanks to self-similarity).
    let arc = assemble_wild_arc(gen, 2);
    let min_clearance = min_clearance_ratio(&arc.vertices, theta0);
    let max_kr = max_curvature_radius(&arc.vertices, theta0);
    let embedding = EmbeddingCheck {
        theta0,
        min_clearance_ratio: min_clearance,
        max_curvature_radius: max_kr,
        ok: min_clearance > CLEARANCE_RATIO_MIN && max_kr < CURVATURE_RADIUS_MAX,
    };

    let ok = plane_shell.ok && disk.ok && junctions.ok && embedding.ok;
    Ok(ArcCertificate {
        samples: gen.samples,
        plane_shell,
        disk,
        junctions,
        embedding,
        ok,
    })
}
