//! Two glued 4-sphere diffeomorphisms built from a pair of suspended
//! model maps: the trivial-arc map on the left and the Fox–Artin map on
//! the right.
//!
//! Each variant deletes one pole disk from each 4-sphere and identifies
//! the remaining pieces along dyadic collar annuli:
//!
//! * **hetero-arc** — the left piece loses its source disk, the right
//!   piece its deep sink disk. Forward orbits that descend the wild tube
//!   exit the right piece through the collar and re-enter the left piece
//!   near its deleted source, landing exactly on the left saddle's stable
//!   cone. The two saddles acquire a heteroclinic intersection whose
//!   closure is the wildly embedded arc.
//! * **hetero-cylinder** — both pieces lose their source-side disks, and
//!   the left map is used backward, so its sinks become sources. The
//!   saddle connection is now the boundary of the invariant tube around
//!   the wild arc: a two-dimensional cylinder.
//!
//! The collar identification is a single homogeneous template: in the
//! left piece's north chart it sends `z ↦ 2^{−m} Φ(ẑ)/|z|`, where `Φ`
//! rotates the tube axis onto the last coordinate axis and remaps
//! latitudes so the left stable cone lands on the equatorial 3-plane.
//! Degree −1 homogeneity makes the required equivariance an exact
//! identity in the collar, where both suspended maps are plain scalings.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::SVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{classify_fixed_point, FixedPointReport};
use crate::flow;
use crate::geometry::{MonotoneCubic, Pole, ZERO_NORM_CUTOFF};
use crate::sphere::{
    build_sphere_map, sphere_map_apply, sphere_map_apply_inv, ArcModel, ChartPoint, SphereMapSpec,
};
use crate::{Error, Result, V4};

/// Gate on `|gluing(f_left(x)) − f_right(gluing(x))|` over collar samples.
pub const EQUIVARIANCE_TOL: f64 = 1e-6;
/// Gate on the distance from the transported stable cone to the
/// equatorial 3-plane shell it must land in.
pub const ALIGNMENT_TOL: f64 = 1e-6;
/// Number of random collar samples drawn for the build-time checks.
pub const COLLAR_CHECK_SAMPLES: usize = 1000;
/// Relative slack on the deleted-disk radius test.
pub const DOMAIN_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// The stable funnel radius.
// ---------------------------------------------------------------------------

/// Axial level at which the funnel radius is resolved; deep enough that
/// the transverse field is identically zero there.
const FUNNEL_BASE: f64 = -4.0;

/// Forward-orbit fate of a point deep in the tube at transverse radius
/// `w`: `true` when it passes over the saddle and escapes down the tube,
/// `false` when it hooks back into the sink. The undecidable sliver
/// between the two is the stable funnel itself, far below the width a
/// float can resolve, so a 30-step cap decides every bisection query.
fn funnel_escapes(w: f64) -> Result<bool> {
    let mut s = SVector::<f64, 2>::new(FUNNEL_BASE, w);
    for _ in 0..30 {
        s = flow::time_one_map(&s)?;
        if s[0] >= 2.5 {
            return Ok(true);
        }
        if s[0] <= 0.5 && s[1].abs() < 0.5 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Frozen transverse chart radius of a saddle's stable funnel.
///
/// Resolved by bisection against the forward time-one map itself —
/// below the funnel, orbits hook back into the sink; above it they pass
/// over the saddle and escape down the tube — so the returned radius is
/// exact for the map actually iterated, not for an approximate inverse.
/// Outside the perturbed ball the transverse field vanishes identically,
/// including at every integrator stage, so the funnel is a cylinder of
/// exactly this radius in chart coordinates for every deep axial level.
pub fn funnel_radius() -> Result<f64> {
    let (mut lo, mut hi) = (1.5, 2.0);
    if funnel_escapes(lo)? || !funnel_escapes(hi)? {
        return Err(Error::ConstructionFailed(
            "funnel bracket [1.5, 2] does not separate sink capture from escape".into(),
        ));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if funnel_escapes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// The collar gluing.
// ---------------------------------------------------------------------------

/// The collar identification between the two pieces.
///
/// Forward direction: left-piece north-chart coordinates to right-piece
/// `target_chart` coordinates, `z ↦ 2^{−m} Φ(ẑ)/|z|`. `Φ` is a rotation
/// taking the tube axis `e₁` to `e₄` followed by a monotone latitude
/// remap about `e₄` that sends the left stable cone's half-angle to the
/// equator, so the transported stable set lies in the 3-plane `x₄ = 0`.
#[derive(Debug, Clone)]
pub struct Gluing {
    /// Dyadic shell shift: left collar index + right collar index + 1.
    pub m: i32,
    /// Half-angle of the left stable cone: atan(θ₀ · w* / 2).
    pub cone_angle: f64,
    /// Which right-piece chart the image lands in.
    pub target_chart: Pole,
    remap: MonotoneCubic,
}

/// Rotation in the (1,4)-plane taking `e₁` to `e₄`.
fn rotate_axis_up(u: &V4) -> V4 {
    V4::new(-u[3], u[1], u[2], u[0])
}

/// Inverse of [`rotate_axis_up`].
fn rotate_axis_down(u: &V4) -> V4 {
    V4::new(u[3], u[1], u[2], -u[0])
}

impl Gluing {
    fn new(m: i32, cone_angle: f64, target_chart: Pole) -> Result<Self> {
        let remap = MonotoneCubic::new(&[(0.0, 0.0), (cone_angle, FRAC_PI_2), (PI, PI)])?;
        Ok(Gluing { m, cone_angle, target_chart, remap })
    }

    /// Invert the latitude remap by bisection (it is strictly monotone).
    fn invert_latitude(&self, target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, PI);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.remap.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Remap the latitude of the unit vector `u` about `e₄`.
    fn latitude_remap(&self, u: &V4, inverse: bool) -> V4 {
        let theta = u[3].clamp(-1.0, 1.0).acos();
        let mapped = if inverse { self.invert_latitude(theta) } else { self.remap.eval(theta) };
        let equatorial = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        if equatorial <= ZERO_NORM_CUTOFF {
            return V4::new(0.0, 0.0, 0.0, if u[3] >= 0.0 { 1.0 } else { -1.0 });
        }
        let scale = mapped.sin() / equatorial;
        V4::new(u[0] * scale, u[1] * scale, u[2] * scale, mapped.cos())
    }

    /// Left north-chart coordinates → right `target_chart` coordinates.
    pub fn apply(&self, z: &V4) -> Result<V4> {
        let r = z.norm();
        if r.is_nan() || r <= ZERO_NORM_CUTOFF {
            return Err(Error::ZeroPoint("collar gluing at a chart origin".into()));
        }
        let u = rotate_axis_up(&(z / r));
        Ok(self.latitude_remap(&u, false) * (2f64.powi(-self.m) / r))
    }

    /// Right `target_chart` coordinates → left north-chart coordinates.
    pub fn apply_inv(&self, y: &V4) -> Result<V4> {
        let r = y.norm();
        if r.is_nan() || r <= ZERO_NORM_CUTOFF {
            return Err(Error::ZeroPoint("collar gluing at a chart origin".into()));
        }
        let v = self.latitude_remap(&(y / r), true);
        Ok(rotate_axis_down(&v) * (2f64.powi(-self.m) / r))
    }
}

// ---------------------------------------------------------------------------
// Tagged points and the surgered map.
// ---------------------------------------------------------------------------

/// Which glued construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurgeryVariant {
    /// Heteroclinic wild arc between the two saddles.
    HeteroArc,
    /// Heteroclinic cylinder: the boundary of the invariant wild tube.
    HeteroCylinder,
}

impl SurgeryVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            SurgeryVariant::HeteroArc => "hetero-arc",
            SurgeryVariant::HeteroCylinder => "hetero-cylinder",
        }
    }
}

/// Which piece of the glued manifold a point is carried in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Left,
    Right,
}

impl Piece {
    pub fn as_str(self) -> &'static str {
        match self {
            Piece::Left => "left",
            Piece::Right => "right",
        }
    }

    pub fn other(self) -> Piece {
        match self {
            Piece::Left => Piece::Right,
            Piece::Right => Piece::Left,
        }
    }
}

/// A point of the glued 4-sphere: a chart point of one piece's model
/// sphere, tagged with the piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedPoint {
    pub piece: Piece,
    pub point: ChartPoint<4>,
}

/// One classified fixed point of a glued map.
#[derive(Debug, Clone)]
pub struct CensusEntry {
    pub name: &'static str,
    pub piece: Piece,
    pub point: ChartPoint<4>,
    pub report: FixedPointReport<4>,
}

/// A glued 4-sphere diffeomorphism.
#[derive(Debug, Clone)]
pub struct SurgeredMap {
    pub variant: SurgeryVariant,
    /// Trivial-arc suspended map (used backward in the cylinder variant).
    pub left: SphereMapSpec<4>,
    /// Fox–Artin suspended map.
    pub right: SphereMapSpec<4>,
    pub gluing: Gluing,
    /// Frozen stable-funnel chart radius shared by both pieces' saddles.
    pub funnel: f64,
}

impl SurgeredMap {
    /// Outer radius of the left collar annulus (north chart).
    pub fn left_collar_outer(&self) -> f64 {
        self.left.k_n.outer_radius()
    }

    /// Outer radius of the right collar annulus (in [`Self::right_collar_chart`]).
    pub fn right_collar_outer(&self) -> f64 {
        match self.variant {
            SurgeryVariant::HeteroArc => self.right.k_s.outer_radius(),
            SurgeryVariant::HeteroCylinder => self.right.k_n.outer_radius(),
        }
    }

    /// The right-piece chart whose pole disk was removed.
    pub fn right_collar_chart(&self) -> Pole {
        match self.variant {
            SurgeryVariant::HeteroArc => Pole::South,
            SurgeryVariant::HeteroCylinder => Pole::North,
        }
    }

    /// Norm of `p` in `chart` coordinates without materializing the
    /// conversion: the transition is the inversion, so norms are exact
    /// reciprocals (the chart origin maps to infinity).
    fn chart_norm(p: &ChartPoint<4>, chart: Pole) -> f64 {
        let n = p.coords.norm();
        if p.chart == chart {
            n
        } else {
            1.0 / n
        }
    }

    /// Reject points inside a deleted pole disk.
    pub fn check_domain(&self, x: &TaggedPoint) -> Result<()> {
        let (chart, inner) = match x.piece {
            Piece::Left => (Pole::North, 0.5 * self.left_collar_outer()),
            Piece::Right => (self.right_collar_chart(), 0.5 * self.right_collar_outer()),
        };
        let r = Self::chart_norm(&x.point, chart);
        if r < inner * (1.0 - DOMAIN_SLACK) {
            return Err(Error::OutsideDomain(format!(
                "point at {} radius {r:.3e} lies inside the deleted {} disk (inner radius {inner:.3e})",
                chart.as_str(),
                x.piece.as_str(),
            )));
        }
        Ok(())
    }

    /// Carry a left-piece collar point to its right-piece representation.
    pub fn transport_left_to_right(&self, p: &ChartPoint<4>) -> Result<ChartPoint<4>> {
        let z = p.to_chart(Pole::North)?;
        Ok(ChartPoint { chart: self.right_collar_chart(), coords: self.gluing.apply(&z.coords)? })
    }

    /// Carry a right-piece collar point to its left-piece representation.
    pub fn transport_right_to_left(&self, p: &ChartPoint<4>) -> Result<ChartPoint<4>> {
        let y = p.to_chart(self.right_collar_chart())?;
        Ok(ChartPoint::north(self.gluing.apply_inv(&y.coords)?))
    }

    /// Re-tag `x` into `priority`'s piece when it lies in the collar
    /// overlap (both representations valid); leave it alone otherwise.
    fn canonicalize(&self, x: TaggedPoint, priority: Piece) -> Result<TaggedPoint> {
        if x.piece == priority {
            return Ok(x);
        }
        let (chart, outer) = match x.piece {
            Piece::Left => (Pole::North, self.left_collar_outer()),
            Piece::Right => (self.right_collar_chart(), self.right_collar_outer()),
        };
        let r = Self::chart_norm(&x.point, chart);
        if r <= outer * (1.0 + DOMAIN_SLACK) {
            let moved = match x.piece {
                Piece::Left => self.transport_left_to_right(&x.point)?,
                Piece::Right => self.transport_right_to_left(&x.point)?,
            };
            Ok(TaggedPoint { piece: priority, point: moved })
        } else {
            Ok(x)
        }
    }

    /// The piece whose map moves points *away* from its own deleted disk
    /// under a forward step; collar points are carried there first so a
    /// step never lands inside a deletion.
    fn forward_priority(&self) -> Piece {
        match self.variant {
            // Right orbits descend toward the deleted deep disk.
            SurgeryVariant::HeteroArc => Piece::Left,
            // The backward left map pushes toward the deleted left source.
            SurgeryVariant::HeteroCylinder => Piece::Right,
        }
    }

    fn backward_priority(&self) -> Piece {
        self.forward_priority().other()
    }

    /// The left piece's dynamics under the glued map's forward step.
    fn left_forward(&self, p: &ChartPoint<4>) -> ChartPoint<4> {
        match self.variant {
            SurgeryVariant::HeteroArc => sphere_map_apply(&self.left, p),
            SurgeryVariant::HeteroCylinder => sphere_map_apply_inv(&self.left, p),
        }
    }

    fn left_backward(&self, p: &ChartPoint<4>) -> ChartPoint<4> {
        match self.variant {
            SurgeryVariant::HeteroArc => sphere_map_apply_inv(&self.left, p),
            SurgeryVariant::HeteroCylinder => sphere_map_apply(&self.left, p),
        }
    }

    /// One forward step of the glued diffeomorphism.
    ///
    /// The input is validated against the deleted disks, carried to the
    /// piece where the step is safe, stepped with that piece's map, and
    /// returned in the canonical rest representation (left piece
    /// preferred in the collar overlap).
    pub fn apply(&self, x: &TaggedPoint) -> Result<TaggedPoint> {
        self.check_domain(x)?;
        let safe = self.canonicalize(*x, self.forward_priority())?;
        let img = match safe.piece {
            Piece::Left => TaggedPoint { piece: Piece::Left, point: self.left_forward(&safe.point) },
            Piece::Right => TaggedPoint {
                piece: Piece::Right,
                point: sphere_map_apply(&self.right, &safe.point),
            },
        };
        self.canonicalize(img, Piece::Left)
    }

    /// One backward step of the glued diffeomorphism.
    pub fn apply_inv(&self, x: &TaggedPoint) -> Result<TaggedPoint> {
        self.check_domain(x)?;
        let safe = self.canonicalize(*x, self.backward_priority())?;
        let img = match safe.piece {
            Piece::Left => TaggedPoint { piece: Piece::Left, point: self.left_backward(&safe.point) },
            Piece::Right => TaggedPoint {
                piece: Piece::Right,
                point: sphere_map_apply_inv(&self.right, &safe.point),
            },
        };
        self.canonicalize(img, Piece::Left)
    }

    /// Distance between two points of the glued manifold: chordal within
    /// a piece; across pieces, transported through the collar when the
    /// first point lies in the overlap, and a saturating constant (twice
    /// the sphere diameter) when the pieces genuinely separate them.
    pub fn distance(&self, a: &TaggedPoint, b: &TaggedPoint) -> f64 {
        if a.piece == b.piece {
            return a.point.chordal_distance(&b.point);
        }
        let (chart, outer) = match a.piece {
            Piece::Left => (Pole::North, self.left_collar_outer()),
            Piece::Right => (self.right_collar_chart(), self.right_collar_outer()),
        };
        let r = Self::chart_norm(&a.point, chart);
        if r >= 0.5 * outer * (1.0 - DOMAIN_SLACK) && r <= outer * (1.0 + DOMAIN_SLACK) {
            let moved = match a.piece {
                Piece::Left => self.transport_left_to_right(&a.point),
                Piece::Right => self.transport_right_to_left(&a.point),
            };
            if let Ok(p) = moved {
                return p.chordal_distance(&b.point);
            }
        }
        4.0
    }

    /// The saddle the heteroclinic set limits to forward.
    pub fn sigma_forward_target(&self) -> TaggedPoint {
        match self.variant {
            SurgeryVariant::HeteroArc => {
                TaggedPoint { piece: Piece::Left, point: self.left.fixed_points.sigma }
            }
            SurgeryVariant::HeteroCylinder => {
                TaggedPoint { piece: Piece::Right, point: self.right.fixed_points.sigma }
            }
        }
    }

    /// The saddle the heteroclinic set limits to backward.
    pub fn sigma_backward_target(&self) -> TaggedPoint {
        match self.variant {
            SurgeryVariant::HeteroArc => {
                TaggedPoint { piece: Piece::Right, point: self.right.fixed_points.sigma }
            }
            SurgeryVariant::HeteroCylinder => {
                TaggedPoint { piece: Piece::Left, point: self.left.fixed_points.sigma }
            }
        }
    }

    /// The glued map as a local self-map of one piece in one chart, for
    /// Jacobian classification near off-collar fixed points.
    fn piece_chart_map(
        &self,
        piece: Piece,
        chart: Pole,
    ) -> impl Fn(&V4) -> Result<V4> + '_ {
        move |x: &V4| {
            let img = self.apply(&TaggedPoint { piece, point: ChartPoint { chart, coords: *x } })?;
            if img.piece != piece {
                return Err(Error::DivergedOffChart(
                    "local classification stencil crossed the collar".into(),
                ));
            }
            Ok(img.point.to_chart(chart)?.coords)
        }
    }

    /// Classify every fixed point that survives the deletions.
    ///
    /// Hetero-arc: the left keeps both sinks and its saddle, the right
    /// keeps its interior sink, saddle and the source — three sinks, two
    /// saddles, one source. Hetero-cylinder: the left map runs backward,
    /// so its surviving sinks classify as sources and its saddle flips
    /// its unstable count — two sinks, two sources, two saddles.
    pub fn census(&self) -> Result<Vec<CensusEntry>> {
        let mut entries = Vec::with_capacity(6);
        let left_fp = &self.left.fixed_points;
        for (name, p) in [
            ("left-omega", &left_fp.omega),
            ("left-south-pole", &left_fp.south_pole),
            ("left-sigma", &left_fp.sigma),
        ] {
            let map = self.piece_chart_map(Piece::Left, p.chart);
            entries.push(CensusEntry {
                name,
                piece: Piece::Left,
                point: *p,
                report: classify_fixed_point(map, &p.coords)?,
            });
        }
        let right_fp = &self.right.fixed_points;
        let right_survivors: [(&'static str, &ChartPoint<4>); 3] = match self.variant {
            SurgeryVariant::HeteroArc => [
                ("right-omega", &right_fp.omega),
                ("right-sigma", &right_fp.sigma),
                ("right-north-pole", &right_fp.north_pole),
            ],
            SurgeryVariant::HeteroCylinder => [
                ("right-omega", &right_fp.omega),
                ("right-south-pole", &right_fp.south_pole),
                ("right-sigma", &right_fp.sigma),
            ],
        };
        for (name, p) in right_survivors {
            let map = self.piece_chart_map(Piece::Right, p.chart);
            entries.push(CensusEntry {
                name,
                piece: Piece::Right,
                point: *p,
                report: classify_fixed_point(map, &p.coords)?,
            });
        }
        Ok(entries)
    }

    /// Sample points of the embedded heteroclinic arc (hetero-arc
    /// variant): the right piece's tube core between the saddle and the
    /// collar. Their forward orbits exit through the collar onto the left
    /// stable cone; backward they retreat into the right saddle.
    pub fn arc_witnesses(&self, count: usize) -> Result<Vec<TaggedPoint>> {
        let (lam_lo, lam_hi) = (1.2, 4.6);
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            let mut c = V4::zeros();
            c[0] = lam_lo + (lam_hi - lam_lo) * t;
            out.push(TaggedPoint {
                piece: Piece::Right,
                point: ChartPoint::south(self.right.chart.zeta_inv(&c)?),
            });
        }
        Ok(out)
    }

    /// Sample points of the heteroclinic cylinder (hetero-cylinder
    /// variant): the stable funnel of the right saddle over its frozen
    /// zone, intersected with the invariant 3-plane carrying the arc —
    /// `levels × around` chart points at transverse radius `funnel`.
    pub fn cylinder_witnesses(&self, levels: usize, around: usize) -> Result<Vec<TaggedPoint>> {
        let (lam_lo, lam_hi) = (-4.4, -2.6);
        let mut out = Vec::with_capacity(levels * around);
        for i in 0..levels {
            let t = if levels > 1 { i as f64 / (levels - 1) as f64 } else { 0.0 };
            let lam = lam_lo + (lam_hi - lam_lo) * t;
            for j in 0..around {
                let alpha = TAU * j as f64 / around as f64;
                let c = V4::new(lam, self.funnel * alpha.cos(), self.funnel * alpha.sin(), 0.0);
                out.push(TaggedPoint {
                    piece: Piece::Right,
                    point: ChartPoint::south(self.right.chart.zeta_inv(&c)?),
                });
            }
        }
        Ok(out)
    }

    // -- build-time residual checks --------------------------------------

    fn random_collar_sample(&self, rng: &mut ChaCha8Rng) -> V4 {
        let dir = loop {
            let v = V4::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break v / n;
            }
        };
        let outer = self.left_collar_outer();
        dir * rng.gen_range(0.5 * outer..outer)
    }

    /// Max equivariance residual `|g(f_left(z)) − f_right(g(z))|` over
    /// `samples` random left-collar points, measured chordally in the
    /// right piece.
    pub fn equivariance_residual(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0f64;
        for _ in 0..samples {
            let z = self.random_collar_sample(&mut rng);
            let stepped = self.left_forward(&ChartPoint::north(z));
            let via_left = self.transport_left_to_right(&stepped)?;
            let moved = self.transport_left_to_right(&ChartPoint::north(z))?;
            let via_right = sphere_map_apply(&self.right, &moved);
            worst = worst.max(via_left.chordal_distance(&via_right));
        }
        Ok(worst)
    }

    /// Max distance from the transported left stable cone to the
    /// equatorial 3-plane shell it must land in: both the out-of-plane
    /// component and the shell-radius violation, over a cone sample grid.
    pub fn alignment_residual(&self) -> Result<f64> {
        let inner = 0.5 * self.left_collar_outer();
        let outer = self.left_collar_outer();
        let mut worst = 0f64;
        for i in 0..12 {
            let phi = TAU * i as f64 / 12.0;
            for k in 0..5 {
                let tilt = PI * (k as f64 + 0.5) / 5.0;
                // Unit direction at the cone's half-angle from the axis.
                let u = V4::new(
                    self.gluing.cone_angle.cos(),
                    self.gluing.cone_angle.sin() * tilt.sin() * phi.cos(),
                    self.gluing.cone_angle.sin() * tilt.sin() * phi.sin(),
                    self.gluing.cone_angle.sin() * tilt.cos(),
                );
                for r in [inner * 1.01, 0.5 * (inner + outer), outer * 0.99] {
                    let image = self.gluing.apply(&(u * r))?;
                    worst = worst.max(image[3].abs());
                    let rad = image.norm();
                    let (ri, ro) = (0.5 * self.right_collar_outer(), self.right_collar_outer());
                    worst = worst.max((ri - rad).max(0.0)).max((rad - ro).max(0.0));
                }
            }
        }
        Ok(worst)
    }
}

/// Build one of the glued 4-sphere diffeomorphisms.
///
/// Both suspended maps are built in dimension four, the collar shells are
/// taken from their chosen annuli, and the gluing's latitude remap is
/// anchored at the left stable cone's half-angle. The equivariance and
/// alignment residuals are verified before the map is returned.
pub fn build_surgery(variant: SurgeryVariant) -> Result<SurgeredMap> {
    let left = build_sphere_map::<4>(ArcModel::Trivial)?;
    let right = build_sphere_map::<4>(ArcModel::FoxArtin)?;
    let funnel = funnel_radius()?;
    let cone_angle = (0.5 * left.chart.theta0() * funnel).atan();
    let (m, target_chart) = match variant {
        SurgeryVariant::HeteroArc => (left.k_n.k + right.k_s.k + 1, Pole::South),
        SurgeryVariant::HeteroCylinder => (left.k_n.k + right.k_n.k + 1, Pole::North),
    };
    let gluing = Gluing::new(m as i32, cone_angle, target_chart)?;
    let map = SurgeredMap { variant, left, right, gluing, funnel };

    let equi = map.equivariance_residual(COLLAR_CHECK_SAMPLES, 2026)?;
    if equi.is_nan() || equi >= EQUIVARIANCE_TOL {
        return Err(Error::GluingFailed(format!(
            "collar equivariance residual {equi:.3e} exceeds {EQUIVARIANCE_TOL:.0e}"
        )));
    }
    let align = map.alignment_residual()?;
    if align.is_nan() || align >= ALIGNMENT_TOL {
        return Err(Error::GluingFailed(format!(
            "stable-cone alignment residual {align:.3e} exceeds {ALIGNMENT_TOL:.0e}"
        )));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{heteroclinic_test, FixedPointKind};
    use std::sync::OnceLock;

    fn arc_map() -> &'static SurgeredMap {
        static MAP: OnceLock<SurgeredMap> = OnceLock::new();
        MAP.get_or_init(|| build_surgery(SurgeryVariant::HeteroArc).unwrap())
    }

    fn cyl_map() -> &'static SurgeredMap {
        static MAP: OnceLock<SurgeredMap> = OnceLock::new();
        MAP.get_or_init(|| build_surgery(SurgeryVariant::HeteroCylinder).unwrap())
    }

    fn census_counts(entries: &[CensusEntry]) -> (usize, usize, usize) {
        let mut sinks = 0;
        let mut saddles = 0;
        let mut sources = 0;
        for e in entries {
            match e.report.kind {
                FixedPointKind::Sink => sinks += 1,
                FixedPointKind::Source => sources += 1,
                FixedPointKind::Saddle { .. } => saddles += 1,
                FixedPointKind::Nonhyperbolic => {}
            }
        }
        (sinks, saddles, sources)
    }

    #[test]
    fn arc_variant_census_is_three_sinks_two_saddles_one_source() {
        let entries = arc_map().census().unwrap();
        assert_eq!(entries.len(), 6);
        assert_eq!(census_counts(&entries), (3, 2, 1));
        for e in &entries {
            assert!(e.report.residual < 1e-8, "{} residual {}", e.name, e.report.residual);
        }
        // Both saddles keep one expanding direction under the forward map.
        for name in ["left-sigma", "right-sigma"] {
            let e = entries.iter().find(|e| e.name == name).unwrap();
            assert_eq!(e.report.kind, FixedPointKind::Saddle { unstable: 1 });
        }
    }

    #[test]
    fn cylinder_variant_census_is_two_of_each() {
        let entries = cyl_map().census().unwrap();
        assert_eq!(entries.len(), 6);
        assert_eq!(census_counts(&entries), (2, 2, 2));
        for e in &entries {
            assert!(e.report.residual < 1e-8, "{} residual {}", e.name, e.report.residual);
        }
        // The left piece runs backward: its saddle has three expanding
        // directions, the right keeps one.
        let left = entries.iter().find(|e| e.name == "left-sigma").unwrap();
        assert_eq!(left.report.kind, FixedPointKind::Saddle { unstable: 3 });
        let right = entries.iter().find(|e| e.name == "right-sigma").unwrap();
        assert_eq!(right.report.kind, FixedPointKind::Saddle { unstable: 1 });
    }

    #[test]
    fn surviving_sinks_are_fixed_by_apply() {
        let m = arc_map();
        let omega = TaggedPoint { piece: Piece::Left, point: m.left.fixed_points.omega };
        let img = m.apply(&omega).unwrap();
        assert_eq!(img.piece, Piece::Left);
        assert!(img.point.chordal_distance(&omega.point) < 1e-10);
    }

    #[test]
    fn collar_transport_roundtrips_tightly() {
        let m = arc_map();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0f64;
        for _ in 0..200 {
            let z = m.random_collar_sample(&mut rng);
            let p = ChartPoint::north(z);
            let there = m.transport_left_to_right(&p).unwrap();
            let back = m.transport_right_to_left(&there).unwrap();
            worst = worst.max((back.coords - z).norm());
        }
        assert!(worst < 1e-8, "worst roundtrip {worst:.3e}");
    }

    #[test]
    fn gluing_is_homogeneous_under_the_scaling() {
        // Degree −1 homogeneity is what makes the equivariance exact:
        // doubling the left representation halves the right one, bitwise,
        // because only exact powers of two are involved.
        let m = cyl_map();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let z = m.random_collar_sample(&mut rng);
            let a = m.gluing.apply(&(z * 2.0)).unwrap();
            let b = m.gluing.apply(&z).unwrap() * 0.5;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn equivariance_holds_on_fresh_collar_samples() {
        for m in [arc_map(), cyl_map()] {
            let res = m.equivariance_residual(500, 99).unwrap();
            assert!(res < EQUIVARIANCE_TOL, "{} residual {res:.3e}", m.variant.as_str());
        }
    }

    #[test]
    fn collar_points_agree_through_both_pieces() {
        // Applying in the left representation and applying in the right
        // representation describe the same sphere point.
        let m = arc_map();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst = 0f64;
        for _ in 0..200 {
            let z = m.random_collar_sample(&mut rng);
            let left_in = TaggedPoint { piece: Piece::Left, point: ChartPoint::north(z) };
            let a = m.apply(&left_in).unwrap();
            let right_in = TaggedPoint {
                piece: Piece::Right,
                point: m.transport_left_to_right(&ChartPoint::north(z)).unwrap(),
            };
            let b = m.apply(&right_in).unwrap();
            worst = worst.max(m.distance(&a, &b));
        }
        assert!(worst < 1e-7, "worst collar disagreement {worst:.3e}");
    }

    #[test]
    fn transported_stable_cone_lands_in_the_equatorial_plane() {
        for m in [arc_map(), cyl_map()] {
            let res = m.alignment_residual().unwrap();
            assert!(res < ALIGNMENT_TOL, "{} alignment {res:.3e}", m.variant.as_str());
        }
    }

    #[test]
    fn deleted_disk_points_are_rejected() {
        let m = arc_map();
        // Left piece: inside the deleted source disk (north chart).
        let z = V4::new(0.2 * m.left_collar_outer(), 0.0, 0.0, 0.0);
        let bad = TaggedPoint { piece: Piece::Left, point: ChartPoint::north(z) };
        assert!(matches!(m.apply(&bad), Err(Error::OutsideDomain(_))));
        // Right piece: inside the deleted deep disk (south chart).
        let y = V4::new(0.0, 0.2 * m.right_collar_outer(), 0.0, 0.0);
        let bad = TaggedPoint { piece: Piece::Right, point: ChartPoint::south(y) };
        assert!(matches!(m.apply_inv(&bad), Err(Error::OutsideDomain(_))));
    }

    fn run_witness(m: &'static SurgeredMap, x: &TaggedPoint) -> crate::analysis::HeteroclinicReport {
        let s1 = m.sigma_forward_target();
        let s2 = m.sigma_backward_target();
        heteroclinic_test(
            |p: &TaggedPoint| m.apply(p),
            |p: &TaggedPoint| m.apply_inv(p),
            |p: &TaggedPoint| m.distance(p, &s1),
            |p: &TaggedPoint| m.distance(p, &s2),
            x,
            20,
            20,
            1e-2,
        )
    }

    #[test]
    fn arc_samples_are_heteroclinic_between_the_saddles() {
        let m = arc_map();
        let witnesses = m.arc_witnesses(50).unwrap();
        assert!(witnesses.len() >= 50);
        for (i, w) in witnesses.iter().enumerate() {
            let report = run_witness(m, w);
            assert!(
                report.pass,
                "arc witness {i} failed: fwd end {:?} bwd end {:?} ({:?})",
                report.forward_distances.last(),
                report.backward_distances.last(),
                report.failure,
            );
        }
    }

    #[test]
    fn random_points_fail_the_arc_witness_test() {
        let m = arc_map();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut failures = 0;
        let total = 60;
        let sinks: Vec<TaggedPoint> = vec![
            TaggedPoint { piece: Piece::Left, point: m.left.fixed_points.omega },
            TaggedPoint { piece: Piece::Left, point: m.left.fixed_points.south_pole },
            TaggedPoint { piece: Piece::Right, point: m.right.fixed_points.omega },
        ];
        for _ in 0..total {
            let dir = V4::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if dir.norm() < 1e-3 {
                continue;
            }
            let r = 10f64.powf(rng.gen_range(-0.7..0.7));
            let x = TaggedPoint {
                piece: Piece::Right,
                point: ChartPoint::south(dir.normalize() * r),
            };
            let report = run_witness(m, &x);
            if !report.pass {
                failures += 1;
                // The forward orbit should have been captured by a sink.
                let mut cur = x;
                let mut ok = false;
                for _ in 0..30 {
                    match m.apply(&cur) {
                        Ok(next) => cur = next,
                        Err(_) => break,
                    }
                }
                for s in &sinks {
                    if m.distance(&cur, s) < 1e-2 {
                        ok = true;
                    }
                }
                assert!(ok, "failed control did not settle near a sink");
            }
        }
        assert!(
            failures as f64 >= 0.95 * total as f64,
            "only {failures}/{total} random controls failed"
        );
    }

    #[test]
    fn cylinder_samples_are_heteroclinic_and_interior_controls_fail() {
        let m = cyl_map();
        let witnesses = m.cylinder_witnesses(7, 8).unwrap();
        assert!(witnesses.len() >= 50);
        for (i, w) in witnesses.iter().enumerate() {
            let report = run_witness(m, w);
            assert!(
                report.pass,
                "cylinder witness {i} failed: fwd end {:?} bwd end {:?} ({:?})",
                report.forward_distances.last(),
                report.backward_distances.last(),
                report.failure,
            );
        }
        // Control set: same levels but strictly inside the funnel (these
        // hook into the interior sink) or between the funnel and the tube
        // wall (these pass over the saddle and escape down the tube) —
        // neither converges to the right saddle.
        for w in [0.5 * m.funnel, 0.5 * (m.funnel + 2.0)] {
            for i in 0..8 {
                let alpha = TAU * i as f64 / 8.0;
                let c = V4::new(-3.3, w * alpha.cos(), w * alpha.sin(), 0.0);
                let x = TaggedPoint {
                    piece: Piece::Right,
                    point: ChartPoint::south(m.right.chart.zeta_inv(&c).unwrap()),
                };
                let report = run_witness(m, &x);
                assert!(!report.pass, "control at radius {w} angle {alpha} passed");
            }
        }
    }

    #[test]
    fn fixed_level_cylinder_samples_form_a_closed_loop() {
        // Combinatorial loop check: at one axial level the witness set
        // winds once around the tube core, with no angular gap reaching a
        // half turn.
        let m = cyl_map();
        let around = 16;
        let mut angles = Vec::with_capacity(around);
        for j in 0..around {
            let alpha = TAU * j as f64 / around as f64;
            let c = V4::new(-3.0, m.funnel * alpha.cos(), m.funnel * alpha.sin(), 0.0);
            let ambient = m.right.chart.zeta_inv(&c).unwrap();
            // Project back through the chart: the transverse pair gives
            // the angular position around the core.
            let v = m.right.chart.zeta(&ambient).unwrap();
            angles.push(v[2].atan2(v[1]));
        }
        let mut winding = 0f64;
        for j in 0..around {
            let mut d = angles[(j + 1) % around] - angles[j];
            while d > PI {
                d -= TAU;
            }
            while d < -PI {
                d += TAU;
            }
            assert!(d.abs() < PI - 1e-6, "angular gap {d} reaches a half turn");
            winding += d;
        }
        assert!(
            (winding.abs() - TAU).abs() < 1e-9,
            "loop winds {winding} instead of one full turn"
        );
    }

    #[test]
    fn funnel_radius_is_frozen_and_reasonable() {
        let w = funnel_radius().unwrap();
        assert!(w > 1.0 && w < 2.0, "funnel radius {w}");
        // Once frozen, pushing further backward does not change it: the
        // transverse field vanishes outside the perturbed ball.
        let s = SVector::<f64, 2>::new(-3.2, w);
        let back = flow::time_one_map_inv(&s).unwrap();
        assert_eq!(back[1], w);
    }
}
