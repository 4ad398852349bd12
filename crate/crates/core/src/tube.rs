//! Tubular-neighborhood coordinates around the invariant arcs.
//!
//! A chart `ζ` carries the scaling-invariant solid tube `N(γ)` around an
//! arc `γ` onto the standard solid cylinder `C = {‖x_⊥‖ ≤ 2}` so that the
//! halving `h` on the tube corresponds to the unit translation `g` on the
//! cylinder. Two realizations are provided: a closed-form chart around
//! the straight ray (the trivial arc), and a frame-transported chart
//! around the assembled self-similar arc, where no closed form exists.
//!
//! On top of the charts sits [`model_diffeo`]: the map that equals `h`
//! away from the tube and the conjugated flow time-one map inside it.

use crate::flow::{self, CYLINDER_SLACK};
use crate::geometry::ZERO_NORM_CUTOFF;
use crate::{Error, Result, V3};
use nalgebra::SVector;

/// Angular radius of the straight-ray tube. The ray has nothing else to
/// clear, so the cone can be generous.
pub const RADIAL_THETA0: f64 = 0.1;

/// Tolerance on the squared transverse chart norm, matching the cylinder
/// membership slack of the flow module.
const MEMBERSHIP_SLACK: f64 = CYLINDER_SLACK;

/// Iterations of bisection used to place a point on the normal plane of
/// the centerline. 60 halvings of a sub-unit bracket reach the last bit.
const FOOT_BISECTIONS: usize = 60;

/// Chart around the positive `x₁`-ray: the tube is the cone
/// `‖x_⊥‖ ≤ θ₀·x₁`, and `ζ(x) = (−log₂x₁, 2x_⊥/(θ₀x₁))` maps it onto the
/// solid cylinder, turning the halving into the unit translation.
#[derive(Debug, Clone)]
pub struct RadialTube {
    pub theta0: f64,
}

impl RadialTube {
    pub fn new(theta0: f64) -> Result<Self> {
        if theta0.is_nan() || theta0 <= 0.0 || theta0 >= 1.0 {
            return Err(Error::ConstructionFailed(format!(
                "angular radius must lie in (0, 1), got {theta0}"
            )));
        }
        Ok(Self { theta0 })
    }

    pub fn zeta<const N: usize>(&self, x: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        let rho = x[0];
        if rho.is_nan() || rho <= ZERO_NORM_CUTOFF {
            return Err(Error::OutsideTube(format!(
                "axial coordinate {rho} is not ahead of the origin"
            )));
        }
        let mut y = SVector::<f64, N>::zeros();
        let scale = 2.0 / (self.theta0 * rho);
        let mut trans2 = 0.0;
        for i in 1..N {
            y[i] = scale * x[i];
            trans2 += y[i] * y[i];
        }
        if trans2.is_nan() || trans2 > 4.0 + MEMBERSHIP_SLACK {
            return Err(Error::OutsideTube(format!(
                "transverse chart norm² = {trans2} exceeds the cylinder"
            )));
        }
        y[0] = -rho.log2();
        Ok(y)
    }

    pub fn zeta_inv<const N: usize>(&self, y: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        let trans2: f64 = (1..N).map(|i| y[i] * y[i]).sum();
        if trans2.is_nan() || trans2 > 4.0 + MEMBERSHIP_SLACK {
            return Err(Error::OutsideCylinder(format!(
                "transverse norm² = {trans2} exceeds the cylinder"
            )));
        }
        let rho = (-y[0]).exp2();
        let mut x = SVector::<f64, N>::zeros();
        x[0] = rho;
        let scale = self.theta0 * rho / 2.0;
        for i in 1..N {
            x[i] = scale * y[i];
        }
        Ok(x)
    }
}

/// Chart around the assembled self-similar arc, built from one period of
/// the centerline. Vertex frames are rotation-minimizing normals with
/// the residual twist spread evenly along the period so that the frame
/// at the period's end is bit-identical to the frame at its start; the
/// whole arc then reuses the same period data at every scale, which
/// makes the chart commute with the halving exactly.
#[derive(Debug, Clone)]
pub struct FrameTube {
    /// One period of the centerline, from `α` to `α/2`.
    period: Vec<V3>,
    /// Unit tangents at the vertices (central differences, with the
    /// junction neighbors taken from the adjacent scaled periods).
    tangents: Vec<V3>,
    /// Twist-corrected unit normals at the vertices.
    m1: Vec<V3>,
    /// Cumulative arclength at each vertex; `cum[0] = 0`.
    cum: Vec<f64>,
    total_len: f64,
    norm_lo: f64,
    norm_hi: f64,
    pub theta0: f64,
}

fn normalize(v: V3) -> V3 {
    v / v.norm()
}

/// Rotation of `m` by `angle` about the unit axis `t`.
fn rotate_about(m: &V3, t: &V3, angle: f64) -> V3 {
    let (s, c) = angle.sin_cos();
    m * c + t.cross(m) * s + t * (t.dot(m)) * (1.0 - c)
}

impl FrameTube {
    /// Build the chart around the period polyline of a generator.
    pub fn around(period: Vec<V3>, theta0: f64) -> Result<Self> {
        if theta0.is_nan() || theta0 <= 0.0 || theta0 >= 1.0 {
            return Err(Error::ConstructionFailed(format!(
                "angular radius must lie in (0, 1), got {theta0}"
            )));
        }
        let n = period.len();
        if n < 3 {
            return Err(Error::ConstructionFailed(
                "frame chart needs at least two centerline segments".into(),
            ));
        }
        let m = n - 1;

        // Vertex tangents. The neighbor before the first vertex is the
        // doubled second-to-last vertex, and the neighbor after the last
        // is the halved second vertex, so the two junction tangents are
        // parallel by construction (and bit-equal after normalizing,
        // since the difference vectors are exact halves of one another).
        let mut tangents = Vec::with_capacity(n);
        tangents.push(normalize(period[1] - period[m - 1] * 2.0));
        for i in 1..m {
            tangents.push(normalize(period[i + 1] - period[i - 1]));
        }
        tangents.push(normalize(period[1] * 0.5 - period[m - 1]));

        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 0..m {
            acc += (period[i + 1] - period[i]).norm();
            cum.push(acc);
        }
        let total_len = acc;
        if total_len.is_nan() || total_len <= 0.0 {
            return Err(Error::ConstructionFailed(
                "centerline period has zero length".into(),
            ));
        }

        // Rotation-minimizing transport of an initial normal by the
        // double-reflection scheme.
        let seed = {
            let t0 = tangents[0];
            let trial = V3::new(0.0, 0.0, 1.0);
            let rejected = trial - t0 * trial.dot(&t0);
            normalize(rejected)
        };
        let mut m1 = Vec::with_capacity(n);
        m1.push(seed);
        for i in 0..m {
            let v1 = period[i + 1] - period[i];
            let c1 = v1.dot(&v1);
            let r_l = m1[i] - v1 * (2.0 / c1 * v1.dot(&m1[i]));
            let t_l = tangents[i] - v1 * (2.0 / c1 * v1.dot(&tangents[i]));
            let v2 = tangents[i + 1] - t_l;
            let c2 = v2.dot(&v2);
            let next = if c2 > 0.0 {
                r_l - v2 * (2.0 / c2 * v2.dot(&r_l))
            } else {
                r_l
            };
            m1.push(next);
        }

        // The transported end normal differs from the start normal by a
        // twist in the shared normal plane (the junction tangents are
        // equal). Spread the opposite twist along arclength so the period
        // closes up, then snap the last frame to the first bit for bit.
        let t_end = tangents[m];
        let psi = {
            let a = m1[0];
            let b = m1[m];
            (a.cross(&b).dot(&t_end)).atan2(a.dot(&b))
        };
        for i in 0..n {
            let angle = -psi * cum[i] / total_len;
            let rotated = rotate_about(&m1[i], &tangents[i], angle);
            let straight = rotated - tangents[i] * rotated.dot(&tangents[i]);
            m1[i] = normalize(straight);
        }
        m1[m] = m1[0];

        let mut norm_lo = f64::INFINITY;
        let mut norm_hi = 0.0f64;
        for p in &period {
            let r = p.norm();
            norm_lo = norm_lo.min(r);
            norm_hi = norm_hi.max(r);
        }

        Ok(Self {
            period,
            tangents,
            m1,
            cum,
            total_len,
            norm_lo,
            norm_hi,
            theta0,
        })
    }

    /// Foot point, unit tangent, and normal pair at parameter `u` of
    /// segment `i` (interpolated between the vertex frames and kept
    /// orthonormal against the interpolated tangent).
    fn frame_at(&self, i: usize, u: f64) -> (V3, V3, V3, V3) {
        let foot = self.period[i] * (1.0 - u) + self.period[i + 1] * u;
        let tau = normalize(self.tangents[i] * (1.0 - u) + self.tangents[i + 1] * u);
        let mix = self.m1[i] * (1.0 - u) + self.m1[i + 1] * u;
        let m1 = normalize(mix - tau * mix.dot(&tau));
        let m2 = tau.cross(&m1);
        (foot, tau, m1, m2)
    }

    /// Signed normal-plane residual `(y − foot(u))·τ(u)` on segment `i`.
    fn plane_gap(&self, i: usize, u: f64, y: &V3) -> f64 {
        let foot = self.period[i] * (1.0 - u) + self.period[i + 1] * u;
        let tau = normalize(self.tangents[i] * (1.0 - u) + self.tangents[i + 1] * u);
        (y - foot).dot(&tau)
    }

    /// Levels `k` whose scaled copy of the period could contain a point
    /// of norm `rho` inside the tube.
    fn candidate_levels(&self, rho: f64) -> std::ops::RangeInclusive<i32> {
        let pad = 1.0 + 2.0 * self.theta0;
        let lo = (self.norm_lo / pad / rho).log2().ceil() as i32;
        let hi = (self.norm_hi * pad / rho).log2().floor() as i32;
        lo..=hi
    }

    pub fn zeta<const N: usize>(&self, x: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        let rho = x.norm();
        if !rho.is_finite() || rho <= ZERO_NORM_CUTOFF {
            return Err(Error::ZeroPoint(format!(
                "tube chart evaluated at norm {rho}"
            )));
        }
        let m = self.period.len() - 1;
        // Best candidate: (ratio², level, arclength, transverse coords).
        let mut best: Option<(f64, i32, f64, SVector<f64, N>)> = None;
        for k in self.candidate_levels(rho) {
            let scale = 2f64.powi(k);
            let y = x * scale;
            let y3 = V3::new(y[0], y[1], y[2]);
            // Sign of the normal-plane residual at each vertex; a sign
            // change brackets a foot candidate on that segment.
            let mut gaps = Vec::with_capacity(m + 1);
            for i in 0..=m {
                gaps.push((y3 - self.period[i]).dot(&self.tangents[i]));
            }
            for i in 0..m {
                let (ga, gb) = (gaps[i], gaps[i + 1]);
                let u_root = if ga == 0.0 {
                    Some(0.0)
                } else if i == m - 1 && gb == 0.0 {
                    Some(1.0)
                } else if ga * gb < 0.0 {
                    let (mut lo_u, mut hi_u) = (0.0f64, 1.0f64);
                    let mut f_lo = ga;
                    for _ in 0..FOOT_BISECTIONS {
                        let mid = 0.5 * (lo_u + hi_u);
                        let f_mid = self.plane_gap(i, mid, &y3);
                        if f_mid == 0.0 {
                            lo_u = mid;
                            hi_u = mid;
                            break;
                        }
                        if (f_lo > 0.0) == (f_mid > 0.0) {
                            lo_u = mid;
                            f_lo = f_mid;
                        } else {
                            hi_u = mid;
                        }
                    }
                    Some(0.5 * (lo_u + hi_u))
                } else {
                    None
                };
                let Some(u) = u_root else { continue };
                let (foot, _tau, m1, m2) = self.frame_at(i, u);
                let w3 = y3 - foot;
                let radius = self.theta0 * foot.norm();
                let vscale = 2.0 / radius;
                let mut v = SVector::<f64, N>::zeros();
                v[1] = vscale * w3.dot(&m1);
                v[2] = vscale * w3.dot(&m2);
                for j in 3..N {
                    v[j] = vscale * y[j];
                }
                let ratio2 = (1..N).map(|j| v[j] * v[j]).sum::<f64>() / 4.0;
                let closer = match &best {
                    None => true,
                    Some((r2, ..)) => ratio2 < *r2,
                };
                if closer {
                    let s = self.cum[i] + u * (self.cum[i + 1] - self.cum[i]);
                    best = Some((ratio2, k, s, v));
                }
            }
        }
        match best {
            Some((ratio2, k, s, mut v)) if ratio2 * 4.0 <= 4.0 + MEMBERSHIP_SLACK => {
                v[0] = k as f64 + s / self.total_len;
                Ok(v)
            }
            _ => Err(Error::OutsideTube(format!(
                "no centerline foot within the tube radius for |x| = {rho}"
            ))),
        }
    }

    pub fn zeta_inv<const N: usize>(&self, y: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        let trans2: f64 = (1..N).map(|i| y[i] * y[i]).sum();
        if trans2.is_nan() || trans2 > 4.0 + MEMBERSHIP_SLACK {
            return Err(Error::OutsideCylinder(format!(
                "transverse norm² = {trans2} exceeds the cylinder"
            )));
        }
        let lambda = y[0];
        if !lambda.is_finite() {
            return Err(Error::OutsideCylinder(format!(
                "axial coordinate {lambda} is not finite"
            )));
        }
        let k = lambda.floor();
        let nu = lambda - k;
        let s = (nu * self.total_len).min(self.total_len);
        // Locate the segment containing arclength s.
        let m = self.period.len() - 1;
        let i = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(idx) => idx.min(m - 1),
            Err(idx) => idx.saturating_sub(1).min(m - 1),
        };
        let seg = self.cum[i + 1] - self.cum[i];
        let u = ((s - self.cum[i]) / seg).clamp(0.0, 1.0);
        let (foot, _tau, m1, m2) = self.frame_at(i, u);
        let radius = self.theta0 * foot.norm();
        let half = radius / 2.0;
        let w3 = m1 * (half * y[1]) + m2 * (half * y[2]);
        let point3 = foot + w3;
        // Scale the assembled period-coordinate point down to level k in
        // one exact power-of-two multiplication per component.
        let scale = 2f64.powi(-(k as i32));
        let mut x = SVector::<f64, N>::zeros();
        x[0] = point3.x * scale;
        x[1] = point3.y * scale;
        x[2] = point3.z * scale;
        for j in 3..N {
            x[j] = half * y[j] * scale;
        }
        Ok(x)
    }
}

/// The conjugating chart of a tube, in either realization.
#[derive(Debug, Clone)]
pub enum TubeChart {
    Radial(RadialTube),
    Frame(FrameTube),
}

impl TubeChart {
    pub fn radial(theta0: f64) -> Result<Self> {
        Ok(Self::Radial(RadialTube::new(theta0)?))
    }

    pub fn around_period(period: Vec<V3>, theta0: f64) -> Result<Self> {
        Ok(Self::Frame(FrameTube::around(period, theta0)?))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Radial(_) => "radial",
            Self::Frame(_) => "frame",
        }
    }

    pub fn theta0(&self) -> f64 {
        match self {
            Self::Radial(t) => t.theta0,
            Self::Frame(t) => t.theta0,
        }
    }

    pub fn zeta<const N: usize>(&self, x: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        match self {
            Self::Radial(t) => t.zeta(x),
            Self::Frame(t) => t.zeta(x),
        }
    }

    pub fn zeta_inv<const N: usize>(&self, y: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        match self {
            Self::Radial(t) => t.zeta_inv(y),
            Self::Frame(t) => t.zeta_inv(y),
        }
    }

    /// Range of point norms that could reach the flow's perturbed ball
    /// (axial chart coordinate in [−4, 4]), padded by one octave. Points
    /// outside provably map by the plain halving, in both directions.
    pub fn active_scale_range(&self) -> (f64, f64) {
        match self {
            Self::Radial(t) => {
                let pad = 1.0 + t.theta0;
                (2f64.powi(-5), 2f64.powi(5) * pad)
            }
            Self::Frame(t) => {
                let pad = 1.0 + 2.0 * t.theta0;
                (t.norm_lo / pad * 2f64.powi(-5), t.norm_hi * pad * 2f64.powi(5))
            }
        }
    }
}

/// The model diffeomorphism: the halving `h` away from the tube, and the
/// chart conjugate of the flow's time-one map inside it. On the overlap
/// collar (tube points whose chart image lies in the translation region)
/// the two branches agree, and the halving is returned directly.
pub fn model_diffeo<const N: usize>(
    x: &SVector<f64, N>,
    chart: &TubeChart,
) -> Result<SVector<f64, N>> {
    let rho = x.norm();
    if !rho.is_finite() || rho <= ZERO_NORM_CUTOFF {
        return Err(Error::ZeroPoint(format!(
            "model diffeomorphism evaluated at norm {rho}"
        )));
    }
    let (lo, hi) = chart.active_scale_range();
    if rho < lo || rho > hi {
        return Ok(x * 0.5);
    }
    match chart.zeta(x) {
        Err(Error::OutsideTube(_)) => Ok(x * 0.5),
        Err(e) => Err(e),
        Ok(c) => {
            if c[0] >= 2.0 || c[0] <= -3.0 {
                // The forward unit of cylinder time is a pure translation
                // there, which the chart turns back into the halving.
                Ok(x * 0.5)
            } else {
                chart.zeta_inv(&flow::time_one_map(&c)?)
            }
        }
    }
}

/// Inverse of [`model_diffeo`]: the doubling away from the tube, and the
/// conjugated backward time-one map inside it.
pub fn model_diffeo_inv<const N: usize>(
    x: &SVector<f64, N>,
    chart: &TubeChart,
) -> Result<SVector<f64, N>> {
    let rho = x.norm();
    if !rho.is_finite() || rho <= ZERO_NORM_CUTOFF {
        return Err(Error::ZeroPoint(format!(
            "model diffeomorphism evaluated at norm {rho}"
        )));
    }
    let (lo, hi) = chart.active_scale_range();
    if rho < lo || rho > hi {
        return Ok(x * 2.0);
    }
    match chart.zeta(x) {
        Err(Error::OutsideTube(_)) => Ok(x * 2.0),
        Err(e) => Err(e),
        Ok(c) => {
            if c[0] >= 3.0 || c[0] <= -2.0 {
                Ok(x * 2.0)
            } else {
                chart.zeta_inv(&flow::time_one_map_inv(&c)?)
            }
        }
    }
}
