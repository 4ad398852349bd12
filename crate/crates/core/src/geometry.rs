//! Scaling self-similarity, the covering of punctured space over
//! `S^{n-1} × S^1`, and stereographic charts.
//!
//! The ambient scaling is `h(x) = x/2`. Its fundamental domain is the
//! half-open shell `1/2 < |x| ≤ 1`; every nonzero point is `h^{-k}` of a
//! unique point of that shell. The covering map sends `x` to its direction
//! together with the fractional part of `-log2 |x|`, so `h` acts as a full
//! turn of the fiber circle.

use crate::{Error, Result};
use nalgebra::SVector;

/// Tag naming a stereographic chart of `S^n`.
///
/// `South` is the chart defined away from the north pole; it sends the
/// south pole to the origin of the coordinate plane. `North` is defined
/// away from the south pole and sends the north pole to the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Pole {
    South,
    North,
}

impl Pole {
    pub fn other(self) -> Pole {
        match self {
            Pole::South => Pole::North,
            Pole::North => Pole::South,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pole::South => "south",
            Pole::North => "north",
        }
    }
}

/// Norm below which a vector is treated as the (forbidden) origin.
pub const ZERO_NORM_CUTOFF: f64 = 1e-300;
/// Snap tolerance for recognizing `log2 |x|` as an exact integer.
const LOG2_SNAP: f64 = 1e-12;

/// Apply the scaling `h` `k` times: `x ↦ x · 2^{-k}`.
///
/// Negative `k` applies the inverse. Powers of two are exact in binary
/// floating point, so this is a bitwise-exact similarity for any `|k|`
/// within the exponent range.
pub fn homothety_apply<const N: usize>(x: &SVector<f64, N>, k: i32) -> SVector<f64, N> {
    x * 2f64.powi(-k)
}

/// Reduce `x` to the fundamental shell `1/2 < |y| ≤ 1`.
///
/// Returns `(k, y)` with `y = h^k(x) = x · 2^{-k}`. The scale exponent is
/// `k = ⌈log2 |x|⌉`, snapped to the nearest integer when `log2 |x|` is
/// within `1e-12` of one so that exact powers of two land on the outer
/// boundary `|y| = 1`.
pub fn fundamental_reduce<const N: usize>(x: &SVector<f64, N>) -> Result<(i32, SVector<f64, N>)> {
    let r = x.norm();
    if r.is_nan() || r <= ZERO_NORM_CUTOFF {
        return Err(Error::ZeroPoint(format!(
            "fundamental_reduce at |x| = {r:e}"
        )));
    }
    let l = r.log2();
    let mut k = if (l - l.round()).abs() <= LOG2_SNAP {
        l.round()
    } else {
        l.ceil()
    } as i32;
    // Guard against rounding placing |y| epsilon-outside the half-open shell.
    let mut y = homothety_apply(x, k);
    let mut n = y.norm();
    while n > 1.0 {
        k += 1;
        y = homothety_apply(x, k);
        n = y.norm();
    }
    while n <= 0.5 {
        k -= 1;
        y = homothety_apply(x, k);
        n = y.norm();
    }
    Ok((k, y))
}

/// Project a nonzero point to the covering base `S^{n-1} × S^1`.
///
/// Returns the unit direction `x/|x|` and the fiber coordinate
/// `(-log2 |x|) mod 1 ∈ [0, 1)`. The scaling `h` advances the fiber by a
/// full turn and fixes the direction, so this map is `h`-invariant.
pub fn covering_project<const N: usize>(x: &SVector<f64, N>) -> Result<(SVector<f64, N>, f64)> {
    let r = x.norm();
    if r.is_nan() || r <= ZERO_NORM_CUTOFF {
        return Err(Error::ZeroPoint(format!("covering_project at |x| = {r:e}")));
    }
    let direction = x / r;
    let mut fiber = (-r.log2()).rem_euclid(1.0);
    if fiber >= 1.0 {
        // rem_euclid can return exactly 1.0 when the argument is a tiny
        // negative number; fold it back into the half-open interval.
        fiber = 0.0;
    }
    Ok((direction, fiber))
}

/// Image of a sphere point under the named stereographic chart.
///
/// `p` holds the `n+1` ambient coordinates of a point of `S^n`. The south
/// chart divides the first `n` coordinates by `1 - p_{n+1}` (undefined at
/// the north pole), the north chart by `1 + p_{n+1}` (undefined at the
/// south pole).
pub fn stereo_to_plane(p: &[f64], chart: Pole) -> Result<Vec<f64>> {
    let (last, head) = p
        .split_last()
        .ok_or_else(|| Error::ZeroPoint("empty point in stereo_to_plane".into()))?;
    let denom = match chart {
        Pole::South => 1.0 - last,
        Pole::North => 1.0 + last,
    };
    let head_sq: f64 = head.iter().map(|&v| v * v).sum();
    if denom.abs() < 1e-15 && head_sq < 1e-30 {
        return Err(Error::PoleSingularity(format!(
            "stereo_to_plane: point at the removed pole of the {} chart",
            chart.as_str()
        )));
    }
    // Near the removed pole the subtraction `1 ∓ p_{n+1}` cancels
    // catastrophically; on the sphere `1 - p_{n+1}² = |head|²`, so divide
    // by that instead and keep full relative accuracy for far points.
    if denom.abs() < 0.5 {
        if head_sq < 1e-300 {
            return Err(Error::PoleSingularity(format!(
                "stereo_to_plane: point at the removed pole of the {} chart",
                chart.as_str()
            )));
        }
        let factor = (2.0 - denom) / head_sq;
        return Ok(head.iter().map(|&v| v * factor).collect());
    }
    Ok(head.iter().map(|&v| v / denom).collect())
}

/// Inverse of [`stereo_to_plane`]: lift plane coordinates back to `S^n`.
pub fn stereo_from_plane(y: &[f64], chart: Pole) -> Vec<f64> {
    let q: f64 = y.iter().map(|&v| v * v).sum();
    let scale = 2.0 / (1.0 + q);
    let mut p: Vec<f64> = y.iter().map(|&v| v * scale).collect();
    let last = match chart {
        Pole::South => (q - 1.0) / (q + 1.0),
        Pole::North => (1.0 - q) / (1.0 + q),
    };
    p.push(last);
    p
}

/// Transition between the two stereographic charts: `y ↦ y / |y|²`.
///
/// The transition is an involution and is its own inverse; it is undefined
/// at the chart origin (which represents the removed pole of the other
/// chart).
pub fn chart_transition<const N: usize>(y: &SVector<f64, N>) -> Result<SVector<f64, N>> {
    let q = y.norm_squared();
    if q.is_nan() || q <= ZERO_NORM_CUTOFF {
        return Err(Error::PoleSingularity(
            "chart transition at the chart origin".into(),
        ));
    }
    Ok(y / q)
}

/// Slice version of [`chart_transition`], for dimension-agnostic callers.
pub fn chart_transition_slice(y: &[f64]) -> Result<Vec<f64>> {
    let q: f64 = y.iter().map(|&v| v * v).sum();
    if q.is_nan() || q <= ZERO_NORM_CUTOFF {
        return Err(Error::PoleSingularity(
            "chart transition at the chart origin".into(),
        ));
    }
    Ok(y.iter().map(|&v| v / q).collect())
}

/// Whether `x` lies in the closed shell `2^{-k-1} ≤ |x| ≤ 2^{-k}`
/// (the image of the standard annulus under `h^k`), with tolerance `tol`
/// on both radii.
pub fn in_shell<const N: usize>(x: &SVector<f64, N>, k: i32, tol: f64) -> bool {
    let r = x.norm();
    let outer = 2f64.powi(-k);
    r >= outer * 0.5 - tol && r <= outer + tol
}

/// Monotone piecewise-cubic interpolant (Fritsch–Carlson slopes).
///
/// Interpolates the knots exactly and, for monotone knot values, stays
/// monotone between them — used for the spanning-strip pairing and for the
/// latitude remap of the gluing maps, both of which must not overshoot.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ms: Vec<f64>,
}

impl MonotoneCubic {
    /// Build from knots with strictly increasing abscissae.
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::ConstructionFailed(
                "monotone cubic needs at least two knots".into(),
            ));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        if xs.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[1] <= w[0]) {
            return Err(Error::ConstructionFailed(
                "monotone cubic knots must have strictly increasing abscissae".into(),
            ));
        }
        let n = xs.len();
        let d: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut ms = vec![0.0; n];
        ms[0] = d[0];
        ms[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            ms[i] = if d[i - 1] * d[i] <= 0.0 {
                0.0
            } else {
                0.5 * (d[i - 1] + d[i])
            };
        }
        // Fritsch–Carlson limiter: keep (alpha, beta) inside the circle of
        // radius 3 so each cubic piece is monotone.
        for i in 0..n - 1 {
            if d[i] == 0.0 {
                ms[i] = 0.0;
                ms[i + 1] = 0.0;
                continue;
            }
            let alpha = ms[i] / d[i];
            let beta = ms[i + 1] / d[i];
            let s = alpha * alpha + beta * beta;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                ms[i] = t * alpha * d[i];
                ms[i + 1] = t * beta * d[i];
            }
        }
        Ok(MonotoneCubic { xs, ys, ms })
    }

    /// Evaluate at `x`; outside the knot range the end values are held.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p => p - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ms[i] + h01 * self.ys[i + 1] + h11 * h * self.ms[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    #[test]
    fn homothety_scales_by_halves() {
        let x = Vector3::new(1.0, -2.0, 3.0);
        assert_eq!(homothety_apply(&x, 1), Vector3::new(0.5, -1.0, 1.5));
        assert_eq!(homothety_apply(&x, -1), Vector3::new(2.0, -4.0, 6.0));
        // Exact round trip: powers of two are exact scalings.
        assert_eq!(homothety_apply(&homothety_apply(&x, 7), -7), x);
    }

    #[test]
    fn fundamental_reduce_known_points() {
        let (k, y) = fundamental_reduce(&Vector3::new(4.0, 0.0, 0.0)).unwrap();
        assert_eq!(k, 2);
        assert_eq!(y, Vector3::new(1.0, 0.0, 0.0));

        let (k, y) = fundamental_reduce(&Vector3::new(0.75, 0.0, 0.0)).unwrap();
        assert_eq!(k, 0);
        assert_eq!(y, Vector3::new(0.75, 0.0, 0.0));

        let (k, y) = fundamental_reduce(&Vector3::new(0.5, 0.0, 0.0)).unwrap();
        assert_eq!(k, -1);
        assert_eq!(y, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn fundamental_reduce_rejects_origin() {
        assert!(matches!(
            fundamental_reduce(&Vector3::new(0.0, 0.0, 0.0)),
            Err(crate::Error::ZeroPoint(_))
        ));
    }

    #[test]
    fn covering_examples() {
        let (dir, fiber) = covering_project(&Vector3::new(0.25, 0.0, 0.0)).unwrap();
        assert_eq!(dir, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(fiber, 0.0);

        let r = 2f64.powf(-0.25);
        let (_, fiber) = covering_project(&Vector3::new(r, 0.0, 0.0)).unwrap();
        assert_relative_eq!(fiber, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn covering_is_scaling_invariant() {
        let x = Vector3::new(0.3, -0.8, 1.1);
        let (d0, f0) = covering_project(&x).unwrap();
        let (d1, f1) = covering_project(&homothety_apply(&x, 3)).unwrap();
        assert!((d0 - d1).norm() <= 1e-9);
        assert!((f0 - f1).abs() <= 1e-9 || (1.0 - (f0 - f1).abs()) <= 1e-9);
    }

    #[test]
    fn stereo_chart_conventions() {
        // South pole of S^3 maps to the origin of the south chart.
        let south = [0.0, 0.0, 0.0, -1.0];
        assert_eq!(stereo_to_plane(&south, Pole::South).unwrap(), vec![0.0; 3]);
        // The equator is fixed pointwise in either chart.
        let eq = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(
            stereo_to_plane(&eq, Pole::South).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(
            stereo_to_plane(&eq, Pole::North).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        // Evaluating a chart at its removed pole is an error.
        let north = [0.0, 0.0, 0.0, 1.0];
        assert!(matches!(
            stereo_to_plane(&north, Pole::South),
            Err(crate::Error::PoleSingularity(_))
        ));
    }

    #[test]
    fn chart_transition_example() {
        let y = nalgebra::Vector4::new(2.0, 0.0, 0.0, 0.0);
        let z = chart_transition(&y).unwrap();
        assert_eq!(z, nalgebra::Vector4::new(0.5, 0.0, 0.0, 0.0));
        assert_eq!(chart_transition(&z).unwrap(), y);
    }

    proptest! {
        #[test]
        fn reduce_lands_in_fundamental_shell(
            x in -1e6f64..1e6, y in -1e6f64..1e6, z in -1e6f64..1e6
        ) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() > 1e-6);
            let (k, w) = fundamental_reduce(&v).unwrap();
            let n = w.norm();
            prop_assert!(n > 0.5 && n <= 1.0, "norm {} out of shell", n);
            prop_assert_eq!(w, homothety_apply(&v, k));
        }

        #[test]
        fn fiber_is_unit_interval(x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() > 1e-6);
            let (dir, fiber) = covering_project(&v).unwrap();
            prop_assert!((0.0..1.0).contains(&fiber));
            prop_assert!((dir.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn stereo_round_trip(
            a in -1e6f64..1e6, b in -1e6f64..1e6, c in -1e6f64..1e6,
            south in proptest::bool::ANY
        ) {
            let chart = if south { Pole::South } else { Pole::North };
            let y = [a, b, c];
            let p = stereo_from_plane(&y, chart);
            let back = stereo_to_plane(&p, chart).unwrap();
            let scale = 1.0f64.max(y.iter().map(|v| v.abs()).fold(0.0, f64::max));
            for i in 0..3 {
                prop_assert!((back[i] - y[i]).abs() <= 1e-10 * scale);
            }
            // The lift really lands on the unit sphere.
            let n: f64 = p.iter().map(|v| v * v).sum();
            prop_assert!((n - 1.0).abs() < 1e-9);
        }

        #[test]
        fn transition_is_involution(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3) {
            let v = Vector3::new(a, b, c);
            prop_assume!(v.norm() > 1e-3);
            let w = chart_transition(&chart_transition(&v).unwrap()).unwrap();
            prop_assert!((w - v).norm() <= 1e-12 * v.norm().max(1.0));
        }

        #[test]
        fn monotone_cubic_stays_monotone(x in 0.0f64..1.0) {
            let f = MonotoneCubic::new(&[
                (0.0, 0.0), (0.3, 0.06), (0.5, 0.5), (0.7, 0.94), (1.0, 1.0),
            ]).unwrap();
            let eps = 1e-6;
            let lo = f.eval(x);
            let hi = f.eval((x + eps).min(1.0));
            prop_assert!(hi >= lo - 1e-12);
            prop_assert!((0.0..=1.0).contains(&lo));
        }
    }

    #[test]
    fn monotone_cubic_interpolates_knots() {
        let knots = [(0.0, 0.0), (0.25, 0.1), (0.5, 0.5), (1.0, 1.0)];
        let f = MonotoneCubic::new(&knots).unwrap();
        for &(x, y) in &knots {
            assert_eq!(f.eval(x), y);
        }
        // Held constant beyond the ends.
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(2.0), 1.0);
    }

    #[test]
    fn monotone_cubic_rejects_bad_knots() {
        assert!(MonotoneCubic::new(&[(0.0, 0.0)]).is_err());
        assert!(MonotoneCubic::new(&[(0.0, 0.0), (0.0, 1.0)]).is_err());
    }
}
