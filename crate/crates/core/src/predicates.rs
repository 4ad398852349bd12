//! Exact geometric predicates.
//!
//! Intersection counting between the arc polylines and the spanning disk is
//! certified, so the underlying orientation predicate must never lie. The
//! fast path evaluates the `3×3` determinant in floating point with a
//! conservative error bound; whenever the magnitude of the determinant is
//! below that bound the sign is recomputed in exact rational arithmetic.

use crate::V3;
use num::bigint::BigInt;
use num::rational::Ratio;
use num::traits::Zero as _;

type Rational = Ratio<BigInt>;

/// Sign of an orientation determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orient {
    Positive,
    Negative,
    Zero,
}

impl Orient {
    fn of_f64(v: f64) -> Orient {
        if v > 0.0 {
            Orient::Positive
        } else if v < 0.0 {
            Orient::Negative
        } else {
            Orient::Zero
        }
    }
}

fn rational(x: f64) -> Rational {
    Rational::from_float(x).expect("finite coordinate")
}

fn orient3d_exact(a: &V3, b: &V3, c: &V3, d: &V3) -> Orient {
    let col = |p: &V3, q: &V3, i: usize| rational(p[i]) - rational(q[i]);
    let u = [col(b, a, 0), col(b, a, 1), col(b, a, 2)];
    let v = [col(c, a, 0), col(c, a, 1), col(c, a, 2)];
    let w = [col(d, a, 0), col(d, a, 1), col(d, a, 2)];
    let det = u[0].clone() * (v[1].clone() * w[2].clone() - v[2].clone() * w[1].clone())
        - u[1].clone() * (v[0].clone() * w[2].clone() - v[2].clone() * w[0].clone())
        + u[2].clone() * (v[0].clone() * w[1].clone() - v[1].clone() * w[0].clone());
    if det.is_zero() {
        Orient::Zero
    } else if det > Rational::zero() {
        Orient::Positive
    } else {
        Orient::Negative
    }
}

/// Orientation of `d` relative to the plane spanned by `(a, b, c)`.
///
/// Positive when `(b-a, c-a, d-a)` is a positively oriented frame. The
/// result is exact: a floating-point filter decides clear cases and a
/// big-rational determinant decides the rest (including exact zeros).
pub fn orient3d(a: &V3, b: &V3, c: &V3, d: &V3) -> Orient {
    let u = b - a;
    let v = c - a;
    let w = d - a;
    let det = u.dot(&v.cross(&w));
    // Conservative forward-error bound for the floating determinant,
    // including the rounding of the three subtractions.
    let mag = |p: &V3, q: &V3| {
        (p[0].abs() + q[0].abs())
            .max(p[1].abs() + q[1].abs())
            .max(p[2].abs() + q[2].abs())
    };
    let bound = 1e-12 * mag(b, a) * mag(c, a) * mag(d, a);
    if det.abs() > bound {
        Orient::of_f64(det)
    } else {
        orient3d_exact(a, b, c, d)
    }
}

/// Outcome of a segment/triangle intersection test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegTri {
    /// The open segment crosses the open triangle interior transversally.
    Crossing,
    /// No intersection.
    Miss,
    /// A degenerate incidence (touching, coplanarity, shared boundary):
    /// the count is not well defined without perturbation.
    Degenerate,
}

/// Exact transversal intersection test between segment `pq` and triangle
/// `abc`.
///
/// Only proper crossings count; every zero orientation is reported as
/// [`SegTri::Degenerate`] so the caller can perturb and retry.
pub fn segment_triangle(p: &V3, q: &V3, a: &V3, b: &V3, c: &V3) -> SegTri {
    let sp = orient3d(a, b, c, p);
    let sq = orient3d(a, b, c, q);
    if sp == Orient::Zero || sq == Orient::Zero {
        return SegTri::Degenerate;
    }
    if sp == sq {
        return SegTri::Miss;
    }
    let s1 = orient3d(p, q, a, b);
    let s2 = orient3d(p, q, b, c);
    let s3 = orient3d(p, q, c, a);
    if s1 == Orient::Zero || s2 == Orient::Zero || s3 == Orient::Zero {
        return SegTri::Degenerate;
    }
    if s1 == s2 && s2 == s3 {
        SegTri::Crossing
    } else {
        SegTri::Miss
    }
}

/// Axis-aligned bounding box prefilter: true when the boxes of the segment
/// and the triangle, each inflated by `pad`, overlap.
pub fn boxes_overlap(p: &V3, q: &V3, a: &V3, b: &V3, c: &V3, pad: f64) -> bool {
    for i in 0..3 {
        let s_lo = p[i].min(q[i]) - pad;
        let s_hi = p[i].max(q[i]) + pad;
        let t_lo = a[i].min(b[i]).min(c[i]);
        let t_hi = a[i].max(b[i]).max(c[i]);
        if s_lo > t_hi || s_hi < t_lo {
            return false;
        }
    }
    true
}

/// Deterministic pseudorandom offset used for symbolic-style perturbation.
///
/// The offset for a given `index` is fixed forever (splitmix64 bit mixing);
/// components lie in `[-scale, scale]`.
pub fn perturbation_offset(index: u64, scale: f64) -> V3 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    let unit = |bits: u64| {
        // Map the top 53 bits to [-1, 1).
        let v = (bits >> 11) as f64 / (1u64 << 52) as f64;
        v - 1.0
    };
    let b0 = mix(index.wrapping_mul(3).wrapping_add(1));
    let b1 = mix(index.wrapping_mul(3).wrapping_add(2));
    let b2 = mix(index.wrapping_mul(3).wrapping_add(3));
    V3::new(unit(b0) * scale, unit(b1) * scale, unit(b2) * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_signs() {
        let o = V3::zeros();
        let e1 = V3::new(1.0, 0.0, 0.0);
        let e2 = V3::new(0.0, 1.0, 0.0);
        let e3 = V3::new(0.0, 0.0, 1.0);
        assert_eq!(orient3d(&o, &e1, &e2, &e3), Orient::Positive);
        assert_eq!(orient3d(&o, &e2, &e1, &e3), Orient::Negative);
        // Coplanar quadruple is exactly zero.
        let d = V3::new(0.3, -0.7, 0.0);
        assert_eq!(orient3d(&o, &e1, &e2, &d), Orient::Zero);
    }

    #[test]
    fn filter_falls_back_to_exact() {
        // A quadruple that is coplanar except for a perturbation far below
        // the floating-point filter threshold of the naive determinant.
        let a = V3::new(0.1, 0.1, 0.1);
        let b = V3::new(0.2, 0.3, 0.1);
        let c = V3::new(-0.4, 0.2, 0.1);
        let mut d = V3::new(0.7, -0.5, 0.1);
        assert_eq!(orient3d(&a, &b, &c, &d), Orient::Zero);
        d.z = 0.1 + f64::EPSILON * 0.1f64; // one ulp-scale offset above the plane
        let s = orient3d(&a, &b, &c, &d);
        // (b-a) x (c-a) has negative z-component? compute: u=(0.1,0.2,0), v=(-0.5,0.1,0),
        // u x v = (0,0,0.01+0.10) -> positive z, so lifting d should be Positive.
        assert_eq!(s, Orient::Positive);
    }

    #[test]
    fn segment_triangle_cases() {
        let a = V3::new(0.0, 0.0, 0.0);
        let b = V3::new(1.0, 0.0, 0.0);
        let c = V3::new(0.0, 1.0, 0.0);
        // Proper crossing through the interior.
        let p = V3::new(0.2, 0.2, -1.0);
        let q = V3::new(0.2, 0.2, 2.0);
        assert_eq!(segment_triangle(&p, &q, &a, &b, &c), SegTri::Crossing);
        // Same side: miss.
        let q2 = V3::new(0.2, 0.2, -0.5);
        assert_eq!(segment_triangle(&p, &q2, &a, &b, &c), SegTri::Miss);
        // Passing outside the triangle.
        let p3 = V3::new(2.0, 2.0, -1.0);
        let q3 = V3::new(2.0, 2.0, 1.0);
        assert_eq!(segment_triangle(&p3, &q3, &a, &b, &c), SegTri::Miss);
        // Endpoint exactly on the plane: degenerate.
        let p4 = V3::new(0.2, 0.2, 0.0);
        assert_eq!(segment_triangle(&p4, &q, &a, &b, &c), SegTri::Degenerate);
        // Crossing exactly through an edge: degenerate.
        let p5 = V3::new(0.5, 0.0, -1.0);
        let q5 = V3::new(0.5, 0.0, 1.0);
        assert_eq!(segment_triangle(&p5, &q5, &a, &b, &c), SegTri::Degenerate);
    }

    #[test]
    fn perturbation_is_deterministic_and_bounded() {
        let v1 = perturbation_offset(42, 1e-10);
        let v2 = perturbation_offset(42, 1e-10);
        assert_eq!(v1, v2);
        assert!(v1.norm() <= 2e-10);
        assert_ne!(perturbation_offset(43, 1e-10), v1);
    }
}
