//! The model flow on the solid cylinder and its time-1 map.
//!
//! The flow lives on C = {x ∈ ℝⁿ : x₂² + ⋯ + x_n² ≤ 4} and is a unit
//! translation in x₁ outside the ball ‖x‖² ≤ 4, perturbed inside it so
//! that exactly two equilibria appear on the axis at x₁ = ±1. The time-1
//! map therefore coincides with the unit translation `g` outside the
//! ball, which is what lets it be grafted into tube charts elsewhere.

use nalgebra::SVector;

use crate::{Error, Result};

/// Squared norm boundary of the linear-contraction region.
pub const INNER_SQ: f64 = 2.0;
/// Squared norm boundary of the perturbed region; the field is the unit
/// translation outside this ball.
pub const OUTER_SQ: f64 = 4.0;
/// Radius of the solid cylinder C in the transverse coordinates.
pub const CYLINDER_RADIUS: f64 = 2.0;
/// Slack admitted on the transverse constraint when testing membership.
pub const CYLINDER_SLACK: f64 = 1e-9;
/// Default fixed integrator step.
pub const DEFAULT_DT: f64 = 1e-2;

/// Parameters of the model flow. The region boundaries are structural
/// constants of the construction, so only the dimension varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowParams {
    pub dim: usize,
}

impl FlowParams {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::ConstructionFailed(format!(
                "flow dimension must be at least 3, got {dim}"
            )));
        }
        Ok(FlowParams { dim })
    }
}

fn check_cylinder<const N: usize>(x: &SVector<f64, N>) -> Result<()> {
    let transverse_sq: f64 = x.iter().skip(1).map(|&v| v * v).sum();
    if transverse_sq > CYLINDER_RADIUS * CYLINDER_RADIUS + CYLINDER_SLACK {
        return Err(Error::OutsideCylinder(format!(
            "transverse squared norm {transverse_sq} exceeds {}",
            CYLINDER_RADIUS * CYLINDER_RADIUS
        )));
    }
    Ok(())
}

/// Right-hand side of the model system.
///
/// With r² = ‖x‖², the axial component is 1 − (r²−4)²/9 for r² ≤ 4 and 1
/// beyond; the transverse components are −x_i for r² ≤ 2, smoothly
/// interpolated by (x_i/2)(sin(π(r²−3)/2) − 1) up to r² = 4, and 0
/// beyond. Both seams match in value and first derivative.
pub fn vector_field<const N: usize>(x: &SVector<f64, N>) -> Result<SVector<f64, N>> {
    check_cylinder(x)?;
    let r2 = x.norm_squared();
    let mut v = SVector::<f64, N>::zeros();
    v[0] = if r2 <= OUTER_SQ {
        1.0 - (r2 - 4.0) * (r2 - 4.0) / 9.0
    } else {
        1.0
    };
    if r2 <= INNER_SQ {
        for i in 1..N {
            v[i] = -x[i];
        }
    } else if r2 <= OUTER_SQ {
        let damp = ((std::f64::consts::FRAC_PI_2) * (r2 - 3.0)).sin() - 1.0;
        for i in 1..N {
            v[i] = x[i] / 2.0 * damp;
        }
    }
    Ok(v)
}

fn rk4_step<const N: usize>(x: &SVector<f64, N>, dt: f64) -> Result<SVector<f64, N>> {
    let k1 = vector_field(x)?;
    let k2 = vector_field(&(x + k1 * (dt / 2.0)))?;
    let k3 = vector_field(&(x + k2 * (dt / 2.0)))?;
    let k4 = vector_field(&(x + k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Fixed subdivision applied to a step that touches a regularity seam.
const SEAM_REFINE: usize = 1000;
/// Pad in squared norm around a seam; wide enough to cover how far the
/// Runge stages can overshoot the step's endpoints.
const SEAM_PAD: f64 = 0.05;

/// The field is C¹ but not C² on the spheres r² = 2 and r² = 4. A step
/// whose squared-norm span touches either seam is refined, because a
/// fourth-order step across a curvature jump leaves an O(dt³) residue
/// whose phase dependence contaminates stable-set computations.
fn touches_seam<const N: usize>(a: &SVector<f64, N>, b: &SVector<f64, N>) -> bool {
    let (ra, rb) = (a.norm_squared(), b.norm_squared());
    let lo = ra.min(rb) - SEAM_PAD;
    let hi = ra.max(rb) + SEAM_PAD;
    (lo <= INNER_SQ && INNER_SQ <= hi) || (lo <= OUTER_SQ && OUTER_SQ <= hi)
}

/// One integrator step of signed size `dt`: a plain fourth-order step
/// away from the seams, subdivided into `SEAM_REFINE` equal micro-steps
/// when the step touches one. The rule is a deterministic function of
/// the step, so trajectories remain bit-reproducible.
fn refined_step<const N: usize>(x: &SVector<f64, N>, dt: f64) -> Result<SVector<f64, N>> {
    let trial = rk4_step(x, dt)?;
    if !touches_seam(x, &trial) {
        return Ok(trial);
    }
    let micro = dt / SEAM_REFINE as f64;
    let mut y = *x;
    for _ in 0..SEAM_REFINE {
        y = rk4_step(&y, micro)?;
    }
    Ok(y)
}

/// Integrate the model field for a (possibly negative) duration `t` with
/// fixed steps of magnitude `dt`; the final partial step is shortened to
/// land exactly on `t`.
pub fn integrate<const N: usize>(
    x: &SVector<f64, N>,
    t: f64,
    dt: f64,
) -> Result<SVector<f64, N>> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::ConstructionFailed(format!(
            "integrator step must be positive, got {dt}"
        )));
    }
    let step = dt.copysign(t);
    let full = (t / step).floor() as u64;
    let mut y = *x;
    for _ in 0..full {
        y = refined_step(&y, step)?;
    }
    let rem = t - full as f64 * step;
    if rem.abs() > 1e-15 {
        y = refined_step(&y, rem)?;
    }
    Ok(y)
}

/// True when the forward unit-time trajectory of `x` provably stays in
/// the translation region, so the time-1 map equals `g` exactly.
fn translation_safe<const N: usize>(x: &SVector<f64, N>) -> bool {
    // Moving right from x₁ ≥ 2 keeps ‖x‖² ≥ x₁² ≥ 4; starting at
    // x₁ ≤ −3 the whole unit of travel keeps x₁ ≤ −2.
    x[0] >= 2.0 || x[0] <= -3.0
}

/// The time-1 map φ of the model flow.
pub fn time_one_map<const N: usize>(x: &SVector<f64, N>) -> Result<SVector<f64, N>> {
    check_cylinder(x)?;
    if translation_safe(x) {
        return Ok(translation_map(x));
    }
    integrate(x, 1.0, DEFAULT_DT)
}

/// True when the backward unit-time trajectory of `x` provably stays in
/// the translation region, so the inverse time-1 map equals `g⁻¹` exactly.
fn translation_safe_back<const N: usize>(x: &SVector<f64, N>) -> bool {
    // Moving left from x₁ ≥ 3 keeps x₁ ≥ 2; starting at x₁ ≤ −2 the
    // whole unit of backward travel keeps ‖x‖² ≥ x₁² ≥ 4.
    x[0] >= 3.0 || x[0] <= -2.0
}

/// The inverse φ⁻¹ of the time-1 map (integration over t = −1).
pub fn time_one_map_inv<const N: usize>(x: &SVector<f64, N>) -> Result<SVector<f64, N>> {
    check_cylinder(x)?;
    if translation_safe_back(x) {
        let mut y = *x;
        y[0] -= 1.0;
        return Ok(y);
    }
    integrate(x, -1.0, DEFAULT_DT)
}

/// The unit translation g(x) = x + e₁.
pub fn translation_map<const N: usize>(x: &SVector<f64, N>) -> SVector<f64, N> {
    let mut y = *x;
    y[0] += 1.0;
    y
}

/// Axial restriction of the field: ẋ₁ = 1 − (x₁²−4)²/9 on |x₁| ≤ 2.
pub fn axis_field(x1: f64) -> f64 {
    if x1 * x1 <= OUTER_SQ {
        1.0 - (x1 * x1 - 4.0) * (x1 * x1 - 4.0) / 9.0
    } else {
        1.0
    }
}

/// Locate every equilibrium of the axis restriction inside [−2, 2] by a
/// sign-change scan refined with bisection.
pub fn axis_equilibria() -> Vec<f64> {
    let n = 4000;
    let mut roots: Vec<f64> = Vec::new();
    let grid = |i: usize| -2.0 + 4.0 * (i as f64) / (n as f64);
    for i in 0..n {
        let (mut lo, mut hi) = (grid(i), grid(i + 1));
        let (flo, fhi) = (axis_field(lo), axis_field(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo * fhi >= 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = axis_field(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if flo * fm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if axis_field(2.0) == 0.0 {
        roots.push(2.0);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::V3;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_examples() {
        // Hand evaluation of the r² ≤ 4 branch at the origin: the axial
        // component is 1 − (0−4)²/9 = −7/9 and the transverse branch
        // contributes −0.
        let oracle = 1.0 - (0.0 - 4.0f64).powi(2) / 9.0;
        let at_origin = vector_field(&V3::zeros()).unwrap();
        assert_eq!(at_origin, V3::new(oracle, 0.0, 0.0));
        // −7/9 up to one rounding of the subtraction above.
        assert_relative_eq!(at_origin.x, -7.0 / 9.0, epsilon = 1e-15);

        // Pure translation outside the ball.
        assert_eq!(
            vector_field(&V3::new(3.0, 0.0, 0.0)).unwrap(),
            V3::new(1.0, 0.0, 0.0)
        );

        // The two equilibria annihilate every branch exactly.
        assert_eq!(vector_field(&V3::new(1.0, 0.0, 0.0)).unwrap(), V3::zeros());
        assert_eq!(vector_field(&V3::new(-1.0, 0.0, 0.0)).unwrap(), V3::zeros());
    }

    #[test]
    fn field_rejects_points_outside_cylinder() {
        assert!(matches!(
            vector_field(&V3::new(0.0, 2.5, 0.0)),
            Err(Error::OutsideCylinder(_))
        ));
    }

    #[test]
    fn field_is_continuous_across_seams() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EA1);
        for &r2 in &[INNER_SQ, OUTER_SQ] {
            let r = r2.sqrt();
            for _ in 0..1000 {
                // Random direction with transverse part inside the cylinder.
                let dir = loop {
                    let v = V3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    );
                    let n = v.norm();
                    if n > 1e-3 {
                        let u = v / n;
                        if (u.y * u.y + u.z * u.z) * r2 <= 4.0 {
                            break u;
                        }
                    }
                };
                let eps = 1e-9;
                let inside = vector_field(&(dir * (r - eps))).unwrap();
                let outside = vector_field(&(dir * (r + eps))).unwrap();
                assert!(
                    (inside - outside).norm() < 1e-6,
                    "seam jump at r² = {r2}: {:?} vs {:?}",
                    inside,
                    outside
                );
            }
        }
    }

    #[test]
    fn field_derivative_matches_across_seams() {
        // Finite-difference directional derivative along the radius, a
        // little inside and a little outside each seam.
        // The transverse part of the field is C¹ but not C² at the seams,
        // so the one-sided difference estimates carry an O(h·f″) bias;
        // h = 1e−6 keeps that bias an order of magnitude under the gate.
        let mut rng = ChaCha8Rng::seed_from_u64(0xD1FF);
        let h = 1e-6;
        for &r2 in &[INNER_SQ, OUTER_SQ] {
            let r = r2.sqrt();
            for _ in 0..1000 {
                let dir = loop {
                    let v = V3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    );
                    let n = v.norm();
                    if n > 1e-3 {
                        let u = v / n;
                        if (u.y * u.y + u.z * u.z) * (r + 1.0) * (r + 1.0) <= 4.0 {
                            break u;
                        }
                    }
                };
                let d_in = (vector_field(&(dir * (r - h))).unwrap()
                    - vector_field(&(dir * (r - 3.0 * h))).unwrap())
                    / (2.0 * h);
                let d_out = (vector_field(&(dir * (r + 3.0 * h))).unwrap()
                    - vector_field(&(dir * (r + h))).unwrap())
                    / (2.0 * h);
                assert!(
                    (d_in - d_out).norm() < 1e-4,
                    "derivative jump at r² = {r2}: {:?} vs {:?}",
                    d_in,
                    d_out
                );
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let sink = V3::new(-1.0, 0.0, 0.0);
        assert!((integrate(&sink, 7.0, DEFAULT_DT).unwrap() - sink).norm() < 1e-12);

        let far = V3::new(10.0, 0.0, 0.0);
        assert!(
            (integrate(&far, 1.0, DEFAULT_DT).unwrap() - V3::new(11.0, 0.0, 0.0)).norm() < 1e-12
        );

        // Step-halving convergence oracle.
        let x = V3::new(0.0, 0.1, 0.0);
        let coarse = integrate(&x, 1.0, DEFAULT_DT).unwrap();
        let fine = integrate(&x, 1.0, DEFAULT_DT / 2.0).unwrap();
        assert!((coarse - fine).norm() < 1e-8);
    }

    #[test]
    fn integrate_shortens_last_step() {
        // Duration that is not a multiple of dt: compare against a run
        // whose dt divides the duration exactly.
        let x = V3::new(0.3, 0.4, -0.2);
        let a = integrate(&x, 0.905, 1e-2).unwrap();
        let b = integrate(&x, 0.905, 0.905 / 100.0).unwrap();
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn integrate_is_reversible() {
        let x = V3::new(0.2, -0.7, 0.4);
        let fwd = integrate(&x, 1.0, DEFAULT_DT).unwrap();
        let back = integrate(&fwd, -1.0, DEFAULT_DT).unwrap();
        assert!((back - x).norm() < 1e-9);
    }

    #[test]
    fn time_one_inverse_undoes_time_one() {
        for x in [
            V3::new(0.2, -0.7, 0.4),
            V3::new(-1.4, 0.3, 0.1),
            V3::new(1.6, 0.9, -0.5),
        ] {
            let fwd = time_one_map(&x).unwrap();
            let back = time_one_map_inv(&fwd).unwrap();
            assert!((back - x).norm() < 1e-9, "roundtrip failed at {x:?}");
        }
        // Backward translation shortcut on the wall.
        let w = V3::new(6.0, 2.0, 0.0);
        assert_eq!(time_one_map_inv(&w).unwrap(), V3::new(5.0, 2.0, 0.0));
    }

    #[test]
    fn time_one_fixed_points_and_wall() {
        let p = V3::new(1.0, 0.0, 0.0);
        let q = V3::new(-1.0, 0.0, 0.0);
        assert!((time_one_map(&p).unwrap() - p).norm() < 1e-12);
        assert!((time_one_map(&q).unwrap() - q).norm() < 1e-12);

        // On the cylinder wall in the translation region.
        let w = V3::new(5.0, 2.0, 0.0);
        assert_eq!(time_one_map(&w).unwrap(), V3::new(6.0, 2.0, 0.0));
    }

    #[test]
    fn translation_examples() {
        assert_eq!(translation_map(&V3::zeros()), V3::new(1.0, 0.0, 0.0));
        let x = V3::new(0.3, -0.2, 1.0);
        assert_eq!(
            translation_map(&translation_map(&x)),
            x + V3::new(2.0, 0.0, 0.0)
        );
    }

    #[test]
    fn time_one_agrees_with_translation_outside_ball() {
        // Points with ‖x‖² > 4 whose forward trajectory stays there.
        for x in [
            V3::new(3.0, 1.5, 0.0),
            V3::new(2.0, 0.1, 0.3),
            V3::new(-4.5, 1.0, 0.5),
            V3::new(1.5, 1.9, 0.0),
        ] {
            let via_flow = integrate(&x, 1.0, DEFAULT_DT).unwrap();
            assert!(
                (via_flow - translation_map(&x)).norm() < 1e-10,
                "disagreement at {x:?}"
            );
            assert!((time_one_map(&x).unwrap() - translation_map(&x)).norm() < 1e-10);
        }
    }

    #[test]
    fn axis_has_exactly_two_equilibria() {
        let roots = axis_equilibria();
        assert_eq!(roots.len(), 2, "roots: {roots:?}");
        assert!((roots[0] + 1.0).abs() < 1e-10);
        assert!((roots[1] - 1.0).abs() < 1e-10);
        for r in roots {
            assert!(axis_field(r).abs() < 1e-10);
        }
    }

    #[test]
    fn time_one_multipliers_match_linearization() {
        // The field linearization on the axis is diag(−(4/9)x₁(x₁²−4),
        // −1, −1) at both equilibria, so the time-1 multipliers must be
        // the exponentials of those rates.
        let h = 1e-5;
        for (x1, axial_rate) in [(1.0f64, 4.0f64 / 3.0), (-1.0, -4.0 / 3.0)] {
            let p = V3::new(x1, 0.0, 0.0);
            let mut jac = [[0.0f64; 3]; 3];
            for j in 0..3 {
                let mut dp = V3::zeros();
                dp[j] = h;
                let plus = time_one_map(&(p + dp)).unwrap();
                let minus = time_one_map(&(p - dp)).unwrap();
                for i in 0..3 {
                    jac[i][j] = (plus[i] - minus[i]) / (2.0 * h);
                }
            }
            // Off-diagonal entries vanish by symmetry; the diagonal is
            // the multiplier spectrum.
            assert_relative_eq!(jac[0][0], axial_rate.exp(), epsilon = 1e-4);
            assert_relative_eq!(jac[1][1], (-1.0f64).exp(), epsilon = 1e-4);
            assert_relative_eq!(jac[2][2], (-1.0f64).exp(), epsilon = 1e-4);
            for (i, row) in jac.iter().enumerate() {
                for (j, entry) in row.iter().enumerate() {
                    if i != j {
                        assert!(entry.abs() < 1e-6);
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn flow_preserves_axis_planes(x1 in -1.5f64..1.5, s in -1.9f64..1.9, t in 0.1f64..2.0) {
            // Planes through the axis are invariant: a point with one
            // transverse coordinate stays there.
            let x = V3::new(x1, s, 0.0);
            let y = integrate(&x, t, DEFAULT_DT).unwrap();
            prop_assert!(y.z.abs() < 1e-14);
        }

        #[test]
        fn transverse_norm_never_grows(x1 in -3.0f64..3.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let x = V3::new(x1, a, b);
            let y = integrate(&x, 1.0, DEFAULT_DT).unwrap();
            let before = (a * a + b * b).sqrt();
            let after = (y.y * y.y + y.z * y.z).sqrt();
            prop_assert!(after <= before + 1e-12);
        }
    }
}
