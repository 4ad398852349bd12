//! The nine subcommands. Each resolves its knobs (flag → config section →
//! default), runs the corresponding library pipeline, writes artifacts
//! through the deterministic exporters, prints a one-line summary per
//! certification gate, and returns a [`Failure`] when a gate does not
//! pass.

use std::collections::BTreeMap;

use nalgebra::SVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wildarc_core::analysis::{
    classify_fixed_point, heteroclinic_test, trace_separatrix, FixedPointKind, FixedPointReport,
    HeteroclinicReport, BASIN_CAPTURE_TOL, DEFAULT_BASIN_ITERS, DEFAULT_HETEROCLINIC_STEPS,
    DEFAULT_HETEROCLINIC_TOL, DEFAULT_SEED_DIST, DEFAULT_TRACE_STEPS,
};
use wildarc_core::arc::{
    assemble_wild_arc, build_generator, mazur_knot, spanning_strip, verify_generator,
    ArcCertificate, DEFAULT_LEVELS, DEFAULT_SAMPLES, DEFAULT_THETA0,
};
use wildarc_core::export::{self, format_float};
use wildarc_core::flow;
use wildarc_core::geometry::Pole;
use wildarc_core::sphere::{
    chart_map, pixton_map, sphere_census, sphere_map_apply, ChartPoint, FIXED_POINT_RESIDUAL_MAX,
};
use wildarc_core::surgery::{
    build_surgery, Piece, SurgeredMap, SurgeryVariant, TaggedPoint, ALIGNMENT_TOL,
    EQUIVARIANCE_TOL,
};
use wildarc_core::V4;

use crate::args::{
    BuildArcArgs, ExportArgs, FixedPointsArgs, FlowFieldArgs, OrbitArgs, PixtonArgs,
    SeparatrixArgs, SharedArgs, SurgeryArgs, VerifyArcArgs,
};
use crate::config::{bad, cert_fail, ensure, Failure, Settings};

/// Densities the stability verifier sweeps; the crossing counts are
/// discrete invariants, so they must agree across all three.
const VERIFY_DENSITIES: [usize; 3] = [32, 64, 128];

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn report_value<const N: usize>(r: &FixedPointReport<N>) -> serde_json::Value {
    serde_json::json!({
        "location": r.location.iter().copied().collect::<Vec<f64>>(),
        "residual": r.residual,
        "multipliers": r.multipliers,
        "kind": r.kind.as_str(),
    })
}

fn coarse_kind(kind: &FixedPointKind) -> &'static str {
    match kind {
        FixedPointKind::Sink => "SINK",
        FixedPointKind::Source => "SOURCE",
        FixedPointKind::Saddle { .. } => "SADDLE",
        FixedPointKind::Nonhyperbolic => "NONHYPERBOLIC",
    }
}

/// Uniform point of the ball of the given radius (rejection sampling;
/// directions shorter than 1e-6 are rejected so normalization is safe).
fn ball_point<const N: usize>(rng: &mut ChaCha8Rng, radius: f64) -> SVector<f64, N> {
    loop {
        let v = SVector::<f64, N>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n <= 1.0 && n > 1e-6 {
            return v * radius;
        }
    }
}

// ---------------------------------------------------------------------------
// build-arc / verify-arc
// ---------------------------------------------------------------------------

fn certificate_summary(cert: &ArcCertificate) -> String {
    format!(
        "crossings {}/{}, clearance ratio {:.3}, max junction defect {:.1e} deg",
        cert.disk.crossings_a,
        cert.disk.crossings_c,
        cert.embedding.min_clearance_ratio,
        cert.junctions.max_defect_deg
    )
}

pub fn build_arc(shared: &SharedArgs, args: &BuildArcArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "build-arc")?;
    let samples = s.usize_knob("samples", args.samples, DEFAULT_SAMPLES)?;
    ensure((16..=4096).contains(&samples), "samples must be in 16..=4096")?;
    let levels = s.u32_knob("levels", shared.levels, DEFAULT_LEVELS)?;
    ensure(levels <= 16, "levels must be at most 16")?;
    let theta0 = s.f64_knob("theta0", args.theta0, DEFAULT_THETA0)?;
    ensure(theta0 > 0.0 && theta0 < 1.0, "theta0 must lie in (0, 1)")?;
    let control = s.opt_str_knob("negative-control", args.negative_control.as_deref())?;
    s.finish_knobs()?;

    let base = build_generator(samples)?;
    let gen = match control.as_deref() {
        None => base,
        Some("chord") => base.with_chord_b(),
        Some("flat") => base.with_flat_b(),
        Some(other) => {
            return Err(bad(format!(
                "negative-control must be 'chord' or 'flat', got '{other}'"
            )))
        }
    };
    let cert = verify_generator(&gen, theta0)?;
    let wild = assemble_wild_arc(&gen, levels);
    let echo = s.echo();
    export::write_polyline_csv(&s.artifact("arc.csv"), &echo, &wild.vertices)?;
    let strip = spanning_strip(&gen.b)?;
    export::write_obj(
        &s.artifact("delta.obj"),
        &echo,
        &export::weld_triangles(&strip.triangles),
    )?;
    let report = serde_json::json!({
        "certificate": serde_json::to_value(&cert).expect("certificate serializes"),
        "ok": cert.ok,
    });
    export::write_json(&s.artifact("conditions.json"), &echo, report)?;

    println!(
        "arc conditions: {} ({})",
        pass_str(cert.ok),
        certificate_summary(&cert)
    );
    println!("wrote arc.csv, delta.obj, conditions.json to {}", s.out.display());
    if cert.ok {
        Ok(())
    } else {
        Err(cert_fail("arc conditions failed; see conditions.json"))
    }
}

pub fn verify_arc(shared: &SharedArgs, args: &VerifyArcArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "verify-arc")?;
    let theta0 = s.f64_knob("theta0", args.theta0, DEFAULT_THETA0)?;
    ensure(theta0 > 0.0 && theta0 < 1.0, "theta0 must lie in (0, 1)")?;
    s.finish_knobs()?;

    let mut blocks = Vec::new();
    let mut all_ok = true;
    let mut counts = Vec::new();
    for density in VERIFY_DENSITIES {
        let gen = build_generator(density)?;
        let cert = verify_generator(&gen, theta0)?;
        all_ok &= cert.ok;
        counts.push((cert.disk.crossings_a, cert.disk.crossings_c));
        println!(
            "density {density}: {} ({})",
            pass_str(cert.ok),
            certificate_summary(&cert)
        );
        blocks.push(serde_json::json!({
            "samples": density,
            "certificate": serde_json::to_value(&cert).expect("certificate serializes"),
        }));
    }
    let counts_stable = counts.iter().all(|c| *c == (1, 1));
    let ok = all_ok && counts_stable;
    let report = serde_json::json!({
        "densities": blocks,
        "counts_stable": counts_stable,
        "ok": ok,
    });
    export::write_json(&s.artifact("verify.json"), &s.echo(), report)?;
    println!(
        "crossing counts stable across densities: {}",
        pass_str(counts_stable)
    );
    if ok {
        Ok(())
    } else {
        Err(cert_fail("arc verification failed; see verify.json"))
    }
}

// ---------------------------------------------------------------------------
// flow-field / fixed-points / orbit / separatrix
// ---------------------------------------------------------------------------

fn resolve_dim(s: &mut Settings, cli: Option<usize>) -> Result<usize, Failure> {
    let dim = s.usize_knob("dim", cli, 3)?;
    ensure(dim == 3 || dim == 4, "dim must be 3 or 4")?;
    Ok(dim)
}

fn field_rows<const N: usize>(grid: usize, extent: f64) -> Vec<Vec<String>> {
    let coord = |d: usize| -extent + 2.0 * extent * d as f64 / (grid - 1) as f64;
    let total = grid.pow(N as u32);
    let mut rows = Vec::new();
    for flat in 0..total {
        let mut digits = flat;
        let x = SVector::<f64, N>::from_fn(|_, _| {
            let d = digits % grid;
            digits /= grid;
            coord(d)
        });
        // Points outside the solid cylinder are not in the field's domain.
        let Ok(v) = flow::vector_field(&x) else {
            continue;
        };
        let mut row: Vec<String> = x.iter().copied().map(format_float).collect();
        row.extend(v.iter().copied().map(format_float));
        rows.push(row);
    }
    rows
}

pub fn flow_field(shared: &SharedArgs, args: &FlowFieldArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "flow-field")?;
    let dim = resolve_dim(&mut s, shared.dim)?;
    let grid = s.usize_knob("grid", args.grid, 7)?;
    ensure((2..=40).contains(&grid), "grid must be in 2..=40")?;
    ensure(
        grid.pow(dim as u32) <= 2_000_000,
        "grid^dim must be at most 2e6",
    )?;
    let extent = s.f64_knob("extent", args.extent, 2.5)?;
    ensure(extent > 0.0 && extent.is_finite(), "extent must be positive")?;
    s.finish_knobs()?;

    let rows = match dim {
        3 => field_rows::<3>(grid, extent),
        _ => field_rows::<4>(grid, extent),
    };
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend((1..=dim).map(|i| format!("v{i}")));
    export::write_csv(&s.artifact("flow_field.csv"), &s.echo(), &header, &rows)?;
    println!(
        "sampled {} in-cylinder grid points; wrote flow_field.csv to {}",
        rows.len(),
        s.out.display()
    );
    Ok(())
}

fn equilibrium_entries<const N: usize>() -> Result<(Vec<serde_json::Value>, bool), Failure> {
    let mut entries = Vec::new();
    let (mut sink_ok, mut saddle_ok) = (false, false);
    for e in flow::axis_equilibria() {
        let x = SVector::<f64, N>::from_fn(|i, _| if i == 0 { e } else { 0.0 });
        let field_residual = flow::vector_field(&x)?.norm();
        let report = classify_fixed_point(flow::time_one_map, &x).map_err(|err| {
            cert_fail(format!("equilibrium at x1 = {e} failed classification: {err}"))
        })?;
        if e < 0.0 && report.kind == FixedPointKind::Sink {
            sink_ok = true;
        }
        if e > 0.0 && report.kind == (FixedPointKind::Saddle { unstable: 1 }) {
            saddle_ok = true;
        }
        let mut v = report_value(&report);
        // Conventional names: P at x1 = +1, Q at x1 = -1.
        v["label"] = serde_json::json!(if e > 0.0 { "P" } else { "Q" });
        v["field_residual"] = serde_json::json!(field_residual);
        entries.push(v);
    }
    Ok((entries, sink_ok && saddle_ok))
}

pub fn fixed_points(shared: &SharedArgs, _args: &FixedPointsArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "fixed-points")?;
    let dim = resolve_dim(&mut s, shared.dim)?;
    s.finish_knobs()?;

    let (entries, ok) = match dim {
        3 => equilibrium_entries::<3>()?,
        _ => equilibrium_entries::<4>()?,
    };
    let report = serde_json::json!({ "equilibria": entries, "ok": ok });
    export::write_json(&s.artifact("fixed_points.json"), &s.echo(), report)?;
    println!(
        "axis equilibria: {} (sink at x1 = -1, one-direction saddle at x1 = +1)",
        pass_str(ok)
    );
    if ok {
        Ok(())
    } else {
        Err(cert_fail(
            "equilibrium classification mismatch; see fixed_points.json",
        ))
    }
}

fn parse_x0<const N: usize>(text: &str) -> Result<SVector<f64, N>, Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    ensure(
        parts.len() == N,
        format!("x0 needs {N} comma-separated coordinates, got {}", parts.len()),
    )?;
    let mut out = SVector::<f64, N>::zeros();
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .parse::<f64>()
            .map_err(|_| bad(format!("x0 component '{part}' is not a number")))?;
    }
    Ok(out)
}

/// Random start inside the solid cylinder: axial coordinate in ±3,
/// transverse part in the ball of radius 1.8.
fn random_cylinder_point<const N: usize>(rng: &mut ChaCha8Rng) -> SVector<f64, N> {
    let axial = rng.gen_range(-3.0..3.0);
    let transverse = loop {
        let v = SVector::<f64, N>::from_fn(|i, _| {
            if i == 0 {
                0.0
            } else {
                rng.gen_range(-1.8..1.8)
            }
        });
        if v.norm() <= 1.8 {
            break v;
        }
    };
    let mut x = transverse;
    x[0] = axial;
    x
}

fn orbit_run<const N: usize>(
    s: &Settings,
    x0_text: Option<&str>,
    duration: f64,
    dt: f64,
) -> Result<usize, Failure> {
    let mut x = match x0_text {
        Some(text) => parse_x0::<N>(text)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            random_cylinder_point::<N>(&mut rng)
        }
    };
    let full = (duration / dt).floor() as usize;
    let rem = duration - full as f64 * dt;
    let mut times = Vec::with_capacity(full + 2);
    let mut states = Vec::with_capacity(full + 2);
    times.push(0.0);
    states.push(x);
    let stray = |k: usize, e| cert_fail(format!("trajectory left the cylinder at step {k}: {e}"));
    for k in 1..=full {
        x = flow::integrate(&x, dt, dt).map_err(|e| stray(k, e))?;
        times.push(k as f64 * dt);
        states.push(x);
    }
    if rem > 1e-12 {
        x = flow::integrate(&x, rem, dt).map_err(|e| stray(full + 1, e))?;
        times.push(duration);
        states.push(x);
    }
    export::write_orbit_csv(&s.artifact("orbit.csv"), &s.echo(), &times, &states)?;
    Ok(states.len())
}

pub fn orbit(shared: &SharedArgs, args: &OrbitArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "orbit")?;
    let dim = resolve_dim(&mut s, shared.dim)?;
    let dt = s.f64_knob("dt", shared.dt, flow::DEFAULT_DT)?;
    ensure(dt > 0.0 && dt <= 0.5, "dt must lie in (0, 0.5]")?;
    let duration = s.f64_knob("duration", args.duration, 10.0)?;
    ensure(
        duration > 0.0 && duration / dt <= 1e6,
        "duration must be positive with at most 1e6 steps",
    )?;
    let x0 = s.opt_str_knob("x0", args.x0.as_deref())?;
    s.finish_knobs()?;

    let rows = match dim {
        3 => orbit_run::<3>(&s, x0.as_deref(), duration, dt)?,
        _ => orbit_run::<4>(&s, x0.as_deref(), duration, dt)?,
    };
    println!(
        "integrated {rows} samples over t = {duration}; wrote orbit.csv to {}",
        s.out.display()
    );
    Ok(())
}

fn separatrix_run<const N: usize>(
    s: &Settings,
    direction: &str,
    side: f64,
    steps: usize,
    seed_dist: f64,
) -> Result<(usize, SVector<f64, N>), Failure> {
    let saddle_x = SVector::<f64, N>::from_fn(|i, _| if i == 0 { 1.0 } else { 0.0 });
    let report = classify_fixed_point(flow::time_one_map, &saddle_x)
        .map_err(|e| cert_fail(format!("saddle classification failed: {e}")))?;
    let poly = match direction {
        "unstable" => trace_separatrix(flow::time_one_map, &report, side, steps, seed_dist),
        _ => trace_separatrix(flow::time_one_map_inv, &report, side, steps, seed_dist),
    }
    .map_err(|e| cert_fail(format!("separatrix trace failed: {e}")))?;
    export::write_polyline_csv(&s.artifact("separatrix.csv"), &s.echo(), &poly)?;
    let last = *poly.last().expect("trace has at least the seed");
    Ok((poly.len(), last))
}

pub fn separatrix(shared: &SharedArgs, args: &SeparatrixArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "separatrix")?;
    let dim = resolve_dim(&mut s, shared.dim)?;
    let direction = s.str_knob("direction", args.direction.as_deref(), "unstable")?;
    ensure(
        direction == "unstable" || direction == "stable",
        "direction must be 'unstable' or 'stable'",
    )?;
    let side = s.str_knob("side", args.side.as_deref(), "plus")?;
    let side_sign = match side.as_str() {
        "plus" => 1.0,
        "minus" => -1.0,
        _ => return Err(bad("side must be 'plus' or 'minus'")),
    };
    let steps = s.usize_knob("steps", args.steps, DEFAULT_TRACE_STEPS)?;
    ensure((1..=10_000).contains(&steps), "steps must be in 1..=10000")?;
    let seed_dist = s.f64_knob("seed-dist", args.seed_dist, DEFAULT_SEED_DIST)?;
    ensure(
        seed_dist > 0.0 && seed_dist < 1.0,
        "seed-dist must lie in (0, 1)",
    )?;
    s.finish_knobs()?;

    let (rows, last) = match dim {
        3 => {
            let (n, p) = separatrix_run::<3>(&s, &direction, side_sign, steps, seed_dist)?;
            (n, p.iter().map(|c| format!("{c:.6}")).collect::<Vec<_>>())
        }
        _ => {
            let (n, p) = separatrix_run::<4>(&s, &direction, side_sign, steps, seed_dist)?;
            (n, p.iter().map(|c| format!("{c:.6}")).collect::<Vec<_>>())
        }
    };
    println!(
        "traced {rows} points ({direction}, {side} side), ending at ({}); wrote separatrix.csv to {}",
        last.join(", "),
        s.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// pixton
// ---------------------------------------------------------------------------

/// Expected spectral types of the suspended map's census, in census order.
fn sphere_census_ok(kinds: &[&FixedPointKind], residuals: &[f64]) -> bool {
    kinds.len() == 4
        && *kinds[0] == FixedPointKind::Sink
        && *kinds[1] == FixedPointKind::Sink
        && *kinds[2] == (FixedPointKind::Saddle { unstable: 1 })
        && *kinds[3] == FixedPointKind::Source
        && residuals.iter().all(|r| *r < FIXED_POINT_RESIDUAL_MAX)
}

pub fn pixton(shared: &SharedArgs, args: &PixtonArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "pixton")?;
    let with_orbit = s.flag_knob("orbit", args.orbit)?;
    let with_tube = s.flag_knob("export-tube", args.export_tube)?;
    let basin_samples = s.usize_knob("basin-samples", args.basin_samples, 200)?;
    ensure(
        (1..=100_000).contains(&basin_samples),
        "basin-samples must be in 1..=100000",
    )?;
    let sides = s.usize_knob("sides", args.sides, 12)?;
    ensure((3..=64).contains(&sides), "sides must be in 3..=64")?;
    s.finish_knobs()?;
    let echo = s.echo();

    let spec = pixton_map()?;
    let census = sphere_census(&spec)?;
    let kinds: Vec<&FixedPointKind> = census.iter().map(|(_, r)| &r.kind).collect();
    let residuals: Vec<f64> = census.iter().map(|(_, r)| r.residual).collect();
    let ok = sphere_census_ok(&kinds, &residuals);

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut entries = Vec::new();
    for (name, report) in &census {
        *counts.entry(coarse_kind(&report.kind)).or_default() += 1;
        let chart = if *name == "north-pole" { "north" } else { "south" };
        let mut v = report_value(report);
        v["name"] = serde_json::json!(name);
        v["chart"] = serde_json::json!(chart);
        entries.push(v);
    }
    export::write_json(
        &s.artifact("pixton_census.json"),
        &echo,
        serde_json::json!({ "fixed_points": entries, "counts": counts, "ok": ok }),
    )?;
    let counts_line = counts
        .iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join(" ");
    println!("census: {} ({counts_line})", pass_str(ok));

    // Both branches of the saddle's one-dimensional unstable separatrix,
    // traced in the south chart.
    let south = chart_map(&spec, Pole::South);
    let sigma_report = &census[2].1;
    let mut rows = Vec::new();
    for branch in [1.0f64, -1.0] {
        let poly = trace_separatrix(&south, sigma_report, branch, DEFAULT_TRACE_STEPS, DEFAULT_SEED_DIST)
            .map_err(|e| cert_fail(format!("separatrix trace failed: {e}")))?;
        for p in poly {
            let mut row = vec![format!("{}", branch as i32)];
            row.extend(p.iter().copied().map(format_float));
            rows.push(row);
        }
    }
    export::write_csv(
        &s.artifact("separatrices.csv"),
        &echo,
        &["branch", "x1", "x2", "x3"],
        &rows,
    )?;

    // Basin census over random sphere points (south-chart ball of radius 4
    // covers all but a small polar cap).
    let sinks = [spec.fixed_points.omega, spec.fixed_points.south_pole];
    let basin = wildarc_core::analysis::basin_sample(
        |p: &ChartPoint<3>| Ok(sphere_map_apply(&spec, p)),
        |rng| ChartPoint::south(ball_point::<3>(rng, 4.0)),
        &sinks,
        |a, b| a.chordal_distance(b),
        basin_samples,
        DEFAULT_BASIN_ITERS,
        s.seed,
    );
    export::write_json(
        &s.artifact("basin.json"),
        &echo,
        serde_json::json!({
            "samples": basin.total,
            "max_iters": DEFAULT_BASIN_ITERS,
            "counts": { "omega": basin.sink_counts[0], "south-pole": basin.sink_counts[1],
                        "unresolved": basin.unresolved },
            "fractions": basin.fractions(),
        }),
    )?;
    println!(
        "basins: omega {} / south-pole {} / unresolved {} of {}",
        basin.sink_counts[0], basin.sink_counts[1], basin.unresolved, basin.total
    );

    if with_orbit {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let mut p = ChartPoint::south(ball_point::<3>(&mut rng, 4.0));
        let mut rows = Vec::new();
        for k in 0..=DEFAULT_BASIN_ITERS {
            let mut row = vec![format!("{k}"), p.chart.as_str().to_string()];
            row.extend(p.coords.iter().copied().map(format_float));
            rows.push(row);
            if sinks.iter().any(|q| p.chordal_distance(q) < BASIN_CAPTURE_TOL) {
                break;
            }
            p = sphere_map_apply(&spec, &p);
        }
        export::write_csv(
            &s.artifact("orbit.csv"),
            &echo,
            &["k", "chart", "y1", "y2", "y3"],
            &rows,
        )?;
        println!("orbit: {} iterates until capture", rows.len() - 1);
    }

    if with_tube {
        let vertices = &spec.arc.vertices;
        let theta0 = spec.chart.theta0();
        let radii: Vec<f64> = vertices.iter().map(|v| theta0 * v.norm()).collect();
        let mesh = export::tube_mesh(vertices, &radii, sides)?;
        export::write_obj(&s.artifact("tube.obj"), &echo, &mesh)?;
        println!(
            "tube mesh: {} vertices, {} faces",
            mesh.vertices.len(),
            mesh.faces.len()
        );
    }

    println!("wrote artifacts to {}", s.out.display());
    if ok {
        Ok(())
    } else {
        Err(cert_fail("sphere census mismatch; see pixton_census.json"))
    }
}

// ---------------------------------------------------------------------------
// surgery
// ---------------------------------------------------------------------------

fn run_witness(m: &SurgeredMap, x: &TaggedPoint) -> HeteroclinicReport {
    let fwd_target = m.sigma_forward_target();
    let bwd_target = m.sigma_backward_target();
    heteroclinic_test(
        |p: &TaggedPoint| m.apply(p),
        |p: &TaggedPoint| m.apply_inv(p),
        |p: &TaggedPoint| m.distance(p, &fwd_target),
        |p: &TaggedPoint| m.distance(p, &bwd_target),
        x,
        DEFAULT_HETEROCLINIC_STEPS,
        DEFAULT_HETEROCLINIC_STEPS,
        DEFAULT_HETEROCLINIC_TOL,
    )
}

fn witness_row(index: usize, role: &str, p: &TaggedPoint, rep: &HeteroclinicReport) -> Vec<String> {
    let mut row = vec![
        format!("{index}"),
        role.to_string(),
        p.piece.as_str().to_string(),
        p.point.chart.as_str().to_string(),
    ];
    row.extend(p.point.coords.iter().copied().map(format_float));
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    row.push(format_float(last(&rep.forward_distances)));
    row.push(format_float(last(&rep.backward_distances)));
    row.push(rep.pass.to_string());
    row
}

/// Random interior point of the right piece, away from the collar and the
/// deleted disk; generic orbits from here must fall into a sink.
fn control_point(m: &SurgeredMap, rng: &mut ChaCha8Rng) -> TaggedPoint {
    loop {
        let dir: V4 = ball_point(rng, 1.0);
        let radius = rng.gen_range(0.3..3.0);
        let p = TaggedPoint {
            piece: Piece::Right,
            point: ChartPoint::south(dir * (radius / dir.norm())),
        };
        if m.check_domain(&p).is_ok() {
            return p;
        }
    }
}

fn lands_in_sink(m: &SurgeredMap, sinks: &[TaggedPoint], start: &TaggedPoint) -> bool {
    let mut x = *start;
    for _ in 0..=30 {
        if sinks.iter().any(|sk| m.distance(&x, sk) < DEFAULT_HETEROCLINIC_TOL) {
            return true;
        }
        match m.apply(&x) {
            Ok(next) => x = next,
            Err(_) => return false,
        }
    }
    false
}

pub fn surgery(shared: &SharedArgs, args: &SurgeryArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "surgery")?;
    let variant_name = s.str_knob("variant", args.variant.as_deref(), "arc")?;
    let variant = match variant_name.as_str() {
        "arc" => SurgeryVariant::HeteroArc,
        "cylinder" => SurgeryVariant::HeteroCylinder,
        other => return Err(bad(format!("variant must be 'arc' or 'cylinder', got '{other}'"))),
    };
    let witnesses = s.usize_knob("witnesses", args.witnesses, 50)?;
    ensure((1..=10_000).contains(&witnesses), "witnesses must be in 1..=10000")?;
    let levels = s.u32_knob("levels", shared.levels, 7)? as usize;
    ensure((1..=1000).contains(&levels), "levels must be in 1..=1000")?;
    let around = s.usize_knob("around", args.around, 8)?;
    ensure((1..=1000).contains(&around), "around must be in 1..=1000")?;
    let controls = s.usize_knob("controls", args.controls, 0)?;
    ensure(controls <= 10_000, "controls must be at most 10000")?;
    let equi_samples = s.usize_knob("equi-samples", args.equi_samples, 1000)?;
    ensure(
        (1..=1_000_000).contains(&equi_samples),
        "equi-samples must be in 1..=1000000",
    )?;
    s.finish_knobs()?;
    let echo = s.echo();

    let m = build_surgery(variant)?;

    // Fixed-point census against the expected type counts.
    let census = m.census()?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut entries = Vec::new();
    for entry in &census {
        *counts.entry(coarse_kind(&entry.report.kind)).or_default() += 1;
        let mut v = report_value(&entry.report);
        v["name"] = serde_json::json!(entry.name);
        v["piece"] = serde_json::json!(entry.piece.as_str());
        v["chart"] = serde_json::json!(entry.point.chart.as_str());
        entries.push(v);
    }
    let expected: BTreeMap<&str, usize> = match variant {
        SurgeryVariant::HeteroArc => [("SINK", 3), ("SADDLE", 2), ("SOURCE", 1)].into(),
        SurgeryVariant::HeteroCylinder => [("SINK", 2), ("SADDLE", 2), ("SOURCE", 2)].into(),
    };
    let census_ok = counts == expected
        && census
            .iter()
            .all(|e| e.report.residual < FIXED_POINT_RESIDUAL_MAX);
    export::write_json(
        &s.artifact("surgery_census.json"),
        &echo,
        serde_json::json!({
            "variant": variant.as_str(),
            "fixed_points": entries,
            "counts": counts,
            "expected": expected,
            "ok": census_ok,
        }),
    )?;
    let counts_line = counts
        .iter()
        .map(|(k, v)| format!("{v} {k}"))
        .collect::<Vec<_>>()
        .join(" / ");
    println!("census: {} ({counts_line})", pass_str(census_ok));

    // Gluing residuals on fresh collar samples.
    let equi = m.equivariance_residual(equi_samples, s.seed)?;
    let align = m.alignment_residual()?;
    let residuals_ok = equi < EQUIVARIANCE_TOL && align < ALIGNMENT_TOL;
    export::write_json(
        &s.artifact("residuals.json"),
        &echo,
        serde_json::json!({
            "equivariance": { "samples": equi_samples, "max_residual": equi,
                              "tolerance": EQUIVARIANCE_TOL },
            "alignment": { "max_residual": align, "tolerance": ALIGNMENT_TOL },
            "ok": residuals_ok,
        }),
    )?;
    println!(
        "gluing residuals: {} (equivariance {equi:.2e}, alignment {align:.2e})",
        pass_str(residuals_ok)
    );

    // Heteroclinic witnesses, plus optional random controls that must
    // fail by falling into a sink.
    let points = match variant {
        SurgeryVariant::HeteroArc => m.arc_witnesses(witnesses)?,
        SurgeryVariant::HeteroCylinder => m.cylinder_witnesses(levels, around)?,
    };
    let mut rows = Vec::new();
    let mut passed = 0usize;
    for (i, p) in points.iter().enumerate() {
        let rep = run_witness(&m, p);
        passed += rep.pass as usize;
        rows.push(witness_row(i, "witness", p, &rep));
    }
    let witnesses_ok = passed == points.len();
    println!(
        "witnesses: {} ({passed}/{} heteroclinic between the saddles)",
        pass_str(witnesses_ok),
        points.len()
    );

    let mut controls_ok = true;
    if controls > 0 {
        let sinks: Vec<TaggedPoint> = census
            .iter()
            .filter(|e| e.report.kind == FixedPointKind::Sink)
            .map(|e| TaggedPoint { piece: e.piece, point: e.point })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let mut failed_into_sink = 0usize;
        for i in 0..controls {
            let p = control_point(&m, &mut rng);
            let rep = run_witness(&m, &p);
            if !rep.pass && lands_in_sink(&m, &sinks, &p) {
                failed_into_sink += 1;
            }
            rows.push(witness_row(points.len() + i, "control", &p, &rep));
        }
        controls_ok = 100 * failed_into_sink >= 95 * controls;
        println!(
            "controls: {} ({failed_into_sink}/{controls} fail the test and settle in a sink)",
            pass_str(controls_ok)
        );
    }
    export::write_csv(
        &s.artifact("witnesses.csv"),
        &echo,
        &[
            "index", "role", "piece", "chart", "y1", "y2", "y3", "y4",
            "forward_final", "backward_final", "pass",
        ],
        &rows,
    )?;

    println!("wrote artifacts to {}", s.out.display());
    let ok = census_ok && residuals_ok && witnesses_ok && controls_ok;
    if ok {
        Ok(())
    } else {
        Err(cert_fail("surgery certification failed; see artifacts"))
    }
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

pub fn export_geometry(shared: &SharedArgs, args: &ExportArgs) -> Result<(), Failure> {
    let mut s = Settings::new(shared, "export")?;
    let what = s.str_knob("what", args.what.as_deref(), "arc,knot,delta,tube")?;
    let samples = s.usize_knob("samples", args.samples, DEFAULT_SAMPLES)?;
    ensure((16..=4096).contains(&samples), "samples must be in 16..=4096")?;
    let levels = s.u32_knob("levels", shared.levels, DEFAULT_LEVELS)?;
    ensure(levels <= 16, "levels must be at most 16")?;
    let theta0 = s.f64_knob("theta0", args.theta0, DEFAULT_THETA0)?;
    ensure(theta0 > 0.0 && theta0 < 1.0, "theta0 must lie in (0, 1)")?;
    let sides = s.usize_knob("sides", args.sides, 12)?;
    ensure((3..=64).contains(&sides), "sides must be in 3..=64")?;
    s.finish_knobs()?;

    let mut wanted = Vec::new();
    for token in what.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match token {
            "arc" | "knot" | "delta" | "tube" => wanted.push(token.to_string()),
            other => {
                return Err(bad(format!(
                    "unknown export item '{other}' (expected arc, knot, delta, tube)"
                )))
            }
        }
    }
    ensure(!wanted.is_empty(), "nothing to export")?;

    let echo = s.echo();
    let gen = build_generator(samples)?;
    let wild = assemble_wild_arc(&gen, levels);
    let mut written = Vec::new();
    for item in &wanted {
        match item.as_str() {
            "arc" => {
                export::write_polyline_csv(&s.artifact("arc.csv"), &echo, &wild.vertices)?;
                written.push("arc.csv");
            }
            "knot" => {
                let knot = mazur_knot(&gen)?;
                let rows: Vec<Vec<String>> = knot
                    .points
                    .iter()
                    .map(|(dir, fiber)| {
                        let mut row: Vec<String> =
                            dir.iter().copied().map(format_float).collect();
                        row.push(format_float(*fiber));
                        row
                    })
                    .collect();
                export::write_csv(
                    &s.artifact("knot.csv"),
                    &echo,
                    &["x1", "x2", "x3", "fiber"],
                    &rows,
                )?;
                written.push("knot.csv");
            }
            "delta" => {
                let strip = spanning_strip(&gen.b)?;
                export::write_obj(
                    &s.artifact("delta.obj"),
                    &echo,
                    &export::weld_triangles(&strip.triangles),
                )?;
                written.push("delta.obj");
            }
            "tube" => {
                let radii: Vec<f64> = wild.vertices.iter().map(|v| theta0 * v.norm()).collect();
                let mesh = export::tube_mesh(&wild.vertices, &radii, sides)?;
                export::write_obj(&s.artifact("tube.obj"), &echo, &mesh)?;
                written.push("tube.obj");
            }
            _ => unreachable!("tokens validated above"),
        }
    }
    println!("wrote {} to {}", written.join(", "), s.out.display());
    Ok(())
}
