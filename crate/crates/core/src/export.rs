//! Deterministic artifact writers: CSV tables, Wavefront OBJ meshes, and
//! JSON reports.
//!
//! Every writer follows the same three rules so that identical inputs
//! produce byte-identical files on every run:
//!
//! * floats are printed with 17 significant digits, which round-trips
//!   every finite `f64` exactly;
//! * every file embeds the producing configuration echo and the artifact
//!   format version (comment lines in CSV/OBJ, top-level fields in JSON);
//! * files are written atomically — content goes to a `.tmp` sibling that
//!   is renamed over the destination only after a complete write.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::SVector;

use crate::{Error, Result, V3};

/// Format version stamped into every artifact. Bump when a writer's
/// layout changes incompatibly.
pub const ARTIFACT_VERSION: u32 = 1;

/// Ordered `key: value` pairs echoing the configuration that produced an
/// artifact. Order is preserved in comment preambles; JSON reports store
/// them under a `"config"` object.
pub type ConfigEcho = Vec<(String, String)>;

/// Shorthand for building a [`ConfigEcho`] from string literals.
pub fn echo(pairs: &[(&str, &str)]) -> ConfigEcho {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// A float printed with 17 significant digits (scientific notation), the
/// smallest count that round-trips every finite `f64` bit for bit.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `content` to `path` atomically: the bytes go to a `.tmp` sibling
/// first and the sibling is renamed over the destination, so a crash
/// mid-write never leaves a truncated artifact behind. Parent directories
/// are created as needed.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::ConstructionFailed(format!("not a file path: {}", path.display())))?
        .to_os_string();
    let mut tmp_name = file_name;
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn preamble(out: &mut String, comment: &str, echo: &ConfigEcho) {
    let _ = writeln!(out, "{comment} artifact_version: {ARTIFACT_VERSION}");
    for (key, value) in echo {
        let _ = writeln!(out, "{comment} {key}: {value}");
    }
}

/// A CSV cell, quoted only when it contains a delimiter, quote, or
/// newline (numeric cells never are).
fn csv_cell(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Assemble a CSV document: `#`-comment preamble, mandatory header row,
/// then one line per row. Every row must have exactly as many cells as
/// the header.
pub fn csv_document<S: AsRef<str>>(
    echo: &ConfigEcho,
    header: &[S],
    rows: &[Vec<String>],
) -> Result<String> {
    if header.is_empty() {
        return Err(Error::ConstructionFailed("CSV header must be non-empty".into()));
    }
    let mut out = String::new();
    preamble(&mut out, "#", echo);
    let head: Vec<String> = header.iter().map(|h| csv_cell(h.as_ref())).collect();
    let _ = writeln!(out, "{}", head.join(","));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::ConstructionFailed(format!(
                "CSV row {i} has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        let cells: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    Ok(out)
}

pub fn write_csv<S: AsRef<str>>(
    path: &Path,
    echo: &ConfigEcho,
    header: &[S],
    rows: &[Vec<String>],
) -> Result<()> {
    write_atomic(path, &csv_document(echo, header, rows)?)
}

/// Header `x1, …, xN` and one row per vertex — the polyline table shape
/// shared by arcs, knots, and separatrices.
pub fn write_polyline_csv<const N: usize>(
    path: &Path,
    echo: &ConfigEcho,
    points: &[SVector<f64, N>],
) -> Result<()> {
    let header: Vec<String> = (1..=N).map(|i| format!("x{i}")).collect();
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| p.iter().copied().map(format_float).collect())
        .collect();
    write_csv(path, echo, &header, &rows)
}

/// Header `t, x1, …, xN`; one row per sample of a trajectory or orbit
/// (`times[i]` is the flow time or iterate index of `states[i]`).
pub fn write_orbit_csv<const N: usize>(
    path: &Path,
    echo: &ConfigEcho,
    times: &[f64],
    states: &[SVector<f64, N>],
) -> Result<()> {
    if times.len() != states.len() {
        return Err(Error::ConstructionFailed(format!(
            "orbit has {} time stamps for {} states",
            times.len(),
            states.len()
        )));
    }
    let mut header = vec!["t".to_string()];
    header.extend((1..=N).map(|i| format!("x{i}")));
    let rows: Vec<Vec<String>> = times
        .iter()
        .zip(states)
        .map(|(t, s)| {
            let mut row = vec![format_float(*t)];
            row.extend(s.iter().copied().map(format_float));
            row
        })
        .collect();
    write_csv(path, echo, &header, &rows)
}

/// An indexed triangle mesh. Vertex indices are 0-based in memory; the
/// OBJ writer emits them 1-based as the format requires.
#[derive(Debug, Clone)]
pub struct ObjMesh {
    pub vertices: Vec<V3>,
    pub faces: Vec<[usize; 3]>,
}

impl ObjMesh {
    fn validate(&self) -> Result<()> {
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= self.vertices.len()) {
                return Err(Error::ConstructionFailed(format!(
                    "face {i} references a vertex past the end ({f:?} with {} vertices)",
                    self.vertices.len()
                )));
            }
        }
        Ok(())
    }
}

/// Assemble a Wavefront OBJ document: `#`-comment preamble, `v x y z`
/// per vertex, `f i j k` per face with 1-based indices.
pub fn obj_document(echo: &ConfigEcho, mesh: &ObjMesh) -> Result<String> {
    mesh.validate()?;
    let mut out = String::new();
    preamble(&mut out, "#", echo);
    for v in &mesh.vertices {
        let _ = writeln!(
            out,
            "v {} {} {}",
            format_float(v.x),
            format_float(v.y),
            format_float(v.z)
        );
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    Ok(out)
}

pub fn write_obj(path: &Path, echo: &ConfigEcho, mesh: &ObjMesh) -> Result<()> {
    write_atomic(path, &obj_document(echo, mesh)?)
}

/// Weld a triangle soup into an indexed mesh, merging vertices that are
/// bitwise identical. First-seen order makes the result deterministic.
pub fn weld_triangles(triangles: &[[V3; 3]]) -> ObjMesh {
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::with_capacity(triangles.len());
    for tri in triangles {
        let mut face = [0usize; 3];
        for (slot, v) in face.iter_mut().zip(tri) {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            *slot = *index.entry(key).or_insert_with(|| {
                vertices.push(*v);
                vertices.len() - 1
            });
        }
        faces.push(face);
    }
    ObjMesh { vertices, faces }
}

/// Triangulated tube surface around an open centerline polyline, with a
/// prescribed radius at each vertex. Cross-section rings are laid out in
/// rotation-minimizing frames (double-reflection transport), so the mesh
/// never twists artificially between rings.
pub fn tube_mesh(center: &[V3], radii: &[f64], sides: usize) -> Result<ObjMesh> {
    if center.len() < 2 {
        return Err(Error::ConstructionFailed(
            "tube mesh needs at least one centerline segment".into(),
        ));
    }
    if center.len() != radii.len() {
        return Err(Error::ConstructionFailed(format!(
            "tube mesh has {} centerline vertices but {} radii",
            center.len(),
            radii.len()
        )));
    }
    if sides < 3 {
        return Err(Error::ConstructionFailed(
            "tube cross-section needs at least 3 sides".into(),
        ));
    }
    if let Some(r) = radii.iter().find(|r| !r.is_finite() || **r <= 0.0) {
        return Err(Error::ConstructionFailed(format!(
            "tube radius must be finite and positive, got {r}"
        )));
    }

    let n = center.len();
    let mut tangents = Vec::with_capacity(n);
    for i in 0..n {
        let ahead = center[(i + 1).min(n - 1)];
        let behind = center[i.saturating_sub(1)];
        let d = ahead - behind;
        let len = d.norm();
        if len == 0.0 {
            return Err(Error::ConstructionFailed(format!(
                "degenerate centerline around vertex {i}"
            )));
        }
        tangents.push(d / len);
    }

    // Seed normal: reject the least-aligned coordinate axis against the
    // first tangent, then transport by double reflection.
    let t0 = tangents[0];
    let axis = if t0.x.abs() <= t0.y.abs() && t0.x.abs() <= t0.z.abs() {
        V3::new(1.0, 0.0, 0.0)
    } else if t0.y.abs() <= t0.z.abs() {
        V3::new(0.0, 1.0, 0.0)
    } else {
        V3::new(0.0, 0.0, 1.0)
    };
    let rejected = axis - t0 * axis.dot(&t0);
    let mut normals = Vec::with_capacity(n);
    normals.push(rejected / rejected.norm());
    for i in 0..n - 1 {
        let v1 = center[i + 1] - center[i];
        let c1 = v1.dot(&v1);
        let (r_l, t_l) = if c1 > 0.0 {
            (
                normals[i] - v1 * (2.0 / c1 * v1.dot(&normals[i])),
                tangents[i] - v1 * (2.0 / c1 * v1.dot(&tangents[i])),
            )
        } else {
            (normals[i], tangents[i])
        };
        let v2 = tangents[i + 1] - t_l;
        let c2 = v2.dot(&v2);
        let next = if c2 > 0.0 {
            r_l - v2 * (2.0 / c2 * v2.dot(&r_l))
        } else {
            r_l
        };
        let straight = next - tangents[i + 1] * next.dot(&tangents[i + 1]);
        normals.push(straight / straight.norm());
    }

    let mut vertices = Vec::with_capacity(n * sides);
    for i in 0..n {
        let m1 = normals[i];
        let m2 = tangents[i].cross(&m1);
        for j in 0..sides {
            let angle = 2.0 * std::f64::consts::PI * j as f64 / sides as f64;
            let (s, c) = angle.sin_cos();
            vertices.push(center[i] + (m1 * c + m2 * s) * radii[i]);
        }
    }

    let mut faces = Vec::with_capacity(2 * (n - 1) * sides);
    for i in 0..n - 1 {
        for j in 0..sides {
            let a = i * sides + j;
            let b = i * sides + (j + 1) % sides;
            let c = (i + 1) * sides + (j + 1) % sides;
            let d = (i + 1) * sides + j;
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }

    Ok(ObjMesh { vertices, faces })
}

/// Assemble a JSON report document: a top-level object holding the
/// artifact version, the configuration echo, and the report body. Keys
/// serialize in sorted order, so the bytes are deterministic.
pub fn json_document(echo: &ConfigEcho, report: serde_json::Value) -> String {
    let config: serde_json::Map<String, serde_json::Value> = echo
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let doc = serde_json::json!({
        "artifact_version": ARTIFACT_VERSION,
        "config": config,
        "report": report,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON value serializes");
    text.push('\n');
    text
}

pub fn write_json(path: &Path, echo: &ConfigEcho, report: serde_json::Value) -> Result<()> {
    write_atomic(path, &json_document(echo, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bit_for_bit() {
        let samples = [
            0.0,
            -0.0,
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI,
            -2.5e17,
            1e-300,
            f64::MIN_POSITIVE,
            f64::MAX,
            (2.0f64).sqrt() * 1e-9,
        ];
        for &x in &samples {
            let back: f64 = format_float(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} reprinted as {}", format_float(x));
        }
    }

    #[test]
    fn csv_has_preamble_header_and_quoting() {
        let echo = echo(&[("command", "orbit"), ("note", "a,b")]);
        let doc = csv_document(&echo, &["t", "x1"], &[vec!["0".into(), "1.5".into()]]).unwrap();
        let lines: Vec<&str> = doc.lines().collect();
        assert_eq!(lines[0], format!("# artifact_version: {ARTIFACT_VERSION}"));
        assert_eq!(lines[1], "# command: orbit");
        assert_eq!(lines[2], "# note: a,b");
        assert_eq!(lines[3], "t,x1");
        assert_eq!(lines[4], "0,1.5");
        assert!(doc.ends_with('\n'));
        // Quoting kicks in only for cells that need it.
        let quoted = csv_document(&echo, &["v"], &[vec!["a\"b,c".into()]]).unwrap();
        assert!(quoted.lines().last().unwrap() == "\"a\"\"b,c\"");
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let err = csv_document(&Vec::new(), &["a", "b"], &[vec!["1".into()]]).unwrap_err();
        assert!(matches!(err, Error::ConstructionFailed(_)));
    }

    #[test]
    fn orbit_writer_rejects_mismatched_lengths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orbit.csv");
        let states = [SVector::<f64, 2>::new(0.0, 1.0)];
        let err = write_orbit_csv(&path, &Vec::new(), &[0.0, 1.0], &states).unwrap_err();
        assert!(matches!(err, Error::ConstructionFailed(_)));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/dir/out.csv");
        write_atomic(&path, "payload\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "payload\n");
        let siblings: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(siblings, vec![std::ffi::OsString::from("out.csv")]);
    }

    #[test]
    fn identical_inputs_produce_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let echo = echo(&[("seed", "42")]);
        let points = [V3::new(0.25, -1.0, 3.5e-7), V3::new(1.0 / 3.0, 0.0, 2.0)];
        let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_polyline_csv(&p1, &echo, &points).unwrap();
        write_polyline_csv(&p2, &echo, &points).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn obj_faces_are_one_based() {
        let mesh = ObjMesh {
            vertices: vec![V3::zeros(), V3::new(1.0, 0.0, 0.0), V3::new(0.0, 1.0, 0.0)],
            faces: vec![[0, 1, 2]],
        };
        let doc = obj_document(&Vec::new(), &mesh).unwrap();
        assert_eq!(doc.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert_eq!(doc.lines().filter(|l| l.starts_with("f ")).count(), 1);
        assert!(doc.lines().any(|l| l == "f 1 2 3"));
        let bad = ObjMesh {
            vertices: vec![V3::zeros()],
            faces: vec![[0, 0, 1]],
        };
        assert!(obj_document(&Vec::new(), &bad).is_err());
    }

    #[test]
    fn welding_merges_shared_edges() {
        let a = V3::new(0.0, 0.0, 0.0);
        let b = V3::new(1.0, 0.0, 0.0);
        let c = V3::new(0.0, 1.0, 0.0);
        let d = V3::new(1.0, 1.0, 0.0);
        let mesh = weld_triangles(&[[a, b, c], [b, d, c]]);
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.faces.len(), 2);
        assert_eq!(mesh.faces[0], [0, 1, 2]);
        assert_eq!(mesh.faces[1], [1, 3, 2]);
    }

    #[test]
    fn tube_rings_sit_at_the_requested_radius() {
        let center: Vec<V3> = (0..12)
            .map(|i| {
                let t = i as f64 / 11.0;
                V3::new(t * 2.0, (t * 3.0).sin() * 0.3, t * t)
            })
            .collect();
        let radii: Vec<f64> = center.iter().map(|p| 0.05 + 0.01 * p.x).collect();
        let sides = 8;
        let mesh = tube_mesh(&center, &radii, sides).unwrap();
        assert_eq!(mesh.vertices.len(), center.len() * sides);
        assert_eq!(mesh.faces.len(), 2 * (center.len() - 1) * sides);
        for (i, c) in center.iter().enumerate() {
            for j in 0..sides {
                let v = mesh.vertices[i * sides + j];
                let r = (v - c).norm();
                assert!((r - radii[i]).abs() < 1e-12, "ring {i} vertex {j}: {r}");
            }
        }
        // Rotation-minimizing rings stay orthogonal to the local tangent.
        for i in 1..center.len() - 1 {
            let tan = (center[i + 1] - center[i - 1]).normalize();
            for j in 0..sides {
                let v = mesh.vertices[i * sides + j] - center[i];
                assert!(v.dot(&tan).abs() < 1e-12 * v.norm().max(1.0) + 1e-12);
            }
        }
    }

    #[test]
    fn json_report_embeds_version_and_sorts_keys() {
        let echo = echo(&[("seed", "7"), ("command", "surgery")]);
        let body = serde_json::json!({"zeta": 1, "alpha": 2});
        let doc = json_document(&echo, body);
        let parsed: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(parsed["artifact_version"], ARTIFACT_VERSION);
        assert_eq!(parsed["config"]["seed"], "7");
        assert_eq!(parsed["report"]["alpha"], 2);
        let alpha_at = doc.find("\"alpha\"").unwrap();
        let zeta_at = doc.find("\"zeta\"").unwrap();
        assert!(alpha_at < zeta_at, "keys must serialize sorted");
        assert!(doc.ends_with('\n'));
    }
}
