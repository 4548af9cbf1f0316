//! On-disk form of fields and flow traces.
//!
//! A field archive is a pair of files: a JSON manifest carrying the grid
//! geometry, the algebra rank, the field kind, and the sha256 of the payload,
//! next to a raw little-endian float64 payload in storage order (point-major,
//! then form index, then matrix row-major). Loading re-hashes the payload and
//! refuses corrupt or mismatched data instead of propagating it.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{Center, ConnectionField, GValuedOneForm, GValuedTwoForm, Grid};
use crate::flow::{BlowupInfo, FlowTrace, StepDiagnostics};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchiveKind {
    Connection,
    Oneform,
    Twoform,
}

impl ArchiveKind {
    fn ncomp(&self, n: usize) -> usize {
        match self {
            ArchiveKind::Connection | ArchiveKind::Oneform => n,
            ArchiveKind::Twoform => n * (n - 1) / 2,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            ArchiveKind::Connection => "connection",
            ArchiveKind::Oneform => "oneform",
            ArchiveKind::Twoform => "twoform",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "R")]
    pub half_width: f64,
    pub r: usize,
    pub kind: ArchiveKind,
    /// Payload file name, resolved relative to the manifest's directory.
    pub payload_file: String,
    pub payload_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn payload_path(manifest_path: &Path, payload_file: &str) -> Result<PathBuf> {
    if payload_file.contains('/') || payload_file.contains('\\') {
        return Err(Error::Archive {
            reason: format!("payload file name {payload_file:?} must not contain separators"),
        });
    }
    Ok(manifest_path.parent().unwrap_or_else(|| Path::new(".")).join(payload_file))
}

fn write_payload(path: &Path, data: &[f64]) -> Result<String> {
    let file = fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    let mut hasher = Sha256::new();
    let mut buf = Vec::with_capacity(8 * 8192);
    for chunk in data.chunks(8192) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        hasher.update(&buf);
        writer.write_all(&buf)?;
    }
    writer.flush()?;
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

fn save_raw(
    manifest_path: &Path,
    kind: ArchiveKind,
    grid: &Grid,
    r: usize,
    data: &[f64],
) -> Result<()> {
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Archive { reason: "manifest path has no file name".into() })?;
    let payload_file = format!("{stem}.f64");
    let sha = write_payload(&payload_path(manifest_path, &payload_file)?, data)?;
    let manifest = ArchiveManifest {
        format_version: FORMAT_VERSION,
        n: grid.n(),
        m: grid.m(),
        half_width: grid.half_width(),
        r,
        kind,
        payload_file,
        payload_sha256: sha,
    };
    fs::write(manifest_path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn load_raw(manifest_path: &Path, want: ArchiveKind) -> Result<(Grid, usize, Vec<f64>)> {
    let manifest: ArchiveManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Archive {
            reason: format!(
                "format version {} unsupported (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        });
    }
    if manifest.kind != want {
        return Err(Error::Archive {
            reason: format!("archive holds a {}, expected a {}", manifest.kind.label(), want.label()),
        });
    }
    let grid = Grid::new(manifest.n, manifest.m, manifest.half_width)?;
    let bytes = fs::read(payload_path(manifest_path, &manifest.payload_file)?)?;
    let got_sha = sha256_hex(&bytes);
    if got_sha != manifest.payload_sha256 {
        return Err(Error::Archive {
            reason: format!(
                "payload sha256 mismatch: manifest {} payload {}",
                manifest.payload_sha256, got_sha
            ),
        });
    }
    let expect = grid.npoints() * manifest.kind.ncomp(grid.n()) * manifest.r * manifest.r * 8;
    if bytes.len() != expect {
        return Err(Error::Archive {
            reason: format!("payload holds {} bytes, geometry demands {expect}", bytes.len()),
        });
    }
    let data: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((grid, manifest.r, data))
}

pub fn save_connection(manifest_path: &Path, a: &ConnectionField) -> Result<()> {
    save_raw(manifest_path, ArchiveKind::Connection, a.grid(), a.rank(), a.data())
}

pub fn save_oneform(manifest_path: &Path, a: &GValuedOneForm) -> Result<()> {
    save_raw(manifest_path, ArchiveKind::Oneform, a.grid(), a.rank(), a.data())
}

pub fn save_twoform(manifest_path: &Path, f: &GValuedTwoForm) -> Result<()> {
    save_raw(manifest_path, ArchiveKind::Twoform, f.grid(), f.rank(), f.data())
}

pub fn load_connection(manifest_path: &Path) -> Result<ConnectionField> {
    let (grid, r, data) = load_raw(manifest_path, ArchiveKind::Connection)?;
    let mut a = ConnectionField::zero(grid, r);
    a.data_mut().copy_from_slice(&data);
    Ok(a)
}

pub fn load_oneform(manifest_path: &Path) -> Result<GValuedOneForm> {
    let (grid, r, data) = load_raw(manifest_path, ArchiveKind::Oneform)?;
    let mut a = GValuedOneForm::zero(grid, r);
    a.data_mut().copy_from_slice(&data);
    Ok(a)
}

pub fn load_twoform(manifest_path: &Path) -> Result<GValuedTwoForm> {
    let (grid, r, data) = load_raw(manifest_path, ArchiveKind::Twoform)?;
    let mut f = GValuedTwoForm::zero(grid, r);
    f.data_mut().copy_from_slice(&data);
    Ok(f)
}

/// Peek at a manifest without touching the payload.
pub fn read_manifest(manifest_path: &Path) -> Result<ArchiveManifest> {
    Ok(serde_json::from_slice(&fs::read(manifest_path)?)?)
}

/// Directory manifest for a persisted flow trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowTraceManifest {
    pub format_version: u32,
    pub centers: Vec<Center>,
    /// (flow time, snapshot manifest file name) pairs.
    pub snapshots: Vec<(f64, String)>,
    pub blowup: Option<BlowupInfo>,
    pub violations: Vec<String>,
    pub diagnostics_file: String,
}

/// Writes manifest.json, one field archive per snapshot, and diagnostics.csv
/// with columns t, dt, sup_F, ym_energy, phi_c1.., entropy (blank when the
/// step sampled no entropy).
pub fn save_flow_trace(dir: &Path, trace: &FlowTrace) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut snapshots = Vec::with_capacity(trace.snapshots.len());
    for (i, (t, field)) in trace.snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:04}.json");
        save_connection(&dir.join(&name), field)?;
        snapshots.push((*t, name));
    }

    let csv_name = "diagnostics.csv".to_string();
    let file = fs::File::create(dir.join(&csv_name))?;
    let mut w = BufWriter::new(file);
    write!(w, "t,dt,sup_F,ym_energy")?;
    for i in 1..=trace.centers.len() {
        write!(w, ",phi_c{i}")?;
    }
    writeln!(w, ",entropy")?;
    for d in &trace.diagnostics {
        write_diagnostics_row(&mut w, d)?;
    }
    w.flush()?;

    let manifest = FlowTraceManifest {
        format_version: FORMAT_VERSION,
        centers: trace.centers.clone(),
        snapshots,
        blowup: trace.blowup.clone(),
        violations: trace.violations.clone(),
        diagnostics_file: csv_name,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn write_diagnostics_row<W: Write>(w: &mut W, d: &StepDiagnostics) -> Result<()> {
    write!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", d.t, d.dt, d.sup_f, d.ym_energy)?;
    for phi in &d.phi {
        write!(w, ",{phi:.17e}")?;
    }
    match d.entropy {
        Some(e) => writeln!(w, ",{e:.17e}")?,
        None => writeln!(w, ",")?,
    }
    Ok(())
}

/// Reads back a trace directory: the manifest plus every snapshot field.
pub fn load_flow_trace(dir: &Path) -> Result<(FlowTraceManifest, Vec<(f64, ConnectionField)>)> {
    let manifest: FlowTraceManifest =
        serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Archive {
            reason: format!(
                "flow trace format version {} unsupported (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        });
    }
    let mut snapshots = Vec::with_capacity(manifest.snapshots.len());
    for (t, name) in &manifest.snapshots {
        snapshots.push((*t, load_connection(&dir.join(name))?));
    }
    Ok((manifest, snapshots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{curvature, random_smooth, RandomFieldParams};

    fn sample_field() -> ConnectionField {
        let grid = Grid::new(3, 9, 2.0).unwrap();
        random_smooth(grid, 3, 11, &RandomFieldParams::gentle(&grid))
    }

    #[test]
    fn round_trip_preserves_every_bit() {
        let dir = tempfile::tempdir().unwrap();
        let a = sample_field();
        let path = dir.path().join("field.json");
        save_connection(&path, &a).unwrap();
        let back = load_connection(&path).unwrap();
        assert_eq!(a.grid(), back.grid());
        assert_eq!(a.rank(), back.rank());
        assert_eq!(a.data(), back.data());

        let f = curvature(&a);
        let fpath = dir.path().join("curv.json");
        save_twoform(&fpath, &f).unwrap();
        let fback = load_twoform(&fpath).unwrap();
        assert_eq!(f.data(), fback.data());

        let theta = a.to_oneform();
        let opath = dir.path().join("one.json");
        save_oneform(&opath, &theta).unwrap();
        assert_eq!(load_oneform(&opath).unwrap().data(), theta.data());
    }

    #[test]
    fn corrupted_payload_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let a = sample_field();
        let path = dir.path().join("field.json");
        save_connection(&path, &a).unwrap();

        let payload = dir.path().join("field.f64");
        let mut bytes = std::fs::read(&payload).unwrap();
        bytes[17] ^= 0x40;
        std::fs::write(&payload, &bytes).unwrap();

        match load_connection(&path) {
            Err(Error::Archive { reason }) => assert!(reason.contains("sha256")),
            other => panic!("expected archive error, got {other:?}"),
        }
    }

    #[test]
    fn kind_and_version_mismatches_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let a = sample_field();
        let path = dir.path().join("one.json");
        save_oneform(&path, &a.to_oneform()).unwrap();
        assert!(matches!(load_connection(&path), Err(Error::Archive { .. })));

        let mut manifest = read_manifest(&path).unwrap();
        manifest.format_version = 99;
        std::fs::write(&path, serde_json::to_vec(&manifest).unwrap()).unwrap();
        assert!(matches!(load_oneform(&path), Err(Error::Archive { .. })));
    }

    #[test]
    fn flow_trace_directory_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let a = sample_field();
        let b = sample_field();
        let trace = FlowTrace {
            snapshots: vec![(0.0, a.clone()), (0.25, b)],
            diagnostics: vec![
                StepDiagnostics {
                    t: 0.0,
                    dt: 0.1,
                    sup_f: 1.25,
                    ym_energy: 3.5,
                    phi: vec![0.5, 0.25],
                    entropy: Some(0.75),
                },
                StepDiagnostics {
                    t: 0.1,
                    dt: 0.1,
                    sup_f: 1.0,
                    ym_energy: 3.0,
                    phi: vec![0.4, 0.2],
                    entropy: None,
                },
            ],
            centers: vec![Center::origin(3, 1.0), Center::origin(3, 2.0)],
            blowup: None,
            violations: vec![],
        };
        let root = dir.path().join("trace");
        save_flow_trace(&root, &trace).unwrap();

        let (manifest, snapshots) = load_flow_trace(&root).unwrap();
        assert_eq!(manifest.snapshots.len(), 2);
        assert_eq!(snapshots[0].1.data(), a.data());
        assert_eq!(manifest.centers.len(), 2);
        assert!(manifest.blowup.is_none());

        let csv = std::fs::read_to_string(root.join("diagnostics.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "t,dt,sup_F,ym_energy,phi_c1,phi_c2,entropy");
        assert!(lines[2].ends_with(','), "entropy column blank: {}", lines[2]);
    }
}
