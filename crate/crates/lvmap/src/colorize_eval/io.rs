//! Point cloud container: a short text header (count and field names)
//! followed by little-endian float32 records, or an ASCII table for
//! tool-free inspection. Used for radiance clouds and raw LiDAR scans.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use super::RadiancePoint;

const MAGIC: &str = "lvcloud 1";

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad header: {reason}")]
    BadHeader { path: String, reason: String },
    #[error("{path}: expected {expected} records, payload holds {actual}")]
    TruncatedPayload {
        path: String,
        expected: usize,
        actual: usize,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> CloudError {
    CloudError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Raw cloud: `count` records of `fields.len()` float32 values each.
#[derive(Clone, Debug)]
pub struct RawCloud {
    pub fields: Vec<String>,
    pub data: Vec<f32>,
}

impl RawCloud {
    pub fn count(&self) -> usize {
        if self.fields.is_empty() {
            0
        } else {
            self.data.len() / self.fields.len()
        }
    }
}

pub fn write_cloud(
    path: &Path,
    fields: &[&str],
    rows: impl ExactSizeIterator<Item = Vec<f32>>,
    ascii: bool,
) -> Result<(), CloudError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let count = rows.len();
    let format = if ascii { "ascii" } else { "binary_le_f32" };
    write!(
        w,
        "{MAGIC}\ncount {count}\nfields {}\nformat {format}\nend_header\n",
        fields.join(" ")
    )
    .map_err(|e| io_err(path, e))?;
    for row in rows {
        debug_assert_eq!(row.len(), fields.len());
        if ascii {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(" ")).map_err(|e| io_err(path, e))?;
        } else {
            for v in row {
                w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_cloud(path: &Path) -> Result<RawCloud, CloudError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |reason: &str| CloudError::BadHeader {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut line = String::new();
    let mut read_line = |r: &mut BufReader<std::fs::File>, line: &mut String| {
        line.clear();
        r.read_line(line).map_err(|e| io_err(path, e)).map(|n| n > 0)
    };
    if !read_line(&mut r, &mut line)? || line.trim_end() != MAGIC {
        return Err(bad("missing magic"));
    }
    let mut count: Option<usize> = None;
    let mut fields: Vec<String> = Vec::new();
    let mut ascii = false;
    loop {
        if !read_line(&mut r, &mut line)? {
            return Err(bad("unterminated header"));
        }
        let trimmed = line.trim_end();
        if trimmed == "end_header" {
            break;
        }
        let mut parts = trimmed.split_whitespace();
        match parts.next() {
            Some("count") => {
                count = Some(
                    parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| bad("bad count"))?,
                );
            }
            Some("fields") => fields = parts.map(String::from).collect(),
            Some("format") => match parts.next() {
                Some("binary_le_f32") => ascii = false,
                Some("ascii") => ascii = true,
                _ => return Err(bad("unknown format")),
            },
            _ => return Err(bad("unknown header line")),
        }
    }
    let count = count.ok_or_else(|| bad("missing count"))?;
    if fields.is_empty() {
        return Err(bad("missing fields"));
    }
    let values = count * fields.len();
    let mut data = Vec::with_capacity(values);
    if ascii {
        for _ in 0..count {
            if !read_line(&mut r, &mut line)? {
                break;
            }
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f32>().map_err(|_| bad("bad ascii value"))?);
            }
        }
    } else {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| io_err(path, e))?;
        for chunk in buf.chunks_exact(4).take(values) {
            data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
        }
    }
    if data.len() != values {
        return Err(CloudError::TruncatedPayload {
            path: path.display().to_string(),
            expected: count,
            actual: data.len() / fields.len().max(1),
        });
    }
    Ok(RawCloud { fields, data })
}

/// Write a radiance cloud as x y z r g b records.
pub fn write_radiance_cloud(
    path: &Path,
    cloud: &[RadiancePoint],
    ascii: bool,
) -> Result<(), CloudError> {
    write_cloud(
        path,
        &["x", "y", "z", "r", "g", "b"],
        cloud.iter().map(|p| {
            vec![
                p.position.x as f32,
                p.position.y as f32,
                p.position.z as f32,
                p.radiance.x as f32,
                p.radiance.y as f32,
                p.radiance.z as f32,
            ]
        }),
        ascii,
    )
}

pub fn read_radiance_cloud(path: &Path) -> Result<Vec<RadiancePoint>, CloudError> {
    let raw = read_cloud(path)?;
    let expected = ["x", "y", "z", "r", "g", "b"];
    if raw.fields != expected {
        return Err(CloudError::BadHeader {
            path: path.display().to_string(),
            reason: format!("expected fields {expected:?}, got {:?}", raw.fields),
        });
    }
    Ok(raw
        .data
        .chunks_exact(6)
        .map(|c| RadiancePoint {
            position: Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64),
            radiance: Vector3::new(c[3] as f64, c[4] as f64, c[5] as f64),
        })
        .collect())
}

/// Write raw scan points as x y z records.
pub fn write_xyz_cloud(path: &Path, points: &[Vector3<f64>]) -> Result<(), CloudError> {
    write_cloud(
        path,
        &["x", "y", "z"],
        points
            .iter()
            .map(|p| vec![p.x as f32, p.y as f32, p.z as f32]),
        false,
    )
}

pub fn read_xyz_cloud(path: &Path) -> Result<Vec<Vector3<f64>>, CloudError> {
    let raw = read_cloud(path)?;
    if raw.fields != ["x", "y", "z"] {
        return Err(CloudError::BadHeader {
            path: path.display().to_string(),
            reason: format!("expected fields [x, y, z], got {:?}", raw.fields),
        });
    }
    Ok(raw
        .data
        .chunks_exact(3)
        .map(|c| Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radiance_roundtrip_binary_and_ascii() {
        let dir = tempfile::tempdir().unwrap();
        let cloud: Vec<RadiancePoint> = (0..10)
            .map(|i| RadiancePoint {
                position: Vector3::new(i as f64 * 0.5, -(i as f64), 2.0),
                radiance: Vector3::new(0.1, 0.5, 0.9),
            })
            .collect();
        for ascii in [false, true] {
            let path = dir.path().join(format!("c_{ascii}.lvc"));
            write_radiance_cloud(&path, &cloud, ascii).unwrap();
            let back = read_radiance_cloud(&path).unwrap();
            assert_eq!(back.len(), cloud.len());
            for (a, b) in cloud.iter().zip(&back) {
                assert!((a.position - b.position).norm() < 1e-6);
                assert!((a.radiance - b.radiance).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn xyz_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let pts: Vec<Vector3<f64>> = (0..37)
            .map(|i| Vector3::new(i as f64, (i * i) as f64 * 0.01, -3.5))
            .collect();
        let path = dir.path().join("scan.lvc");
        write_xyz_cloud(&path, &pts).unwrap();
        let back = read_xyz_cloud(&path).unwrap();
        assert_eq!(back.len(), pts.len());
        for (a, b) in pts.iter().zip(&back) {
            assert!((a - b).norm() < 1e-4);
        }
    }

    #[test]
    fn truncated_payload_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.lvc");
        std::fs::write(
            &path,
            b"lvcloud 1\ncount 5\nfields x y z\nformat binary_le_f32\nend_header\n\x00\x00\x00\x00",
        )
        .unwrap();
        assert!(matches!(
            read_xyz_cloud(&path),
            Err(CloudError::TruncatedPayload { .. })
        ));
    }
}
