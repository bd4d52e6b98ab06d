//! Field dumps (CSV or raw little-endian f64 with a JSON sidecar) and
//! gnuplot grid text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vortex_core::diagnostics::Curvatures;
use vortex_core::ScalarField;

use crate::config::DumpFormat;

pub const COLUMNS: [&str; 8] = ["x1", "x2", "u", "v", "e_u", "e_v", "Fhat", "Ftilde"];

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Corrupt { path: String, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DumpError + '_ {
    move |source| DumpError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn corrupt(path: &Path, msg: impl Into<String>) -> DumpError {
    DumpError::Corrupt {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Sidecar describing a binary dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub n1: usize,
    pub n2: usize,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub columns: Vec<String>,
    pub dtype: String,
    pub layout: String,
}

/// One row per grid node, row-major in `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub n1: usize,
    pub n2: usize,
    pub periods: [f64; 2],
    pub rows: Vec<[f64; 8]>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl FieldTable {
    pub fn from_fields(u: &ScalarField, v: &ScalarField, curv: &Curvatures) -> Self {
        let g = u.geometry();
        let rows = (0..g.len())
            .map(|k| {
                let [x1, x2] = u.node_of(k);
                let (uk, vk) = (u.values()[k], v.values()[k]);
                [
                    x1,
                    x2,
                    uk,
                    vk,
                    uk.exp(),
                    vk.exp(),
                    curv.f_hat.values()[k],
                    curv.f_tilde.values()[k],
                ]
            })
            .collect();
        Self {
            n1: g.n1(),
            n2: g.n2(),
            periods: [g.l1(), g.l2()],
            rows,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = COLUMNS.iter().position(|&n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn write(&self, path: &Path, format: DumpFormat) -> Result<(), DumpError> {
        match format {
            DumpFormat::Csv => {
                let mut s = COLUMNS.join(",");
                s.push('\n');
                for r in &self.rows {
                    let line: Vec<String> = r.iter().map(|x| x.to_string()).collect();
                    s.push_str(&line.join(","));
                    s.push('\n');
                }
                std::fs::write(path, s).map_err(io_err(path))
            }
            DumpFormat::F64bin => {
                let mut bytes = Vec::with_capacity(self.rows.len() * 64);
                for r in &self.rows {
                    for x in r {
                        bytes.extend_from_slice(&x.to_le_bytes());
                    }
                }
                std::fs::write(path, bytes).map_err(io_err(path))?;
                let side = Sidecar {
                    n1: self.n1,
                    n2: self.n2,
                    l1: self.periods[0],
                    l2: self.periods[1],
                    columns: COLUMNS.iter().map(|s| s.to_string()).collect(),
                    dtype: "f64le".into(),
                    layout: "row-major nodes, columns interleaved".into(),
                };
                let sp = sidecar_path(path);
                let text = serde_json::to_string_pretty(&side).expect("sidecar serializes");
                std::fs::write(&sp, text).map_err(io_err(&sp))
            }
        }
    }

    /// Reads a dump; a `<path>.json` sidecar marks the binary format.
    pub fn read(path: &Path) -> Result<Self, DumpError> {
        let sp = sidecar_path(path);
        if sp.exists() {
            Self::read_binary(path, &sp)
        } else {
            Self::read_csv(path)
        }
    }

    fn read_binary(path: &Path, sp: &Path) -> Result<Self, DumpError> {
        let text = std::fs::read_to_string(sp).map_err(io_err(sp))?;
        let side: Sidecar =
            serde_json::from_str(&text).map_err(|e| corrupt(sp, format!("bad sidecar: {e}")))?;
        if side.columns != COLUMNS || side.dtype != "f64le" {
            return Err(corrupt(sp, "unexpected columns or dtype"));
        }
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        let n = side.n1 * side.n2;
        if bytes.len() != n * 64 {
            return Err(corrupt(
                path,
                format!("expected {} bytes, found {}", n * 64, bytes.len()),
            ));
        }
        let rows = bytes
            .chunks_exact(64)
            .map(|chunk| {
                let mut r = [0.0; 8];
                for (x, b) in r.iter_mut().zip(chunk.chunks_exact(8)) {
                    *x = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
                }
                r
            })
            .collect();
        Ok(Self {
            n1: side.n1,
            n2: side.n2,
            periods: [side.l1, side.l2],
            rows,
        })
    }

    fn read_csv(path: &Path) -> Result<Self, DumpError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| corrupt(path, "empty file"))?;
        if header.trim() != COLUMNS.join(",") {
            return Err(corrupt(path, format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| corrupt(path, format!("line {}: {e}", k + 2)))?;
            let row: [f64; 8] = vals
                .try_into()
                .map_err(|_| corrupt(path, format!("line {}: expected 8 columns", k + 2)))?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(corrupt(path, "no data rows"));
        }
        // nodes are row-major, so x1 is constant along each grid row
        let n2 = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
        if rows.len() % n2 != 0 {
            return Err(corrupt(
                path,
                "row count is not a multiple of the grid row length",
            ));
        }
        let n1 = rows.len() / n2;
        let h1 = if n1 > 1 {
            rows[n2][0] - rows[0][0]
        } else {
            0.0
        };
        let h2 = if n2 > 1 { rows[1][1] - rows[0][1] } else { 0.0 };
        Ok(Self {
            n1,
            n2,
            periods: [h1 * n1 as f64, h2 * n2 as f64],
            rows,
        })
    }

    /// Whitespace-separated grid text, 12 significant digits, one blank
    /// line between grid rows.
    pub fn plot_text(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 160);
        s.push_str("# ");
        s.push_str(&COLUMNS.join(" "));
        s.push('\n');
        for (k, r) in self.rows.iter().enumerate() {
            if k > 0 && k % self.n2 == 0 {
                s.push('\n');
            }
            for (c, x) in r.iter().enumerate() {
                if c > 0 {
                    s.push(' ');
                }
                write!(s, "{x:.11e}").expect("write to string");
            }
            s.push('\n');
        }
        s
    }
}
