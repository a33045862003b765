//! Areal roughness parameters of gridded height maps.
//!
//! Heights and pitches are in µm. Each pixel is a midpoint-rule cell of area
//! `dx·dy`, so every areal integral becomes a pixel mean.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    rows: usize,
    cols: usize,
    /// Row-major heights, µm.
    heights: Vec<f64>,
    dx: f64,
    dy: f64,
    leveled: bool,
}

impl HeightMap {
    pub fn new(rows: usize, cols: usize, heights: Vec<f64>, dx: f64, dy: f64) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(invalid("height_map", format!("need at least 2x2 cells (got {rows}x{cols})")));
        }
        if heights.len() != rows * cols {
            return Err(invalid(
                "height_map",
                format!("{} heights for a {rows}x{cols} grid", heights.len()),
            ));
        }
        if !(dx > 0.0 && dx.is_finite()) || !(dy > 0.0 && dy.is_finite()) {
            return Err(invalid("pitch", format!("dx and dy must be > 0 (got {dx}, {dy})")));
        }
        if let Some(k) = heights.iter().position(|z| !z.is_finite()) {
            return Err(invalid(
                "height_map",
                format!("non-finite height at row {}, column {}", k / cols + 1, k % cols + 1),
            ));
        }
        Ok(Self {
            rows,
            cols,
            heights,
            dx,
            dy,
            leveled: false,
        })
    }

    /// Builds a map from `f(x, y)` sampled at pixel centers.
    pub fn from_fn(rows: usize, cols: usize, dx: f64, dy: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut z = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                z.push(f((j as f64 + 0.5) * dx, (i as f64 + 0.5) * dy));
            }
        }
        Self::new(rows, cols, z, dx, dy)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    /// `rows·cols·dx·dy`, µm².
    pub fn area(&self) -> f64 {
        self.rows as f64 * self.cols as f64 * self.dx * self.dy
    }

    pub fn is_leveled(&self) -> bool {
        self.leveled
    }

    /// Marks data that was already leveled upstream, e.g. by the instrument.
    pub fn assume_leveled(mut self) -> Self {
        self.leveled = true;
        self
    }

    /// Multiplies every height by `c`, keeping the leveled flag.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.heights.iter_mut().for_each(|z| *z *= c);
        m
    }
}

fn parse_error(source: &str, row: usize, col: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        row,
        col,
        reason: reason.into(),
    }
}

/// Reads a headerless numeric CSV grid. Rows and columns in errors are
/// 1-based.
pub fn read_height_map<R: Read>(r: R, source_name: &str, dx: f64, dy: f64) -> Result<HeightMap> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut cols = 0;
    let mut rows = 0;
    let mut z = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| parse_error(source_name, row, 0, e.to_string()))?;
        if rec.iter().all(|s| s.is_empty()) {
            continue;
        }
        if rows == 0 {
            cols = rec.len();
        } else if rec.len() != cols {
            return Err(parse_error(
                source_name,
                row,
                rec.len().min(cols) + 1,
                format!("row has {} values, expected {cols}", rec.len()),
            ));
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(source_name, row, j + 1, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(source_name, row, j + 1, format!("non-finite value {cell:?}")));
            }
            z.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_error(source_name, 1, 1, "empty height map"));
    }
    HeightMap::new(rows, cols, z, dx, dy)
}

pub fn load_height_map(path: &Path, dx: f64, dy: f64) -> Result<HeightMap> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    read_height_map(std::io::BufReader::new(f), &path.display().to_string(), dx, dy)
}

/// Subtracts the least-squares plane `a + b·x + c·y`.
///
/// On a full rectangular grid the centered coordinates are orthogonal to each
/// other and to the constant, so the three coefficients decouple.
pub fn level_mean_plane(map: &HeightMap) -> HeightMap {
    let (rows, cols) = (map.rows, map.cols);
    let xc = |j: usize| (j as f64 - (cols as f64 - 1.0) / 2.0) * map.dx;
    let yc = |i: usize| (i as f64 - (rows as f64 - 1.0) / 2.0) * map.dy;
    let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..rows {
        for j in 0..cols {
            let z = map.get(i, j);
            s += z;
            sx += xc(j) * z;
            sy += yc(i) * z;
        }
    }
    let sxx: f64 = (0..cols).map(|j| xc(j) * xc(j)).sum::<f64>() * rows as f64;
    let syy: f64 = (0..rows).map(|i| yc(i) * yc(i)).sum::<f64>() * cols as f64;
    let a = s / (rows * cols) as f64;
    let (b, c) = (sx / sxx, sy / syy);
    let mut out = map.clone();
    for i in 0..rows {
        for j in 0..cols {
            out.heights[i * cols + j] -= a + b * xc(j) + c * yc(i);
        }
    }
    out.leveled = true;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArealParams {
    #[serde(rename = "Sa")]
    pub sa: f64,
    #[serde(rename = "Sq")]
    pub sq: f64,
    #[serde(rename = "Sz")]
    pub sz: f64,
    #[serde(rename = "Sp")]
    pub sp: f64,
    #[serde(rename = "Sv")]
    pub sv: f64,
    /// `None` when `Sq = 0`.
    #[serde(rename = "Ssk")]
    pub ssk: Option<f64>,
    #[serde(rename = "Sku")]
    pub sku: Option<f64>,
    /// µm²
    pub area_size: f64,
}

/// Areal parameters of a leveled map. `Sz` is `Sp + Sv`, the peak-to-pit
/// height.
pub fn areal_params(map: &HeightMap) -> Result<ArealParams> {
    if !map.leveled {
        return Err(Error::NotLeveled);
    }
    let area = map.area();
    let cell = map.dx * map.dy;
    let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for &z in &map.heights {
        let z2 = z * z;
        s1 += z.abs();
        s2 += z2;
        s3 += z2 * z;
        s4 += z2 * z2;
        hi = hi.max(z);
        lo = lo.min(z);
    }
    let sa = s1 * cell / area;
    let sq = (s2 * cell / area).sqrt();
    let (ssk, sku) = if sq > 0.0 {
        (
            Some(s3 * cell / area / sq.powi(3)),
            Some(s4 * cell / area / sq.powi(4)),
        )
    } else {
        (None, None)
    };
    // Sp and Sv are distances from the mean plane and never negative, even
    // when every height sits on one side of it.
    let sp = hi.max(0.0);
    let sv = (-lo).max(0.0);
    Ok(ArealParams {
        sa,
        sq,
        sz: sp + sv,
        sp,
        sv,
        ssk,
        sku,
        area_size: area,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    #[serde(flatten)]
    pub params: ArealParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughnessReport {
    pub samples: Vec<SampleReport>,
    #[serde(rename = "mean_Sa")]
    pub mean_sa: f64,
    /// Common sample area in µm², or `None` when the samples differ in size.
    pub area_size: Option<f64>,
}

/// Per-sample parameters plus the across-sample mean `Sa`. Labels are optional
/// metadata such as a grit size.
pub fn roughness_report(samples: &[(Option<String>, HeightMap)]) -> Result<RoughnessReport> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let rows = samples
        .iter()
        .map(|(label, m)| {
            Ok(SampleReport {
                label: label.clone(),
                params: areal_params(m)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_sa = rows.iter().map(|r| r.params.sa).sum::<f64>() / rows.len() as f64;
    let a0 = rows[0].params.area_size;
    let area_size = rows.iter().all(|r| r.params.area_size == a0).then_some(a0);
    Ok(RoughnessReport {
        samples: rows,
        mean_sa,
        area_size,
    })
}
