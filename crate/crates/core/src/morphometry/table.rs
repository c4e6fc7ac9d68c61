use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::catalog::{metrics_catalog, CONSOLIDATED, SCALARS};
use super::{consolidate, BranchMetrics, ImageScalars, SegmentMetrics, CATALOG_VERSION};
use crate::error::{Error, Result};

/// One image's measurements, aligned with [`metrics_catalog`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetricsRow {
    pub image_id: String,
    pub values: Vec<Option<f64>>,
}

fn segment_value(s: &SegmentMetrics, name: &str) -> Option<f64> {
    let c = &s.curve;
    match name {
        "arc_length" => Some(c.arc_length),
        "chord_length" => Some(c.chord_length),
        "strahler" => Some(s.strahler as f64),
        "level" => Some(s.level as f64),
        "tortuosity" => c.tortuosity,
        "tortuosity_density" => c.tortuosity_density,
        "inflection_count" => Some(c.inflection_count as f64),
        "inflection_tortuosity" => c.inflection_tortuosity,
        "curve_angle" => Some(c.curve_angle),
        "curve_angle_tortuosity" => c.curve_angle_tortuosity,
        "angle_tortuosity" => c.angle_tortuosity,
        "fractal_tortuosity" => c.fractal_tortuosity,
        "mean_caliber" => Some(s.mean_caliber),
        "min_caliber" => Some(s.min_caliber),
        "max_caliber" => Some(s.max_caliber),
        "caliber_range" => Some(s.caliber_range),
        "surface_area" => Some(s.surface_area),
        "length_diameter_ratio" => s.length_diameter_ratio,
        "terminal_caliber" => s.terminal_caliber,
        _ => None,
    }
}

fn branch_value(b: &BranchMetrics, name: &str) -> Option<f64> {
    match name {
        "branching_angle" => Some(b.branching_angle),
        "angular_asymmetry" => Some(b.angular_asymmetry),
        "asymmetry_ratio" => b.asymmetry_ratio,
        _ => None,
    }
}

impl ImageMetricsRow {
    pub fn consolidate(
        image_id: &str,
        scalars: &ImageScalars,
        segments: &[SegmentMetrics],
        branches: &[BranchMetrics],
    ) -> Self {
        let mut values = vec![
            Some(scalars.vessel_area_density),
            Some(scalars.vessel_skeleton_density),
            Some(scalars.branching_density),
            scalars.fractal_dimension,
            Some(scalars.n_terminal_points as f64),
            Some(scalars.n_components as f64),
        ];
        debug_assert_eq!(values.len(), SCALARS.len());
        for &(base, family) in &CONSOLIDATED {
            let present: Vec<f64> = if family == super::Family::Branching {
                branches
                    .iter()
                    .filter_map(|b| branch_value(b, base))
                    .collect()
            } else {
                segments
                    .iter()
                    .filter_map(|s| segment_value(s, base))
                    .collect()
            };
            values.extend(consolidate(&present));
        }
        Self {
            image_id: image_id.to_string(),
            values,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let idx = metrics_catalog().iter().position(|e| e.name == name)?;
        self.values[idx]
    }
}

/// A set of rows sharing one catalog version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub catalog_version: String,
    pub columns: Vec<String>,
    pub rows: Vec<ImageMetricsRow>,
}

impl Default for MetricTable {
    fn default() -> Self {
        Self::new()
    }
}

impl MetricTable {
    pub fn new() -> Self {
        Self {
            catalog_version: CATALOG_VERSION.to_string(),
            columns: metrics_catalog().into_iter().map(|e| e.name).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["image_id".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.image_id.clone()];
            rec.extend(
                row.values
                    .iter()
                    .map(|v| v.map(|x| format!("{x}")).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("csv output", e))?;
        Ok(())
    }

    /// Reads any CSV with an `image_id` first column and numeric cells;
    /// empty cells are missing.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.get(0) != Some("image_id") {
            return Err(Error::Malformed(
                "metric table must start with an image_id column".into(),
            ));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut values = Vec::with_capacity(columns.len());
            for cell in rec.iter().skip(1) {
                let cell = cell.trim();
                values.push(if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse::<f64>().map_err(|_| {
                        Error::Malformed(format!("row {}: non-numeric cell {cell:?}", line + 2))
                    })?)
                });
            }
            rows.push(ImageMetricsRow {
                image_id: rec.get(0).unwrap_or_default().to_string(),
                values,
            });
        }
        let catalog_version = if columns == MetricTable::new().columns {
            CATALOG_VERSION.to_string()
        } else {
            "custom".to_string()
        };
        Ok(Self {
            catalog_version,
            columns,
            rows,
        })
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
