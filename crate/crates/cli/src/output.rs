//! Output staging and the comma-separated file formats.
//!
//! Commands render every file into memory first and commit them together,
//! each through a temporary file renamed into place, so a failing command
//! leaves no output behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use concentration::features::{FeatureVector, Histogram2D};
use concentration::keypoint_io::Label;
use concentration::mixture_fit::Histogram1D;

#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: impl Into<Vec<u8>>) {
        self.files.push((path.into(), contents.into()));
    }

    pub fn commit(self, out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (rel, bytes) in self.files {
            let path = out_dir.join(rel);
            let dir = path.parent().unwrap_or(out_dir);
            std::fs::create_dir_all(dir)?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(&bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(&path).map_err(|e| e.error)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub const FEATURE_HEADER: &str =
    "window_index,t_seconds,sigma_top_x,sigma_top_y,sigma_mid_x,sigma_mid_y,label";
pub const RECOGNITION_HEADER: &str = "window_index,t_seconds,s_r";
pub const SERIES_HEADER: &str = "window_index,t_seconds,s_r,s_e";

fn label_field(label: Option<Label>) -> String {
    label.map_or_else(String::new, |l| l.as_u8().to_string())
}

pub fn features_csv<'a>(rows: impl IntoIterator<Item = &'a FeatureVector>) -> String {
    let mut out = format!("{FEATURE_HEADER}\n");
    for v in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            v.window_index,
            v.t_seconds,
            v.sigma_top_x,
            v.sigma_top_y,
            v.sigma_mid_x,
            v.sigma_mid_y,
            label_field(v.label)
        ));
    }
    out
}

/// One row of a recognition or estimation file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub window_index: usize,
    pub t_seconds: f64,
    pub s_r: f64,
    pub s_e: Option<f64>,
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let estimated = rows.first().is_none_or(|r| r.s_e.is_some());
    let mut out = format!(
        "{}\n",
        if estimated {
            SERIES_HEADER
        } else {
            RECOGNITION_HEADER
        }
    );
    for r in rows {
        match r.s_e {
            Some(s_e) => out.push_str(&format!(
                "{},{},{},{}\n",
                r.window_index, r.t_seconds, r.s_r, s_e
            )),
            None => out.push_str(&format!("{},{},{}\n", r.window_index, r.t_seconds, r.s_r)),
        }
    }
    out
}

pub fn histogram_csv(hist: &Histogram1D) -> String {
    let mut out = String::from("bin_start,bin_end,count\n");
    for (w, c) in hist.edges().windows(2).zip(hist.counts()) {
        out.push_str(&format!("{},{},{}\n", w[0], w[1], c));
    }
    out
}

pub fn grid_csv(hist: &Histogram2D) -> String {
    let mut out = String::new();
    for row in hist.rows() {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("x,fitted\n");
    for (x, y) in points {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

#[derive(Debug, serde::Deserialize)]
struct FeatureRecord {
    window_index: usize,
    t_seconds: f64,
    sigma_top_x: f64,
    sigma_top_y: f64,
    sigma_mid_x: f64,
    sigma_mid_y: f64,
    label: Option<u8>,
}

pub fn read_features(path: &Path) -> anyhow::Result<Vec<FeatureVector>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<FeatureRecord>().enumerate() {
        let r = rec.map_err(|e| anyhow::anyhow!("{}: row {}: {e}", path.display(), i + 2))?;
        let label = match r.label {
            None => None,
            Some(v) => Some(Label::from_u8(v).ok_or_else(|| {
                anyhow::anyhow!("{}: row {}: label must be 0 or 1", path.display(), i + 2)
            })?),
        };
        out.push(FeatureVector {
            window_index: r.window_index,
            t_seconds: r.t_seconds,
            sigma_top_x: r.sigma_top_x,
            sigma_top_y: r.sigma_top_y,
            sigma_mid_x: r.sigma_mid_x,
            sigma_mid_y: r.sigma_mid_y,
            label,
        });
    }
    Ok(out)
}

#[derive(Debug, serde::Deserialize)]
struct SeriesRecord {
    window_index: usize,
    t_seconds: f64,
    s_r: f64,
    s_e: Option<f64>,
}

pub fn read_series(path: &Path) -> anyhow::Result<Vec<SeriesRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize::<SeriesRecord>()
        .enumerate()
        .map(|(i, rec)| {
            let r = rec.map_err(|e| anyhow::anyhow!("{}: row {}: {e}", path.display(), i + 2))?;
            Ok(SeriesRow {
                window_index: r.window_index,
                t_seconds: r.t_seconds,
                s_r: r.s_r,
                s_e: r.s_e,
            })
        })
        .collect()
}
