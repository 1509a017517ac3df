//! Subtractive clustering and membership-function self-configuration.
//!
//! Potentials are `P_i = sum_{k != i} exp(-alpha |x_i - x_k|^2)`. The highest
//! potential point becomes a centre, every potential is reduced by
//! `P_c exp(-beta |x_i - x_c|^2)`, and selection repeats while the next
//! candidate keeps more than `epsilon` of the first centre's potential.

use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::fuzzy::{FuzzyError, InputMfs, Label, MembershipFunction, Metric, Polarity};
use crate::scenario::ScenarioConfig;

/// Largest number of sets a membership function can carry (the label ladder).
pub const MAX_SETS: usize = 5;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty dataset")]
    EmptyInput,
    #[error("invalid clustering parameters: {0}")]
    InvalidParams(String),
    #[error("{metric}: clustering found {found} distinct centre(s), at least 2 are needed; lower cluster_epsilon or collect more varied history")]
    TooFewCenters { metric: Metric, found: usize },
    #[error(transparent)]
    Membership(#[from] FuzzyError),
    #[error("history file: {0}")]
    Io(#[from] std::io::Error),
    #[error("history file: {0}")]
    Csv(#[from] csv::Error),
    #[error("history file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteringParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_reject: f64,
    /// Divisor of the normalised range in the set width.
    pub delta: f64,
    /// Multiplier of the normalised range in the set width.
    pub width_coefficient: f64,
    pub merge_tol: f64,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            alpha: 16.0,
            beta: 12.0,
            epsilon_reject: 0.005,
            delta: 8f64.sqrt(),
            width_coefficient: 0.5,
            merge_tol: 0.05,
        }
    }
}

impl ClusteringParams {
    pub fn from_config(c: &ScenarioConfig) -> Self {
        Self {
            alpha: c.cluster_alpha,
            beta: c.cluster_beta,
            epsilon_reject: c.cluster_epsilon,
            delta: c.cluster_delta,
            width_coefficient: c.cluster_width_coefficient,
            merge_tol: c.cluster_merge_tol,
        }
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        let bad = |what: &str| Err(ClusterError::InvalidParams(what.to_string()));
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if !(self.epsilon_reject > 0.0 && self.epsilon_reject < 1.0) {
            return bad("epsilon_reject must lie in (0, 1)");
        }
        if !(self.delta > 0.0 && self.width_coefficient > 0.0) {
            return bad("delta and width_coefficient must be positive");
        }
        if !(0.0..=1.0).contains(&self.merge_tol) {
            return bad("merge_tol must lie in [0, 1]");
        }
        Ok(())
    }

    /// Width of every set on the normalised `[0, 1]` range.
    pub fn set_width(&self) -> f64 {
        self.width_coefficient / self.delta
    }
}

/// A selected cluster centre: the input point, its index and its potential
/// at selection time.
#[derive(Debug, Clone, PartialEq)]
pub struct Center {
    pub index: usize,
    pub point: Vec<f64>,
    pub potential: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn potentials<P: AsRef<[f64]> + Sync>(points: &[P], alpha: f64) -> Vec<f64> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, xi)| {
            let xi = xi.as_ref();
            let mut p = 0.0;
            for (k, xk) in points.iter().enumerate() {
                if k != i {
                    p += (-alpha * squared_distance(xi, xk.as_ref())).exp();
                }
            }
            p
        })
        .collect()
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Centres in selection order.
pub fn subtractive_cluster<P: AsRef<[f64]> + Sync>(
    points: &[P],
    params: &ClusteringParams,
) -> Result<Vec<Center>, ClusterError> {
    params.validate()?;
    if points.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    let mut pot = potentials(points, params.alpha);
    let first = argmax(&pot);
    let p1 = pot[first];
    let mut centers = Vec::new();
    let mut k = first;
    loop {
        let pk = pot[k];
        let xk = points[k].as_ref();
        centers.push(Center {
            index: k,
            point: xk.to_vec(),
            potential: pk,
        });
        if centers.len() == points.len() {
            break;
        }
        for (pi, xi) in pot.iter_mut().zip(points) {
            *pi -= pk * (-params.beta * squared_distance(xi.as_ref(), xk)).exp();
        }
        k = argmax(&pot);
        if !(pot[k] > params.epsilon_reject * p1) {
            break;
        }
    }
    Ok(centers)
}

/// Sorted coordinates of the centres along `dim`, with the closest adjacent
/// pair repeatedly replaced by its mean while its gap is below `merge_tol`.
pub fn project_centers(centers: &[Center], dim: usize, merge_tol: f64) -> Vec<f64> {
    let mut values: Vec<f64> = centers.iter().map(|c| c.point[dim]).collect();
    values.sort_by(f64::total_cmp);
    while let Some((i, gap)) = closest_pair(&values) {
        if gap >= merge_tol {
            break;
        }
        merge_at(&mut values, i);
    }
    values
}

fn closest_pair(values: &[f64]) -> Option<(usize, f64)> {
    values
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, w[1] - w[0]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn merge_at(values: &mut Vec<f64>, i: usize) {
    values[i] = 0.5 * (values[i] + values[i + 1]);
    values.remove(i + 1);
}

/// Merges closest adjacent pairs until at most `max_sets` values remain.
pub fn limit_sets(mut values: Vec<f64>, max_sets: usize) -> Vec<f64> {
    while values.len() > max_sets.max(1) {
        let (i, _) = closest_pair(&values).expect("at least two values");
        merge_at(&mut values, i);
    }
    values
}

pub fn build_mf(
    centers_1d: &[f64],
    bounds: (f64, f64),
    metric: Metric,
    polarity: Polarity,
    params: &ClusteringParams,
) -> Result<MembershipFunction, ClusterError> {
    if centers_1d.len() < 2 {
        return Err(ClusterError::TooFewCenters {
            metric,
            found: centers_1d.len(),
        });
    }
    Label::ladder(centers_1d.len())?;
    Ok(MembershipFunction::from_centers(
        metric,
        centers_1d,
        params.set_width(),
        bounds,
        polarity,
    )?)
}

/// Clusters the normalised history and builds one membership function per metric.
pub fn configure_mfs(dataset: &HistoryDataset, params: &ClusteringParams) -> Result<InputMfs, ClusterError> {
    for (i, &(lo, hi)) in dataset.bounds.iter().enumerate() {
        if !(lo < hi) {
            return Err(FuzzyError::DegenerateBounds {
                metric: Metric::INPUTS[i],
                min: lo,
                max: hi,
            }
            .into());
        }
    }
    let centers = subtractive_cluster(&dataset.normalized, params)?;
    let mf = |dim: usize| {
        let projected = limit_sets(project_centers(&centers, dim, params.merge_tol), MAX_SETS);
        build_mf(
            &projected,
            dataset.bounds[dim],
            Metric::INPUTS[dim],
            HistoryDataset::POLARITY[dim],
            params,
        )
    };
    Ok(InputMfs {
        rsrp: mf(0)?,
        sinr: mf(1)?,
        distance: mf(2)?,
    })
}

/// Serving-link measurement history: raw triples, their min/max bounds and
/// the normalised triples used for clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryDataset {
    /// `(rsrp_dbm, sinr_db, distance_m)` per sample.
    pub raw: Vec<[f64; 3]>,
    pub bounds: [(f64, f64); 3],
    pub normalized: Vec<[f64; 3]>,
}

const RAW_COLUMNS: [&str; 3] = ["rsrp_dbm", "sinr_db", "distance_m"];
const HEADER: [&str; 6] = [
    "rsrp_dbm",
    "sinr_db",
    "distance_m",
    "rsrp_norm",
    "sinr_norm",
    "distance_norm",
];

impl HistoryDataset {
    pub const POLARITY: [Polarity; 3] = [Polarity::Benefit, Polarity::Benefit, Polarity::Cost];

    /// Normalises against the observed per-column min/max. A constant column
    /// normalises to 0 and is reported with a warning.
    pub fn from_raw(raw: Vec<[f64; 3]>) -> Result<Self, ClusterError> {
        if raw.is_empty() {
            return Err(ClusterError::EmptyInput);
        }
        let mut bounds = [(f64::INFINITY, f64::NEG_INFINITY); 3];
        for row in &raw {
            for (b, &v) in bounds.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        Self::with_bounds(raw, bounds)
    }

    pub fn with_bounds(raw: Vec<[f64; 3]>, bounds: [(f64, f64); 3]) -> Result<Self, ClusterError> {
        if raw.is_empty() {
            return Err(ClusterError::EmptyInput);
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            let span = hi - lo;
            if !(span > 1e-9 * lo.abs().max(hi.abs()).max(1.0)) {
                warn!(
                    "history column {} is (near-)constant over {} samples; clustering will find a single centre",
                    RAW_COLUMNS[i],
                    raw.len()
                );
            }
        }
        let normalized = raw
            .iter()
            .map(|row| {
                let mut out = [0.0; 3];
                for i in 0..3 {
                    out[i] = normalize_value(row[i], bounds[i], Self::POLARITY[i]);
                }
                out
            })
            .collect();
        Ok(Self {
            raw,
            bounds,
            normalized,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ClusterError> {
        let mut text = String::new();
        for (name, (lo, hi)) in RAW_COLUMNS.iter().zip(self.bounds) {
            text.push_str(&format!("# bounds {name}: {lo},{hi}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for (raw, norm) in self.raw.iter().zip(&self.normalized) {
            w.write_record(raw.iter().chain(norm).map(|v| v.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| ClusterError::Io(e.into_error()))?;
        text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        fs::write(path, text)?;
        Ok(())
    }

    /// Reads raw columns and bounds; normalised columns are recomputed.
    pub fn read_csv(path: &Path) -> Result<Self, ClusterError> {
        let text = fs::read_to_string(path)?;
        let mut bounds = [None; 3];
        for line in text.lines().filter_map(|l| l.strip_prefix("# bounds ")) {
            let (name, value) = line
                .split_once(':')
                .ok_or_else(|| ClusterError::Format(format!("malformed bounds line {line:?}")))?;
            let i = RAW_COLUMNS
                .iter()
                .position(|c| *c == name.trim())
                .ok_or_else(|| ClusterError::Format(format!("unknown bounds column {name:?}")))?;
            let (lo, hi) = value
                .split_once(',')
                .ok_or_else(|| ClusterError::Format(format!("malformed bounds line {line:?}")))?;
            let num = |s: &str| crate::fuzzy::parse_f64(s).map_err(ClusterError::Format);
            bounds[i] = Some((num(lo)?, num(hi)?));
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().take(3).ne(RAW_COLUMNS) {
            return Err(ClusterError::Format(format!(
                "expected columns starting with {}, got {:?}",
                RAW_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut raw = Vec::new();
        for record in reader.records() {
            let record = record?;
            let mut row = [0.0; 3];
            for (i, v) in row.iter_mut().enumerate() {
                *v = crate::fuzzy::parse_f64(&record[i]).map_err(ClusterError::Format)?;
            }
            raw.push(row);
        }
        match bounds {
            [Some(a), Some(b), Some(c)] => Self::with_bounds(raw, [a, b, c]),
            _ => Self::from_raw(raw),
        }
    }
}

fn normalize_value(raw: f64, (lo, hi): (f64, f64), polarity: Polarity) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let t = ((raw - lo) / (hi - lo)).clamp(0.0, 1.0);
    match polarity {
        Polarity::Benefit => t,
        Polarity::Cost => 1.0 - t,
    }
}
