//! Scenario description, validation and topology construction.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, NoiseModel};
use crate::mobility::MobilityState;

/// A point in the simulation plane, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned simulation area anchored at the origin. Boundaries are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Macro,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BsId(pub usize);

impl fmt::Display for BsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: BsId,
    pub tier: Tier,
    pub position: Point,
    pub freq_ghz: f64,
    pub tx_dbm: f64,
    pub bw_mhz: f64,
}

/// Handover that has been triggered but not yet completed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingHandover {
    pub target: BsId,
    pub completion_step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEquipment {
    pub id: usize,
    pub position: Point,
    pub mobility: MobilityState,
    pub serving_bs: BsId,
    pub ho_in_progress: Option<PendingHandover>,
}

/// Full experiment description. Every field maps to one key of the flat
/// TOML config file; missing keys take the desk-scale default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub macro_count: usize,
    pub small_count: usize,
    /// Grid spacing between base stations; also the cell-edge distance used
    /// for propagation latency.
    pub bs_spacing_m: f64,

    pub macro_freq_ghz: f64,
    pub small_freq_ghz: f64,
    pub macro_tx_dbm: f64,
    pub small_tx_dbm: f64,
    pub macro_bw_mhz: f64,
    pub small_bw_mhz: f64,
    pub noise_figure_db: f64,
    pub rayleigh_fading: bool,

    pub ue_count: usize,
    pub ue_speed_kmh: f64,
    pub sim_duration_steps: u64,
    pub step_seconds: f64,
    /// Random-direction epoch: heading is redrawn every this many steps.
    pub mobility_epoch_steps: u32,

    pub ho_prep_ms: f64,
    pub ho_exec_ms: f64,
    pub pingpong_window_s: f64,
    pub a3_hom_db: f64,
    pub a3_ttt_ms: f64,
    /// Source SINR below which an ongoing handover fails as too late.
    /// Also the outage threshold for rate and latency accounting.
    pub outage_sinr_db: f64,
    /// Target SINR at completion below which a handover fails.
    pub ho_fail_sinr_db: f64,

    pub packet_bytes: f64,
    pub edge_latency_ms: f64,

    pub q_learning_rate: f64,
    pub q_discount: f64,
    pub q_epsilon_start: f64,
    pub q_epsilon_end: f64,
    pub q_epochs: usize,
    pub q_episode_steps: usize,
    /// Training transitions into a serving SINR below this are terminal.
    pub q_terminal_sinr_db: f64,

    pub cluster_alpha: f64,
    pub cluster_beta: f64,
    pub cluster_epsilon: f64,
    pub cluster_delta: f64,
    pub cluster_width_coefficient: f64,
    pub cluster_merge_tol: f64,

    pub history_min_samples: usize,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    /// Desk-scale scenario: 300 m x 300 m, 2 macro + 4 small cells, 10 UEs.
    fn default() -> Self {
        Self {
            area_width_m: 300.0,
            area_height_m: 300.0,
            macro_count: 2,
            small_count: 4,
            bs_spacing_m: 150.0,
            macro_freq_ghz: 2.0,
            small_freq_ghz: 28.0,
            macro_tx_dbm: 43.0,
            small_tx_dbm: 40.0,
            macro_bw_mhz: 20.0,
            small_bw_mhz: 100.0,
            noise_figure_db: 9.0,
            rayleigh_fading: true,
            ue_count: 10,
            ue_speed_kmh: 75.0,
            sim_duration_steps: 2000,
            step_seconds: 1.0,
            mobility_epoch_steps: 20,
            ho_prep_ms: 10.0,
            ho_exec_ms: 10.0,
            pingpong_window_s: 1.0,
            a3_hom_db: 2.0,
            a3_ttt_ms: 160.0,
            outage_sinr_db: -8.0,
            ho_fail_sinr_db: -6.0,
            packet_bytes: 1500.0,
            edge_latency_ms: 1.0,
            q_learning_rate: 0.1,
            q_discount: 0.9,
            q_epsilon_start: 0.5,
            q_epsilon_end: 0.05,
            q_epochs: 200,
            q_episode_steps: 200,
            q_terminal_sinr_db: -10.0,
            cluster_alpha: 16.0,
            cluster_beta: 12.0,
            cluster_epsilon: 0.005,
            cluster_delta: 8f64.sqrt(),
            cluster_width_coefficient: 0.5,
            cluster_merge_tol: 0.05,
            history_min_samples: 1000,
            rng_seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(
        "{count} small cells need a {cols}x{rows} grid at {spacing} m spacing, which does not fit a {width} m x {height} m area"
    )]
    GridDoesNotFit {
        count: usize,
        cols: usize,
        rows: usize,
        spacing: f64,
        width: f64,
        height: f64,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ScenarioConfig {
    /// Large-scale operating point: 1000 m x 1000 m, 2 macro + 16 small cells,
    /// 40 UEs, 10000 one-second steps.
    pub fn full_scale() -> Self {
        Self {
            area_width_m: 1000.0,
            area_height_m: 1000.0,
            small_count: 16,
            bs_spacing_m: 350.0,
            ue_count: 40,
            sim_duration_steps: 10_000,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config = Self::from_toml_str(&text)?;
        config.validated()
    }

    pub fn validated(self) -> Result<Self, ConfigError> {
        let violations = validate_config(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    pub fn area(&self) -> Area {
        Area {
            width: self.area_width_m,
            height: self.area_height_m,
        }
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            thermal_noise_dbm_per_hz: channel::THERMAL_NOISE_DBM_PER_HZ,
            noise_figure_db: self.noise_figure_db,
            rayleigh_enabled: self.rayleigh_fading,
        }
    }

    pub fn speed_mps(&self) -> f64 {
        self.ue_speed_kmh / 3.6
    }

    /// Time-to-trigger rounded up to whole steps, at least one.
    pub fn a3_ttt_steps(&self) -> usize {
        ((self.a3_ttt_ms / 1000.0 / self.step_seconds).ceil() as usize).max(1)
    }

    pub fn ho_latency_s(&self) -> f64 {
        (self.ho_prep_ms + self.ho_exec_ms) / 1000.0
    }

    pub fn with_speed(&self, speed_kmh: f64) -> Self {
        Self {
            ue_speed_kmh: speed_kmh,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }
}

/// Every violated invariant, in field order. Empty iff the config is usable.
pub fn validate_config(c: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut positive = |field: &'static str, value: f64| {
        if !(value > 0.0 && value.is_finite()) {
            out.push(Violation {
                field,
                message: format!("must be strictly positive, got {value}"),
            });
        }
    };
    positive("area_width_m", c.area_width_m);
    positive("area_height_m", c.area_height_m);
    positive("bs_spacing_m", c.bs_spacing_m);
    positive("macro_freq_ghz", c.macro_freq_ghz);
    positive("small_freq_ghz", c.small_freq_ghz);
    positive("macro_bw_mhz", c.macro_bw_mhz);
    positive("small_bw_mhz", c.small_bw_mhz);
    positive("ue_speed_kmh", c.ue_speed_kmh);
    positive("step_seconds", c.step_seconds);
    positive("ho_prep_ms", c.ho_prep_ms);
    positive("ho_exec_ms", c.ho_exec_ms);
    positive("pingpong_window_s", c.pingpong_window_s);
    positive("packet_bytes", c.packet_bytes);
    positive("edge_latency_ms", c.edge_latency_ms);
    positive("cluster_alpha", c.cluster_alpha);
    positive("cluster_beta", c.cluster_beta);
    positive("cluster_delta", c.cluster_delta);
    positive("cluster_width_coefficient", c.cluster_width_coefficient);

    let mut count = |field: &'static str, value: usize| {
        if value == 0 {
            out.push(Violation {
                field,
                message: "must be at least 1".into(),
            });
        }
    };
    count("ue_count", c.ue_count);
    count("mobility_epoch_steps", c.mobility_epoch_steps as usize);
    count("q_epochs", c.q_epochs);
    count("q_episode_steps", c.q_episode_steps);
    if c.sim_duration_steps == 0 {
        out.push(Violation {
            field: "sim_duration_steps",
            message: "must be at least 1".into(),
        });
    }

    if c.macro_count + c.small_count < 2 {
        out.push(Violation {
            field: "macro_count",
            message: format!(
                "macro_count + small_count must be at least 2 for a handover to be possible, got {}",
                c.macro_count + c.small_count
            ),
        });
    }
    if c.ho_prep_ms + c.ho_exec_ms >= c.step_seconds * 1000.0 {
        out.push(Violation {
            field: "ho_exec_ms",
            message: format!(
                "ho_prep_ms + ho_exec_ms ({} ms) must be shorter than one step ({} ms)",
                c.ho_prep_ms + c.ho_exec_ms,
                c.step_seconds * 1000.0
            ),
        });
    }
    if !(c.a3_hom_db >= 0.0) {
        out.push(Violation {
            field: "a3_hom_db",
            message: format!("must be non-negative, got {}", c.a3_hom_db),
        });
    }
    if !(c.a3_ttt_ms >= 0.0) {
        out.push(Violation {
            field: "a3_ttt_ms",
            message: format!("must be non-negative, got {}", c.a3_ttt_ms),
        });
    }
    for (field, value) in [("q_learning_rate", c.q_learning_rate), ("q_discount", c.q_discount)] {
        if !(value > 0.0 && value < 1.0) {
            out.push(Violation {
                field,
                message: format!("must lie in (0, 1), got {value}"),
            });
        }
    }
    for (field, value) in [
        ("q_epsilon_start", c.q_epsilon_start),
        ("q_epsilon_end", c.q_epsilon_end),
    ] {
        if !(0.0..=1.0).contains(&value) {
            out.push(Violation {
                field,
                message: format!("must lie in [0, 1], got {value}"),
            });
        }
    }
    if c.q_epsilon_start < c.q_epsilon_end {
        out.push(Violation {
            field: "q_epsilon_start",
            message: "must not be below q_epsilon_end".into(),
        });
    }
    if !(c.cluster_epsilon > 0.0 && c.cluster_epsilon < 1.0) {
        out.push(Violation {
            field: "cluster_epsilon",
            message: format!("rejection ratio must lie in (0, 1), got {}", c.cluster_epsilon),
        });
    }
    if !(0.0..=1.0).contains(&c.cluster_merge_tol) {
        out.push(Violation {
            field: "cluster_merge_tol",
            message: format!("must lie in [0, 1], got {}", c.cluster_merge_tol),
        });
    }
    out
}

/// Places base stations and UEs.
///
/// Small cells sit on a centred square lattice with `bs_spacing_m` pitch
/// (shrunk by at most 10% when the lattice would overhang the area). The
/// area is split into `macro_count` vertical strips and each macro sits at
/// the centroid of the small cells in its strip; if that centroid lands on a
/// small cell the macro moves one pitch sideways. UEs are uniform over the
/// area and attach to the BS with the highest fading-free SINR.
pub fn build_topology<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<(Vec<BaseStation>, Vec<UserEquipment>), ConfigError> {
    let config = config.clone().validated()?;
    let area = config.area();
    let small_sites = small_cell_lattice(&config)?;
    let pitch = small_sites.pitch;

    let mut stations = Vec::with_capacity(config.macro_count + config.small_count);
    let strip = area.width / config.macro_count.max(1) as f64;
    for i in 0..config.macro_count {
        let lo = i as f64 * strip;
        let hi = lo + strip;
        let last = i + 1 == config.macro_count;
        let members: Vec<&Point> = small_sites
            .points
            .iter()
            .filter(|p| p.x >= lo && (p.x < hi || (last && p.x <= hi)))
            .collect();
        let mut pos = if members.is_empty() {
            Point::new(lo + strip / 2.0, area.height / 2.0)
        } else {
            let n = members.len() as f64;
            Point::new(
                members.iter().map(|p| p.x).sum::<f64>() / n,
                members.iter().map(|p| p.y).sum::<f64>() / n,
            )
        };
        if small_sites.points.iter().any(|p| p.distance(&pos) < 1e-6) {
            pos.x = if pos.x + pitch <= area.width {
                pos.x + pitch
            } else {
                pos.x - pitch
            };
        }
        stations.push(BaseStation {
            id: BsId(stations.len()),
            tier: Tier::Macro,
            position: pos,
            freq_ghz: config.macro_freq_ghz,
            tx_dbm: config.macro_tx_dbm,
            bw_mhz: config.macro_bw_mhz,
        });
    }
    for p in &small_sites.points {
        stations.push(BaseStation {
            id: BsId(stations.len()),
            tier: Tier::Small,
            position: *p,
            freq_ghz: config.small_freq_ghz,
            tx_dbm: config.small_tx_dbm,
            bw_mhz: config.small_bw_mhz,
        });
    }

    let mut noise = config.noise_model();
    noise.rayleigh_enabled = false;
    let speed = config.speed_mps();
    let ues = (0..config.ue_count)
        .map(|id| {
            let position = Point::new(rng.random_range(0.0..=area.width), rng.random_range(0.0..=area.height));
            let heading = rng.random_range(0.0..std::f64::consts::TAU);
            let links = channel::measure(position, &stations, &noise, rng);
            UserEquipment {
                id,
                position,
                mobility: MobilityState::new(heading, speed, config.mobility_epoch_steps),
                serving_bs: channel::best_by_sinr(&links).expect("at least two stations"),
                ho_in_progress: None,
            }
        })
        .collect();
    Ok((stations, ues))
}

struct Lattice {
    points: Vec<Point>,
    pitch: f64,
}

fn small_cell_lattice(config: &ScenarioConfig) -> Result<Lattice, ConfigError> {
    let n = config.small_count;
    let (w, h) = (config.area_width_m, config.area_height_m);
    if n == 0 {
        return Ok(Lattice {
            points: Vec::new(),
            pitch: config.bs_spacing_m,
        });
    }
    let cols = ((n as f64 * w / h).sqrt().ceil() as usize).clamp(1, n);
    let rows = n.div_ceil(cols);
    let mut pitch = config.bs_spacing_m;
    if cols > 1 {
        pitch = pitch.min(w / (cols - 1) as f64);
    }
    if rows > 1 {
        pitch = pitch.min(h / (rows - 1) as f64);
    }
    if pitch < 0.9 * config.bs_spacing_m {
        return Err(ConfigError::GridDoesNotFit {
            count: n,
            cols,
            rows,
            spacing: config.bs_spacing_m,
            width: w,
            height: h,
        });
    }
    let x0 = (w - (cols - 1) as f64 * pitch) / 2.0;
    let y0 = (h - (rows - 1) as f64 * pitch) / 2.0;
    let points = (0..n)
        .map(|i| Point::new(x0 + (i % cols) as f64 * pitch, y0 + (i / cols) as f64 * pitch))
        .collect();
    Ok(Lattice { points, pitch })
}
