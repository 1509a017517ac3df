//! End-to-end workflow and on-disk artifact layout.
//!
//! An artifact directory holds:
//!
//! ```text
//! history.csv                 serving-link history under A3
//! mfs/rsrp.txt                FLHA-SON input membership functions
//! mfs/sinr.txt
//! mfs/distance.txt
//! mfs/ho_factor.txt           FLHA-SON output membership function
//! rules.txt                   FLHA-SON rule base
//! qtable.txt                  FLHA-SON Q-table
//! threshold.txt               FLHA-SON triggering threshold
//! flha-q/...                  same layout for FLHA-Q
//! expert/...                  same layout for the expert FLHA (no qtable.txt)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::cluster::{self, ClusteringParams, HistoryDataset};
use crate::fuzzy::{self, FuzzyError, InferenceEngine, InputMfs, MembershipFunction, Metric, RuleBase};
use crate::handover::{self, FlhaParams, MechanismKind, TriggerMechanism};
use crate::kpi::{self, KpiReport};
use crate::qlearn::{self, QTable};
use crate::scenario::ScenarioConfig;
use crate::sim::{self, RunOutput};
use crate::Result;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("missing artifact {0}")]
    Missing(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Malformed {
        path: PathBuf,
        #[source]
        source: FuzzyError,
    },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error("run {cell} failed: {reason}")]
    RunFailed { cell: String, reason: String },
}

pub const HISTORY_FILE: &str = "history.csv";
pub const RULES_FILE: &str = "rules.txt";
pub const QTABLE_FILE: &str = "qtable.txt";
pub const THRESHOLD_FILE: &str = "threshold.txt";
pub const MF_DIR: &str = "mfs";
const MF_FILES: [&str; 4] = ["rsrp.txt", "sinr.txt", "distance.txt", "ho_factor.txt"];

/// Everything an FLHA variant needs at run time, plus its Q-table if learned.
#[derive(Debug, Clone)]
pub struct FlhaArtifacts {
    pub inputs: InputMfs,
    pub output: MembershipFunction,
    pub rules: RuleBase,
    pub threshold: f64,
    pub qtable: Option<QTable>,
}

impl FlhaArtifacts {
    pub fn params(&self) -> Result<FlhaParams> {
        let engine = InferenceEngine::new(self.inputs.clone(), self.rules.clone(), self.output.clone())?;
        Ok(
            FlhaParams::new(engine, self.threshold).map_err(|e| ArtifactError::Invalid {
                path: PathBuf::from(THRESHOLD_FILE),
                reason: e.to_string(),
            })?,
        )
    }
}

/// Subdirectory of the artifact directory holding a mechanism's files.
pub fn mechanism_dir(root: &Path, kind: MechanismKind) -> Option<PathBuf> {
    match kind {
        MechanismKind::A3 => None,
        MechanismKind::FlhaSon => Some(root.to_path_buf()),
        MechanismKind::FlhaQ => Some(root.join("flha-q")),
        MechanismKind::FlhaExpert => Some(root.join("expert")),
    }
}

fn write(path: &Path, text: &str) -> std::result::Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ArtifactError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> std::result::Result<String, ArtifactError> {
    if !path.exists() {
        return Err(ArtifactError::Missing(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_mf(path: &Path, expected: Metric) -> std::result::Result<MembershipFunction, ArtifactError> {
    let mf = MembershipFunction::from_text(&read(path)?).map_err(|source| ArtifactError::Malformed {
        path: path.to_path_buf(),
        source,
    })?;
    if mf.metric != expected {
        return Err(ArtifactError::Invalid {
            path: path.to_path_buf(),
            reason: format!("expected metric {expected}, found {}", mf.metric),
        });
    }
    Ok(mf)
}

pub fn write_flha(dir: &Path, a: &FlhaArtifacts) -> Result<()> {
    let mfs = dir.join(MF_DIR);
    let texts = [
        a.inputs.rsrp.to_text(),
        a.inputs.sinr.to_text(),
        a.inputs.distance.to_text(),
        a.output.to_text(),
    ];
    for (name, text) in MF_FILES.iter().zip(texts) {
        write(&mfs.join(name), &text)?;
    }
    write(&dir.join(RULES_FILE), &a.rules.to_text())?;
    write(&dir.join(THRESHOLD_FILE), &format!("{}\n", a.threshold))?;
    if let Some(q) = &a.qtable {
        write(&dir.join(QTABLE_FILE), &q.to_text(Some(&a.rules)))?;
    }
    Ok(())
}

/// Loads membership functions, rules and threshold; the Q-table is not read back.
pub fn read_flha(dir: &Path) -> Result<FlhaArtifacts> {
    let mfs = dir.join(MF_DIR);
    let inputs = InputMfs {
        rsrp: read_mf(&mfs.join(MF_FILES[0]), Metric::Rsrp)?,
        sinr: read_mf(&mfs.join(MF_FILES[1]), Metric::Sinr)?,
        distance: read_mf(&mfs.join(MF_FILES[2]), Metric::Distance)?,
    };
    let output = read_mf(&mfs.join(MF_FILES[3]), Metric::HoFactor)?;
    let rules_path = dir.join(RULES_FILE);
    let rules = RuleBase::from_text(&read(&rules_path)?).map_err(|source| ArtifactError::Malformed {
        path: rules_path.clone(),
        source,
    })?;
    let threshold_path = dir.join(THRESHOLD_FILE);
    let threshold = fuzzy::parse_f64(&read(&threshold_path)?).map_err(|reason| ArtifactError::Invalid {
        path: threshold_path,
        reason,
    })?;
    Ok(FlhaArtifacts {
        inputs,
        output,
        rules,
        threshold,
        qtable: None,
    })
}

/// Three evenly spaced sets per input metric over the history bounds.
pub fn evenly_spaced_inputs(history: &HistoryDataset, params: &ClusteringParams) -> Result<InputMfs> {
    let mf = |i: usize| {
        MembershipFunction::evenly_spaced(
            Metric::INPUTS[i],
            3,
            params.set_width(),
            history.bounds[i],
            HistoryDataset::POLARITY[i],
        )
    };
    Ok(InputMfs {
        rsrp: mf(0)?,
        sinr: mf(1)?,
        distance: mf(2)?,
    })
}

/// Q-learning, rule extraction and threshold selection on fixed input MFs.
pub fn learn_rules(config: &ScenarioConfig, inputs: InputMfs, seed: u64) -> Result<FlhaArtifacts> {
    let params = ClusteringParams::from_config(config);
    let table = sim::train_q_table(config, &inputs, seed)?;
    let dq = qlearn::delta_q(&table);
    let (rules, output) = qlearn::extract_rules(&dq, &params)?;
    let threshold = qlearn::select_threshold(&dq, &inputs, &rules, &output)?;
    Ok(FlhaArtifacts {
        inputs,
        output,
        rules,
        threshold,
        qtable: Some(table),
    })
}

/// Clustered input MFs with learned rules.
pub fn train_son(config: &ScenarioConfig, history: &HistoryDataset, seed: u64) -> Result<FlhaArtifacts> {
    let inputs = cluster::configure_mfs(history, &ClusteringParams::from_config(config))?;
    learn_rules(config, inputs, seed)
}

/// Evenly spaced input MFs with learned rules.
pub fn train_flha_q(config: &ScenarioConfig, history: &HistoryDataset, seed: u64) -> Result<FlhaArtifacts> {
    let inputs = evenly_spaced_inputs(history, &ClusteringParams::from_config(config))?;
    learn_rules(config, inputs, seed)
}

pub const EXPERT_THRESHOLD: f64 = 0.5;

/// Evenly spaced input MFs, the fixed expert table and a five-set output.
pub fn expert(config: &ScenarioConfig, history: &HistoryDataset) -> Result<FlhaArtifacts> {
    let params = ClusteringParams::from_config(config);
    let inputs = evenly_spaced_inputs(history, &params)?;
    let output = MembershipFunction::evenly_spaced(
        Metric::HoFactor,
        5,
        params.set_width(),
        (0.0, 1.0),
        fuzzy::Polarity::Benefit,
    )?;
    Ok(FlhaArtifacts {
        inputs,
        output,
        rules: fuzzy::expert_rulebase(),
        threshold: EXPERT_THRESHOLD,
        qtable: None,
    })
}

/// Builds and writes all three FLHA variants under `out`.
pub fn train_all(config: &ScenarioConfig, history: &HistoryDataset, seed: u64, out: &Path) -> Result<()> {
    let son = train_son(config, history, seed)?;
    let q = train_flha_q(config, history, seed)?;
    let ex = expert(config, history)?;
    write_flha(out, &son)?;
    write_flha(&out.join("flha-q"), &q)?;
    write_flha(&out.join("expert"), &ex)?;
    Ok(())
}

pub fn load_mechanism(kind: MechanismKind, config: &ScenarioConfig, artifacts: &Path) -> Result<TriggerMechanism> {
    let Some(dir) = mechanism_dir(artifacts, kind) else {
        return Ok(sim::a3_baseline(config));
    };
    let params = read_flha(&dir)?.params()?;
    Ok(match kind {
        MechanismKind::FlhaSon => TriggerMechanism::FlhaSon(params),
        MechanismKind::FlhaQ => TriggerMechanism::FlhaQ(params),
        MechanismKind::FlhaExpert => TriggerMechanism::FlhaExpert(params),
        MechanismKind::A3 => unreachable!(),
    })
}

/// Writes the event log, link records and KPI files of one run.
pub fn write_run(out: &Path, run: &RunOutput) -> Result<()> {
    write(&out.join("events.csv"), &handover::events_to_csv(&run.events))?;
    write(&out.join("links.csv"), &kpi::links_to_csv(&run.links))?;
    write(&out.join("kpi_summary.csv"), &run.report.summary_csv())?;
    write(&out.join("kpi_series.csv"), &run.report.series_csv())?;
    Ok(())
}

/// One cell of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareCell {
    pub speed_kmh: f64,
    pub mechanism: MechanismKind,
    pub seed: u64,
    pub report: KpiReport,
}

/// Runs the full speed x mechanism x seed cross-product. Cells are returned
/// in that nesting order regardless of execution order.
pub fn compare_runs(
    config: &ScenarioConfig,
    speeds: &[f64],
    mechanisms: &[MechanismKind],
    seeds: &[u64],
    artifacts: &Path,
) -> Result<Vec<CompareCell>> {
    let loaded: Vec<(MechanismKind, TriggerMechanism)> = mechanisms
        .iter()
        .map(|&k| load_mechanism(k, config, artifacts).map(|m| (k, m)))
        .collect::<Result<_>>()?;
    let cells: Vec<(f64, usize, u64)> = speeds
        .iter()
        .flat_map(|&s| (0..loaded.len()).flat_map(move |m| seeds.iter().map(move |&seed| (s, m, seed))))
        .collect();
    cells
        .par_iter()
        .map(|&(speed, m, seed)| {
            let (kind, mechanism) = &loaded[m];
            let cfg = config.with_speed(speed);
            sim::run(&cfg, mechanism, seed)
                .map(|out| CompareCell {
                    speed_kmh: speed,
                    mechanism: *kind,
                    seed,
                    report: out.report,
                })
                .map_err(|e| {
                    ArtifactError::RunFailed {
                        cell: format!("speed {speed} km/h, mechanism {kind}, seed {seed}"),
                        reason: e.to_string(),
                    }
                    .into()
                })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Files written by [`write_comparison`], relative to its output directory.
pub const TABLE_FILES: [&str; 8] = [
    "ho_ratio_vs_speed.csv",
    "cumulative_hos_vs_time.csv",
    "pingpong_ratio_vs_speed.csv",
    "pingpong_vs_time.csv",
    "failure_ratio_vs_speed.csv",
    "failure_vs_time.csv",
    "sum_throughput.csv",
    "mean_latency.csv",
];

/// Writes `summary.csv`, `gains.csv` and the KPI tables.
///
/// Gains compare every mechanism against FLHA-SON (or the first mechanism
/// when FLHA-SON is absent) on the same speed and seed.
pub fn write_comparison(out: &Path, cells: &[CompareCell]) -> Result<()> {
    let mut speeds: Vec<f64> = Vec::new();
    let mut mechanisms: Vec<MechanismKind> = Vec::new();
    let mut seeds: Vec<u64> = Vec::new();
    for c in cells {
        if !speeds.contains(&c.speed_kmh) {
            speeds.push(c.speed_kmh);
        }
        if !mechanisms.contains(&c.mechanism) {
            mechanisms.push(c.mechanism);
        }
        if !seeds.contains(&c.seed) {
            seeds.push(c.seed);
        }
    }

    let mut summary = String::from(
        "speed_kmh,mechanism,seed,ho_ratio,pingpong_ratio,failure_ratio,sum_throughput_bps,mean_latency_s,handovers,pingpongs,failures,outage_samples\n",
    );
    for c in cells {
        let r = &c.report;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.speed_kmh,
            c.mechanism,
            c.seed,
            r.ho_ratio,
            r.pingpong_ratio,
            r.failure_ratio,
            r.sum_throughput_bps,
            fmt_opt(r.mean_latency_s),
            r.handovers,
            r.pingpongs,
            r.failures,
            r.outage_samples
        ));
    }
    write(&out.join("summary.csv"), &summary)?;

    let reference = if mechanisms.contains(&MechanismKind::FlhaSon) {
        MechanismKind::FlhaSon
    } else {
        mechanisms[0]
    };
    let find = |s: f64, m: MechanismKind, seed: u64| {
        cells
            .iter()
            .find(|c| c.speed_kmh == s && c.mechanism == m && c.seed == seed)
    };
    let g = |p: Option<f64>, c: Option<f64>| match (p, c) {
        (Some(p), Some(c)) => kpi::gain(p, c).map_or_else(|_| "undefined".to_string(), |v| v.to_string()),
        _ => "undefined".to_string(),
    };
    let mut gains = String::from(
        "speed_kmh,seed,mechanism,reference,ho_ratio_gain,pingpong_ratio_gain,failure_ratio_gain,throughput_gain,latency_gain\n",
    );
    for &s in &speeds {
        for &seed in &seeds {
            let Some(p) = find(s, reference, seed) else { continue };
            for &m in &mechanisms {
                let Some(c) = find(s, m, seed) else { continue };
                let (pr, cr) = (&p.report, &c.report);
                gains.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    s,
                    seed,
                    m,
                    reference,
                    g(Some(pr.ho_ratio), Some(cr.ho_ratio)),
                    g(Some(pr.pingpong_ratio), Some(cr.pingpong_ratio)),
                    g(Some(pr.failure_ratio), Some(cr.failure_ratio)),
                    g(Some(pr.sum_throughput_bps), Some(cr.sum_throughput_bps)),
                    g(pr.mean_latency_s, cr.mean_latency_s),
                ));
            }
        }
    }
    write(&out.join("gains.csv"), &gains)?;

    let header = |first: &str| {
        let mut h = first.to_string();
        for m in &mechanisms {
            h.push(',');
            h.push_str(m.as_str());
        }
        h.push('\n');
        h
    };
    let vs_speed = |f: &dyn Fn(&KpiReport) -> Option<f64>| {
        let mut text = header("speed_kmh");
        for &s in &speeds {
            text.push_str(&s.to_string());
            for &m in &mechanisms {
                let v = mean(
                    cells
                        .iter()
                        .filter(|c| c.speed_kmh == s && c.mechanism == m)
                        .filter_map(|c| f(&c.report)),
                );
                text.push(',');
                text.push_str(&fmt_opt(v));
            }
            text.push('\n');
        }
        text
    };
    let cumulative = |f: &dyn Fn(&kpi::StepKpi) -> usize| {
        let mut text = header("speed_kmh,step");
        for &s in &speeds {
            let columns: Vec<Vec<f64>> = mechanisms
                .iter()
                .map(|&m| {
                    let runs: Vec<&CompareCell> =
                        cells.iter().filter(|c| c.speed_kmh == s && c.mechanism == m).collect();
                    let len = runs.iter().map(|c| c.report.series.len()).max().unwrap_or(0);
                    let mut acc = vec![0.0; len];
                    for c in &runs {
                        let mut total = 0usize;
                        for (i, step) in c.report.series.iter().enumerate() {
                            total += f(step);
                            acc[i] += total as f64 / runs.len() as f64;
                        }
                    }
                    acc
                })
                .collect();
            let len = columns.iter().map(Vec::len).max().unwrap_or(0);
            for i in 0..len {
                text.push_str(&format!("{s},{i}"));
                for col in &columns {
                    text.push(',');
                    text.push_str(&col.get(i).map_or_else(String::new, |v| v.to_string()));
                }
                text.push('\n');
            }
        }
        text
    };

    let tables = [
        vs_speed(&|r| Some(r.ho_ratio)),
        cumulative(&|s| s.handovers),
        vs_speed(&|r| Some(r.pingpong_ratio)),
        cumulative(&|s| s.pingpongs),
        vs_speed(&|r| Some(r.failure_ratio)),
        cumulative(&|s| s.failures),
        vs_speed(&|r| Some(r.sum_throughput_bps)),
        vs_speed(&|r| r.mean_latency_s),
    ];
    for (name, text) in TABLE_FILES.iter().zip(tables) {
        write(&out.join(name), &text)?;
    }
    Ok(())
}
