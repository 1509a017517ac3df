//! Handover triggering mechanisms and handover outcome bookkeeping.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::channel::LinkMeasurement;
use crate::fuzzy::{FuzzyError, InferenceEngine};
use crate::qlearn::FuzzyState;
use crate::scenario::BsId;

#[derive(Debug, Error, PartialEq)]
pub enum HandoverError {
    #[error("no neighbouring station to hand over to")]
    NoTarget,
    #[error("FLHA threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
    #[error("A3 parameters need hom_db >= 0 and ttt_steps >= 1")]
    A3Params,
    #[error("event log line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Membership functions, rules and output set of an FLHA variant together
/// with its triggering threshold.
#[derive(Debug, Clone)]
pub struct FlhaParams {
    pub engine: InferenceEngine,
    pub threshold: f64,
}

impl FlhaParams {
    pub fn new(engine: InferenceEngine, threshold: f64) -> Result<Self, HandoverError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(HandoverError::Threshold(threshold));
        }
        Ok(Self { engine, threshold })
    }
}

#[derive(Debug, Clone)]
pub enum TriggerMechanism {
    A3Rsrp { hom_db: f64, ttt_steps: usize },
    FlhaExpert(FlhaParams),
    FlhaQ(FlhaParams),
    FlhaSon(FlhaParams),
}

impl TriggerMechanism {
    pub fn a3(hom_db: f64, ttt_steps: usize) -> Result<Self, HandoverError> {
        if !(hom_db >= 0.0) || ttt_steps == 0 {
            return Err(HandoverError::A3Params);
        }
        Ok(Self::A3Rsrp { hom_db, ttt_steps })
    }

    pub fn kind(&self) -> MechanismKind {
        match self {
            Self::A3Rsrp { .. } => MechanismKind::A3,
            Self::FlhaExpert(_) => MechanismKind::FlhaExpert,
            Self::FlhaQ(_) => MechanismKind::FlhaQ,
            Self::FlhaSon(_) => MechanismKind::FlhaSon,
        }
    }

    pub fn flha(&self) -> Option<&FlhaParams> {
        match self {
            Self::A3Rsrp { .. } => None,
            Self::FlhaExpert(p) | Self::FlhaQ(p) | Self::FlhaSon(p) => Some(p),
        }
    }
}

/// Mechanism identifier as used on the command line and in output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MechanismKind {
    A3,
    FlhaExpert,
    FlhaQ,
    FlhaSon,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] = [Self::A3, Self::FlhaExpert, Self::FlhaQ, Self::FlhaSon];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::A3 => "a3",
            Self::FlhaExpert => "flha-expert",
            Self::FlhaQ => "flha-q",
            Self::FlhaSon => "flha-son",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| format!("unknown mechanism {s:?} (expected a3, flha-expert, flha-q or flha-son)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Trigger(BsId),
    Maintain,
}

/// One step of A3 input: serving RSRP and the strongest neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A3Sample {
    pub serving_rsrp_dbm: f64,
    pub neighbour_rsrp_dbm: f64,
    pub neighbour: BsId,
}

/// Triggers when the entry condition `neighbour > serving + hom` held on
/// each of the last `ttt_steps` samples; the target is the latest strongest
/// neighbour.
pub fn a3_decide(history: &[A3Sample], hom_db: f64, ttt_steps: usize) -> Decision {
    if ttt_steps == 0 || history.len() < ttt_steps {
        return Decision::Maintain;
    }
    let window = &history[history.len() - ttt_steps..];
    if window
        .iter()
        .all(|s| s.neighbour_rsrp_dbm > s.serving_rsrp_dbm + hom_db)
    {
        Decision::Trigger(window[ttt_steps - 1].neighbour)
    } else {
        Decision::Maintain
    }
}

/// Streaming form of [`a3_decide`]: counts consecutive steps satisfying the
/// entry condition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct A3Tracker {
    consecutive: usize,
}

impl A3Tracker {
    pub fn observe(&mut self, sample: A3Sample, hom_db: f64, ttt_steps: usize) -> Decision {
        if sample.neighbour_rsrp_dbm > sample.serving_rsrp_dbm + hom_db {
            self.consecutive += 1;
        } else {
            self.consecutive = 0;
        }
        if ttt_steps > 0 && self.consecutive >= ttt_steps {
            Decision::Trigger(sample.neighbour)
        } else {
            Decision::Maintain
        }
    }

    pub fn reset(&mut self) {
        self.consecutive = 0;
    }
}

/// Strongest-RSRP link among `neighbours`; ties go to the lower id.
pub fn strongest_neighbour(neighbours: &[LinkMeasurement]) -> Option<&LinkMeasurement> {
    neighbours
        .iter()
        .fold(None, |best: Option<&LinkMeasurement>, l| match best {
            Some(b) if b.rsrp_dbm >= l.rsrp_dbm => Some(b),
            _ => Some(l),
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlhaEvaluation {
    pub state: FuzzyState,
    /// `None` when no rule covers the dominant state or nothing fired.
    pub ho_factor: Option<f64>,
    pub trigger: bool,
}

/// Evaluates the serving link. Only states covered by a rule are inferred;
/// uncovered states and inference failures maintain the connection. Triggers
/// when the HO factor is strictly above the threshold.
pub fn flha_evaluate(link: &LinkMeasurement, params: &FlhaParams) -> Result<FlhaEvaluation, FuzzyError> {
    let engine = &params.engine;
    let grades = engine
        .inputs
        .fuzzify_raw([link.rsrp_dbm, link.sinr_db, link.distance_m])?;
    let state = FuzzyState([grades[0].dominant, grades[1].dominant, grades[2].dominant]);
    if engine.rules.rule_for(&state.0).is_none() {
        return Ok(FlhaEvaluation {
            state,
            ho_factor: None,
            trigger: false,
        });
    }
    let ho_factor = engine.ho_factor(&grades).ok();
    Ok(FlhaEvaluation {
        state,
        ho_factor,
        trigger: ho_factor.is_some_and(|h| h > params.threshold),
    })
}

pub fn flha_decide(link: &LinkMeasurement, params: &FlhaParams) -> bool {
    flha_evaluate(link, params).map(|e| e.trigger).unwrap_or(false)
}

/// Highest-SINR neighbour; ties go to the lower id.
pub fn select_target(neighbours: &[LinkMeasurement]) -> Result<BsId, HandoverError> {
    crate::channel::best_by_sinr(neighbours).ok_or(HandoverError::NoTarget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureKind {
    TooEarly,
    TooLate,
    WrongCell,
}

impl FailureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TooEarly => "too-early",
            Self::TooLate => "too-late",
            Self::WrongCell => "wrong-cell",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HoOutcome {
    Success,
    Failure(FailureKind),
}

impl HoOutcome {
    pub fn is_failure(&self) -> bool {
        matches!(self, Self::Failure(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureThresholds {
    /// Source SINR below which the link is lost before completion, dB.
    pub outage_sinr_db: f64,
    /// Target SINR below which access to the target fails, dB.
    pub fail_sinr_db: f64,
}

/// Classifies a handover from the links measured at completion.
///
/// `source_lost` reports a source outage seen earlier in the handover window.
pub fn classify_outcome(
    completion: &[LinkMeasurement],
    source: BsId,
    target: BsId,
    source_lost: bool,
    thresholds: &FailureThresholds,
) -> HoOutcome {
    let sinr = |id: BsId| {
        completion
            .iter()
            .find(|l| l.bs_id == id)
            .map_or(f64::NEG_INFINITY, |l| l.sinr_db)
    };
    if source_lost || sinr(source) < thresholds.outage_sinr_db {
        return HoOutcome::Failure(FailureKind::TooLate);
    }
    if sinr(target) < thresholds.fail_sinr_db {
        let other_viable = completion
            .iter()
            .any(|l| l.bs_id != source && l.bs_id != target && l.sinr_db >= thresholds.fail_sinr_db);
        return HoOutcome::Failure(if other_viable {
            FailureKind::WrongCell
        } else {
            FailureKind::TooEarly
        });
    }
    HoOutcome::Success
}

/// Remembers a UE's last successful handover to flag returns within a window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PingPongTracker {
    last: Option<(BsId, BsId, u64)>,
}

impl PingPongTracker {
    /// Records a successful handover and reports whether it reverses the
    /// previous one within `window_s`.
    pub fn record(&mut self, source: BsId, target: BsId, step: u64, step_seconds: f64, window_s: f64) -> bool {
        let pingpong = self.last.is_some_and(|(from, to, at)| {
            to == source && from == target && (step - at) as f64 * step_seconds <= window_s
        });
        self.last = Some((source, target, step));
        pingpong
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoEvent {
    pub step: u64,
    pub ue_id: usize,
    pub source_bs: BsId,
    pub target_bs: BsId,
    pub outcome: HoOutcome,
    pub pingpong: bool,
}

pub const EVENT_HEADER: &str = "step,ue,source,target,outcome,failure_kind,pingpong";

pub fn events_to_csv(events: &[HoEvent]) -> String {
    let mut out = format!("{EVENT_HEADER}\n");
    for e in events {
        let (outcome, kind) = match e.outcome {
            HoOutcome::Success => ("success", ""),
            HoOutcome::Failure(k) => ("failure", k.as_str()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.step, e.ue_id, e.source_bs, e.target_bs, outcome, kind, e.pingpong as u8
        ));
    }
    out
}

pub fn events_from_csv(text: &str) -> Result<Vec<HoEvent>, HandoverError> {
    let mut events = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line == EVENT_HEADER {
            continue;
        }
        let err = |reason: &str| HandoverError::Parse {
            line: n + 1,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err("expected 7 fields"));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|_| err("bad integer"));
        let outcome = match (f[4], f[5]) {
            ("success", "") => HoOutcome::Success,
            ("failure", "too-early") => HoOutcome::Failure(FailureKind::TooEarly),
            ("failure", "too-late") => HoOutcome::Failure(FailureKind::TooLate),
            ("failure", "wrong-cell") => HoOutcome::Failure(FailureKind::WrongCell),
            _ => return Err(err("bad outcome")),
        };
        events.push(HoEvent {
            step: int(f[0])?,
            ue_id: int(f[1])? as usize,
            source_bs: BsId(int(f[2])? as usize),
            target_bs: BsId(int(f[3])? as usize),
            outcome,
            pingpong: int(f[6])? == 1,
        });
    }
    Ok(events)
}
