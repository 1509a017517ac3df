//! Fixed-step simulation loop.
//!
//! Every step moves all UEs, measures every link, lets the mechanism decide
//! for each UE in ascending id order, executes the triggered handovers and
//! logs one link record per UE. The Q-learning environment drives the same
//! loop with the agent's actions in place of a mechanism.

use log::warn;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{self, LinkMeasurement, NoiseModel};
use crate::cluster::{ClusterError, HistoryDataset};
use crate::fuzzy::{FuzzyError, InputMfs};
use crate::handover::{
    self, A3Sample, A3Tracker, Decision, FailureThresholds, HoEvent, HoOutcome, PingPongTracker, TriggerMechanism,
};
use crate::kpi::{KpiContext, KpiReport, LinkRecord};
use crate::mobility;
use crate::qlearn::{self, Action, Environment, FuzzyState, QLearnError, QLearnParams, QTable, Transition};
use crate::rng::{child_seed, stream, Stream};
use crate::scenario::{self, BaseStation, BsId, ConfigError, PendingHandover, ScenarioConfig, UserEquipment};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(
        "insufficient history: {samples} samples requested, at least {required} needed (increase steps or ue_count)"
    )]
    InsufficientHistory { samples: u64, required: usize },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    QLearn(#[from] QLearnError),
}

pub struct Simulator {
    config: ScenarioConfig,
    stations: Vec<BaseStation>,
    ues: Vec<UserEquipment>,
    noise: NoiseModel,
    mobility_rng: Vec<ChaCha8Rng>,
    fading_rng: Vec<ChaCha8Rng>,
    completion_rng: Vec<ChaCha8Rng>,
    links: Vec<Vec<LinkMeasurement>>,
    step: Option<u64>,
    ho_steps: u64,
    thresholds: FailureThresholds,
    a3: Vec<A3Tracker>,
    pingpong: Vec<PingPongTracker>,
    reestablish: Vec<bool>,
    source_lost: Vec<bool>,
    events: Vec<HoEvent>,
    records: Vec<LinkRecord>,
    record_links: bool,
}

impl Simulator {
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<Self, SimError> {
        let config = config.clone().validated()?;
        let (stations, ues) = scenario::build_topology(&config, &mut stream(seed, Stream::Topology, 0))?;
        let n = ues.len();
        let per_ue = |purpose| (0..n as u64).map(|i| stream(seed, purpose, i)).collect::<Vec<_>>();
        let ho_steps = ((config.ho_latency_s() / config.step_seconds).ceil() as u64).max(1);
        Ok(Self {
            noise: config.noise_model(),
            thresholds: FailureThresholds {
                outage_sinr_db: config.outage_sinr_db,
                fail_sinr_db: config.ho_fail_sinr_db,
            },
            mobility_rng: per_ue(Stream::Mobility),
            fading_rng: per_ue(Stream::Fading),
            completion_rng: per_ue(Stream::Completion),
            links: vec![Vec::new(); n],
            step: None,
            ho_steps,
            a3: vec![A3Tracker::default(); n],
            pingpong: vec![PingPongTracker::default(); n],
            reestablish: vec![false; n],
            source_lost: vec![false; n],
            events: Vec::new(),
            records: Vec::new(),
            record_links: true,
            stations,
            ues,
            config,
        })
    }

    pub fn stations(&self) -> &[BaseStation] {
        &self.stations
    }

    pub fn ues(&self) -> &[UserEquipment] {
        &self.ues
    }

    pub fn events(&self) -> &[HoEvent] {
        &self.events
    }

    pub fn records(&self) -> &[LinkRecord] {
        &self.records
    }

    /// Index of the current step; `None` before the first [`advance`](Self::advance).
    pub fn current_step(&self) -> Option<u64> {
        self.step
    }

    /// All links of a UE measured this step, in station order.
    pub fn links(&self, ue: usize) -> &[LinkMeasurement] {
        &self.links[ue]
    }

    pub fn serving_link(&self, ue: usize) -> &LinkMeasurement {
        &self.links[ue][self.ues[ue].serving_bs.0]
    }

    pub fn neighbour_links(&self, ue: usize) -> Vec<LinkMeasurement> {
        let serving = self.ues[ue].serving_bs;
        self.links[ue].iter().filter(|l| l.bs_id != serving).copied().collect()
    }

    /// Starts the next step: moves every UE, measures every link and
    /// reconnects UEs whose last handover failed to their best cell.
    pub fn advance(&mut self) {
        let step = self.step.map_or(0, |s| s + 1);
        self.step = Some(step);
        let area = self.config.area();
        for (i, ue) in self.ues.iter_mut().enumerate() {
            let (position, state) = mobility::step_position(
                ue.position,
                ue.mobility,
                self.config.step_seconds,
                area,
                &mut self.mobility_rng[i],
            );
            ue.position = position;
            ue.mobility = state;
            self.links[i] = channel::measure(position, &self.stations, &self.noise, &mut self.fading_rng[i]);
            if self.reestablish[i] {
                ue.serving_bs = channel::best_by_sinr(&self.links[i]).expect("at least two stations");
                self.a3[i].reset();
                self.reestablish[i] = false;
            }
            if ue.ho_in_progress.is_some() && self.links[i][ue.serving_bs.0].sinr_db < self.thresholds.outage_sinr_db {
                self.source_lost[i] = true;
            }
        }
    }

    /// Handover target per UE chosen by `mechanism`; UEs mid-handover get `None`.
    pub fn decide(&mut self, mechanism: &TriggerMechanism) -> Vec<Option<BsId>> {
        (0..self.ues.len())
            .map(|i| {
                if self.ues[i].ho_in_progress.is_some() {
                    return None;
                }
                let serving = *self.serving_link(i);
                let neighbours = self.neighbour_links(i);
                match mechanism {
                    TriggerMechanism::A3Rsrp { hom_db, ttt_steps } => {
                        let best = handover::strongest_neighbour(&neighbours)?;
                        let sample = A3Sample {
                            serving_rsrp_dbm: serving.rsrp_dbm,
                            neighbour_rsrp_dbm: best.rsrp_dbm,
                            neighbour: best.bs_id,
                        };
                        match self.a3[i].observe(sample, *hom_db, *ttt_steps) {
                            Decision::Trigger(target) => Some(target),
                            Decision::Maintain => None,
                        }
                    }
                    TriggerMechanism::FlhaExpert(p) | TriggerMechanism::FlhaQ(p) | TriggerMechanism::FlhaSon(p) => {
                        if handover::flha_decide(&serving, p) {
                            handover::select_target(&neighbours).ok()
                        } else {
                            None
                        }
                    }
                }
            })
            .collect()
    }

    /// Executes the step's handovers and logs one record per UE. Returns, per
    /// UE, whether a handover was started this step.
    #[allow(clippy::needless_range_loop)]
    pub fn execute(&mut self, targets: &[Option<BsId>]) -> Vec<bool> {
        let step = self.step.expect("advance() must be called before execute()");
        let mut attached = vec![0usize; self.stations.len()];
        for ue in &self.ues {
            attached[ue.serving_bs.0] += 1;
        }
        let mut started = vec![false; self.ues.len()];
        for i in 0..self.ues.len() {
            let source = self.ues[i].serving_bs;
            let link = self.links[i][source.0];
            if let Some(target) = targets.get(i).copied().flatten() {
                if self.ues[i].ho_in_progress.is_none() && target != source {
                    self.ues[i].ho_in_progress = Some(PendingHandover {
                        target,
                        completion_step: step + self.ho_steps - 1,
                    });
                    self.source_lost[i] = false;
                    started[i] = true;
                }
            }
            let mut ho_executed = false;
            if let Some(pending) = self.ues[i].ho_in_progress.filter(|p| p.completion_step == step) {
                let completion = channel::measure(
                    self.ues[i].position,
                    &self.stations,
                    &self.noise,
                    &mut self.completion_rng[i],
                );
                let outcome = handover::classify_outcome(
                    &completion,
                    source,
                    pending.target,
                    self.source_lost[i],
                    &self.thresholds,
                );
                let pingpong = match outcome {
                    HoOutcome::Success => {
                        self.ues[i].serving_bs = pending.target;
                        self.a3[i].reset();
                        self.pingpong[i].record(
                            source,
                            pending.target,
                            step,
                            self.config.step_seconds,
                            self.config.pingpong_window_s,
                        )
                    }
                    HoOutcome::Failure(_) => {
                        self.reestablish[i] = true;
                        false
                    }
                };
                self.events.push(HoEvent {
                    step,
                    ue_id: i,
                    source_bs: source,
                    target_bs: pending.target,
                    outcome,
                    pingpong,
                });
                self.ues[i].ho_in_progress = None;
                self.source_lost[i] = false;
                ho_executed = true;
            }
            if self.record_links {
                let bs = &self.stations[source.0];
                self.records.push(LinkRecord {
                    step,
                    ue_id: i,
                    serving_bs: source,
                    rsrp_dbm: link.rsrp_dbm,
                    sinr_db: link.sinr_db,
                    distance_m: link.distance_m,
                    bandwidth_hz: bs.bw_mhz * 1e6 / attached[source.0] as f64,
                    ho_executed,
                });
            }
        }
        started
    }
}

/// Event log, link records and KPIs of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub events: Vec<HoEvent>,
    pub links: Vec<LinkRecord>,
    pub report: KpiReport,
}

/// Runs `config.sim_duration_steps` steps.
pub fn run(config: &ScenarioConfig, mechanism: &TriggerMechanism, seed: u64) -> Result<RunOutput, SimError> {
    run_for_steps(config, mechanism, seed, config.sim_duration_steps)
}

/// Runs an explicit number of steps, zero included.
pub fn run_for_steps(
    config: &ScenarioConfig,
    mechanism: &TriggerMechanism,
    seed: u64,
    steps: u64,
) -> Result<RunOutput, SimError> {
    let mut sim = Simulator::new(config, seed)?;
    for _ in 0..steps {
        sim.advance();
        let targets = sim.decide(mechanism);
        sim.execute(&targets);
    }
    let report = KpiReport::compute(&sim.events, &sim.records, &KpiContext::from_config(&sim.config, steps));
    Ok(RunOutput {
        events: sim.events,
        links: sim.records,
        report,
    })
}

pub fn a3_baseline(config: &ScenarioConfig) -> TriggerMechanism {
    TriggerMechanism::A3Rsrp {
        hom_db: config.a3_hom_db,
        ttt_steps: config.a3_ttt_steps(),
    }
}

/// Serving-link history of every UE at every step under the A3 baseline.
pub fn collect_history(config: &ScenarioConfig, steps: u64, seed: u64) -> Result<HistoryDataset, SimError> {
    let config = config.clone().validated()?;
    let samples = steps * config.ue_count as u64;
    if samples < config.history_min_samples as u64 {
        return Err(SimError::InsufficientHistory {
            samples,
            required: config.history_min_samples,
        });
    }
    let mechanism = a3_baseline(&config);
    let mut sim = Simulator::new(&config, seed)?;
    sim.record_links = false;
    let mut raw = Vec::with_capacity(samples as usize);
    for _ in 0..steps {
        sim.advance();
        for i in 0..sim.ues.len() {
            let l = sim.serving_link(i);
            raw.push([l.rsrp_dbm, l.sinr_db, l.distance_m]);
        }
        let targets = sim.decide(&mechanism);
        sim.execute(&targets);
    }
    let dataset = HistoryDataset::from_raw(raw)?;
    if dataset.bounds.iter().any(|(lo, hi)| !(hi > lo)) {
        warn!("history has a constant column; membership-function construction will fail");
    }
    Ok(dataset)
}

/// The simulator as a Q-learning environment: every UE is an agent, each
/// epoch is a fresh simulator, the reward is the sum of the fuzzy-set centres
/// of the next serving-link state and a transition is terminal when the next
/// serving SINR drops below the configured floor.
pub struct TrainingEnv {
    config: ScenarioConfig,
    mfs: InputMfs,
    seed: u64,
    sim: Simulator,
}

impl TrainingEnv {
    pub fn new(config: &ScenarioConfig, mfs: InputMfs, seed: u64) -> Result<Self, SimError> {
        let mut sim = Simulator::new(config, child_seed(seed, Stream::Epoch, 0))?;
        sim.record_links = false;
        sim.advance();
        Ok(Self {
            config: sim.config.clone(),
            mfs,
            seed,
            sim,
        })
    }

    fn state(&self, ue: usize) -> FuzzyState {
        qlearn::encode_state(self.sim.serving_link(ue), &self.mfs).expect("membership functions have valid bounds")
    }
}

impl Environment for TrainingEnv {
    type State = FuzzyState;

    fn agent_count(&self) -> usize {
        self.config.ue_count
    }

    fn begin_epoch(&mut self, epoch: usize) {
        let mut sim = Simulator::new(&self.config, child_seed(self.seed, Stream::Epoch, epoch as u64))
            .expect("config validated at construction");
        sim.record_links = false;
        sim.advance();
        self.sim = sim;
    }

    fn observe(&self, agent: usize) -> FuzzyState {
        self.state(agent)
    }

    fn step(&mut self, actions: &[Action]) -> Vec<Transition<FuzzyState>> {
        let targets: Vec<Option<BsId>> = actions
            .iter()
            .enumerate()
            .map(|(i, a)| match a {
                Action::Trigger if self.sim.ues[i].ho_in_progress.is_none() => {
                    handover::select_target(&self.sim.neighbour_links(i)).ok()
                }
                _ => None,
            })
            .collect();
        let started = self.sim.execute(&targets);
        self.sim.advance();
        (0..actions.len())
            .map(|i| {
                let next_state = self.state(i);
                Transition {
                    taken: if started[i] { Action::Trigger } else { Action::Maintain },
                    reward: qlearn::reward(&next_state, &self.mfs).expect("state labels come from the same MFs"),
                    next_state,
                    terminal: self.sim.serving_link(i).sinr_db < self.config.q_terminal_sinr_db,
                }
            })
            .collect()
    }
}

/// Trains a Q-table on the simulator with the given input membership functions.
pub fn train_q_table(config: &ScenarioConfig, mfs: &InputMfs, seed: u64) -> Result<QTable, SimError> {
    let mut env = TrainingEnv::new(config, mfs.clone(), seed)?;
    let params = QLearnParams::from_config(config);
    Ok(qlearn::train(
        &mut env,
        &params,
        &mut stream(seed, Stream::Exploration, 0),
    )?)
}
