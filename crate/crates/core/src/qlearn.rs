//! Tabular Q-learning over fuzzified states, and conversion of the learned
//! table into a fuzzy rule base, an output membership function and a
//! triggering threshold.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::channel::LinkMeasurement;
use crate::cluster::{self, ClusterError, ClusteringParams, MAX_SETS};
use crate::fuzzy::{
    self, FuzzyError, FuzzyRule, InputMfs, Label, MembershipFunction, Metric, Polarity, RuleBase, RuleOrigin,
};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error)]
pub enum QLearnError {
    #[error("invalid learning parameters: {0}")]
    InvalidParams(String),
    #[error("the Q-table has no visited states")]
    EmptyTable,
    #[error("every visited state has the same action preference; train longer or with more exploration")]
    DegenerateDeltaQ,
    #[error("output membership function: {0}")]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// Dominant RSRP, SINR and distance labels of a serving link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuzzyState(pub [Label; 3]);

impl fmt::Display for FuzzyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Hand over to the best neighbour.
    Trigger,
    /// Keep the serving cell.
    Maintain,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Trigger => 0,
            Action::Maintain => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable<S: Ord = FuzzyState> {
    /// `[q_trigger, q_maintain]` for every state acted in at least once.
    pub entries: BTreeMap<S, [f64; 2]>,
    pub visits: BTreeMap<S, [u64; 2]>,
}

impl<S: Ord> Default for QTable<S> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
            visits: BTreeMap::new(),
        }
    }
}

impl<S: Ord + Clone> QTable<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Action values; unvisited states read as zero.
    pub fn values(&self, s: &S) -> [f64; 2] {
        self.entries.get(s).copied().unwrap_or([0.0; 2])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Greedy action; equal values prefer [`Action::Trigger`].
    pub fn greedy(&self, s: &S) -> Action {
        let [t, m] = self.values(s);
        if t >= m {
            Action::Trigger
        } else {
            Action::Maintain
        }
    }

    fn max_value(&self, s: &S) -> f64 {
        let [t, m] = self.values(s);
        t.max(m)
    }

    /// One temporal-difference update:
    /// `Q(s,a) += lr (r + gamma max_a' Q(s',a') - Q(s,a))`, without the
    /// bootstrap term when `s'` is terminal.
    pub fn update(&mut self, s: &S, a: Action, reward: f64, next: &S, terminal: bool, params: &QLearnParams) {
        let bootstrap = if terminal { 0.0 } else { self.max_value(next) };
        let target = reward + params.discount * bootstrap;
        let q = self.entries.entry(s.clone()).or_insert([0.0; 2]);
        q[a.index()] += params.learning_rate * (target - q[a.index()]);
        self.visits.entry(s.clone()).or_insert([0; 2])[a.index()] += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearnParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epochs: usize,
    pub episode_steps: usize,
}

impl Default for QLearnParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.9,
            epsilon_start: 0.5,
            epsilon_end: 0.05,
            epochs: 200,
            episode_steps: 200,
        }
    }
}

impl QLearnParams {
    pub fn from_config(c: &ScenarioConfig) -> Self {
        Self {
            learning_rate: c.q_learning_rate,
            discount: c.q_discount,
            epsilon_start: c.q_epsilon_start,
            epsilon_end: c.q_epsilon_end,
            epochs: c.q_epochs,
            episode_steps: c.q_episode_steps,
        }
    }

    pub fn validate(&self) -> Result<(), QLearnError> {
        let bad = |m: &str| Err(QLearnError::InvalidParams(m.to_string()));
        if !(0.0..1.0).contains(&self.learning_rate) {
            return bad("learning_rate must lie in [0, 1)");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if !((0.0..=1.0).contains(&self.epsilon_start) && (0.0..=1.0).contains(&self.epsilon_end)) {
            return bad("epsilon_start and epsilon_end must lie in [0, 1]");
        }
        if self.epsilon_start < self.epsilon_end {
            return bad("epsilon_start must not be below epsilon_end");
        }
        if self.epochs == 0 || self.episode_steps == 0 {
            return bad("epochs and episode_steps must be at least 1");
        }
        Ok(())
    }

    /// Exploration rate for an epoch, linear from start to end.
    pub fn epsilon(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.epsilon_start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// Outcome of one agent's action.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    /// Action actually applied; a trigger without a neighbour degrades to maintain.
    pub taken: Action,
    pub reward: f64,
    pub next_state: S,
    pub terminal: bool,
}

/// A multi-agent environment stepped in lockstep; all agents share one table.
pub trait Environment {
    type State: Clone + Ord;

    fn agent_count(&self) -> usize;

    /// Resets the environment for a new training epoch.
    fn begin_epoch(&mut self, epoch: usize);

    fn observe(&self, agent: usize) -> Self::State;

    /// Applies one action per agent, in agent order.
    fn step(&mut self, actions: &[Action]) -> Vec<Transition<Self::State>>;
}

/// Epsilon-greedy: one uniform draw decides exploration, a second picks the
/// random action.
pub fn choose_action<S: Ord + Clone, R: Rng + ?Sized>(table: &QTable<S>, s: &S, epsilon: f64, rng: &mut R) -> Action {
    if rng.random::<f64>() < epsilon {
        if rng.random::<bool>() {
            Action::Trigger
        } else {
            Action::Maintain
        }
    } else {
        table.greedy(s)
    }
}

pub fn train<E: Environment, R: Rng + ?Sized>(
    env: &mut E,
    params: &QLearnParams,
    rng: &mut R,
) -> Result<QTable<E::State>, QLearnError> {
    params.validate()?;
    let mut table = QTable::new();
    let agents = env.agent_count();
    for epoch in 0..params.epochs {
        env.begin_epoch(epoch);
        let epsilon = params.epsilon(epoch);
        for _ in 0..params.episode_steps {
            let states: Vec<E::State> = (0..agents).map(|a| env.observe(a)).collect();
            let actions: Vec<Action> = states.iter().map(|s| choose_action(&table, s, epsilon, rng)).collect();
            let transitions = env.step(&actions);
            for (s, t) in states.iter().zip(&transitions) {
                table.update(s, t.taken, t.reward, &t.next_state, t.terminal, params);
            }
        }
    }
    Ok(table)
}

/// Dominant label of each serving-link metric.
pub fn encode_state(link: &LinkMeasurement, mfs: &InputMfs) -> Result<FuzzyState, FuzzyError> {
    let f = mfs.fuzzify_raw([link.rsrp_dbm, link.sinr_db, link.distance_m])?;
    Ok(FuzzyState([f[0].dominant, f[1].dominant, f[2].dominant]))
}

/// Sum of the centres of the state's three fuzzy sets.
pub fn reward(state: &FuzzyState, mfs: &InputMfs) -> Result<f64, FuzzyError> {
    let mut total = 0.0;
    for (i, &label) in state.0.iter().enumerate() {
        total += mfs.get(i).center(label)?;
    }
    Ok(total)
}

/// `q_trigger - q_maintain` per visited state.
pub fn delta_q<S: Ord + Clone>(table: &QTable<S>) -> BTreeMap<S, f64> {
    table.entries.iter().map(|(s, q)| (s.clone(), q[0] - q[1])).collect()
}

/// One rule per state. ΔQ is min-max normalised and clustered in one
/// dimension; the resulting centres define the output sets and each state's
/// consequent is the set whose centre is nearest its normalised ΔQ. Rules are
/// ordered by ascending ΔQ.
pub fn extract_rules(
    dq: &BTreeMap<FuzzyState, f64>,
    params: &ClusteringParams,
) -> Result<(RuleBase, MembershipFunction), QLearnError> {
    if dq.is_empty() {
        return Err(QLearnError::EmptyTable);
    }
    let lo = dq.values().copied().fold(f64::INFINITY, f64::min);
    let hi = dq.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(QLearnError::DegenerateDeltaQ);
    }
    let normalized: Vec<(FuzzyState, f64, f64)> = dq.iter().map(|(s, &v)| (*s, v, (v - lo) / (hi - lo))).collect();
    let points: Vec<[f64; 1]> = normalized.iter().map(|&(_, _, x)| [x]).collect();
    let centers = cluster::subtractive_cluster(&points, params)?;
    let projected = cluster::limit_sets(cluster::project_centers(&centers, 0, params.merge_tol), MAX_SETS);
    let output = cluster::build_mf(&projected, (0.0, 1.0), Metric::HoFactor, Polarity::Benefit, params)?;

    let mut rules: Vec<FuzzyRule> = normalized
        .iter()
        .map(|&(s, v, x)| FuzzyRule {
            antecedent: s.0,
            consequent: nearest_label(&output, x),
            delta_q: Some(v),
        })
        .collect();
    rules.sort_by(|a, b| a.delta_q.partial_cmp(&b.delta_q).expect("finite ΔQ"));
    Ok((RuleBase::new(rules, RuleOrigin::Learned)?, output))
}

fn nearest_label(mf: &MembershipFunction, x: f64) -> Label {
    let mut best = &mf.sets[0];
    for s in &mf.sets[1..] {
        if (s.center - x).abs() < (best.center - x).abs() {
            best = s;
        }
    }
    best.label
}

/// State whose ΔQ is closest to zero (ties to the smaller ΔQ).
pub fn critical_state(dq: &BTreeMap<FuzzyState, f64>) -> Option<(FuzzyState, f64)> {
    dq.iter()
        .map(|(s, &v)| (*s, v))
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(a.1.total_cmp(&b.1)))
}

/// HO factor of the critical state evaluated at its fuzzy-set centres.
pub fn select_threshold(
    dq: &BTreeMap<FuzzyState, f64>,
    mfs: &InputMfs,
    rulebase: &RuleBase,
    output: &MembershipFunction,
) -> Result<f64, QLearnError> {
    let (state, _) = critical_state(dq).ok_or(QLearnError::EmptyTable)?;
    let mut x = [0.0; 3];
    for (i, &label) in state.0.iter().enumerate() {
        x[i] = mfs.get(i).center(label)?;
    }
    let grades = mfs.fuzzify_normalized(x);
    Ok(fuzzy::defuzzify(&fuzzy::infer(rulebase, &grades, output)?)?)
}

impl QTable<FuzzyState> {
    /// Rows sorted by ascending ΔQ with the consequent each state received.
    pub fn to_text(&self, rules: Option<&RuleBase>) -> String {
        let mut rows: Vec<(&FuzzyState, &[f64; 2])> = self.entries.iter().collect();
        rows.sort_by(|a, b| (a.1[0] - a.1[1]).total_cmp(&(b.1[0] - b.1[1])).then(a.0.cmp(b.0)));
        let mut out = String::from("rsrp,sinr,d,q_trigger,q_maintain,delta_q,ho_factor,n_trigger,n_maintain\n");
        for (s, q) in rows {
            let consequent = rules
                .and_then(|rb| rb.rule_for(&s.0))
                .map(|r| r.consequent.to_string())
                .unwrap_or_default();
            let n = self.visits.get(s).copied().unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{},{},{}\n",
                s.0[0],
                s.0[1],
                s.0[2],
                q[0],
                q[1],
                q[0] - q[1],
                consequent,
                n[0],
                n[1]
            ));
        }
        out
    }
}
