//! Mamdani fuzzy inference for the handover factor.
//!
//! Crisp metrics are min-max normalised (cost metrics inverted), fuzzified
//! against generalised-bell membership functions
//! `mu(x) = 1 / (1 + |(x - v) / sigma|^b)`, combined with max-min inference
//! and defuzzified by the centroid of the aggregated output on a fixed grid.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Number of uniform samples of the output universe `[0, 1]`.
pub const OUTPUT_GRID_POINTS: usize = 1001;

/// Grade every set shares with its neighbour at their midpoint.
pub const OVERLAP_GRADE: f64 = 0.25;
pub const MIN_SLOPE: f64 = 2.0;
pub const MAX_SLOPE: f64 = 12.0;

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("degenerate normalisation bounds for {metric}: min {min} must be below max {max}")]
    DegenerateBounds { metric: Metric, min: f64, max: f64 },
    #[error("invalid membership function for {metric}: {reason}")]
    InvalidMembership { metric: Metric, reason: String },
    #[error("no label ladder for {0} fuzzy sets (supported: 2 to 5)")]
    LadderSize(usize),
    #[error("label {label} is not defined for {metric}")]
    UnknownLabel { metric: Metric, label: Label },
    #[error("duplicate rule antecedent {0}")]
    DuplicateAntecedent(String),
    #[error("rule base is empty")]
    EmptyRuleBase,
    #[error("aggregated output is zero everywhere: no rule fired")]
    NoRuleFired,
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Rsrp,
    Sinr,
    Distance,
    HoFactor,
}

impl Metric {
    pub const INPUTS: [Metric; 3] = [Metric::Rsrp, Metric::Sinr, Metric::Distance];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Rsrp => "rsrp",
            Metric::Sinr => "sinr",
            Metric::Distance => "d",
            Metric::HoFactor => "ho_factor",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rsrp" => Ok(Metric::Rsrp),
            "sinr" => Ok(Metric::Sinr),
            "d" | "distance" => Ok(Metric::Distance),
            "ho_factor" => Ok(Metric::HoFactor),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// Larger raw values are better.
    Benefit,
    /// Smaller raw values are better; normalisation is inverted.
    Cost,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Benefit => "benefit",
            Polarity::Cost => "cost",
        })
    }
}

impl FromStr for Polarity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "benefit" => Ok(Polarity::Benefit),
            "cost" => Ok(Polarity::Cost),
            other => Err(format!("unknown polarity {other:?}")),
        }
    }
}

/// Linguistic label. The derived order is the ladder order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    VeryLow,
    Low,
    Medium,
    High,
    VeryHigh,
}

impl Label {
    /// Labels for `k` ascending sets.
    pub fn ladder(k: usize) -> Result<&'static [Label], FuzzyError> {
        use Label::*;
        match k {
            2 => Ok(&[Low, High]),
            3 => Ok(&[Low, Medium, High]),
            4 => Ok(&[VeryLow, Low, High, VeryHigh]),
            5 => Ok(&[VeryLow, Low, Medium, High, VeryHigh]),
            _ => Err(FuzzyError::LadderSize(k)),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::VeryLow => "very-low",
            Label::Low => "low",
            Label::Medium => "medium",
            Label::High => "high",
            Label::VeryHigh => "very-high",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace(' ', "-").as_str() {
            "very-low" => Ok(Label::VeryLow),
            "low" => Ok(Label::Low),
            "medium" => Ok(Label::Medium),
            "high" => Ok(Label::High),
            "very-high" => Ok(Label::VeryHigh),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzySet {
    pub label: Label,
    pub center: f64,
    pub width: f64,
    pub slope: f64,
}

impl FuzzySet {
    pub fn grade(&self, x: f64) -> f64 {
        membership(self, x)
    }
}

/// Generalised bell: `1 / (1 + |(x - v) / sigma|^b)`. Equals 1 at the centre
/// and 0.5 at `|x - v| = sigma`.
pub fn membership(set: &FuzzySet, x: f64) -> f64 {
    1.0 / (1.0 + ((x - set.center) / set.width).abs().powf(set.slope))
}

/// Per-set slopes such that adjacent sets each grade their shared midpoint at
/// [`OVERLAP_GRADE`]; a set's slope is the mean over its neighbours, clamped
/// to `[MIN_SLOPE, MAX_SLOPE]`. Pairs closer than two widths cannot reach the
/// target and take the minimum slope.
pub fn overlap_slopes(centers: &[f64], width: f64) -> Vec<f64> {
    let pair: Vec<f64> = centers
        .windows(2)
        .map(|w| {
            let q = (w[1] - w[0]) / (2.0 * width);
            if q > 1.0 {
                ((1.0 / OVERLAP_GRADE - 1.0).ln() / q.ln()).clamp(MIN_SLOPE, MAX_SLOPE)
            } else {
                MIN_SLOPE
            }
        })
        .collect();
    (0..centers.len())
        .map(|i| {
            let adjacent: Vec<f64> = [i.checked_sub(1), (i < pair.len()).then_some(i)]
                .into_iter()
                .flatten()
                .map(|j| pair[j])
                .collect();
            if adjacent.is_empty() {
                MIN_SLOPE
            } else {
                (adjacent.iter().sum::<f64>() / adjacent.len() as f64).clamp(MIN_SLOPE, MAX_SLOPE)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFunction {
    pub metric: Metric,
    pub sets: Vec<FuzzySet>,
    /// Raw-unit normalisation bounds `(min, max)`.
    pub bounds: (f64, f64),
    pub polarity: Polarity,
}

impl MembershipFunction {
    pub fn new(
        metric: Metric,
        sets: Vec<FuzzySet>,
        bounds: (f64, f64),
        polarity: Polarity,
    ) -> Result<Self, FuzzyError> {
        let invalid = |reason: String| FuzzyError::InvalidMembership { metric, reason };
        if sets.len() < 2 {
            return Err(invalid(format!("needs at least 2 sets, got {}", sets.len())));
        }
        if sets.windows(2).any(|w| !(w[0].center < w[1].center)) {
            return Err(invalid("set centres must be strictly increasing".into()));
        }
        let labels: BTreeSet<Label> = sets.iter().map(|s| s.label).collect();
        if labels.len() != sets.len() {
            return Err(invalid("labels must be unique".into()));
        }
        if let Some(s) = sets.iter().find(|s| !(s.width > 0.0 && s.slope > 0.0)) {
            return Err(invalid(format!("set {} needs positive width and slope", s.label)));
        }
        if !(bounds.0 < bounds.1) {
            return Err(FuzzyError::DegenerateBounds {
                metric,
                min: bounds.0,
                max: bounds.1,
            });
        }
        Ok(Self {
            metric,
            sets,
            bounds,
            polarity,
        })
    }

    /// Sets at the given ascending centres, all with `width`, slopes from the
    /// overlap rule and labels from the ladder.
    pub fn from_centers(
        metric: Metric,
        centers: &[f64],
        width: f64,
        bounds: (f64, f64),
        polarity: Polarity,
    ) -> Result<Self, FuzzyError> {
        let ladder = Label::ladder(centers.len()).map_err(|e| match centers.len() {
            0 | 1 => FuzzyError::InvalidMembership {
                metric,
                reason: format!("needs at least 2 sets, got {}", centers.len()),
            },
            _ => e,
        })?;
        let slopes = overlap_slopes(centers, width);
        let sets = ladder
            .iter()
            .zip(centers)
            .zip(slopes)
            .map(|((&label, &center), slope)| FuzzySet {
                label,
                center,
                width,
                slope,
            })
            .collect();
        Self::new(metric, sets, bounds, polarity)
    }

    /// `k` sets evenly spaced over `[0, 1]`, endpoints included.
    pub fn evenly_spaced(
        metric: Metric,
        k: usize,
        width: f64,
        bounds: (f64, f64),
        polarity: Polarity,
    ) -> Result<Self, FuzzyError> {
        let centers: Vec<f64> = (0..k).map(|i| i as f64 / (k.max(2) - 1) as f64).collect();
        Self::from_centers(metric, &centers, width, bounds, polarity)
    }

    pub fn set(&self, label: Label) -> Option<&FuzzySet> {
        self.sets.iter().find(|s| s.label == label)
    }

    pub fn center(&self, label: Label) -> Result<f64, FuzzyError> {
        self.set(label).map(|s| s.center).ok_or(FuzzyError::UnknownLabel {
            metric: self.metric,
            label,
        })
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.sets.iter().map(|s| s.label)
    }

    pub fn normalize(&self, raw: f64) -> Result<f64, FuzzyError> {
        normalize(raw, self)
    }

    /// Membership curves of every set sampled on the output grid.
    pub fn sampled_curves(&self) -> Vec<(Label, Vec<f64>)> {
        self.sets
            .iter()
            .map(|s| (s.label, (0..OUTPUT_GRID_POINTS).map(|i| s.grade(grid_x(i))).collect()))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# membership function: {}\n# polarity: {}\n# bounds: {},{}\nmetric,label,center,width,slope\n",
            self.metric, self.polarity, self.bounds.0, self.bounds.1
        );
        for s in &self.sets {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.metric, s.label, s.center, s.width, s.slope
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FuzzyError> {
        let mut polarity = None;
        let mut bounds = None;
        let mut metric = None;
        let mut sets = Vec::new();
        let mut seen_header = false;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |reason: String| FuzzyError::Parse { line: line_no, reason };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((key, value)) = meta.split_once(':') {
                    match key.trim() {
                        "polarity" => polarity = Some(value.parse::<Polarity>().map_err(err)?),
                        "bounds" => {
                            let (lo, hi) = value.split_once(',').ok_or_else(|| err("bounds need min,max".into()))?;
                            bounds = Some((parse_f64(lo).map_err(err)?, parse_f64(hi).map_err(err)?));
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !seen_header {
                seen_header = true;
                if line.starts_with("metric,") {
                    continue;
                }
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(err(format!("expected 5 fields, got {}", fields.len())));
            }
            let m: Metric = fields[0].parse().map_err(err)?;
            if metric.is_some_and(|prev| prev != m) {
                return Err(err("rows mix metrics".into()));
            }
            metric = Some(m);
            sets.push(FuzzySet {
                label: fields[1].parse().map_err(err)?,
                center: parse_f64(fields[2]).map_err(err)?,
                width: parse_f64(fields[3]).map_err(err)?,
                slope: parse_f64(fields[4]).map_err(err)?,
            });
        }
        let missing = |what: &str| FuzzyError::Parse {
            line: 0,
            reason: format!("missing {what}"),
        };
        Self::new(
            metric.ok_or_else(|| missing("set rows"))?,
            sets,
            bounds.ok_or_else(|| missing("'# bounds:' line"))?,
            polarity.ok_or_else(|| missing("'# polarity:' line"))?,
        )
    }
}

pub(crate) fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"))
}

/// Min-max normalisation into `[0, 1]`, inverted for cost metrics, clamped.
pub fn normalize(raw: f64, mf: &MembershipFunction) -> Result<f64, FuzzyError> {
    let (min, max) = mf.bounds;
    if !(min < max) {
        return Err(FuzzyError::DegenerateBounds {
            metric: mf.metric,
            min,
            max,
        });
    }
    let t = ((raw - min) / (max - min)).clamp(0.0, 1.0);
    Ok(match mf.polarity {
        Polarity::Benefit => t,
        Polarity::Cost => 1.0 - t,
    })
}

/// Grades of one normalised input against every set of a membership function.
#[derive(Debug, Clone, PartialEq)]
pub struct Fuzzified {
    pub grades: Vec<(Label, f64)>,
    pub dominant: Label,
}

impl Fuzzified {
    pub fn grade(&self, label: Label) -> Option<f64> {
        self.grades.iter().find(|(l, _)| *l == label).map(|(_, g)| *g)
    }
}

/// Dominant label is the highest grade; ties go to the lower-centre set.
pub fn fuzzify(mf: &MembershipFunction, x: f64) -> Fuzzified {
    let grades: Vec<(Label, f64)> = mf.sets.iter().map(|s| (s.label, s.grade(x))).collect();
    let mut dominant = grades[0];
    for &g in &grades[1..] {
        if g.1 > dominant.1 {
            dominant = g;
        }
    }
    Fuzzified {
        grades,
        dominant: dominant.0,
    }
}

/// One membership function per input metric, in RSRP, SINR, distance order.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMfs {
    pub rsrp: MembershipFunction,
    pub sinr: MembershipFunction,
    pub distance: MembershipFunction,
}

impl InputMfs {
    pub fn get(&self, i: usize) -> &MembershipFunction {
        match i {
            0 => &self.rsrp,
            1 => &self.sinr,
            2 => &self.distance,
            _ => panic!("input metric index {i} out of range"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &MembershipFunction> {
        [&self.rsrp, &self.sinr, &self.distance].into_iter()
    }

    /// Normalises raw `(rsrp_dbm, sinr_db, distance_m)` and fuzzifies each metric.
    pub fn fuzzify_raw(&self, raw: [f64; 3]) -> Result<[Fuzzified; 3], FuzzyError> {
        Ok([
            fuzzify(&self.rsrp, normalize(raw[0], &self.rsrp)?),
            fuzzify(&self.sinr, normalize(raw[1], &self.sinr)?),
            fuzzify(&self.distance, normalize(raw[2], &self.distance)?),
        ])
    }

    pub fn fuzzify_normalized(&self, x: [f64; 3]) -> [Fuzzified; 3] {
        [
            fuzzify(&self.rsrp, x[0]),
            fuzzify(&self.sinr, x[1]),
            fuzzify(&self.distance, x[2]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyRule {
    /// RSRP, SINR and distance labels.
    pub antecedent: [Label; 3],
    pub consequent: Label,
    /// Q-value preference the rule was learned from, if any.
    pub delta_q: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleOrigin {
    Expert,
    Learned,
}

impl fmt::Display for RuleOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleOrigin::Expert => "expert",
            RuleOrigin::Learned => "learned",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    pub rules: Vec<FuzzyRule>,
    pub origin: RuleOrigin,
}

fn antecedent_text(a: &[Label; 3]) -> String {
    format!("({}, {}, {})", a[0], a[1], a[2])
}

impl RuleBase {
    pub fn new(rules: Vec<FuzzyRule>, origin: RuleOrigin) -> Result<Self, FuzzyError> {
        let mut seen = BTreeSet::new();
        for r in &rules {
            if !seen.insert(r.antecedent) {
                return Err(FuzzyError::DuplicateAntecedent(antecedent_text(&r.antecedent)));
            }
        }
        Ok(Self { rules, origin })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule_for(&self, antecedent: &[Label; 3]) -> Option<&FuzzyRule> {
        self.rules.iter().find(|r| &r.antecedent == antecedent)
    }

    /// Checks every label against the membership functions it refers to.
    pub fn check_labels(&self, inputs: &InputMfs, output: &MembershipFunction) -> Result<(), FuzzyError> {
        for r in &self.rules {
            for (i, &label) in r.antecedent.iter().enumerate() {
                let mf = inputs.get(i);
                if mf.set(label).is_none() {
                    return Err(FuzzyError::UnknownLabel {
                        metric: mf.metric,
                        label,
                    });
                }
            }
            if output.set(r.consequent).is_none() {
                return Err(FuzzyError::UnknownLabel {
                    metric: output.metric,
                    label: r.consequent,
                });
            }
        }
        Ok(())
    }

    /// Table layout: rule number, three antecedent labels, ΔQ, consequent.
    pub fn to_text(&self) -> String {
        let mut out = format!("# rule base: {}\nrule,rsrp,sinr,d,delta_q,ho_factor\n", self.origin);
        for (i, r) in self.rules.iter().enumerate() {
            let dq = r.delta_q.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                r.antecedent[0],
                r.antecedent[1],
                r.antecedent[2],
                dq,
                r.consequent
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FuzzyError> {
        let mut origin = RuleOrigin::Learned;
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |reason: String| FuzzyError::Parse { line: n + 1, reason };
            let line = line.trim();
            if line.is_empty() || line.starts_with("rule,") {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some(("rule base", v)) = meta.split_once(':').map(|(k, v)| (k.trim(), v.trim())) {
                    origin = match v {
                        "expert" => RuleOrigin::Expert,
                        "learned" => RuleOrigin::Learned,
                        other => return Err(err(format!("unknown origin {other:?}"))),
                    };
                }
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(err(format!("expected 6 fields, got {}", f.len())));
            }
            let label = |s: &str| s.parse::<Label>().map_err(err);
            rules.push(FuzzyRule {
                antecedent: [label(f[1])?, label(f[2])?, label(f[3])?],
                consequent: label(f[5])?,
                delta_q: match f[4].trim() {
                    "" => None,
                    v => Some(parse_f64(v).map_err(err)?),
                },
            });
        }
        Self::new(rules, origin)
    }
}

/// Aggregated output membership sampled on the uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub samples: Vec<f64>,
}

pub fn grid_x(i: usize) -> f64 {
    i as f64 / (OUTPUT_GRID_POINTS - 1) as f64
}

/// Firing strength of a rule: the minimum of its antecedent grades.
pub fn firing_strength(rule: &FuzzyRule, inputs: &[Fuzzified; 3]) -> Result<f64, FuzzyError> {
    let mut strength = f64::INFINITY;
    for (i, &label) in rule.antecedent.iter().enumerate() {
        let g = inputs[i].grade(label).ok_or(FuzzyError::UnknownLabel {
            metric: Metric::INPUTS[i],
            label,
        })?;
        strength = strength.min(g);
    }
    Ok(strength)
}

/// Max-min inference: each consequent curve is clipped at its rule's firing
/// strength and the clipped curves are combined by pointwise maximum.
pub fn infer(
    rulebase: &RuleBase,
    inputs: &[Fuzzified; 3],
    output: &MembershipFunction,
) -> Result<Aggregate, FuzzyError> {
    infer_sampled(rulebase, inputs, output.metric, &output.sampled_curves())
}

/// [`infer`] against pre-sampled consequent curves.
///
/// Clipping then taking the maximum over rules that share a consequent equals
/// clipping that consequent once at the rules' maximum strength, so the
/// strengths are reduced per label first.
pub fn infer_sampled(
    rulebase: &RuleBase,
    inputs: &[Fuzzified; 3],
    output_metric: Metric,
    curves: &[(Label, Vec<f64>)],
) -> Result<Aggregate, FuzzyError> {
    if rulebase.is_empty() {
        return Err(FuzzyError::EmptyRuleBase);
    }
    let mut strengths = vec![0.0f64; curves.len()];
    for rule in &rulebase.rules {
        let slot = curves
            .iter()
            .position(|(l, _)| *l == rule.consequent)
            .ok_or(FuzzyError::UnknownLabel {
                metric: output_metric,
                label: rule.consequent,
            })?;
        strengths[slot] = strengths[slot].max(firing_strength(rule, inputs)?);
    }
    let mut samples = vec![0.0f64; OUTPUT_GRID_POINTS];
    for ((_, curve), &s) in curves.iter().zip(&strengths) {
        if s <= 0.0 {
            continue;
        }
        for (out, &mu) in samples.iter_mut().zip(curve) {
            *out = out.max(mu.min(s));
        }
    }
    Ok(Aggregate { samples })
}

/// Centroid of the aggregate, with both integrals evaluated by the trapezoid rule.
pub fn defuzzify(aggregate: &Aggregate) -> Result<f64, FuzzyError> {
    let n = aggregate.samples.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &mu) in aggregate.samples.iter().enumerate() {
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        let x = i as f64 / (n - 1) as f64;
        num += w * mu * x;
        den += w * mu;
    }
    if den <= 0.0 {
        return Err(FuzzyError::NoRuleFired);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Input membership functions, rule base and output membership function,
/// with the output curves sampled once.
#[derive(Debug, Clone)]
pub struct InferenceEngine {
    pub inputs: InputMfs,
    pub rules: RuleBase,
    pub output: MembershipFunction,
    curves: Vec<(Label, Vec<f64>)>,
}

impl InferenceEngine {
    pub fn new(inputs: InputMfs, rules: RuleBase, output: MembershipFunction) -> Result<Self, FuzzyError> {
        if rules.is_empty() {
            return Err(FuzzyError::EmptyRuleBase);
        }
        rules.check_labels(&inputs, &output)?;
        let curves = output.sampled_curves();
        Ok(Self {
            inputs,
            rules,
            output,
            curves,
        })
    }

    pub fn ho_factor(&self, fuzzified: &[Fuzzified; 3]) -> Result<f64, FuzzyError> {
        defuzzify(&infer_sampled(
            &self.rules,
            fuzzified,
            self.output.metric,
            &self.curves,
        )?)
    }
}

/// The 27-rule expert table over three evenly spaced sets per input.
///
/// Each input contributes a "badness" of 2 (low), 1 (medium) or 0 (high);
/// distance is a cost metric, so its normalised "high" already means close to
/// the serving cell. The summed badness 0..=6 maps onto a five-set output:
/// 0-1 very-low, 2 low, 3 medium, 4 high, 5-6 very-high.
pub fn expert_rulebase() -> RuleBase {
    use Label::*;
    let levels = [Low, Medium, High];
    let badness = |l: Label| match l {
        Low => 2,
        Medium => 1,
        _ => 0,
    };
    let mut rules = Vec::with_capacity(27);
    for &r in &levels {
        for &s in &levels {
            for &d in &levels {
                let consequent = match badness(r) + badness(s) + badness(d) {
                    0 | 1 => VeryLow,
                    2 => Low,
                    3 => Medium,
                    4 => High,
                    _ => VeryHigh,
                };
                rules.push(FuzzyRule {
                    antecedent: [r, s, d],
                    consequent,
                    delta_q: None,
                });
            }
        }
    }
    RuleBase::new(rules, RuleOrigin::Expert).expect("expert antecedents are distinct")
}
