//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use son_flha::cluster::{subtractive_cluster, ClusteringParams};
use son_flha::fuzzy::{defuzzify, fuzzify, Aggregate, OUTPUT_GRID_POINTS};
use son_flha::qlearn::{extract_rules, train, Action, Environment, QLearnParams, Transition};
use son_flha::rng::{stream, Stream};
use son_flha::{FuzzyState, Label, MembershipFunction, Metric, Polarity};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let budget = limit.map_or(String::new(), |l| format!(" (limit {} s)", l.as_secs()));
    Verdict::new(
        v.pass && in_time,
        format!("{}; {:.1} s{budget}", v.detail, elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------
// 1. Subtractive clustering against a brute-force oracle

/// Straight transcription of the potential, selection and subtraction rules,
/// evaluated sequentially with plain loops.
fn brute_force_cluster(points: &[Vec<f64>], alpha: f64, beta: f64, eps: f64) -> Vec<usize> {
    let n = points.len();
    let d2 = |i: usize, k: usize| -> f64 {
        let mut s = 0.0;
        for j in 0..points[i].len() {
            let diff = points[i][j] - points[k][j];
            s += diff * diff;
        }
        s
    };
    let mut p = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            if i != k {
                p[i] += (-alpha * d2(i, k)).exp();
            }
        }
    }
    let pick = |p: &[f64]| {
        let mut best = 0;
        for i in 1..p.len() {
            if p[i] > p[best] {
                best = i;
            }
        }
        best
    };
    let first = pick(&p);
    let p1 = p[first];
    let mut chosen = vec![first];
    while chosen.len() < n {
        let k = *chosen.last().unwrap();
        let pk = p[k];
        for i in 0..n {
            p[i] -= pk * (-beta * d2(i, k)).exp();
        }
        let next = pick(&p);
        if p[next] > eps * p1 {
            chosen.push(next);
        } else {
            break;
        }
    }
    chosen
}

fn random_dataset<R: Rng>(rng: &mut R) -> Vec<Vec<f64>> {
    let n = rng.random_range(1..=100);
    let m = rng.random_range(1..=3);
    match rng.random_range(0..3) {
        0 => (0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect(),
        1 => {
            let blobs: Vec<Vec<f64>> = (0..rng.random_range(1..=4))
                .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
                .collect();
            (0..n)
                .map(|_| {
                    let b = &blobs[rng.random_range(0..blobs.len())];
                    b.iter()
                        .map(|c| (c + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0))
                        .collect()
                })
                .collect()
        }
        _ => (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(0..5) as f64 / 4.0).collect())
            .collect(),
    }
}

fn criterion_clustering() -> Verdict {
    let params = ClusteringParams::default();
    let mut rng = stream(2024, Stream::Topology, 0);
    let mut centres = 0;
    for case in 0..200 {
        let data = random_dataset(&mut rng);
        let expected = brute_force_cluster(&data, params.alpha, params.beta, params.epsilon_reject);
        let got = match subtractive_cluster(&data, &params) {
            Ok(c) => c,
            Err(e) => return Verdict::new(false, format!("dataset {case}: {e}")),
        };
        let got_idx: Vec<usize> = got.iter().map(|c| c.index).collect();
        if got_idx != expected {
            return Verdict::new(false, format!("dataset {case}: {got_idx:?} vs oracle {expected:?}"));
        }
        if got.iter().zip(&expected).any(|(c, &i)| c.point != data[i]) {
            return Verdict::new(false, format!("dataset {case}: centre coordinates differ"));
        }
        centres += got.len();
    }
    Verdict::new(true, format!("200 datasets, {centres} centres identical to the oracle"))
}

// ---------------------------------------------------------------------------
// 2. Defuzzification and fuzzification

fn trapezoid_centroid(samples: &[f64]) -> f64 {
    let h = 1.0 / (samples.len() - 1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..samples.len() - 1 {
        let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
        num += h * (x0 * samples[i] + x1 * samples[i + 1]) / 2.0;
        den += h * (samples[i] + samples[i + 1]) / 2.0;
    }
    num / den
}

fn random_aggregate<R: Rng>(rng: &mut R) -> Vec<f64> {
    let bells: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..=5))
        .map(|_| {
            (
                rng.random::<f64>(),
                rng.random_range(0.02..0.4),
                rng.random_range(1.0..12.0),
                rng.random_range(0.05..=1.0),
            )
        })
        .collect();
    (0..OUTPUT_GRID_POINTS)
        .map(|i| {
            let x = i as f64 / (OUTPUT_GRID_POINTS - 1) as f64;
            bells
                .iter()
                .map(|&(v, s, b, clip)| (1.0 / (1.0 + ((x - v) / s).abs().powf(2.0 * b))).min(clip))
                .fold(0.0, f64::max)
        })
        .collect()
}

fn criterion_fuzzy() -> Verdict {
    let mut rng = stream(2024, Stream::Fading, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let samples = random_aggregate(&mut rng);
        let oracle = trapezoid_centroid(&samples);
        let got = match defuzzify(&Aggregate { samples }) {
            Ok(v) => v,
            Err(e) => return Verdict::new(false, e.to_string()),
        };
        worst = worst.max((got - oracle).abs());
    }
    let width = ClusteringParams::default().set_width();
    let dominants: Vec<Label> = [
        (Metric::Rsrp, Polarity::Benefit, 0.2),
        (Metric::Sinr, Polarity::Benefit, 0.4),
        (Metric::Distance, Polarity::Cost, 0.8),
    ]
    .iter()
    .map(|&(m, p, x)| {
        let mf = MembershipFunction::evenly_spaced(m, 3, width, (0.0, 1.0), p).expect("valid MF");
        fuzzify(&mf, x).dominant
    })
    .collect();
    let state_ok = dominants == [Label::Low, Label::Medium, Label::High];
    Verdict::new(
        worst < 1e-9 && state_ok,
        format!("max |centroid - quadrature| = {worst:.2e} over 100 aggregates; (0.2, 0.4, 0.8) -> {dominants:?}"),
    )
}

// ---------------------------------------------------------------------------
// 3. Q-learning optimality

const CHAIN: u8 = 6;
const GAMMA: f64 = 0.9;

fn chain_dynamics(s: u8, a: Action) -> (f64, u8, bool) {
    match a {
        Action::Trigger if s + 1 == CHAIN => (15.0, s, true),
        Action::Trigger => (0.0, s + 1, false),
        Action::Maintain if s == 0 => (1.0, 0, false),
        Action::Maintain => (0.0, s - 1, false),
    }
}

struct Chain {
    pos: u8,
    start: u8,
}

impl Environment for Chain {
    type State = u8;
    fn agent_count(&self) -> usize {
        1
    }
    fn begin_epoch(&mut self, epoch: usize) {
        self.start = (epoch % CHAIN as usize) as u8;
        self.pos = self.start;
    }
    fn observe(&self, _: usize) -> u8 {
        self.pos
    }
    fn step(&mut self, actions: &[Action]) -> Vec<Transition<u8>> {
        let (reward, next, terminal) = chain_dynamics(self.pos, actions[0]);
        self.pos = if terminal { self.start } else { next };
        vec![Transition {
            taken: actions[0],
            reward,
            next_state: next,
            terminal,
        }]
    }
}

fn value_iteration_policy() -> Vec<Action> {
    let mut v = vec![0.0; CHAIN as usize];
    let q = |v: &[f64], s: u8, a: Action| {
        let (r, next, terminal) = chain_dynamics(s, a);
        r + if terminal { 0.0 } else { GAMMA * v[next as usize] }
    };
    for _ in 0..2000 {
        v = (0..CHAIN)
            .map(|s| q(&v, s, Action::Trigger).max(q(&v, s, Action::Maintain)))
            .collect();
    }
    (0..CHAIN)
        .map(|s| {
            if q(&v, s, Action::Trigger) > q(&v, s, Action::Maintain) {
                Action::Trigger
            } else {
                Action::Maintain
            }
        })
        .collect()
}

struct Loop;

impl Environment for Loop {
    type State = ();
    fn agent_count(&self) -> usize {
        1
    }
    fn begin_epoch(&mut self, _: usize) {}
    fn observe(&self, _: usize) {}
    fn step(&mut self, _: &[Action]) -> Vec<Transition<()>> {
        vec![Transition {
            taken: Action::Trigger,
            reward: 1.0,
            next_state: (),
            terminal: false,
        }]
    }
}

fn criterion_qlearning() -> Verdict {
    let params = QLearnParams {
        learning_rate: 0.1,
        discount: GAMMA,
        epsilon_start: 0.5,
        epsilon_end: 0.05,
        epochs: 5000,
        episode_steps: 20,
    };
    let optimum = value_iteration_policy();
    let mut matched = 0;
    for seed in 0..20 {
        let table = match train(
            &mut Chain { pos: 0, start: 0 },
            &params,
            &mut stream(seed, Stream::Exploration, 0),
        ) {
            Ok(t) => t,
            Err(e) => return Verdict::new(false, e.to_string()),
        };
        matched += (0..CHAIN).filter(|s| table.greedy(s) == optimum[*s as usize]).count();
    }
    let loop_params = QLearnParams {
        epochs: 1,
        episode_steps: 3000,
        ..params
    };
    let q = train(&mut Loop, &loop_params, &mut stream(0, Stream::Exploration, 0))
        .map(|t| t.values(&())[0])
        .unwrap_or(f64::NAN);
    let target = 1.0 / (1.0 - GAMMA);
    let total = 20 * CHAIN as usize;
    Verdict::new(
        matched == total && (q - target).abs() < 1e-3,
        format!("greedy = optimum in {matched}/{total} state-seeds; loop Q = {q:.6} vs {target}"),
    )
}

// ---------------------------------------------------------------------------
// Desk-scale pipeline driven through the binary

fn son_flha(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_son-flha"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

const COMPARE: [&str; 5] = ["--out", "cmp", "compare", "--artifacts", "art"];

fn desk_pipeline(work: &Path) -> Result<(), String> {
    son_flha(work, &["--out", "art", "collect"])?;
    son_flha(work, &["--out", "art", "train"])?;
    son_flha(work, &COMPARE)
}

/// Rows of a comma-separated table after its leading `#` comments.
fn table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| format!("{}: empty", path.display()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Result<usize, String> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| format!("no column {name}"))
}

// ---------------------------------------------------------------------------
// 4. Rule-extraction monotonicity

fn ladder_monotone(pairs: &mut [(f64, Label)]) -> bool {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.windows(2).all(|w| w[0].1 <= w[1].1)
}

fn trained_table_monotone(path: &Path) -> Result<(bool, usize), String> {
    let (header, rows) = table(path)?;
    let (dq, label) = (column(&header, "delta_q")?, column(&header, "ho_factor")?);
    let mut pairs = rows
        .iter()
        .map(|r| {
            let v: f64 = r[dq].parse().map_err(|e| format!("{e}"))?;
            let l: Label = r[label].parse()?;
            Ok((v, l))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok((ladder_monotone(&mut pairs), pairs.len()))
}

fn criterion_monotone(art: &Path) -> Verdict {
    let mut detail = Vec::new();
    let mut pass = true;
    for path in [art.join("qtable.txt"), art.join("flha-q/qtable.txt")] {
        match trained_table_monotone(&path) {
            Ok((ok, n)) => {
                pass &= ok;
                detail.push(format!(
                    "{} ({n} states) {}",
                    path.display(),
                    if ok { "ok" } else { "violated" }
                ));
            }
            Err(e) => return Verdict::new(false, e),
        }
    }
    let mut rng = stream(77, Stream::Exploration, 1);
    let labels = Label::ladder(4).expect("ladder");
    let params = ClusteringParams::default();
    let mut checked = 0;
    for _ in 0..200 {
        let mut dq = BTreeMap::new();
        for _ in 0..rng.random_range(2..=64) {
            let s = FuzzyState([0, 1, 2].map(|_| labels[rng.random_range(0..4)]));
            let scale = if rng.random::<f64>() < 0.2 { 12.0 } else { 3.0 };
            dq.insert(s, rng.random_range(-scale..scale));
        }
        let Ok((rules, _)) = extract_rules(&dq, &params) else {
            continue;
        };
        let mut pairs: Vec<(f64, Label)> = rules.rules.iter().map(|r| (r.delta_q.unwrap(), r.consequent)).collect();
        pass &= ladder_monotone(&mut pairs);
        checked += 1;
    }
    detail.push(format!("{checked} random tables"));
    Verdict::new(pass && checked > 0, detail.join("; "))
}

// ---------------------------------------------------------------------------
// 5. Desk-scale direction-and-margin comparison

struct Row {
    speed: String,
    mechanism: String,
    seed: String,
    ho_ratio: f64,
    pingpong: f64,
    failure: f64,
    throughput: f64,
    latency: Option<f64>,
}

fn summary_rows(path: &Path) -> Result<Vec<Row>, String> {
    let (h, rows) = table(path)?;
    let idx = |n| column(&h, n);
    let (sp, me, se) = (idx("speed_kmh")?, idx("mechanism")?, idx("seed")?);
    let (ho, pp, hf) = (idx("ho_ratio")?, idx("pingpong_ratio")?, idx("failure_ratio")?);
    let (th, la) = (idx("sum_throughput_bps")?, idx("mean_latency_s")?);
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
    rows.iter()
        .map(|r| {
            Ok(Row {
                speed: r[sp].clone(),
                mechanism: r[me].clone(),
                seed: r[se].clone(),
                ho_ratio: num(&r[ho])?,
                pingpong: num(&r[pp])?,
                failure: num(&r[hf])?,
                throughput: num(&r[th])?,
                latency: r[la].parse().ok(),
            })
        })
        .collect()
}

type Check = fn(&Row, &[&Row], &Row) -> bool;

fn criterion_comparison(work: &Path, pipeline: &Result<(), String>) -> Verdict {
    if let Err(e) = pipeline {
        return Verdict::new(false, e.clone());
    }
    let rows = match summary_rows(&work.join("cmp/summary.csv")) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e),
    };
    let checks: [(&str, Check); 5] = [
        ("(a) HO ratio <= 0.5 x A3", |son, _, a3| {
            son.ho_ratio <= 0.5 * a3.ho_ratio
        }),
        ("(b) ping-pong below all", |son, others, _| {
            others.iter().all(|o| son.pingpong < o.pingpong)
        }),
        ("(c) HOF <= each", |son, others, _| {
            others.iter().all(|o| son.failure <= o.failure)
        }),
        ("(d) throughput >= A3", |son, _, a3| son.throughput >= a3.throughput),
        ("(e) latency <= A3", |son, _, a3| match (son.latency, a3.latency) {
            (Some(s), Some(a)) => s <= a,
            _ => false,
        }),
    ];
    let mut speeds: Vec<&str> = Vec::new();
    for r in &rows {
        if !speeds.contains(&r.speed.as_str()) {
            speeds.push(&r.speed);
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, check) in checks {
        let mut per_speed = Vec::new();
        for speed in &speeds {
            let seeds: BTreeSet<&str> = rows
                .iter()
                .filter(|r| r.speed == *speed)
                .map(|r| r.seed.as_str())
                .collect();
            let mut held = 0;
            for seed in &seeds {
                let cell: Vec<&Row> = rows.iter().filter(|r| r.speed == *speed && r.seed == *seed).collect();
                let son = cell.iter().find(|r| r.mechanism == "flha-son");
                let a3 = cell.iter().find(|r| r.mechanism == "a3");
                let (Some(son), Some(a3)) = (son, a3) else { continue };
                let others: Vec<&Row> = cell.iter().copied().filter(|r| r.mechanism != "flha-son").collect();
                if others.len() == 3 && check(son, &others, a3) {
                    held += 1;
                }
            }
            pass &= held >= 2 && seeds.len() == 3;
            per_speed.push(format!("{speed} km/h {held}/{}", seeds.len()));
        }
        parts.push(format!("{name}: {}", per_speed.join(", ")));
    }
    Verdict::new(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 6. Determinism

fn tree(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| format!("{}: {e}", dir.display()))? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).map_err(|e| e.to_string())?;
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    Ok(files)
}

fn criterion_determinism(work: &Path, pipeline: &Result<(), String>) -> Verdict {
    if let Err(e) = pipeline {
        return Verdict::new(false, e.clone());
    }
    let first = work.join("cmp_first");
    if let Err(e) = fs::rename(work.join("cmp"), &first) {
        return Verdict::new(false, e.to_string());
    }
    if let Err(e) = son_flha(work, &COMPARE) {
        return Verdict::new(false, e);
    }
    match (tree(&first), tree(&work.join("cmp"))) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<String> = a
                .keys()
                .chain(b.keys())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .filter(|k| a.get(*k) != b.get(*k))
                .map(|k| k.display().to_string())
                .collect();
            Verdict::new(
                differing.is_empty() && !a.is_empty(),
                format!("{} files compared, differing: {differing:?}", a.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => Verdict::new(false, e),
    }
}

// ---------------------------------------------------------------------------
// 7. Rule-table shape

fn criterion_rules(art: &Path, pipeline: &Result<(), String>) -> Verdict {
    if let Err(e) = pipeline {
        return Verdict::new(false, e.clone());
    }
    let (header, rows) = match table(&art.join("rules.txt")) {
        Ok(t) => t,
        Err(e) => return Verdict::new(false, e),
    };
    let layout = header == ["rule", "rsrp", "sinr", "d", "delta_q", "ho_factor"];
    let antecedents: BTreeSet<(String, String, String)> = rows
        .iter()
        .map(|r| (r[1].clone(), r[2].clone(), r[3].clone()))
        .collect();
    let unique = antecedents.len() == rows.len();
    let n = rows.len();
    Verdict::new(
        (20..=48).contains(&n) && unique && layout,
        format!(
            "{n} rules, antecedents {}, columns {}",
            if unique { "unique" } else { "repeated" },
            header.join(",")
        ),
    )
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let work = work.path();
    let art = work.join("art");
    let mut results: Vec<(&str, Verdict)> = Vec::new();

    results.push((
        "1 clustering oracle",
        timed(Some(Duration::from_secs(10)), criterion_clustering),
    ));
    results.push((
        "2 fuzzy pipeline oracle",
        timed(Some(Duration::from_secs(5)), criterion_fuzzy),
    ));
    results.push((
        "3 Q-learning optimality",
        timed(Some(Duration::from_secs(30)), criterion_qlearning),
    ));

    let start = Instant::now();
    let pipeline = desk_pipeline(work);
    let pipeline_time = start.elapsed();

    results.push((
        "4 rule-extraction monotonicity",
        timed(None, || match &pipeline {
            Ok(()) => criterion_monotone(&art),
            Err(e) => Verdict::new(false, e.clone()),
        }),
    ));
    let mut comparison = timed(Some(Duration::from_secs(600).saturating_sub(pipeline_time)), || {
        criterion_comparison(work, &pipeline)
    });
    comparison.detail = format!(
        "{} (+{:.1} s collect/train/compare)",
        comparison.detail,
        pipeline_time.as_secs_f64()
    );
    results.push(("5 desk-scale comparison", comparison));
    results.push(("6 determinism", timed(None, || criterion_determinism(work, &pipeline))));
    results.push(("7 rule-table shape", timed(None, || criterion_rules(&art, &pipeline))));

    let mut failed = 0;
    for (name, v) in &results {
        println!(
            "criterion {name}: {} | {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
