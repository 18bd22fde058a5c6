//! Fidelity experiments over seeded synthetic black boxes: the four surrogate
//! methods side by side, and loss-versus-depth curves.
//!
//! Each trial draws its own black box and is evaluated on its full training
//! sample, which is the whole interpretable space whenever `2^d` fits the
//! sample budget.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blackbox::{make_synthetic, SyntheticKind, SyntheticSpec};
use crate::domain::InterpretableDomain;
use crate::error::{Error, Result};
use crate::fidelity::{complete_from_rows, relabel_leaves};
use crate::lime::{lime_explain_labelled, DEFAULT_ALPHA};
use crate::sampling::{
    enumerate_domain, WeightedSample, DEFAULT_ENUMERATION_CAP, DEFAULT_KERNEL_WIDTH,
    DEFAULT_SAMPLE_BUDGET,
};
use crate::tree::{
    fit_limetree_labelled, fit_tree, loss_lime, loss_limetree_scaled, top_classes,
    LabelledSample,
};

/// Fidelity target used by the experiments unless overridden.
pub const DEFAULT_BENCH_EPSILON: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lime,
    Limet,
    LimetRelabeled,
    LimetComplete,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Lime,
        Method::Limet,
        Method::LimetRelabeled,
        Method::LimetComplete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lime => "lime",
            Method::Limet => "limet",
            Method::LimetRelabeled => "limet-relabeled",
            Method::LimetComplete => "limet-complete",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Weighted squared error for a single class.
    LimeLoss,
    /// Weight-normalised multi-output loss over the top classes.
    LimetreeLoss,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::LimeLoss => "lime-loss",
            Metric::LimetreeLoss => "limetree-loss",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: SyntheticKind,
    pub trials: usize,
    pub d: usize,
    /// Number of top classes explained.
    pub top: usize,
    pub class_count: usize,
    pub seed: u64,
    pub kernel_width: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub sample_budget: usize,
}

impl ExperimentConfig {
    pub fn new(family: SyntheticKind, trials: usize, d: usize, top: usize, seed: u64) -> Self {
        Self {
            family,
            trials,
            d,
            top,
            class_count: top.max(5),
            seed,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            epsilon: DEFAULT_BENCH_EPSILON,
            alpha: DEFAULT_ALPHA,
            sample_budget: DEFAULT_SAMPLE_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.d == 0 || self.d > DEFAULT_ENUMERATION_CAP {
            return Err(Error::invalid(format!(
                "d must lie in 1..={DEFAULT_ENUMERATION_CAP} so complete trees can be built"
            )));
        }
        if self.top == 0 || self.top > self.class_count {
            return Err(Error::invalid(format!(
                "top = {} must lie in 1..={} (the class count)",
                self.top, self.class_count
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon must lie in [0, 1]"));
        }
        if !(self.kernel_width > 0.0) {
            return Err(Error::invalid("kernel width must be positive"));
        }
        if self.sample_budget == 0 {
            return Err(Error::invalid("sample budget must be at least 1"));
        }
        Ok(())
    }

    /// Per-trial seeds, drawn in order from a generator seeded with `seed`.
    pub fn trial_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.trials).map(|_| rng.random::<u64>()).collect()
    }
}

/// One value measured in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub method: Method,
    pub metric: Metric,
    /// `top-n` for multi-output losses, `class-k` (k-th most probable) for
    /// single-class losses.
    pub class_scope: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub classes: Vec<usize>,
    pub measurements: Vec<Measurement>,
}

impl TrialRecord {
    pub fn value(&self, method: Method, metric: Metric, scope: &str) -> Option<f64> {
        self.measurements
            .iter()
            .find(|m| m.method == method && m.metric == metric && m.class_scope == scope)
            .map(|m| m.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub metric: Metric,
    pub class_scope: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityResults {
    pub config: ExperimentConfig,
    pub rows: Vec<SummaryRow>,
    pub trials: Vec<TrialRecord>,
}

impl FidelityResults {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,metric,class_scope,mean,stderr,trials,d\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.method.as_str(),
                r.metric.as_str(),
                r.class_scope,
                fmt_num(r.mean),
                fmt_num(r.stderr),
                r.trials,
                r.d
            );
        }
        out
    }

    /// Per-trial values of one cell, in trial order.
    pub fn series(&self, method: Method, metric: Metric, scope: &str) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| t.value(method, metric, scope))
            .collect()
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.12e}")
}

/// Mean and standard error of the mean (zero for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-sided exact sign test for `a < b` on paired values: the probability of
/// at least the observed number of wins among untied pairs under a fair coin.
pub fn sign_test_less(a: &[f64], b: &[f64]) -> SignTest {
    let mut wins = 0usize;
    let mut losses = 0usize;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            wins += 1;
        } else if x > y {
            losses += 1;
        }
    }
    let n = wins + losses;
    // P(X >= wins), X ~ Binomial(n, 1/2), summed in log space
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let mut ln_choose = 0.0f64; // ln C(n, 0)
    let mut p = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= wins {
            p += (ln_choose + ln_half_n).exp();
        }
    }
    SignTest {
        wins,
        losses,
        ties: a.len().min(b.len()) - n,
        p_value: if n == 0 { 1.0 } else { p.min(1.0) },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

/// Everything a trial needs: its black box's outputs on the sample and on
/// the whole domain.
struct TrialData {
    domain: InterpretableDomain,
    bb: crate::blackbox::BlackBoxBinding,
    labelled: LabelledSample,
    classes: Vec<usize>,
    /// Probability rows for the full enumeration, by point index.
    full_rows: Vec<Vec<f64>>,
}

fn bench_domain(d: usize) -> Result<InterpretableDomain> {
    InterpretableDomain::from_tokens((0..d).map(|i| format!("s{i}")).collect())
}

fn prepare_trial(config: &ExperimentConfig, seed: u64) -> Result<TrialData> {
    let domain = bench_domain(config.d)?;
    let spec = SyntheticSpec {
        kind: config.family,
        d: config.d,
        class_count: config.class_count,
        seed,
    };
    let bb = make_synthetic(&spec, &domain)?;
    let sample = WeightedSample::around_anchor(config.d, config.sample_budget, config.kernel_width, seed)?;
    let enumerated = sample.len() == 1usize << config.d && sample.points[0].index() == 0;
    let labelled = LabelledSample::query(&bb, &domain, sample)?;
    let full_rows = if enumerated {
        labelled.probabilities.clone()
    } else {
        bb.predict_points(&domain, &enumerate_domain(config.d)?, crate::blackbox::DEFAULT_BATCH)?
    };
    let anchor_row = &full_rows[full_rows.len() - 1];
    let classes = top_classes(anchor_row, config.top);
    Ok(TrialData {
        domain,
        bb,
        labelled,
        classes,
        full_rows,
    })
}

fn scaled_loss(f: &[Vec<f64>], g: &[Vec<f64>], w: &[f64], n: usize) -> Result<f64> {
    // the single-class row drops the halving so it matches the per-class error
    loss_limetree_scaled(f, g, w, if n == 1 { 1.0 } else { 0.5 })
}

fn run_trial(config: &ExperimentConfig, seed: u64) -> Result<TrialRecord> {
    let t = prepare_trial(config, seed)?;
    let points = &t.labelled.sample.points;
    let weights = &t.labelled.sample.weights;
    let mut out = Vec::new();

    let lime = lime_explain_labelled(&t.labelled, &t.classes, config.alpha)?;
    let lime_rows = lime.predict_clipped(points)?;
    let lime_raw: Vec<Vec<f64>> = points
        .iter()
        .map(|p| lime.surrogates.iter().map(|s| s.predict(p)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    for n in 1..=config.top {
        let classes = &t.classes[..n];
        let scope = format!("top-{n}");
        let targets = t.labelled.targets(classes)?;

        let (tree, _) = fit_limetree_labelled(&t.labelled, classes, config.epsilon, config.d)?;
        let relabeled = relabel_leaves(&tree, &t.bb, &t.domain)?;
        let complete = complete_from_rows(config.d, &t.full_rows, classes)?;

        let lime_n: Vec<Vec<f64>> = lime_rows.iter().map(|r| r[..n].to_vec()).collect();
        let preds = [
            (Method::Lime, lime_n),
            (Method::Limet, tree.predict_many(points)?),
            (Method::LimetRelabeled, relabeled.predict_many(points)?),
            (Method::LimetComplete, complete.predict_many(points)?),
        ];
        for (method, g) in &preds {
            out.push(Measurement {
                method: *method,
                metric: Metric::LimetreeLoss,
                class_scope: scope.clone(),
                value: scaled_loss(&targets, g, weights, n)?,
            });
        }

        if n == config.top {
            // per-class error of each method's top-n model
            for k in 0..n {
                let f: Vec<f64> = targets.iter().map(|r| r[k]).collect();
                let column = |rows: &[Vec<f64>]| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
                let per_method = [
                    (Method::Lime, column(&lime_raw)),
                    (Method::Limet, column(&preds[1].1)),
                    (Method::LimetRelabeled, column(&preds[2].1)),
                    (Method::LimetComplete, column(&preds[3].1)),
                ];
                for (method, g) in per_method {
                    out.push(Measurement {
                        method,
                        metric: Metric::LimeLoss,
                        class_scope: format!("class-{}", k + 1),
                        value: loss_lime(&f, &g, weights)?,
                    });
                }
            }
        }
    }
    Ok(TrialRecord {
        seed,
        classes: t.classes,
        measurements: out,
    })
}

/// Runs `f` over every trial seed on a pool of scoped threads; results keep
/// trial order.
fn run_pool<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(seeds.len())
        .max(1);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<T>>> = (0..seeds.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = f(seeds[i]);
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every trial ran"))
        .collect()
}

fn summarise(
    records: &[TrialRecord],
    keys: impl IntoIterator<Item = (Method, Metric, String)>,
    d: usize,
) -> Vec<SummaryRow> {
    keys.into_iter()
        .map(|(method, metric, scope)| {
            let values: Vec<f64> = records
                .iter()
                .filter_map(|t| t.value(method, metric, &scope))
                .collect();
            let (mean, stderr) = mean_stderr(&values);
            SummaryRow {
                method,
                metric,
                class_scope: scope,
                mean,
                stderr,
                trials: values.len(),
                d,
            }
        })
        .collect()
}

/// Four surrogates per trial, scored with the multi-output loss for each
/// top-n class set and with the per-class loss for each explained class.
pub fn run_fidelity_experiment(config: &ExperimentConfig) -> Result<FidelityResults> {
    config.validate()?;
    let records = run_pool(&config.trial_seeds(), |seed| run_trial(config, seed))?;
    let mut keys = Vec::new();
    for n in 1..=config.top {
        for m in Method::ALL {
            keys.push((m, Metric::LimetreeLoss, format!("top-{n}")));
        }
    }
    for k in 1..=config.top {
        for m in Method::ALL {
            keys.push((m, Metric::LimeLoss, format!("class-{k}")));
        }
    }
    Ok(FidelityResults {
        config: config.clone(),
        rows: summarise(&records, keys, config.d),
        trials: records,
    })
}

/// Loss of each method at each depth bound for one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTrial {
    pub seed: u64,
    /// Greedy tree loss at depth bounds `1..=d`.
    pub limet: Vec<f64>,
    pub limet_relabeled: Vec<f64>,
    /// Complete-tree loss (reached at depth `d`).
    pub limet_complete: f64,
    /// Depth-independent linear baseline.
    pub lime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub metric: Metric,
    pub class_scope: String,
    pub depth: usize,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub trials: Vec<SweepTrial>,
}

impl SweepResults {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("method,metric,class_scope,depth,depth_fraction,mean,stderr,trials,d\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.method.as_str(),
                r.metric.as_str(),
                r.class_scope,
                r.depth,
                fmt_num(r.depth as f64 / r.d as f64),
                fmt_num(r.mean),
                fmt_num(r.stderr),
                r.trials,
                r.d
            );
        }
        out
    }

    /// Per-trial curves as CSV: one row per trial, method and depth.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("trial,seed,method,depth,loss\n");
        for (i, t) in self.trials.iter().enumerate() {
            for (depth, v) in t.limet.iter().enumerate() {
                let _ = writeln!(out, "{i},{},limet,{},{}", t.seed, depth + 1, fmt_num(*v));
            }
            for (depth, v) in t.limet_relabeled.iter().enumerate() {
                let _ = writeln!(out, "{i},{},limet-relabeled,{},{}", t.seed, depth + 1, fmt_num(*v));
            }
        }
        out
    }
}

fn sweep_trial(config: &ExperimentConfig, seed: u64) -> Result<SweepTrial> {
    let t = prepare_trial(config, seed)?;
    let points = &t.labelled.sample.points;
    let weights = &t.labelled.sample.weights;
    let n = config.top;
    let targets = t.labelled.targets(&t.classes)?;

    let mut limet = Vec::with_capacity(config.d);
    let mut limet_relabeled = Vec::with_capacity(config.d);
    for bound in 1..=config.d {
        let mut tree = fit_tree(points, &targets, weights, bound)?;
        tree.classes = t.classes.clone();
        limet.push(scaled_loss(&targets, &tree.predict_many(points)?, weights, n)?);
        let relabeled = relabel_leaves(&tree, &t.bb, &t.domain)?;
        limet_relabeled.push(scaled_loss(&targets, &relabeled.predict_many(points)?, weights, n)?);
    }
    let complete = complete_from_rows(config.d, &t.full_rows, &t.classes)?;
    let limet_complete = scaled_loss(&targets, &complete.predict_many(points)?, weights, n)?;
    let lime = lime_explain_labelled(&t.labelled, &t.classes, config.alpha)?;
    let lime = scaled_loss(&targets, &lime.predict_clipped(points)?, weights, n)?;
    Ok(SweepTrial {
        seed,
        limet,
        limet_relabeled,
        limet_complete,
        lime,
    })
}

/// Multi-output loss over the top classes against the depth bound, for
/// greedy and relabeled trees, with the complete tree at full depth and the
/// linear baseline at every depth.
pub fn run_depth_sweep(config: &ExperimentConfig) -> Result<SweepResults> {
    config.validate()?;
    let trials = run_pool(&config.trial_seeds(), |seed| sweep_trial(config, seed))?;
    let scope = format!("top-{}", config.top);
    let mut rows = Vec::new();
    let mut push = |method: Method, depth: usize, values: Vec<f64>| {
        let (mean, stderr) = mean_stderr(&values);
        rows.push(SweepRow {
            method,
            metric: Metric::LimetreeLoss,
            class_scope: scope.clone(),
            depth,
            mean,
            stderr,
            trials: values.len(),
            d: config.d,
        });
    };
    for depth in 1..=config.d {
        push(Method::Lime, depth, trials.iter().map(|t| t.lime).collect());
        push(Method::Limet, depth, trials.iter().map(|t| t.limet[depth - 1]).collect());
        push(
            Method::LimetRelabeled,
            depth,
            trials.iter().map(|t| t.limet_relabeled[depth - 1]).collect(),
        );
    }
    push(
        Method::LimetComplete,
        config.d,
        trials.iter().map(|t| t.limet_complete).collect(),
    );
    Ok(SweepResults {
        config: config.clone(),
        rows,
        trials,
    })
}

pub fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}
