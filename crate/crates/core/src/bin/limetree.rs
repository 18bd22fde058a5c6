use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use limetree::bench::{
    run_depth_sweep, run_fidelity_experiment, write_file, ExperimentConfig, Method,
    DEFAULT_BENCH_EPSILON,
};
use limetree::blackbox::{BlackBoxDescriptor, RemoteEndpoint, SyntheticKind};
use limetree::domain::{load_image, DomainDescriptor, InterpretableDomain, OcclusionStrategy};
use limetree::explain::{extract_rule, feature_importance, render_tree, Importance, RenderedTree, Rule};
use limetree::service::session::LimeReport;
use limetree::service::{run_fit, FitRequest, SessionStore};
use limetree::sampling::{DEFAULT_KERNEL_WIDTH, DEFAULT_SAMPLE_BUDGET};
use limetree::segmentation::Segmentation;
use limetree::tree::{FitReport, SurrogateTree, Variant};
use limetree::{InterpretablePoint, Result};

#[derive(Parser)]
#[command(name = "limetree", version, about = "Tree surrogate explanations for black-box classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic fidelity experiments.
    #[command(subcommand)]
    Bench(Bench),
    /// Explain one image against a black box and write the result as JSON.
    Explain(ExplainArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum Bench {
    /// Mean loss per method and class scope.
    Fidelity(BenchArgs),
    /// Loss against tree depth.
    DepthSweep(SweepArgs),
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "segment-logit")]
    family: SyntheticKind,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    top: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Classes of each synthetic black box (default: max(top, 5)).
    #[arg(long)]
    class_count: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BENCH_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_KERNEL_WIDTH)]
    kernel_width: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_BUDGET)]
    sample_budget: usize,
    #[arg(long)]
    out: PathBuf,
}

impl BenchArgs {
    fn config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(self.family, self.trials, self.d, self.top, self.seed);
        if let Some(k) = self.class_count {
            c.class_count = k;
        }
        c.epsilon = self.epsilon;
        c.kernel_width = self.kernel_width;
        c.sample_budget = self.sample_budget;
        c
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    bench: BenchArgs,
    /// Also write per-trial curves.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    image: PathBuf,
    /// Segment-id mask (PNG or PGM); use --grid instead for a regular grid.
    #[arg(long, conflicts_with = "grid")]
    mask: Option<PathBuf>,
    /// Grid segmentation as ROWSxCOLS.
    #[arg(long)]
    grid: Option<String>,
    /// Number of top classes to explain.
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = DEFAULT_BENCH_EPSILON)]
    epsilon: f64,
    /// Surrogates to fit, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "limet,limet-relabeled,lime")]
    variants: Vec<String>,
    /// `black`, `white`, `mean` or `#rrggbb`.
    #[arg(long, default_value = "black")]
    occlusion: String,
    /// Remote model URL; without it a synthetic model is used.
    #[arg(long)]
    remote: Option<String>,
    #[arg(long, default_value = "segment-logit")]
    family: SyntheticKind,
    #[arg(long, default_value_t = 5)]
    class_count: usize,
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_KERNEL_WIDTH)]
    kernel_width: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_BUDGET)]
    sample_budget: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Directory holding persisted sessions.
    #[arg(long, default_value = "sessions")]
    root: PathBuf,
}

#[derive(Serialize)]
struct TreeExplanation {
    tree: SurrogateTree,
    rendered: RenderedTree,
    importance: Importance,
    anchor_rule: Rule,
}

#[derive(Serialize)]
struct ExplainOutput {
    domain: DomainDescriptor,
    blackbox: BlackBoxDescriptor,
    classes: Vec<usize>,
    anchor_probabilities: Vec<f64>,
    reports: Vec<FitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lime: Option<LimeReport>,
    trees: BTreeMap<Variant, TreeExplanation>,
}

fn explain(a: &ExplainArgs) -> Result<()> {
    let img = load_image(&a.image)?;
    let seg = match (&a.mask, &a.grid) {
        (Some(m), _) => Segmentation::load(m)?,
        (None, Some(g)) => {
            let (r, c) = g
                .split_once(['x', 'X'])
                .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
                .ok_or_else(|| limetree::Error::invalid(format!("bad grid {g:?}, want ROWSxCOLS")))?;
            Segmentation::grid(img.width(), img.height(), r, c)?
        }
        (None, None) => return Err(limetree::Error::invalid("give --mask or --grid")),
    };
    let occlusion: OcclusionStrategy = a.occlusion.parse()?;
    let domain = InterpretableDomain::image(img, seg, occlusion)?;
    let descriptor = match &a.remote {
        Some(url) => BlackBoxDescriptor::Remote {
            endpoint: RemoteEndpoint::new(url.clone()),
            class_count: None,
        },
        None => BlackBoxDescriptor::Synthetic {
            family: a.family,
            class_count: a.class_count,
            seed: a.model_seed,
        },
    };
    let bb = descriptor.bind(&domain)?;
    let variants = a
        .variants
        .iter()
        .map(|v| v.parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    let req = FitRequest {
        top: Some(a.classes),
        epsilon: a.epsilon,
        variants,
        kernel_width: a.kernel_width,
        sample_budget: a.sample_budget,
        seed: a.seed,
        ..FitRequest::default()
    };
    let outcome = run_fit(&domain, &bb, &req)?;
    let anchor = InterpretablePoint::ones(domain.d());
    let trees = outcome
        .trees
        .iter()
        .map(|(v, t)| {
            Ok((
                *v,
                TreeExplanation {
                    rendered: render_tree(t, &domain)?,
                    importance: feature_importance(t),
                    anchor_rule: extract_rule(t, t.leaf_of(&anchor)?)?,
                    tree: t.clone(),
                },
            ))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let out = ExplainOutput {
        domain: domain.descriptor(),
        blackbox: descriptor,
        classes: outcome.classes,
        anchor_probabilities: outcome.anchor_probabilities,
        reports: outcome.reports,
        lime: outcome.lime,
        trees,
    };
    write_file(&a.out, &serde_json::to_string_pretty(&out)?)
}

fn serve(a: &ServeArgs) -> Result<()> {
    let store = Arc::new(SessionStore::open(&a.root)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr).await?;
        eprintln!(
            "serving {} sessions from {} on http://{}",
            store.len(),
            a.root.display(),
            listener.local_addr()?
        );
        limetree::service::serve(listener, store).await
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(Bench::Fidelity(a)) => {
            let results = run_fidelity_experiment(&a.config())?;
            write_file(&a.out, &results.to_csv())
        }
        Command::Bench(Bench::DepthSweep(a)) => {
            let results = run_depth_sweep(&a.bench.config())?;
            write_file(&a.bench.out, &results.to_csv())?;
            match &a.curves {
                Some(p) => write_file(p, &results.curves_csv()),
                None => Ok(()),
            }
        }
        Command::Explain(a) => explain(&a),
        Command::Serve(a) => serve(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
