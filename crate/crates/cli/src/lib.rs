//! Command-line pipeline: simulate a forum, fit the model, rank threads,
//! sweep evaluation grids and summarize a fitted model.

pub mod analytics;
pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use forum_hawkes::forumdata::{extract_reply_annotations, ingest_corpus, write_jsonl, CorpusOptions};
use forum_hawkes::inference::{PosteriorEstimate, Sampler, SamplerConfig, TraceRow};
use forum_hawkes::recommend::{
    ranking_report, split_corpus, sweep_experiment, Recommender, SplitSpec, SweepConfig, SweepRow, METHOD_MODEL,
    METHOD_POPULARITY, METHOD_RECENCY,
};
use forum_hawkes::simulator::{simulate, SimConfig};
use forum_hawkes::{ForumCorpus, ModelParams};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "forum-hawkes", version, about = "Point-process model of discussion-forum activity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic corpus and its ground truth.
    Simulate(SimulateArgs),
    /// Fit the model by Gibbs sampling.
    Train(TrainArgs),
    /// Rank training threads for learners over a test window.
    Recommend(RecommendArgs),
    /// Sweep MAP@N over grids of cutoffs, windows, topic counts and depths.
    Evaluate(EvaluateArgs),
    /// Summarize a fitted model.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file with [corpus], [simulate], [train] and [evaluate] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Corpus JSONL to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth JSON; defaults to `<output>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Overrides `[simulate] n_learners`.
    #[arg(long)]
    pub learners: Option<usize>,
    /// Explicit model parameters (JSON) instead of the scenario recipe.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Observation end in days; defaults to the last post.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Gibbs sweeps, burn-in included.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Sweeps discarded before averaging.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Number of topics K.
    #[arg(long)]
    pub topics: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Posterior estimate JSON to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Trace CSV; defaults to `<output>.trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Chain state file, rewritten periodically and at the end.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Continue the chain stored in this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many total iterations, leaving only the checkpoint.
    #[arg(long, requires = "checkpoint")]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Training cutoff in days.
    #[arg(long)]
    pub t1: f64,
    /// End of the test window in days.
    #[arg(long)]
    pub t2: f64,
    /// Estimate fitted on the training split; trained here when absent.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    /// Ranking CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Learners to rank for; defaults to everyone active in the test window.
    #[arg(long = "learner")]
    pub learners: Vec<String>,
    /// Rows kept per learner.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// MAP summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Comma-separated ranking depths for the summary.
    #[arg(long = "top-n", value_delimiter = ',', default_value = "5")]
    pub top_n: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Gibbs sweeps per trained cell, burn-in included.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Sweeps discarded before averaging.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Summary CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Comma-separated training cutoffs; overrides `[evaluate] t1`.
    #[arg(long, value_delimiter = ',')]
    pub t1: Vec<f64>,
    /// Comma-separated test-window lengths in days.
    #[arg(long = "delta-t", value_delimiter = ',')]
    pub delta_t: Vec<f64>,
    /// Comma-separated topic counts.
    #[arg(long, value_delimiter = ',')]
    pub topics: Vec<usize>,
    /// Comma-separated ranking depths.
    #[arg(long = "top-n", value_delimiter = ',')]
    pub top_n: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Posterior estimate JSON from `train`.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Directory for topics.csv, excitation.csv and weekly.csv.
    #[arg(long)]
    pub output: PathBuf,
    /// Top words listed per topic.
    #[arg(long, default_value_t = 10)]
    pub words: usize,
}

/// Exit status for configuration errors, including supercritical
/// parameters.
pub const EXIT_CONFIG: u8 = 2;

/// Runs a parsed command and maps failures to exit codes, printing the
/// error chain to stderr.
pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    let config = e.chain().any(|c| {
        matches!(
            c.downcast_ref::<forum_hawkes::Error>(),
            Some(forum_hawkes::Error::Config(_) | forum_hawkes::Error::Supercritical { .. })
        )
    });
    if config {
        EXIT_CONFIG
    } else {
        1
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Simulate(a) => &a.common,
        Command::Train(a) => &a.common,
        Command::Recommend(a) => &a.common,
        Command::Evaluate(a) => &a.common,
        Command::Analyze(a) => &a.common,
    };
    let config = RunConfig::load(common.config.as_deref())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            bail!(forum_hawkes::Error::Config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("starting worker threads")?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, &config),
        Command::Train(a) => cmd_train(&a, &config),
        Command::Recommend(a) => cmd_recommend(&a, &config),
        Command::Evaluate(a) => cmd_evaluate(&a, &config),
        Command::Analyze(a) => cmd_analyze(&a, &config),
    })
}

/// `<path>.<suffix>` next to `path`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    seed: u64,
    version: &'a str,
    #[serde(flatten)]
    extra: BTreeMap<&'a str, serde_json::Value>,
}

/// How the per-thread topic prior is formed before the text and timing
/// evidence are applied.
const TOPIC_PRIOR: &str = "initiator background rates mu[u][k], normalized over topics";

fn write_metadata(output: &Path, command: &str, seed: u64, extra: BTreeMap<&str, serde_json::Value>) -> Result<()> {
    let meta = Metadata {
        command,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        extra,
    };
    let path = sidecar(output, "meta.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta)?).with_context(|| format!("writing {}", path.display()))
}

fn load_corpus(args: &CorpusArgs, config: &RunConfig) -> Result<(ForumCorpus, CorpusOptions)> {
    let options = config.corpus.options(args.horizon)?;
    let corpus =
        ingest_corpus(&args.input, &options).with_context(|| format!("loading corpus {}", args.input.display()))?;
    Ok((corpus, options))
}

fn sampler_config(args: &SamplerArgs, config: &RunConfig, seed: u64) -> SamplerConfig {
    let mut c = config.train.sampler(seed);
    if let Some(x) = args.iterations {
        c.iterations = x;
    }
    if let Some(x) = args.burn_in {
        c.burn_in = x;
    }
    if let Some(x) = args.topics {
        c.n_topics = x;
    }
    c
}

pub fn cmd_simulate(args: &SimulateArgs, config: &RunConfig) -> Result<()> {
    let seed = args.common.seed;
    let mut scenario = config.simulate.clone();
    if let Some(n) = args.learners {
        scenario.n_learners = n;
    }
    let sim_config = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let params: ModelParams = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            SimConfig {
                params,
                horizon: scenario.horizon,
                tokens_per_post: scenario.tokens_per_post,
                reply_probability: scenario.reply_probability,
                seed,
            }
        }
        None => {
            if scenario.n_learners == 0 {
                bail!(forum_hawkes::Error::Config("at least one learner is required".into()));
            }
            scenario.build(seed)?
        }
    };
    let forum = simulate(&sim_config)?;
    write_jsonl(&args.output, &forum.records)?;
    let truth_path = args.truth.clone().unwrap_or_else(|| sidecar(&args.output, "truth.json"));
    forum.truth.write_json(&truth_path)?;
    let n_posts: usize = forum.records.iter().map(|r| r.posts.len()).sum();
    write_metadata(
        &args.output,
        "simulate",
        seed,
        BTreeMap::from([
            ("threads", forum.records.len().into()),
            ("posts", n_posts.into()),
            ("horizon", sim_config.horizon.into()),
            ("truth", truth_path.display().to_string().into()),
        ]),
    )?;
    println!(
        "simulated {} threads, {} posts over {} days -> {}",
        forum.records.len(),
        n_posts,
        sim_config.horizon,
        args.output.display()
    );
    Ok(())
}

pub fn cmd_train(args: &TrainArgs, config: &RunConfig) -> Result<()> {
    let (corpus, _) = load_corpus(&args.corpus, config)?;
    let ann = extract_reply_annotations(&corpus);
    let mut sampler = match &args.resume {
        Some(path) => Sampler::resume(&corpus, &ann, path).with_context(|| format!("resuming {}", path.display()))?,
        None => Sampler::new(&corpus, &ann, sampler_config(&args.sampler, config, args.common.seed))?,
    };
    let total = sampler.config().iterations;
    let stop = args.stop_after.unwrap_or(total).min(total);
    let every = config.train.checkpoint_every.unwrap_or(10).max(1);
    while sampler.state().iteration < stop {
        let next = (sampler.state().iteration / every + 1) * every;
        sampler.run_until(next.min(stop))?;
        if let Some(path) = &args.checkpoint {
            sampler.save_checkpoint(path)?;
        }
    }
    if let Some(path) = &args.checkpoint {
        sampler.save_checkpoint(path)?;
    }
    if sampler.state().iteration < total {
        println!("stopped at iteration {} of {total}", sampler.state().iteration);
        return Ok(());
    }
    let estimate = sampler.estimate()?;
    estimate.write_json(&args.output)?;
    let trace_path = args.trace.clone().unwrap_or_else(|| sidecar(&args.output, "trace.csv"));
    write_trace(&trace_path, &estimate.trace)?;
    let seed = sampler.config().seed;
    write_metadata(
        &args.output,
        "train",
        seed,
        BTreeMap::from([
            ("iterations", total.into()),
            ("burn_in", sampler.config().burn_in.into()),
            ("n_topics", sampler.config().n_topics.into()),
            ("trace", trace_path.display().to_string().into()),
        ]),
    )?;
    println!(
        "trained {} topics on {} threads: alpha {:.3} beta {:.3} -> {}",
        estimate.n_topics(),
        corpus.n_threads(),
        estimate.alpha,
        estimate.beta,
        args.output.display()
    );
    Ok(())
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let k_n = trace.first().map_or(0, |r| r.gamma.len());
    let mut header = vec!["iteration".to_string(), "alpha".into(), "beta".into()];
    header.extend((0..k_n).map(|k| format!("gamma_{k}")));
    header.push("log_lik".into());
    w.write_record(&header)?;
    for row in trace {
        let mut rec = vec![row.iteration.to_string(), row.alpha.to_string(), row.beta.to_string()];
        rec.extend(row.gamma.iter().map(f64::to_string));
        rec.push(row.log_lik.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

const SUMMARY_HEADER: [&str; 6] = ["method", "T1", "ΔT", "K", "N", "MAP"];

pub fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.t1.to_string(),
            r.delta_t.to_string(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.n.to_string(),
            r.map.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_recommend(args: &RecommendArgs, config: &RunConfig) -> Result<()> {
    let (corpus, options) = load_corpus(&args.corpus, config)?;
    let split = split_corpus(&corpus, SplitSpec::new(args.t1, args.t2), &options.preprocess)?;
    let sampler = sampler_config(&args.sampler, config, args.common.seed);
    let estimate = match &args.estimate {
        Some(path) => {
            let est = PosteriorEstimate::read_json(path).with_context(|| format!("reading {}", path.display()))?;
            let same_threads = est.thread_ids.iter().eq(split.train.threads.iter().map(|t| &t.thread_id));
            if !same_threads || est.learners != split.train.learners || est.vocabulary != split.train.vocabulary {
                bail!(forum_hawkes::Error::Config(format!(
                    "{} was not fitted on the training split ending at t1={}",
                    path.display(),
                    args.t1
                )));
            }
            est
        }
        None => forum_hawkes::inference::run_gibbs(&split.train, &split.annotations, &sampler)?,
    };
    let rec = Recommender::new(&split, estimate.params(), sampler.a_prior.mean())?;

    let mut w = csv::Writer::from_path(&args.output).with_context(|| format!("writing {}", args.output.display()))?;
    w.write_record(["learner_id", "rank", "thread_id", "probability"])?;
    let learners: Vec<String> = if args.learners.is_empty() {
        split.test_learners().map(String::from).collect()
    } else {
        args.learners.clone()
    };
    for learner in &learners {
        for (i, (tid, p)) in rec.rank_threads(learner).into_iter().take(args.top).enumerate() {
            w.write_record([learner.clone(), (i + 1).to_string(), tid, p.to_string()])?;
        }
    }
    w.flush()?;

    if let Some(path) = &args.summary {
        let report = ranking_report(&rec, &args.top_n, 0);
        let dt = args.t2 - args.t1;
        let mut rows = Vec::new();
        for (method, maps, k) in [
            (METHOD_POPULARITY, &report.popularity_map, None),
            (METHOD_RECENCY, &report.recency_map, None),
            (METHOD_MODEL, &report.model_map, Some(estimate.n_topics())),
        ] {
            for &(n, map) in maps {
                rows.push(SweepRow {
                    method: method.to_string(),
                    t1: args.t1,
                    delta_t: dt,
                    k,
                    n,
                    map,
                });
            }
        }
        write_summary(path, &rows)?;
    }
    write_metadata(
        &args.output,
        "recommend",
        estimate.seed,
        BTreeMap::from([
            ("t1", args.t1.into()),
            ("t2", args.t2.into()),
            ("learners", learners.len().into()),
            ("training_threads", split.train.n_threads().into()),
            ("topic_prior", TOPIC_PRIOR.into()),
        ]),
    )?;
    println!(
        "ranked {} training threads for {} learners -> {}",
        split.train.n_threads(),
        learners.len(),
        args.output.display()
    );
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs, config: &RunConfig) -> Result<()> {
    let (corpus, options) = load_corpus(&args.corpus, config)?;
    let section = &config.evaluate;
    let pick = |flag: &Vec<f64>, file: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
        match (flag.is_empty(), file) {
            (false, _) => Ok(flag.clone()),
            (true, Some(v)) => Ok(v.clone()),
            (true, None) => bail!(forum_hawkes::Error::Config(format!("--{name} or [evaluate] {name} is required"))),
        }
    };
    let t1 = pick(&args.t1, &section.t1, "t1")?;
    let delta_t = pick(&args.delta_t, &section.delta_t, "delta-t")?;
    let mut sampler = config.train.sampler(args.common.seed);
    if let Some(x) = args.iterations {
        sampler.iterations = x;
    }
    if let Some(x) = args.burn_in {
        sampler.burn_in = x;
    }
    let n_topics = if args.topics.is_empty() {
        section.n_topics.clone().unwrap_or_else(|| vec![sampler.n_topics])
    } else {
        args.topics.clone()
    };
    let top_n = if args.top_n.is_empty() {
        section.top_n.clone().unwrap_or_else(|| vec![5])
    } else {
        args.top_n.clone()
    };
    let sweep = SweepConfig {
        t1,
        delta_t,
        n_topics,
        top_n,
        sampler,
        preprocess: options.preprocess,
    };
    let rows = sweep_experiment(&corpus, &sweep)?;
    write_summary(&args.output, &rows)?;
    write_metadata(
        &args.output,
        "evaluate",
        args.common.seed,
        BTreeMap::from([("cells", rows.len().into())]),
    )?;
    let absent = rows.iter().filter(|r| r.map.is_none()).count();
    println!("{} cells ({absent} absent) -> {}", rows.len(), args.output.display());
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs, config: &RunConfig) -> Result<()> {
    let (corpus, _) = load_corpus(&args.corpus, config)?;
    let estimate = PosteriorEstimate::read_json(&args.estimate)
        .with_context(|| format!("reading {}", args.estimate.display()))?;
    std::fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;

    let topics = analytics::topic_summaries(&estimate, args.words);
    let mut w = csv::Writer::from_path(args.output.join("topics.csv"))?;
    w.write_record(["topic", "gamma", "half_life_days", "top_words"])?;
    for t in &topics {
        w.write_record([
            t.topic.to_string(),
            t.gamma.to_string(),
            t.half_life_days.to_string(),
            t.top_words.join(" "),
        ])?;
        println!("topic {}: half-life {:.3} d  {}", t.topic, t.half_life_days, t.top_words.join(" "));
    }
    w.flush()?;

    let ex = analytics::excitation_summary(&estimate);
    let mut w = csv::Writer::from_path(args.output.join("excitation.csv"))?;
    w.write_record(["alpha", "beta", "reply_multiplier"])?;
    w.write_record([ex.alpha.to_string(), ex.beta.to_string(), ex.reply_multiplier.to_string()])?;
    w.flush()?;
    println!(
        "alpha {:.3}  beta {:.3}  explicit reply x{:.1}",
        ex.alpha, ex.beta, ex.reply_multiplier
    );

    let weekly = analytics::weekly_topic_counts(&corpus, &estimate)?;
    let mut w = csv::Writer::from_path(args.output.join("weekly.csv"))?;
    let mut header = vec!["week".to_string()];
    header.extend((0..estimate.n_topics()).map(|k| format!("topic_{k}")));
    header.push("total".into());
    w.write_record(&header)?;
    for (week, counts) in weekly.iter().enumerate() {
        let mut rec = vec![week.to_string()];
        rec.extend(counts.iter().map(usize::to_string));
        rec.push(counts.iter().sum::<usize>().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    write_metadata(
        &args.output.join("topics.csv"),
        "analyze",
        estimate.seed,
        BTreeMap::from([("estimate", args.estimate.display().to_string().into())]),
    )?;
    Ok(())
}
