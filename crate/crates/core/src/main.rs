use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use bicex::contextual::{estimate_contextual_persuasion, ContextualLayout};
use bicex::detail_free::DetailFreeConfig;
use bicex::harness::audit::Verdict;
use bicex::harness::experiment::{audit_config, regret_curve, run_experiment_file, sha256_hex, ExperimentConfig};
use bicex::harness::runner::{run_replicate, AlgorithmSpec, PolicySpec, Scenario};
use bicex::model::Transcript;
use bicex::priors::config::PriorSpec;
use bicex::priors::constants::{
    estimate_persuasion_constants, min_phase_length_m_arm, min_phase_length_two_arm, McOptions,
};
use bicex::priors::PriorSummary;
use bicex::{Error, Result};

#[derive(Parser)]
#[command(name = "bicex", version, about = "Incentive-compatible bandit exploration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the prior-dependent constants (k_P, τ_P, ρ_P, L).
    Constants(ConstantsArgs),
    /// Run one replicate of the black-box reduction.
    RunBic(RunBicArgs),
    /// Run one replicate of the detail-free algorithm.
    RunDf(RunDfArgs),
    /// Run one replicate of the contextual reduction.
    RunCtx(RunCtxArgs),
    /// Audit the algorithm of an experiment config; exits 2 on FAIL, 3 if inconclusive.
    Audit(AuditArgs),
    /// Bayesian regret curve of an experiment config as CSV.
    Regret(RegretArgs),
    /// Run an experiment config and write every artifact.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// Prior file (TOML, or JSON by extension).
    #[arg(long)]
    prior: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replicate index under the root seed.
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Transcript path; `.csv` writes CSV, anything else JSON lines.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    prior: PathBuf,
    /// Samples per arm entering the persuasion estimate.
    #[arg(long, default_value_t = 1)]
    k: u64,
    #[arg(long, default_value_t = 10_000)]
    replicates: u64,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report the detail-free constants for this `μ̂` (needs `--N`).
    #[arg(long = "mu-hat", requires = "n")]
    mu_hat: Option<f64>,
    #[arg(long = "N", id = "n")]
    n: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunBicArgs {
    #[command(flatten)]
    common: Common,
    /// Wrapped algorithm (ucb1, greedy, uniform, constant:N, etc:K, aae:THETA).
    #[arg(long, default_value = "ucb1")]
    algo: String,
    #[arg(long)]
    k: u64,
    #[arg(long = "L")]
    l: u64,
    #[arg(long = "T")]
    horizon: u64,
    /// Run only the sampling stage.
    #[arg(long)]
    sampler_only: bool,
}

#[derive(Args)]
struct RunDfArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "mu-hat")]
    mu_hat: f64,
    #[arg(long = "N")]
    n: u64,
    #[arg(long = "T")]
    horizon: u64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
struct RunCtxArgs {
    #[command(flatten)]
    common: Common,
    /// Contextual learner (eps-greedy:ε) or a MAB algorithm name.
    #[arg(long, default_value = "eps-greedy:0.1")]
    algo: String,
    /// `all`, `constant`, or a JSON file of context → arm tables.
    #[arg(long, default_value = "all")]
    policies: String,
    #[arg(long)]
    k: u64,
    #[arg(long = "L")]
    l: u64,
    #[arg(long = "T")]
    horizon: u64,
    #[arg(long, value_parser = ["standard", "compact"], default_value = "standard")]
    layout: String,
}

#[derive(Args)]
struct AuditArgs {
    /// Experiment config (TOML or JSON).
    config: PathBuf,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegretArgs {
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    config: PathBuf,
    /// Artifact directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Constants(a) => constants(a)?,
        Command::RunBic(a) => {
            let spec = if a.sampler_only {
                AlgorithmSpec::MArmSampler { k: a.k, l: a.l }
            } else {
                AlgorithmSpec::Reduction {
                    k: a.k,
                    l: a.l,
                    wrapped: a.algo,
                }
            };
            single_run(&a.common, None, &spec, a.horizon, json!({}))?;
        }
        Command::RunDf(a) => {
            let cfg = DetailFreeConfig {
                mu_hat: a.mu_hat,
                n: a.n,
                horizon: a.horizon,
                tau: a.tau,
                theta: a.theta,
            };
            cfg.validate()?;
            let spec = AlgorithmSpec::DetailFree {
                mu_hat: a.mu_hat,
                n: a.n,
                tau: a.tau,
                theta: a.theta,
            };
            let m = PriorSpec::from_path(&a.common.prior)?.build()?.prior.num_arms();
            single_run(&a.common, None, &spec, a.horizon, json!({ "constants": cfg.constants(m) }))?;
        }
        Command::RunCtx(a) => {
            let policies = match a.policies.as_str() {
                "all" | "constant" => PolicySpec::Named(a.policies.clone()),
                path => PolicySpec::Tables(serde_json::from_str(&fs::read_to_string(path)?)?),
            };
            let layout = if a.layout == "compact" {
                ContextualLayout::Compact
            } else {
                ContextualLayout::Standard
            };
            let spec = AlgorithmSpec::Contextual {
                k: a.k,
                l: a.l,
                wrapped: a.algo,
                layout,
            };
            single_run(&a.common, Some(&policies), &spec, a.horizon, json!({}))?;
        }
        Command::Audit(a) => {
            let (mut cfg, _) = ExperimentConfig::from_path(&a.config)?;
            if let Some(r) = a.replicates {
                cfg.replicates = r;
            }
            if let Some(e) = a.epsilon {
                cfg.audit.epsilon = e;
            }
            let report = audit_config(&cfg)?;
            emit(a.out.as_deref(), &serde_json::to_vec_pretty(&report)?)?;
            eprintln!("audit verdict: {:?}", report.verdict);
            return Ok(match report.verdict {
                Verdict::Pass => ExitCode::SUCCESS,
                Verdict::Fail => ExitCode::from(2),
                Verdict::Inconclusive => ExitCode::from(3),
            });
        }
        Command::Regret(a) => {
            let (cfg, _) = ExperimentConfig::from_path(&a.config)?;
            let curve = regret_curve(&cfg)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["round", "mean_regret", "regret_se"])?;
            for (i, (m, s)) in curve.mean.iter().zip(&curve.std_error).enumerate() {
                w.write_record([(i + 1).to_string(), m.to_string(), s.to_string()])?;
            }
            emit(a.out.as_deref(), &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
        }
        Command::Report(a) => {
            let summary = run_experiment_file(&a.config, &a.out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn single_run(
    c: &Common,
    policies: Option<&PolicySpec>,
    spec: &AlgorithmSpec,
    horizon: u64,
    extra: serde_json::Value,
) -> Result<()> {
    let text = fs::read(&c.prior)?;
    let sc = Scenario::new(PriorSpec::from_path(&c.prior)?.build()?, policies)?;
    let t = run_replicate(spec, &sc, horizon, c.seed, c.replicate)?;
    write_transcript(&t, &c.out)?;
    let mut meta = json!({
        "seed": t.seed(),
        "instance": t.instance(),
        "algorithm": spec,
        "horizon": horizon,
        "rounds": t.len(),
        "sampling_rounds": spec.sampling_rounds(sc.prior.num_arms()),
        "prior_sha256": sha256_hex(&text),
    });
    if let (Some(m), Some(e)) = (meta.as_object_mut(), extra.as_object()) {
        m.extend(e.clone());
    }
    let mut name = c.out.clone().into_os_string();
    name.push(".meta.json");
    fs::write(PathBuf::from(name), serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

fn write_transcript(t: &Transcript, out: &Path) -> Result<()> {
    let f = io::BufWriter::new(fs::File::create(out)?);
    if out.extension().is_some_and(|e| e == "csv") {
        t.write_csv(f)
    } else {
        t.write_jsonl(f)
    }
}

fn constants(a: ConstantsArgs) -> Result<()> {
    let loaded = PriorSpec::from_path(&a.prior)?.build()?;
    let opts = McOptions::new(a.replicates, a.confidence, a.seed);
    let mut report = json!({ "prior": PriorSummary::from(&loaded.prior), "k": a.k, "replicates": a.replicates });
    let obj = report.as_object_mut().expect("object literal");
    if let Some(order) = &loaded.relabel {
        obj.insert("relabel".into(), json!(order.iter().map(|i| i + 1).collect::<Vec<_>>()));
    }
    let m = loaded.prior.num_arms();
    if let (Some(mu_hat), Some(n)) = (a.mu_hat, a.n) {
        let df = DetailFreeConfig::new(mu_hat, n, 1)?;
        obj.insert("detail_free".into(), json!(df.constants(m)));
    }
    if loaded.prior.num_contexts() == 1 {
        let c = estimate_persuasion_constants(&loaded.prior, a.k, opts)?;
        obj.insert("persuasion".into(), json!(c));
        obj.insert("L".into(), json!(min_phase_length_m_arm(&loaded.prior, &c, opts)?));
        if m == 2 {
            obj.insert("L_two_arm".into(), json!(min_phase_length_two_arm(&loaded.prior, a.k, opts)?));
        }
    } else {
        let cp = bicex::contextual::ContextualPrior::from_loaded(loaded)?;
        let c = estimate_contextual_persuasion(&cp, a.k, opts)?;
        obj.insert("persuasion".into(), json!(c.constants));
        obj.insert("L".into(), json!(c.l_p));
    }
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    emit(a.out.as_deref(), &bytes)
}
