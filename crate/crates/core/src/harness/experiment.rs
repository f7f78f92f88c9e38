//! Config-driven experiments writing a directory of artifacts:
//!
//! * `transcripts/rep-NNNN.jsonl` for the first few replicates
//! * `metrics.csv` with per-round regret and reward across replicates
//! * `constants.json`, `audit.json`, `audit.csv`, `summary.json`
//! * `regret.svg` and `audit_heatmap.svg`

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contextual::{best_policy_value, estimate_contextual_persuasion};
use crate::error::{Error, Result};
use crate::harness::audit::{AuditAccumulator, AuditOptions, AuditReport, Verdict};
use crate::harness::regret::RegretCurve;
use crate::harness::runner::{run_replicate, AlgorithmSpec, PolicySpec, Scenario};
use crate::harness::svg;
use crate::model::Transcript;
use crate::priors::config::PriorSpec;
use crate::priors::constants::{chunked, estimate_persuasion_constants, min_phase_length_m_arm, McOptions};
use crate::priors::PriorSummary;
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            min_count: default_min_count(),
            confidence: default_confidence(),
        }
    }
}

fn default_epsilon() -> f64 {
    0.01
}
fn default_min_count() -> u64 {
    200
}
fn default_confidence() -> f64 {
    0.95
}

/// Optional Monte-Carlo estimate of the persuasion constants for `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersuasionSection {
    pub k: u64,
    #[serde(default = "default_mc")]
    pub replicates: u64,
}

fn default_mc() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub replicates: u64,
    pub horizon: u64,
    pub prior: Option<PriorSpec>,
    pub algorithm: Option<AlgorithmSpec>,
    pub policies: Option<PolicySpec>,
    #[serde(default)]
    pub audit: AuditSection,
    /// Replicates whose transcripts are written; defaults to `min(replicates, 10)`.
    pub transcripts: Option<u64>,
    pub persuasion: Option<PersuasionSection>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Parses by extension (`.json` or TOML) and returns the raw text too.
    pub fn from_path(path: &Path) -> Result<(Self, String)> {
        let text = fs::read_to_string(path)?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        Ok((cfg, text))
    }

    pub fn validate(&self) -> Result<(&PriorSpec, &AlgorithmSpec)> {
        let prior = self
            .prior
            .as_ref()
            .ok_or_else(|| Error::config("prior", "missing `prior` block"))?;
        let algo = self
            .algorithm
            .as_ref()
            .ok_or_else(|| Error::config("algorithm", "missing `algorithm` block"))?;
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        let a = &self.audit;
        if !(a.epsilon >= 0.0) {
            return Err(Error::config("audit.epsilon", "must be nonnegative"));
        }
        if !(a.confidence > 0.0 && a.confidence < 1.0) {
            return Err(Error::config("audit.confidence", "must lie in (0, 1)"));
        }
        Ok((prior, algo))
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: Option<String>,
    pub config_sha256: String,
    pub seed: u64,
    pub replicates: u64,
    pub horizon: u64,
    pub algorithm: AlgorithmSpec,
    pub final_regret: f64,
    pub final_regret_se: f64,
    pub mean_reward: f64,
    pub audit_verdict: Verdict,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ConstantsReport {
    prior: PriorSummary,
    contexts: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampling_rounds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail_free: Option<crate::detail_free::DetailFreeConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    persuasion: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    persuasion_error: Option<String>,
}

#[derive(Default)]
struct Pass {
    regret: Vec<Moments>,
    reward: Vec<Moments>,
    totals: Moments,
    audit: AuditAccumulator,
}

impl Pass {
    /// `benchmark(t)[x]` is the per-round reward of the regret benchmark in
    /// context `x`.
    fn add(&mut self, t: &Transcript, benchmark: &dyn Fn(&Transcript) -> Vec<f64>) {
        if self.regret.len() < t.len() {
            self.regret.resize_with(t.len(), Moments::default);
            self.reward.resize_with(t.len(), Moments::default);
        }
        let inst = t.instance();
        let best = benchmark(t);
        let mut acc = 0.0;
        for (i, r) in t.rows().iter().enumerate() {
            let x = r.context.unwrap_or(0);
            let mu = inst.mean_in(r.recommendation, x);
            acc += best[x as usize] - mu;
            self.regret[i].push(acc);
            self.reward[i].push(mu);
        }
        self.totals.push(acc);
        self.audit.add(t);
    }

    fn merge(&mut self, o: Pass) {
        if self.regret.len() < o.regret.len() {
            self.regret.resize_with(o.regret.len(), Moments::default);
            self.reward.resize_with(o.reward.len(), Moments::default);
        }
        for (a, b) in self.regret.iter_mut().zip(&o.regret) {
            a.merge(b);
        }
        for (a, b) in self.reward.iter_mut().zip(&o.reward) {
            a.merge(b);
        }
        self.totals.merge(&o.totals);
        self.audit.merge(o.audit);
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), bytes)?;
    files.push(name.to_string());
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, spec: &AlgorithmSpec, sc: &Scenario) -> Result<Pass> {
    let contextual = matches!(
        spec,
        AlgorithmSpec::Contextual { .. } | AlgorithmSpec::ContextualStandalone { .. }
    );
    let n = sc.prior.contexts().len();
    let benchmark = |t: &Transcript| -> Vec<f64> {
        if contextual {
            vec![best_policy_value(t.instance(), sc.prior.contexts(), &sc.policies).unwrap_or(f64::NAN); n]
        } else {
            (0..n as u32).map(|x| t.instance().best_mean_in(x)).collect()
        }
    };
    run_replicate(spec, sc, cfg.horizon, cfg.seed, 0)?;
    chunked(
        cfg.replicates,
        |lo, hi| {
            let mut p = Pass::default();
            for r in lo..hi {
                p.add(&run_replicate(spec, sc, cfg.horizon, cfg.seed, r)?, &benchmark);
            }
            Ok(p)
        },
        |acc: &mut Pass, part| acc.merge(part),
    )
}

/// Bayesian regret curve of the configured algorithm, against the best arm
/// per context (or the best policy for contextual algorithms).
pub fn regret_curve(cfg: &ExperimentConfig) -> Result<RegretCurve> {
    let (prior_spec, spec) = cfg.validate()?;
    let sc = Scenario::new(prior_spec.build()?, cfg.policies.as_ref())?;
    Ok(RegretCurve::from_moments(&simulate(cfg, spec, &sc)?.regret))
}

/// Audits the configured algorithm with `cfg.replicates` replicates.
pub fn audit_config(cfg: &ExperimentConfig) -> Result<AuditReport> {
    let (prior_spec, spec) = cfg.validate()?;
    let sc = Scenario::new(prior_spec.build()?, cfg.policies.as_ref())?;
    let opts = AuditOptions {
        replicates: cfg.replicates,
        epsilon: cfg.audit.epsilon,
        min_count: cfg.audit.min_count,
        confidence: cfg.audit.confidence,
        seed: cfg.seed,
    };
    crate::harness::audit::audit_bic(&opts, |r| run_replicate(spec, &sc, cfg.horizon, cfg.seed, r))
}

/// Loads `config` and writes its artifacts to `out`.
pub fn run_experiment_file(config: &Path, out: &Path) -> Result<ExperimentSummary> {
    let (cfg, text) = ExperimentConfig::from_path(config)?;
    run_experiment(&cfg, &sha256_hex(text.as_bytes()), out)
}

/// Runs every replicate in parallel and writes the artifacts to `out`.
/// Output depends only on `cfg` (and `config_hash`, which is echoed).
pub fn run_experiment(cfg: &ExperimentConfig, config_hash: &str, out: &Path) -> Result<ExperimentSummary> {
    let (prior_spec, spec) = cfg.validate()?;
    let sc = Scenario::new(prior_spec.build()?, cfg.policies.as_ref())?;
    let pass = simulate(cfg, spec, &sc)?;

    fs::create_dir_all(out)?;
    let mut files = Vec::new();

    let tdir = out.join("transcripts");
    fs::create_dir_all(&tdir)?;
    let keep = cfg.transcripts.unwrap_or(cfg.replicates.min(10)).min(cfg.replicates);
    for r in 0..keep {
        let t = run_replicate(spec, &sc, cfg.horizon, cfg.seed, r)?;
        let name = format!("rep-{r:04}.jsonl");
        let mut w = BufWriter::new(fs::File::create(tdir.join(&name))?);
        t.write_jsonl(&mut w)?;
        files.push(format!("transcripts/{name}"));
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["round", "mean_regret", "regret_se", "mean_reward", "reward_se", "replicates"])?;
    for (i, (g, w)) in pass.regret.iter().zip(&pass.reward).enumerate() {
        csv.write_record([
            (i + 1).to_string(),
            g.mean().to_string(),
            g.std_error().to_string(),
            w.mean().to_string(),
            w.std_error().to_string(),
            g.n.to_string(),
        ])?;
    }
    let bytes = csv.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    write_file(out, "metrics.csv", &bytes, &mut files)?;

    let constants = constants_report(cfg, spec, &sc);
    write_file(out, "constants.json", &serde_json::to_vec_pretty(&constants)?, &mut files)?;

    let opts = AuditOptions {
        replicates: cfg.replicates,
        epsilon: cfg.audit.epsilon,
        min_count: cfg.audit.min_count,
        confidence: cfg.audit.confidence,
        seed: cfg.seed,
    };
    let report: AuditReport = pass.audit.finish(&opts);
    write_file(out, "audit.json", &serde_json::to_vec_pretty(&report)?, &mut files)?;
    let mut audit_csv = Vec::new();
    report.write_csv(&mut audit_csv)?;
    write_file(out, "audit.csv", &audit_csv, &mut files)?;

    let title = cfg.name.clone().unwrap_or_else(|| "experiment".into());
    let curve = RegretCurve::from_moments(&pass.regret);
    write_file(
        out,
        "regret.svg",
        svg::regret_chart(&curve, cfg.audit.confidence, &title, config_hash).as_bytes(),
        &mut files,
    )?;
    write_file(
        out,
        "audit_heatmap.svg",
        svg::audit_heatmap(&report, &title, config_hash).as_bytes(),
        &mut files,
    )?;

    let mean_reward = {
        let total: f64 = pass.reward.iter().map(Moments::sum).sum();
        let n: u64 = pass.reward.iter().map(|m| m.n).sum();
        total / n.max(1) as f64
    };
    files.push("summary.json".into());
    let summary = ExperimentSummary {
        name: cfg.name.clone(),
        config_sha256: config_hash.to_string(),
        seed: cfg.seed,
        replicates: cfg.replicates,
        horizon: cfg.horizon,
        algorithm: spec.clone(),
        final_regret: pass.totals.mean(),
        final_regret_se: pass.totals.std_error(),
        mean_reward,
        audit_verdict: report.verdict,
        files,
    };
    fs::write(out.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    log::info!("wrote {} artifacts to {}", summary.files.len(), out.display());
    Ok(summary)
}

fn constants_report(cfg: &ExperimentConfig, spec: &AlgorithmSpec, sc: &Scenario) -> ConstantsReport {
    let prior = sc.prior.prior();
    let m = prior.num_arms();
    let detail_free = match spec {
        AlgorithmSpec::DetailFree { mu_hat, n, tau, theta } => Some(
            crate::detail_free::DetailFreeConfig {
                mu_hat: *mu_hat,
                n: *n,
                horizon: cfg.horizon,
                tau: *tau,
                theta: *theta,
            }
            .constants(m),
        ),
        _ => None,
    };
    let (persuasion, persuasion_error) = match cfg.persuasion {
        None => (None, None),
        Some(p) => {
            let opts = McOptions::new(p.replicates, 0.95, cfg.seed);
            let est = if prior.num_contexts() == 1 {
                estimate_persuasion_constants(prior, p.k, opts).and_then(|c| {
                    let l = min_phase_length_m_arm(prior, &c, opts)?;
                    Ok(serde_json::json!({ "constants": c, "min_phase_length": l }))
                })
            } else {
                estimate_contextual_persuasion(&sc.prior, p.k, opts)
                    .map(|c| serde_json::json!({ "constants": c.constants, "min_phase_length": c.l_p }))
            };
            match est {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };
    ConstantsReport {
        prior: PriorSummary::from(prior),
        contexts: sc.prior.contexts().probs().to_vec(),
        sampling_rounds: spec.sampling_rounds(m),
        detail_free,
        persuasion,
        persuasion_error,
    }
}

/// Default location for artifacts of `config`: a sibling directory named
/// after the config file stem.
pub fn default_out_dir(config: &Path) -> PathBuf {
    let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "experiment".into());
    config.with_file_name(format!("{stem}-out"))
}
