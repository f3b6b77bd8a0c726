use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latent_align::harness::{self, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "latent-align", version, about = "Latent-word densification, low rank alignment and stability metrics for word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Neighborhood overlap between model pairs (or synthetic retrains).
    Stability(Common),
    /// Align the ε-neighborhoods of a center word with and without latent anchors.
    Align(Common),
    /// Dump the latent words of a center word.
    Latent(Common),
    /// Write a synthetic model pair in word2vec text format.
    Synth(Common),
    /// Trustworthiness, continuity and overlap between two models.
    Metrics(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Model files in word2vec text format; synthetic models when omitted.
    inputs: Vec<PathBuf>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated neighbor counts.
    #[arg(long)]
    k_values: Option<String>,
    /// lowrank or lle.
    #[arg(long)]
    backend: Option<String>,
    /// on or off.
    #[arg(long)]
    latent: Option<String>,
    #[arg(long)]
    center: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// on or off.
    #[arg(long)]
    normalize: Option<String>,
    /// Nuclear-norm weight, or `auto`.
    #[arg(long)]
    lambda: Option<String>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn config(&self) -> latent_align::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.inputs.is_empty() {
            cfg.inputs = self.inputs.clone();
        }
        let flags: [(&str, Option<String>); 13] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("mu", self.mu.map(|v| v.to_string())),
            ("d", self.d.map(|v| v.to_string())),
            ("k-values", self.k_values.clone()),
            ("backend", self.backend.clone()),
            ("latent", self.latent.clone()),
            ("center", self.center.clone()),
            ("sigma", self.sigma.map(|v| v.to_string())),
            ("trials", self.trials.map(|v| v.to_string())),
            ("normalize", self.normalize.clone()),
            ("lambda", self.lambda.clone()),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                cfg.set(key, &value)?;
            }
        }
        for kv in &self.set {
            let (key, value) = kv.split_once('=').ok_or_else(|| {
                latent_align::Error::Config(format!("--set expects key=value, got `{kv}`"))
            })?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> latent_align::Result<()> {
    match cli.command {
        Command::Stability(c) => {
            let cfg = c.config()?;
            let out = harness::run_stability(&cfg)?;
            for (k, mean, std) in &out.summary {
                println!("k={k} overlap mean={mean:.4} std={std:.4}");
            }
        }
        Command::Align(c) => {
            let cfg = c.config()?;
            let out = harness::run_alignment(&cfg)?;
            for (i, (k, t, c)) in out.baseline.per_k.iter().enumerate() {
                match &out.latent {
                    Some(l) => {
                        let (_, lt, lc) = l.per_k[i];
                        println!("k={k} T={t:.4}/{lt:.4} C={c:.4}/{lc:.4} (baseline/latent)");
                    }
                    None => println!("k={k} T={t:.4} C={c:.4}"),
                }
            }
        }
        Command::Latent(c) => {
            let cfg = c.config()?;
            let words = harness::run_latent_dump(&cfg)?;
            println!("{} latent words written to {}", words.len(), cfg.out.display());
        }
        Command::Synth(c) => {
            let cfg = c.config()?;
            std::fs::create_dir_all(&cfg.out)?;
            let (a, b) = harness::synth_paths(&cfg);
            harness::run_synth(&cfg.synthetic_spec(0), &a, &b)?;
            println!("wrote {} and {}", a.display(), b.display());
        }
        Command::Metrics(c) => {
            let cfg = c.config()?;
            let report = harness::run_metrics(&cfg)?;
            for (k, t, c) in &report.per_k {
                println!("k={k} T={t:.4} C={c:.4}");
            }
            println!(
                "overlap@{} mean={:.4} std={:.4}",
                cfg.overlap_k, report.overlap_mean, report.overlap_std
            );
        }
    }
    Ok(())
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
