use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use spearguard::corpus::write_mbox;
use spearguard::pipeline::{self, load_detector, read_email, CorpusSource, PipelineConfig};
use spearguard::synth::{generate, DeskConfig};
use spearguard::{AttackKind, Error};

#[derive(Parser)]
#[command(name = "spearguard", version, about = "Detect spear phishing from sender header profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic organisational mailbox as mbox
    Synth(SynthArgs),
    /// Load corpora and split them into train/validation/test
    Ingest(PipelineArgs),
    /// Build forged validation and test sets
    Forge(PipelineArgs),
    /// Run reinforcement-learning feature selection per attack
    Select(PipelineArgs),
    /// Fit sender profiles on the selected features
    Train(PipelineArgs),
    /// Classify emails with a trained model
    Predict(PredictArgs),
    /// Score the trained models and write report files
    Report(PipelineArgs),
    /// Run every stage from ingest to report
    Run(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Destination mbox file
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 600)]
    emails: usize,
    #[arg(long, default_value_t = 6)]
    domains: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct PipelineArgs {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus as format:path (mbox, maildir or eml_dir); repeatable
    #[arg(long = "corpus")]
    corpora: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any configuration key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model directory written by `train`
    #[arg(long, conflicts_with_all = ["output_dir", "attack"])]
    model: Option<PathBuf>,
    /// Pipeline output directory, used with --attack
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, default_value = "blind_spoofing")]
    attack: AttackKind,
    /// Refuse a model trained under a different configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Email files (.eml / RFC 822)
    #[arg(required = true)]
    emails: Vec<PathBuf>,
}

impl PipelineArgs {
    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => PipelineConfig::default(),
        }
        .with_env_override();
        for c in &self.corpora {
            config.corpora.push(c.parse::<CorpusSource>()?);
        }
        for o in &self.overrides {
            let Some((key, value)) = o.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{o}`");
            };
            config.set(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn explain(err: Error) -> anyhow::Error {
    match err {
        Error::EmptyResult => anyhow::anyhow!(
            "no feature improved validation accuracy; rerun with more rounds or a higher epsilon (--set rounds=N, --set epsilon=E)"
        ),
        e => e.into(),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Synth(a) => {
            let emails = generate(&DeskConfig {
                domains: a.domains,
                emails: a.emails,
                seed: a.seed,
                ..DeskConfig::default()
            });
            write_mbox(&a.out, &emails)?;
            println!("wrote {} emails to {}", emails.len(), a.out.display());
        }
        Command::Ingest(a) => {
            let config = a.resolve()?;
            let s = pipeline::cmd_ingest(&config).map_err(explain)?;
            println!(
                "train {}\tvalidation {}\ttest {}\tskipped {}",
                s.splits.train.len(),
                s.splits.validation.len(),
                s.splits.test.len(),
                s.skipped.len()
            );
        }
        Command::Forge(a) => {
            let config = a.resolve()?;
            for (split, sets) in pipeline::cmd_forge(&config).map_err(explain)? {
                for (attack, items) in sets {
                    println!("{split}\t{attack}\t{}", items.len());
                }
            }
        }
        Command::Select(a) => {
            let config = a.resolve()?;
            for (attack, s) in pipeline::cmd_select(&config).map_err(explain)? {
                println!("{attack}\t{}", s.subset.to_text().trim_end().replace('\n', ","));
            }
        }
        Command::Train(a) => {
            let config = a.resolve()?;
            for (attack, d) in pipeline::cmd_train(&config).map_err(explain)? {
                println!("{attack}\tdim {}\tprofiles {}", d.vocab.dim(), d.model.len());
            }
        }
        Command::Report(a) => print_report(&a.resolve()?, pipeline::cmd_report)?,
        Command::Run(a) => print_report(&a.resolve()?, pipeline::run_all)?,
        Command::Predict(a) => return predict(&a),
    }
    Ok(ExitCode::SUCCESS)
}

fn print_report(
    config: &PipelineConfig,
    stage: fn(&PipelineConfig) -> spearguard::Result<pipeline::Report>,
) -> anyhow::Result<()> {
    let report = stage(config).map_err(explain)?;
    for &attack in &config.attacks {
        if let Some(acc) = report.accuracy(attack, attack) {
            println!("{attack}\taccuracy {acc:.4}");
        }
    }
    println!("report written to {}", config.layout().report_dir().display());
    Ok(())
}

fn predict(a: &PredictArgs) -> anyhow::Result<ExitCode> {
    let dir = match (&a.model, &a.output_dir) {
        (Some(m), _) => m.clone(),
        (None, Some(out)) => pipeline::Layout::new(out).model_dir(a.attack),
        (None, None) => {
            let out = PipelineConfig::default().with_env_override().output_dir;
            pipeline::Layout::new(out).model_dir(a.attack)
        }
    };
    let (detector, hash) = load_detector(&dir).with_context(|| format!("loading model from {}", dir.display()))?;
    if let Some(path) = &a.config {
        check_config(path, &hash)?;
    }
    let mut any_spear = false;
    for path in &a.emails {
        let email = read_email(path)?;
        let v = detector.detect(&email)?;
        any_spear |= v.is_spear;
        println!(
            "{}\t{}\t{}",
            if v.is_spear { "spear" } else { "benign" },
            v.predicted_sender,
            v.claimed_sender
        );
    }
    Ok(ExitCode::from(u8::from(any_spear)))
}

fn check_config(path: &Path, model_hash: &str) -> anyhow::Result<()> {
    let expected = PipelineConfig::load(path)?.hash();
    if expected != model_hash {
        return Err(Error::ArtifactMismatch(format!(
            "model was trained under config {model_hash}, {} hashes to {expected}",
            path.display()
        ))
        .into());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
