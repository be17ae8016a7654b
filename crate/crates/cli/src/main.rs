use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optcache::harness::{self, ExperimentConfig, HarnessError};
use optcache::traces::convert_ratings;

/// Trace-driven simulator for online caching policies with predictions.
#[derive(Debug, Parser)]
#[command(name = "optcache", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a `user,item,rating,timestamp` export into a `slot,file_id` trace.
    ConvertRatings { input: PathBuf, output: PathBuf },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// `key = value` settings file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// zipf:<a>, zipf-flip:<a>, uniform, or a CSV trace path.
    #[arg(long)]
    trace: Option<String>,
    /// Library size N.
    #[arg(long)]
    files: Option<String>,
    /// perfect, adversarial, null, rho:<f>, zeta:<f>, rho-sin:<lo>,<hi>,<period> or dirichlet.
    #[arg(long)]
    oracle: Option<String>,
    /// Policy to run; repeat for several.
    #[arg(long = "policy")]
    policies: Vec<String>,
    #[arg(long)]
    capacity: Option<String>,
    /// Integer file sizes drawn uniformly from lo:hi.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// Comma list, a..b or a..=b.
    #[arg(long)]
    seeds: Option<String>,
    /// `auto` or a fixed value in (0, 1].
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Draw a new perturbation vector every slot.
    #[arg(long)]
    fresh_perturbation: bool,
    /// Bipartite topology CSV.
    #[arg(long)]
    topology: Option<String>,
}

impl RunArgs {
    fn settings(&self) -> Result<BTreeMap<String, String>, HarnessError> {
        let mut settings = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
                harness::parse_settings(&text)?
            }
            None => BTreeMap::new(),
        };
        let flags = [
            ("trace", &self.trace),
            ("files", &self.files),
            ("oracle", &self.oracle),
            ("capacity", &self.capacity),
            ("sizes", &self.sizes),
            ("horizon", &self.horizon),
            ("seeds", &self.seeds),
            ("alpha", &self.alpha),
            ("out", &self.out),
            ("topology", &self.topology),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                settings.insert(key.to_string(), v.clone());
            }
        }
        if !self.policies.is_empty() {
            settings.insert("policy".into(), self.policies.join(","));
        }
        if self.fresh_perturbation {
            settings.insert("fresh-perturbation".into(), "true".into());
        }
        Ok(settings)
    }
}

fn run(args: &RunArgs) -> Result<(), HarnessError> {
    let config = ExperimentConfig::from_settings(&args.settings()?)?;
    let outputs = harness::run(&config)?;
    for o in &outputs {
        let s = &o.series;
        println!(
            "{:<11} seed {:<4} hits {:>8} opt {:>8} regret/T {:.5}",
            o.policy.name(),
            o.seed,
            s.cum_hits.last().copied().unwrap_or(0.0),
            s.cum_opt.last().copied().unwrap_or(0.0),
            s.final_regret() / s.horizon() as f64
        );
    }
    eprintln!("wrote {}", config.out.display());
    Ok(())
}

fn convert(input: &PathBuf, output: &PathBuf) -> Result<(), HarnessError> {
    let reader =
        File::open(input).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", input.display())))?;
    let writer = File::create(output).map_err(|source| HarnessError::Output {
        path: output.clone(),
        source,
    })?;
    let files = convert_ratings(BufReader::new(reader), BufWriter::new(writer))?;
    eprintln!("wrote {} ({files} distinct files)", output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Some(Command::ConvertRatings { input, output }) => convert(input, output),
        None => run(&cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
