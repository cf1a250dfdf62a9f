use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ate_core::DesignSpec;
use ate_sim::config::{normalize_key, parse_pairs, DESK_N, DESK_P};
use ate_sim::harness::calibrate;
use ate_sim::{run, write_outputs, RunConfig};

#[derive(Parser)]
#[command(name = "ate-sim", version, about = "Monte Carlo comparison of Lasso-based ATE estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation grid and write table.csv, draws.csv, augmentation.csv
    /// and run-manifest.txt.
    Run(RunArgs),
    /// Print the design catalogue.
    ListDesigns {
        #[arg(long, default_value_t = DESK_N)]
        n: usize,
        #[arg(long, default_value_t = DESK_P)]
        p: usize,
    },
    /// Calibrate one design and print c_d and c_y.
    Calibrate {
        #[arg(long)]
        design: u8,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// Comma-separated design ids (1-10).
    #[arg(long)]
    designs: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Comma-separated outcome R² values.
    #[arg(long)]
    r2y: Option<String>,
    /// Latent treatment R² (ignored by design 10).
    #[arg(long)]
    r2d: Option<f64>,
    /// Comma-separated subset of naive,ipw,rm,dsipw,dsrm,aipw,arm,arb.
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// `key = value` configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use n=2000, p=2000, reps=1000 unless overridden.
    #[arg(long)]
    full_scale: bool,
    /// Extra `key=value` settings, e.g. `--set tuning.aipw=plug-in`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_pairs(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.insert(k.to_string(), v);
            }
        };
        put("designs", self.designs.clone());
        put("reps", self.reps.map(|v| v.to_string()));
        put("n", self.n.map(|v| v.to_string()));
        put("p", self.p.map(|v| v.to_string()));
        put("r2y", self.r2y.clone());
        put("r2d", self.r2d.map(|v| v.to_string()));
        put("estimators", self.estimators.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|v| v.display().to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        if self.full_scale {
            put("full_scale", Some("true".into()));
        }
        for item in &self.set {
            let (k, v) = item.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {item:?}"))?;
            put(&normalize_key(k), Some(v.trim().to_string()));
        }
        // File and flags may spell keys differently ("r2_y" vs "r2y").
        for (alias, key) in [("r2_y", "r2y"), ("r2_d", "r2d"), ("output_dir", "out")] {
            if pairs.contains_key(alias) && pairs.contains_key(key) {
                pairs.remove(alias);
            }
        }
        Ok(RunConfig::from_pairs(&pairs)?)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let report = run(&config)?;
            let written = write_outputs(&report, &config.output_dir)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Command::ListDesigns { n, p } => {
            println!("design\tn\tp\toutcome\ttreatment\tcovariance\tr2_y\tr2_d\ttheta");
            for id in DesignSpec::IDS {
                let s = DesignSpec::catalogue(id, n, p)?;
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    s.design_id,
                    s.n,
                    s.p,
                    s.outcome_pattern.name(),
                    s.treatment_pattern.name(),
                    s.covariance.kind_name(),
                    s.r2_y,
                    s.r2_d,
                    s.theta
                );
            }
        }
        Command::Calibrate { design, run } => {
            let config = run.resolve()?;
            let base = calibrate(&config, design)?;
            println!("design = {design}");
            println!("c_d = {}", base.c_d);
            for &r2 in &config.r2_y {
                println!("c_y(r2_y = {r2}) = {}", base.with_r2_y(r2)?.c_y);
            }
        }
    }
    Ok(())
}
