use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use responder_audit::audit::{
    cmd_curves, cmd_simulate, cmd_support, render_witness, run_audit, AuditConfig, DataConfig, SupportConfig,
    DEFAULT_BUDGETS, OUT_DIR_ENV,
};
use responder_audit::data::Schema;
use responder_audit::error::{AuditError, Result};
use responder_audit::nuisance::{EstimatorKind, DEFAULT_CLIP_EPS};
use responder_audit::support::DEFAULT_GRID_N;
use responder_audit::synth::nonidentifiability_witness;

#[derive(Parser)]
#[command(name = "responder-audit", version, about = "Bounds on responder-based TPR/TNR of treatment policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound group rates and disparities; write report.json, curves and plots
    Audit(AuditArgs),
    /// Write ROC, xROC and disparity bands only
    Curves(AuditArgs),
    /// Draw a sample from a synthetic spec
    Simulate(SimulateArgs),
    /// Evaluate the support function of the identified set
    Support(SupportArgs),
    /// Show two joints with one observable law and different TPRs
    DemoNonid {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "binning")]
    estimator: EstimatorKind,
    #[arg(long, default_value_t = 2)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CLIP_EPS)]
    clip_eps: f64,
    /// Do not use the group label as a covariate
    #[arg(long)]
    no_group_feature: bool,
    #[arg(long, default_value = "id")]
    id_col: String,
    #[arg(long, default_value = "group")]
    group_col: String,
    #[arg(long, default_value = "treatment")]
    treatment_col: String,
    #[arg(long, default_value = "outcome")]
    outcome_col: String,
    #[arg(long, default_value = "mu0")]
    mu0_col: String,
    #[arg(long, default_value = "mu1")]
    mu1_col: String,
    #[arg(long, default_value = "tau")]
    tau_col: String,
    /// Columns to ignore
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

impl DataArgs {
    fn config(&self) -> Result<DataConfig> {
        if !self.delimiter.is_ascii() {
            return Err(AuditError::Config(format!("delimiter `{}` is not ASCII", self.delimiter)));
        }
        Ok(DataConfig {
            input: self.input.clone(),
            schema: Schema {
                id: self.id_col.clone(),
                group: self.group_col.clone(),
                treatment: self.treatment_col.clone(),
                outcome: self.outcome_col.clone(),
                mu0: self.mu0_col.clone(),
                mu1: self.mu1_col.clone(),
                tau: self.tau_col.clone(),
                exclude: self.exclude.clone(),
                delimiter: self.delimiter as u8,
            },
            estimator: self.estimator,
            n_folds: self.folds,
            seed: self.seed,
            clip_eps: self.clip_eps,
            include_group: !self.no_group_feature,
        })
    }
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Resampled fold partitions (default 50; 1 with external scores)
    #[arg(long)]
    splits: Option<usize>,
    /// Budgets on the anti-responder probability
    #[arg(long = "B", value_delimiter = ',')]
    budgets: Vec<f64>,
    /// Groups to audit (default: all)
    #[arg(long = "group", value_delimiter = ',')]
    groups: Vec<String>,
    /// Treat iff tau_hat >= theta (default: median tau_hat per split)
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "audit-out")]
    out: PathBuf,
    #[arg(long)]
    no_plots: bool,
}

impl AuditArgs {
    fn config(&self) -> Result<AuditConfig> {
        Ok(AuditConfig {
            data: self.data.config()?,
            n_splits: self.splits.unwrap_or(if self.data.estimator == EstimatorKind::External { 1 } else { 50 }),
            budgets: if self.budgets.is_empty() { DEFAULT_BUDGETS.to_vec() } else { self.budgets.clone() },
            groups: self.groups.clone(),
            theta: self.theta,
            out_dir: self.out.clone(),
            plots: !self.no_plots,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the latent response types here
    #[arg(long)]
    types_out: Option<PathBuf>,
}

#[derive(Args)]
struct SupportArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Contrast direction, e.g. `a:1:0,b:-1:0`
    #[arg(long, allow_hyphen_values = true)]
    mu: String,
    #[arg(long = "B")]
    budget: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_N)]
    grid: usize,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Audit(args) => {
            let report = run_audit(&args.config()?)?;
            for r in &report.rates {
                let show = |v: Option<[f64; 2]>| v.map_or("degenerate".to_string(), |[l, h]| format!("[{l:.4}, {h:.4}]"));
                println!("{:<12} B={:<5} TPR {}  TNR {}", r.group, r.budget, show(r.tpr), show(r.tnr));
            }
            println!("report: {}", args.out.join("report.json").display());
        }
        Command::Curves(args) => {
            for path in cmd_curves(&args.config()?)? {
                println!("{}", path.display());
            }
        }
        Command::Simulate(args) => {
            let sample = cmd_simulate(&args.spec, args.n, args.seed, &args.out, args.types_out.as_deref())?;
            println!("{} units written to {}", sample.dataset.len(), args.out.display());
        }
        Command::Support(args) => {
            let cfg = SupportConfig {
                data: args.data.config()?,
                mu: args.mu,
                budget: args.budget,
                grid_n: args.grid,
                theta: args.theta,
            };
            println!("{}", serde_json::to_string_pretty(&cmd_support(&cfg)?)?);
        }
        Command::DemoNonid { json } => {
            let w = nonidentifiability_witness()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&w)?);
            } else {
                print!("{}", render_witness(&w));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage_error() { 2 } else { 1 })
        }
    }
}
