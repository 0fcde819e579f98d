use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sspca::commands::{self, EvalRequest};
use sspca::config::{GradientChoice, Mode, RunConfig, TyingChoice};
use sspca::io::MatrixFormat;
use sspca::synth::SynthParams;

/// Structured sparse PCA with learned parameters, for unsupervised feature
/// selection.
#[derive(Parser)]
#[command(name = "sspca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, train or grid-search and write the projection.
    Run(ConfigArgs),
    /// Compare grid search, untrained, tied and untied networks.
    Ablate(ConfigArgs),
    /// Trained loss as a function of network depth.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 10)]
        max_depth: usize,
    },
    /// Generate a planted-cluster data set.
    Synth(SynthArgs),
    /// Score an existing projection by clustering on its top features.
    Eval(EvalArgs),
}

/// Every flag overrides the matching key of `--config`. The output
/// directory falls back to `$SSPCA_OUTPUT_DIR`, then `sspca-out`.
#[derive(Args)]
struct ConfigArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Projection columns (0 = number of label categories, else 10).
    #[arg(long)]
    m: Option<usize>,
    /// Use the data as given instead of centering each feature.
    #[arg(long)]
    no_center: bool,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    gradient_mode: Option<GradientChoice>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_enum)]
    tying: Option<TyingChoice>,
    #[arg(long)]
    larg_linear: Option<bool>,
    #[arg(long)]
    loss_lambda: Option<f64>,
    #[arg(long)]
    loss_mu: Option<f64>,
    /// SPSA steps.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    spsa_a: Option<f64>,
    #[arg(long)]
    spsa_c: Option<f64>,
    #[arg(long)]
    spsa_big_a: Option<f64>,
    #[arg(long)]
    calibrate_gain: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    grid_lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    grid_mus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    feature_counts: Option<Vec<usize>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        fn set<T>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        set(&mut c.data_path, self.data);
        if self.labels.is_some() {
            c.labels_path = self.labels;
        }
        if self.output_dir.is_some() {
            c.output_dir = self.output_dir;
        }
        set(&mut c.m, self.m);
        if self.no_center {
            c.center = false;
        }
        set(&mut c.mode, self.mode);
        set(&mut c.solver.lambda, self.lambda);
        set(&mut c.solver.mu, self.mu);
        set(&mut c.solver.alpha, self.alpha);
        set(&mut c.solver.beta, self.beta);
        if self.eta.is_some() {
            c.solver.eta = self.eta;
        }
        set(&mut c.solver.max_iters, self.max_iters);
        set(&mut c.solver.tol, self.tol);
        set(&mut c.solver.gradient_mode, self.gradient_mode);
        set(&mut c.model.depth, self.depth);
        set(&mut c.model.tying, self.tying);
        set(&mut c.model.larg_linear, self.larg_linear);
        set(&mut c.model.loss_lambda, self.loss_lambda);
        set(&mut c.model.loss_mu, self.loss_mu);
        set(&mut c.train.iterations, self.iterations);
        set(&mut c.train.spsa_a, self.spsa_a);
        set(&mut c.train.spsa_c, self.spsa_c);
        set(&mut c.train.spsa_big_a, self.spsa_big_a);
        set(&mut c.train.calibrate_gain, self.calibrate_gain);
        set(&mut c.grid.lambdas, self.grid_lambdas);
        set(&mut c.grid.mus, self.grid_mus);
        set(&mut c.feature_counts, self.feature_counts);
        set(&mut c.repeats, self.repeats);
        set(&mut c.seed, self.seed);
        Ok(c.with_default_output_dir())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = SynthParams::default().features)]
    features: usize,
    #[arg(long, default_value_t = SynthParams::default().samples)]
    samples: usize,
    #[arg(long, default_value_t = SynthParams::default().clusters)]
    clusters: usize,
    #[arg(long, default_value_t = SynthParams::default().informative)]
    informative: usize,
    #[arg(long, default_value_t = SynthParams::default().noise_sigma)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    projection: PathBuf,
    #[arg(long, value_delimiter = ',')]
    feature_counts: Option<Vec<usize>>,
    #[arg(long, default_value_t = sspca_core::ufs::DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn default_dir(explicit: Option<PathBuf>) -> PathBuf {
    RunConfig {
        output_dir: explicit,
        ..Default::default()
    }
    .with_default_output_dir()
    .output_dir
    .expect("filled")
}

fn dispatch(cli: Cli) -> anyhow::Result<Vec<PathBuf>> {
    match cli.command {
        Command::Run(args) => commands::cmd_run(&args.resolve()?),
        Command::Ablate(args) => commands::cmd_ablate(&args.resolve()?),
        Command::Sweep { config, max_depth } => commands::cmd_sweep(&config.resolve()?, max_depth),
        Command::Synth(a) => {
            let params = SynthParams {
                features: a.features,
                samples: a.samples,
                clusters: a.clusters,
                informative: a.informative,
                noise_sigma: a.noise_sigma,
                seed: a.seed,
            };
            let format = match a.format {
                FormatArg::Csv => MatrixFormat::Csv,
                FormatArg::Bin => MatrixFormat::Binary,
            };
            commands::cmd_synth(&params, &default_dir(a.output_dir), format)
        }
        Command::Eval(a) => commands::cmd_eval(&EvalRequest {
            data_path: a.data,
            labels_path: a.labels,
            projection_path: a.projection,
            feature_counts: a
                .feature_counts
                .unwrap_or_else(sspca_core::ufs::default_feature_counts),
            repeats: a.repeats,
            seed: a.seed,
            output_dir: default_dir(a.output_dir),
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
