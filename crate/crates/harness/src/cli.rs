//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gof_core::calibration::{
    adaptive_test, minimal_permutations, test_effdim, test_permutation, AdaptiveConfig,
};
use gof_core::{
    doubling_grid, median_heuristic, BasisKind, FilterFamily, FilterSpec, GofOutcome, Kernel,
    KernelFamily, DEFAULT_EIG_FLOOR,
};

use crate::data::read_sample;
use crate::error::{HarnessError, Result};
use crate::manifest::{load_plan, RunManifest};
use crate::plan::ExperimentPlan;
use crate::plot::{render, render_csv, write_panels};
use crate::records::{power_csv, variance_csv, write_text};
use crate::studies::{run_power, run_variance, size_plan, with_threads};

#[derive(Debug, Parser)]
#[command(
    name = "gof",
    version,
    about = "Spectral-regularized kernel goodness-of-fit tests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test one data set against a null sample.
    Test(TestArgs),
    /// Power curves over the plan's parameter grid.
    Power(StudyArgs),
    /// Rejection rates at the null parameter only.
    Size(StudyArgs),
    /// Variance of the statistic and its comparator under the null.
    Variance(StudyArgs),
    /// Render SVG power curves from a power or size CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibrationArg {
    Effdim,
    Perm,
    Adaptive,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Sample from the distribution under test.
    #[arg(long)]
    pub x: PathBuf,
    /// Sample from the null model.
    #[arg(long)]
    pub y: PathBuf,
    /// Independent null sample used to estimate the operator.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    /// Gaussian bandwidth on the squared-distance scale; defaults to the
    /// median heuristic of the pooled sample.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value = "tikhonov")]
    pub filter: FilterArg,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Number of permutations; the adaptive test defaults to the smallest
    /// admissible count.
    #[arg(long = "B")]
    pub permutations: Option<usize>,
    /// Defaults to `adaptive` when a grid is given, `perm` otherwise.
    #[arg(long, value_enum)]
    pub calibration: Option<CalibrationArg>,
    /// Lambda grid `lo:hi` for the adaptive test.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// Bandwidth multipliers `lo:hi` of the median heuristic.
    #[arg(long)]
    pub bandwidth_grid: Option<String>,
    /// Use the centered-covariance comparator statistic.
    #[arg(long)]
    pub comparator: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Sobolev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    Tikhonov,
    Cutoff,
    Landweber,
}

impl From<FilterArg> for FilterFamily {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Tikhonov => FilterFamily::Tikhonov,
            FilterArg::Cutoff => FilterFamily::Cutoff,
            FilterArg::Landweber => FilterFamily::Landweber,
        }
    }
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Plan file, or a manifest from an earlier run.
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the plan's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// 50 replicates and a thinned parameter grid.
    #[arg(long)]
    pub quick: bool,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub csv: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn parse_range(text: &str, name: &str) -> Result<[f64; 2]> {
    let bad = || HarnessError::Config(format!("{name} must look like lo:hi, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    doubling_grid(lo, hi)
        .map_err(|_| HarnessError::Config(format!("{name} needs 0 < lo <= hi, got {text:?}")))?;
    Ok([lo, hi])
}

pub fn run_test(args: &TestArgs) -> Result<GofOutcome> {
    let x = read_sample(&args.x)?;
    let y = read_sample(&args.y)?;
    let d_ref = read_sample(&args.reference)?;
    let calibration = args.calibration.unwrap_or(
        if args.lambda_grid.is_some() || args.bandwidth_grid.is_some() {
            CalibrationArg::Adaptive
        } else {
            CalibrationArg::Perm
        },
    );
    let family = match args.kernel {
        KernelArg::Gaussian => KernelFamily::Gaussian,
        KernelArg::Sobolev => KernelFamily::Sobolev,
    };
    if family == KernelFamily::Sobolev
        && (args.bandwidth.is_some() || args.bandwidth_grid.is_some())
    {
        return Err(HarnessError::Config(
            "the sobolev kernel has no bandwidth".into(),
        ));
    }
    let h_m = || -> Result<f64> { Ok(median_heuristic(&x.concat(&y)?)?) };
    let kind = if args.comparator {
        BasisKind::CenteredCovariance
    } else {
        BasisKind::Integral
    };
    if args.comparator && calibration != CalibrationArg::Adaptive {
        return Err(HarnessError::Config(
            "the comparator statistic is only available with --calibration adaptive".into(),
        ));
    }
    let filter_family = FilterFamily::from(args.filter);

    match calibration {
        CalibrationArg::Adaptive => {
            let [lo, hi] = match &args.lambda_grid {
                Some(t) => parse_range(t, "--lambda-grid")?,
                None => [1e-6, 5.0],
            };
            let lambdas = doubling_grid(lo, hi)?;
            let kernels = match family {
                KernelFamily::Gaussian => {
                    let [wlo, whi] = match &args.bandwidth_grid {
                        Some(t) => parse_range(t, "--bandwidth-grid")?,
                        None => [0.01, 100.0],
                    };
                    let h = h_m()?;
                    doubling_grid(wlo, whi)?
                        .into_iter()
                        .map(|w| Ok(Kernel::gaussian(h * w)?))
                        .collect::<Result<Vec<_>>>()?
                }
                KernelFamily::Sobolev => vec![Kernel::Sobolev],
            };
            let needed = minimal_permutations(lambdas.len() * kernels.len(), args.alpha);
            let config = AdaptiveConfig {
                alpha: args.alpha,
                filter: filter_family,
                lambdas,
                eig_floor: DEFAULT_EIG_FLOOR,
            };
            let report = adaptive_test(
                &x,
                &y,
                &d_ref,
                &kernels,
                kind,
                &config,
                args.permutations.unwrap_or(needed),
                args.seed,
            )?;
            Ok(report.outcome)
        }
        CalibrationArg::Perm | CalibrationArg::Effdim => {
            if args.lambda_grid.is_some() || args.bandwidth_grid.is_some() {
                return Err(HarnessError::Config(
                    "grids need --calibration adaptive".into(),
                ));
            }
            let kernel = match family {
                KernelFamily::Gaussian => Kernel::gaussian(match args.bandwidth {
                    Some(h) => h,
                    None => h_m()?,
                })?,
                KernelFamily::Sobolev => Kernel::Sobolev,
            };
            let filter = FilterSpec::new(filter_family, args.lambda)?;
            if calibration == CalibrationArg::Effdim {
                Ok(test_effdim(&x, &y, &d_ref, &kernel, &filter, args.alpha)?)
            } else {
                Ok(test_permutation(
                    &x,
                    &y,
                    &d_ref,
                    &kernel,
                    &filter,
                    args.alpha,
                    args.permutations.unwrap_or(400),
                    args.seed,
                )?)
            }
        }
    }
}

fn prepare_plan(args: &StudyArgs) -> Result<ExperimentPlan> {
    let mut plan = load_plan(&args.plan)?;
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if args.quick {
        plan = plan.quick();
    }
    plan.validate()?;
    Ok(plan)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::write(dir, e))
}

/// Runs a power or size study and writes `<name>.csv`, the SVG panels and
/// the manifest into `args.out`.
pub fn run_power_command(args: &StudyArgs, size_only: bool) -> Result<()> {
    let mut plan = prepare_plan(args)?;
    if size_only {
        plan = size_plan(&plan);
    }
    let name = if size_only { "size" } else { "power" };
    let records = with_threads(args.threads, || run_power(&plan))??;
    create_dir(&args.out)?;
    let csv_path = args.out.join(format!("{name}.csv"));
    write_text(&csv_path, &power_csv(&records))?;
    let plots = write_panels(&render(&records)?, &args.out)?;
    RunManifest::new(name, plan).write(&args.out)?;
    log::info!("wrote {} and {} plot(s)", csv_path.display(), plots.len());
    Ok(())
}

pub fn run_variance_command(args: &StudyArgs) -> Result<()> {
    let plan = prepare_plan(args)?;
    let records = with_threads(args.threads, || run_variance(&plan))??;
    create_dir(&args.out)?;
    let csv_path = args.out.join("variance.csv");
    write_text(&csv_path, &variance_csv(&records))?;
    RunManifest::new("variance", plan).write(&args.out)?;
    log::info!("wrote {}", csv_path.display());
    Ok(())
}

pub fn run_plot_command(args: &PlotArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.csv)
        .map_err(|e| HarnessError::Input(format!("cannot read {}: {e}", args.csv.display())))?;
    let plots = write_panels(&render_csv(&text)?, &args.out)?;
    log::info!("wrote {} plot(s) to {}", plots.len(), args.out.display());
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test(args) => {
            let outcome = run_test(&args)?;
            let text = serde_json::to_string_pretty(&outcome)
                .map_err(|e| HarnessError::Internal(format!("serializing outcome: {e}")))?;
            println!("{text}");
            Ok(())
        }
        Command::Power(args) => run_power_command(&args, false),
        Command::Size(args) => run_power_command(&args, true),
        Command::Variance(args) => run_variance_command(&args),
        Command::Plot(args) => run_plot_command(&args),
    }
}
