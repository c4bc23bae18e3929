use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use jamswarm_core::experiments::{
    emit_results, reproduction, run_sweep, ExperimentSpec, Profile, Reproduction, SweepResult, Variant, WeightSetting,
};
use jamswarm_core::ScenarioConfig;

#[derive(Parser)]
#[command(name = "jamswarm", version, about = "Seeded jamming task assignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment spec (TOML) or one variant.
    Run {
        /// Experiment spec file; other options override its values.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "PROPOSED")]
        variant: Variant,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep variants and parameters.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "PROPOSED")]
        variants: Vec<Variant>,
        #[arg(long, value_delimiter = ',')]
        cost_factors: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        sigmas: Vec<f64>,
        /// Weight settings 1, 2 or 3.
        #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=3))]
        settings: Vec<u8>,
        #[arg(long, value_delimiter = ',')]
        budgets: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        shrinks: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        populations: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named table or figure preset.
    Reproduce {
        which: Reproduction,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; defaults to the built-in reference scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "desk")]
    profile: Profile,
}

impl Common {
    fn scenario(&self) -> Result<ScenarioConfig> {
        match &self.config {
            Some(path) => ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display())),
            None => Ok(ScenarioConfig::table1()),
        }
    }

    fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(seed) = self.seed {
            spec.base_seed = seed;
        }
        if let Some(trials) = self.trials {
            spec.trials = trials;
        }
        if let Some(frames) = self.frames {
            spec.frames = frames;
        }
    }
}

fn setting(i: u8) -> WeightSetting {
    WeightSetting::ALL[usize::from(i) - 1]
}

fn report(result: &SweepResult) {
    println!("{}", result.spec.name);
    println!(
        "{:>3} {:<9} {:>3} {:>5} {:>5} {:>10} {:>5} {:>3} {:>9} {:>9} {:>8} {:>6}",
        "pt", "variant", "set", "λ", "σ", "budget", "α", "P", "frame1", "all", "std1", "idle"
    );
    for (i, p) in result.points.iter().enumerate() {
        let pt = &p.point;
        let first = &p.stats[0];
        println!(
            "{:>3} {:<9} {:>3} {:>5} {:>5} {:>10} {:>5} {:>3} {:>9.4} {:>9.4} {:>8.4} {:>6.2}",
            i,
            pt.variant.name(),
            pt.setting.map_or("-".to_string(), |s| s.index().to_string()),
            pt.cost_factor,
            pt.sigma,
            pt.budget,
            pt.shrink,
            pt.population,
            first.mean_utility,
            p.mean_utility(),
            first.std_utility,
            p.mean_idle(),
        );
    }
}

/// Runs and writes one spec; returns its invariant violation count.
fn execute(spec: &ExperimentSpec, out: &Path) -> Result<usize> {
    let start = Instant::now();
    let result = run_sweep(spec).with_context(|| format!("running {}", spec.name))?;
    let manifest = emit_results(&result, out, start.elapsed().as_secs_f64())
        .with_context(|| format!("writing results to {}", out.display()))?;
    report(&result);
    println!("wrote {} ({:.1} s)", out.display(), manifest.wall_time_s);
    if manifest.invariant_violations > 0 {
        log::error!("{}: {} schedules violate their bandwidth constraints", spec.name, manifest.invariant_violations);
    }
    Ok(manifest.invariant_violations)
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run { common, .. } | Command::Sweep { common, .. } | Command::Reproduce { common, .. } => common,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build_global()
        .context("starting worker pool")?;

    let specs: Vec<(ExperimentSpec, PathBuf)> = match &cli.command {
        Command::Run { spec, variant, common } => {
            let mut spec = match spec {
                Some(path) => ExperimentSpec::load(path).with_context(|| format!("loading {}", path.display()))?,
                None => {
                    let mut s = ExperimentSpec::new(format!("run_{variant}"), common.scenario()?, common.profile);
                    s.variants = vec![*variant];
                    s
                }
            };
            common.apply(&mut spec);
            vec![(spec, common.out.clone())]
        }
        Command::Sweep {
            variants,
            cost_factors,
            sigmas,
            settings,
            budgets,
            shrinks,
            populations,
            common,
        } => {
            let mut spec = ExperimentSpec::new("sweep", common.scenario()?, common.profile);
            spec.variants = variants.clone();
            spec.axes.cost_factors = cost_factors.clone();
            spec.axes.sigmas = sigmas.clone();
            spec.axes.settings = settings.iter().map(|&i| setting(i)).collect();
            spec.axes.budgets = budgets.clone();
            spec.axes.shrinks = shrinks.clone();
            spec.axes.populations = populations.clone();
            common.apply(&mut spec);
            vec![(spec, common.out.clone())]
        }
        Command::Reproduce { which, common } => {
            let specs = reproduction(*which, common.profile, &common.scenario()?);
            let single = specs.len() == 1;
            specs
                .into_iter()
                .map(|mut spec| {
                    common.apply(&mut spec);
                    let out = if single { common.out.clone() } else { common.out.join(&spec.name) };
                    (spec, out)
                })
                .collect()
        }
    };

    let mut violations = 0;
    for (spec, out) in &specs {
        violations += execute(spec, out)?;
    }
    Ok(if violations > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
