use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use influence_core::game::{
    algorithm2_epsilon_nash, br_dynamics_m2, player_params, run_online_game, Alg2Config, InfoMode,
    BR_MAX_SWEEPS,
};
use influence_core::{
    estimate_regret, parse_scenario, run_online_single, sample_path, solve_offline_single,
    OnlineConfig, Regularizer, Scenario,
};
use influence_game_lab::{assets, reproduce, tables, workers_from_env, write_outputs, ExperimentSpec};
use serde_json::json;

/// Budget allocation experiments over De Groot opinion networks.
#[derive(Parser)]
#[command(name = "influence-game-lab", version, about)]
struct Cli {
    /// Worker threads; overrides INFLUENCE_LAB_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline optimum of one influencer on a sampled path.
    SingleOffline {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// CSV of the allocation (k, i, b).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Online dual mirror descent for one influencer, with a regret estimate.
    SingleOnline {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        online: OnlineArgs,
        /// Seed of the traced path and base seed of the regret trials.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// CSV of the traced run.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Offline equilibrium of the game on a sampled path.
    GameOffline {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Method::Br)]
        method: Method,
        /// Sweep tolerance (br) or inner stopping threshold (alg2).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// CSV of the equilibrium profile (k, i, j, b).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every influencer runs the online policy on a sampled path.
    GameOnline {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        online: OnlineArgs,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// CSV of the per-stage trace.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a figure's sweep and write its curves and manifest.
    Reproduce {
        /// Bundled figure name.
        #[arg(long, conflicts_with = "spec")]
        figure: Option<String>,
        /// Scenario document with an experiment block, or a manifest.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Print the bundled figures and exit.
        #[arg(long)]
        list_figures: bool,
    },
}

#[derive(Args)]
struct Source {
    /// Scenario document.
    #[arg(long, conflicts_with = "figure", required_unless_present = "figure")]
    scenario: Option<PathBuf>,
    /// Bundled figure whose scenario to use.
    #[arg(long)]
    figure: Option<String>,
    /// Override the number of campaigns, keeping the average budgets.
    #[arg(long)]
    horizon: Option<usize>,
    /// Keep only this influencer (1-based) for single-influencer commands.
    #[arg(long, default_value_t = 1)]
    influencer: usize,
}

impl Source {
    fn load(&self) -> Result<Scenario<f64>> {
        let sc = match (&self.scenario, &self.figure) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_scenario(&text).with_context(|| format!("scenario {}", path.display()))?
            }
            (None, Some(name)) => {
                let text = assets::bundled(name).with_context(|| format!("unknown figure {name:?}"))?;
                parse_scenario(text)?
            }
            (None, None) => bail!("give --scenario or --figure"),
        };
        Ok(match self.horizon {
            Some(k) => sc.with_average_budgets(k, &sc.average_budgets())?,
            None => sc,
        })
    }

    fn load_single(&self) -> Result<Scenario<f64>> {
        let sc = self.load()?;
        if self.influencer == 0 || self.influencer > sc.m() {
            bail!("influencer {} out of 1..={}", self.influencer, sc.m());
        }
        Ok(sc.influencer_view(self.influencer - 1)?)
    }
}

#[derive(Args)]
struct OnlineArgs {
    /// Dual step size; defaults to the tuned value.
    #[arg(long)]
    eta: Option<f64>,
    /// Starting multiplier; defaults to e^{-1}.
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long, default_value = "entropy")]
    regularizer: Regularizer,
}

impl OnlineArgs {
    fn config(&self) -> OnlineConfig {
        OnlineConfig {
            eta: self.eta,
            theta0: self.theta0,
            regularizer: self.regularizer,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Br,
    Alg2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Partial,
}

fn write_csv(out: &Option<PathBuf>, text: String) -> Result<()> {
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn say(line: impl std::fmt::Display) -> Result<()> {
    writeln!(io::stdout().lock(), "{line}")?;
    Ok(())
}

fn print(value: serde_json::Value) -> Result<()> {
    say(serde_json::to_string_pretty(&value)?)
}

fn run_reproduce(
    figure: Option<String>,
    spec: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    workers: Option<usize>,
) -> Result<()> {
    let mut spec = match (figure, spec) {
        (Some(name), _) => ExperimentSpec::bundled(&name)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentSpec::from_json(&text).with_context(|| format!("spec {}", path.display()))?
        }
        (None, None) => bail!("give --figure or --spec"),
    };
    if let Some(t) = trials {
        spec = spec.with_trials(t)?;
    }
    if let Some(s) = seed {
        spec = spec.with_seed(s);
    }
    let rep = reproduce(&spec, workers)?;
    for path in write_outputs(&rep, out)? {
        say(path.display())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let workers = match cli.workers {
        Some(0) => bail!("--workers must be positive"),
        Some(w) => Some(w),
        None => workers_from_env()?,
    };
    match cli.command {
        Command::SingleOffline { source, seed, out } => {
            let sc = source.load_single()?;
            let path = sample_path(&sc, seed);
            let sol = solve_offline_single(&path, sc.budgets()[0], sc.caps()[0])?;
            write_csv(&out, tables::offline_single(&sol)?)?;
            print(serde_json::to_value(&sol)?)
        }
        Command::SingleOnline {
            source,
            online,
            seed,
            trials,
            out,
        } => {
            let sc = source.load_single()?;
            let config = online.config();
            let trace = run_online_single(&sc, seed, &config)?;
            write_csv(&out, tables::online_trace(&trace)?)?;
            let est = estimate_regret(&sc, trials, seed, &config, workers)?;
            print(json!({
                "horizon": est.horizon,
                "alpha": est.alpha,
                "trials": trials,
                "mean_regret": est.regret.mean,
                "stderr": est.regret.stderr,
                "mean_regret_per_stage": est.average.mean,
                "bound": est.bound,
                "traced_run": {
                    "total_spent": trace.total_spent,
                    "total_utility_adjusted": trace.total_adjusted,
                    "stop_time": trace.stop_time,
                    "final_theta": trace.final_theta,
                },
            }))
        }
        Command::GameOffline {
            source,
            method,
            tol,
            seed,
            out,
        } => {
            let sc = source.load()?;
            let path = sample_path(&sc, seed);
            let report = match method {
                Method::Br => {
                    if sc.m() != 2 {
                        bail!("best-response dynamics need two influencers, scenario has {}", sc.m());
                    }
                    br_dynamics_m2(&path, sc.budgets(), sc.caps(), tol.unwrap_or(1e-12), BR_MAX_SWEEPS, None)?
                }
                Method::Alg2 => {
                    let mut cfg = Alg2Config::default();
                    if let Some(t) = tol {
                        cfg.eps_thr2 = t;
                    }
                    algorithm2_epsilon_nash(&path, sc.budgets(), sc.caps(), &cfg)?
                }
            };
            write_csv(&out, tables::profile(&report.profile)?)?;
            let mut value = serde_json::to_value(&report)?;
            value["average_utilities"] = json!(report.average_utilities());
            print(value)
        }
        Command::GameOnline {
            source,
            online,
            mode,
            seed,
            out,
        } => {
            let sc = source.load()?;
            let mode = match mode {
                Mode::Full => InfoMode::Full,
                Mode::Partial => InfoMode::Partial,
            };
            let params = player_params(&sc, &online.config())?;
            let run = run_online_game(&sample_path(&sc, seed), &params, mode)?;
            write_csv(&out, tables::online_game(&run)?)?;
            print(json!({
                "average_utilities": run.average_utilities(),
                "spent": run.profile.spent,
                "unconverged_stages": run.stages.iter().filter(|s| !s.converged).count(),
                "clamped_stages": run.stages.iter().filter(|s| s.clamped).count(),
                "profile": run.profile,
            }))
        }
        Command::Reproduce {
            figure,
            spec,
            trials,
            seed,
            out,
            list_figures,
        } => {
            if list_figures {
                for name in assets::names() {
                    let spec = ExperimentSpec::bundled(name)?;
                    let desc = spec.scenario.description.clone().unwrap_or_default();
                    say(format!("{name}\t{desc}"))?;
                }
                return Ok(());
            }
            run_reproduce(figure, spec, trials, seed, &out, workers)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // A reader such as `head` closing the pipe early is not a failure.
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
