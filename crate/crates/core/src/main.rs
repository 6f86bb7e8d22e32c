use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use consortium::harness::{
    builtin_scenario, builtin_scenarios, replicate_stats, run_coupled, run_exchange, Config, MixingKind, ReservoirKind,
    ScenarioTrace,
};
use consortium::rl::{train_dqn, EnvKind};
use consortium::sysid::{fit_growth_params, FitOptions};
use consortium::{Error, Result};

#[derive(Parser)]
#[command(name = "consortium", version, about = "Two-chamber consortium bioreactor simulator and controllers")]
struct Cli {
    /// TOML configuration file; defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Coupled,
    Exchange,
}

#[derive(Subcommand)]
enum Command {
    /// Run a builtin scenario and write one trace per replicate.
    Run {
        scenario: String,
        #[arg(long, value_enum, default_value = "coupled")]
        mode: Mode,
        /// switching | dqn | density-only
        #[arg(long)]
        controller_mixing: Option<String>,
        /// pi | mpc | dqn
        #[arg(long)]
        controller_reservoir: Option<String>,
        /// Single seed; all replicate seeds of the scenario when omitted.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "traces")]
        out: PathBuf,
        /// Mixing-chamber weights (overrides the config).
        #[arg(long)]
        mixing_weights: Option<PathBuf>,
        /// Reservoir weights (overrides the config).
        #[arg(long)]
        reservoir_weights: Option<PathBuf>,
    },
    /// Train a DQN policy for `mixing` or `reservoir` and save its weights.
    Train {
        env: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit growth rates and actuation scaling to monoculture traces.
    Identify {
        #[arg(long, num_args = 1.., required = true)]
        traces: Vec<PathBuf>,
        /// Write the fit report as TOML here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Settling time and NRMSE per signal, grouped by scenario and controllers.
    Evaluate {
        #[arg(long, num_args = 1.., required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        facs_interval: f64,
    },
    /// Print the builtin scenarios.
    ListScenarios,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Run {
            scenario,
            mode,
            controller_mixing,
            controller_reservoir,
            seed,
            out,
            mixing_weights,
            reservoir_weights,
        } => {
            let mut s = builtin_scenario(&scenario)?;
            let mixing = controller_mixing.map(|m| m.parse::<MixingKind>()).transpose()?;
            let reservoir = controller_reservoir.map(|r| r.parse::<ReservoirKind>()).transpose()?;
            s = s.with_controllers(mixing.or(s.mixing), reservoir.unwrap_or(s.reservoir));
            if mixing_weights.is_some() {
                cfg.weights.mixing = mixing_weights;
            }
            if reservoir_weights.is_some() {
                cfg.weights.reservoir = reservoir_weights;
            }
            let set = cfg.controller_set()?;
            std::fs::create_dir_all(&out)?;
            let seeds = seed.map_or_else(|| s.seeds.clone(), |k| vec![k]);
            for k in seeds {
                let trace = match mode {
                    Mode::Coupled => run_coupled(&s, &cfg.plant, &set, k)?,
                    Mode::Exchange => {
                        let dir = out.join(format!("exchange_{}_seed{k}", s.name));
                        if dir.exists() {
                            std::fs::remove_dir_all(&dir)?;
                        }
                        run_exchange(&s, &cfg.plant, &set, k, &cfg.exchange(&dir))?
                    }
                };
                let stem =
                    format!("{}_{}_{}_seed{k}", s.name, trace.meta.mixing_controller, trace.meta.reservoir_controller);
                let path = out.join(format!("{stem}.csv"));
                trace.write_csv(&path)?;
                trace.write_long_csv(&out.join(format!("{stem}_long.csv")))?;
                println!("{}", path.display());
            }
        }
        Command::Train { env, out, seed } => {
            let kind: EnvKind = env.parse()?;
            let started = std::time::Instant::now();
            let (net, log) = train_dqn(kind, &cfg.plant, &cfg.train, seed)?;
            net.save(&out)?;
            let (head, tail) = log.head_tail_means(20);
            println!(
                "trained {env} policy: {} episodes, {} gradient steps, {:.1} s; mean return first 20 = {head:.3}, last 20 = {tail:.3}",
                log.episode_returns.len(),
                log.gradient_steps,
                started.elapsed().as_secs_f64()
            );
            println!("weights written to {}", out.display());
        }
        Command::Identify { traces, out } => {
            let traces = read_traces(&traces)?;
            let report = fit_growth_params(&traces, &FitOptions::default())?;
            let text = toml::to_string(&report).map_err(|e| Error::Config(e.to_string()))?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            if !report.tau_identifiable {
                eprintln!("warning: no dilution excitation, tau is not identifiable");
            }
        }
        Command::Evaluate { traces, facs_interval } => {
            let traces = read_traces(&traces)?;
            let mut by_scenario: BTreeMap<String, BTreeMap<String, Vec<ScenarioTrace>>> = BTreeMap::new();
            for t in traces {
                let label = format!("{}+{}", t.meta.mixing_controller, t.meta.reservoir_controller);
                by_scenario.entry(t.meta.scenario.clone()).or_default().entry(label).or_default().push(t);
            }
            for (scenario, groups) in by_scenario {
                let breaks: Vec<f64> =
                    builtin_scenario(&scenario).map(|s| s.events.iter().map(|e| e.t).collect()).unwrap_or_default();
                let groups: Vec<(String, Vec<ScenarioTrace>)> = groups.into_iter().collect();
                let report = replicate_stats(&groups, facs_interval, &breaks)?;
                println!("scenario {scenario}");
                println!(
                    "  {:<22} {:<16} {:>18} {:>18} {:>4}",
                    "controllers", "signal", "settling (min)", "nrmse", "n"
                );
                for g in &report.groups {
                    for (signal, (ts, e)) in &g.signals {
                        println!(
                            "  {:<22} {:<16} {:>9.2} +- {:<6.2} {:>9.4} +- {:<6.4} {:>4}",
                            g.label,
                            signal.name(),
                            ts.mean,
                            ts.std,
                            e.mean,
                            e.std,
                            ts.n
                        );
                    }
                }
                for t in &report.ttests {
                    let p = t.p.map_or("n/a".to_string(), |p| format!("{p:.3}"));
                    println!("  t-test {} {} vs {} ({}): p = {p}", t.signal.name(), t.a, t.b, t.metric);
                }
            }
        }
        Command::ListScenarios => {
            for s in builtin_scenarios() {
                let mixing = s.mixing.map_or("none", |m| m.name());
                let events: Vec<String> = s.events.iter().map(|e| format!("{:?} at {} min", e.kind, e.t)).collect();
                println!(
                    "{:<22} {:>5} min  mixing={:<10} reservoir={:<4} seeds={:?}{}",
                    s.name,
                    s.duration,
                    mixing,
                    s.reservoir.name(),
                    s.seeds,
                    if events.is_empty() { String::new() } else { format!("  events: {}", events.join(", ")) }
                );
            }
        }
    }
    Ok(())
}

fn read_traces(paths: &[PathBuf]) -> Result<Vec<ScenarioTrace>> {
    paths.iter().map(|p: &PathBuf| ScenarioTrace::read_csv(Path::new(p))).collect()
}
