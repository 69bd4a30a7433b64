use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use uscqed::experiments::{self, parse_override, ConfigSource, ExperimentConfig, Scenario};
use uscqed::{validation, Error};

const OUT_ENV: &str = "USCQED_OUT";

#[derive(Parser)]
#[command(name = "uscqed", version, about = "Entanglement harvesting in multiqubit USC circuit QED")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Labelled spectrum of the extended Dicke model against g.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Coupling range `start:stop:step` in units of ω_r.
        #[arg(long, value_name = "A:B:C")]
        g_range: Option<String>,
        #[arg(long)]
        omega_q: Option<f64>,
        /// Number of levels kept per coupling.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Ground-state harvesting protocol.
    Harvest(Common),
    /// Extraction fidelity over the (g_min, T₃ = T₄) grid.
    Sweep(Common),
    /// Harvesting from a thermal resonator.
    Thermal {
        #[command(flatten)]
        common: Common,
        /// Highest resonator Fock level in the thermal mixture.
        #[arg(long)]
        n_cut: Option<usize>,
    },
    /// Dark-state harvesting into the four-qubit singlet.
    Singlet(Common),
    /// Singlet protection against frequency disorder.
    Protect(Common),
    /// Monte Carlo over static per-qubit disorder.
    Disorder {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<DisorderArg>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Harvesting with a lossy resonator.
    Dissipative {
        #[command(flatten)]
        common: Common,
        /// Resonator quality factor.
        #[arg(long)]
        quality: Option<f64>,
    },
    /// Flux-qubit frequency and coupling landscape.
    Fluxmap(Common),
    /// Harvesting driven through the flux-qubit control path.
    Fluxpath(Common),
    /// Runs the built-in oracle suite.
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum DisorderArg {
    Frequency,
    Coupling,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file layered over the preset.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in figure preset, e.g. fig2b.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Output root (default: $USCQED_OUT or ./runs).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    n_fock: Option<usize>,
    #[arg(long)]
    n_qubits: Option<usize>,
    /// Dotted-key override, e.g. `ground.t3=0.8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

fn range_overrides(text: &str) -> Result<Vec<String>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 || parts.iter().any(|p| p.trim().parse::<f64>().is_err()) {
        return Err(Error::Config(vec![format!("--g-range `{text}` is not of the form start:stop:step")]));
    }
    Ok(vec![
        format!("spectrum.g_start={}", parts[0].trim()),
        format!("spectrum.g_stop={}", parts[1].trim()),
        format!("spectrum.g_step={}", parts[2].trim()),
    ])
}

/// The scenario, its common flags, and the extra overrides implied by
/// scenario-specific flags.
fn resolve(command: Command) -> Result<(Scenario, Common, Vec<String>), Error> {
    let mut extra = Vec::new();
    let (scenario, common) = match command {
        Command::Spectrum {
            common,
            g_range,
            omega_q,
            levels,
        } => {
            if let Some(r) = g_range {
                extra.extend(range_overrides(&r)?);
            }
            if let Some(w) = omega_q {
                extra.push(format!("spectrum.omega_q={w:?}"));
            }
            if let Some(l) = levels {
                extra.push(format!("spectrum.levels={l}"));
            }
            (Scenario::Spectrum, common)
        }
        Command::Harvest(c) => (Scenario::Harvest, c),
        Command::Sweep(c) => (Scenario::Sweep, c),
        Command::Thermal { common, n_cut } => {
            if let Some(n) = n_cut {
                extra.push(format!("thermal.n_cut={n}"));
            }
            (Scenario::Thermal, common)
        }
        Command::Singlet(c) => (Scenario::Singlet, c),
        Command::Protect(c) => (Scenario::Protect, c),
        Command::Disorder { common, kind, runs } => {
            if let Some(k) = kind {
                let name = match k {
                    DisorderArg::Frequency => "frequency",
                    DisorderArg::Coupling => "coupling",
                };
                extra.push(format!("disorder.kind=\"{name}\""));
            }
            if let Some(r) = runs {
                extra.push(format!("disorder.runs={r}"));
            }
            (Scenario::Disorder, common)
        }
        Command::Dissipative { common, quality } => {
            if let Some(q) = quality {
                extra.push(format!("dissipation.quality_factor={q:?}"));
            }
            (Scenario::Dissipative, common)
        }
        Command::Fluxmap(c) => (Scenario::Fluxmap, c),
        Command::Fluxpath(c) => (Scenario::Fluxpath, c),
        Command::Validate => unreachable!("handled before resolution"),
    };
    Ok((scenario, common, extra))
}

fn load(scenario: Scenario, common: &Common, extra: &[String]) -> Result<ExperimentConfig, Error> {
    let text = match &common.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?,
        ),
        None => None,
    };
    let mut raw: Vec<String> = Vec::new();
    if let Some(n) = common.n_qubits {
        raw.push(format!("n_qubits={n}"));
    }
    if let Some(n) = common.n_fock {
        raw.push(format!("n_fock={n}"));
    }
    if let Some(s) = common.seed {
        raw.push(format!("seed={s}"));
    }
    raw.extend(extra.iter().cloned());
    raw.extend(common.set.iter().cloned());
    let overrides = raw.iter().map(|r| parse_override(r)).collect::<Result<Vec<_>, _>>()?;
    ConfigSource {
        preset: common.preset.clone(),
        text,
        overrides,
    }
    .load(scenario)
}

fn run(scenario: Scenario, common: Common, extra: Vec<String>) -> Result<bool, Error> {
    let cfg = load(scenario, &common, &extra)?;
    if common.dry_run {
        print!("{}", toml::to_string(&cfg).map_err(|e| Error::Config(vec![e.to_string()]))?);
        return Ok(true);
    }
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(vec![format!("--threads: {e}")]))?;
    }
    let root = common
        .out
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    info!("running {} (config {})", scenario.name(), experiments::config_hash(&cfg));
    let start = Instant::now();
    let out = experiments::run_scenario(scenario, &cfg)?;
    let dir = experiments::persist(&root, &cfg, &out, start.elapsed().as_secs_f64())?;
    for w in &out.warnings {
        warn!("{w}");
    }
    for c in &out.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        println!("{mark} {}: {}", c.name, c.detail);
    }
    if let Some(eef) = out.summary.get("eef") {
        println!("eef = {eef}");
    }
    println!("{}", dir.display());
    Ok(out.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Command::Validate = cli.command {
        let checks = validation::run_all();
        if let Err(e) = validation::write_table(&checks, std::io::stdout().lock()) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        return if checks.iter().all(|c| c.passed) {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        };
    }
    let result = resolve(cli.command).and_then(|(s, c, e)| run(s, c, e));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
