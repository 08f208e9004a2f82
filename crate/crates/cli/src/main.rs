//! `ethicup`: validate configs, generate scenario pools, run the four-condition
//! experiment, serve the interactive game and replay play logs.
//!
//! Settings resolve flag first, then environment, then the config files.
//! The exit code is 0 on success and 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use ethicup_core::config::{ConfigBundle, ConfigPaths, SeverityAggregation};
use ethicup_core::harness::{format_summary_table, run_experiment, write_outputs};
use ethicup_core::numfmt::fmt_real;
use ethicup_core::replay::{load_play_log, replay_log, SessionSummary};
use ethicup_core::scenario::{generate_pool, load_scenarios, save_scenarios, Scenario};
use ethicup_service::{AppState, PlayLog};

const SCENARIOS_FILE: &str = "coffee_scenarios.csv";

#[derive(Debug, Parser)]
#[command(name = "ethicup", version, about = "Rule-based and welfare-based decision support for coffee choices")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Directory holding the six configuration files.
    #[arg(long, global = true, env = "ETHICUP_CONFIG_DIR", default_value = "configs")]
    config_dir: PathBuf,
    #[arg(long, global = true, value_name = "PATH")]
    schema: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    rules: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    weights: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    cert_map: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    experiment: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    templates: Option<PathBuf>,
}

impl ConfigArgs {
    fn paths(&self) -> ConfigPaths {
        let mut paths = ConfigPaths::in_dir(&self.config_dir);
        for (slot, over) in [
            (&mut paths.schema, &self.schema),
            (&mut paths.rules, &self.rules),
            (&mut paths.weights, &self.weights),
            (&mut paths.cert_map, &self.cert_map),
            (&mut paths.experiment, &self.experiment),
            (&mut paths.templates, &self.templates),
        ] {
            if let Some(p) = over {
                *slot = p.clone();
            }
        }
        paths
    }
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long, env = "ETHICUP_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<u32>,
    /// Regret bound for the combined condition.
    #[arg(long = "regret", env = "ETHICUP_REGRET", value_name = "RHO")]
    regret: Option<f64>,
    /// Weight profile for welfare and the utilitarian engine.
    #[arg(long, conflicts_with = "alt_weights")]
    profile: Option<String>,
    /// Shorthand for `--profile alt`.
    #[arg(long)]
    alt_weights: bool,
    #[arg(long, value_parser = parse_aggregation)]
    aggregation: Option<SeverityAggregation>,
    /// Drop options the remaining budget cannot cover.
    #[arg(long)]
    hard_budget: bool,
}

fn parse_aggregation(s: &str) -> Result<SeverityAggregation, String> {
    match s {
        "sum" => Ok(SeverityAggregation::Sum),
        "max" => Ok(SeverityAggregation::Max),
        other => Err(format!("`{other}` is not one of sum, max")),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and cross-check every config file.
    Validate,
    /// Write a seeded scenario pool to CSV.
    Generate {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "outputs/coffee_scenarios.csv")]
        out: PathBuf,
    },
    /// Run every configured condition and write the audit CSVs.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Use this pool instead of generating one.
        #[arg(long, value_name = "CSV")]
        scenarios: Option<PathBuf>,
        #[arg(long, default_value = "outputs")]
        out: PathBuf,
    },
    /// Serve the interactive game over HTTP.
    Serve {
        #[arg(long, env = "PORT", default_value_t = 8000)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "outputs/play_log.csv")]
        play_log: PathBuf,
        #[arg(long)]
        hard_budget: bool,
    },
    /// Recompute session metrics from a play log.
    Replay {
        #[arg(long, default_value = "outputs/play_log.csv")]
        play_log: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

type Failure = String;

fn load(config: &ConfigArgs) -> Result<ConfigBundle, Failure> {
    ConfigBundle::load(&config.paths()).map_err(|errors| {
        errors
            .iter()
            .map(|e| format!("error: {e}"))
            .collect::<Vec<_>>()
            .join("\n")
    })
}

fn apply(bundle: &mut ConfigBundle, o: &Overrides) -> Result<(), Failure> {
    let exp = &mut bundle.experiment;
    if let Some(seed) = o.seed {
        exp.seed = seed;
    }
    if let Some(rounds) = o.rounds {
        exp.rounds = rounds;
    }
    if let Some(rho) = o.regret {
        exp.regret_bound = rho;
    }
    if let Some(profile) = &o.profile {
        exp.weight_profile = profile.clone();
    }
    if o.alt_weights {
        exp.weight_profile = "alt".into();
    }
    if let Some(agg) = o.aggregation {
        exp.severity_aggregation = agg;
    }
    exp.hard_budget |= o.hard_budget;
    exp.validate("flags").map_err(|e| format!("error: {e}"))?;
    bundle.cross_check().map_err(|e| format!("error: {e}"))
}

fn generate(bundle: &ConfigBundle) -> Result<Vec<Scenario>, Failure> {
    generate_pool(&bundle.experiment, &bundle.schema, &bundle.rules, &bundle.cert_map).map_err(|e| format!("error: {e}"))
}

fn validate(config: &ConfigArgs) -> Result<(), Failure> {
    let bundle = load(config)?;
    generate(&bundle)?;
    println!(
        "ok: {} attributes, {} rules, {} weight profiles ({}), {} certifications, {} templates",
        bundle.schema.len(),
        bundle.rules.len(),
        bundle.weights.len(),
        bundle.weights.keys().cloned().collect::<Vec<_>>().join(", "),
        bundle.cert_map.entries.len(),
        bundle.templates.len(),
    );
    Ok(())
}

fn write_pool(pool: &[Scenario], bundle: &ConfigBundle, path: &Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("error: {}: {e}", dir.display()))?;
    }
    save_scenarios(pool, &bundle.schema, path).map_err(|e| format!("error: {e}"))
}

fn run(config: &ConfigArgs, overrides: &Overrides, scenarios: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let mut bundle = load(config)?;
    apply(&mut bundle, overrides)?;
    let pool = match scenarios {
        Some(path) => load_scenarios(path, &bundle.schema).map_err(|e| format!("error: {e}"))?,
        None => {
            let pool = generate(&bundle)?;
            write_pool(&pool, &bundle, &out.join(SCENARIOS_FILE))?;
            pool
        }
    };
    for s in &pool {
        for o in &s.options {
            o.validate(&bundle.schema)
                .map_err(|m| format!("error: scenario {}: {m}", s.scenario_id))?;
        }
    }
    let result = run_experiment(&pool, &bundle).map_err(|e| format!("error: {e}"))?;
    write_outputs(&result, &bundle, out).map_err(|e| format!("error: {e}"))?;
    print!("{}", format_summary_table(&result.summaries));
    Ok(())
}

const SESSION_COLUMNS: [&str; 9] = [
    "session_id",
    "condition",
    "seed",
    "rounds_picked",
    "mean_welfare_uplift",
    "violation_free_share",
    "mean_severity",
    "followed_share",
    "budget_remaining",
];

fn session_table(summaries: &[SessionSummary]) -> String {
    let rows: Vec<[String; 9]> = summaries
        .iter()
        .map(|s| {
            [
                s.session_id.clone(),
                s.condition.to_string(),
                s.seed.to_string(),
                s.rounds_picked.to_string(),
                fmt_real(s.mean_welfare_uplift),
                fmt_real(s.violation_free_share),
                fmt_real(s.mean_severity),
                fmt_real(s.followed_share),
                fmt_real(s.budget_remaining),
            ]
        })
        .collect();
    let mut widths = SESSION_COLUMNS.map(str::len);
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[&str]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_owned() + "\n"
    };
    let mut out = line(&SESSION_COLUMNS);
    for row in &rows {
        out += &line(&row.each_ref().map(String::as_str));
    }
    out
}

fn replay(config: &ConfigArgs, play_log: &Path, json: bool) -> Result<(), Failure> {
    let bundle = load(config)?;
    let records = load_play_log(play_log).map_err(|e| format!("error: {e}"))?;
    let summaries = replay_log(&records, &bundle).map_err(|e| format!("error: {e}"))?;
    if json {
        let text = serde_json::to_string_pretty(&summaries).map_err(|e| format!("error: {e}"))?;
        println!("{text}");
    } else {
        print!("{}", session_table(&summaries));
    }
    Ok(())
}

fn serve(config: &ConfigArgs, host: &str, port: u16, play_log: &Path, hard_budget: bool) -> Result<(), Failure> {
    let bundle = load(config)?;
    let log = PlayLog::open(play_log).map_err(|e| format!("error: {}: {e}", play_log.display()))?;
    let hard_budget = hard_budget || bundle.experiment.hard_budget;
    let state = Arc::new(AppState::new(bundle, log, hard_budget));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| format!("error: {e}"))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| format!("error: cannot bind {host}:{port}: {e}"))?;
        let addr = listener.local_addr().map_err(|e| format!("error: {e}"))?;
        eprintln!("listening on http://{addr} (log: {})", play_log.display());
        ethicup_service::serve(listener, state)
            .await
            .map_err(|e| format!("error: {e}"))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate => validate(&cli.config),
        Command::Generate { overrides, out } => load(&cli.config).and_then(|mut bundle| {
            apply(&mut bundle, overrides)?;
            let pool = generate(&bundle)?;
            write_pool(&pool, &bundle, out)?;
            println!("wrote {} scenarios to {}", pool.len(), out.display());
            Ok(())
        }),
        Command::Run {
            overrides,
            scenarios,
            out,
        } => run(&cli.config, overrides, scenarios.as_deref(), out),
        Command::Serve {
            port,
            host,
            play_log,
            hard_budget,
        } => serve(&cli.config, host, *port, play_log, *hard_budget),
        Command::Replay { play_log, json } => replay(&cli.config, play_log, *json),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("{message}");
            ExitCode::FAILURE
        }
    }
}
