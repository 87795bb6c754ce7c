//! Command-line front end for the bellwether workflows. Every subcommand
//! writes `results.json` (tool version, full parameters, results) and
//! `table.csv` under `--out`, prints the table, and optionally draws
//! `chart.svg`. Identical invocations produce byte-identical files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use beetle::baselines::{
    gp_transfer_report, nair_optimize_report, valov_transfer_report, GPTransferParams, ValovParams,
};
use beetle::bellwether::{
    discover, transfer_from, Aggregate, BellwetherReport, DiscoveryParams,
};
use beetle::data::{load_manifest, Configuration, EnvironmentDataset, Sense};
use beetle::harness::{
    generate_synthetic, run_compare, run_discovery, run_roundrobin, run_sweep, run_winloss,
    ExperimentPlan,
};
use beetle::report::{
    compare_table, discovery_table, quartile_bar, roundrobin_table, svg_quartile_chart,
    sweep_table, winloss_table, write_chart_svg, write_results_json, write_table_csv, Table,
};
use beetle::stats::{Quartiles, SkParams};
use beetle::synthetic::SyntheticFamilySpec;
use beetle::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tuner",
    version,
    about = "Find bellwether environments and transfer near-optimal configurations"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Manifest listing the family's environment CSVs.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Objective column; overrides the manifest's default.
    #[arg(long, global = true)]
    objective: Option<String>,
    /// Whether the objective is minimized or maximized.
    #[arg(long, global = true, value_enum)]
    sense: Option<SenseArg>,
    /// Independent repetitions; repeat r runs under seed + r.
    #[arg(long, global = true, default_value_t = 30)]
    repeats: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for results.json, table.csv, and chart.svg.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Also draw chart.svg where the workflow has a chart.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SenseArg {
    Min,
    Max,
}

impl From<SenseArg> for Sense {
    fn from(arg: SenseArg) -> Sense {
        match arg {
            SenseArg::Min => Sense::Min,
            SenseArg::Max => Sense::Max,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Median,
    Mean,
}

impl From<AggregateArg> for Aggregate {
    fn from(arg: AggregateArg) -> Aggregate {
        match arg {
            AggregateArg::Median => Aggregate::Median,
            AggregateArg::Mean => Aggregate::Mean,
        }
    }
}

/// Knobs of the incremental search, shared by every workflow that runs it.
#[derive(Args)]
struct DiscoveryArgs {
    /// Share of each environment's rows revealed per round.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Measurement budget as a share of all rows.
    #[arg(long, default_value_t = 0.10)]
    budget: f64,
    /// Rounds without an elimination before the search stops.
    #[arg(long, default_value_t = 5)]
    lives: usize,
    /// How per-target residuals fold into one score per source.
    #[arg(long, value_enum, default_value_t = AggregateArg::Median)]
    aggregate: AggregateArg,
    /// Rows a source needs before it can be scored or eliminated.
    #[arg(long, default_value_t = 5)]
    min_train: usize,
}

impl DiscoveryArgs {
    fn to_params(&self, seed: u64) -> DiscoveryParams {
        DiscoveryParams {
            step_size: self.step,
            budget: self.budget,
            lives: self.lives,
            seed,
            aggregate: self.aggregate.into(),
            min_train: self.min_train,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Valov,
    Gp,
    Nair,
}

#[derive(Subcommand)]
enum Command {
    /// Run the incremental bellwether search once and report its rounds.
    Discover {
        #[command(flatten)]
        discovery: DiscoveryArgs,
    },
    /// Find the bellwether, then optimize one target environment with it.
    Beetle {
        /// Target environment id from the manifest.
        #[arg(long)]
        target: String,
        /// Share of the bellwether's rows the transfer tree may train on.
        #[arg(long, default_value_t = 0.10)]
        train_fraction: f64,
        #[command(flatten)]
        discovery: DiscoveryArgs,
    },
    /// Run a single transfer or within-target baseline against a target.
    Baseline {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        target: String,
        /// Source environment id; defaults to the first non-target entry.
        #[arg(long)]
        source: Option<String>,
        /// Share of the target sampled by the within-target baseline.
        #[arg(long, default_value_t = 0.10)]
        fraction: f64,
        /// Configurations measured in both environments (valov).
        #[arg(long, default_value_t = 10)]
        transfer_samples: usize,
        /// Rows sampled on the source / target side (gp).
        #[arg(long, default_value_t = 20)]
        source_budget: usize,
        #[arg(long, default_value_t = 10)]
        target_budget: usize,
    },
    /// Rank every environment as a full-data transfer source.
    Rq1,
    /// Judge the incremental search against the full-data bellwether.
    Rq2 {
        #[arg(long, default_value_t = 0.10)]
        train_fraction: f64,
        #[command(flatten)]
        discovery: DiscoveryArgs,
    },
    /// Win/loss of the transfer against within-target sampling.
    Rq3 {
        /// Sampling fractions to ladder over.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"
        )]
        fractions: Vec<f64>,
        #[command(flatten)]
        discovery: DiscoveryArgs,
    },
    /// Compare the transfer methods and rank their pooled residuals.
    Rq4 {
        #[arg(long, default_value_t = 0.10)]
        train_fraction: f64,
        /// Configurations measured in both environments (valov).
        #[arg(long, default_value_t = 10)]
        transfer_samples: usize,
        /// Rows sampled on the source / target side (gp).
        #[arg(long, default_value_t = 20)]
        source_budget: usize,
        #[arg(long, default_value_t = 10)]
        target_budget: usize,
        #[command(flatten)]
        discovery: DiscoveryArgs,
    },
    /// Map transfer quality across a budget × lives grid.
    Sweep {
        /// Budgets to sweep, as shares of all rows.
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        budgets: Vec<f64>,
        /// Lives to sweep.
        #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
        lives_grid: Vec<usize>,
        #[arg(long, default_value_t = 0.10)]
        train_fraction: f64,
        #[command(flatten)]
        discovery: DiscoveryArgs,
    },
    /// Generate a seeded synthetic family with a planted bellwether.
    Synth {
        #[arg(long, default_value_t = 8)]
        envs: usize,
        #[arg(long, default_value_t = 8)]
        options: usize,
        #[arg(long, default_value_t = 256)]
        rows: usize,
        /// Index of the environment the family is built around.
        #[arg(long, default_value_t = 0)]
        planted: usize,
        /// Strongest distortion in the family, in [0, 1].
        #[arg(long, default_value_t = 1.0)]
        distortion: f64,
        /// Measurement noise scale relative to each environment's distortion.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_envs(global: &GlobalArgs) -> Result<Vec<EnvironmentDataset>> {
    let path = global
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Config("--manifest is required for this command".into()))?;
    load_manifest(
        path,
        global.objective.as_deref(),
        global.sense.map(Into::into),
    )
}

fn env_position(envs: &[EnvironmentDataset], id: &str) -> Result<usize> {
    envs.iter()
        .position(|e| e.env_id == id)
        .ok_or_else(|| Error::Lookup(format!("environment {id:?} is not in the manifest")))
}

/// Training rows a fraction buys, kept above the scoring minimum.
fn train_rows(fraction: f64, len: usize, min_train: usize) -> usize {
    ((fraction * len as f64).ceil() as usize)
        .max(min_train)
        .min(len)
}

fn named_config(env: &EnvironmentDataset, config: &Configuration) -> Vec<(String, f64)> {
    env.space()
        .option_names
        .iter()
        .cloned()
        .zip(config.values.iter().copied())
        .collect()
}

fn finish(global: &GlobalArgs, table: &Table, chart: Option<String>) -> Result<()> {
    write_table_csv(&global.out, table)?;
    if let Some(svg) = chart {
        if global.svg {
            write_chart_svg(&global.out, &svg)?;
        }
    }
    print!("{}", table.to_text());
    println!("\nresults written to {}", global.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let global = &cli.global;
    match &cli.command {
        Command::Discover { discovery } => {
            let envs = load_envs(global)?;
            let params = discovery.to_params(global.seed);
            let (report, _) = discover(&envs, &params)?;
            write_results_json(&global.out, "discover", &params, &report)?;
            let table = rounds_table(&report);
            println!(
                "bellwether: {} after {} round(s), {} measurement(s)",
                report.bellwether_id,
                report.rounds.len(),
                report.total_cost
            );
            finish(global, &table, None)
        }
        Command::Beetle {
            target,
            train_fraction,
            discovery,
        } => {
            let envs = load_envs(global)?;
            let at = env_position(&envs, target)?;
            let target_env = envs[at].clone();
            let sources: Vec<EnvironmentDataset> = envs
                .into_iter()
                .enumerate()
                .filter(|&(j, _)| j != at)
                .map(|(_, e)| e)
                .collect();
            let params = discovery.to_params(global.seed);
            let (report, ledgers) = discover(&sources, &params)?;
            let bell_at = sources
                .iter()
                .position(|s| s.env_id == report.bellwether_id)
                .expect("the report names one of the sources");
            let budget = train_rows(
                *train_fraction,
                sources[bell_at].len(),
                params.min_train,
            );
            let outcome = transfer_from(
                &sources[bell_at],
                &ledgers[bell_at],
                &target_env,
                budget,
                params.seed ^ 0x9e37_79b9_7f4a_7c15,
            )?;
            #[derive(Serialize)]
            struct BeetleRun<'a> {
                bellwether_id: &'a str,
                target: &'a str,
                nar: f64,
                measurements: usize,
                predicted: Vec<(String, f64)>,
                discovery: &'a BellwetherReport,
            }
            let results = BeetleRun {
                bellwether_id: &report.bellwether_id,
                target: &target_env.env_id,
                nar: outcome.nar,
                measurements: report.total_cost + outcome.extra_measurements,
                predicted: named_config(&target_env, &outcome.predicted),
                discovery: &report,
            };
            #[derive(Serialize)]
            struct BeetleParams<'a> {
                discovery: &'a DiscoveryParams,
                train_fraction: f64,
                train_rows: usize,
            }
            write_results_json(
                &global.out,
                "beetle",
                &BeetleParams {
                    discovery: &params,
                    train_fraction: *train_fraction,
                    train_rows: budget,
                },
                &results,
            )?;
            let mut table = Table::new(vec!["bellwether", "target", "nar", "measurements"]);
            table.push(vec![
                report.bellwether_id.clone(),
                target_env.env_id.clone(),
                format!("{:.2}", outcome.nar),
                (report.total_cost + outcome.extra_measurements).to_string(),
            ]);
            finish(global, &table, None)
        }
        Command::Baseline {
            method,
            target,
            source,
            fraction,
            transfer_samples,
            source_budget,
            target_budget,
        } => {
            let envs = load_envs(global)?;
            let at = env_position(&envs, target)?;
            let target_env = &envs[at];
            let source_env = match source {
                Some(id) => &envs[env_position(&envs, id)?],
                None => envs
                    .iter()
                    .find(|e| e.env_id != *target)
                    .ok_or_else(|| Error::Config("no source environment available".into()))?,
            };
            if source_env.env_id == *target {
                return Err(Error::Config(
                    "the source and target environments must differ".into(),
                ));
            }
            #[derive(Serialize)]
            struct BaselineParams<'a, P: Serialize> {
                method: &'a str,
                source: &'a str,
                target: &'a str,
                inner: &'a P,
            }
            let (name, nar, measurements) = match method {
                MethodArg::Valov => {
                    let params = ValovParams {
                        transfer_sample_count: *transfer_samples,
                        seed: global.seed,
                        ..ValovParams::default()
                    };
                    let report = valov_transfer_report(source_env, target_env, &params)?;
                    write_results_json(
                        &global.out,
                        "baseline",
                        &BaselineParams {
                            method: "valov",
                            source: &source_env.env_id,
                            target,
                            inner: &params,
                        },
                        &report,
                    )?;
                    ("valov", report.nar, report.measurements)
                }
                MethodArg::Gp => {
                    let params = GPTransferParams {
                        source_budget: *source_budget,
                        target_budget: *target_budget,
                        seed: global.seed,
                        ..GPTransferParams::default()
                    };
                    let report = gp_transfer_report(source_env, target_env, &params)?;
                    write_results_json(
                        &global.out,
                        "baseline",
                        &BaselineParams {
                            method: "gp",
                            source: &source_env.env_id,
                            target,
                            inner: &params,
                        },
                        &report,
                    )?;
                    ("gp", report.nar, report.measurements)
                }
                MethodArg::Nair => {
                    let samples = ((fraction * target_env.len() as f64).round() as usize)
                        .max(2)
                        .min(target_env.len());
                    #[derive(Serialize)]
                    struct NairParams {
                        samples: usize,
                        seed: u64,
                    }
                    let report = nair_optimize_report(target_env, samples, global.seed)?;
                    write_results_json(
                        &global.out,
                        "baseline",
                        &BaselineParams {
                            method: "nair",
                            source: "-",
                            target,
                            inner: &NairParams {
                                samples,
                                seed: global.seed,
                            },
                        },
                        &report,
                    )?;
                    ("nair", report.nar, report.measurements)
                }
            };
            let mut table = Table::new(vec!["method", "source", "target", "nar", "measurements"]);
            table.push(vec![
                name.to_string(),
                if matches!(method, MethodArg::Nair) {
                    "-".to_string()
                } else {
                    source_env.env_id.clone()
                },
                target.clone(),
                format!("{nar:.2}"),
                measurements.to_string(),
            ]);
            finish(global, &table, None)
        }
        Command::Rq1 => {
            let envs = load_envs(global)?;
            let plan = base_plan(global, None);
            let report = run_roundrobin(&envs, &plan)?;
            write_results_json(&global.out, "rq1", &plan, &report)?;
            let chart = svg_quartile_chart(
                "Transfer residuals by source",
                &report
                    .rows
                    .iter()
                    .map(|r| (r.env_id.clone(), r.nar))
                    .collect::<Vec<_>>(),
                0.0,
                100.0,
            );
            println!("round-robin bellwether: {}", report.bellwether_id);
            finish(global, &roundrobin_table(&report), Some(chart))
        }
        Command::Rq2 {
            train_fraction,
            discovery,
        } => {
            let envs = load_envs(global)?;
            let mut plan = base_plan(global, Some(discovery));
            plan.train_fraction = *train_fraction;
            let report = run_discovery(&envs, &plan)?;
            write_results_json(&global.out, "rq2", &plan, &report)?;
            println!(
                "exhaustive bellwether: {}; agreement {:.0}%; median cost {:.1}% of rows",
                report.exhaustive_id,
                report.agreement * 100.0,
                report.cost_fraction.median * 100.0
            );
            println!(
                "nar        {}",
                quartile_bar(&report.nar, 0.0, 100.0, 40)
            );
            println!(
                "exhaustive {}",
                quartile_bar(&report.exhaustive_nar, 0.0, 100.0, 40)
            );
            let chart = svg_quartile_chart(
                "Discovered vs exhaustive bellwether residuals",
                &[
                    ("discovered".to_string(), report.nar),
                    ("exhaustive".to_string(), report.exhaustive_nar),
                ],
                0.0,
                100.0,
            );
            finish(global, &discovery_table(&report), Some(chart))
        }
        Command::Rq3 {
            fractions,
            discovery,
        } => {
            let envs = load_envs(global)?;
            let mut plan = base_plan(global, Some(discovery));
            plan.fractions = fractions.clone();
            let report = run_winloss(&envs, &plan)?;
            write_results_json(&global.out, "rq3", &plan, &report)?;
            let rows: Vec<(String, Quartiles)> = report
                .cells
                .iter()
                .flat_map(|c| {
                    [
                        (format!("{:.0}% transfer", c.fraction * 100.0), c.transfer_nar),
                        (format!("{:.0}% within", c.fraction * 100.0), c.within_nar),
                    ]
                })
                .collect();
            let chart = svg_quartile_chart("Residuals by sampling fraction", &rows, 0.0, 100.0);
            finish(global, &winloss_table(&report), Some(chart))
        }
        Command::Rq4 {
            train_fraction,
            transfer_samples,
            source_budget,
            target_budget,
            discovery,
        } => {
            let envs = load_envs(global)?;
            let mut plan = base_plan(global, Some(discovery));
            plan.train_fraction = *train_fraction;
            plan.valov = ValovParams {
                transfer_sample_count: *transfer_samples,
                ..plan.valov
            };
            plan.gp = GPTransferParams {
                source_budget: *source_budget,
                target_budget: *target_budget,
                ..plan.gp
            };
            let report = run_compare(&envs, &plan)?;
            write_results_json(&global.out, "rq4", &plan, &report)?;
            let chart = svg_quartile_chart(
                "Pooled residuals by method",
                &report
                    .rows
                    .iter()
                    .map(|r| (r.method.clone(), r.nar))
                    .collect::<Vec<_>>(),
                0.0,
                100.0,
            );
            finish(global, &compare_table(&report), Some(chart))
        }
        Command::Sweep {
            budgets,
            lives_grid,
            train_fraction,
            discovery,
        } => {
            let envs = load_envs(global)?;
            let mut plan = base_plan(global, Some(discovery));
            plan.train_fraction = *train_fraction;
            plan.budget_grid = budgets.clone();
            plan.lives_grid = lives_grid.clone();
            let report = run_sweep(&envs, &plan)?;
            write_results_json(&global.out, "sweep", &plan, &report)?;
            let rows: Vec<(String, Quartiles)> = report
                .cells
                .iter()
                .map(|c| (format!("budget {:.2} lives {}", c.budget, c.lives), c.nar))
                .collect();
            let chart = svg_quartile_chart("Residuals across the sweep", &rows, 0.0, 100.0);
            finish(global, &sweep_table(&report), Some(chart))
        }
        Command::Synth {
            envs,
            options,
            rows,
            planted,
            distortion,
            noise,
        } => {
            let spec = SyntheticFamilySpec {
                env_count: *envs,
                option_count: *options,
                rows_per_env: *rows,
                planted: *planted,
                max_distortion: *distortion,
                noise_level: *noise,
                seed: global.seed,
            };
            let manifest = generate_synthetic(&spec, &global.out)?;
            #[derive(Serialize)]
            struct SynthResults {
                manifest: String,
                environments: Vec<String>,
            }
            let results = SynthResults {
                manifest: manifest.display().to_string(),
                environments: (0..spec.env_count).map(|i| spec.env_id(i)).collect(),
            };
            write_results_json(&global.out, "synth", &spec, &results)?;
            let mut table = Table::new(vec!["environment", "rows", "file"]);
            for i in 0..spec.env_count {
                table.push(vec![
                    spec.env_id(i),
                    spec.rows_per_env.to_string(),
                    format!("{}.csv", spec.env_id(i)),
                ]);
            }
            println!(
                "planted bellwether: {} (manifest {})",
                spec.planted_id(),
                manifest.display()
            );
            finish(global, &table, None)
        }
    }
}

fn base_plan(global: &GlobalArgs, discovery: Option<&DiscoveryArgs>) -> ExperimentPlan {
    let defaults = ExperimentPlan::default();
    ExperimentPlan {
        repeats: global.repeats,
        seed: global.seed,
        discovery: discovery
            .map(|d| d.to_params(global.seed))
            .unwrap_or(DiscoveryParams {
                seed: global.seed,
                ..defaults.discovery
            }),
        sk: SkParams {
            seed: global.seed,
            ..defaults.sk
        },
        ..defaults
    }
}

/// Round-by-round view of one search.
fn rounds_table(report: &BellwetherReport) -> Table {
    let mut table = Table::new(vec![
        "round",
        "revealed_fraction",
        "lives",
        "scored",
        "eliminated",
    ]);
    for (i, round) in report.rounds.iter().enumerate() {
        table.push(vec![
            (i + 1).to_string(),
            format!("{:.4}", round.revealed_fraction),
            round.lives_remaining.to_string(),
            round.scores.len().to_string(),
            if round.eliminated.is_empty() {
                "-".to_string()
            } else {
                round.eliminated.join(" ")
            },
        ]);
    }
    table
}
