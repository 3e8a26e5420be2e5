//! Command-line parsing and orchestration.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use uamn_core::dro::{dro_objective, solve_enumeration, solve_lagrangian};
use uamn_core::extensive::BatteryRhsMode;
use uamn_core::model::{validate_instance, ArcId};
use uamn_core::oracle::{oracle_design, random_instance, RandomShape};
use uamn_core::par::ExecPolicy;
use uamn_core::report::SolveReport;
use uamn_core::{BetaMode, DemandModel, Design, DroConfig, NetworkSpec, SolveError, SolveMode, WorstCaseStrategy};

use crate::emit::{emit_report, write_json, DESIGN_HEADER};
use crate::error::CliError;
use crate::instance::{parse_instance, Instance};
use crate::table::{read_records, write_records};

#[derive(Debug, Parser)]
#[command(name = "uamn", version, about = "Distributionally robust design of unmanned aerial mobility networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robust design with the configured solve mode.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ModeArg::VertexEnum)]
        mode: ModeArg,
        /// Re-solve for each value, e.g. `theta=0,50,100` or `beta=10,100`.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Sample-average design (no ambiguity set).
    Saa {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Design for a single demand vector.
    Deterministic {
        #[command(flatten)]
        common: Common,
        /// Comma-separated demand per pair; defaults to the only sample when
        /// N = 1 and to the sample mean otherwise.
        #[arg(long, value_delimiter = ',')]
        demand: Option<Vec<f64>>,
    },
    /// Compares the exhaustive search with the independent oracle.
    Check {
        #[command(flatten)]
        common: Common,
        /// Number of additional random instances.
        #[arg(long, default_value_t = 100)]
        random: u64,
    },
    /// Worst-case demand table for a given design.
    WorstCase {
        #[command(flatten)]
        common: Common,
        /// A `design.csv` or `report.json` from an earlier run.
        #[arg(long)]
        design: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Instance file.
    #[arg(long)]
    pub network: PathBuf,
    /// Sample table replacing the instance's own samples.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long, default_value_t = 100.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = BetaModeArg::Fixed)]
    pub beta_mode: BetaModeArg,
    #[arg(long, value_enum, default_value_t = BatteryArg::Literal)]
    pub battery_rhs: BatteryArg,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    pub strategy: StrategyArg,
    /// Seed for generated demand and random check instances.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Caps every channel's maximum count.
    #[arg(long)]
    pub y_max: Option<u32>,
    /// `auto` or a number.
    #[arg(long)]
    pub big_m: Option<String>,
    #[arg(long, default_value_t = 1 << 20)]
    pub lattice_cap: u64,
    /// Run single-threaded.
    #[arg(long)]
    pub sequential: bool,
    /// Add wall-clock times to the report (outputs are then not reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    VertexEnum,
    Lagrangian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BetaModeArg {
    Fixed,
    Search,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BatteryArg {
    Literal,
    NodeSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Auto,
    PrimalEnum,
    DualEnum,
    Pruned,
}

impl Common {
    pub fn config(&self, mode: SolveMode) -> DroConfig {
        DroConfig {
            theta: self.theta,
            beta: self.beta,
            beta_mode: match self.beta_mode {
                BetaModeArg::Fixed => BetaMode::Fixed,
                BetaModeArg::Search => BetaMode::Search,
            },
            mode,
            strategy: match self.strategy {
                StrategyArg::Auto => WorstCaseStrategy::Auto,
                StrategyArg::PrimalEnum => WorstCaseStrategy::PrimalEnum,
                StrategyArg::DualEnum => WorstCaseStrategy::DualEnum,
                StrategyArg::Pruned => WorstCaseStrategy::Pruned,
            },
            battery_rhs: match self.battery_rhs {
                BatteryArg::Literal => BatteryRhsMode::Literal,
                BatteryArg::NodeSum => BatteryRhsMode::NodeSum,
            },
            lattice_cap: self.lattice_cap,
            exec: if self.sequential {
                ExecPolicy::Sequential
            } else {
                ExecPolicy::Parallel
            },
            ..DroConfig::default()
        }
    }

    /// Loads the instance and applies the overriding flags.
    pub fn load(&self) -> Result<Instance, CliError> {
        let mut instance = if self.seed.is_some() {
            let text = std::fs::read_to_string(&self.network).map_err(|e| CliError::Io {
                path: self.network.display().to_string(),
                message: e.to_string(),
            })?;
            let mut file = crate::instance::InstanceFile::from_toml(&text)?;
            if let (Some(g), Some(seed)) = (file.demand.gaussian.as_mut(), self.seed) {
                g.seed = seed;
            }
            let table = self
                .samples
                .as_deref()
                .map(crate::table::read_sample_table)
                .transpose()?;
            file.build(self.network.parent(), table)?
        } else {
            parse_instance(&self.network, self.samples.as_deref())?
        };
        if let Some(cap) = self.y_max {
            for arc in &mut instance.spec.arcs {
                for ch in &mut arc.channels {
                    ch.max_count = ch.max_count.min(cap);
                }
            }
        }
        match self.big_m.as_deref() {
            None => {}
            Some("auto") => instance.spec.big_m = None,
            Some(v) => {
                let m: f64 = v
                    .parse()
                    .map_err(|_| CliError::Usage(format!("--big-m expects `auto` or a number, got `{v}`")))?;
                instance.spec.big_m = Some(m);
            }
        }
        let diags = validate_instance(&instance.spec, &instance.demand);
        if !diags.is_empty() {
            return Err(SolveError::Invalid(diags).into());
        }
        Ok(instance)
    }
}

fn solve_with(spec: &NetworkSpec, demand: &DemandModel, config: &DroConfig) -> Result<SolveReport, SolveError> {
    match config.mode {
        SolveMode::Lagrangian => solve_lagrangian(spec, demand, config),
        _ => solve_enumeration(spec, demand, config),
    }
}

/// The single demand vector used by `deterministic`.
pub fn deterministic_demand(demand: &DemandModel, given: Option<&[f64]>) -> Result<DemandModel, CliError> {
    let b = match given {
        Some(b) if b.len() != demand.num_pairs() => {
            return Err(CliError::Usage(format!(
                "--demand has {} values for {} pairs",
                b.len(),
                demand.num_pairs()
            )))
        }
        Some(b) => b.to_vec(),
        None if demand.num_samples() == 1 => demand.samples[0].clone(),
        None => demand.sample_mean(),
    };
    let label = if given.is_none() && demand.num_samples() == 1 {
        demand.labels.first().cloned().unwrap_or_else(|| "s1".into())
    } else {
        "deterministic".into()
    };
    let mut single = demand.single(b.clone(), &label);
    for (k, v) in b.iter().enumerate() {
        single.lower[k] = single.lower[k].min(*v);
        single.upper[k] = single.upper[k].max(*v);
    }
    Ok(single)
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<f64>), CliError> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--sweep expects name=v1,v2,..., got `{spec}`")))?;
    let name = name.trim().to_string();
    if name != "theta" && name != "beta" {
        return Err(CliError::Usage(format!("--sweep supports theta and beta, got `{name}`")));
    }
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad sweep value `{v}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((name, values))
}

fn run_sweep(instance: &Instance, base: &DroConfig, spec: &str, dir: &Path) -> Result<(), CliError> {
    let (name, values) = parse_sweep(spec)?;
    let mut records = Vec::new();
    for v in values {
        let mut config = base.clone();
        if name == "theta" {
            config.theta = v;
        } else {
            config.beta = v;
        }
        let fmt = |x: f64| x.to_string();
        match solve_with(&instance.spec, &instance.demand, &config) {
            Ok(r) => {
                let b = &r.breakdown;
                records.push(vec![
                    name.clone(),
                    fmt(v),
                    "ok".into(),
                    fmt(r.objective),
                    fmt(r.beta),
                    fmt(b.transport),
                    fmt(b.penalty),
                    fmt(b.radius),
                    fmt(b.channel),
                    fmt(b.infrastructure),
                    fmt(b.capacity),
                    r.open_node_names(&instance.spec).join(";"),
                    r.built_arcs(&instance.spec)
                        .into_iter()
                        .map(|(t, h)| format!("{t}>{h}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                ]);
            }
            Err(e @ (SolveError::RobustlyInfeasible | SolveError::LatticeTooLarge { .. })) => {
                let status = CliError::from(e).record().kind.to_string();
                let mut row = vec![name.clone(), fmt(v), status];
                row.extend(std::iter::repeat_n(String::new(), 10));
                records.push(row);
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_records(
        &dir.join("sweep.csv"),
        &[
            "parameter",
            "value",
            "status",
            "objective",
            "beta",
            "transport",
            "penalty",
            "radius",
            "channel",
            "infrastructure",
            "capacity",
            "open_airports",
            "built_arcs",
        ],
        &records,
    )
}

/// Reads a design from an edge-list CSV or an earlier `report.json`.
pub fn read_design(spec: &NetworkSpec, path: &Path) -> Result<Design, CliError> {
    let bad = |m: String| CliError::Parse {
        location: Some(path.display().to_string()),
        message: m,
    };
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let design: Design =
            serde_json::from_value(value.get("design").cloned().unwrap_or(value)).map_err(|e| bad(e.to_string()))?;
        if design.open.len() != spec.num_nodes() || design.channels.len() != spec.num_arcs() {
            return Err(bad("design does not match the instance dimensions".into()));
        }
        return Ok(design);
    }
    let mut design = Design::empty(spec);
    let node = |name: &str| spec.node_by_name(name).ok_or_else(|| bad(format!("unknown node \"{name}\"")));
    for (r, rec) in read_records(path)?.iter().enumerate() {
        if rec.len() != DESIGN_HEADER.len() {
            return Err(bad(format!("row {} has {} fields", r + 2, rec.len())));
        }
        match rec[0].as_str() {
            "airport" => design.open[node(&rec[1])?.0] = true,
            "channel" => {
                let (t, h) = (node(&rec[1])?, node(&rec[2])?);
                let ArcId(a) = spec
                    .arc_between(t, h)
                    .ok_or_else(|| bad(format!("no arc {} -> {}", rec[1], rec[2])))?;
                let ty = spec
                    .channel_types
                    .iter()
                    .position(|c| c == &rec[3])
                    .ok_or_else(|| bad(format!("unknown channel type \"{}\"", rec[3])))?;
                design.channels[a][ty] = rec[4]
                    .parse()
                    .map_err(|_| bad(format!("bad count \"{}\"", rec[4])))?;
            }
            other => return Err(bad(format!("unknown row kind \"{other}\""))),
        }
    }
    if !design.is_consistent(spec) {
        return Err(bad("channels must join open airports".into()));
    }
    Ok(design)
}

#[derive(serde::Serialize)]
struct CheckRow {
    instance: String,
    engine_objective: f64,
    oracle_objective: f64,
    same_design: bool,
    relative_difference: f64,
}

fn compare(name: String, spec: &NetworkSpec, demand: &DemandModel, config: &DroConfig) -> Result<Option<CheckRow>, CliError> {
    let oracle = match oracle_design(spec, demand, config) {
        Ok(r) => Some(r),
        Err(SolveError::RobustlyInfeasible) => None,
        Err(SolveError::LatticeTooLarge { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let engine = match solve_enumeration(spec, demand, config) {
        Ok(r) => Some(r),
        Err(SolveError::RobustlyInfeasible) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Some(match (engine, oracle) {
        (Some(e), Some(o)) => CheckRow {
            instance: name,
            engine_objective: e.objective,
            oracle_objective: o.objective,
            same_design: e.design == o.design,
            relative_difference: (e.objective - o.objective).abs() / o.objective.abs().max(1.0),
        },
        (None, None) => CheckRow {
            instance: name,
            engine_objective: f64::INFINITY,
            oracle_objective: f64::INFINITY,
            same_design: true,
            relative_difference: 0.0,
        },
        (e, o) => CheckRow {
            instance: name,
            engine_objective: e.map_or(f64::INFINITY, |r| r.objective),
            oracle_objective: o.map_or(f64::INFINITY, |r| r.objective),
            same_design: false,
            relative_difference: f64::INFINITY,
        },
    }))
}

fn run_check(common: &Common, random: u64) -> Result<(), CliError> {
    let instance = common.load()?;
    let config = common.config(SolveMode::VertexEnum);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let label = common.network.display().to_string();
    match compare(label.clone(), &instance.spec, &instance.demand, &config)? {
        Some(r) => rows.push(r),
        None => skipped.push(label),
    }
    let seed0 = common.seed.unwrap_or(0);
    for s in 0..random {
        let seed = seed0.wrapping_add(s);
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let cfg = config.clone().with_theta_beta(1.0, 5.0);
        if let Some(r) = compare(format!("random-{seed}"), &spec, &demand, &cfg)? {
            rows.push(r);
        }
    }
    std::fs::create_dir_all(&common.out).map_err(|e| CliError::Io {
        path: common.out.display().to_string(),
        message: e.to_string(),
    })?;
    let fmt = |x: f64| x.to_string();
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.instance.clone(),
                fmt(r.engine_objective),
                fmt(r.oracle_objective),
                r.same_design.to_string(),
                fmt(r.relative_difference),
            ]
        })
        .collect();
    write_records(
        &common.out.join("check.csv"),
        &["instance", "engine_objective", "oracle_objective", "same_design", "relative_difference"],
        &records,
    )?;
    let failures: Vec<&CheckRow> = rows
        .iter()
        .filter(|r| !r.same_design || r.relative_difference > 1e-6)
        .collect();
    println!(
        "checked {} instances ({} skipped: beyond the oracle's lattice budget), {} disagreements",
        rows.len(),
        skipped.len(),
        failures.len()
    );
    for f in &failures {
        println!("  {}: engine {} vs oracle {}", f.instance, f.engine_objective, f.oracle_objective);
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("{} disagreements with the oracle", failures.len())))
    }
}

fn summary(instance: &Instance, report: &SolveReport) {
    println!("objective {}", report.objective);
    println!("open airports: {}", report.open_node_names(&instance.spec).join(", "));
    for (t, h) in report.built_arcs(&instance.spec) {
        println!("  channel {t} -> {h}");
    }
}

/// Runs one command; on failure writes `error.json` into the output
/// directory when possible.
pub fn run(cli: Cli) -> i32 {
    let out = match &cli.command {
        Command::Solve { common, .. }
        | Command::Saa { common, .. }
        | Command::Deterministic { common, .. }
        | Command::Check { common, .. }
        | Command::WorstCase { common, .. } => common.out.clone(),
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if std::fs::create_dir_all(&out).is_ok() {
                let _ = write_json(&out.join("error.json"), &e.record());
            }
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Solve { common, mode, sweep } => {
            let instance = common.load()?;
            let mode = match mode {
                ModeArg::VertexEnum => SolveMode::VertexEnum,
                ModeArg::Lagrangian => SolveMode::Lagrangian,
            };
            let config = common.config(mode);
            let report = solve_with(&instance.spec, &instance.demand, &config)?;
            emit_report(&instance, &report, "solve", &common.out, common.timings)?;
            if let Some(s) = sweep {
                run_sweep(&instance, &config, s, &common.out)?;
            }
            summary(&instance, &report);
            Ok(())
        }
        Command::Saa { common, sweep } => {
            let instance = common.load()?;
            let config = common.config(SolveMode::Saa);
            let report = solve_enumeration(&instance.spec, &instance.demand, &config)?;
            emit_report(&instance, &report, "saa", &common.out, common.timings)?;
            if let Some(s) = sweep {
                run_sweep(&instance, &config, s, &common.out)?;
            }
            summary(&instance, &report);
            Ok(())
        }
        Command::Deterministic { common, demand } => {
            let instance = common.load()?;
            let single = deterministic_demand(&instance.demand, demand.as_deref())?;
            let config = common.config(SolveMode::Deterministic);
            let report = solve_enumeration(&instance.spec, &single, &config)?;
            let shown = Instance {
                demand: single,
                ..instance
            };
            emit_report(&shown, &report, "deterministic", &common.out, common.timings)?;
            summary(&shown, &report);
            Ok(())
        }
        Command::Check { common, random } => run_check(common, *random),
        Command::WorstCase { common, design } => {
            let instance = common.load()?;
            let design = read_design(&instance.spec, design)?;
            let config = common.config(SolveMode::VertexEnum);
            let eval = dro_objective(&instance.spec, &instance.demand, &design, &config);
            if !eval.is_feasible() {
                return Err(SolveError::RobustlyInfeasible.into());
            }
            let report = SolveReport::from_evaluation(config.mode, config.theta, design, eval, &instance.spec);
            emit_report(&instance, &report, "worst-case", &common.out, common.timings)?;
            summary(&instance, &report);
            Ok(())
        }
    }
}
