//! Command-line definition and the three commands.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use flra_core::optimizer::{sweep_arrivals, sweep_fl_devices, sweep_rho, SweepPoint};
use flra_core::ra::PhaseTiming;
use flra_core::sim::{
    compare, simulate_traced, validate_against_analytic, AnalyticPrediction, SimConfig, SimError,
    ValidationReport,
};
use flra_core::{
    solve, BandwidthShare, Protocol, Solution, SolveError, SolveOptions, SystemParams,
};

use crate::error::CliError;
use crate::format::{fmt_g, fmt_opt, summary_table};
use crate::scenario::{ProtocolChoice, RangeSpec, ScenarioFile, SweepAxis};

/// Standard errors allowed by the simulation check (plus a fixed 1 % slack).
pub const VALIDATION_SIGMA: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(
    name = "flra",
    version,
    about = "Energy-optimal bandwidth split between FL uploads and ALOHA random access"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the bandwidth share and attempt rate; writes solution.csv and summary.txt.
    Solve(CommonArgs),
    /// Re-solve along one parameter axis; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        axis: Option<SweepAxis>,
        /// Inclusive START:STOP:STEP.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<RangeSpec>,
    },
    /// Monte Carlo check of the collision model; writes sim.csv and summary.txt.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Attempt rate in packets/s (default: the optimum).
        #[arg(long)]
        lambda: Option<f64>,
        /// Bandwidth share (default: the optimum).
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<u64>,
        /// Also dump every attempt to this CSV (single protocol only).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario JSON (default: the built-in default parameter set).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolChoice>,
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Plain grid search without the golden-section pass.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Scenario with command-line overrides applied.
struct Resolved {
    scenario: ScenarioFile,
    params: SystemParams,
    protocols: Vec<Protocol>,
    options: SolveOptions,
    out_dir: PathBuf,
}

fn resolve(common: &CommonArgs) -> Result<Resolved, CliError> {
    let scenario = match &common.scenario {
        Some(path) => ScenarioFile::load(path)?,
        None => ScenarioFile::default(),
    };
    let grid_step = common.grid_step.unwrap_or(scenario.grid_step);
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(CliError::Usage(format!(
            "grid step must lie in (0, 0.1] (got {grid_step})"
        )));
    }
    let options = SolveOptions {
        grid_step,
        refine: scenario.refine && !common.no_refine,
    };
    Ok(Resolved {
        params: scenario.params(),
        protocols: common.protocol.unwrap_or(scenario.protocol).protocols(),
        options,
        out_dir: common
            .out
            .clone()
            .unwrap_or_else(|| scenario.out_dir.clone()),
        scenario,
    })
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Usage(format!("{}: {other:?}", path.display())),
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(common) => cmd_solve(&common),
        Command::Sweep {
            common,
            axis,
            range,
        } => cmd_sweep(&common, axis, range),
        Command::Simulate {
            common,
            lambda,
            rho,
            seed,
            rounds,
            trace,
        } => cmd_simulate(&common, lambda, rho, seed, rounds, trace.as_deref()),
    }
}

pub const SOLUTION_HEADER: [&str; 13] = [
    "protocol",
    "rho_star",
    "lambda_star_pkts_s",
    "t_tx_fl_s",
    "t_pkt_avg_s",
    "e_fl_J",
    "e_ra_J",
    "e_tot_J",
    "e_bit_fl_J",
    "e_bit_ra_J",
    "p_success",
    "binding",
    "feasible",
];

fn solution_record(protocol: Protocol, outcome: &Result<Solution, SolveError>) -> Vec<String> {
    let mut row = vec![protocol.name().to_string()];
    match outcome {
        Ok(s) => {
            row.extend(
                [
                    s.rho_star.get(),
                    s.lambda_star,
                    s.t_tx_fl,
                    s.t_pkt_avg,
                    s.e_fl_total,
                    s.e_ra_total,
                    s.e_total,
                    s.e_bit_fl,
                    s.e_bit_ra,
                    s.p_success,
                ]
                .map(fmt_g),
            );
            row.push(s.binding.name().into());
            row.push(s.feasible.to_string());
        }
        Err(_) => {
            row.extend(std::iter::repeat_n(String::new(), 11));
            row.push("false".into());
        }
    }
    row
}

fn cmd_solve(common: &CommonArgs) -> Result<(), CliError> {
    let r = resolve(common)?;
    let results: Vec<(Protocol, Result<Solution, SolveError>)> = r
        .protocols
        .iter()
        .map(|&p| (p, solve(p, &r.params, &r.options)))
        .collect();

    create_out_dir(&r.out_dir)?;
    let mut w = csv_writer(&r.out_dir.join("solution.csv"))?;
    w.write_record(SOLUTION_HEADER)?;
    for (p, outcome) in &results {
        w.write_record(solution_record(*p, outcome))?;
    }
    w.flush()
        .map_err(|e| CliError::io(r.out_dir.join("solution.csv"), e))?;

    let table = summary_table(&results);
    write_text(&r.out_dir.join("summary.txt"), &table)?;
    print!("{table}");

    let failures: Vec<String> = results
        .iter()
        .filter_map(|(_, o)| o.as_ref().err().map(|e| e.to_string()))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Infeasible(failures.join("; ")))
    }
}

pub const SWEEP_HEADER: [&str; 19] = [
    "axis",
    "value",
    "protocol",
    "feasible",
    "constraint",
    "rho_star",
    "lambda_star_pkts_s",
    "t_tx_fl_s",
    "t_pkt_avg_s",
    "q_max",
    "lambda_peak_pkts_s",
    "e_fl_J",
    "e_ra_J",
    "e_tot_J",
    "e_pkt_ra_J",
    "e_bit_fl_J",
    "e_bit_ra_J",
    "p_success",
    "binding",
];

/// One sweep.csv row before formatting.
struct SweepRow {
    value: f64,
    protocol: Protocol,
    constraint: Option<&'static str>,
    rho: Option<f64>,
    t_tx_fl: Option<f64>,
    q_max: Option<f64>,
    lambda_peak: Option<f64>,
    e_fl: Option<f64>,
    solution: Option<Solution>,
}

impl SweepRow {
    fn record(&self, axis: SweepAxis) -> Vec<String> {
        let s = self.solution.as_ref();
        let field = |get: fn(&Solution) -> f64| fmt_opt(s.map(get));
        vec![
            axis.name().to_string(),
            fmt_g(self.value),
            self.protocol.name().to_string(),
            s.is_some_and(|s| s.feasible).to_string(),
            self.constraint.unwrap_or_default().to_string(),
            fmt_opt(self.rho),
            field(|s| s.lambda_star),
            fmt_opt(self.t_tx_fl),
            field(|s| s.t_pkt_avg),
            fmt_opt(self.q_max),
            fmt_opt(self.lambda_peak),
            fmt_opt(self.e_fl),
            field(|s| s.e_ra_total),
            field(|s| s.e_total),
            field(|s| s.energy_per_packet),
            field(|s| s.e_bit_fl),
            field(|s| s.e_bit_ra),
            field(|s| s.p_success),
            s.map(|s| s.binding.name()).unwrap_or_default().to_string(),
        ]
    }

    fn from_solve(
        value: f64,
        protocol: Protocol,
        params: &SystemParams,
        outcome: Result<Solution, SolveError>,
    ) -> Self {
        match outcome {
            Ok(s) => {
                let peak = PhaseTiming::new(params, s.rho_star, s.t_tx_fl).max_throughput(protocol);
                SweepRow {
                    value,
                    protocol,
                    constraint: None,
                    rho: Some(s.rho_star.get()),
                    t_tx_fl: Some(s.t_tx_fl),
                    q_max: Some(peak.q_max),
                    lambda_peak: Some(peak.lambda_peak),
                    e_fl: Some(s.e_fl_total),
                    solution: Some(s),
                }
            }
            Err(e) => SweepRow {
                value,
                protocol,
                constraint: Some(constraint_key(e.constraint())),
                rho: None,
                t_tx_fl: None,
                q_max: None,
                lambda_peak: None,
                e_fl: None,
                solution: None,
            },
        }
    }
}

fn constraint_key(c: Option<flra_core::Constraint>) -> &'static str {
    match c {
        Some(flra_core::Constraint::Latency) => "latency",
        Some(flra_core::Constraint::Throughput) => "throughput",
        None => "options",
    }
}

fn sweep_rows(
    axis: SweepAxis,
    values: &[f64],
    protocol: Protocol,
    params: &SystemParams,
    options: &SolveOptions,
) -> Vec<SweepRow> {
    match axis {
        SweepAxis::Rho => {
            let shares: Vec<BandwidthShare> = values
                .iter()
                .map(|&v| BandwidthShare::saturating(v))
                .collect();
            sweep_rho(params, protocol, &shares)
                .into_iter()
                .zip(values)
                .map(|(profile, &value)| {
                    let constraint = match (&profile.outcome, profile.latency_feasible) {
                        (Ok(_), _) => None,
                        (Err(_), false) => Some("latency"),
                        (Err(c), true) => Some(constraint_key(Some(*c))),
                    };
                    SweepRow {
                        value,
                        protocol,
                        constraint,
                        rho: Some(profile.rho.get()),
                        t_tx_fl: Some(profile.t_tx_fl),
                        q_max: profile.peak.map(|p| p.q_max),
                        lambda_peak: profile.peak.map(|p| p.lambda_peak),
                        e_fl: Some(profile.e_fl_total),
                        solution: profile.outcome.ok(),
                    }
                })
                .collect()
        }
        SweepAxis::NFl => {
            let ns: Vec<usize> = values.iter().map(|&v| v as usize).collect();
            sweep_fl_devices(params, protocol, &ns, options)
                .into_iter()
                .map(|SweepPoint { value, outcome }| {
                    SweepRow::from_solve(
                        value as f64,
                        protocol,
                        &params.with_fl_devices(value),
                        outcome,
                    )
                })
                .collect()
        }
        SweepAxis::LambdaFresh => sweep_arrivals(params, protocol, values, options)
            .into_iter()
            .map(|SweepPoint { value, outcome }| {
                SweepRow::from_solve(value, protocol, &params.with_lambda_fresh(value), outcome)
            })
            .collect(),
    }
}

fn check_axis_values(axis: SweepAxis, values: &[f64]) -> Result<(), CliError> {
    let bad = |v: f64| match axis {
        SweepAxis::Rho => !(0.0..=1.0).contains(&v),
        SweepAxis::NFl => v < 1.0 || v.fract() != 0.0,
        SweepAxis::LambdaFresh => v <= 0.0,
    };
    match values.iter().find(|&&v| bad(v)) {
        Some(v) => Err(CliError::Usage(format!(
            "value {v} is out of range for axis {}",
            axis.name()
        ))),
        None => Ok(()),
    }
}

fn cmd_sweep(
    common: &CommonArgs,
    axis: Option<SweepAxis>,
    range: Option<RangeSpec>,
) -> Result<(), CliError> {
    let r = resolve(common)?;
    let axis = axis.or(r.scenario.sweep_axis).ok_or_else(|| {
        CliError::Usage("sweep needs --axis (or sweep_axis in the scenario)".into())
    })?;
    let range = range.or(r.scenario.sweep_range).ok_or_else(|| {
        CliError::Usage("sweep needs --range (or sweep_range in the scenario)".into())
    })?;
    let values = range.values();
    check_axis_values(axis, &values)?;

    let per_protocol: Vec<Vec<SweepRow>> = r
        .protocols
        .iter()
        .map(|&p| sweep_rows(axis, &values, p, &r.params, &r.options))
        .collect();

    create_out_dir(&r.out_dir)?;
    let path = r.out_dir.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(SWEEP_HEADER)?;
    for i in 0..values.len() {
        for rows in &per_protocol {
            w.write_record(rows[i].record(axis))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    print!("{:>14}", axis.name());
    for p in &r.protocols {
        print!("{:>26}", format!("E_tot {} [J]", p.tag()));
    }
    println!();
    for (i, value) in values.iter().enumerate() {
        print!("{:>14}", fmt_g(*value));
        for rows in &per_protocol {
            let cell = match &rows[i].solution {
                Some(s) => fmt_g(s.e_total),
                None => format!("infeasible ({})", rows[i].constraint.unwrap_or_default()),
            };
            print!("{cell:>26}");
        }
        println!();
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub const SIM_HEADER: [&str; 13] = [
    "protocol",
    "lambda_pkts_s",
    "rho",
    "seed",
    "n_rounds",
    "attempts",
    "successes",
    "quantity",
    "analytic",
    "empirical",
    "stderr",
    "tolerance",
    "passed",
];

pub const TRACE_HEADER: [&str; 4] = ["arrival_time_s", "phase", "duration_s", "outcome"];

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::LatencyInfeasible(_) => CliError::Infeasible(e.to_string()),
        SimError::NoRounds | SimError::BadRate(_) => CliError::Usage(e.to_string()),
    }
}

fn run_traced(config: &SimConfig, path: &Path) -> Result<ValidationReport, CliError> {
    let prediction = AnalyticPrediction::from_model(config).map_err(sim_error)?;
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_HEADER)?;
    let mut write_err = None;
    let stats = simulate_traced(config, |rec| {
        if write_err.is_some() {
            return;
        }
        let row = [
            fmt_g(rec.arrival_time),
            rec.phase.name().to_string(),
            fmt_g(rec.duration),
            rec.outcome.name().to_string(),
        ];
        if let Err(e) = w.write_record(&row) {
            write_err = Some(e);
        }
    })
    .map_err(sim_error)?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(compare(stats, prediction, VALIDATION_SIGMA))
}

fn cmd_simulate(
    common: &CommonArgs,
    lambda: Option<f64>,
    rho: Option<f64>,
    seed: Option<u64>,
    rounds: Option<u64>,
    trace: Option<&Path>,
) -> Result<(), CliError> {
    let r = resolve(common)?;
    if trace.is_some() && r.protocols.len() != 1 {
        return Err(CliError::Usage("--trace needs a single --protocol".into()));
    }
    let lambda = lambda.or(r.scenario.sim_lambda);
    let rho = rho
        .or(r.scenario.sim_rho)
        .map(|v| BandwidthShare::new(v).map_err(|e| CliError::Usage(e.to_string())))
        .transpose()?;
    let seed = seed.unwrap_or(r.scenario.seed);
    let n_rounds = rounds.unwrap_or(r.scenario.n_rounds);

    let mut reports = Vec::new();
    for &protocol in &r.protocols {
        let (lambda_total, share) = match (lambda, rho) {
            (Some(l), Some(s)) => (l, s),
            _ => {
                let s = solve(protocol, &r.params, &r.options)
                    .map_err(|e| CliError::Infeasible(e.to_string()))?;
                (lambda.unwrap_or(s.lambda_star), rho.unwrap_or(s.rho_star))
            }
        };
        let config = SimConfig {
            params: r.params.clone(),
            protocol,
            lambda_total,
            rho: share,
            n_rounds,
            seed,
        };
        let report = match trace {
            Some(path) => run_traced(&config, path)?,
            None => validate_against_analytic(&config, VALIDATION_SIGMA).map_err(sim_error)?,
        };
        reports.push((config, report));
    }

    create_out_dir(&r.out_dir)?;
    let path = r.out_dir.join("sim.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(SIM_HEADER)?;
    let mut text = String::new();
    for (config, report) in &reports {
        let stats = &report.stats;
        text.push_str(&format!(
            "{}: lambda = {} pkt/s, rho = {}, seed = {}, {} round(s), {} attempts, {} successes{}\n",
            config.protocol.name(),
            fmt_g(config.lambda_total),
            fmt_g(config.rho.get()),
            config.seed,
            config.n_rounds,
            stats.attempts,
            stats.successes,
            if report.vacuous() { " (no attempts, vacuous)" } else { "" }
        ));
        for c in &report.checks {
            w.write_record([
                config.protocol.name().to_string(),
                fmt_g(config.lambda_total),
                fmt_g(config.rho.get()),
                config.seed.to_string(),
                config.n_rounds.to_string(),
                stats.attempts.to_string(),
                stats.successes.to_string(),
                c.quantity.to_string(),
                fmt_g(c.analytic),
                fmt_opt(c.empirical),
                fmt_g(c.stderr),
                fmt_g(c.tolerance),
                c.passed.to_string(),
            ])?;
            text.push_str(&format!(
                "  {:<18} analytic {:>12}  simulated {:>12}  tol {:>12}  {}\n",
                c.quantity,
                fmt_g(c.analytic),
                c.empirical.map_or("-".into(), fmt_g),
                fmt_g(c.tolerance),
                if c.passed { "pass" } else { "FAIL" }
            ));
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_text(&r.out_dir.join("summary.txt"), &text)?;
    print!("{text}");

    let failed: Vec<String> = reports
        .iter()
        .flat_map(|(config, report)| {
            report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(move |c| format!("{} {}", config.protocol.name(), c.quantity))
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}
