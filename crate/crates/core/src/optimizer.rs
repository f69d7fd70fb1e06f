//! Joint choice of the FL bandwidth share and the random-access attempt rate.
//!
//! For a fixed share `rho` the cheapest attempt rate is the smallest one that
//! meets the throughput target, raised to the retransmission floor
//! `lambda' + eps` if needed. That leaves a one-dimensional problem in `rho`,
//! solved by grid search over the latency-feasible interval `[rho_min, 1]`.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::fl::{fl_device_energy, fl_total_energy, fl_tx_time, min_feasible_share};
use crate::model::{BandwidthShare, Protocol, SystemParams};
use crate::ra::{PhaseTiming, ThroughputPeak};
use crate::search::{bisect_boundary, golden_max};

/// Constraint that rules a candidate out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// FL upload does not fit in `t_round - t_cpu`.
    Latency,
    /// No attempt rate reaches the throughput target `q_min`.
    Throughput,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Latency => "FL latency constraint",
            Constraint::Throughput => "random-access throughput constraint",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("{protocol}: no bandwidth share satisfies the {constraint}")]
    GloballyInfeasible {
        protocol: Protocol,
        constraint: Constraint,
    },
    #[error("grid step must lie in (0, 0.1] (got {0})")]
    InvalidGridStep(f64),
}

impl SolveError {
    pub fn constraint(&self) -> Option<Constraint> {
        match self {
            SolveError::GloballyInfeasible { constraint, .. } => Some(*constraint),
            SolveError::InvalidGridStep(_) => None,
        }
    }
}

/// Which term of `max(lambda_min, lambda' + eps)` set the attempt rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    ThroughputRoot,
    RetransmissionFloor,
}

impl Binding {
    pub fn name(self) -> &'static str {
        match self {
            Binding::ThroughputRoot => "throughput-root",
            Binding::RetransmissionFloor => "retransmission-floor",
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Operating point chosen for one protocol, with its energy breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub protocol: Protocol,
    pub rho_star: BandwidthShare,
    pub lambda_star: f64,
    pub t_tx_fl: f64,
    pub t_pkt_avg: f64,
    pub e_fl_total: f64,
    pub e_ra_total: f64,
    pub e_total: f64,
    /// FL energy per uploaded model bit (J/bit).
    pub e_bit_fl: f64,
    /// Random-access energy per fresh payload bit (J/bit).
    pub e_bit_ra: f64,
    pub energy_per_packet: f64,
    pub p_success: f64,
    /// Normalized throughput achieved at `(lambda_star, rho_star)`.
    pub throughput: f64,
    /// Set when every constraint holds at this point.
    pub feasible: bool,
    pub binding: Binding,
}

/// Slack allowed on the throughput constraint when reporting feasibility.
pub const THROUGHPUT_SLACK: f64 = 1e-9;

/// Relative tolerance on the throughput root.
pub const ROOT_TOLERANCE: f64 = 1e-12;

const ROOT_SCAN_POINTS: usize = 256;

/// Smallest attempt rate whose throughput reaches `q_min`.
///
/// Both throughput curves rise and then fall in `lambda`; the rising-branch
/// root is the cheap one because the success probability only drops as
/// `lambda` grows.
pub fn lambda_min(
    protocol: Protocol,
    params: &SystemParams,
    rho: BandwidthShare,
    t_tx_fl: f64,
) -> Result<f64, Constraint> {
    let timing = PhaseTiming::new(params, rho, t_tx_fl);
    lambda_min_with(
        protocol,
        params.q_min,
        &timing,
        &timing.max_throughput(protocol),
    )
}

fn lambda_min_with(
    protocol: Protocol,
    q: f64,
    timing: &PhaseTiming,
    peak: &ThroughputPeak,
) -> Result<f64, Constraint> {
    if q <= 0.0 {
        return Ok(0.0);
    }
    if peak.q_max < q {
        return Err(Constraint::Throughput);
    }
    let meets = |lambda: f64| timing.throughput(protocol, lambda) >= q;
    let step = peak.lambda_peak / ROOT_SCAN_POINTS as f64;
    let mut lo = 0.0;
    for i in 1..=ROOT_SCAN_POINTS {
        let hi = if i == ROOT_SCAN_POINTS {
            peak.lambda_peak
        } else {
            step * i as f64
        };
        if meets(hi) {
            return Ok(bisect_boundary(meets, lo, hi, ROOT_TOLERANCE));
        }
        lo = hi;
    }
    // q_max was reached at lambda_peak, so the scan cannot fall through
    Ok(peak.lambda_peak)
}

/// `max(lambda_min, lambda' + eps)` and the term that won.
pub fn lambda_star(
    protocol: Protocol,
    params: &SystemParams,
    rho: BandwidthShare,
    t_tx_fl: f64,
) -> Result<(f64, Binding), Constraint> {
    let timing = PhaseTiming::new(params, rho, t_tx_fl);
    let root = lambda_min_with(
        protocol,
        params.q_min,
        &timing,
        &timing.max_throughput(protocol),
    )?;
    pick_rate(protocol, root, params, &timing)
}

/// Raises the root to the retransmission floor. A floor beyond the falling
/// branch of the throughput curve leaves no feasible rate.
fn pick_rate(
    protocol: Protocol,
    root: f64,
    params: &SystemParams,
    timing: &PhaseTiming,
) -> Result<(f64, Binding), Constraint> {
    let floor = params.lambda_fresh + params.eps_retx;
    if root >= floor {
        Ok((root, Binding::ThroughputRoot))
    } else if timing.throughput(protocol, floor) >= params.q_min {
        Ok((floor, Binding::RetransmissionFloor))
    } else {
        Err(Constraint::Throughput)
    }
}

/// Total transmission energy per round at share `rho`, with the attempt rate
/// set to `lambda_star(rho)`.
pub fn objective_energy(
    protocol: Protocol,
    params: &SystemParams,
    rho: BandwidthShare,
) -> Result<Solution, Constraint> {
    let t_tx_fl = fl_tx_time(params, rho);
    if !(t_tx_fl <= params.upload_budget()) {
        return Err(Constraint::Latency);
    }
    let timing = PhaseTiming::new(params, rho, t_tx_fl);
    let peak = timing.max_throughput(protocol);
    let root = lambda_min_with(protocol, params.q_min, &timing, &peak)?;
    let (lambda, binding) = pick_rate(protocol, root, params, &timing)?;
    Ok(assemble(
        protocol, params, rho, t_tx_fl, &timing, lambda, binding,
    ))
}

fn assemble(
    protocol: Protocol,
    params: &SystemParams,
    rho: BandwidthShare,
    t_tx_fl: f64,
    timing: &PhaseTiming,
    lambda: f64,
    binding: Binding,
) -> Solution {
    let energy_per_packet = timing.energy_per_packet(protocol, params, lambda);
    let packets = params.fresh_packets_per_round();
    let e_ra_total = if packets == 0.0 {
        0.0
    } else {
        packets * energy_per_packet
    };
    let e_fl_total = fl_total_energy(params, rho);
    let fl_bits = params.gains_fl.len() as f64 * params.s_fl;
    let ra_bits = packets * params.s_ra;
    let throughput = timing.throughput(protocol, lambda);
    let feasible = t_tx_fl <= params.upload_budget()
        && throughput >= params.q_min - THROUGHPUT_SLACK
        && lambda >= params.lambda_fresh + params.eps_retx;
    Solution {
        protocol,
        rho_star: rho,
        lambda_star: lambda,
        t_tx_fl,
        t_pkt_avg: timing.t_pkt_avg(),
        e_fl_total,
        e_ra_total,
        e_total: e_fl_total + e_ra_total,
        e_bit_fl: e_fl_total / fl_bits,
        e_bit_ra: e_ra_total / ra_bits,
        energy_per_packet,
        p_success: timing.success_prob(protocol, lambda),
        throughput,
        feasible,
        binding,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Spacing of the share grid.
    pub grid_step: f64,
    /// Run a golden-section pass within one step of the grid winner.
    pub refine: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            grid_step: 1e-3,
            refine: true,
        }
    }
}

impl SolveOptions {
    /// Plain grid search, no refinement.
    pub fn grid_only(grid_step: f64) -> Self {
        SolveOptions {
            grid_step,
            refine: false,
        }
    }
}

/// Share grid `{rho_min, rho_min + step, ..., 1}`; the last point is always 1.
pub fn share_grid(rho_min: f64, step: f64) -> Vec<BandwidthShare> {
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let rho = rho_min + step * k as f64;
        // stop short of 1 so that 1 itself is not duplicated by rounding
        if rho >= 1.0 - 1e-12 {
            break;
        }
        grid.push(BandwidthShare::saturating(rho));
        k += 1;
    }
    grid.push(BandwidthShare::FULL);
    grid
}

/// Prefers lower energy, then smaller share.
fn better(candidate: &Solution, incumbent: &Solution) -> bool {
    candidate.e_total < incumbent.e_total
        || (candidate.e_total == incumbent.e_total && candidate.rho_star < incumbent.rho_star)
}

/// Minimum-energy operating point for `protocol`.
///
/// Grid points are evaluated in parallel; the reduction runs in grid order so
/// the result does not depend on the thread count.
pub fn solve(
    protocol: Protocol,
    params: &SystemParams,
    options: &SolveOptions,
) -> Result<Solution, SolveError> {
    if !(options.grid_step > 0.0 && options.grid_step <= 0.1) {
        return Err(SolveError::InvalidGridStep(options.grid_step));
    }
    let infeasible = |constraint| SolveError::GloballyInfeasible {
        protocol,
        constraint,
    };
    let rho_min = min_feasible_share(params).ok_or(infeasible(Constraint::Latency))?;

    let evaluated: Vec<Result<Solution, Constraint>> = share_grid(rho_min.get(), options.grid_step)
        .into_par_iter()
        .map(|rho| objective_energy(protocol, params, rho))
        .collect();

    let mut best: Option<Solution> = None;
    for sol in evaluated.into_iter().flatten() {
        if !sol.e_total.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| better(&sol, b)) {
            best = Some(sol);
        }
    }
    let best = best.ok_or(infeasible(Constraint::Throughput))?;
    if !options.refine {
        return Ok(best);
    }

    let lo = (best.rho_star.get() - options.grid_step).max(rho_min.get());
    let hi = (best.rho_star.get() + options.grid_step).min(1.0);
    let energy_at = |rho: f64| {
        objective_energy(protocol, params, BandwidthShare::saturating(rho))
            .map(|s| s.e_total)
            .unwrap_or(f64::INFINITY)
    };
    let (rho, neg_energy) = golden_max(|rho| -energy_at(rho), lo, hi, 1e-9);
    if -neg_energy < best.e_total {
        if let Ok(refined) = objective_energy(protocol, params, BandwidthShare::saturating(rho)) {
            return Ok(refined);
        }
    }
    Ok(best)
}

/// Outcome of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint<T> {
    pub value: T,
    pub outcome: Result<Solution, SolveError>,
}

/// Re-solves with `N` FL devices for each value in `n_values`.
pub fn sweep_fl_devices(
    params: &SystemParams,
    protocol: Protocol,
    n_values: &[usize],
    options: &SolveOptions,
) -> Vec<SweepPoint<usize>> {
    n_values
        .par_iter()
        .map(|&n| SweepPoint {
            value: n,
            outcome: solve(protocol, &params.with_fl_devices(n), options),
        })
        .collect()
}

/// Re-solves with fresh arrival rate `lambda'` for each value in
/// `lambda_values`.
pub fn sweep_arrivals(
    params: &SystemParams,
    protocol: Protocol,
    lambda_values: &[f64],
    options: &SolveOptions,
) -> Vec<SweepPoint<f64>> {
    lambda_values
        .par_iter()
        .map(|&lambda| SweepPoint {
            value: lambda,
            outcome: solve(protocol, &params.with_lambda_fresh(lambda), options),
        })
        .collect()
}

/// Throughput ceiling and energy components at one bandwidth share.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareProfile {
    pub rho: BandwidthShare,
    pub protocol: Protocol,
    pub t_tx_fl: f64,
    pub latency_feasible: bool,
    /// Throughput peak over `lambda`; `None` when the latency budget is missed.
    pub peak: Option<ThroughputPeak>,
    /// FL energy for one model upload by one device.
    pub e_fl_per_device: f64,
    pub e_fl_total: f64,
    /// Energy breakdown at `lambda_star(rho)`.
    pub outcome: Result<Solution, Constraint>,
}

/// Profiles each share in `rho_values`.
pub fn sweep_rho(
    params: &SystemParams,
    protocol: Protocol,
    rho_values: &[BandwidthShare],
) -> Vec<ShareProfile> {
    rho_values
        .par_iter()
        .map(|&rho| {
            let t_tx_fl = fl_tx_time(params, rho);
            let latency_feasible = t_tx_fl <= params.upload_budget();
            let peak = latency_feasible
                .then(|| PhaseTiming::new(params, rho, t_tx_fl).max_throughput(protocol));
            let mean_device_energy = if params.gains_fl.is_empty() {
                0.0
            } else {
                (0..params.gains_fl.len())
                    .map(|n| fl_device_energy(params, rho, n))
                    .sum::<f64>()
                    / params.gains_fl.len() as f64
            };
            ShareProfile {
                rho,
                protocol,
                t_tx_fl,
                latency_feasible,
                peak,
                e_fl_per_device: mean_device_energy,
                e_fl_total: fl_total_energy(params, rho),
                outcome: objective_energy(protocol, params, rho),
            }
        })
        .collect()
}
