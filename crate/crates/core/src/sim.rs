//! Monte Carlo check of the random-access analysis.
//!
//! Attempts arrive as a Poisson process over `n_rounds` consecutive FL
//! rounds. Each round ends with the FL upload, during which random-access
//! packets only get `(1 - rho) B`.
//!
//! * ALOHA: a packet is sent at its arrival instant; its airtime is fixed by
//!   the phase it starts in. It succeeds iff no other packet overlaps it.
//! * Slotted ALOHA: time is cut into slots of the worst-case airtime; a
//!   packet waits for the next slot boundary and succeeds iff it is alone in
//!   its slot.
//!
//! FL uploads use their own sub-bands and never collide with random access.
//! Streams come from ChaCha8 seeded with `seed`; replication `i` uses ChaCha
//! stream `i`, so runs are reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use thiserror::Error;

use crate::fl::fl_tx_time;
use crate::model::{BandwidthShare, Protocol, SystemParams};
use crate::ra::PhaseTiming;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("at least one round must be simulated")]
    NoRounds,
    #[error("attempt rate must be finite and non-negative (got {0})")]
    BadRate(f64),
    #[error("bandwidth share {0} misses the FL latency budget")]
    LatencyInfeasible(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: SystemParams,
    pub protocol: Protocol,
    pub lambda_total: f64,
    pub rho: BandwidthShare,
    pub n_rounds: u64,
    pub seed: u64,
}

impl SimConfig {
    fn check(&self) -> Result<f64, SimError> {
        if self.n_rounds == 0 {
            return Err(SimError::NoRounds);
        }
        if !(self.lambda_total >= 0.0 && self.lambda_total.is_finite()) {
            return Err(SimError::BadRate(self.lambda_total));
        }
        let t_tx_fl = fl_tx_time(&self.params, self.rho);
        if !(t_tx_fl <= self.params.upload_budget()) {
            return Err(SimError::LatencyInfeasible(self.rho.get()));
        }
        Ok(t_tx_fl)
    }

    /// Expected number of attempts over the whole run.
    pub fn expected_attempts(&self) -> f64 {
        self.lambda_total * self.params.t_round * self.n_rounds as f64
    }
}

/// Round phase an attempt starts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Computation or idling: the whole band is available.
    Full,
    /// FL upload in progress.
    Shared,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Full => "full",
            Phase::Shared => "shared",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Collision,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
        }
    }
}

/// One simulated attempt, as written to arrival traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub arrival_time: f64,
    pub phase: Phase,
    /// Airtime (ALOHA) or slot length (slotted ALOHA).
    pub duration: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhaseCounts {
    pub attempts: u64,
    pub successes: u64,
}

impl PhaseCounts {
    /// Empirical success rate, `None` without attempts.
    pub fn success_rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.successes as f64 / self.attempts as f64)
    }

    pub fn stderr(&self) -> Option<f64> {
        self.success_rate()
            .map(|p| (p * (1.0 - p) / self.attempts as f64).sqrt())
    }

    fn add(&mut self, other: PhaseCounts) {
        self.attempts += other.attempts;
        self.successes += other.successes;
    }
}

/// Raw accumulators; additive across replications.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Tally {
    full: PhaseCounts,
    shared: PhaseCounts,
    /// Sum over successful packets of their normalized-throughput credit.
    credit: f64,
    credit_sq: f64,
    /// Time the credit is normalized by.
    span: f64,
    slots: u64,
    successful_slots: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.full.add(other.full);
        self.shared.add(other.shared);
        self.credit += other.credit;
        self.credit_sq += other.credit_sq;
        self.span += other.span;
        self.slots += other.slots;
        self.successful_slots += other.successful_slots;
        self
    }

    fn record(&mut self, phase: Phase, success: bool, credit: f64) {
        let counts = match phase {
            Phase::Full => &mut self.full,
            Phase::Shared => &mut self.shared,
        };
        counts.attempts += 1;
        if success {
            counts.successes += 1;
            self.credit += credit;
            self.credit_sq += credit * credit;
        }
    }

    fn finish(self, protocol: Protocol, credit_per_slot: f64) -> SimStats {
        let attempts = self.full.attempts + self.shared.attempts;
        let successes = self.full.successes + self.shared.successes;
        let p_success_hat = if attempts == 0 {
            1.0
        } else {
            successes as f64 / attempts as f64
        };
        let stderr_p = if attempts == 0 {
            0.0
        } else {
            (p_success_hat * (1.0 - p_success_hat) / attempts as f64).sqrt()
        };
        let throughput_hat = if self.span > 0.0 {
            self.credit / self.span
        } else {
            0.0
        };
        let stderr_throughput = match protocol {
            // compound-Poisson variance of the credited airtime
            Protocol::Aloha if self.span > 0.0 => self.credit_sq.sqrt() / self.span,
            // binomial over slots
            Protocol::SlottedAloha if self.slots > 0 => {
                let p = self.successful_slots as f64 / self.slots as f64;
                credit_per_slot * (p * (1.0 - p) / self.slots as f64).sqrt()
            }
            _ => 0.0,
        };
        SimStats {
            attempts,
            successes,
            p_success_hat,
            throughput_hat,
            stderr_p,
            stderr_throughput,
            full: self.full,
            shared: self.shared,
            no_attempts: attempts == 0,
        }
    }
}

/// Empirical estimates from one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimStats {
    pub attempts: u64,
    pub successes: u64,
    /// `successes / attempts`, or 1 when there were no attempts.
    pub p_success_hat: f64,
    pub throughput_hat: f64,
    pub stderr_p: f64,
    pub stderr_throughput: f64,
    /// Attempts starting while the whole band is available.
    pub full: PhaseCounts,
    /// Attempts starting during the FL upload.
    pub shared: PhaseCounts,
    pub no_attempts: bool,
}

impl SimStats {
    pub fn collisions(&self) -> u64 {
        self.attempts - self.successes
    }
}

/// Runs one replication.
pub fn simulate(config: &SimConfig) -> Result<SimStats, SimError> {
    simulate_traced(config, |_| {})
}

/// Like [`simulate`], passing every attempt to `sink` in arrival order
/// (slotted ALOHA: in slot order).
pub fn simulate_traced<F>(config: &SimConfig, sink: F) -> Result<SimStats, SimError>
where
    F: FnMut(&TraceRecord),
{
    let t_tx_fl = config.check()?;
    let timing = PhaseTiming::new(&config.params, config.rho, t_tx_fl);
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tally = run(config, &timing, t_tx_fl, rng, sink);
    Ok(tally.finish(config.protocol, slot_credit(&timing)))
}

/// Runs `replications` independent replications in parallel and pools them.
/// Pooling is a sum of counts, so the result is independent of scheduling.
pub fn simulate_replicated(config: &SimConfig, replications: u64) -> Result<SimStats, SimError> {
    let t_tx_fl = config.check()?;
    let timing = PhaseTiming::new(&config.params, config.rho, t_tx_fl);
    let tallies: Vec<Tally> = (0..replications.max(1))
        .into_par_iter()
        .map(|stream| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream);
            run(config, &timing, t_tx_fl, rng, |_| {})
        })
        .collect();
    let pooled = tallies.into_iter().fold(Tally::default(), Tally::merge);
    Ok(pooled.finish(config.protocol, slot_credit(&timing)))
}

fn slot_credit(timing: &PhaseTiming) -> f64 {
    timing.t_pkt_avg() / timing.t_pkt_shared
}

struct Arrivals {
    rng: ChaCha8Rng,
    gap: Option<Exp<f64>>,
    now: f64,
    horizon: f64,
}

impl Iterator for Arrivals {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let gap = self.gap.as_ref()?;
        self.now += gap.sample(&mut self.rng);
        (self.now < self.horizon).then_some(self.now)
    }
}

fn run<F>(config: &SimConfig, timing: &PhaseTiming, t_tx_fl: f64, rng: ChaCha8Rng, sink: F) -> Tally
where
    F: FnMut(&TraceRecord),
{
    let t_round = config.params.t_round;
    let horizon = t_round * config.n_rounds as f64;
    let arrivals = Arrivals {
        rng,
        gap: (config.lambda_total > 0.0).then(|| Exp::new(config.lambda_total).unwrap()),
        now: 0.0,
        horizon,
    };
    let upload_start = t_round - t_tx_fl;
    let phase_of = move |t: f64| {
        let local = t - (t / t_round).floor() * t_round;
        if t_tx_fl > 0.0 && local >= upload_start {
            Phase::Shared
        } else {
            Phase::Full
        }
    };
    match config.protocol {
        Protocol::Aloha => run_aloha(timing, arrivals, phase_of, horizon, sink),
        Protocol::SlottedAloha => run_slotted(timing, arrivals, phase_of, horizon, sink),
    }
}

#[derive(Clone, Copy)]
struct InFlight {
    start: f64,
    end: f64,
    phase: Phase,
    collided: bool,
}

fn run_aloha<F>(
    timing: &PhaseTiming,
    arrivals: Arrivals,
    phase_of: impl Fn(f64) -> Phase,
    horizon: f64,
    mut sink: F,
) -> Tally
where
    F: FnMut(&TraceRecord),
{
    let mut tally = Tally {
        span: horizon,
        ..Tally::default()
    };
    let mut settle = |pkt: InFlight, tally: &mut Tally| {
        let airtime = pkt.end - pkt.start;
        tally.record(pkt.phase, !pkt.collided, airtime);
        sink(&TraceRecord {
            arrival_time: pkt.start,
            phase: pkt.phase,
            duration: airtime,
            outcome: if pkt.collided {
                Outcome::Collision
            } else {
                Outcome::Success
            },
        });
    };
    // latest end among settled packets
    let mut settled_end = f64::NEG_INFINITY;
    let mut pending: Option<InFlight> = None;
    for start in arrivals {
        let phase = phase_of(start);
        let airtime = match phase {
            Phase::Full => timing.t_pkt_full,
            Phase::Shared => timing.t_pkt_shared,
        };
        let mut pkt = InFlight {
            start,
            end: start + airtime,
            phase,
            collided: settled_end > start,
        };
        if let Some(mut prev) = pending.take() {
            // starts are sorted, so the next start is the only one that can
            // hit `prev` first; later overlaps are caught by `settled_end`
            if start < prev.end {
                prev.collided = true;
                pkt.collided = true;
            }
            settled_end = settled_end.max(prev.end);
            settle(prev, &mut tally);
        }
        pending = Some(pkt);
    }
    if let Some(prev) = pending {
        settle(prev, &mut tally);
    }
    tally
}

fn run_slotted<F>(
    timing: &PhaseTiming,
    arrivals: Arrivals,
    phase_of: impl Fn(f64) -> Phase,
    horizon: f64,
    mut sink: F,
) -> Tally
where
    F: FnMut(&TraceRecord),
{
    let slot = timing.t_pkt_shared;
    let credit = slot_credit(timing) * slot;
    let finite_slots = slot.is_finite() && slot > 0.0;
    let slots = if finite_slots {
        (horizon / slot).ceil() as u64
    } else {
        0
    };
    let mut tally = Tally {
        span: slots as f64 * if finite_slots { slot } else { 0.0 },
        slots,
        ..Tally::default()
    };
    let mut current: Option<u64> = None;
    let mut occupants: Vec<(f64, Phase)> = Vec::with_capacity(8);
    let mut flush = |occupants: &mut Vec<(f64, Phase)>, tally: &mut Tally| {
        let alone = finite_slots && occupants.len() == 1;
        if alone {
            tally.successful_slots += 1;
        }
        for &(t, phase) in occupants.iter() {
            tally.record(phase, alone, credit);
            sink(&TraceRecord {
                arrival_time: t,
                phase,
                duration: slot,
                outcome: if alone {
                    Outcome::Success
                } else {
                    Outcome::Collision
                },
            });
        }
        occupants.clear();
    };
    for t in arrivals {
        let index = if finite_slots {
            (t / slot).floor() as u64
        } else {
            0
        };
        if current != Some(index) {
            flush(&mut occupants, &mut tally);
            current = Some(index);
        }
        occupants.push((t, phase_of(t)));
    }
    flush(&mut occupants, &mut tally);
    tally
}

/// Absolute slack added to every comparison, covering packets that straddle
/// a phase boundary.
pub const BOUNDARY_SLACK: f64 = 0.01;

/// Analytic values the simulation is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPrediction {
    pub p_success: f64,
    pub throughput: f64,
    pub success_full: f64,
    pub success_shared: f64,
}

impl AnalyticPrediction {
    pub fn from_model(config: &SimConfig) -> Result<Self, SimError> {
        let t_tx_fl = config.check()?;
        let timing = PhaseTiming::new(&config.params, config.rho, t_tx_fl);
        let (protocol, lambda) = (config.protocol, config.lambda_total);
        Ok(AnalyticPrediction {
            p_success: timing.success_prob(protocol, lambda),
            throughput: timing.throughput(protocol, lambda),
            success_full: timing.success_full(protocol, lambda),
            success_shared: timing.success_shared(protocol, lambda),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub quantity: &'static str,
    pub analytic: f64,
    /// `None` when nothing was observed (vacuous pass).
    pub empirical: Option<f64>,
    pub stderr: f64,
    /// Allowed absolute deviation, `sigma * stderr + BOUNDARY_SLACK`.
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub stats: SimStats,
    pub prediction: AnalyticPrediction,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn vacuous(&self) -> bool {
        self.stats.no_attempts
    }
}

/// Compares `stats` against `prediction` at `sigma` standard errors plus
/// [`BOUNDARY_SLACK`].
pub fn compare(stats: SimStats, prediction: AnalyticPrediction, sigma: f64) -> ValidationReport {
    let check = |quantity, analytic: f64, empirical: Option<f64>, stderr: f64| {
        let tolerance = sigma * stderr + BOUNDARY_SLACK;
        let passed = empirical.is_none_or(|e| (e - analytic).abs() <= tolerance);
        Check {
            quantity,
            analytic,
            empirical,
            stderr,
            tolerance,
            passed,
        }
    };
    let observed = (!stats.no_attempts).then_some(());
    let checks = vec![
        check(
            "p_success",
            prediction.p_success,
            observed.map(|_| stats.p_success_hat),
            stats.stderr_p,
        ),
        check(
            "throughput",
            prediction.throughput,
            observed.map(|_| stats.throughput_hat),
            stats.stderr_throughput,
        ),
        check(
            "p_success_full",
            prediction.success_full,
            stats.full.success_rate(),
            stats.full.stderr().unwrap_or(0.0),
        ),
        check(
            "p_success_shared",
            prediction.success_shared,
            stats.shared.success_rate(),
            stats.shared.stderr().unwrap_or(0.0),
        ),
    ];
    ValidationReport {
        stats,
        prediction,
        checks,
    }
}

/// Simulates `config` and checks it against the closed-form model.
pub fn validate_against_analytic(
    config: &SimConfig,
    tolerance_sigma: f64,
) -> Result<ValidationReport, SimError> {
    let prediction = AnalyticPrediction::from_model(config)?;
    let stats = simulate(config)?;
    Ok(compare(stats, prediction, tolerance_sigma))
}
