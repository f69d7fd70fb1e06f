//! FDMA upload model for the federated-learning devices.
//!
//! The FL share `rho` of the band is split evenly among the `N` devices while
//! they upload. A round is computation, then idle slack, then upload.

use crate::model::{shannon_rate, BandwidthShare, SystemParams};

/// Timing of one FL round at a given bandwidth share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlRound {
    pub t_cpu: f64,
    pub t_idle: f64,
    pub t_tx: f64,
    pub t_round: f64,
    /// Start of computation.
    pub t0: f64,
    /// Start of idling.
    pub t1: f64,
    /// Start of the upload.
    pub t2: f64,
    /// End of the round.
    pub t3: f64,
}

impl FlRound {
    /// Lays out a round starting at `t = 0`. Returns `None` when the upload
    /// does not fit in the latency budget.
    pub fn new(params: &SystemParams, rho: BandwidthShare) -> Option<Self> {
        let t_tx = fl_tx_time(params, rho);
        let t_idle = params.t_round - params.t_cpu - t_tx;
        if !(t_idle >= 0.0) {
            return None;
        }
        let t0 = 0.0;
        let t1 = params.t_cpu;
        // upload is pinned to the end of the round so that t3 - t0 = t_round
        let t3 = params.t_round;
        let t2 = t3 - t_tx;
        Some(FlRound {
            t_cpu: params.t_cpu,
            t_idle,
            t_tx,
            t_round: params.t_round,
            t0,
            t1,
            t2,
            t3,
        })
    }
}

/// Shannon rate of device `device_index` on its `rho * B / N` sub-band.
///
/// # Panics
/// If `device_index` is out of range.
pub fn fl_device_rate(params: &SystemParams, rho: BandwidthShare, device_index: usize) -> f64 {
    let gain = params.gains_fl[device_index];
    shannon_rate(sub_band(params, rho), gain, params.p_tx_fl, params.n0)
}

fn sub_band(params: &SystemParams, rho: BandwidthShare) -> f64 {
    if params.gains_fl.is_empty() {
        return 0.0;
    }
    rho.get() * params.bandwidth / params.gains_fl.len() as f64
}

fn time_to_send(bits: f64, rate: f64) -> f64 {
    if bits == 0.0 {
        0.0
    } else if rate > 0.0 {
        bits / rate
    } else {
        f64::INFINITY
    }
}

/// Time for the slowest device to upload the model. Infinite at `rho = 0`.
pub fn fl_tx_time(params: &SystemParams, rho: BandwidthShare) -> f64 {
    let Some(g_min) = params.min_fl_gain() else {
        return 0.0;
    };
    let rate = shannon_rate(sub_band(params, rho), g_min, params.p_tx_fl, params.n0);
    time_to_send(params.s_fl, rate)
}

/// Transmission energy of one device for one model upload.
pub fn fl_device_energy(params: &SystemParams, rho: BandwidthShare, device_index: usize) -> f64 {
    let rate = fl_device_rate(params, rho, device_index);
    params.p_tx_fl * time_to_send(params.s_fl, rate)
}

/// Upload energy summed over all FL devices.
pub fn fl_total_energy(params: &SystemParams, rho: BandwidthShare) -> f64 {
    (0..params.gains_fl.len())
        .map(|n| fl_device_energy(params, rho, n))
        .sum()
}

pub fn fl_latency_feasible(params: &SystemParams, rho: BandwidthShare) -> bool {
    fl_tx_time(params, rho) <= params.upload_budget()
}

/// Absolute tolerance of [`min_feasible_share`].
pub const SHARE_TOLERANCE: f64 = 1e-6;

/// Smallest share meeting the FL latency budget, or `None` if even the
/// whole band is too slow.
///
/// Found by bisection: the upload time is strictly decreasing in `rho`, so
/// the feasible set is `[rho_min, 1]`. The returned share is always feasible
/// and within [`SHARE_TOLERANCE`] of the true boundary.
pub fn min_feasible_share(params: &SystemParams) -> Option<BandwidthShare> {
    if !fl_latency_feasible(params, BandwidthShare::FULL) {
        return None;
    }
    if fl_latency_feasible(params, BandwidthShare::ZERO) {
        return Some(BandwidthShare::ZERO);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > SHARE_TOLERANCE * 0.5 {
        let mid = 0.5 * (lo + hi);
        if fl_latency_feasible(params, BandwidthShare::saturating(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(BandwidthShare::saturating(hi))
}
