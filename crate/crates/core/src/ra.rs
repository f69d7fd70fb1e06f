//! Random-access analytics for ALOHA and slotted ALOHA.
//!
//! Random-access devices get the whole band while FL devices compute or idle,
//! and `(1 - rho) B` while FL devices upload. Attempts (fresh plus
//! retransmissions) form a Poisson process of rate `lambda`. A packet's
//! airtime depends on the phase it starts in.
//!
//! Where a packet time is infinite (`rho = 1` during an upload) every
//! quantity takes its limit: success factor 0, throughput term 0.

use crate::model::{shannon_rate, BandwidthShare, Protocol, SystemParams};
use crate::search::{geomspace, golden_max};

/// Packet airtime and phase weights at a fixed `(rho, t_tx_fl)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTiming {
    pub rho: BandwidthShare,
    /// Airtime with the whole band.
    pub t_pkt_full: f64,
    /// Airtime with `(1 - rho) B`, i.e. while FL devices upload.
    pub t_pkt_shared: f64,
    /// Fraction of the round without FL uploads.
    pub w_full: f64,
    /// Fraction of the round with FL uploads.
    pub w_shared: f64,
}

impl PhaseTiming {
    pub fn new(params: &SystemParams, rho: BandwidthShare, t_tx_fl: f64) -> Self {
        let w_shared = (t_tx_fl / params.t_round).clamp(0.0, 1.0);
        PhaseTiming {
            rho,
            t_pkt_full: ra_packet_time(params, params.bandwidth),
            t_pkt_shared: ra_packet_time(params, rho.complement() * params.bandwidth),
            w_full: 1.0 - w_shared,
            w_shared,
        }
    }

    /// Phase-weighted mean airtime.
    pub fn t_pkt_avg(&self) -> f64 {
        weighted(self.w_full, self.t_pkt_full) + weighted(self.w_shared, self.t_pkt_shared)
    }

    /// Probability that an attempt starting in the full-band phase succeeds.
    pub fn success_full(&self, protocol: Protocol, lambda: f64) -> f64 {
        match protocol {
            Protocol::Aloha => no_arrival(lambda, 2.0 * self.t_pkt_full),
            // slots are sized for the worst case in both phases
            Protocol::SlottedAloha => no_arrival(lambda, self.t_pkt_shared),
        }
    }

    /// Probability that an attempt starting during the FL upload succeeds.
    pub fn success_shared(&self, protocol: Protocol, lambda: f64) -> f64 {
        match protocol {
            Protocol::Aloha => no_arrival(lambda, 2.0 * self.t_pkt_shared),
            Protocol::SlottedAloha => no_arrival(lambda, self.t_pkt_shared),
        }
    }

    pub fn success_prob(&self, protocol: Protocol, lambda: f64) -> f64 {
        match protocol {
            Protocol::Aloha => {
                weighted(self.w_full, self.success_full(protocol, lambda))
                    + weighted(self.w_shared, self.success_shared(protocol, lambda))
            }
            Protocol::SlottedAloha => no_arrival(lambda, self.t_pkt_shared),
        }
    }

    /// Normalized throughput: expected fraction of time carrying successful
    /// packets.
    pub fn throughput(&self, protocol: Protocol, lambda: f64) -> f64 {
        match protocol {
            Protocol::Aloha => {
                let term = |w: f64, t: f64| {
                    if w == 0.0 || t.is_infinite() {
                        0.0
                    } else {
                        w * offered_load(lambda, t) * no_arrival(lambda, 2.0 * t)
                    }
                };
                term(self.w_full, self.t_pkt_full) + term(self.w_shared, self.t_pkt_shared)
            }
            Protocol::SlottedAloha => {
                let success = no_arrival(lambda, self.t_pkt_shared);
                if success == 0.0 {
                    0.0
                } else {
                    offered_load(lambda, self.t_pkt_avg()) * success
                }
            }
        }
    }

    /// Mean energy per delivered packet, retransmissions included.
    pub fn energy_per_packet(&self, protocol: Protocol, params: &SystemParams, lambda: f64) -> f64 {
        let airtime_energy = params.p_tx_ra * self.t_pkt_avg();
        let success = self.success_prob(protocol, lambda);
        if airtime_energy == 0.0 {
            0.0
        } else if success > 0.0 {
            airtime_energy / success
        } else {
            f64::INFINITY
        }
    }

    /// Maximum of [`PhaseTiming::throughput`] over `lambda > 0`.
    ///
    /// A geometric scan locates the best neighbourhood, then golden-section
    /// search refines it. The scan matters for ALOHA, where the two phase
    /// terms peak at different rates and the sum can be bimodal.
    pub fn max_throughput(&self, protocol: Protocol) -> ThroughputPeak {
        let t_full = self.t_pkt_full;
        if !(t_full > 0.0) || !t_full.is_finite() {
            return ThroughputPeak {
                lambda_peak: 0.0,
                q_max: 0.0,
            };
        }
        let slowest = if self.t_pkt_shared.is_finite() {
            self.t_pkt_shared.max(t_full)
        } else {
            t_full
        };
        let lo = 1e-3 / slowest;
        let hi = 10.0 / t_full;
        let grid: Vec<f64> = geomspace(lo, hi, PEAK_SCAN_POINTS).collect();
        let (best, _) = grid
            .iter()
            .enumerate()
            .map(|(i, &l)| (i, self.throughput(protocol, l)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, q)| if q > acc.1 { (i, q) } else { acc },
            );
        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(grid.len() - 1)];
        let (lambda_peak, q_max) = golden_max(|l| self.throughput(protocol, l), a, b, 1e-10);
        ThroughputPeak { lambda_peak, q_max }
    }
}

const PEAK_SCAN_POINTS: usize = 256;

/// Location and height of the throughput peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputPeak {
    pub lambda_peak: f64,
    pub q_max: f64,
}

fn weighted(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * x
    }
}

/// `exp(-lambda * window)` with the limits `lambda = 0 -> 1` and
/// `window = inf -> 0`.
fn no_arrival(lambda: f64, window: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else if window.is_infinite() {
        0.0
    } else {
        (-lambda * window).exp()
    }
}

fn offered_load(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        lambda * t
    }
}

/// Evaluated random-access state at `(lambda, rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaPoint {
    pub protocol: Protocol,
    pub lambda_total: f64,
    pub rho: BandwidthShare,
    pub t_pkt_full: f64,
    pub t_pkt_shared: f64,
    pub t_pkt_avg: f64,
    pub p_success: f64,
    pub throughput: f64,
    pub energy_per_packet: f64,
}

impl RaPoint {
    /// Retransmission rate `lambda - lambda'`.
    pub fn retransmission_rate(&self, params: &SystemParams) -> f64 {
        self.lambda_total - params.lambda_fresh
    }
}

pub fn evaluate(
    protocol: Protocol,
    params: &SystemParams,
    lambda_total: f64,
    rho: BandwidthShare,
    t_tx_fl: f64,
) -> RaPoint {
    let timing = PhaseTiming::new(params, rho, t_tx_fl);
    RaPoint {
        protocol,
        lambda_total,
        rho,
        t_pkt_full: timing.t_pkt_full,
        t_pkt_shared: timing.t_pkt_shared,
        t_pkt_avg: timing.t_pkt_avg(),
        p_success: timing.success_prob(protocol, lambda_total),
        throughput: timing.throughput(protocol, lambda_total),
        energy_per_packet: timing.energy_per_packet(protocol, params, lambda_total),
    }
}

/// Airtime of one random-access packet with bandwidth `b`.
pub fn ra_packet_time(params: &SystemParams, b: f64) -> f64 {
    if params.s_ra == 0.0 {
        return 0.0;
    }
    let rate = shannon_rate(b, params.gain_ra, params.p_tx_ra, params.n0);
    if rate > 0.0 {
        params.s_ra / rate
    } else {
        f64::INFINITY
    }
}

/// Airtime averaged over the two phases of an FL round.
pub fn ra_packet_time_avg(params: &SystemParams, rho: BandwidthShare, t_tx_fl: f64) -> f64 {
    PhaseTiming::new(params, rho, t_tx_fl).t_pkt_avg()
}

pub fn success_prob(
    protocol: Protocol,
    params: &SystemParams,
    lambda_total: f64,
    rho: BandwidthShare,
    t_tx_fl: f64,
) -> f64 {
    PhaseTiming::new(params, rho, t_tx_fl).success_prob(protocol, lambda_total)
}

pub fn throughput(
    protocol: Protocol,
    params: &SystemParams,
    lambda_total: f64,
    rho: BandwidthShare,
    t_tx_fl: f64,
) -> f64 {
    PhaseTiming::new(params, rho, t_tx_fl).throughput(protocol, lambda_total)
}

pub fn energy_per_packet(
    protocol: Protocol,
    params: &SystemParams,
    lambda_total: f64,
    rho: BandwidthShare,
    t_tx_fl: f64,
) -> f64 {
    PhaseTiming::new(params, rho, t_tx_fl).energy_per_packet(protocol, params, lambda_total)
}

pub fn max_throughput(
    protocol: Protocol,
    params: &SystemParams,
    rho: BandwidthShare,
    t_tx_fl: f64,
) -> ThroughputPeak {
    PhaseTiming::new(params, rho, t_tx_fl).max_throughput(protocol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::fl_tx_time;
    use crate::model::Showcase;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn share(x: f64) -> BandwidthShare {
        BandwidthShare::new(x).unwrap()
    }

    #[test]
    fn packet_time_full_band() {
        let p = SystemParams::table_one();
        let t = ra_packet_time(&p, p.bandwidth);
        let expected = 1.5e3 / (6e7 * (1.0 + 0.04 / 6e-10_f64).log2());
        assert!((t - expected).abs() / expected < 1e-12);
        assert!((t - 9.62e-7).abs() < 1e-9);
        let t = ra_packet_time(&p, 0.04 * p.bandwidth);
        assert!((t - 2.04e-5).abs() < 5e-8, "{t}");
        assert_eq!(ra_packet_time(&p, 0.0), f64::INFINITY);
        let mut empty = p;
        empty.s_ra = 0.0;
        assert_eq!(ra_packet_time(&empty, 1e6), 0.0);
    }

    #[test]
    fn average_time_c1_slotted() {
        let c1 = Showcase::C1.params();
        let t = ra_packet_time_avg(&c1, share(0.53), 0.38);
        assert!((t - 0.97e-6).abs() < 5e-9, "{t}");
    }

    #[test]
    fn average_time_degenerate_phases() {
        let p = Showcase::C1.params();
        let full = ra_packet_time(&p, p.bandwidth);
        assert_eq!(ra_packet_time_avg(&p, share(0.4), 0.0), full);
        assert!((ra_packet_time_avg(&p, BandwidthShare::ZERO, 3.0) - full).abs() < 1e-20);
        assert_eq!(
            ra_packet_time_avg(&p, BandwidthShare::FULL, 0.1),
            f64::INFINITY
        );
        assert_eq!(ra_packet_time_avg(&p, BandwidthShare::FULL, 0.0), full);
    }

    #[test]
    fn success_c1() {
        let c1 = Showcase::C1.params();
        let rho = share(0.96);
        let t_tx = fl_tx_time(&c1, rho);
        let ps = success_prob(Protocol::Aloha, &c1, 4.06e5, rho, t_tx);
        assert!((ps - 0.456).abs() < 2e-3, "{ps}");

        let rho = share(0.53);
        let t_tx = fl_tx_time(&c1, rho);
        let ps = success_prob(Protocol::SlottedAloha, &c1, 4.02e5, rho, t_tx);
        assert!((ps - 0.454).abs() < 3e-3, "{ps}");
    }

    #[test]
    fn zero_load() {
        let c1 = Showcase::C1.params();
        for protocol in Protocol::ALL {
            for rho in [0.0, 0.5, 1.0] {
                assert_eq!(success_prob(protocol, &c1, 0.0, share(rho), 0.3), 1.0);
                assert_eq!(throughput(protocol, &c1, 0.0, share(rho), 0.3), 0.0);
            }
        }
        let e = energy_per_packet(Protocol::Aloha, &c1, 0.0, share(0.5), 0.3);
        assert_eq!(e, c1.p_tx_ra * ra_packet_time_avg(&c1, share(0.5), 0.3));
    }

    #[test]
    fn throughput_c1_meets_target() {
        let c1 = Showcase::C1.params();
        let rho = share(0.96);
        let q = throughput(Protocol::Aloha, &c1, 4.06e5, rho, fl_tx_time(&c1, rho));
        assert!((q - 0.178).abs() < 1e-3, "{q}");
        let rho = share(0.53);
        let q = throughput(
            Protocol::SlottedAloha,
            &c1,
            4.02e5,
            rho,
            fl_tx_time(&c1, rho),
        );
        assert!((q - 0.178).abs() < 1e-3, "{q}");
    }

    #[test]
    fn energy_c1_aloha() {
        let c1 = Showcase::C1.params();
        let rho = share(0.96);
        let e = energy_per_packet(Protocol::Aloha, &c1, 4.06e5, rho, fl_tx_time(&c1, rho));
        assert!((e - 9.2e-7).abs() < 0.1e-7, "{e}");
        let total = e * c1.fresh_packets_per_round();
        assert!((total - 0.42).abs() < 0.01, "{total}");
    }

    #[test]
    fn full_share_limits() {
        let c1 = Showcase::C1.params();
        let sa = evaluate(Protocol::SlottedAloha, &c1, 1e5, BandwidthShare::FULL, 0.2);
        assert_eq!(sa.p_success, 0.0);
        assert_eq!(sa.throughput, 0.0);
        assert_eq!(sa.energy_per_packet, f64::INFINITY);

        let a = evaluate(Protocol::Aloha, &c1, 1e5, BandwidthShare::FULL, 0.2);
        let w_full = 1.0 - 0.2 / c1.t_round;
        let t = ra_packet_time(&c1, c1.bandwidth);
        assert!((a.p_success - w_full * (-2e5 * t).exp()).abs() < 1e-15);
        assert!(a.throughput.is_finite() && a.throughput > 0.0);
        assert_eq!(a.energy_per_packet, f64::INFINITY);
    }

    #[test]
    fn textbook_peaks_without_carve_out() {
        let p = SystemParams::table_one();
        let t = ra_packet_time(&p, p.bandwidth);

        let sa = max_throughput(Protocol::SlottedAloha, &p, BandwidthShare::ZERO, 0.0);
        assert!((sa.q_max - 1.0 / E).abs() < 1e-9);
        assert!((sa.lambda_peak * t - 1.0).abs() < 1e-4);

        let a = max_throughput(Protocol::Aloha, &p, BandwidthShare::ZERO, 0.0);
        assert!((a.q_max - 0.5 / E).abs() < 1e-9);
        assert!((a.lambda_peak * t - 0.5).abs() < 1e-4);

        // no FL upload at all: the ALOHA curve does not depend on rho
        let a2 = max_throughput(Protocol::Aloha, &p, share(0.7), 0.0);
        assert!((a2.q_max - 0.5 / E).abs() < 1e-9);
    }

    #[test]
    fn aloha_peak_has_interior_minimum_in_share() {
        let p = SystemParams::table_one();
        let q = |rho: f64| {
            let rho = share(rho);
            max_throughput(Protocol::Aloha, &p, rho, fl_tx_time(&p, rho)).q_max
        };
        let (rho_at_min, _) = (70..=99).map(|i| i as f64 / 100.0).map(|r| (r, q(r))).fold(
            (0.0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
        assert!((rho_at_min - 0.82).abs() <= 0.05, "{rho_at_min}");
        assert!(q(0.99) > q(rho_at_min));
        assert!(q(0.7) > q(rho_at_min));
    }

    proptest! {
        #[test]
        fn point_invariants(
            rho in 0.0f64..0.999,
            lambda in 0.0f64..2e6,
            t_tx in 0.0f64..20.0,
            slotted in any::<bool>(),
        ) {
            let protocol = if slotted { Protocol::SlottedAloha } else { Protocol::Aloha };
            let p = SystemParams::table_one();
            let pt = evaluate(protocol, &p, lambda, share(rho), t_tx);
            prop_assert!(pt.t_pkt_full <= pt.t_pkt_avg * (1.0 + 1e-12));
            prop_assert!(pt.t_pkt_avg <= pt.t_pkt_shared * (1.0 + 1e-12));
            prop_assert!((0.0..=1.0).contains(&pt.p_success));
            prop_assert!(pt.throughput >= 0.0);
            prop_assert!(pt.throughput <= lambda * pt.t_pkt_avg * (1.0 + 1e-12));
        }

        #[test]
        fn success_strictly_decreasing_in_load(
            rho in 0.0f64..0.99,
            lambda in 1.0f64..1e6,
            t_tx in 0.0f64..20.0,
            slotted in any::<bool>(),
        ) {
            let protocol = if slotted { Protocol::SlottedAloha } else { Protocol::Aloha };
            let p = SystemParams::table_one();
            let a = success_prob(protocol, &p, lambda, share(rho), t_tx);
            let b = success_prob(protocol, &p, lambda * 1.01, share(rho), t_tx);
            prop_assert!(b < a);
        }

        #[test]
        fn larger_share_never_helps_slotted(
            r1 in 0.0f64..0.99,
            r2 in 0.0f64..0.99,
            lambda in 1.0f64..1e6,
        ) {
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let p = SystemParams::table_one();
            let t_lo = PhaseTiming::new(&p, share(lo), 1.0);
            let t_hi = PhaseTiming::new(&p, share(hi), 1.0);
            prop_assert!(t_hi.t_pkt_shared >= t_lo.t_pkt_shared);
            prop_assert!(
                t_hi.success_prob(Protocol::SlottedAloha, lambda)
                    <= t_lo.success_prob(Protocol::SlottedAloha, lambda)
            );
        }

        #[test]
        fn slotted_peak_matches_closed_form(rho in 0.0f64..0.99, t_tx in 0.0f64..20.0) {
            let p = SystemParams::table_one();
            let timing = PhaseTiming::new(&p, share(rho), t_tx);
            let peak = timing.max_throughput(Protocol::SlottedAloha);
            let closed = timing.t_pkt_avg() / timing.t_pkt_shared / E;
            prop_assert!((peak.q_max - closed).abs() <= 1e-6 * closed);
        }

        #[test]
        fn aloha_peak_near_pure_limit(rho in 0.0f64..0.99, t_tx in 0.0f64..0.2) {
            // the mixed curve can exceed 1/(2e) only by an amount that vanishes
            // with the upload fraction
            let p = SystemParams::table_one();
            let timing = PhaseTiming::new(&p, share(rho), t_tx);
            let peak = timing.max_throughput(Protocol::Aloha);
            prop_assert!(peak.q_max <= 0.5 / E + timing.w_shared * 0.5 / E + 1e-12);
            prop_assert!(peak.q_max >= timing.w_full * 0.5 / E - 1e-12);
        }
    }
}
