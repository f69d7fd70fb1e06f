//! Shared domain types and the Shannon-rate primitive.
//!
//! Every quantity is kept in SI base units: bits, seconds, hertz, watts and
//! joules. Conversions from MHz / Mbit happen only where presets are authored.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while validating a [`SystemParams`] or a [`BandwidthShare`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("`{field}` must be strictly positive and finite (got {value})")]
    NotPositive { field: &'static str, value: f64 },
    #[error("`q_min` must lie in [0, 1) (got {0})")]
    ThroughputOutOfRange(f64),
    #[error("channel gain {index} of `gains_fl` must lie in (0, 1] (got {value})")]
    FlGainOutOfRange { index: usize, value: f64 },
    #[error("`gain_ra` must lie in (0, 1] (got {0})")]
    RaGainOutOfRange(f64),
    #[error("`gains_fl` must not be empty")]
    NoFlDevices,
    #[error("`n_fl` is {n_fl} but `gains_fl` has {gains} entries")]
    DeviceCountMismatch { n_fl: usize, gains: usize },
    #[error("`t_cpu` ({t_cpu} s) must be shorter than `t_round` ({t_round} s)")]
    NoUploadBudget { t_cpu: f64, t_round: f64 },
    #[error("bandwidth share must lie in [0, 1] (got {0})")]
    ShareOutOfRange(f64),
}

/// Random-access protocol used by the throughput-oriented devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "aloha")]
    Aloha,
    #[serde(rename = "saloha")]
    SlottedAloha,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Aloha, Protocol::SlottedAloha];

    /// Short tag used in tables (`A` / `SA`).
    pub fn tag(self) -> &'static str {
        match self {
            Protocol::Aloha => "A",
            Protocol::SlottedAloha => "SA",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Aloha => "aloha",
            Protocol::SlottedAloha => "saloha",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aloha" | "a" => Ok(Protocol::Aloha),
            "saloha" | "s-aloha" | "slotted-aloha" | "sa" => Ok(Protocol::SlottedAloha),
            other => Err(format!(
                "unknown protocol `{other}` (expected aloha or saloha)"
            )),
        }
    }
}

/// Fraction of the band reserved for FL uploads while they are in progress.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BandwidthShare(f64);

impl BandwidthShare {
    pub const ZERO: BandwidthShare = BandwidthShare(0.0);
    pub const FULL: BandwidthShare = BandwidthShare(1.0);

    pub fn new(rho: f64) -> Result<Self, ParamError> {
        if (0.0..=1.0).contains(&rho) {
            Ok(BandwidthShare(rho))
        } else {
            Err(ParamError::ShareOutOfRange(rho))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to zero.
    pub fn saturating(rho: f64) -> Self {
        if rho.is_nan() {
            BandwidthShare(0.0)
        } else {
            BandwidthShare(rho.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Share left to random access while FL devices upload, `1 - rho`.
    #[inline]
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for BandwidthShare {
    type Error = ParamError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        BandwidthShare::new(value)
    }
}

impl From<BandwidthShare> for f64 {
    fn from(value: BandwidthShare) -> Self {
        value.0
    }
}

impl fmt::Display for BandwidthShare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Physical and protocol constants of one scenario.
///
/// Fields are public so that sweeps can derive variants cheaply; call
/// [`SystemParams::validate`] after editing by hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of FL devices, always equal to `gains_fl.len()`.
    pub n_fl: usize,
    /// Fresh random-access arrival rate (packets/s).
    pub lambda_fresh: f64,
    /// FL local computation time per round (s).
    pub t_cpu: f64,
    /// FL round duration (s).
    pub t_round: f64,
    /// Minimum normalized random-access throughput.
    pub q_min: f64,
    /// Minimum retransmission rate (packets/s).
    pub eps_retx: f64,
    /// Total uplink bandwidth (Hz).
    pub bandwidth: f64,
    /// FL model size (bits).
    pub s_fl: f64,
    /// Random-access packet size (bits).
    pub s_ra: f64,
    /// Channel gain of every FL device.
    pub gains_fl: Vec<f64>,
    /// Average channel gain of random-access devices.
    pub gain_ra: f64,
    /// FL transmit power (W).
    pub p_tx_fl: f64,
    /// Random-access transmit power (W).
    pub p_tx_ra: f64,
    /// Noise power spectral density (W/Hz).
    pub n0: f64,
}

impl SystemParams {
    /// The default parameter set: 30 FL devices, 60 MHz, 100 Mbit model,
    /// 1.5 kbit packets, 60 s rounds with 38 s of computation.
    pub fn table_one() -> Self {
        SystemParams {
            n_fl: 30,
            lambda_fresh: 1e4,
            t_cpu: 38.0,
            t_round: 60.0,
            q_min: 0.178,
            eps_retx: 1e2,
            bandwidth: 60e6,
            s_fl: 100e6,
            s_ra: 1.5e3,
            gains_fl: vec![0.1; 30],
            gain_ra: 0.1,
            p_tx_fl: 0.4,
            p_tx_ra: 0.4,
            n0: 1e-17,
        }
    }

    /// Returns a copy with `n` FL devices. Gains are extended by cycling
    /// the existing list, so homogeneous populations stay homogeneous.
    pub fn with_fl_devices(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.gains_fl = self.gains_fl.iter().copied().cycle().take(n).collect();
        out.n_fl = out.gains_fl.len();
        out
    }

    pub fn with_lambda_fresh(&self, lambda_fresh: f64) -> Self {
        SystemParams {
            lambda_fresh,
            ..self.clone()
        }
    }

    pub fn with_q_min(&self, q_min: f64) -> Self {
        SystemParams {
            q_min,
            ..self.clone()
        }
    }

    /// Smallest FL channel gain, the one that sets the upload deadline.
    /// `None` when there are no FL devices.
    pub fn min_fl_gain(&self) -> Option<f64> {
        self.gains_fl.iter().copied().reduce(f64::min)
    }

    /// Time available for the FL upload once computation is done.
    pub fn upload_budget(&self) -> f64 {
        self.t_round - self.t_cpu
    }

    /// Fresh random-access packets generated during one FL round.
    pub fn fresh_packets_per_round(&self) -> f64 {
        self.lambda_fresh * self.t_round
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("lambda_fresh", self.lambda_fresh),
            ("t_cpu", self.t_cpu),
            ("t_round", self.t_round),
            ("eps_retx", self.eps_retx),
            ("bandwidth", self.bandwidth),
            ("s_fl", self.s_fl),
            ("s_ra", self.s_ra),
            ("p_tx_fl", self.p_tx_fl),
            ("p_tx_ra", self.p_tx_ra),
            ("n0", self.n0),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParamError::NotPositive { field, value });
            }
        }
        if !(0.0..1.0).contains(&self.q_min) {
            return Err(ParamError::ThroughputOutOfRange(self.q_min));
        }
        if self.gains_fl.is_empty() {
            return Err(ParamError::NoFlDevices);
        }
        if self.n_fl != self.gains_fl.len() {
            return Err(ParamError::DeviceCountMismatch {
                n_fl: self.n_fl,
                gains: self.gains_fl.len(),
            });
        }
        for (index, &value) in self.gains_fl.iter().enumerate() {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ParamError::FlGainOutOfRange { index, value });
            }
        }
        if !(self.gain_ra > 0.0 && self.gain_ra <= 1.0) {
            return Err(ParamError::RaGainOutOfRange(self.gain_ra));
        }
        if self.t_cpu >= self.t_round {
            return Err(ParamError::NoUploadBudget {
                t_cpu: self.t_cpu,
                t_round: self.t_round,
            });
        }
        Ok(())
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams::table_one()
    }
}

/// The five showcase configurations. They share the default radio
/// parameters and use the 36.72 Mbit CNN model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Showcase {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl Showcase {
    pub const ALL: [Showcase; 5] = [
        Showcase::C1,
        Showcase::C2,
        Showcase::C3,
        Showcase::C4,
        Showcase::C5,
    ];

    /// Model size used by every showcase configuration (bits).
    pub const MODEL_BITS: f64 = 36.72e6;

    pub fn name(self) -> &'static str {
        match self {
            Showcase::C1 => "C1",
            Showcase::C2 => "C2",
            Showcase::C3 => "C3",
            Showcase::C4 => "C4",
            Showcase::C5 => "C5",
        }
    }

    pub fn params(self) -> SystemParams {
        let (n, t_round, lambda_fresh) = match self {
            Showcase::C1 => (10, 45.0, 1e4),
            Showcase::C2 => (10, 45.0, 1e5),
            Showcase::C3 => (30, 40.0, 1e5),
            Showcase::C4 => (30, 60.0, 1e5),
            Showcase::C5 => (30, 120.0, 5e5),
        };
        SystemParams {
            t_round,
            lambda_fresh,
            s_fl: Self::MODEL_BITS,
            ..SystemParams::table_one().with_fl_devices(n)
        }
    }
}

/// Shannon capacity `b * log2(1 + gain * power / (b * n0))` in bit/s.
///
/// Zero bandwidth yields zero rate, the continuous limit as `b -> 0`.
pub fn shannon_rate(b: f64, gain: f64, power: f64, n0: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    let snr = gain * power / (b * n0);
    b * snr.ln_1p() / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shannon_rate_full_band() {
        let r = shannon_rate(6e7, 0.1, 0.4, 1e-17);
        // 6e7 * log2(1 + 0.04 / 6e-10)
        let expected = 6e7 * (1.0 + 0.04 / 6e-10_f64).log2();
        assert!((r - expected).abs() / expected < 1e-12);
        assert!((r - 1.5597e9).abs() / 1.5597e9 < 5e-4);
    }

    #[test]
    fn shannon_rate_edges() {
        assert_eq!(shannon_rate(0.0, 0.1, 0.4, 1e-17), 0.0);
        assert!((shannon_rate(1.0, 0.5, 2.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn presets_validate() {
        SystemParams::table_one().validate().unwrap();
        for c in Showcase::ALL {
            let p = c.params();
            p.validate().unwrap();
            assert_eq!(p.s_fl, 36.72e6);
            assert_eq!(p.t_cpu, 38.0);
        }
        assert_eq!(Showcase::C5.params().n_fl, 30);
        assert_eq!(Showcase::C1.params().gains_fl, vec![0.1; 10]);
    }

    #[test]
    fn validation_errors() {
        let base = SystemParams::table_one();
        let mut p = base.clone();
        p.q_min = 1.0;
        assert_eq!(p.validate(), Err(ParamError::ThroughputOutOfRange(1.0)));

        let mut p = base.clone();
        p.t_cpu = 60.0;
        assert!(matches!(
            p.validate(),
            Err(ParamError::NoUploadBudget { .. })
        ));

        let mut p = base.clone();
        p.n_fl = 3;
        assert!(matches!(
            p.validate(),
            Err(ParamError::DeviceCountMismatch { .. })
        ));

        let mut p = base.clone();
        p.gains_fl[4] = 1.5;
        assert_eq!(
            p.validate(),
            Err(ParamError::FlGainOutOfRange {
                index: 4,
                value: 1.5
            })
        );

        let mut p = base.with_fl_devices(0);
        p.n_fl = 0;
        assert_eq!(p.validate(), Err(ParamError::NoFlDevices));

        let mut p = base;
        p.bandwidth = f64::NAN;
        assert!(matches!(
            p.validate(),
            Err(ParamError::NotPositive {
                field: "bandwidth",
                ..
            })
        ));
    }

    #[test]
    fn with_fl_devices_cycles_gains() {
        let mut p = SystemParams::table_one().with_fl_devices(2);
        p.gains_fl = vec![0.1, 0.2];
        let q = p.with_fl_devices(5);
        assert_eq!(q.gains_fl, vec![0.1, 0.2, 0.1, 0.2, 0.1]);
        assert_eq!(q.n_fl, 5);
    }

    #[test]
    fn share_bounds() {
        assert!(BandwidthShare::new(-0.01).is_err());
        assert!(BandwidthShare::new(1.01).is_err());
        assert_eq!(BandwidthShare::new(0.3).unwrap().complement(), 0.7);
        assert_eq!(BandwidthShare::saturating(4.0), BandwidthShare::FULL);
        assert_eq!(BandwidthShare::saturating(f64::NAN), BandwidthShare::ZERO);
    }

    #[test]
    fn protocol_parse() {
        assert_eq!("ALOHA".parse::<Protocol>(), Ok(Protocol::Aloha));
        assert_eq!("saloha".parse::<Protocol>(), Ok(Protocol::SlottedAloha));
        assert!("csma".parse::<Protocol>().is_err());
    }

    proptest! {
        #[test]
        fn rate_increasing_and_concave_in_bandwidth(
            b in 1e2f64..1e9,
            gain in 1e-3f64..1.0,
            power in 1e-3f64..2.0,
        ) {
            let n0 = 1e-17;
            let h = b * 1e-3;
            let lo = shannon_rate(b - h, gain, power, n0);
            let mid = shannon_rate(b, gain, power, n0);
            let hi = shannon_rate(b + h, gain, power, n0);
            prop_assert!(lo < mid && mid < hi);
            // second difference, scaled to stay above rounding noise
            prop_assert!(hi - 2.0 * mid + lo <= 1e-9 * mid);
        }

        #[test]
        fn rate_below_unit_bandwidth_bound(
            b in 1.0001f64..1e8,
            gain in 1e-3f64..1.0,
            power in 1e-3f64..2.0,
        ) {
            let n0 = 1e-12;
            prop_assert!(shannon_rate(b, gain, power, n0) < b * (1.0 + gain * power / n0).log2());
        }
    }
}
