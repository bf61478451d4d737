//! End-to-end parameter transmission schemes behind one interface.
//!
//! * [`SchemeKind::Hybrid`]: entropy-coded, convolutionally coded BPSK on I
//!   plus the MMSE-recovered quantization residual on Q.
//! * [`SchemeKind::Digital`]: the same digital chain alone at full power, on
//!   BPSK or 4-QAM.
//! * [`SchemeKind::Analog`]: every parameter scaled directly onto a symbol.
//! * [`SchemeKind::Lossless`]: no channel at all; returns its input.
//!
//! Hybrid and digital transmissions fail as a whole when the received
//! container does not verify; the caller must then skip the update.

use std::fmt;

use thiserror::Error;

use crate::channel_code::{conv_encode, viterbi_decode, ConvCodeSpec};
use crate::codec::{
    container, dequantize, entropy_decode, entropy_encode, quantize, residual,
    select_step_size, Bitstream, DecodeFailure, ResidualVector,
};
use crate::error::{invalid, Result};
use crate::model::ParameterVector;
use crate::phy::{
    awgn_channel, compute_llr, db_to_linear, mmse_denoise, modulate_analog, modulate_hybrid,
    plan_power, qam_llr, qam_modulate, ChannelConfig, Modulation, PowerPlan,
};
use crate::scalar::{lit, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Hybrid,
    Digital,
    Analog,
    Lossless,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Hybrid => "hybrid",
            SchemeKind::Digital => "digital",
            SchemeKind::Analog => "analog",
            SchemeKind::Lossless => "lossless",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hybrid" => Some(SchemeKind::Hybrid),
            "digital" => Some(SchemeKind::Digital),
            "analog" => Some(SchemeKind::Analog),
            "lossless" => Some(SchemeKind::Lossless),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Channel symbols available per parameter exchange.
    pub symbol_budget: usize,
    /// Constellation of the digital-only baseline.
    pub modulation: Modulation,
    /// Total mean symbol power `P_t`; the channel SNR is referenced to it.
    pub total_power: f64,
    /// Nominal average noise power `N_0` used by the fixed power plan.
    pub noise_power: f64,
    /// Required SNR of the digital stream, in dB.
    pub gamma_0_db: f64,
    /// Recompute `N_0` from the actual channel for every transmission
    /// instead of using `noise_power`.
    pub track_channel: bool,
    pub code: ConvCodeSpec,
    /// Analog baseline packs two parameters per symbol (I and Q).
    pub analog_pack_iq: bool,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, symbol_budget: usize) -> Self {
        Self {
            kind,
            symbol_budget,
            modulation: Modulation::Qam4,
            total_power: 1.0,
            noise_power: 0.1,
            gamma_0_db: 5.0,
            track_channel: false,
            code: ConvCodeSpec::default(),
            analog_pack_iq: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.symbol_budget == 0 {
            return Err(invalid("symbol_budget", "must be positive"));
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return Err(invalid("total_power", "must be finite and positive"));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(invalid("noise_power", "must be finite and positive"));
        }
        if !self.gamma_0_db.is_finite() {
            return Err(invalid("gamma_0_db", "must be finite"));
        }
        Ok(())
    }

    /// Power plan for a transmission over `channel`.
    pub fn power_plan<T: Scalar>(&self, channel: &ChannelConfig) -> Result<PowerPlan<T>> {
        let n_0 = if self.track_channel && !channel.is_noiseless() {
            channel.with_reference_power(self.total_power).noise_power()
        } else {
            self.noise_power
        };
        plan_power(
            lit(self.total_power),
            lit(n_0),
            lit(db_to_linear(self.gamma_0_db)),
        )
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("transmission failed: {cause}")]
pub struct TransmissionFailure {
    pub cause: DecodeFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionReport {
    pub scheme: SchemeKind,
    pub success: bool,
    pub symbols_used: usize,
    pub n_digital: usize,
    pub n_analog: usize,
    /// Step size of the digital stream, if one was sent.
    pub delta: Option<f32>,
    /// Set when the transmission needed more symbols than budgeted.
    pub budget_miss: bool,
    /// Mean squared reconstruction error; `None` on failure.
    pub mse: Option<f64>,
    pub failure: Option<TransmissionFailure>,
}

impl TransmissionReport {
    /// A successful report with nothing sent yet.
    pub fn new(scheme: SchemeKind) -> Self {
        Self {
            scheme,
            success: true,
            symbols_used: 0,
            n_digital: 0,
            n_analog: 0,
            delta: None,
            budget_miss: false,
            mse: None,
            failure: None,
        }
    }
}

/// Either the full reconstructed vector or an explicit failure, never a
/// partial vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Transmission<T> {
    pub outcome: std::result::Result<ParameterVector<T>, TransmissionFailure>,
    pub report: TransmissionReport,
}

impl<T: Scalar> Transmission<T> {
    fn finish(
        v: &ParameterVector<T>,
        outcome: std::result::Result<ParameterVector<T>, TransmissionFailure>,
        mut report: TransmissionReport,
    ) -> Result<Self> {
        match &outcome {
            Ok(out) => {
                report.success = true;
                report.mse = Some(out.mse(v)?);
            }
            Err(f) => {
                report.success = false;
                report.failure = Some(*f);
            }
        }
        Ok(Self { outcome, report })
    }
}

/// Sends `v` with the scheme selected by `cfg.kind`.
pub fn transmit<T: Scalar>(
    v: &ParameterVector<T>,
    cfg: &SchemeConfig,
    channel: &ChannelConfig,
) -> Result<Transmission<T>> {
    match cfg.kind {
        SchemeKind::Hybrid => hybrid_transmit(v, cfg, channel),
        SchemeKind::Digital => digital_transmit(v, cfg, channel),
        SchemeKind::Analog => analog_transmit(v, cfg, channel),
        SchemeKind::Lossless => {
            let mut report = TransmissionReport::new(SchemeKind::Lossless);
            report.mse = Some(0.0);
            Ok(Transmission {
                outcome: Ok(v.clone()),
                report,
            })
        }
    }
}

fn expect_kind(cfg: &SchemeConfig, kind: SchemeKind) -> Result<()> {
    cfg.validate()?;
    if cfg.kind != kind {
        return Err(invalid(
            "kind",
            format!("expected a {kind} configuration, got {}", cfg.kind),
        ));
    }
    Ok(())
}

/// Digital sender state: the container, its coded bits, and the baseline the
/// receiver will reconstruct from it.
struct DigitalStream<T> {
    coded: Vec<u8>,
    baseline: ParameterVector<T>,
    delta: f32,
    budget_miss: bool,
}

fn encode_digital<T: Scalar>(
    v: &ParameterVector<T>,
    coded_capacity: usize,
    code: &ConvCodeSpec,
) -> Result<DigitalStream<T>> {
    let info_bits = code.max_info_len(coded_capacity);
    let bit_budget = info_bits.max(container::OVERHEAD_BITS + 1);
    let sel = select_step_size(v, bit_budget)?;
    let stream = entropy_encode(&quantize(v, sel.delta)?);
    // The sender decodes its own stream so its baseline is exactly the
    // receiver's.
    let decoded = entropy_decode(&stream).expect("freshly encoded stream decodes");
    let baseline = v.with_values(dequantize::<T>(&decoded).into_values())?;
    let coded = conv_encode(code, &stream.to_bits());
    Ok(DigitalStream {
        budget_miss: sel.budget_miss || coded.len() > coded_capacity,
        coded,
        baseline,
        delta: sel.delta,
    })
}

fn decode_digital<T: Scalar>(
    llrs: &[T],
    code: &ConvCodeSpec,
    template: &ParameterVector<T>,
) -> Result<std::result::Result<ParameterVector<T>, TransmissionFailure>> {
    let bits = viterbi_decode(code, llrs)?;
    let payload = match entropy_decode(&Bitstream::from_bits(&bits)) {
        Ok(p) => p,
        Err(cause) => return Ok(Err(TransmissionFailure { cause })),
    };
    if payload.count() != template.len() {
        return Ok(Err(TransmissionFailure {
            cause: DecodeFailure::CountMismatch,
        }));
    }
    Ok(Ok(template.with_values(dequantize::<T>(&payload).into_values())?))
}

/// Hybrid digital-analog transmission.
///
/// Sender: pick the finest step whose container fits the coded capacity of
/// the budget (one coded bit per I slot), encode, convolutionally code,
/// BPSK on I; the residual against the sender-decoded baseline goes on Q,
/// normalized to `P_a`. When the plan leaves no digital power the digital
/// stage is skipped and the whole vector is the residual.
///
/// Receiver: LLR, Viterbi, checksum, entropy decode for the baseline; MMSE
/// for the residual; output their sum.
pub fn hybrid_transmit<T: Scalar>(
    v: &ParameterVector<T>,
    cfg: &SchemeConfig,
    channel: &ChannelConfig,
) -> Result<Transmission<T>> {
    expect_kind(cfg, SchemeKind::Hybrid)?;
    let channel = channel.with_reference_power(cfg.total_power);
    let plan: PowerPlan<T> = cfg.power_plan(&channel)?;
    let mut report = TransmissionReport::new(SchemeKind::Hybrid);

    let (coded, baseline) = if plan.p_d > T::zero() {
        let digital = encode_digital(v, cfg.symbol_budget, &cfg.code)?;
        report.delta = Some(digital.delta);
        report.budget_miss = digital.budget_miss;
        (digital.coded, digital.baseline)
    } else {
        (Vec::new(), ParameterVector::zeros(v.manifest().clone()))
    };
    let r = residual(v, &baseline)?;
    let frame = modulate_hybrid(&coded, &r, &plan)?;
    report.n_digital = frame.n_digital;
    report.n_analog = frame.n_analog;
    report.symbols_used = frame.len();
    report.budget_miss |= frame.len() > cfg.symbol_budget;

    let rx = awgn_channel(&frame.symbols, &channel)?;

    let baseline_rx = if frame.n_digital > 0 {
        let i: Vec<T> = rx.symbols[..frame.n_digital].iter().map(|y| y.re).collect();
        let llrs = compute_llr(&i, plan.p_d, rx.sigma2)?;
        match decode_digital(&llrs, &cfg.code, v)? {
            Ok(b) => b,
            Err(f) => return Transmission::finish(v, Err(f), report),
        }
    } else {
        ParameterVector::zeros(v.manifest().clone())
    };
    let r_hat = if frame.n_analog > 0 {
        let q: Vec<T> = rx.symbols[..frame.n_analog].iter().map(|y| y.im).collect();
        mmse_denoise(&q, frame.m, rx.sigma2)
    } else {
        ResidualVector::from_values(vec![T::zero(); v.len()])
    };
    let out = baseline_rx.with_values(
        baseline_rx
            .values()
            .iter()
            .zip(r_hat.values())
            .map(|(&b, &r)| b + r)
            .collect(),
    )?;
    Transmission::finish(v, Ok(out), report)
}

/// Digital-only transmission at full power `P_t` on BPSK or 4-QAM.
pub fn digital_transmit<T: Scalar>(
    v: &ParameterVector<T>,
    cfg: &SchemeConfig,
    channel: &ChannelConfig,
) -> Result<Transmission<T>> {
    expect_kind(cfg, SchemeKind::Digital)?;
    let channel = channel.with_reference_power(cfg.total_power);
    let bps = cfg.modulation.bits_per_symbol();
    let digital = encode_digital(v, cfg.symbol_budget * bps, &cfg.code)?;
    let p_t: T = lit(cfg.total_power);
    let symbols = qam_modulate(&digital.coded, cfg.modulation, p_t);

    let mut report = TransmissionReport::new(SchemeKind::Digital);
    report.delta = Some(digital.delta);
    report.n_digital = symbols.len();
    report.symbols_used = symbols.len();
    report.budget_miss = digital.budget_miss || symbols.len() > cfg.symbol_budget;

    let rx = awgn_channel(&symbols, &channel)?;
    let llrs = qam_llr(&rx.symbols, cfg.modulation, p_t, rx.sigma2, digital.coded.len());
    let outcome = decode_digital(&llrs, &cfg.code, v)?;
    Transmission::finish(v, outcome, report)
}

/// Analog-only transmission: the whole vector scaled to mean power `P_t`,
/// one value per I component (or two per symbol when packing I and Q),
/// recovered by MMSE. Never fails.
pub fn analog_transmit<T: Scalar>(
    v: &ParameterVector<T>,
    cfg: &SchemeConfig,
    channel: &ChannelConfig,
) -> Result<Transmission<T>> {
    expect_kind(cfg, SchemeKind::Analog)?;
    let channel = channel.with_reference_power(cfg.total_power);
    let frame = modulate_analog(v.values(), lit(cfg.total_power), cfg.analog_pack_iq)?;
    let mut report = TransmissionReport::new(SchemeKind::Analog);
    report.n_analog = frame.n_analog;
    report.symbols_used = frame.len();
    report.budget_miss = frame.len() > cfg.symbol_budget;

    let rx = awgn_channel(&frame.symbols, &channel)?;
    let received: Vec<T> = if cfg.analog_pack_iq {
        rx.symbols
            .iter()
            .flat_map(|y| [y.re, y.im])
            .take(v.len())
            .collect()
    } else {
        rx.symbols.iter().map(|y| y.re).collect()
    };
    let r_hat = mmse_denoise(&received, frame.m, rx.sigma2);
    let out = v.with_values(r_hat.into_values())?;
    Transmission::finish(v, Ok(out), report)
}

/// Bits available to the entropy coder for a budget of `symbols` channel
/// symbols carrying `bits_per_symbol` coded bits each.
pub fn info_bit_budget(symbols: usize, bits_per_symbol: usize, code: &ConvCodeSpec) -> usize {
    code.max_info_len(symbols * bits_per_symbol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_v(m: usize, seed: u64) -> ParameterVector<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParameterVector::from_flat((0..m).map(|_| f32::standard_normal(&mut rng) * 0.05).collect())
    }

    fn rel_err(a: &ParameterVector<f32>, b: &ParameterVector<f32>) -> f64 {
        a.mse(b).unwrap().sqrt() / (b.power_sum().to_f64_lossy() / b.len() as f64).sqrt()
    }

    #[test]
    fn hybrid_noiseless_is_exact() {
        let v = random_v(1000, 1);
        let cfg = SchemeConfig::new(SchemeKind::Hybrid, 2000);
        let t = hybrid_transmit(&v, &cfg, &ChannelConfig::noiseless()).unwrap();
        let out = t.outcome.unwrap();
        assert!(rel_err(&out, &v) < 1e-6);
        assert_eq!(out.manifest(), v.manifest());
        assert!(t.report.n_digital > 0 && t.report.n_analog == 1000);
        assert_eq!(t.report.symbols_used, t.report.n_digital.max(1000));
    }

    #[test]
    fn hybrid_beats_digital_at_20_db() {
        let v = random_v(1000, 2);
        let budget = 2000;
        let mut h_mse = 0.0;
        let mut d_mse = 0.0;
        for seed in 0..5 {
            let ch = ChannelConfig::new(20.0, seed);
            let h = hybrid_transmit(&v, &SchemeConfig::new(SchemeKind::Hybrid, budget), &ch).unwrap();
            let d = digital_transmit(&v, &SchemeConfig::new(SchemeKind::Digital, budget), &ch).unwrap();
            h_mse += h.report.mse.expect("hybrid decodes at 20 dB");
            d_mse += d.report.mse.expect("digital decodes at 20 dB");
        }
        assert!(h_mse < d_mse, "hybrid {h_mse} vs digital {d_mse}");
    }

    #[test]
    fn hybrid_fails_below_threshold() {
        let v = random_v(500, 3);
        let cfg = SchemeConfig::new(SchemeKind::Hybrid, 1000);
        let failures = (0..100)
            .filter(|&s| {
                let t = hybrid_transmit(&v, &cfg, &ChannelConfig::new(0.0, s)).unwrap();
                t.outcome.is_err()
            })
            .count();
        assert!(failures > 50, "{failures} failures");
    }

    #[test]
    fn failed_transmission_has_no_output() {
        let v = random_v(300, 4);
        let cfg = SchemeConfig::new(SchemeKind::Digital, 600);
        let t = digital_transmit(&v, &cfg, &ChannelConfig::new(-5.0, 0)).unwrap();
        assert!(t.outcome.is_err());
        assert!(!t.report.success);
        assert!(t.report.mse.is_none());
        assert!(t.report.failure.is_some());
        assert_eq!(t.report.symbols_used, t.report.n_digital);
    }

    #[test]
    fn digital_noiseless_is_quantization_floor() {
        let v = random_v(2000, 5);
        let cfg = SchemeConfig::new(SchemeKind::Digital, 3000);
        let t = digital_transmit(&v, &cfg, &ChannelConfig::noiseless()).unwrap();
        let delta = t.report.delta.unwrap();
        let want = dequantize::<f32>(&quantize(&v, delta).unwrap());
        let out = t.outcome.unwrap();
        assert_eq!(out.values(), want.values());
        // Uniform quantization noise: Δ²/12, loosely, for a smooth input.
        let mse = t.report.mse.unwrap();
        let floor = f64::from(delta).powi(2) / 12.0;
        assert!((mse / floor - 1.0).abs() < 0.25, "mse {mse} vs Δ²/12 {floor}");
    }

    #[test]
    fn qam_uses_half_the_symbols_of_bpsk() {
        let v = random_v(500, 6);
        let mut cfg = SchemeConfig::new(SchemeKind::Digital, 100_000);
        cfg.modulation = Modulation::Bpsk;
        let b = digital_transmit(&v, &cfg, &ChannelConfig::noiseless()).unwrap();
        cfg.modulation = Modulation::Qam4;
        let q = digital_transmit(&v, &cfg, &ChannelConfig::noiseless()).unwrap();
        // Same finest step fits in both, so the bit counts are equal.
        assert_eq!(b.report.delta, q.report.delta);
        assert_eq!(q.report.symbols_used * 2, b.report.symbols_used);
    }

    #[test]
    fn analog_noiseless_is_exact_and_uses_m_symbols() {
        let v = random_v(777, 7);
        let cfg = SchemeConfig::new(SchemeKind::Analog, 1000);
        let t = analog_transmit(&v, &cfg, &ChannelConfig::noiseless()).unwrap();
        assert_eq!(t.report.symbols_used, 777);
        assert!(rel_err(&t.outcome.unwrap(), &v) < 1e-6);

        let packed = SchemeConfig {
            analog_pack_iq: true,
            ..cfg
        };
        let t = analog_transmit(&v, &packed, &ChannelConfig::noiseless()).unwrap();
        assert_eq!(t.report.symbols_used, 389);
        assert!(rel_err(&t.outcome.unwrap(), &v) < 1e-6);
    }

    #[test]
    fn analog_mse_decreases_with_snr() {
        let v = random_v(400, 8);
        let cfg = SchemeConfig::new(SchemeKind::Analog, 400);
        let mses: Vec<f64> = [0.0, 5.0, 10.0, 15.0, 20.0]
            .iter()
            .map(|&snr| {
                (0..100)
                    .map(|s| {
                        analog_transmit(&v, &cfg, &ChannelConfig::new(snr, s))
                            .unwrap()
                            .report
                            .mse
                            .unwrap()
                    })
                    .sum::<f64>()
                    / 100.0
            })
            .collect();
        assert!(mses.windows(2).all(|w| w[1] < w[0]), "{mses:?}");
    }

    #[test]
    fn hybrid_beats_analog_at_20_db_with_room_for_a_baseline() {
        let v = random_v(1000, 9);
        let ch = ChannelConfig::new(20.0, 3);
        let h = hybrid_transmit(&v, &SchemeConfig::new(SchemeKind::Hybrid, 6000), &ch).unwrap();
        let a = analog_transmit(&v, &SchemeConfig::new(SchemeKind::Analog, 6000), &ch).unwrap();
        assert!(a.report.mse.unwrap() > 10.0 * h.report.mse.unwrap());
    }

    #[test]
    fn hybrid_without_digital_power_matches_analog_in_distribution() {
        let v = random_v(500, 10);
        let mut cfg = SchemeConfig::new(SchemeKind::Hybrid, 500);
        cfg.noise_power = 10.0; // P_th > P_t
        let plan: PowerPlan<f32> = cfg.power_plan(&ChannelConfig::new(5.0, 0)).unwrap();
        assert_eq!(plan.p_d, 0.0);
        let acfg = SchemeConfig::new(SchemeKind::Analog, 500);
        let (mut h, mut a) = (0.0, 0.0);
        for s in 0..200 {
            let ch = ChannelConfig::new(5.0, s);
            let ht = hybrid_transmit(&v, &cfg, &ch).unwrap();
            assert_eq!(ht.report.n_digital, 0);
            assert_eq!(ht.report.symbols_used, 500);
            h += ht.report.mse.unwrap();
            a += analog_transmit(&v, &acfg, &ch).unwrap().report.mse.unwrap();
        }
        assert!((h / a - 1.0).abs() < 0.05, "hybrid {h} vs analog {a}");
    }

    #[test]
    fn symbols_within_budget_unless_flagged() {
        let v = random_v(1000, 11);
        for kind in [SchemeKind::Hybrid, SchemeKind::Digital, SchemeKind::Analog] {
            for budget in [500, 1000, 3000] {
                let cfg = SchemeConfig::new(kind, budget);
                let t = transmit(&v, &cfg, &ChannelConfig::new(15.0, 1)).unwrap();
                assert!(
                    t.report.symbols_used <= budget || t.report.budget_miss,
                    "{kind} at {budget}: {:?}",
                    t.report
                );
            }
        }
    }

    #[test]
    fn wrong_kind_rejected() {
        let v = random_v(10, 12);
        let cfg = SchemeConfig::new(SchemeKind::Analog, 10);
        assert!(hybrid_transmit(&v, &cfg, &ChannelConfig::noiseless()).is_err());
        assert!(transmit(&v, &SchemeConfig::new(SchemeKind::Analog, 0), &ChannelConfig::noiseless()).is_err());
    }

    #[test]
    fn same_seed_same_output() {
        let v = random_v(300, 13);
        for kind in [SchemeKind::Hybrid, SchemeKind::Digital, SchemeKind::Analog] {
            let cfg = SchemeConfig::new(kind, 700);
            let ch = ChannelConfig::new(12.0, 5).with_stream(3);
            assert_eq!(transmit(&v, &cfg, &ch).unwrap(), transmit(&v, &cfg, &ch).unwrap());
        }
    }

    #[test]
    fn track_channel_plan_uses_actual_noise() {
        let mut cfg = SchemeConfig::new(SchemeKind::Hybrid, 100);
        cfg.track_channel = true;
        let plan: PowerPlan<f64> = cfg.power_plan(&ChannelConfig::new(10.0, 0)).unwrap();
        assert!((plan.n_0 - 0.1).abs() < 1e-12);
        let plan: PowerPlan<f64> = cfg.power_plan(&ChannelConfig::new(0.0, 0)).unwrap();
        assert_eq!(plan.p_d, 0.0);
    }
}
