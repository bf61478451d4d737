use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::power::db_to_linear;
use super::Complex;
use crate::error::{invalid, Result};
use crate::scalar::{lit, Scalar};

/// Additive white Gaussian noise channel.
///
/// The channel SNR is `P_ref / (2·σ²)`, where σ² is the noise variance of
/// each real dimension. Infinite `snr_db` gives a noiseless channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub seed: u64,
    /// Independent noise stream under the same seed.
    pub stream: u64,
    /// Power the SNR is referenced to (the total symbol power budget).
    pub reference_power: f64,
    /// Standard deviation in dB of an optional log-normal scaling of σ²,
    /// drawn once per call.
    pub fading_db: Option<f64>,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            seed,
            stream: 0,
            reference_power: 1.0,
            fading_db: None,
        }
    }

    pub fn noiseless() -> Self {
        Self::new(f64::INFINITY, 0)
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub fn with_reference_power(self, reference_power: f64) -> Self {
        Self {
            reference_power,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(invalid("snr_db", "must be a number below +inf or +inf"));
        }
        if !(self.reference_power > 0.0 && self.reference_power.is_finite()) {
            return Err(invalid("reference_power", "must be finite and positive"));
        }
        if let Some(f) = self.fading_db {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(invalid("fading_db", "must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    /// Nominal per-dimension noise variance.
    pub fn sigma2(&self) -> f64 {
        if self.is_noiseless() {
            0.0
        } else {
            self.reference_power / (2.0 * db_to_linear(self.snr_db))
        }
    }

    /// Average complex noise power `2·σ²`.
    pub fn noise_power(&self) -> f64 {
        2.0 * self.sigma2()
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Channel output and the per-dimension noise variance it was drawn with.
#[derive(Clone, Debug, PartialEq)]
pub struct Received<T> {
    pub symbols: Vec<Complex<T>>,
    pub sigma2: T,
}

/// `y_i = x_i + n_i` with independent N(0, σ²) real and imaginary parts.
/// Deterministic in (seed, stream).
pub fn awgn_channel<T: Scalar>(symbols: &[Complex<T>], cfg: &ChannelConfig) -> Result<Received<T>> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let mut sigma2 = cfg.sigma2();
    if let (Some(spread), false) = (cfg.fading_db, cfg.is_noiseless()) {
        sigma2 *= db_to_linear(f64::standard_normal(&mut rng) * spread);
    }
    if sigma2 == 0.0 {
        return Ok(Received {
            symbols: symbols.to_vec(),
            sigma2: T::zero(),
        });
    }
    let sigma = lit::<T>(sigma2.sqrt());
    let symbols = symbols
        .iter()
        .map(|x| {
            let re = T::standard_normal(&mut rng) * sigma;
            let im = T::standard_normal(&mut rng) * sigma;
            Complex::new(x.re + re, x.im + im)
        })
        .collect();
    Ok(Received {
        symbols,
        sigma2: lit(sigma2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(n: usize) -> Vec<Complex<f64>> {
        vec![Complex::new(0.0, 0.0); n]
    }

    #[test]
    fn sigma2_from_snr() {
        let cfg = ChannelConfig::new(10.0, 0).with_reference_power(2.0);
        assert!((cfg.sigma2() - 0.1).abs() < 1e-15);
        assert_eq!(ChannelConfig::noiseless().sigma2(), 0.0);
    }

    #[test]
    fn noiseless_passes_through() {
        let x = vec![Complex::new(0.3, -1.2), Complex::new(-2.0, 0.5)];
        let y = awgn_channel(&x, &ChannelConfig::noiseless()).unwrap();
        assert_eq!(y.symbols, x);
        let y = awgn_channel(&x, &ChannelConfig::new(300.0, 4)).unwrap();
        for (a, b) in y.symbols.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn empirical_variance_within_one_percent() {
        let cfg = ChannelConfig::new(3.0, 17);
        let y = awgn_channel(&zeros(1_000_000), &cfg).unwrap();
        let n = y.symbols.len() as f64;
        let var_re = y.symbols.iter().map(|s| s.re * s.re).sum::<f64>() / n;
        let var_im = y.symbols.iter().map(|s| s.im * s.im).sum::<f64>() / n;
        let s2 = cfg.sigma2();
        assert!((var_re / s2 - 1.0).abs() < 0.01, "re {var_re} vs {s2}");
        assert!((var_im / s2 - 1.0).abs() < 0.01, "im {var_im} vs {s2}");
        let cross = y.symbols.iter().map(|s| s.re * s.im).sum::<f64>() / n;
        assert!(cross.abs() < 0.01 * s2);
    }

    #[test]
    fn deterministic_per_seed_and_stream() {
        let cfg = ChannelConfig::new(5.0, 99);
        let a = awgn_channel(&zeros(100), &cfg).unwrap();
        let b = awgn_channel(&zeros(100), &cfg).unwrap();
        assert_eq!(a, b);
        let c = awgn_channel(&zeros(100), &cfg.with_stream(1)).unwrap();
        assert_ne!(a.symbols, c.symbols);
    }

    #[test]
    fn fading_scales_variance() {
        let cfg = ChannelConfig {
            fading_db: Some(3.0),
            ..ChannelConfig::new(5.0, 1)
        };
        let y = awgn_channel(&zeros(10), &cfg).unwrap();
        assert!(y.sigma2 != cfg.sigma2());
        assert!(ChannelConfig {
            fading_db: Some(-1.0),
            ..cfg
        }
        .validate()
        .is_err());
    }
}
