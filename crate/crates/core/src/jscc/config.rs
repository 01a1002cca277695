use crate::channel::MAX_ANTENNAS;
use crate::error::{Error, Result};
use crate::frontend::{CsiMode, DEFAULT_SENTINEL};
use crate::linalg::RngStream;

/// Training SNR in dB.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SnrSpec {
    /// A single value; `+∞` means a noiseless link.
    Fixed(f64),
    /// Uniform over `[lo, hi]`, drawn per image.
    Uniform { lo: f64, hi: f64 },
}

impl SnrSpec {
    /// Always consumes exactly one uniform draw, so `Fixed(x)` and
    /// `Uniform { lo: x, hi: x }` leave the stream in the same state.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform();
        match *self {
            SnrSpec::Fixed(x) => x,
            SnrSpec::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }

    /// Representative value used for validation during training.
    pub fn midpoint(&self) -> f64 {
        match *self {
            SnrSpec::Fixed(x) => x,
            SnrSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub mode: CsiMode,
    /// Antenna count the model is built for (the only count unless
    /// `adaptive_m`).
    pub m_max: usize,
    /// Channel uses per image.
    pub k: usize,
    /// Patch grid side; the image splits into `p×p` patches.
    pub p: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub d: usize,
    pub n_heads: usize,
    pub depth: usize,
    pub snr_train: SnrSpec,
    /// Train over antenna counts drawn uniformly from `2..=m_max`.
    pub adaptive_m: bool,
    /// Heatmap value for dead or padded streams.
    pub sentinel: f64,
    /// Estimation-error variance applied during training.
    pub sigma_e2_train: f64,
    /// Allow CSIT operation with an imperfect channel estimate (precoder and
    /// heatmap then use the estimate).
    pub csit_estimation_error: bool,
}

impl ModelConfig {
    /// Desk-scale profile: 8×8 images, 2×2 patch grid, two layers of width 32,
    /// two antennas, bandwidth ratio 1/12.
    pub fn tiny(mode: CsiMode) -> Self {
        Self {
            mode,
            m_max: 2,
            k: 16,
            p: 2,
            image_h: 8,
            image_w: 8,
            d: 32,
            n_heads: 2,
            depth: 2,
            snr_train: SnrSpec::Fixed(10.0),
            adaptive_m: false,
            sentinel: DEFAULT_SENTINEL,
            sigma_e2_train: 0.0,
            csit_estimation_error: false,
        }
    }

    /// Full-size profile for 32×32 images.
    pub fn full(mode: CsiMode) -> Self {
        Self {
            mode,
            m_max: 2,
            k: 256,
            p: 8,
            image_h: 32,
            image_w: 32,
            d: 256,
            n_heads: 8,
            depth: 8,
            snr_train: SnrSpec::Fixed(10.0),
            adaptive_m: false,
            sentinel: DEFAULT_SENTINEL,
            sigma_e2_train: 0.0,
            csit_estimation_error: false,
        }
    }

    pub fn profile(name: &str, mode: CsiMode) -> Result<Self> {
        match name {
            "tiny" => Ok(Self::tiny(mode)),
            "full" => Ok(Self::full(mode)),
            other => Err(Error::Config(format!(
                "unknown model profile {other:?} (expected tiny or full)"
            ))),
        }
    }

    /// Sets `k` from a bandwidth ratio `k / (3·h·w)`.
    pub fn with_rate(mut self, r: f64) -> Result<Self> {
        self.k = channel_uses(r, self.image_h, self.image_w)?;
        Ok(self)
    }

    /// Number of tokens.
    pub fn l(&self) -> usize {
        self.p * self.p
    }

    /// Source values per token.
    pub fn c(&self) -> usize {
        3 * self.image_h * self.image_w / self.l()
    }

    /// Real channel values per token, `2·m_max·k / l`.
    pub fn cols(&self) -> usize {
        2 * self.m_max * self.k / self.l()
    }

    pub fn d_head(&self) -> usize {
        self.d / self.n_heads
    }

    pub fn mlp_hidden(&self) -> usize {
        4 * self.d
    }

    /// Encoder input width: patches, plus the heatmap under CSIT.
    pub fn enc_in(&self) -> usize {
        match self.mode {
            CsiMode::Csir => self.c(),
            CsiMode::Csit => self.c() + self.cols(),
        }
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / (3 * self.image_h * self.image_w) as f64
    }

    /// Smallest antenna count the model may be run with.
    pub fn m_min(&self) -> usize {
        if self.adaptive_m {
            2.min(self.m_max)
        } else {
            self.m_max
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.m_max == 0 || self.m_max > MAX_ANTENNAS {
            return err(format!("m_max {} outside 1..={MAX_ANTENNAS}", self.m_max));
        }
        if self.adaptive_m && self.m_max < 2 {
            return err("adaptive antenna counts need m_max >= 2".into());
        }
        if self.k == 0 {
            return err("k must be positive".into());
        }
        if self.p == 0 || self.image_h % self.p != 0 || self.image_w % self.p != 0 {
            return err(format!(
                "patch grid {} does not divide {}x{}",
                self.p, self.image_h, self.image_w
            ));
        }
        if (2 * self.m_max * self.k) % self.l() != 0 {
            return err(format!(
                "{} tokens do not divide 2·m_max·k = {}",
                self.l(),
                2 * self.m_max * self.k
            ));
        }
        if self.d == 0 || self.n_heads == 0 || self.d % self.n_heads != 0 {
            return err(format!("d = {} not divisible by {} heads", self.d, self.n_heads));
        }
        match self.snr_train {
            SnrSpec::Fixed(x) if x.is_nan() || x == f64::NEG_INFINITY => {
                return err(format!("bad training SNR {x}"))
            }
            SnrSpec::Uniform { lo, hi } if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() => {
                return err(format!("bad training SNR range [{lo}, {hi}]"))
            }
            _ => {}
        }
        if !(self.sentinel > 0.0) || !self.sentinel.is_finite() {
            return err(format!("sentinel {} must be positive", self.sentinel));
        }
        if !(self.sigma_e2_train >= 0.0) {
            return err(format!("sigma_e2 {} must be >= 0", self.sigma_e2_train));
        }
        self.check_estimation_error(self.sigma_e2_train)
    }

    /// CSIT with an imperfect estimate is only allowed when explicitly enabled.
    pub fn check_estimation_error(&self, sigma_e2: f64) -> Result<()> {
        if self.mode == CsiMode::Csit && sigma_e2 > 0.0 && !self.csit_estimation_error {
            return Err(Error::Config(
                "sigma_e2 > 0 under CSIT requires csit_estimation_error = true".into(),
            ));
        }
        Ok(())
    }
}

/// `k = r·3·h·w`, rejected unless integral.
pub fn channel_uses(r: f64, h: usize, w: usize) -> Result<usize> {
    let k = r * (3 * h * w) as f64;
    let rounded = k.round();
    if !(r > 0.0) || (k - rounded).abs() > 1e-9 * k.max(1.0) || rounded < 1.0 {
        return Err(Error::Config(format!(
            "bandwidth ratio {r} gives non-integral k = {k} for {h}x{w} images"
        )));
    }
    Ok(rounded as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_profile_dimensions() {
        let c = ModelConfig::tiny(CsiMode::Csir);
        c.validate().unwrap();
        assert_eq!((c.l(), c.c(), c.cols(), c.d_head()), (4, 48, 16, 16));
        assert!((c.rate() - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(ModelConfig::tiny(CsiMode::Csit).enc_in(), 64);
    }

    #[test]
    fn full_profile_dimensions() {
        let c = ModelConfig::full(CsiMode::Csir);
        c.validate().unwrap();
        assert_eq!((c.l(), c.c()), (64, 48));
        assert_eq!(c.clone().with_rate(1.0 / 12.0).unwrap().k, 256);
        assert_eq!(c.with_rate(1.0 / 24.0).unwrap().k, 128);
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let mut c = ModelConfig::tiny(CsiMode::Csir);
        c.d = 33;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::tiny(CsiMode::Csir);
        c.p = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::tiny(CsiMode::Csit);
        c.sigma_e2_train = 0.2;
        assert!(c.validate().is_err());
        c.csit_estimation_error = true;
        assert!(c.validate().is_ok());
        assert!(channel_uses(0.1, 8, 8).is_err());
    }

    #[test]
    fn degenerate_range_matches_fixed() {
        let mut a = RngStream::new(1, 2);
        let mut b = a.clone();
        assert_eq!(
            SnrSpec::Fixed(10.0).sample(&mut a),
            SnrSpec::Uniform { lo: 10.0, hi: 10.0 }.sample(&mut b)
        );
        assert_eq!(a.uniform(), b.uniform());
    }
}
