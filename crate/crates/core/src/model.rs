//! Physical model of the underlay link: channel draws, SINR coefficients,
//! secrecy rate and interference leakage.
//!
//! Channels are kept as nonnegative real magnitudes. Every quantity used
//! downstream depends only on `|h|^2`, and the extremal points of a scalar
//! uncertainty disk `|e| <= eps` are plain magnitude shifts.
//!
//! All powers are in mW.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed physical constants of the deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Primary transmitter power `P_p` (mW).
    pub primary_power: f64,
    /// Noise variance at the secondary receiver (mW).
    pub noise_su: f64,
    /// Noise variance at the eavesdropper (mW).
    pub noise_eve: f64,
    pub path_loss_exp: f64,
    /// Secondary transmitter to secondary receiver (m).
    pub d_s: f64,
    /// Secondary transmitter to eavesdropper (m).
    pub d_e: f64,
    /// Secondary transmitter to primary receiver (m).
    pub d_p: f64,
    /// Primary transmitter to secondary receiver (m).
    pub c_s: f64,
    /// Primary transmitter to eavesdropper (m).
    pub c_e: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            primary_power: 60.0,
            noise_su: 1e-3,
            noise_eve: 1e-3,
            path_loss_exp: 1.7,
            d_s: 10.0,
            d_e: 20.0,
            d_p: 10.0,
            c_s: 20.0,
            c_e: 20.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("primary_power", self.primary_power),
            ("noise_su", self.noise_su),
            ("noise_eve", self.noise_eve),
            ("path_loss_exp", self.path_loss_exp),
            ("d_s", self.d_s),
            ("d_e", self.d_e),
            ("d_p", self.d_p),
            ("c_s", self.c_s),
            ("c_e", self.c_e),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Amplitude scale `sqrt(d^-alpha)` for a link of length `d`.
    pub fn amplitude_scale(&self, distance: f64) -> f64 {
        distance.powf(-self.path_loss_exp).sqrt()
    }

    /// Interference-plus-noise at the secondary receiver for a given `|g_s|`.
    pub fn interference_su(&self, g_s: f64) -> f64 {
        self.primary_power * g_s * g_s + self.noise_su
    }

    /// Interference-plus-noise at the eavesdropper for a given `|g_e|`.
    pub fn interference_eve(&self, g_e: f64) -> f64 {
        self.primary_power * g_e * g_e + self.noise_eve
    }
}

/// Per-dataset operating point: power budget and leakage cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Maximum secondary transmit power `P_t` (mW).
    pub max_power: f64,
    /// Maximum interference leakage `q` at the primary receiver (mW).
    pub leakage_cap: f64,
}

impl ScenarioParams {
    pub fn new(max_power: f64, leakage_cap: f64) -> Result<Self> {
        let sc = Self {
            max_power,
            leakage_cap,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_power.is_finite() && self.max_power > 0.0) {
            return Err(Error::invalid(format!(
                "max power must be positive, got {}",
                self.max_power
            )));
        }
        if !(self.leakage_cap.is_finite() && self.leakage_cap >= 0.0) {
            return Err(Error::invalid(format!(
                "leakage cap must be nonnegative, got {}",
                self.leakage_cap
            )));
        }
        Ok(())
    }
}

/// Radii of the channel-error disks around each estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintyProfile {
    pub eps_s: f64,
    pub eps_e: f64,
    pub eps_p: f64,
}

impl UncertaintyProfile {
    pub const PERFECT: Self = Self {
        eps_s: 0.0,
        eps_e: 0.0,
        eps_p: 0.0,
    };

    pub fn uniform(eps: f64) -> Self {
        Self {
            eps_s: eps,
            eps_e: eps,
            eps_p: eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_s", self.eps_s),
            ("eps_e", self.eps_e),
            ("eps_p", self.eps_p),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_perfect(&self) -> bool {
        self.eps_s == 0.0 && self.eps_e == 0.0 && self.eps_p == 0.0
    }
}

/// One channel realization as seen by the secondary transmitter.
///
/// `h_*` are the estimated magnitudes `|ĥ|`, `g_*` the primary-transmitter
/// magnitudes, `eps_*` the error radii. Zero radii make this a perfect-CSI
/// instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelInstance {
    pub h_s: f64,
    pub h_p: f64,
    pub h_e: f64,
    pub g_s: f64,
    pub g_e: f64,
    #[serde(default)]
    pub eps_s: f64,
    #[serde(default)]
    pub eps_e: f64,
    #[serde(default)]
    pub eps_p: f64,
}

impl ChannelInstance {
    pub const FEATURES: usize = 8;

    pub fn validate(&self) -> Result<()> {
        if self.features().iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "channel fields must be finite and nonnegative: {self:?}"
            )))
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.uncertainty().is_perfect()
    }

    pub fn uncertainty(&self) -> UncertaintyProfile {
        UncertaintyProfile {
            eps_s: self.eps_s,
            eps_e: self.eps_e,
            eps_p: self.eps_p,
        }
    }

    /// Network input order: `h_s, h_p, h_e, g_s, g_e, eps_s, eps_e, eps_p`.
    pub fn features(&self) -> [f64; Self::FEATURES] {
        [
            self.h_s, self.h_p, self.h_e, self.g_s, self.g_e, self.eps_s, self.eps_e, self.eps_p,
        ]
    }

    pub fn from_features(f: &[f64; Self::FEATURES]) -> Self {
        Self {
            h_s: f[0],
            h_p: f[1],
            h_e: f[2],
            g_s: f[3],
            g_e: f[4],
            eps_s: f[5],
            eps_e: f[6],
            eps_p: f[7],
        }
    }
}

/// Per-unit-power SINR coefficients and leakage gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveGains {
    /// Legitimate SINR per mW, `|h_s|^2 / (P_p |g_s|^2 + sigma_s^2)`.
    pub a: f64,
    /// Eavesdropper SINR per mW, `|h_e|^2 / (P_p |g_e|^2 + sigma_e^2)`.
    pub b: f64,
    /// `|h_p|^2`.
    pub leak_gain: f64,
}

/// Magnitude of one `CN(0, 1)` draw.
fn unit_rayleigh(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
    let v: f64 = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
    u.hypot(v)
}

/// Draws one channel realization. The same seed always yields the same
/// instance; radii are copied from `profile`.
pub fn gen_channel(
    seed: u64,
    params: &SystemParams,
    profile: UncertaintyProfile,
) -> ChannelInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |d: f64| unit_rayleigh(&mut rng) * params.amplitude_scale(d);
    let h_s = draw(params.d_s);
    let h_p = draw(params.d_p);
    let h_e = draw(params.d_e);
    let g_s = draw(params.c_s);
    let g_e = draw(params.c_e);
    ChannelInstance {
        h_s,
        h_p,
        h_e,
        g_s,
        g_e,
        eps_s: profile.eps_s,
        eps_e: profile.eps_e,
        eps_p: profile.eps_p,
    }
}

/// Gains seen by the transmitter. With `worst_case`, each estimate is moved
/// to the adversarial edge of its disk: legitimate magnitude shrinks (not
/// below zero), eavesdropper and leakage magnitudes grow.
pub fn effective_gains(
    ch: &ChannelInstance,
    params: &SystemParams,
    worst_case: bool,
) -> EffectiveGains {
    let (h_s, h_e, h_p) = if worst_case {
        (
            (ch.h_s - ch.eps_s).max(0.0),
            ch.h_e + ch.eps_e,
            ch.h_p + ch.eps_p,
        )
    } else {
        (ch.h_s, ch.h_e, ch.h_p)
    };
    EffectiveGains {
        a: h_s * h_s / params.interference_su(ch.g_s),
        b: h_e * h_e / params.interference_eve(ch.g_e),
        leak_gain: h_p * h_p,
    }
}

/// Secrecy rate in bits/s/Hz at transmit power `p` (mW).
pub fn secrecy_rate(p: f64, g: &EffectiveGains) -> f64 {
    let nats = (g.a * p).ln_1p() - (g.b * p).ln_1p();
    (nats / std::f64::consts::LN_2).max(0.0)
}

/// Interference leakage at the primary receiver (mW).
pub fn leakage(p: f64, g: &EffectiveGains) -> f64 {
    p * g.leak_gain
}
