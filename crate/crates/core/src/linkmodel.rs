//! Link rate and per-hop delay formulas.
//!
//! All quantities are SI: metres, seconds, hertz, bits, watts, kelvin.
//! Packet sizes use decimal prefixes (1 Kbit = 1000 bits).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GslParams {
    pub bandwidth: f64,
    pub tx_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub noise_temp: f64,
    pub carrier_freq: f64,
    pub boltzmann: f64,
    pub light_speed: f64,
}

impl Default for GslParams {
    // Ka-band placeholders sized so the Shannon rate at ~1000 km is in the
    // Gbps range, comparable to the fixed 1000 Mbps GSL rate.
    fn default() -> Self {
        Self {
            bandwidth: 500e6,
            tx_power: 10.0,
            tx_gain: 1000.0,
            rx_gain: 1000.0,
            noise_temp: 500.0,
            carrier_freq: 20e9,
            boltzmann: BOLTZMANN,
            light_speed: SPEED_OF_LIGHT,
        }
    }
}

impl GslParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.bandwidth,
            self.tx_power,
            self.tx_gain,
            self.rx_gain,
            self.noise_temp,
            self.carrier_freq,
            self.boltzmann,
            self.light_speed,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(config_err("gsl parameters must be strictly positive"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IslParams {
    pub optical_bandwidth: f64,
    pub kappa1: f64,
    /// Attenuation per metre.
    pub kappa2: f64,
}

impl Default for IslParams {
    // kappa1 * exp(-kappa2 * 3000 km) = 1, i.e. B/2 = 50 Mbps at 3000 km.
    fn default() -> Self {
        Self { optical_bandwidth: 100e6, kappa1: 10.0, kappa2: std::f64::consts::LN_10 / 3.0e6 }
    }
}

impl IslParams {
    pub fn validate(&self) -> Result<()> {
        if [self.optical_bandwidth, self.kappa1, self.kappa2].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(config_err("isl parameters must be strictly positive"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    Physical,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateModel {
    pub mode: RateMode,
    /// bits/s, used when `mode = fixed`.
    #[serde(default)]
    pub fixed_rate: f64,
}

impl RateModel {
    pub fn fixed(rate: f64) -> Self {
        Self { mode: RateMode::Fixed, fixed_rate: rate }
    }

    pub fn physical() -> Self {
        Self { mode: RateMode::Physical, fixed_rate: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == RateMode::Fixed && !(self.fixed_rate > 0.0 && self.fixed_rate.is_finite()) {
            return Err(config_err("fixed rate must be positive"));
        }
        Ok(())
    }
}

/// Complete link configuration for both link kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub gsl: GslParams,
    pub isl: IslParams,
    pub gsl_rate: RateModel,
    pub isl_rate: RateModel,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            gsl: GslParams::default(),
            isl: IslParams::default(),
            gsl_rate: RateModel::fixed(1000e6),
            isl_rate: RateModel::fixed(50e6),
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.gsl.validate()?;
        self.isl.validate()?;
        self.gsl_rate.validate()?;
        self.isl_rate.validate()
    }

    pub fn light_speed(&self) -> f64 {
        self.gsl.light_speed
    }

    pub fn gsl_rate_at(&self, distance: f64) -> Result<f64> {
        match self.gsl_rate.mode {
            RateMode::Fixed => Ok(self.gsl_rate.fixed_rate),
            RateMode::Physical => Ok(rate_gsl(self.gsl.bandwidth, snr_gsl(&self.gsl, distance)?)),
        }
    }

    pub fn isl_rate_at(&self, distance: f64) -> f64 {
        match self.isl_rate.mode {
            RateMode::Fixed => self.isl_rate.fixed_rate,
            RateMode::Physical => rate_isl(&self.isl, distance),
        }
    }
}

pub fn propagation_delay(distance: f64, light_speed: f64) -> f64 {
    distance / light_speed
}

/// Free-space path loss `(4 pi d f / c)^2`.
pub fn fspl(distance: f64, carrier_freq: f64, light_speed: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("path loss undefined at distance {distance}")));
    }
    Ok((4.0 * PI * distance * carrier_freq / light_speed).powi(2))
}

pub fn snr_gsl(p: &GslParams, distance: f64) -> Result<f64> {
    let loss = fspl(distance, p.carrier_freq, p.light_speed)?;
    Ok(p.tx_power * p.tx_gain * p.rx_gain / (loss * p.boltzmann * p.noise_temp * p.bandwidth))
}

/// Shannon-Hartley rate.
pub fn rate_gsl(bandwidth: f64, snr: f64) -> f64 {
    bandwidth * snr.ln_1p() / std::f64::consts::LN_2
}

/// Optical ISL rate `(B/2) log2(1 + k1 exp(-k2 d))`.
pub fn rate_isl(p: &IslParams, distance: f64) -> f64 {
    0.5 * p.optical_bandwidth * (p.kappa1 * (-p.kappa2 * distance).exp()).ln_1p() / std::f64::consts::LN_2
}

pub fn transmission_delay(bits: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Domain(format!("non-positive link rate {rate}")));
    }
    Ok(bits / rate)
}

/// Waiting time behind `queued_bits_ahead` bits in a FIFO output queue.
pub fn queuing_delay(queued_bits_ahead: f64, rate: f64) -> Result<f64> {
    transmission_delay(queued_bits_ahead, rate)
}
