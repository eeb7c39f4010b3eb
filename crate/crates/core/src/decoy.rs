//! Decoy-state estimates of the single-photon observables.
//!
//! Three weak coherent intensities `mu > nu1 > nu2 >= 0` give gains from
//! which the single-photon part of the signal rates is bounded. The bounds
//! then replace the observed rates in the multiphoton engine.

use std::fmt;

use crate::error::{Error, Result};
use crate::keyrate::{keyrate_multiphoton, KeyRateResult, Observables};
use crate::scalarmath::{h, MismatchEta, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityLabel {
    Signal,
    Decoy1,
    Decoy2,
}

impl fmt::Display for IntensityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntensityLabel::Signal => "signal",
            IntensityLabel::Decoy1 => "decoy1",
            IntensityLabel::Decoy2 => "decoy2",
        })
    }
}

/// Observed rates for one intensity, all conditioned on z-basis measurement
/// except `q0` and `q1`, which are x-basis erroneous-outcome rates per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityRecord {
    pub label: IntensityLabel,
    pub mu: f64,
    pub p_det: f64,
    pub p_1: f64,
    pub p_01: f64,
    pub q0: f64,
    pub q1: f64,
}

impl IntensityRecord {
    pub fn new(label: IntensityLabel, mu: f64, p_det: f64, p_1: f64, p_01: f64, q0: f64, q1: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Invalid(format!("{label}: intensity {mu} must be finite and >= 0")));
        }
        for (name, v) in [("p_det", p_det), ("p_1", p_1), ("p_01", p_01), ("q0", q0), ("q1", q1)] {
            Probability::new(v).map_err(|_| Error::Invalid(format!("{label}: {name} = {v} outside [0, 1]")))?;
        }
        if p_1 > p_det {
            return Err(Error::Invalid(format!("{label}: p_1 = {p_1} exceeds p_det = {p_det}")));
        }
        Ok(IntensityRecord {
            label,
            mu,
            p_det,
            p_1,
            p_01,
            q0,
            q1,
        })
    }

    fn gain(&self, channel: GainChannel) -> f64 {
        match channel {
            GainChannel::Detect => self.p_det,
            GainChannel::Click1 => self.p_1,
        }
    }

    fn weighted_error(&self, eta: MismatchEta) -> f64 {
        self.q0 + self.q1 / eta.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyInputs {
    signal: IntensityRecord,
    decoy1: IntensityRecord,
    decoy2: IntensityRecord,
    eta: MismatchEta,
}

impl DecoyInputs {
    pub fn new(signal: IntensityRecord, decoy1: IntensityRecord, decoy2: IntensityRecord, eta: MismatchEta) -> Result<Self> {
        let (mu, nu1, nu2) = (signal.mu, decoy1.mu, decoy2.mu);
        if !(0.0 <= nu2 && nu2 < nu1) {
            return Err(Error::Invalid(format!(
                "intensities must satisfy 0 <= nu2 < nu1 (nu1 = {nu1}, nu2 = {nu2})"
            )));
        }
        if !(nu1 + nu2 < mu) {
            return Err(Error::Invalid(format!(
                "intensities must satisfy nu1 + nu2 < mu (nu1 + nu2 = {}, mu = {mu})",
                nu1 + nu2
            )));
        }
        Ok(DecoyInputs {
            signal,
            decoy1,
            decoy2,
            eta,
        })
    }

    pub fn signal(&self) -> &IntensityRecord {
        &self.signal
    }
    pub fn decoy1(&self) -> &IntensityRecord {
        &self.decoy1
    }
    pub fn decoy2(&self) -> &IntensityRecord {
        &self.decoy2
    }
    pub fn eta(&self) -> MismatchEta {
        self.eta
    }
}

/// Which observed rate family the gain bound is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainChannel {
    /// Any click, `p_det`.
    Detect,
    /// Detector 1 alone, `p_1`.
    Click1,
}

/// Lower bound on the vacuum yield of the detection channel.
pub fn y0_lower(d: &DecoyInputs) -> Result<f64> {
    y0_lower_for(d, GainChannel::Detect)
}

pub fn y0_lower_for(d: &DecoyInputs, channel: GainChannel) -> Result<f64> {
    let (nu1, nu2) = (d.decoy1.mu, d.decoy2.mu);
    if nu1 == nu2 {
        return Err(Error::domain("nu1 - nu2", 0.0, "nonzero"));
    }
    let g1 = d.decoy1.gain(channel);
    let g2 = d.decoy2.gain(channel);
    Ok(((nu1 * g2 * nu2.exp() - nu2 * g1 * nu1.exp()) / (nu1 - nu2)).max(0.0))
}

/// Lower bound on the single-photon part of the signal gain.
pub fn single_gain_lower(d: &DecoyInputs, channel: GainChannel) -> Result<f64> {
    let (mu, nu1, nu2) = (d.signal.mu, d.decoy1.mu, d.decoy2.mu);
    let denom = mu * nu1 - mu * nu2 - nu1 * nu1 + nu2 * nu2;
    if !(denom > 0.0) {
        return Err(Error::domain("mu nu1 - mu nu2 - nu1^2 + nu2^2", denom, "(0, inf)"));
    }
    let y0 = y0_lower_for(d, channel)?;
    let bracket = d.decoy1.gain(channel) * nu1.exp()
        - d.decoy2.gain(channel) * nu2.exp()
        - (nu1 * nu1 - nu2 * nu2) / (mu * mu) * (d.signal.gain(channel) * mu.exp() - y0);
    Ok((mu * mu * (-mu).exp() / denom * bracket).max(0.0))
}

/// Upper bound on the single-photon part of the signal's weighted error rate.
pub fn single_q_upper(d: &DecoyInputs) -> Result<f64> {
    let (mu, nu1, nu2) = (d.signal.mu, d.decoy1.mu, d.decoy2.mu);
    if nu1 == nu2 {
        return Err(Error::domain("nu1 - nu2", 0.0, "nonzero"));
    }
    let w1 = d.decoy1.weighted_error(d.eta);
    let w2 = d.decoy2.weighted_error(d.eta);
    Ok(((w1 * nu1.exp() - w2 * nu2.exp()) * mu * (-mu).exp() / (nu1 - nu2)).max(0.0))
}

/// Every estimate plus the resulting key rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyOutcome {
    pub y0_lower: f64,
    pub pdet_lower: f64,
    pub p1_lower: f64,
    pub q_upper: f64,
    pub result: KeyRateResult,
}

/// Runs the multiphoton engine on the single-photon estimates. The
/// error-correction cost uses the full signal gain.
pub fn decoy_keyrate(d: &DecoyInputs, q_z: Probability) -> Result<DecoyOutcome> {
    let y0 = y0_lower(d)?;
    let pdet_lower = single_gain_lower(d, GainChannel::Detect)?.min(1.0);
    let p1_lower = single_gain_lower(d, GainChannel::Click1)?.min(pdet_lower);
    let q_upper = single_q_upper(d)?;
    let obs = Observables::new(d.eta, pdet_lower, p1_lower, q_upper, d.signal.p_01, 0.0)?;
    let mut result = keyrate_multiphoton(&obs);
    if result.status.is_feasible() {
        result.k_bound = (result.k_bound - d.signal.p_det * h(q_z.value())).max(0.0);
    }
    Ok(DecoyOutcome {
        y0_lower: y0,
        pdet_lower,
        p1_lower,
        q_upper,
        result,
    })
}

/// Photon-number-resolved channel used to generate decoy gains.
///
/// Entry `n` of each vector is the probability of the outcome given an
/// `n`-photon pulse. Pulses with more photons than listed never click.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldModel {
    pub detect: Vec<f64>,
    pub click1: Vec<f64>,
    pub double: Vec<f64>,
    pub err0: Vec<f64>,
    pub err1: Vec<f64>,
}

fn poisson_weights(mean: f64, len: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(len);
    let mut p = (-mean).exp();
    for n in 0..len {
        w.push(p);
        p *= mean / (n + 1) as f64;
    }
    w
}

fn average(weights: &[f64], yields: &[f64]) -> f64 {
    weights.iter().zip(yields).map(|(w, y)| w * y).sum()
}

impl YieldModel {
    /// Yields of a lossy line with transmittance `t`, vacuum click
    /// probability `y0`, symmetric error probability `e` and double-click
    /// probability `d` per detection, up to `max_n` photons.
    ///
    /// Detector 1 gets half of the detected single clicks.
    pub fn lossy_line(t: f64, y0: f64, e: f64, d: f64, max_n: usize) -> Self {
        let mut m = YieldModel {
            detect: Vec::new(),
            click1: Vec::new(),
            double: Vec::new(),
            err0: Vec::new(),
            err1: Vec::new(),
        };
        for n in 0..=max_n {
            let y = 1.0 - (1.0 - y0) * (1.0 - t).powi(n as i32);
            m.detect.push(y);
            m.click1.push(y * (1.0 - d) / 2.0);
            m.double.push(y * d);
            m.err0.push(y * e / 2.0);
            m.err1.push(y * e / 2.0);
        }
        m
    }

    pub fn record(&self, label: IntensityLabel, mean: f64) -> Result<IntensityRecord> {
        let len = [&self.detect, &self.click1, &self.double, &self.err0, &self.err1]
            .iter()
            .map(|v| v.len())
            .max()
            .unwrap_or(0);
        let w = poisson_weights(mean, len);
        IntensityRecord::new(
            label,
            mean,
            average(&w, &self.detect),
            average(&w, &self.click1),
            average(&w, &self.double),
            average(&w, &self.err0),
            average(&w, &self.err1),
        )
    }

    pub fn inputs(&self, mu: f64, nu1: f64, nu2: f64, eta: MismatchEta) -> Result<DecoyInputs> {
        DecoyInputs::new(
            self.record(IntensityLabel::Signal, mu)?,
            self.record(IntensityLabel::Decoy1, nu1)?,
            self.record(IntensityLabel::Decoy2, nu2)?,
            eta,
        )
    }

    fn at(v: &[f64], n: usize) -> f64 {
        v.get(n).copied().unwrap_or(0.0)
    }

    /// Single-photon part of the signal rate in `channel`.
    pub fn true_single_gain(&self, mu: f64, channel: GainChannel) -> f64 {
        let y = match channel {
            GainChannel::Detect => &self.detect,
            GainChannel::Click1 => &self.click1,
        };
        mu * (-mu).exp() * Self::at(y, 1)
    }

    /// Single-photon part of the signal's weighted error rate.
    pub fn true_single_q(&self, mu: f64, eta: MismatchEta) -> f64 {
        mu * (-mu).exp() * (Self::at(&self.err0, 1) + Self::at(&self.err1, 1) / eta.value())
    }

    pub fn true_y0(&self) -> f64 {
        Self::at(&self.detect, 0)
    }
}
