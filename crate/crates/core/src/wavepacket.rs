//! Sub-bin temporal overlap of two Gaussian photon wavepackets.
//!
//! `sigma_t` is the standard deviation of the intensity profile `|ξ(t)|²`, so the
//! amplitude is `ξ(t) ∝ exp(−t²/(4σ²))`. For packets with widths `σ_a`, `σ_b`,
//! relative delay `δ` and detuning `Δν` the overlap modulus is
//!
//! ```text
//! |⟨ξ_a|ξ_b(δ)⟩| = √(2σ_aσ_b/(σ_a²+σ_b²)) · exp(−δ²/(4(σ_a²+σ_b²)))
//!                  · exp(−(2πΔν)² σ_a²σ_b²/(σ_a²+σ_b²))
//! ```
//!
//! The detuning-dependent phase is dropped; only `|overlap|²` is ever used.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::Indistinguishability;

/// Quoted photon pulse duration, intensity FWHM.
pub const DEFAULT_FWHM: f64 = 2.7e-12;

/// Converts an intensity FWHM to the intensity standard deviation.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianPacket {
    /// Seconds.
    pub sigma_t: f64,
    /// Hz, relative to a common reference.
    pub detuning: f64,
    /// Width growth factor per loop roundtrip.
    pub broadening_per_roundtrip: f64,
}

impl Default for GaussianPacket {
    fn default() -> Self {
        Self {
            sigma_t: fwhm_to_sigma(DEFAULT_FWHM),
            detuning: 0.0,
            broadening_per_roundtrip: 1.0,
        }
    }
}

impl GaussianPacket {
    pub fn new(sigma_t: f64) -> Result<Self> {
        let p = Self {
            sigma_t,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_fwhm(fwhm: f64) -> Result<Self> {
        Self::new(fwhm_to_sigma(fwhm))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_t > 0.0 && self.sigma_t.is_finite()) {
            return Err(Error::invalid(
                "sigma_t",
                format!("{} must be positive", self.sigma_t),
            ));
        }
        if !(self.broadening_per_roundtrip >= 1.0) {
            return Err(Error::invalid(
                "broadening_per_roundtrip",
                format!("{} must be at least 1", self.broadening_per_roundtrip),
            ));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        Ok(())
    }

    /// Packet after `roundtrips` passes through the loop.
    pub fn after_roundtrips(&self, roundtrips: usize) -> Self {
        Self {
            sigma_t: self.sigma_t * self.broadening_per_roundtrip.powi(roundtrips as i32),
            ..*self
        }
    }

    /// Intensity FWHM in seconds.
    pub fn fwhm(&self) -> f64 {
        self.sigma_t * 2.0 * (2.0 * 2f64.ln()).sqrt()
    }
}

/// Overlap of `a` with `b` delayed by `delta` seconds. Real and non-negative.
pub fn overlap(a: &GaussianPacket, b: &GaussianPacket, delta: f64) -> Complex64 {
    let sa2 = a.sigma_t * a.sigma_t;
    let sb2 = b.sigma_t * b.sigma_t;
    let sum = sa2 + sb2;
    let width = (2.0 * a.sigma_t * b.sigma_t / sum).sqrt();
    let delay = (-delta * delta / (4.0 * sum)).exp();
    let k = 2.0 * PI * (b.detuning - a.detuning);
    let spectral = (-k * k * sa2 * sb2 / sum).exp();
    Complex64::new(width * delay * spectral, 0.0)
}

/// `I(δ) = floor · |overlap(a, b, δ)|²`, where `floor` collects every
/// delay-independent imperfection.
pub fn indistinguishability(
    a: &GaussianPacket,
    b: &GaussianPacket,
    delta: f64,
    floor: f64,
) -> Result<Indistinguishability> {
    if !(0.0..=1.0).contains(&floor) {
        return Err(Error::invalid("floor", format!("{floor} not in [0, 1]")));
    }
    Indistinguishability::new((floor * overlap(a, b, delta).norm_sqr()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(sigma: f64) -> GaussianPacket {
        GaussianPacket::new(sigma).unwrap()
    }

    #[test]
    fn default_sigma_from_fwhm() {
        let p = GaussianPacket::default();
        assert!((p.sigma_t - 1.1466e-12).abs() < 1e-16);
        assert!((p.fwhm() - DEFAULT_FWHM).abs() < 1e-24);
    }

    #[test]
    fn overlap_examples() {
        let p = packet(1e-12);
        assert!((overlap(&p, &p, 0.0).re - 1.0).abs() < 1e-15);
        assert!(overlap(&p, &p, 100e-12).norm() < 1e-300);
        let half = 2.0 * 2f64.ln().sqrt() * 1e-12;
        assert!((overlap(&p, &p, half).norm_sqr() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn detuning_reduces_overlap() {
        let a = packet(1e-12);
        let b = GaussianPacket {
            detuning: 50e9,
            ..a
        };
        let o = overlap(&a, &b, 0.0).norm();
        assert!(o < 1.0 && o > 0.0);
    }

    #[test]
    fn indistinguishability_examples() {
        let p = GaussianPacket::default();
        assert_eq!(indistinguishability(&p, &p, 0.0, 1.0).unwrap().value(), 1.0);
        assert!((indistinguishability(&p, &p, 0.0, 0.83).unwrap().value() - 0.83).abs() < 1e-15);
        assert!(indistinguishability(&p, &p, 50e-12, 0.8).unwrap().value() < 1e-100);
        assert!(indistinguishability(&p, &p, 0.0, 1.5).is_err());
    }

    #[test]
    fn broadening() {
        let p = GaussianPacket {
            broadening_per_roundtrip: 1.1,
            ..GaussianPacket::default()
        };
        assert!((p.after_roundtrips(2).sigma_t - p.sigma_t * 1.21).abs() < 1e-24);
        assert!(GaussianPacket {
            broadening_per_roundtrip: 0.9,
            ..GaussianPacket::default()
        }
        .validate()
        .is_err());
        assert!(GaussianPacket::new(0.0).is_err());
    }

    #[test]
    fn overlap_bounded_and_symmetric() {
        for &ra in &[0.5, 1.0, 2.0] {
            for &d in &[-3.0, 0.0, 1.5] {
                let a = packet(1e-12);
                let b = GaussianPacket {
                    detuning: 1e10,
                    ..packet(ra * 1e-12)
                };
                let ab = overlap(&a, &b, d * 1e-12);
                let ba = overlap(&b, &a, -d * 1e-12);
                assert!(ab.norm() <= 1.0 + 1e-15);
                assert!((ab - ba.conj()).norm() < 1e-15);
            }
        }
    }
}
