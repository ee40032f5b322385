//! Heralded parametric down-conversion source and its four-fold HOM visibility.
//!
//! Each source emits `n` pairs with thermal probability `(1−λ)λⁿ`, λ = n̄/(1+n̄),
//! truncated at `n_max`. The signal photons of source A and source B meet on a
//! balanced beam splitter; source B's internal state overlaps source A's with
//! squared modulus `I`. Heralds and the two signal outputs are threshold detectors.
//! The visibility compares four-fold coincidences at `I = floor_i0` against the
//! fully distinguishable baseline `I = 0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::Indistinguishability;

/// Truncation error above which [`fourfold_visibility`] attaches a warning.
pub const TRUNCATION_WARNING: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdcSourceModel {
    /// Mean number of pairs per pump pulse.
    pub nbar: f64,
    /// Internal-state overlap of the two sources' photons at zero delay.
    pub floor_i0: f64,
    pub herald_efficiency: f64,
    /// Transmission from source to signal detector click.
    pub signal_efficiency: f64,
    /// Largest pair number kept per source.
    pub n_max: usize,
}

impl Default for PdcSourceModel {
    fn default() -> Self {
        Self {
            nbar: 0.12,
            // reproduces V = 0.802 at nbar = 0.0165 with the default efficiencies
            floor_i0: 0.839,
            herald_efficiency: 0.30,
            signal_efficiency: 0.30,
            n_max: 3,
        }
    }
}

impl PdcSourceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::invalid(
                "nbar",
                format!("{} must be >= 0", self.nbar),
            ));
        }
        Indistinguishability::new(self.floor_i0)?;
        for (name, v) in [
            ("herald_efficiency", self.herald_efficiency),
            ("signal_efficiency", self.signal_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, format!("{v} not in (0, 1]")));
            }
        }
        if self.n_max < 2 {
            return Err(Error::invalid("n_max", "must be at least 2"));
        }
        Ok(())
    }

    /// Probability per pulse that a single source's herald clicks.
    pub fn herald_probability(&self) -> Result<f64> {
        let p = pair_distribution(self.nbar, self.n_max)?;
        Ok(p.iter()
            .enumerate()
            .map(|(n, pn)| pn * click(n, self.herald_efficiency))
            .sum())
    }
}

/// Thermal pair-number distribution over `0..=n_max`, renormalized.
pub fn pair_distribution(nbar: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::invalid("nbar", format!("{nbar} must be >= 0")));
    }
    let lambda = nbar / (1.0 + nbar);
    let raw: Vec<f64> = (0..=n_max).map(|n| lambda.powi(n as i32)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

fn click(photons: usize, efficiency: f64) -> f64 {
    1.0 - (1.0 - efficiency).powi(photons as i32)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Output distribution of `n` photons in input `a` and `k` in input `b`, all in one
/// internal mode, over the number `m` leaving through output `c`.
fn beam_splitter_distribution(n: usize, k: usize) -> Vec<f64> {
    let total = n + k;
    let mut coef = vec![0.0; total + 1];
    for i in 0..=n {
        for j in 0..=k {
            let s = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            coef[i + j] += s * binomial(n, i) * binomial(k, j);
        }
    }
    let norm = 2f64.powi(total as i32).sqrt() * (factorial(n) * factorial(k)).sqrt();
    coef.iter()
        .enumerate()
        .map(|(m, c)| {
            let amp = c * (factorial(m) * factorial(total - m)).sqrt() / norm;
            amp * amp
        })
        .collect()
}

/// Probability that both beam-splitter outputs click for `na` photons from A and
/// `nb` from B with internal overlap `indist`.
fn signal_coincidence(na: usize, nb: usize, indist: f64, efficiency: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..=nb {
        // k of B's photons share A's internal mode, the rest are orthogonal
        let w = binomial(nb, k) * indist.powi(k as i32) * (1.0 - indist).powi((nb - k) as i32);
        if w == 0.0 {
            continue;
        }
        let shared = beam_splitter_distribution(na, k);
        let other = beam_splitter_distribution(0, nb - k);
        for (m1, p1) in shared.iter().enumerate() {
            for (m2, p2) in other.iter().enumerate() {
                let in_c = m1 + m2;
                let in_d = (na + k - m1) + (nb - k - m2);
                total += w * p1 * p2 * click(in_c, efficiency) * click(in_d, efficiency);
            }
        }
    }
    total
}

/// Four-fold coincidence weight, up to a factor common to every `indist`.
fn fourfold_weight(model: &PdcSourceModel, indist: f64, n_max: usize) -> f64 {
    let lambda = model.nbar / (1.0 + model.nbar);
    // the common factor (1−λ)²λ² is dropped so the n̄ → 0 limit stays finite
    let weight = |n: usize| lambda.powi(n as i32 - 1) * click(n, model.herald_efficiency);
    let mut total = 0.0;
    for na in 1..=n_max {
        for nb in 1..=n_max {
            total += weight(na)
                * weight(nb)
                * signal_coincidence(na, nb, indist, model.signal_efficiency);
        }
    }
    total
}

fn visibility_at(model: &PdcSourceModel, n_max: usize) -> f64 {
    let dip = fourfold_weight(model, model.floor_i0, n_max);
    let baseline = fourfold_weight(model, 0.0, n_max);
    1.0 - dip / baseline
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceVisibility {
    pub value: f64,
    /// Change of the result when one more pair order is included.
    pub truncation_estimate: f64,
    pub warning: Option<String>,
}

/// HOM visibility of the heralded four-fold measurement.
pub fn fourfold_visibility(model: &PdcSourceModel) -> Result<SourceVisibility> {
    model.validate()?;
    let value = visibility_at(model, model.n_max);
    let truncation_estimate = (visibility_at(model, model.n_max + 1) - value).abs();
    let warning = (truncation_estimate > TRUNCATION_WARNING).then(|| {
        format!(
            "n_max = {} truncates the pair distribution at nbar = {}: next order changes V by {:.2e}",
            model.n_max, model.nbar, truncation_estimate
        )
    });
    Ok(SourceVisibility {
        value,
        truncation_estimate,
        warning,
    })
}

/// Bisects `floor_i0` so that the four-fold visibility at `nbar` equals `target_v`
/// within 1e-6. Other fields are taken from `template`.
pub fn calibrate_floor(
    target_v: f64,
    nbar: f64,
    template: &PdcSourceModel,
) -> Result<Indistinguishability> {
    let mut model = PdcSourceModel {
        nbar,
        floor_i0: 1.0,
        ..template.clone()
    };
    model.validate()?;
    let v_max = visibility_at(&model, model.n_max);
    if !(target_v >= 0.0) || target_v > v_max + 1e-6 {
        return Err(Error::Unachievable(format!(
            "visibility {target_v} not reachable at nbar = {nbar} (maximum {v_max:.6})"
        )));
    }
    if target_v >= v_max {
        return Indistinguishability::new(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        model.floor_i0 = mid;
        let v = visibility_at(&model, model.n_max);
        if (v - target_v).abs() < 1e-9 {
            return Indistinguishability::new(mid);
        }
        if v < target_v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Indistinguishability::new(0.5 * (lo + hi))
}

/// Visibility against `nbar` for an otherwise fixed model.
pub fn visibility_curve(model: &PdcSourceModel, nbars: &[f64]) -> Result<Vec<(f64, f64)>> {
    nbars
        .iter()
        .map(|&nbar| {
            let m = PdcSourceModel {
                nbar,
                ..model.clone()
            };
            Ok((nbar, fourfold_visibility(&m)?.value))
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(curve: &[(f64, f64)], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["nbar", "V"])?;
    for (n, v) in curve {
        wr.write_record([n.to_string(), v.to_string()])?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
