//! First- and second-order correlations of two mode-synthesized photons meeting on
//! a balanced beam splitter, detected time-bin resolved behind both outputs.
//!
//! With partial internal overlap `I` the cross-correlation between the `+` detector
//! at bin τ and the `−` detector at bin τ′ reads
//!
//! ```text
//! G(τ,τ′) = [|α_τ|²|β_τ′|² + |α_τ′|²|β_τ|² − 2·I·Re(α_τ β_τ′ conj(α_τ′ β_τ))] / 4
//! ```
//!
//! which at `I = 1` is `|α_τ β_τ′ − α_τ′ β_τ|² / 4`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{inner_product, restrict, ModeSubset, ModeVector};

/// Squared overlap of the photons' internal states.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Indistinguishability(f64);

impl Indistinguishability {
    pub const PERFECT: Indistinguishability = Indistinguishability(1.0);
    pub const NONE: Indistinguishability = Indistinguishability(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::invalid(
                "indistinguishability",
                format!("{value} not in [0, 1]"),
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Indistinguishability {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Indistinguishability> for f64 {
    fn from(i: Indistinguishability) -> f64 {
        i.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    window: usize,
    /// Row-major `G(τ,τ′)`.
    g11: Vec<f64>,
    g1_plus: Vec<f64>,
    g1_minus: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn get(&self, tau: usize, tau_prime: usize) -> f64 {
        self.g11[tau * self.window + tau_prime]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.g11.chunks(self.window)
    }

    pub fn g1_plus(&self) -> &[f64] {
        &self.g1_plus
    }

    pub fn g1_minus(&self) -> &[f64] {
        &self.g1_minus
    }

    /// Writes `G(τ,τ′)` with one row per τ.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        for row in self.rows() {
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn check_windows(alpha: &ModeVector, beta: &ModeVector) -> Result<()> {
    if alpha.window() != beta.window() {
        return Err(Error::Dimension {
            left: alpha.window(),
            right: beta.window(),
        });
    }
    Ok(())
}

/// Single-detector counts per bin; identical for both detectors.
pub fn g1_counts(alpha: &ModeVector, beta: &ModeVector) -> Result<(Vec<f64>, Vec<f64>)> {
    check_windows(alpha, beta)?;
    let g1: Vec<f64> = alpha
        .amplitudes()
        .iter()
        .zip(beta.amplitudes())
        .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()) / 2.0)
        .collect();
    Ok((g1.clone(), g1))
}

pub fn g11_matrix(
    alpha: &ModeVector,
    beta: &ModeVector,
    indist: Indistinguishability,
) -> Result<CorrelationMatrix> {
    let (g1_plus, g1_minus) = g1_counts(alpha, beta)?;
    let w = alpha.window();
    let a = alpha.amplitudes();
    let b = beta.amplitudes();
    let i = indist.value();
    let mut g11 = vec![0.0; w * w];
    for t in 0..w {
        for tp in 0..w {
            let direct = a[t].norm_sqr() * b[tp].norm_sqr() + a[tp].norm_sqr() * b[t].norm_sqr();
            let exchange = (a[t] * b[tp] * (a[tp] * b[t]).conj()).re;
            // clamp rounding below zero; the exact value is non-negative
            g11[t * w + tp] = ((direct - 2.0 * i * exchange) / 4.0).max(0.0);
        }
    }
    Ok(CorrelationMatrix {
        window: w,
        g11,
        g1_plus,
        g1_minus,
    })
}

/// Same-bin coincidences summed over `s`.
pub fn local_correlation(m: &CorrelationMatrix, s: &ModeSubset) -> Result<f64> {
    s.check_window(m.window)?;
    Ok(s.bins().map(|t| m.get(t, t)).sum())
}

/// Coincidences summed over every bin pair in `s`.
pub fn global_correlation(m: &CorrelationMatrix, s: &ModeSubset) -> Result<f64> {
    s.check_window(m.window)?;
    Ok(s.bins()
        .flat_map(|t| s.bins().map(move |tp| (t, tp)))
        .map(|(t, tp)| m.get(t, tp))
        .sum())
}

/// `[(α†α)(β†β) − I·|α†β|²] / 2` evaluated on the vectors restricted to `s`.
pub fn global_correlation_closed_form(
    alpha: &ModeVector,
    beta: &ModeVector,
    indist: Indistinguishability,
    s: &ModeSubset,
) -> Result<f64> {
    check_windows(alpha, beta)?;
    let a = restrict(alpha, s)?;
    let b = restrict(beta, s)?;
    let overlap = inner_product(&a, &b)?.norm_sqr();
    Ok((a.norm_sqr() * b.norm_sqr() - indist.value() * overlap) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMode {
    Local,
    Global,
}

/// Normalized correlation `g`.
///
/// Global: `G_global(S) / (G⁽¹⁾₊(S)·G⁽¹⁾₋(S))` with the single-detector counts summed
/// over `S`. Local: `G_local(S) / Σ_{τ∈S} G⁽¹⁾₊,τ·G⁽¹⁾₋,τ`.
pub fn normalized_g(
    corr: f64,
    alpha: &ModeVector,
    beta: &ModeVector,
    s: &ModeSubset,
    mode: CorrelationMode,
) -> Result<f64> {
    let (plus, minus) = g1_counts(alpha, beta)?;
    s.check_window(alpha.window())?;
    let denom = match mode {
        CorrelationMode::Global => {
            let p: f64 = s.bins().map(|t| plus[t]).sum();
            let m: f64 = s.bins().map(|t| minus[t]).sum();
            p * m
        }
        CorrelationMode::Local => s.bins().map(|t| plus[t] * minus[t]).sum(),
    };
    if denom <= 0.0 {
        return Err(Error::UndefinedCorrelation(
            "neither photon populates the selected bins".into(),
        ));
    }
    Ok(corr / denom)
}

/// `V = 1 − 2g`. Noisy inputs can push this outside `[0, 1]`; see
/// [`clamped_visibility`].
pub fn visibility(g: f64) -> f64 {
    1.0 - 2.0 * g
}

pub fn clamped_visibility(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Visibility above one half cannot be produced by classical fields.
pub fn is_nonclassical(v: f64) -> bool {
    v > 0.5
}
