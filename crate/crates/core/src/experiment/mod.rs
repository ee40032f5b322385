//! End-to-end delay scans: synthesize both photons, evaluate local and global
//! coincidences per bin subset, sample shot noise, fit the dips and normalize by a
//! companion single-bin reference measurement.

pub mod fit;
mod output;
pub mod sampling;
mod scenario;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fit::{dip_model, fit_dip, fit_dip_with_shape, visibility_error, DipFit};
pub use output::{write_combined_csv, write_outputs, write_series_csv, SeriesSummary, Summary};
pub use sampling::{sample_counts, stream_rng, StreamKind, REFERENCE_SUBSET};
pub use scenario::{
    default_delays, Detection, PhotonSpec, ScanSpec, Scenario, SubsetSpec, DEFAULT_TRANSMISSION,
};

use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::interference::{
    g11_matrix, global_correlation, global_correlation_closed_form, local_correlation,
    Indistinguishability,
};
use crate::modes::{inner_product, normalize, restrict, ModeSubset, ModeVector};
use crate::wavepacket::indistinguishability;

/// Product of stage efficiencies, each in `(0, 1]`.
pub fn klyshko_budget<S: AsRef<str>>(stages: &[(S, f64)]) -> Result<f64> {
    let bad: Vec<Diagnostic> = stages
        .iter()
        .filter(|(_, e)| !(*e > 0.0 && *e <= 1.0))
        .map(|(name, e)| {
            Diagnostic::new(
                DiagnosticKind::InvalidConfig,
                format!("stage `{}` efficiency {e} not in (0, 1]", name.as_ref()),
            )
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    Ok(stages.iter().map(|(_, e)| e).product())
}

/// `(V/V₀, σ)` with first-order error propagation.
pub fn normalize_visibility(v: f64, sigma_v: f64, v0: f64, sigma_v0: f64) -> Result<(f64, f64)> {
    if !(v0 > 0.0) {
        return Err(Error::UndefinedNormalization(v0));
    }
    let err = ((sigma_v / v0).powi(2) + (v * sigma_v0 / (v0 * v0)).powi(2)).sqrt();
    Ok((v / v0, err))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    /// From the fit to sampled counts.
    pub sampled: f64,
    pub sampled_error: f64,
    /// From the fit to noiseless expected counts.
    pub expected: f64,
    /// From the expected coincidences at zero delay and at full distinguishability.
    pub model: f64,
}

/// One coincidence trace against delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub expected_probability: Vec<f64>,
    pub expected_counts: Vec<f64>,
    pub counts: Vec<u64>,
    /// Poisson standard deviation `√counts`.
    pub errors: Vec<f64>,
    pub fit: DipFit,
    pub visibility_error: f64,
    pub expected_fit: DipFit,
    /// `1 − G(I₀)/G(0)`.
    pub model_visibility: f64,
    pub normalized: Normalized,
    /// Prediction for the normalized visibility of perfectly indistinguishable
    /// photons; absent when the trace carries no coincidences at all.
    pub ideal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub name: String,
    pub bins: Vec<usize>,
    pub local: Series,
    pub global: Series,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub scenario: String,
    pub seed: u64,
    pub delays: Vec<f64>,
    pub photon_a: ModeVector,
    pub photon_b: ModeVector,
    /// Source-limited visibility `I₀` at zero delay.
    pub source_visibility: f64,
    pub klyshko_budget: f64,
    /// Expected counts per unit coincidence probability.
    pub counts_per_probability: f64,
    pub reference: Series,
    pub subsets: Vec<SubsetResult>,
    pub warnings: Vec<String>,
}

impl ScanResult {
    pub fn subset(&self, name: &str) -> Option<&SubsetResult> {
        self.subsets.iter().find(|s| s.name == name)
    }

    pub fn summary(&self) -> Summary {
        Summary::from_result(self)
    }
}

/// Raw per-delay values: `(probability, expected counts, sampled counts)`.
type Cell = (f64, f64, u64);

struct Row {
    reference: Cell,
    subsets: Vec<[Cell; 2]>,
}

struct RawSeries {
    probability: Vec<f64>,
    expected: Vec<f64>,
    counts: Vec<u64>,
}

impl RawSeries {
    fn collect<'a>(cells: impl Iterator<Item = &'a Cell>) -> Self {
        let mut s = RawSeries {
            probability: Vec::new(),
            expected: Vec::new(),
            counts: Vec::new(),
        };
        for &(p, e, c) in cells {
            s.probability.push(p);
            s.expected.push(e);
            s.counts.push(c);
        }
        s
    }
}

/// Fits and model values of one trace, before normalization.
struct Fitted {
    raw: RawSeries,
    errors: Vec<f64>,
    fit: DipFit,
    visibility_error: f64,
    expected_fit: DipFit,
    model_visibility: f64,
    ideal: Option<f64>,
}

fn fit_series(
    delays: &[f64],
    raw: RawSeries,
    shape: (f64, f64),
    model_visibility: f64,
    ideal: Option<f64>,
) -> Result<Fitted> {
    let counts: Vec<f64> = raw.counts.iter().map(|&c| c as f64).collect();
    let weights: Vec<f64> = counts.iter().map(|c| c.max(1.0).sqrt()).collect();
    let fit = fit_dip_with_shape(delays, &counts, &weights, Some(shape))?;
    let visibility_error = visibility_error(delays, &counts, &fit);
    let exp_weights: Vec<f64> = raw.expected.iter().map(|c| c.max(1.0).sqrt()).collect();
    let expected_fit = fit_dip_with_shape(delays, &raw.expected, &exp_weights, Some(shape))?;
    Ok(Fitted {
        errors: counts.iter().map(|c| c.sqrt()).collect(),
        raw,
        fit,
        visibility_error,
        expected_fit,
        model_visibility,
        ideal,
    })
}

/// Reference visibilities every trace is normalized by.
#[derive(Clone, Copy)]
struct Reference {
    sampled: f64,
    sampled_error: f64,
    expected: f64,
    model: f64,
}

impl Fitted {
    fn as_reference(&self) -> Reference {
        Reference {
            sampled: self.fit.visibility,
            sampled_error: self.visibility_error,
            expected: self.expected_fit.visibility,
            model: self.model_visibility,
        }
    }

    fn finish(self, r: Reference) -> Result<Series> {
        let (sampled, sampled_error) = normalize_visibility(
            self.fit.visibility,
            self.visibility_error,
            r.sampled,
            r.sampled_error,
        )?;
        let expected = normalize_visibility(self.expected_fit.visibility, 0.0, r.expected, 0.0)?.0;
        let model = normalize_visibility(self.model_visibility, 0.0, r.model, 0.0)?.0;
        Ok(Series {
            expected_probability: self.raw.probability,
            expected_counts: self.raw.expected,
            counts: self.raw.counts,
            errors: self.errors,
            fit: self.fit,
            visibility_error: self.visibility_error,
            expected_fit: self.expected_fit,
            model_visibility: self.model_visibility,
            normalized: Normalized {
                sampled,
                sampled_error,
                expected,
                model,
            },
            ideal: self.ideal,
        })
    }
}

fn model_visibility(dip: f64, baseline: f64) -> f64 {
    if baseline > 0.0 {
        1.0 - dip / baseline
    } else {
        0.0
    }
}

/// Normalized visibilities predicted for perfectly indistinguishable photons:
/// `(local, global)`.
pub fn ideal_visibilities(
    alpha: &ModeVector,
    beta: &ModeVector,
    s: &ModeSubset,
) -> Result<(Option<f64>, Option<f64>)> {
    let a = restrict(alpha, s)?;
    let b = restrict(beta, s)?;
    let local_overlap: f64 = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x.norm_sqr() * y.norm_sqr())
        .sum();
    let local = (local_overlap > 0.0).then_some(1.0);
    let global = match (normalize(&a), normalize(&b)) {
        (Ok(a), Ok(b)) => Some(inner_product(&a, &b)?.norm_sqr()),
        _ => None,
    };
    Ok((local, global))
}

/// Runs the full delay scan of `scenario` with its own `rng_seed`.
pub fn run_scan(scenario: &Scenario) -> Result<ScanResult> {
    let prepared = scenario.prepare()?;
    let delays = &prepared.delays;
    let alpha = &prepared.alpha;
    let beta = &prepared.beta;
    let seed = scenario.rng_seed;
    let scale = prepared.counts_per_probability;
    let background = scenario.detection.accidental_rate * scenario.detection.integration_time;
    let i0 = prepared.source.value;

    let reference_mode = ModeVector::new(vec![Complex64::new(1.0, 0.0)])?;
    let reference_subset = ModeSubset::full(1)?;
    let (pa, pb) = (prepared.packet_a, prepared.packet_b);
    let (ra, rb) = (prepared.reference_packet, prepared.reference_packet);

    let cell = |probability: f64, rng_cell: (u32, u32, StreamKind)| -> Cell {
        let expected = probability * scale + background;
        let mut rng = stream_rng(seed, rng_cell.0, rng_cell.1, rng_cell.2);
        (probability, expected, sample_counts(expected, &mut rng))
    };

    let rows: Vec<Row> = delays
        .par_iter()
        .enumerate()
        .map(|(k, &delta)| -> Result<Row> {
            let k = k as u32;
            let i_ref = indistinguishability(&ra, &rb, delta, i0)?;
            let m_ref = g11_matrix(&reference_mode, &reference_mode, i_ref)?;
            let p_ref = local_correlation(&m_ref, &reference_subset)?;
            let reference = cell(p_ref, (k, REFERENCE_SUBSET, StreamKind::Local));

            let i = indistinguishability(&pa, &pb, delta, i0)?;
            let m = g11_matrix(alpha, beta, i)?;
            let subsets = prepared
                .subsets
                .iter()
                .enumerate()
                .map(|(j, (_, s))| -> Result<[Cell; 2]> {
                    let j = j as u32;
                    Ok([
                        cell(local_correlation(&m, s)?, (k, j, StreamKind::Local)),
                        cell(global_correlation(&m, s)?, (k, j, StreamKind::Global)),
                    ])
                })
                .collect::<Result<_>>()?;
            Ok(Row { reference, subsets })
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    if let Some(w) = &prepared.source.warning {
        warnings.push(format!("source: {w}"));
    }

    let i0_ind = Indistinguishability::new(i0)?;
    let reference_model = {
        let dip = global_correlation_closed_form(
            &reference_mode,
            &reference_mode,
            i0_ind,
            &reference_subset,
        )?;
        let base = global_correlation_closed_form(
            &reference_mode,
            &reference_mode,
            Indistinguishability::NONE,
            &reference_subset,
        )?;
        model_visibility(dip, base)
    };
    let reference = fit_series(
        delays,
        RawSeries::collect(rows.iter().map(|r| &r.reference)),
        prepared.reference_shape,
        reference_model,
        Some(1.0),
    )?;
    collect_warnings(&mut warnings, "reference", &reference);
    let reference_values = reference.as_reference();

    let m_dip = g11_matrix(alpha, beta, i0_ind)?;
    let m_base = g11_matrix(alpha, beta, Indistinguishability::NONE)?;
    let mut subsets = Vec::with_capacity(prepared.subsets.len());
    for (j, (name, s)) in prepared.subsets.iter().enumerate() {
        let (ideal_local, ideal_global) = ideal_visibilities(alpha, beta, s)?;
        let local = fit_series(
            delays,
            RawSeries::collect(rows.iter().map(|r| &r.subsets[j][0])),
            prepared.shape,
            model_visibility(
                local_correlation(&m_dip, s)?,
                local_correlation(&m_base, s)?,
            ),
            ideal_local,
        )?;
        collect_warnings(&mut warnings, &format!("{name}/local"), &local);
        let global = fit_series(
            delays,
            RawSeries::collect(rows.iter().map(|r| &r.subsets[j][1])),
            prepared.shape,
            model_visibility(
                global_correlation(&m_dip, s)?,
                global_correlation(&m_base, s)?,
            ),
            ideal_global,
        )?;
        collect_warnings(&mut warnings, &format!("{name}/global"), &global);
        subsets.push(SubsetResult {
            name: name.clone(),
            bins: s.bins().collect(),
            local: local.finish(reference_values)?,
            global: global.finish(reference_values)?,
        });
    }

    let mut reference = reference.finish(reference_values)?;
    // V₀/V₀ is exactly one
    reference.normalized.sampled_error = 0.0;

    Ok(ScanResult {
        scenario: scenario.name.clone(),
        seed,
        delays: delays.clone(),
        photon_a: alpha.clone(),
        photon_b: beta.clone(),
        source_visibility: i0,
        klyshko_budget: prepared.klyshko_budget,
        counts_per_probability: scale,
        reference,
        subsets,
        warnings,
    })
}

fn collect_warnings(out: &mut Vec<String>, label: &str, f: &Fitted) {
    for w in &f.fit.warnings {
        out.push(format!("{label}: {w}"));
    }
    for w in &f.expected_fit.warnings {
        out.push(format!("{label} (expected): {w}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn klyshko_examples() {
        let stages = [
            ("waveguide", 0.75),
            ("source to network", 0.75),
            ("loop", 0.80),
            ("network to detection", 0.75),
            ("detector", 0.90),
        ];
        assert!((klyshko_budget(&stages).unwrap() - 0.30375).abs() < 1e-15);
        assert_eq!(klyshko_budget(&[("only", 1.0)]).unwrap(), 1.0);
        assert_eq!(klyshko_budget::<&str>(&[]).unwrap(), 1.0);
        assert!(matches!(
            klyshko_budget(&[("bad", 1.2)]),
            Err(Error::Validation(_))
        ));
        assert!(klyshko_budget(&[("bad", 0.0)]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let (v, _) = normalize_visibility(0.2, 0.01, 0.8, 0.02).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        assert_eq!(normalize_visibility(0.7, 0.0, 0.7, 0.0).unwrap().0, 1.0);
        let (v, e) = normalize_visibility(0.0, 0.05, 0.8, 0.03).unwrap();
        assert_eq!(v, 0.0);
        assert!((e - 0.05 / 0.8).abs() < 1e-15);
        assert!(matches!(
            normalize_visibility(0.2, 0.0, 0.0, 0.0),
            Err(Error::UndefinedNormalization(_))
        ));
    }

    #[test]
    fn ideal_predictions() {
        let s = 0.5f64.sqrt();
        let a = ModeVector::from_real(&[s, s]).unwrap();
        let b = ModeVector::from_real(&[s, -s]).unwrap();
        let full = ModeSubset::full(2).unwrap();
        let (l, g) = ideal_visibilities(&a, &b, &full).unwrap();
        assert_eq!(l, Some(1.0));
        assert!(g.unwrap() < 1e-30);
        let disjoint = ModeVector::from_real(&[1.0, 0.0]).unwrap();
        let other = ModeVector::from_real(&[0.0, 1.0]).unwrap();
        let (l, g) = ideal_visibilities(&disjoint, &other, &full).unwrap();
        assert_eq!(l, None);
        assert_eq!(g, Some(0.0));
    }
}
