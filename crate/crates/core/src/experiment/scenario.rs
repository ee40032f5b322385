use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::klyshko_budget;
use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::modes::{ModeSubset, ModeVector};
use crate::network::{synthesize, validate_pattern, LoopConfig, SwitchingPattern};
use crate::source::{fourfold_visibility, PdcSourceModel, SourceVisibility};
use crate::wavepacket::GaussianPacket;

/// Signal-path stages outside the loop, excluding the detector.
pub const DEFAULT_TRANSMISSION: [(&str, f64); 3] = [
    ("waveguide", 0.75),
    ("source_to_network", 0.75),
    ("network_to_detection", 0.75),
];

/// A photon given either as explicit amplitudes `[[re, im], ...]` or as the output
/// of a switching pattern run through the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PhotonSpec {
    ModeVector(Vec<[f64; 2]>),
    Pattern(SwitchingPattern),
}

impl PhotonSpec {
    pub fn from_vector(v: &ModeVector) -> Self {
        PhotonSpec::ModeVector(v.amplitudes().iter().map(|a| [a.re, a.im]).collect())
    }

    fn window(&self, cfg: &LoopConfig) -> usize {
        match self {
            PhotonSpec::ModeVector(v) => v.len(),
            PhotonSpec::Pattern(_) => cfg.window,
        }
    }

    /// Loop roundtrips the photon spends before its last extraction.
    fn roundtrips(&self) -> usize {
        match self {
            PhotonSpec::ModeVector(_) => 0,
            PhotonSpec::Pattern(p) => p.final_roundtrip(),
        }
    }

    pub fn build(&self, cfg: &LoopConfig) -> Result<ModeVector> {
        match self {
            PhotonSpec::ModeVector(v) => {
                ModeVector::new(v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
            }
            PhotonSpec::Pattern(p) => synthesize(p, cfg),
        }
    }
}

/// Named set of bins, indexed from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSpec {
    pub name: String,
    pub bins: Vec<usize>,
}

/// Delay grid: explicit `delays` when given, otherwise `points` evenly spaced values
/// from `start` to `stop`. Seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delays: Option<Vec<f64>>,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            delays: None,
            start: -6e-12,
            stop: 6e-12,
            points: 41,
        }
    }
}

impl ScanSpec {
    pub fn delays(&self) -> Vec<f64> {
        match &self.delays {
            Some(d) => d.clone(),
            None => linspace(self.start, self.stop, self.points),
        }
    }
}

fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// 41 points over ±6 ps.
pub fn default_delays() -> Vec<f64> {
    ScanSpec::default().delays()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Detection {
    /// Hz.
    pub trigger_rate: f64,
    /// Seconds per delay point.
    pub integration_time: f64,
    pub detector_efficiency: f64,
    /// Signal-path `(stage, efficiency)` pairs outside the loop.
    pub transmission: Vec<(String, f64)>,
    /// Flat background coincidences per second.
    pub accidental_rate: f64,
}

impl Default for Detection {
    fn default() -> Self {
        Self {
            trigger_rate: 63e3,
            integration_time: 2000.0,
            detector_efficiency: 0.90,
            transmission: DEFAULT_TRANSMISSION
                .iter()
                .map(|(n, e)| (n.to_string(), *e))
                .collect(),
            accidental_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default, rename = "loop")]
    pub loop_config: LoopConfig,
    pub photon_a: PhotonSpec,
    pub photon_b: PhotonSpec,
    #[serde(default)]
    pub wavepacket: GaussianPacket,
    #[serde(default)]
    pub source: PdcSourceModel,
    /// Empty means a single subset `full` covering the window.
    #[serde(default)]
    pub subsets: Vec<SubsetSpec>,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub detection: Detection,
    #[serde(default)]
    pub rng_seed: u64,
}

pub(crate) struct Prepared {
    pub alpha: ModeVector,
    pub beta: ModeVector,
    pub subsets: Vec<(String, ModeSubset)>,
    pub delays: Vec<f64>,
    pub packet_a: GaussianPacket,
    pub packet_b: GaussianPacket,
    pub reference_packet: GaussianPacket,
    /// `(center, width)` of the expected dip.
    pub shape: (f64, f64),
    pub reference_shape: (f64, f64),
    pub source: SourceVisibility,
    pub counts_per_probability: f64,
    pub klyshko_budget: f64,
}

fn diag(kind: DiagnosticKind, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(kind, msg)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Window shared by both photons; the larger one when they disagree.
    pub fn window(&self) -> usize {
        self.photon_a
            .window(&self.loop_config)
            .max(self.photon_b.window(&self.loop_config))
    }

    pub fn subset_specs(&self) -> Vec<SubsetSpec> {
        if self.subsets.is_empty() {
            vec![SubsetSpec {
                name: "full".into(),
                bins: (0..self.window()).collect(),
            }]
        } else {
            self.subsets.clone()
        }
    }

    /// Every static problem of the scenario; empty when it can run.
    pub fn validate(&self) -> Vec<Diagnostic> {
        use DiagnosticKind::*;
        let mut out = Vec::new();
        let cfg = &self.loop_config;
        let uses_loop = [&self.photon_a, &self.photon_b]
            .iter()
            .any(|p| matches!(p, PhotonSpec::Pattern(_)));
        if uses_loop {
            out.extend(cfg.diagnostics());
        }
        for (label, photon) in [("photon_a", &self.photon_a), ("photon_b", &self.photon_b)] {
            match photon {
                PhotonSpec::Pattern(p) => {
                    for d in validate_pattern(p, cfg) {
                        if !cfg.diagnostics().contains(&d) {
                            out.push(diag(d.kind, format!("{label}: {}", d.message)));
                        }
                    }
                }
                PhotonSpec::ModeVector(v) => {
                    if v.is_empty() {
                        out.push(diag(
                            InvalidScenario,
                            format!("{label}: mode_vector is empty"),
                        ));
                    } else if v.iter().flatten().any(|x| !x.is_finite()) {
                        out.push(diag(
                            InvalidScenario,
                            format!("{label}: mode_vector not finite"),
                        ));
                    } else {
                        let n2: f64 = v.iter().map(|[re, im]| re * re + im * im).sum();
                        if n2 > 1.0 + 1e-12 {
                            out.push(diag(
                                InvalidScenario,
                                format!("{label}: mode_vector squared norm {n2} exceeds 1"),
                            ));
                        }
                    }
                }
            }
        }
        let (wa, wb) = (self.photon_a.window(cfg), self.photon_b.window(cfg));
        if wa != wb {
            out.push(diag(
                InvalidScenario,
                format!("photon windows differ: photon_a has {wa} bins, photon_b has {wb}"),
            ));
        }

        let window = self.window();
        let mut names = std::collections::BTreeSet::new();
        for s in &self.subset_specs() {
            let ok_name = !s.name.is_empty()
                && s.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok_name {
                out.push(diag(
                    InvalidScenario,
                    format!("subsets: name `{}` must be non-empty [A-Za-z0-9_-]", s.name),
                ));
            }
            if s.name == "reference" {
                out.push(diag(
                    InvalidScenario,
                    "subsets: name `reference` is reserved",
                ));
            }
            if !names.insert(s.name.clone()) {
                out.push(diag(
                    InvalidScenario,
                    format!("subsets: duplicate name `{}`", s.name),
                ));
            }
            if s.bins.is_empty() {
                out.push(diag(
                    InvalidScenario,
                    format!("subsets.{}: no bins", s.name),
                ));
            }
            for &b in &s.bins {
                if b >= window {
                    out.push(diag(
                        OutOfWindow,
                        format!("subsets.{}: bin {b} outside window of {window}", s.name),
                    ));
                }
            }
        }

        let delays = self.scan.delays();
        if delays.len() < super::fit::MIN_POINTS {
            out.push(diag(
                InvalidScenario,
                format!(
                    "scan: {} delays, need at least {}",
                    delays.len(),
                    super::fit::MIN_POINTS
                ),
            ));
        }
        if delays.iter().any(|d| !d.is_finite()) {
            out.push(diag(InvalidScenario, "scan: delays must be finite"));
        } else if delays.windows(2).any(|w| w[1] <= w[0]) {
            out.push(diag(
                InvalidScenario,
                "scan: delays must be strictly increasing",
            ));
        }

        let det = &self.detection;
        if !(det.integration_time > 0.0 && det.integration_time.is_finite()) {
            out.push(diag(
                InvalidConfig,
                "detection.integration_time must be positive",
            ));
        }
        if !(det.trigger_rate > 0.0 && det.trigger_rate.is_finite()) {
            out.push(diag(
                InvalidConfig,
                "detection.trigger_rate must be positive",
            ));
        }
        if !(det.accidental_rate >= 0.0 && det.accidental_rate.is_finite()) {
            out.push(diag(
                InvalidConfig,
                "detection.accidental_rate must be >= 0",
            ));
        }
        if let Err(Error::Validation(d)) = self.stage_budget() {
            out.extend(d);
        }
        for r in [self.wavepacket.validate(), self.source.validate()] {
            if let Err(e) = r {
                out.push(diag(InvalidConfig, e.to_string()));
            }
        }
        out
    }

    /// Every stage of the signal path including loop and detector.
    pub fn efficiency_stages(&self) -> Vec<(String, f64)> {
        let det = &self.detection;
        let mut stages = det.transmission.clone();
        stages.insert(
            2.min(stages.len()),
            ("loop".into(), self.loop_config.loop_efficiency),
        );
        stages.push(("detector".into(), det.detector_efficiency));
        stages
    }

    fn stage_budget(&self) -> Result<f64> {
        klyshko_budget(&self.efficiency_stages())
    }

    pub(crate) fn prepare(&self) -> Result<Prepared> {
        let diags = self.validate();
        if !diags.is_empty() {
            return Err(Error::Validation(diags));
        }
        let cfg = &self.loop_config;
        let alpha = self.photon_a.build(cfg)?.with_label("photon_a");
        let beta = self.photon_b.build(cfg)?.with_label("photon_b");
        let window = alpha.window();
        let subsets = self
            .subset_specs()
            .into_iter()
            .map(|s| Ok((s.name, ModeSubset::new(s.bins, window)?)))
            .collect::<Result<Vec<_>>>()?;

        let packet_a = self.wavepacket.after_roundtrips(self.photon_a.roundtrips());
        let packet_b = self.wavepacket.after_roundtrips(self.photon_b.roundtrips());
        let reference_packet = self.wavepacket;
        let width = |a: &GaussianPacket, b: &GaussianPacket| {
            (a.sigma_t * a.sigma_t + b.sigma_t * b.sigma_t).sqrt()
        };

        let source = fourfold_visibility(&self.source)?;
        let herald = self.source.herald_probability()?;
        let det = &self.detection;
        let signal: f64 =
            det.transmission.iter().map(|(_, e)| e).product::<f64>() * det.detector_efficiency;
        let counts_per_probability =
            herald * herald * signal * signal * det.trigger_rate * det.integration_time;

        Ok(Prepared {
            alpha,
            beta,
            subsets,
            delays: self.scan.delays(),
            packet_a,
            packet_b,
            reference_packet,
            shape: (0.0, width(&packet_a, &packet_b)),
            reference_shape: (0.0, width(&reference_packet, &reference_packet)),
            source,
            counts_per_probability,
            klyshko_budget: self.stage_budget()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Scenario {
        Scenario::from_json(
            r#"{"photon_a": {"mode_vector": [[1,0]]}, "photon_b": {"mode_vector": [[1,0]]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults() {
        let s = minimal();
        assert!(s.validate().is_empty());
        assert_eq!(s.scan.delays().len(), 41);
        assert!((s.scan.delays()[40] - 6e-12).abs() < 1e-24);
        assert!((s.stage_budget().unwrap() - 0.30375).abs() < 1e-15);
        assert_eq!(s.subset_specs()[0].bins, vec![0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = Scenario::from_json(
            r#"{"photon_a": {"mode_vector": [[1,0]]}, "photon_b": {"mode_vector": [[1,0]]}, "detections": {}}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("detections"));
    }

    #[test]
    fn validation_aggregates() {
        let mut s = minimal();
        s.photon_b = PhotonSpec::ModeVector(vec![[1.0, 0.0], [1.0, 0.0]]);
        s.subsets = vec![SubsetSpec {
            name: "x y".into(),
            bins: vec![5],
        }];
        s.scan.delays = Some(vec![0.0, 1.0, 0.5]);
        s.detection.integration_time = 0.0;
        let kinds: Vec<_> = s.validate().into_iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DiagnosticKind::OutOfWindow));
        assert!(kinds.contains(&DiagnosticKind::InvalidConfig));
        assert!(
            kinds
                .iter()
                .filter(|k| **k == DiagnosticKind::InvalidScenario)
                .count()
                >= 4
        );
        assert!(matches!(s.prepare(), Err(Error::Validation(_))));
    }
}
