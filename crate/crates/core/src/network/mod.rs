//! Single-photon evolution through the time-multiplexed fiber loop.
//!
//! Each roundtrip applies the programmed coin to the (H, V) amplitudes of every bin,
//! delays H by one bin spacing relative to V, and attenuates by the loop
//! transmission. Out-coupled amplitudes leave the loop and are collected into a
//! [`ModeVector`] indexed by bin.

mod compile;
mod jones;
mod pattern;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use compile::{
    compile_pattern, compile_pattern_compensated, quarter_phase_form, required_roundtrips,
};
pub use jones::{coin_matrix, jones_eom, jones_qwp, CoinSetting, JonesMatrix};
pub use pattern::{validate_pattern, InCoupling, OutCoupling, SwitchingPattern};

use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::modes::{ModeVector, Polarization};

/// Amplitudes that would be pushed past the window below this size are dropped
/// as rounding residue instead of raising an overflow.
const OVERFLOW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Seconds between adjacent time bins.
    pub bin_spacing: f64,
    /// Seconds per loop roundtrip.
    pub roundtrip_time: f64,
    /// Intensity transmission per roundtrip.
    pub loop_efficiency: f64,
    pub window: usize,
    pub max_roundtrips: usize,
    /// Seconds needed by an EOM to change setting.
    pub eom_switch_time: f64,
    /// Reject custom coin angles during validation.
    pub strict_hardware: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            bin_spacing: 105e-9,
            roundtrip_time: 2.3e-6,
            loop_efficiency: 0.80,
            window: 8,
            max_roundtrips: 8,
            eom_switch_time: 10e-9,
            strict_hardware: false,
        }
    }
}

impl LoopConfig {
    /// Lossless copy, used for pattern compilation and oracle checks.
    pub fn lossless(&self) -> Self {
        Self {
            loop_efficiency: 1.0,
            ..self.clone()
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        if !(self.loop_efficiency > 0.0 && self.loop_efficiency <= 1.0) {
            diags.push(Diagnostic::new(
                DiagnosticKind::InvalidConfig,
                format!("loop efficiency {} not in (0, 1]", self.loop_efficiency),
            ));
        }
        if self.window == 0 {
            diags.push(Diagnostic::new(
                DiagnosticKind::InvalidConfig,
                "window must hold at least one bin",
            ));
        }
        if !(self.bin_spacing > 0.0) || !(self.eom_switch_time >= 0.0) {
            diags.push(Diagnostic::new(
                DiagnosticKind::InvalidConfig,
                "bin spacing must be positive and switch time non-negative",
            ));
        }
        if !(self.roundtrip_time > self.window as f64 * self.bin_spacing) {
            diags.push(Diagnostic::new(
                DiagnosticKind::Interlacing,
                format!(
                    "roundtrip time {:e} s does not exceed window {} x bin spacing {:e} s",
                    self.roundtrip_time, self.window, self.bin_spacing
                ),
            ));
        }
        diags
    }
}

/// Photon amplitudes inside the loop over (bin, polarization).
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    amplitudes: Vec<[Complex64; 2]>,
    roundtrip: usize,
}

impl LoopState {
    /// Unit amplitude in one (bin, polarization) at roundtrip 0.
    pub fn inject(window: usize, bin: usize, pol: Polarization) -> Result<Self> {
        if bin >= window {
            return Err(Error::Bounds { bin, window });
        }
        let mut amplitudes = vec![[Complex64::new(0.0, 0.0); 2]; window];
        amplitudes[bin][pol.index()] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            roundtrip: 0,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<[Complex64; 2]>, roundtrip: usize) -> Self {
        Self {
            amplitudes,
            roundtrip,
        }
    }

    pub fn amplitude(&self, bin: usize, pol: Polarization) -> Complex64 {
        self.amplitudes[bin][pol.index()]
    }

    pub fn amplitudes(&self) -> &[[Complex64; 2]] {
        &self.amplitudes
    }

    pub fn roundtrip(&self) -> usize {
        self.roundtrip
    }

    pub fn window(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|p| p[0].norm_sqr() + p[1].norm_sqr())
            .sum()
    }

    fn take(&mut self, bin: usize, pol: Polarization) -> Complex64 {
        std::mem::replace(
            &mut self.amplitudes[bin][pol.index()],
            Complex64::new(0.0, 0.0),
        )
    }
}

/// One roundtrip: coin per bin, H delayed by one bin, uniform √η attenuation.
pub fn step(
    state: &LoopState,
    coins: &BTreeMap<usize, CoinSetting>,
    cfg: &LoopConfig,
) -> Result<LoopState> {
    if state.roundtrip >= cfg.max_roundtrips {
        return Err(Error::invalid(
            "state",
            format!(
                "roundtrip {} already at the maximum of {}",
                state.roundtrip, cfg.max_roundtrips
            ),
        ));
    }
    let w = state.window();
    let zero = Complex64::new(0.0, 0.0);
    let attenuation = cfg.loop_efficiency.sqrt();
    let mut next = vec![[zero; 2]; w];

    for (bin, &[h, v]) in state.amplitudes.iter().enumerate() {
        let m = coin_matrix(coins.get(&bin).copied().unwrap_or_default());
        let h_out = m[(0, 0)] * h + m[(0, 1)] * v;
        let v_out = m[(1, 0)] * h + m[(1, 1)] * v;
        next[bin][1] += v_out * attenuation;
        if bin + 1 < w {
            next[bin + 1][0] += h_out * attenuation;
        } else if h_out.norm() > OVERFLOW_TOLERANCE {
            return Err(Error::WindowOverflow {
                bin,
                window: w,
                roundtrip: state.roundtrip,
            });
        }
    }

    Ok(LoopState {
        amplitudes: next,
        roundtrip: state.roundtrip + 1,
    })
}

/// Evolves a photon injected at `input` under `pattern` and returns the coherent sum
/// of all out-coupled amplitudes, indexed by bin.
pub fn run_loop(
    input: (usize, Polarization),
    pattern: &SwitchingPattern,
    cfg: &LoopConfig,
) -> Result<ModeVector> {
    let diags = validate_pattern(pattern, cfg);
    if !diags.is_empty() {
        return Err(Error::Validation(diags));
    }

    let mut extractions: BTreeMap<usize, Vec<&OutCoupling>> = BTreeMap::new();
    for out in pattern.outcouple() {
        extractions.entry(out.roundtrip).or_default().push(out);
    }

    let last = pattern.final_roundtrip();
    let mut state = LoopState::inject(cfg.window, input.0, input.1)?;
    let mut output = vec![Complex64::new(0.0, 0.0); cfg.window];
    for r in 0..=last {
        if let Some(events) = extractions.get(&r) {
            for out in events {
                output[out.bin] += state.take(out.bin, out.pol);
            }
        }
        if r < last {
            state = step(&state, &pattern.coins_for(r), cfg)?;
        }
    }
    ModeVector::new(output)
}

/// [`run_loop`] using the pattern's own in-coupling.
pub fn synthesize(pattern: &SwitchingPattern, cfg: &LoopConfig) -> Result<ModeVector> {
    let input = match pattern.incouple() {
        [inc] => (inc.bin, inc.pol),
        _ => {
            return Err(Error::Validation(vec![Diagnostic::new(
                DiagnosticKind::MissingInput,
                "pattern must have exactly one in-coupling",
            )]))
        }
    };
    run_loop(input, pattern, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::Polarization::{H, V};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg(window: usize, eta: f64) -> LoopConfig {
        LoopConfig {
            window,
            loop_efficiency: eta,
            ..LoopConfig::default()
        }
    }

    fn coins(list: &[(usize, CoinSetting)]) -> BTreeMap<usize, CoinSetting> {
        list.iter().copied().collect()
    }

    #[test]
    fn step_transmit_shifts_h() {
        let s = LoopState::inject(4, 0, H).unwrap();
        let n = step(&s, &BTreeMap::new(), &cfg(4, 1.0)).unwrap();
        assert_eq!(n.amplitude(1, H), c(1.0, 0.0));
        assert_eq!(n.norm_sqr(), 1.0);
        assert_eq!(n.roundtrip(), 1);
    }

    #[test]
    fn step_balanced_splits() {
        let s = LoopState::inject(4, 0, H).unwrap();
        let n = step(&s, &coins(&[(0, CoinSetting::Balanced)]), &cfg(4, 1.0)).unwrap();
        assert!((n.amplitude(1, H) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((n.amplitude(0, V) - c(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!(n.amplitude(0, H).norm() < 1e-15);
    }

    #[test]
    fn step_loss_scales_norm() {
        let amps = vec![
            [c(0.3, 0.1), c(-0.2, 0.4)],
            [c(0.1, 0.0), c(0.0, 0.5)],
            [c(0.0, 0.0); 2],
        ];
        let s = LoopState::from_amplitudes(amps, 0);
        let n = step(&s, &BTreeMap::new(), &cfg(3, 0.8)).unwrap();
        assert!((n.norm_sqr() - 0.8 * s.norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn step_overflow() {
        let s = LoopState::inject(2, 1, H).unwrap();
        assert!(matches!(
            step(&s, &BTreeMap::new(), &cfg(2, 1.0)),
            Err(Error::WindowOverflow {
                bin: 1,
                window: 2,
                ..
            })
        ));
        // V at the last bin stays put
        let s = LoopState::inject(2, 1, V).unwrap();
        assert!(step(&s, &BTreeMap::new(), &cfg(2, 1.0)).is_ok());
    }

    #[test]
    fn step_respects_max_roundtrips() {
        let mut c = cfg(4, 1.0);
        c.max_roundtrips = 0;
        let s = LoopState::inject(4, 0, H).unwrap();
        assert!(step(&s, &BTreeMap::new(), &c).is_err());
    }

    fn balanced_one_round() -> SwitchingPattern {
        let mut p = SwitchingPattern::new();
        p.add_incouple(0, H)
            .set_coin(0, 0, CoinSetting::Balanced)
            .add_outcouple(1, 1, H)
            .add_outcouple(1, 0, V);
        p
    }

    #[test]
    fn run_loop_balanced_two_bins() {
        let out = run_loop((0, H), &balanced_one_round(), &cfg(4, 1.0)).unwrap();
        let a = out.amplitudes();
        assert!((a[0] - c(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((a[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn run_loop_transmit_single_bin() {
        let mut p = SwitchingPattern::new();
        p.add_incouple(0, H).add_outcouple(1, 1, H);
        let out = run_loop((0, H), &p, &cfg(4, 1.0)).unwrap();
        assert_eq!(out.amplitudes()[1], c(1.0, 0.0));
        assert_eq!(out.norm_sqr(), 1.0);
    }

    #[test]
    fn run_loop_two_rounds_binomial() {
        let mut p = SwitchingPattern::new();
        p.add_incouple(0, H)
            .set_coin(0, 0, CoinSetting::Balanced)
            .set_coin(1, 0, CoinSetting::Balanced)
            .set_coin(1, 1, CoinSetting::Balanced)
            .add_outcouple(2, 0, V)
            .add_outcouple(2, 1, H)
            .add_outcouple(2, 1, V)
            .add_outcouple(2, 2, H);
        let out = run_loop((0, H), &p, &cfg(4, 1.0)).unwrap();
        let pops = out.populations();
        for (got, want) in pops.iter().zip([0.25, 0.5, 0.25, 0.0]) {
            assert!((got - want).abs() < 1e-12, "{pops:?}");
        }
    }

    #[test]
    fn run_loop_loss_per_roundtrip() {
        let out = run_loop((0, H), &balanced_one_round(), &cfg(4, 0.8)).unwrap();
        assert!((out.norm_sqr() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn run_loop_partial_extraction_leaves_norm_below_one() {
        let mut p = SwitchingPattern::new();
        p.add_incouple(0, H)
            .set_coin(0, 0, CoinSetting::Balanced)
            .add_outcouple(1, 1, H);
        let out = run_loop((0, H), &p, &cfg(4, 1.0)).unwrap();
        assert!((out.norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn run_loop_rejects_invalid_pattern() {
        let mut p = balanced_one_round();
        p.add_outcouple(1, 1, H);
        assert!(matches!(
            run_loop((0, H), &p, &cfg(4, 1.0)),
            Err(Error::Validation(_))
        ));
    }

    /// Transcription of the parallel-modes preparation: the photon enters in H,
    /// one balanced coin spreads it over two bins, both bins are extracted after
    /// one roundtrip.
    #[test]
    fn parallel_modes_pattern_is_valid() {
        let p = balanced_one_round();
        assert!(validate_pattern(&p, &LoopConfig::default()).is_empty());
        assert!(p.is_hardware_only());
    }

    #[test]
    fn duplicate_extraction_diagnostic() {
        let mut p = balanced_one_round();
        p.add_outcouple(1, 0, V);
        let d = validate_pattern(&p, &LoopConfig::default());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::DuplicateExtraction);
        assert!(d[0].message.contains("duplicate extraction"));
    }

    #[test]
    fn out_of_window_diagnostic() {
        let c = cfg(4, 1.0);
        let mut p = balanced_one_round();
        p.add_outcouple(2, 4, H);
        let d = validate_pattern(&p, &c);
        assert!(d
            .iter()
            .any(|d| d.kind == DiagnosticKind::OutOfWindow && d.message.contains("out of window")));
        let mut p = balanced_one_round();
        p.set_coin(0, 4, CoinSetting::Reflect);
        assert!(validate_pattern(&p, &c)
            .iter()
            .any(|d| d.kind == DiagnosticKind::OutOfWindow));
    }

    #[test]
    fn roundtrip_limit_diagnostic() {
        let mut c = cfg(4, 1.0);
        c.max_roundtrips = 1;
        let mut p = balanced_one_round();
        p.add_outcouple(2, 2, H);
        assert!(validate_pattern(&p, &c)
            .iter()
            .any(|d| d.kind == DiagnosticKind::ExceedsMaxRoundtrips));
    }

    #[test]
    fn missing_input_diagnostic() {
        let mut p = SwitchingPattern::new();
        p.add_outcouple(0, 0, H);
        assert!(validate_pattern(&p, &LoopConfig::default())
            .iter()
            .any(|d| d.kind == DiagnosticKind::MissingInput));
    }

    #[test]
    fn slow_switching_diagnostic() {
        let mut c = cfg(4, 1.0);
        assert!(validate_pattern(&balanced_one_round(), &c).is_empty());
        c.eom_switch_time = 200e-9;
        let d = validate_pattern(&balanced_one_round(), &c);
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::SwitchingTooSlow));
    }

    #[test]
    fn strict_hardware_flags_custom() {
        let mut c = cfg(4, 1.0);
        let mut p = SwitchingPattern::new();
        p.add_incouple(0, H)
            .set_coin(0, 0, CoinSetting::Custom(0.3))
            .add_outcouple(1, 1, H);
        assert!(validate_pattern(&p, &c).is_empty());
        c.strict_hardware = true;
        assert_eq!(
            validate_pattern(&p, &c)[0].kind,
            DiagnosticKind::NonHardwareCoin
        );
        p.set_coin(0, 0, CoinSetting::Custom(4.0));
        assert!(validate_pattern(&p, &c)
            .iter()
            .any(|d| d.kind == DiagnosticKind::InvalidCoin));
    }

    #[test]
    fn interlacing_diagnostic() {
        let c = LoopConfig {
            window: 30,
            ..LoopConfig::default()
        };
        assert!(c
            .diagnostics()
            .iter()
            .any(|d| d.kind == DiagnosticKind::Interlacing));
    }

    #[test]
    fn pattern_json_shape() {
        let json = serde_json::to_value(balanced_one_round()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "coins": [{"roundtrip": 0, "bin": 0, "kind": "balanced"}],
                "incouple": [{"bin": 0, "pol": "H"}],
                "outcouple": [
                    {"roundtrip": 1, "bin": 1, "pol": "H"},
                    {"roundtrip": 1, "bin": 0, "pol": "V"}
                ]
            })
        );
        let back: SwitchingPattern = serde_json::from_value(json).unwrap();
        assert_eq!(back, balanced_one_round());
    }

    #[test]
    fn pattern_json_rejects_duplicate_coins() {
        let json = r#"{"coins":[{"roundtrip":0,"bin":0,"kind":"balanced"},
                                {"roundtrip":0,"bin":0,"kind":{"custom":0.1}}]}"#;
        assert!(serde_json::from_str::<SwitchingPattern>(json).is_err());
    }
}
