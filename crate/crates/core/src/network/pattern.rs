use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::jones::CoinSetting;
use super::LoopConfig;
use crate::error::{Diagnostic, DiagnosticKind, Error};
use crate::modes::Polarization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InCoupling {
    pub bin: usize,
    pub pol: Polarization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutCoupling {
    pub roundtrip: usize,
    pub bin: usize,
    pub pol: Polarization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CoinEvent {
    roundtrip: usize,
    bin: usize,
    kind: CoinSetting,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawPattern {
    #[serde(default)]
    coins: Vec<CoinEvent>,
    #[serde(default)]
    incouple: Vec<InCoupling>,
    #[serde(default)]
    outcouple: Vec<OutCoupling>,
}

/// Programmed coin settings per (roundtrip, bin) together with the in- and
/// out-coupling schedule. Coins that are not listed default to `Transmit`.
///
/// Coins keyed by roundtrip `r` act during the transition from roundtrip `r` to
/// `r + 1`; out-couplings at roundtrip `r` are taken before those coins act.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawPattern", into = "RawPattern")]
pub struct SwitchingPattern {
    coins: BTreeMap<(usize, usize), CoinSetting>,
    incouple: Vec<InCoupling>,
    outcouple: Vec<OutCoupling>,
}

impl TryFrom<RawPattern> for SwitchingPattern {
    type Error = Error;

    fn try_from(raw: RawPattern) -> Result<Self, Error> {
        let mut coins = BTreeMap::new();
        for ev in raw.coins {
            if coins.insert((ev.roundtrip, ev.bin), ev.kind).is_some() {
                return Err(Error::Parse(format!(
                    "coin for roundtrip {} bin {} given twice",
                    ev.roundtrip, ev.bin
                )));
            }
        }
        Ok(Self {
            coins,
            incouple: raw.incouple,
            outcouple: raw.outcouple,
        })
    }
}

impl From<SwitchingPattern> for RawPattern {
    fn from(p: SwitchingPattern) -> Self {
        RawPattern {
            coins: p
                .coins
                .into_iter()
                .map(|((roundtrip, bin), kind)| CoinEvent {
                    roundtrip,
                    bin,
                    kind,
                })
                .collect(),
            incouple: p.incouple,
            outcouple: p.outcouple,
        }
    }
}

impl SwitchingPattern {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_coin(&mut self, roundtrip: usize, bin: usize, setting: CoinSetting) -> &mut Self {
        self.coins.insert((roundtrip, bin), setting);
        self
    }

    pub fn add_incouple(&mut self, bin: usize, pol: Polarization) -> &mut Self {
        self.incouple.push(InCoupling { bin, pol });
        self
    }

    pub fn add_outcouple(&mut self, roundtrip: usize, bin: usize, pol: Polarization) -> &mut Self {
        self.outcouple.push(OutCoupling {
            roundtrip,
            bin,
            pol,
        });
        self
    }

    pub fn coin(&self, roundtrip: usize, bin: usize) -> CoinSetting {
        self.coins
            .get(&(roundtrip, bin))
            .copied()
            .unwrap_or_default()
    }

    /// Explicitly programmed coins of one roundtrip, keyed by bin.
    pub fn coins_for(&self, roundtrip: usize) -> BTreeMap<usize, CoinSetting> {
        self.coins
            .range((roundtrip, 0)..=(roundtrip, usize::MAX))
            .map(|(&(_, bin), &s)| (bin, s))
            .collect()
    }

    pub fn coins(&self) -> impl Iterator<Item = ((usize, usize), CoinSetting)> + '_ {
        self.coins.iter().map(|(&k, &v)| (k, v))
    }

    pub fn incouple(&self) -> &[InCoupling] {
        &self.incouple
    }

    pub fn outcouple(&self) -> &[OutCoupling] {
        &self.outcouple
    }

    /// Last roundtrip at which anything is extracted; the loop runs until then.
    pub fn final_roundtrip(&self) -> usize {
        self.outcouple
            .iter()
            .map(|o| o.roundtrip)
            .max()
            .unwrap_or(0)
    }

    /// True when only the T, R and balanced settings are used.
    pub fn is_hardware_only(&self) -> bool {
        self.coins.values().all(|c| c.is_hardware())
    }
}

/// Checks a pattern against the loop hardware. Returns an empty list when the
/// pattern can be executed as written.
pub fn validate_pattern(pattern: &SwitchingPattern, cfg: &LoopConfig) -> Vec<Diagnostic> {
    let mut diags = cfg.diagnostics();
    let w = cfg.window;
    let max = cfg.max_roundtrips;

    for ((roundtrip, bin), setting) in pattern.coins() {
        if bin >= w {
            diags.push(Diagnostic::new(
                DiagnosticKind::OutOfWindow,
                format!("coin at roundtrip {roundtrip} bin {bin} is out of window (size {w})"),
            ));
        }
        if roundtrip >= max {
            diags.push(Diagnostic::new(
                DiagnosticKind::ExceedsMaxRoundtrips,
                format!("coin at roundtrip {roundtrip} needs more than {max} roundtrips"),
            ));
        }
        if let CoinSetting::Custom(theta) = setting {
            if !theta.is_finite() || !(0.0..std::f64::consts::PI).contains(&theta) {
                diags.push(Diagnostic::new(
                    DiagnosticKind::InvalidCoin,
                    format!("custom coin angle {theta} at roundtrip {roundtrip} bin {bin} not in [0, pi)"),
                ));
            } else if cfg.strict_hardware {
                diags.push(Diagnostic::new(
                    DiagnosticKind::NonHardwareCoin,
                    format!("custom coin angle {theta} at roundtrip {roundtrip} bin {bin} is not a hardware setting"),
                ));
            }
        }
    }

    match pattern.incouple() {
        [] => diags.push(Diagnostic::new(
            DiagnosticKind::MissingInput,
            "pattern has no in-coupling",
        )),
        [_] => {}
        more => diags.push(Diagnostic::new(
            DiagnosticKind::MissingInput,
            format!(
                "pattern has {} in-couplings, expected exactly one",
                more.len()
            ),
        )),
    }
    for inc in pattern.incouple() {
        if inc.bin >= w {
            diags.push(Diagnostic::new(
                DiagnosticKind::OutOfWindow,
                format!("in-coupling at bin {} is out of window (size {w})", inc.bin),
            ));
        }
    }

    let mut seen = BTreeSet::new();
    for out in pattern.outcouple() {
        if out.bin >= w {
            diags.push(Diagnostic::new(
                DiagnosticKind::OutOfWindow,
                format!(
                    "out-coupling at roundtrip {} bin {} is out of window (size {w})",
                    out.roundtrip, out.bin
                ),
            ));
        }
        if out.roundtrip > max {
            diags.push(Diagnostic::new(
                DiagnosticKind::ExceedsMaxRoundtrips,
                format!(
                    "out-coupling at roundtrip {} exceeds the maximum of {max}",
                    out.roundtrip
                ),
            ));
        }
        if !seen.insert(*out) {
            diags.push(Diagnostic::new(
                DiagnosticKind::DuplicateExtraction,
                format!(
                    "duplicate extraction of roundtrip {} bin {} {}",
                    out.roundtrip, out.bin, out.pol
                ),
            ));
        }
    }

    if cfg.eom_switch_time >= cfg.bin_spacing {
        let rounds: BTreeSet<usize> = pattern.coins().map(|((r, _), _)| r).collect();
        for r in rounds {
            for bin in 0..w.saturating_sub(1) {
                let a = pattern.coin(r, bin);
                let b = pattern.coin(r, bin + 1);
                if !a.same_operation(b) {
                    diags.push(Diagnostic::new(
                        DiagnosticKind::SwitchingTooSlow,
                        format!(
                            "coin change between bins {bin} and {} at roundtrip {r} needs {:e} s but bins are {:e} s apart",
                            bin + 1,
                            cfg.eom_switch_time,
                            cfg.bin_spacing
                        ),
                    ));
                }
            }
        }
    }

    diags
}
