//! Inverse of [`run_loop`](super::run_loop): find a switching pattern that
//! synthesizes a requested single-photon mode vector.
//!
//! The coins only ever multiply amplitudes by real numbers or by `−i`, so in the
//! (H, iV) basis the loop acts as a real orthogonal network: extracted H amplitudes
//! are real and extracted V amplitudes are imaginary, relative to the input. Two
//! schemes follow from that.
//!
//! * Quarter-phase targets, where every bin except the last is `−i` times a real
//!   number relative to the last bin, are peeled off a single travelling H tail:
//!   the coin at bin `j` moves `|t_j|` into V, which is extracted, and the rest of
//!   the tail moves on. Depth is `n − 1` roundtrips for `n` bins.
//! * General targets need a real and an imaginary part per bin. The V left behind
//!   at bin `j` is split once more on the next roundtrip: part of it stays (the
//!   imaginary part of bin `j`) and part is converted into H and lands in bin
//!   `j + 1` (the real part of bin `j + 1`). Depth is `n` roundtrips.
//!
//! Signs are fixed right to left so every angle stays within `[0, π)`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::jones::CoinSetting;
use super::pattern::SwitchingPattern;
use super::LoopConfig;
use crate::error::{Error, Result};
use crate::modes::{ModeVector, Polarization};

/// Components smaller than this are treated as exact zeros while choosing signs.
const ZERO: f64 = 1e-13;
/// Angle tolerance for snapping to the three hardware settings.
const SNAP: f64 = 1e-12;
/// Allowed deviation from a quarter-phase structure for the shallow scheme.
const PHASE_CLASS_TOL: f64 = 1e-10;

enum Scheme {
    Direct,
    Peel,
    Full,
}

struct Plan {
    first: usize,
    /// Target over the support, rotated by the chosen global phase.
    rotated: Vec<Complex64>,
    scheme: Scheme,
}

fn plan(target: &ModeVector) -> Result<Plan> {
    let n2 = target.norm_sqr();
    if (n2 - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(
            "target",
            format!("squared norm {n2} is not 1 within 1e-9"),
        ));
    }
    let (first, last) = target
        .support(ZERO)
        .ok_or_else(|| Error::Degenerate("target has no support".into()))?;
    let t = &target.amplitudes()[first..=last];
    let n = t.len();

    // global phase that makes the first bin −i·|t_0|
    let rot = Complex64::new(0.0, -1.0) * t[0].conj() / t[0].norm();
    let rotated: Vec<Complex64> = t.iter().map(|a| a * rot).collect();

    let scheme = if n == 1 {
        Scheme::Direct
    } else {
        let quarter = rotated[..n - 1]
            .iter()
            .all(|a| a.re.abs() <= PHASE_CLASS_TOL)
            && rotated[n - 1].im.abs() <= PHASE_CLASS_TOL;
        if quarter {
            Scheme::Peel
        } else {
            Scheme::Full
        }
    };
    Ok(Plan {
        first,
        rotated,
        scheme,
    })
}

/// Roundtrips [`compile_pattern`] needs for `target`.
pub fn required_roundtrips(target: &ModeVector) -> Result<usize> {
    let p = plan(target)?;
    let n = p.rotated.len();
    Ok(match p.scheme {
        Scheme::Direct => 0,
        Scheme::Peel => n - 1,
        Scheme::Full => n,
    })
}

/// Same magnitudes as `v`, with the phases the shallow peeling scheme produces:
/// `−i|v_τ|` on every supported bin except the last, which is `|v_τ|`.
pub fn quarter_phase_form(v: &ModeVector) -> Result<ModeVector> {
    let Some((first, last)) = v.support(ZERO) else {
        return Ok(v.clone());
    };
    let amps = v
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(bin, a)| {
            if bin < first || bin > last {
                Complex64::new(0.0, 0.0)
            } else if bin < last {
                Complex64::new(0.0, -a.norm())
            } else {
                Complex64::new(a.norm(), 0.0)
            }
        })
        .collect();
    Ok(ModeVector::new(amps)?.with_label(v.label()))
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn clean(x: f64) -> f64 {
    if x.abs() <= ZERO {
        0.0
    } else {
        x
    }
}

fn coin(theta: f64) -> CoinSetting {
    CoinSetting::from_theta(theta, SNAP)
}

/// Builds a pattern whose lossless output equals `target` up to a global phase.
///
/// Fails with [`Error::Infeasible`] when the target needs more roundtrips than
/// `cfg.max_roundtrips`, and with [`Error::Dimension`] when its window differs from
/// the loop window.
pub fn compile_pattern(target: &ModeVector, cfg: &LoopConfig) -> Result<SwitchingPattern> {
    if target.window() != cfg.window {
        return Err(Error::Dimension {
            left: target.window(),
            right: cfg.window,
        });
    }
    let plan = plan(target)?;
    let required = match plan.scheme {
        Scheme::Direct => 0,
        Scheme::Peel => plan.rotated.len() - 1,
        Scheme::Full => plan.rotated.len(),
    };
    if required > cfg.max_roundtrips {
        return Err(Error::Infeasible {
            required,
            max: cfg.max_roundtrips,
        });
    }

    let mut pattern = SwitchingPattern::new();
    pattern.add_incouple(plan.first, Polarization::H);
    match plan.scheme {
        Scheme::Direct => {
            pattern.add_outcouple(0, plan.first, Polarization::H);
        }
        Scheme::Peel => peel(&plan, &mut pattern),
        Scheme::Full => full(&plan, &mut pattern),
    }
    Ok(pattern)
}

/// Like [`compile_pattern`], but the output under the lossy loop of `cfg` is
/// proportional to `target`.
///
/// Bins leave the loop after different numbers of roundtrips, so uniform loss
/// distorts the lossless solution. H extractions carry the real and V extractions
/// the imaginary part of the rotated target, each at a single known roundtrip; both
/// parts are pre-amplified by `η^(−r/2)` and the result is compiled again.
pub fn compile_pattern_compensated(
    target: &ModeVector,
    cfg: &LoopConfig,
) -> Result<SwitchingPattern> {
    let lossless = compile_pattern(target, cfg)?;
    let eta = cfg.loop_efficiency;
    if eta == 1.0 || lossless.final_roundtrip() == 0 {
        return Ok(lossless);
    }
    let out = super::synthesize(&lossless, &cfg.lossless())?;
    let mut amps = out.amplitudes().to_vec();
    let mut seen = std::collections::BTreeSet::new();
    for ev in lossless.outcouple() {
        if !seen.insert((ev.bin, ev.pol)) {
            return Err(Error::Degenerate(format!(
                "bin {} {} is extracted more than once",
                ev.bin, ev.pol
            )));
        }
        let gain = eta.powf(-(ev.roundtrip as f64) / 2.0);
        let a = &mut amps[ev.bin];
        *a = match ev.pol {
            Polarization::H => Complex64::new(a.re * gain, a.im),
            Polarization::V => Complex64::new(a.re, a.im * gain),
        };
    }
    let predistorted = crate::modes::normalize(&ModeVector::new(amps)?)?;
    let pattern = compile_pattern(&predistorted, cfg)?;
    if pattern.outcouple() != lossless.outcouple() {
        return Err(Error::Degenerate(
            "loss compensation changed the extraction schedule".into(),
        ));
    }
    Ok(pattern)
}

fn peel(plan: &Plan, pattern: &mut SwitchingPattern) {
    let t = &plan.rotated;
    let n = t.len();
    let f = plan.first;
    // real amplitudes extracted in order: −i·a_j for j < n−1, a_{n−1} last
    let a: Vec<f64> = (0..n)
        .map(|j| clean(if j < n - 1 { -t[j].im } else { t[j].re }))
        .collect();

    // tail magnitudes |T_j|² = Σ_{k≥j} a_k²
    let mut mag = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        acc += a[j] * a[j];
        mag[j] = acc.sqrt();
    }
    // tail signs, right to left; T_0 = +1 is the injected photon
    let mut sgn = vec![1.0; n];
    sgn[n - 1] = sign(a[n - 1]);
    for j in (1..n - 1).rev() {
        sgn[j] = if a[j] != 0.0 { sign(a[j]) } else { sgn[j + 1] };
    }
    sgn[0] = 1.0;

    for j in 0..n - 1 {
        let s = a[j] * sgn[j] / mag[j];
        let c = sgn[j + 1] * mag[j + 1] * sgn[j] / mag[j];
        pattern.set_coin(j, f + j, coin(s.atan2(c)));
        pattern.add_outcouple(j + 1, f + j, Polarization::V);
    }
    pattern.add_outcouple(n - 1, f + n - 1, Polarization::H);
}

fn full(plan: &Plan, pattern: &mut SwitchingPattern) {
    let n = plan.rotated.len();
    let f = plan.first;
    // bin j = x_j + i·y_j; x_0 = 0 by the choice of global phase
    let mut x: Vec<f64> = plan.rotated.iter().map(|a| clean(a.re)).collect();
    let mut y: Vec<f64> = plan.rotated.iter().map(|a| clean(a.im)).collect();
    x[0] = 0.0;
    // the injected tail is positive, which needs x_1 ≤ 0
    if x[1] > 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
        y.iter_mut().for_each(|v| *v = -*v);
    }

    // |v_j|² = y_j² + x_{j+1}² for j < n−1, the last tail carries y_{n−1}
    let v_mag: Vec<f64> = (0..n)
        .map(|j| {
            if j < n - 1 {
                y[j].hypot(x[j + 1])
            } else {
                y[j].abs()
            }
        })
        .collect();
    let mut tail = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        acc += v_mag[j] * v_mag[j];
        tail[j] = acc.sqrt();
    }

    // sign(T_j) is forced by the split it feeds: y_j = −cos φ_j v_j and
    // x_{j+1} = −sin φ_j v_j with sin φ_j ≥ 0 and v_j = sin θ_j T_j
    let mut sgn = vec![1.0; n];
    sgn[n - 1] = -sign(y[n - 1]);
    for j in (0..n - 1).rev() {
        sgn[j] = if x[j + 1] != 0.0 {
            -sign(x[j + 1])
        } else if y[j] != 0.0 {
            -sign(y[j])
        } else {
            sgn[j + 1]
        };
    }
    debug_assert_eq!(sgn[0], 1.0);

    for j in 0..n - 1 {
        let s = v_mag[j] / tail[j];
        let c = sgn[j + 1] * tail[j + 1] * sgn[j] / tail[j];
        pattern.set_coin(j, f + j, coin(s.atan2(c)));

        let v = sgn[j] * v_mag[j];
        let phi = if v_mag[j] == 0.0 {
            0.0
        } else {
            (-x[j + 1] / v).atan2(-y[j] / v)
        };
        pattern.set_coin(j + 1, f + j, coin(phi));
        pattern.add_outcouple(j + 2, f + j, Polarization::V);
        pattern.add_outcouple(j + 2, f + j + 1, Polarization::H);
    }
    // last tail goes entirely into V and is extracted together with x_{n−1}
    pattern.set_coin(n - 1, f + n - 1, coin(FRAC_PI_2));
    pattern.add_outcouple(n, f + n - 1, Polarization::V);
}
