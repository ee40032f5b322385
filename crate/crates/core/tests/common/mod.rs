//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use timebin_hom::experiment::{default_delays, dip_model};
use timebin_hom::network::{LoopConfig, SwitchingPattern};
use timebin_hom::{ModeVector, Polarization};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_vector<R: Rng>(rng: &mut R, window: usize) -> ModeVector {
    let amps = (0..window)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    ModeVector::new(amps).unwrap()
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, window: usize) -> ModeVector {
    loop {
        let v = random_vector(rng, window);
        if v.norm() > 1e-3 {
            let n = v.norm();
            return ModeVector::new(v.amplitudes().iter().map(|a| a / n).collect()).unwrap();
        }
    }
}

/// Coincidence probability for detector `+` at bin `t` and `−` at bin `tp`, built
/// by symmetrizing the two-photon wavefunction over (port, bin, internal state).
///
/// Photon A carries internal state `x`; photon B is `√I·x + √(1−I)·y` with `y ⊥ x`.
/// The beam splitter maps port a to (`+` + `−`)/√2 and port b to (`+` − `−`)/√2.
pub fn fock_coincidence(
    alpha: &ModeVector,
    beta: &ModeVector,
    indist: f64,
    t: usize,
    tp: usize,
) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let internal_b = [indist.sqrt(), (1.0 - indist).sqrt()];
    // photon A enters port a, so its amplitude is the same at both detectors
    let psi_a = |bin: usize, x: usize| -> Complex64 {
        if x == 0 {
            alpha.amplitudes()[bin] * s
        } else {
            c(0.0, 0.0)
        }
    };
    let psi_b = |bin: usize, port: usize, x: usize| -> Complex64 {
        let sign = if port == 0 { 1.0 } else { -1.0 };
        beta.amplitudes()[bin] * (s * sign * internal_b[x])
    };
    let mut p = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let amp = psi_a(t, x) * psi_b(tp, 1, y) + psi_a(tp, y) * psi_b(t, 0, x);
            p += amp.norm_sqr();
        }
    }
    p
}

fn coin(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = theta.sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

fn index(bin: usize, pol: Polarization) -> usize {
    2 * bin
        + match pol {
            Polarization::H => 0,
            Polarization::V => 1,
        }
}

/// Dense `2W × 2W` transfer matrix of one roundtrip: coins, then H shifted one
/// bin later, all scaled by `√η`. H leaving the window is dropped.
pub fn dense_roundtrip(
    pattern: &SwitchingPattern,
    r: usize,
    cfg: &LoopConfig,
) -> DMatrix<Complex64> {
    let w = cfg.window;
    let mut coins = DMatrix::<Complex64>::zeros(2 * w, 2 * w);
    for bin in 0..w {
        let m = coin(pattern.coin(r, bin).theta());
        for i in 0..2 {
            for j in 0..2 {
                coins[(2 * bin + i, 2 * bin + j)] = m[i][j];
            }
        }
    }
    let mut shift = DMatrix::<Complex64>::zeros(2 * w, 2 * w);
    for bin in 0..w {
        shift[(2 * bin + 1, 2 * bin + 1)] = c(1.0, 0.0);
        if bin + 1 < w {
            shift[(2 * bin + 2, 2 * bin)] = c(1.0, 0.0);
        }
    }
    shift * coins * c(cfg.loop_efficiency.sqrt(), 0.0)
}

/// Output mode vector of `pattern` computed with dense matrices and projectors.
pub fn dense_loop(pattern: &SwitchingPattern, cfg: &LoopConfig) -> Vec<Complex64> {
    let w = cfg.window;
    let inc = pattern.incouple()[0];
    let mut state = DVector::<Complex64>::zeros(2 * w);
    state[index(inc.bin, inc.pol)] = c(1.0, 0.0);
    let mut out = vec![c(0.0, 0.0); w];
    for r in 0..=pattern.final_roundtrip() {
        for o in pattern.outcouple().iter().filter(|o| o.roundtrip == r) {
            let k = index(o.bin, o.pol);
            out[o.bin] += state[k];
            state[k] = c(0.0, 0.0);
        }
        state = dense_roundtrip(pattern, r, cfg) * state;
    }
    out
}

/// `∫ ξa*(t) ξb(t − δ) dt` by composite Simpson quadrature, where `ξ` has intensity
/// standard deviation `σ` and carrier offset `ν`.
pub fn quadrature_overlap(sa: f64, nua: f64, sb: f64, nub: f64, delta: f64) -> Complex64 {
    let amp = |t: f64, s: f64, nu: f64| -> Complex64 {
        let norm = (2.0 * std::f64::consts::PI * s * s).powf(-0.25);
        let phase = c(0.0, -2.0 * std::f64::consts::PI * nu * t).exp();
        phase * (norm * (-t * t / (4.0 * s * s)).exp())
    };
    let span = 14.0 * sa.max(sb) + delta.abs();
    let n = 20_000;
    let h = 2.0 * span / n as f64;
    let mut acc = c(0.0, 0.0);
    for k in 0..=n {
        let t = -span + k as f64 * h;
        let wgt = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += amp(t, sa, nua).conj() * amp(t - delta, sb, nub) * wgt;
    }
    acc * (h / 3.0)
}

/// `V` of a Gaussian dip, fitted by brute-force weighted least squares over a
/// dense (center, width) grid with the linear parameters solved exactly.
pub fn grid_fit_visibility(
    delays: &[f64],
    counts: &[f64],
    errors: &[f64],
    width_guess: f64,
) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for ic in -40..=40 {
        let center = ic as f64 * width_guess / 200.0;
        for iw in 0..121 {
            let width = width_guess * (0.7 + 0.005 * iw as f64);
            // model b − a·g; solve 2×2 normal equations
            let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for ((d, y), e) in delays.iter().zip(counts).zip(errors) {
                let g = (-(d - center).powi(2) / (2.0 * width * width)).exp();
                let w = 1.0 / (e * e);
                s11 += w;
                s12 += w * g;
                s22 += w * g * g;
                r1 += w * y;
                r2 += w * y * g;
            }
            let det = s11 * s22 - s12 * s12;
            let b = (r1 * s22 - r2 * s12) / det;
            let bg = (s11 * r2 - s12 * r1) / det;
            let chi: f64 = delays
                .iter()
                .zip(counts)
                .zip(errors)
                .map(|((d, y), e)| {
                    let g = (-(d - center).powi(2) / (2.0 * width * width)).exp();
                    ((y - b - bg * g) / e).powi(2)
                })
                .sum();
            if chi < best.0 {
                best = (chi, -bg / b);
            }
        }
    }
    best.1
}

/// Dip width of two default packets, the standard deviation of `|overlap|²`.
pub const DIP_WIDTH: f64 = 1.62e-12;

/// Poisson counts of a centered dip on the default delay grid, with `√max(n, 1)`
/// errors.
pub fn poisson_dip(seed: u64, baseline: f64, v: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let delays = default_delays();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<f64> = delays
        .iter()
        .map(|&d| {
            Poisson::new(dip_model(baseline, v, 0.0, DIP_WIDTH, d))
                .unwrap()
                .sample(&mut rng)
        })
        .collect();
    let errors = counts.iter().map(|c| c.max(1.0).sqrt()).collect();
    (delays, counts, errors)
}
