//! Weighted least-squares fit of a Gaussian coincidence dip
//! `C(δ) = B·[1 − V·exp(−(δ−δ₀)²/(2w²))]`.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of data points accepted by [`fit_dip`].
pub const MIN_POINTS: usize = 5;
const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-10;
/// 99th percentile of χ² with 3 degrees of freedom.
const FLAT_THRESHOLD_FREE: f64 = 11.345;
/// 99th percentile of χ² with 1 degree of freedom.
const FLAT_THRESHOLD_SHAPED: f64 = 6.635;
const GRID_CENTERS: usize = 41;
const GRID_WIDTHS: usize = 40;

/// Parameter order in [`DipFit::covariance`].
pub const PARAMETERS: [&str; 4] = ["baseline", "visibility", "center", "width"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipFit {
    pub baseline: f64,
    pub visibility: f64,
    /// Seconds.
    pub center: f64,
    /// Seconds, always positive.
    pub width: f64,
    /// Unscaled `(JᵀWJ)⁻¹` in the order of [`PARAMETERS`].
    pub covariance: [[f64; 4]; 4],
    pub chi_squared: f64,
    pub dof: usize,
    pub iterations: usize,
    /// No significant dip: `visibility` is pinned to 0.
    pub flat: bool,
    pub warnings: Vec<String>,
}

impl DipFit {
    /// Standard deviation of parameter `i` from the unscaled covariance.
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }

    pub fn model(&self, delay: f64) -> f64 {
        dip_model(
            self.baseline,
            self.visibility,
            self.center,
            self.width,
            delay,
        )
    }
}

pub fn dip_model(baseline: f64, visibility: f64, center: f64, width: f64, delay: f64) -> f64 {
    let x = (delay - center) / width;
    baseline * (1.0 - visibility * (-0.5 * x * x).exp())
}

/// Data rescaled so that delays and counts are of order one.
struct Scaled {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    time: f64,
    count: f64,
}

impl Scaled {
    fn new(delays: &[f64], counts: &[f64], errors: &[f64]) -> Result<Self> {
        let n = delays.len();
        if counts.len() != n {
            return Err(Error::Dimension {
                left: n,
                right: counts.len(),
            });
        }
        if errors.len() != n {
            return Err(Error::Dimension {
                left: n,
                right: errors.len(),
            });
        }
        if n < MIN_POINTS {
            return Err(Error::invalid(
                "delays",
                format!("{n} points, need at least {MIN_POINTS}"),
            ));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("counts", "must be finite and non-negative"));
        }
        if errors.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::invalid("errors", "must be finite and positive"));
        }
        if delays.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("delays", "must be finite"));
        }
        let lo = delays.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = delays.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Err(Error::invalid(
                "delays",
                "need at least two distinct delays",
            ));
        }
        let time = hi - lo;
        let count = counts.iter().cloned().fold(0.0, f64::max).max(1.0);
        Ok(Self {
            x: delays.iter().map(|d| d / time).collect(),
            y: counts.iter().map(|c| c / count).collect(),
            w: errors.iter().map(|e| (count / e).powi(2)).collect(),
            time,
            count,
        })
    }

    fn range(&self) -> (f64, f64) {
        let lo = self.x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn min_spacing(&self) -> f64 {
        let mut xs = self.x.clone();
        xs.sort_by(|a, b| a.total_cmp(b));
        xs.windows(2)
            .map(|p| p[1] - p[0])
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    fn chi2(&self, p: &Vector4<f64>) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((x, y), w)| w * (y - dip_model(p[0], p[1], p[2], p[3], *x)).powi(2))
            .sum()
    }

    /// Weighted mean and its χ²: the best constant model.
    fn constant(&self) -> (f64, f64, f64) {
        let sw: f64 = self.w.iter().sum();
        let mean = self.y.iter().zip(&self.w).map(|(y, w)| y * w).sum::<f64>() / sw;
        let chi2 = self
            .y
            .iter()
            .zip(&self.w)
            .map(|(y, w)| w * (y - mean).powi(2))
            .sum();
        (mean, chi2, 1.0 / sw)
    }

    /// Best `(B, A = B·V)` at fixed shape, with χ² and the 2×2 covariance.
    fn linear(&self, center: f64, width: f64) -> Option<(f64, f64, f64, Matrix2<f64>)> {
        let mut normal = Matrix2::zeros();
        let mut rhs = Vector2::zeros();
        for ((x, y), w) in self.x.iter().zip(&self.y).zip(&self.w) {
            let g = (-0.5 * ((x - center) / width).powi(2)).exp();
            let row = Vector2::new(1.0, -g);
            normal += *w * row * row.transpose();
            rhs += *w * *y * row;
        }
        let cov = normal.try_inverse()?;
        let sol = cov * rhs;
        let (b, a) = (sol[0], sol[1]);
        if !(b > 0.0) {
            return None;
        }
        let p = Vector4::new(b, a / b, center, width);
        Some((b, a, self.chi2(&p), cov))
    }

    fn jacobian_row(&self, p: &Vector4<f64>, x: f64) -> (f64, Vector4<f64>) {
        let (b, v, d, s) = (p[0], p[1], p[2], p[3]);
        let u = (x - d) / s;
        let g = (-0.5 * u * u).exp();
        let m = b * (1.0 - v * g);
        let row = Vector4::new(
            1.0 - v * g,
            -b * g,
            -b * v * g * u / s,
            -b * v * g * u * u / s,
        );
        (m, row)
    }

    fn normal_equations(&self, p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for ((x, y), w) in self.x.iter().zip(&self.y).zip(&self.w) {
            let (m, row) = self.jacobian_row(p, *x);
            jtj += *w * row * row.transpose();
            jtr += *w * (y - m) * row;
        }
        (jtj, jtr)
    }

    fn unscale(&self, p: &Vector4<f64>, cov: &Matrix4<f64>) -> (Vector4<f64>, [[f64; 4]; 4]) {
        let scale = [self.count, 1.0, self.time, self.time];
        let params = Vector4::new(
            p[0] * scale[0],
            p[1],
            p[2] * scale[2],
            p[3].abs() * scale[3],
        );
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = cov[(i, j)] * scale[i] * scale[j];
            }
        }
        (params, out)
    }
}

/// Fits the dip model with weights `1/errors²`.
pub fn fit_dip(delays: &[f64], counts: &[f64], errors: &[f64]) -> Result<DipFit> {
    fit_dip_with_shape(delays, counts, errors, None)
}

/// As [`fit_dip`]. When `shape = Some((center, width))` is known in advance, the
/// flatness test compares the constant model against a dip of that fixed shape.
pub fn fit_dip_with_shape(
    delays: &[f64],
    counts: &[f64],
    errors: &[f64],
    shape: Option<(f64, f64)>,
) -> Result<DipFit> {
    let data = Scaled::new(delays, counts, errors)?;
    let n = delays.len();
    let (_, chi2_const, _) = data.constant();

    if let Some((center, width)) = shape {
        if !(width > 0.0 && width.is_finite() && center.is_finite()) {
            return Err(Error::invalid("shape", "width must be positive and finite"));
        }
        let (c, w) = (center / data.time, width / data.time);
        let significant = data
            .linear(c, w)
            .is_some_and(|(_, _, chi2, _)| chi2_const - chi2 >= FLAT_THRESHOLD_SHAPED);
        if !significant {
            return Ok(pinned(&data, c, w, n));
        }
    }

    // coarse grid over (center, width); (B, A) solved linearly at each node
    let (lo, hi) = data.range();
    let w_min = 0.5 * data.min_spacing();
    let w_max = hi - lo;
    let mut best: Option<(f64, Vector4<f64>)> = None;
    for i in 0..GRID_CENTERS {
        let c = lo + (hi - lo) * i as f64 / (GRID_CENTERS - 1) as f64;
        for j in 0..GRID_WIDTHS {
            let w = w_min * (w_max / w_min).powf(j as f64 / (GRID_WIDTHS - 1) as f64);
            if let Some((b, a, chi2, _)) = data.linear(c, w) {
                if best.as_ref().is_none_or(|(bc, _)| chi2 < *bc) {
                    best = Some((chi2, Vector4::new(b, a / b, c, w)));
                }
            }
        }
    }
    let Some((grid_chi2, start)) = best else {
        return Err(Error::Degenerate(
            "no admissible starting point for the dip fit".into(),
        ));
    };
    if shape.is_none() && chi2_const - grid_chi2 < FLAT_THRESHOLD_FREE {
        return Ok(pinned(&data, start[2], start[3], n));
    }

    // Levenberg-Marquardt refinement
    let mut p = start;
    let mut chi2 = grid_chi2;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = data.normal_equations(&p);
        let mut damped = jtj;
        for k in 0..4 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = p + step;
        let trial_chi2 = data.chi2(&trial);
        let small = step.norm() <= STEP_TOLERANCE * (p.norm() + STEP_TOLERANCE);
        if trial_chi2 <= chi2 && trial[0] > 0.0 && trial[3] != 0.0 {
            p = trial;
            chi2 = trial_chi2;
            lambda = (lambda * 0.1).max(1e-12);
        } else {
            lambda *= 10.0;
        }
        if small {
            converged = true;
            break;
        }
    }

    let (jtj, _) = data.normal_equations(&p);
    let cov = jtj
        .try_inverse()
        .unwrap_or_else(|| Matrix4::from_element(f64::NAN));
    let (params, covariance) = data.unscale(&p, &cov);
    let mut fit = DipFit {
        baseline: params[0],
        visibility: params[1],
        center: params[2],
        width: params[3],
        covariance,
        chi_squared: chi2,
        dof: n - 4,
        iterations,
        flat: false,
        warnings: Vec::new(),
    };
    if !converged {
        return Err(Error::FitFailure {
            reason: format!("no convergence after {MAX_ITERATIONS} iterations"),
            last: Box::new(fit),
        });
    }
    if cov.iter().any(|c| !c.is_finite()) {
        fit.warnings
            .push("singular curvature matrix: parameter errors undefined".into());
    }
    Ok(fit)
}

fn pinned(data: &Scaled, center: f64, width: f64, n: usize) -> DipFit {
    let (mean, chi2, var_mean) = data.constant();
    let mut cov = Matrix4::zeros();
    cov[(0, 0)] = var_mean;
    // V uncertainty from the amplitude of a fixed-shape dip
    if let Some((_, _, _, lin)) = data.linear(center, width) {
        cov[(1, 1)] = lin[(1, 1)] / (mean * mean);
    } else {
        cov[(1, 1)] = f64::NAN;
    }
    let p = Vector4::new(mean, 0.0, center, width);
    let (params, covariance) = data.unscale(&p, &cov);
    DipFit {
        baseline: params[0],
        visibility: 0.0,
        center: params[2],
        width: params[3],
        covariance,
        chi_squared: chi2,
        dof: n - 1,
        iterations: 0,
        flat: true,
        warnings: vec!["no significant dip: visibility pinned to 0".into()],
    }
}

/// Error on the fitted visibility with the covariance rescaled to unit reduced χ².
/// Residuals are weighted with the Poisson variance of the fitted model.
pub fn visibility_error(delays: &[f64], counts: &[f64], fit: &DipFit) -> f64 {
    let chi2: f64 = delays
        .iter()
        .zip(counts)
        .map(|(d, c)| {
            let m = fit.model(*d);
            (c - m).powi(2) / m.max(1.0)
        })
        .sum();
    let dof = fit.dof.max(1) as f64;
    fit.sigma(1) * (chi2 / dof).sqrt()
}
