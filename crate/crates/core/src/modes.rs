//! Photon amplitude vectors over a window of time bins.
//!
//! A [`ModeVector`] holds the complex amplitude of one photon in each time bin of a
//! fixed window. Its squared norm is the probability that the photon is present in the
//! window at all, so loss shows up as a norm below one.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex probability amplitude of one mode.
pub type Amplitude = Complex64;

/// Vectors with a squared norm below this are treated as empty.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Tolerance for the "up to global phase" comparison.
pub const PHASE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => f.write_str("H"),
            Polarization::V => f.write_str("V"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    amplitudes: Vec<Amplitude>,
    #[serde(default)]
    label: String,
}

impl ModeVector {
    /// Builds a vector from raw amplitudes. Every component must be finite and the
    /// window must hold at least one bin; the norm is not constrained here, see
    /// [`ModeVector::is_physical`].
    pub fn new(amplitudes: Vec<Amplitude>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Degenerate(
                "mode vector needs at least one bin".into(),
            ));
        }
        if let Some(i) = amplitudes
            .iter()
            .position(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::invalid(
                "amplitudes",
                format!("component {i} is not finite"),
            ));
        }
        Ok(Self {
            amplitudes,
            label: String::new(),
        })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// All-zero vector over `window` bins.
    pub fn zeros(window: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); window])
    }

    /// Single photon entirely in `bin`.
    pub fn basis(window: usize, bin: usize) -> Result<Self> {
        if bin >= window {
            return Err(Error::Bounds { bin, window });
        }
        let mut v = vec![Complex64::new(0.0, 0.0); window];
        v[bin] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn window(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn get(&self, bin: usize) -> Option<Amplitude> {
        self.amplitudes.get(bin).copied()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Squared norm within `[0, 1 + 1e-12]`.
    pub fn is_physical(&self) -> bool {
        self.norm_sqr() <= 1.0 + NORM_TOLERANCE
    }

    /// Per-bin detection probabilities `|a_τ|²`.
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Smallest and largest bins carrying amplitude above `tol`, if any.
    pub fn support(&self, tol: f64) -> Option<(usize, usize)> {
        let first = self.amplitudes.iter().position(|a| a.norm() > tol)?;
        let last = self.amplitudes.iter().rposition(|a| a.norm() > tol)?;
        Some((first, last))
    }

    /// Copy rotated so that the first nonzero amplitude is real and positive.
    /// Display convention only; every computed quantity is phase independent.
    pub fn canonical_phase(&self) -> ModeVector {
        let mut out = self.clone();
        if let Some(first) = self.amplitudes.iter().find(|a| a.norm() > NORM_TOLERANCE) {
            let rot = first.conj() / first.norm();
            for a in &mut out.amplitudes {
                *a *= rot;
            }
        }
        out
    }

    /// `|⟨a,b⟩| = ‖a‖‖b‖` within `tol`.
    pub fn equal_up_to_global_phase(&self, other: &ModeVector, tol: f64) -> Result<bool> {
        let overlap = inner_product(self, other)?.norm();
        let norms = self.norm() * other.norm();
        let diff = (self.norm() - other.norm()).abs();
        Ok(diff <= tol && (norms - overlap).abs() <= tol)
    }
}

impl fmt::Display for ModeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{:.6}{:+.6}i", a.re, a.im)?;
        }
        f.write_str("]")
    }
}

/// A non-empty set of bins inside a window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSubset {
    bins: BTreeSet<usize>,
    window: usize,
}

impl ModeSubset {
    pub fn new(bins: impl IntoIterator<Item = usize>, window: usize) -> Result<Self> {
        let bins: BTreeSet<usize> = bins.into_iter().collect();
        if bins.is_empty() {
            return Err(Error::Degenerate("mode subset is empty".into()));
        }
        if let Some(&bin) = bins.iter().find(|&&b| b >= window) {
            return Err(Error::Bounds { bin, window });
        }
        Ok(Self { bins, window })
    }

    pub fn full(window: usize) -> Result<Self> {
        Self::new(0..window, window)
    }

    pub fn bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.bins.iter().copied()
    }

    pub fn contains(&self, bin: usize) -> bool {
        self.bins.contains(&bin)
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub(crate) fn check_window(&self, window: usize) -> Result<()> {
        match self.bins.iter().find(|&&b| b >= window) {
            Some(&bin) => Err(Error::Bounds { bin, window }),
            None => Ok(()),
        }
    }
}

/// `Σ_τ conj(a_τ) b_τ`.
pub fn inner_product(a: &ModeVector, b: &ModeVector) -> Result<Amplitude> {
    if a.window() != b.window() {
        return Err(Error::Dimension {
            left: a.window(),
            right: b.window(),
        });
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Zeroes every amplitude outside `subset`.
pub fn restrict(v: &ModeVector, subset: &ModeSubset) -> Result<ModeVector> {
    subset.check_window(v.window())?;
    let mut out = v.clone();
    for (bin, a) in out.amplitudes.iter_mut().enumerate() {
        if !subset.contains(bin) {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

pub fn normalize(v: &ModeVector) -> Result<ModeVector> {
    let n2 = v.norm_sqr();
    if n2 <= NORM_TOLERANCE {
        return Err(Error::Degenerate(format!(
            "cannot normalize vector with squared norm {n2:e}"
        )));
    }
    let scale = 1.0 / n2.sqrt();
    let mut out = v.clone();
    for a in &mut out.amplitudes {
        *a *= scale;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn vec_of(v: &[f64]) -> ModeVector {
        ModeVector::from_real(v).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let e = vec_of(&[1.0, 0.0]);
        assert!((inner_product(&e, &e).unwrap() - c(1.0, 0.0)).norm() < 1e-15);

        let s = 0.5f64.sqrt();
        let a = vec_of(&[s, s]);
        let b = vec_of(&[s, -s]);
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-15);

        let t = 1.0 / 3f64.sqrt();
        let a = vec_of(&[t, t, t]);
        let b = vec_of(&[t, -t, t]);
        let ip = inner_product(&a, &b).unwrap();
        assert!((ip - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inner_product_conjugates_left() {
        let a = ModeVector::new(vec![c(0.0, 1.0)]).unwrap();
        let b = ModeVector::new(vec![c(1.0, 0.0)]).unwrap();
        assert_eq!(inner_product(&a, &b).unwrap(), c(0.0, -1.0));
    }

    #[test]
    fn inner_product_size_mismatch() {
        let a = vec_of(&[1.0]);
        let b = vec_of(&[1.0, 0.0]);
        assert!(matches!(
            inner_product(&a, &b),
            Err(Error::Dimension { left: 1, right: 2 })
        ));
    }

    #[test]
    fn restrict_examples() {
        let t = 1.0 / 3f64.sqrt();
        let v = vec_of(&[t, t, t]);
        let s = ModeSubset::new([0, 1], 3).unwrap();
        assert_eq!(restrict(&v, &s).unwrap(), vec_of(&[t, t, 0.0]));

        let full = ModeSubset::full(3).unwrap();
        assert_eq!(restrict(&v, &full).unwrap(), v);

        let v = vec_of(&[t, -t, t]);
        let s = ModeSubset::new([0, 2], 3).unwrap();
        assert_eq!(restrict(&v, &s).unwrap(), vec_of(&[t, 0.0, t]));
    }

    #[test]
    fn restrict_out_of_window() {
        let v = vec_of(&[1.0, 0.0]);
        let s = ModeSubset::new([0, 2], 3).unwrap();
        assert!(matches!(
            restrict(&v, &s),
            Err(Error::Bounds { bin: 2, window: 2 })
        ));
        assert!(ModeSubset::new([3], 3).is_err());
        assert!(ModeSubset::new(Vec::<usize>::new(), 3).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize(&vec_of(&[2.0, 0.0])).unwrap(),
            vec_of(&[1.0, 0.0])
        );
        let v = ModeVector::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let n = normalize(&v).unwrap();
        let s = 0.5f64.sqrt();
        assert!((n.amplitudes()[0] - c(s, 0.0)).norm() < 1e-15);
        assert!((n.amplitudes()[1] - c(0.0, s)).norm() < 1e-15);
        assert!(matches!(
            normalize(&vec_of(&[0.0, 0.0])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(ModeVector::new(vec![c(f64::NAN, 0.0)]).is_err());
        assert!(ModeVector::new(vec![c(0.0, f64::INFINITY)]).is_err());
        assert!(ModeVector::new(vec![]).is_err());
    }

    #[test]
    fn physicality() {
        assert!(vec_of(&[0.6, 0.8]).is_physical());
        assert!(vec_of(&[0.5, 0.5]).is_physical());
        assert!(!vec_of(&[1.0, 0.1]).is_physical());
    }

    #[test]
    fn canonical_phase_makes_first_entry_positive() {
        let v = ModeVector::new(vec![c(0.0, 0.0), c(0.0, -0.6), c(0.8, 0.0)]).unwrap();
        let cv = v.canonical_phase();
        assert!((cv.amplitudes()[1] - c(0.6, 0.0)).norm() < 1e-15);
        assert!((cv.amplitudes()[2] - c(0.0, 0.8)).norm() < 1e-15);
        assert!(v.equal_up_to_global_phase(&cv, 1e-12).unwrap());
    }

    #[test]
    fn global_phase_comparison_detects_relative_phase() {
        let s = 0.5f64.sqrt();
        let a = ModeVector::new(vec![c(s, 0.0), c(s, 0.0)]).unwrap();
        let b = ModeVector::new(vec![c(0.0, s), c(0.0, s)]).unwrap();
        let d = ModeVector::new(vec![c(s, 0.0), c(0.0, s)]).unwrap();
        assert!(a.equal_up_to_global_phase(&b, PHASE_TOLERANCE).unwrap());
        assert!(!a.equal_up_to_global_phase(&d, PHASE_TOLERANCE).unwrap());
    }

    fn arb_pair(max_w: usize) -> impl Strategy<Value = (ModeVector, ModeVector)> {
        (1..=max_w).prop_flat_map(|w| {
            (
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), w),
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), w),
            )
                .prop_map(|(a, b)| {
                    let to = |v: Vec<(f64, f64)>| {
                        ModeVector::new(v.into_iter().map(|(r, i)| c(r, i)).collect()).unwrap()
                    };
                    (to(a), to(b))
                })
        })
    }

    proptest! {
        #[test]
        fn self_product_is_squared_norm((a, _b) in arb_pair(8)) {
            let ip = inner_product(&a, &a).unwrap();
            prop_assert!(ip.im.abs() < 1e-12);
            prop_assert!(ip.re >= 0.0);
            prop_assert!((ip.re - a.norm_sqr()).abs() < 1e-12);
        }

        #[test]
        fn cauchy_schwarz((a, b) in arb_pair(8)) {
            let ab = inner_product(&a, &b).unwrap().norm_sqr();
            let aa = inner_product(&a, &a).unwrap().re;
            let bb = inner_product(&b, &b).unwrap().re;
            prop_assert!(ab <= aa * bb + 1e-12);
        }

        #[test]
        fn restrict_idempotent_and_consistent(
            (a, b) in arb_pair(8),
            mask in prop::collection::vec(any::<bool>(), 8),
        ) {
            let w = a.window();
            let mut bins: Vec<usize> = (0..w).filter(|&i| mask[i]).collect();
            if bins.is_empty() {
                bins.push(0);
            }
            let s = ModeSubset::new(bins, w).unwrap();
            let ra = restrict(&a, &s).unwrap();
            prop_assert_eq!(&restrict(&ra, &s).unwrap(), &ra);
            prop_assert!(ra.norm_sqr() <= a.norm_sqr() + 1e-15);

            let rb = restrict(&b, &s).unwrap();
            let both = inner_product(&ra, &rb).unwrap();
            let one = inner_product(&ra, &b).unwrap();
            prop_assert!((both - one).norm() < 1e-12);
        }
    }
}
