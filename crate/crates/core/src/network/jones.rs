//! Polarization coin operations applied by the EOM + quarter-wave plate pair.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// 2×2 Jones matrix in the (H, V) basis.
pub type JonesMatrix = Matrix2<Complex64>;

/// Setting of the programmable coin for one (roundtrip, bin).
///
/// Every setting is the rotation `[[cos θ, −i sin θ], [−i sin θ, cos θ]]`;
/// `Transmit`, `Reflect` and `Balanced` are the three voltage levels the hardware
/// supports, at θ = 0, π/2 and π/4.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoinSetting {
    #[default]
    Transmit,
    Reflect,
    Balanced,
    Custom(f64),
}

impl CoinSetting {
    pub fn theta(self) -> f64 {
        match self {
            CoinSetting::Transmit => 0.0,
            CoinSetting::Reflect => FRAC_PI_2,
            CoinSetting::Balanced => FRAC_PI_4,
            CoinSetting::Custom(theta) => theta,
        }
    }

    pub fn is_hardware(self) -> bool {
        !matches!(self, CoinSetting::Custom(_))
    }

    /// Maps θ onto one of the hardware settings when it matches within `tol`.
    pub fn from_theta(theta: f64, tol: f64) -> CoinSetting {
        if theta.abs() <= tol {
            CoinSetting::Transmit
        } else if (theta - FRAC_PI_2).abs() <= tol {
            CoinSetting::Reflect
        } else if (theta - FRAC_PI_4).abs() <= tol {
            CoinSetting::Balanced
        } else {
            CoinSetting::Custom(theta)
        }
    }

    /// Same physical operation, ignoring how it was spelled.
    pub fn same_operation(self, other: CoinSetting) -> bool {
        self.theta() == other.theta()
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Quarter-wave plate at 45° to the {H, V} basis.
pub fn jones_qwp() -> JonesMatrix {
    let s = FRAC_1_SQRT_2;
    Matrix2::new(c(s, 0.0), c(0.0, -s), c(0.0, -s), c(s, 0.0))
}

/// EOM rotation for phase `phi`.
pub fn jones_eom(phi: f64) -> JonesMatrix {
    rotation(phi)
}

fn rotation(theta: f64) -> JonesMatrix {
    let (s, co) = theta.sin_cos();
    Matrix2::new(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
}

/// Combined EOM·QWP action, θ = φ + π/4. The hardware settings are built from exact
/// entries so that `Transmit` is the identity and `Reflect` has zero diagonal.
pub fn coin_matrix(setting: CoinSetting) -> JonesMatrix {
    match setting {
        CoinSetting::Transmit => JonesMatrix::identity(),
        CoinSetting::Reflect => Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0)),
        CoinSetting::Balanced => jones_qwp(),
        CoinSetting::Custom(theta) => rotation(theta),
    }
}
