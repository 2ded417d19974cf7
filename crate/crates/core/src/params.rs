//! Model constants and the rational Fourier symbols of the equation
//!
//! ```text
//! η_t + η_x − γ₁η_txx + γ₂η_xxx + δ₁η_txxxx + δ₂η_xxxxx
//!     = −¾(η²)_x − γ(η²)_xxx + κ(η_x²)_x + ⅛(η³)_x
//! ```
//!
//! where κ is the slope coefficient (7/48 in the energy-conserving model).
//! Dividing the Fourier transform by `varphi(ξ) = 1 + γ₁ξ² + δ₁ξ⁴` gives
//! the dispersion symbol `phi` and the nonlinear symbols `psi`, `tau`.
//!
//! Everything here only needs field arithmetic, so it is generic over
//! [`num_traits::Num`] and runs on `f32`, `f64` or exact rationals alike.

use num_traits::{Num, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` built from repeated `one()` additions, so it works for any `Num`.
fn small<T: Num + Copy>(n: u8) -> T {
    (0..n).fold(T::zero(), |acc, _| acc + T::one())
}

/// The value 7/48 in `T`.
pub fn seven_48ths<T: Num + Copy>() -> T {
    small::<T>(7) / small::<T>(48)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters<T> {
    /// Coefficient of ∂ₜ∂ₓ².
    pub gamma1: T,
    /// Coefficient of ∂ₓ³.
    pub gamma2: T,
    /// Coefficient of ∂ₜ∂ₓ⁴.
    pub delta1: T,
    /// Coefficient of ∂ₓ⁵.
    pub delta2: T,
    /// Coefficient of ∂ₓ³(η²).
    pub gamma: T,
    /// Coefficient of ∂ₓ(η_x²). Equal to `gamma` unless set explicitly.
    pub gamma_slope: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    /// Dispersion relation ξ(1 − γ₂ξ² + δ₂ξ⁴)/varphi(ξ).
    Phi,
    /// ξ/varphi(ξ).
    Psi,
    /// ξ(3 − 4γξ²)/(4 varphi(ξ)).
    Tau,
    /// Shared denominator 1 + γ₁ξ² + δ₁ξ⁴.
    Varphi,
}

impl SymbolKind {
    pub const ALL: [SymbolKind; 4] = [
        SymbolKind::Phi,
        SymbolKind::Psi,
        SymbolKind::Tau,
        SymbolKind::Varphi,
    ];

    /// True for the odd symbols (`Phi`, `Psi`, `Tau`).
    pub fn is_odd(self) -> bool {
        !matches!(self, SymbolKind::Varphi)
    }
}

impl<T: Num + Copy> Parameters<T> {
    /// Parameters with the slope coefficient tied to `gamma`.
    pub fn new(gamma1: T, gamma2: T, delta1: T, delta2: T, gamma: T) -> Self {
        Self {
            gamma1,
            gamma2,
            delta1,
            delta2,
            gamma,
            gamma_slope: gamma,
        }
    }

    /// γ₁ = γ₂ = δ₁ = δ₂ = 1 and γ = 7/48.
    pub fn default_set() -> Self {
        let one = T::one();
        Self::new(one, one, one, one, seven_48ths())
    }

    pub fn with_gamma_slope(mut self, gamma_slope: T) -> Self {
        self.gamma_slope = gamma_slope;
        self
    }

    /// True iff γ and the slope coefficient both equal 7/48 in `T`.
    pub fn energy_conserving(&self) -> bool {
        let target = seven_48ths::<T>();
        self.gamma == target && self.gamma_slope == target
    }

    /// `1 + γ₁ξ² + δ₁ξ⁴`.
    pub fn varphi(&self, xi: T) -> T {
        let xi2 = xi * xi;
        T::one() + self.gamma1 * xi2 + self.delta1 * xi2 * xi2
    }

    pub fn symbol(&self, kind: SymbolKind, xi: T) -> T {
        match kind {
            SymbolKind::Varphi => self.varphi(xi),
            SymbolKind::Phi => self.phi(xi),
            SymbolKind::Psi => self.psi(xi),
            SymbolKind::Tau => self.tau(xi),
        }
    }

    pub fn phi(&self, xi: T) -> T {
        let xi2 = xi * xi;
        xi * (T::one() - self.gamma2 * xi2 + self.delta2 * xi2 * xi2) / self.varphi(xi)
    }

    pub fn psi(&self, xi: T) -> T {
        xi / self.varphi(xi)
    }

    pub fn tau(&self, xi: T) -> T {
        let four = small::<T>(4);
        xi * (small::<T>(3) - four * self.gamma * xi * xi) / (four * self.varphi(xi))
    }
}

impl<T: Num + Copy + PartialOrd> Parameters<T> {
    /// Checks the hypotheses the analysis relies on: γ₁ > 0 and δ₁ > 0.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 > T::zero()) {
            return Err(Error::InvalidParameters("gamma1 must be > 0".into()));
        }
        if !(self.delta1 > T::zero()) {
            return Err(Error::InvalidParameters("delta1 must be > 0".into()));
        }
        Ok(())
    }
}

impl<T: Num + Copy> Default for Parameters<T> {
    fn default() -> Self {
        Self::default_set()
    }
}

impl<T: Zero + Copy> Parameters<T> {
    /// Converts every coefficient with `f`.
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Parameters<U> {
        Parameters {
            gamma1: f(self.gamma1),
            gamma2: f(self.gamma2),
            delta1: f(self.delta1),
            delta2: f(self.delta2),
            gamma: f(self.gamma),
            gamma_slope: f(self.gamma_slope),
        }
    }
}
