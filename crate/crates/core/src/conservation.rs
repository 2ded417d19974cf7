//! Energy, modified energy and the remainder of the Λ_σ-conjugated equation.
//!
//! With `v = Λ_σ η` the conjugated equation carries an extra forcing
//!
//! ```text
//! N(v) = (¾ + γ∂ₓ²)∂ₓN₁ − κ∂ₓN₂ − ⅛∂ₓN₃
//! N₁ = v² − Λ_σ[(Λ_{−σ}v)²],  N₂ = v_x² − Λ_σ[(Λ_{−σ}v_x)²],  N₃ = v³ − Λ_σ[(Λ_{−σ}v)³]
//! ```
//!
//! and `d/dt E_σ[v] = ∫ v N(v) dx`. All functionals are evaluated spectrally.
//! Products use the same alias-free truncation as the time stepper, so the
//! energy identity holds exactly for the semi-discrete system.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    cumulative_quadrature_scalar, evolve, nonlinear_products, EvolutionState, Model, StepperConfig,
};
use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::scalar::Real;
use crate::spectral::SpectralField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub energy: f64,
    pub modified_energy: f64,
    pub sigma: f64,
    pub error_integral: f64,
    pub h2_norm_v: f64,
}

/// `½∫(η² + γ₁η_x² + δ₁η_xx²)dx = ½ L Σ varphi(ξ_k)|η̂_k|²`.
pub fn energy<T: Real>(eta_hat: &SpectralField<T>, p: &Parameters<T>) -> T {
    let grid = eta_hat.grid();
    let sum: T = eta_hat
        .coeffs()
        .iter()
        .zip(grid.frequencies())
        .map(|(c, &xi)| p.varphi(xi) * c.norm_sqr())
        .sum();
    T::lit(0.5) * grid.length() * sum
}

/// `E_σ[v]` with `v = Λ_σ η`.
pub fn modified_energy<T: Real>(
    eta_hat: &SpectralField<T>,
    sigma: T,
    p: &Parameters<T>,
) -> Result<T> {
    Ok(energy(&eta_hat.lambda_sigma(sigma)?, p))
}

/// The three pieces `N₁, N₂, N₃` of the remainder.
#[derive(Clone, Debug)]
pub struct RemainderParts<T: Real> {
    pub n1: SpectralField<T>,
    pub n2: SpectralField<T>,
    pub n3: SpectralField<T>,
}

pub fn remainder_parts<T: Real>(v_hat: &SpectralField<T>, sigma: T) -> Result<RemainderParts<T>> {
    let grid = v_hat.grid();
    grid.check_overflow(sigma)?;
    let eta = v_hat.lambda_sigma(-sigma)?;
    let [v2, vx2, v3] = nonlinear_products(grid, v_hat.coeffs());
    let [e2, ex2, e3] = nonlinear_products(grid, eta.coeffs());
    let weights: Vec<T> = grid
        .frequencies()
        .iter()
        .map(|&xi| (sigma * xi.abs()).exp())
        .collect();
    let part = |fv: Vec<Complex<T>>, fe: Vec<Complex<T>>| {
        let coeffs = fv
            .iter()
            .zip(&fe)
            .zip(&weights)
            .map(|((a, b), &w)| a - b.scale(w))
            .collect();
        v_hat.with_coeffs(coeffs)
    };
    Ok(RemainderParts {
        n1: part(v2, e2),
        n2: part(vx2, ex2),
        n3: part(v3, e3),
    })
}

/// `N̂(v)` assembled from its parts.
pub fn remainder<T: Real>(
    v_hat: &SpectralField<T>,
    sigma: T,
    p: &Parameters<T>,
) -> Result<SpectralField<T>> {
    let parts = remainder_parts(v_hat, sigma)?;
    let three_quarters = T::lit(0.75);
    let eighth = T::lit(0.125);
    let coeffs = v_hat
        .grid()
        .frequencies()
        .iter()
        .enumerate()
        .map(|(j, &xi)| {
            // (¾ − γξ²)N̂₁ − κN̂₂ − ⅛N̂₃, then ∂ₓ ↦ iξ
            let s = parts.n1.coeffs()[j].scale(three_quarters - p.gamma * xi * xi)
                - parts.n2.coeffs()[j].scale(p.gamma_slope)
                - parts.n3.coeffs()[j].scale(eighth);
            Complex::new(-s.im * xi, s.re * xi)
        })
        .collect();
    let mut out = v_hat.with_coeffs(coeffs);
    out.symmetrize();
    Ok(out)
}

/// Relative size of an imaginary part that still counts as roundoff.
const IMAG_TOLERANCE: f64 = 1e-10;

/// `L Σ_k Re(conj(f̂_k) ĝ_k) = ∫ f g dx` for real fields, checking the imaginary part.
pub fn pairing<T: Real>(f: &SpectralField<T>, g: &SpectralField<T>) -> Result<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut scale = T::zero();
    for (a, b) in f.coeffs().iter().zip(g.coeffs()) {
        acc = acc + a.conj() * b;
        scale = scale + a.norm() * b.norm();
    }
    let l = f.grid().length();
    if acc.im.abs().to_f64_lossy() > IMAG_TOLERANCE * scale.to_f64_lossy() {
        return Err(Error::SymmetryBroken {
            real: (l * acc.re).to_f64_lossy(),
            imag: (l * acc.im).to_f64_lossy(),
        });
    }
    Ok(l * acc.re)
}

/// `∫ v N(v) dx`.
pub fn error_integral<T: Real>(v_hat: &SpectralField<T>, sigma: T, p: &Parameters<T>) -> Result<T> {
    pairing(v_hat, &remainder(v_hat, sigma, p)?)
}

/// One evaluation of `p_σ` or `q_σ` against its bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSample {
    pub frequencies: Vec<f64>,
    pub sigma: f64,
    pub value: f64,
    pub bound: f64,
}

impl MultiplierSample {
    /// `0 ≤ value ≤ bound`, allowing a few ulps of rounding in the bound.
    pub fn holds(&self) -> bool {
        self.value >= 0.0 && self.value <= self.bound * (1.0 + 4.0 * f64::EPSILON)
    }
}

/// `1 − e^{−σr}` evaluated without cancellation.
fn one_minus_exp(sigma: f64, r: f64) -> f64 {
    -(-sigma * r).exp_m1()
}

/// `p_σ(ξ₁,ξ₂) = 1 − exp(−σ[|ξ₁| + |ξ₂| − |ξ₁+ξ₂|])` against `2σ·min(|ξ₁|,|ξ₂|)`.
pub fn p_bound_check(xi1: f64, xi2: f64, sigma: f64) -> MultiplierSample {
    let r = xi1.abs() + xi2.abs() - (xi1 + xi2).abs();
    MultiplierSample {
        frequencies: vec![xi1, xi2],
        sigma,
        value: one_minus_exp(sigma, r),
        bound: 2.0 * sigma * xi1.abs().min(xi2.abs()),
    }
}

/// Second smallest of three values.
pub fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

/// `q_σ(ξ₁,ξ₂,ξ₃) = 1 − exp(−σ[Σ|ξ_j| − |Σξ_j|])` against `12σ·med(|ξ_j|)`.
pub fn q_bound_check(xi1: f64, xi2: f64, xi3: f64, sigma: f64) -> MultiplierSample {
    let r = xi1.abs() + xi2.abs() + xi3.abs() - (xi1 + xi2 + xi3).abs();
    MultiplierSample {
        frequencies: vec![xi1, xi2, xi3],
        sigma,
        value: one_minus_exp(sigma, r),
        bound: 12.0 * sigma * median3(xi1.abs(), xi2.abs(), xi3.abs()),
    }
}

/// Outcome of the almost-conservation experiment at one σ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostConservation {
    pub sigma: f64,
    pub initial_modified_energy: f64,
    /// `sup_t |E_σ[v(t)] − E_σ[v₀]|`.
    pub sup_deviation: f64,
    /// `σ(1 + E_σ[v₀]^{1/2}) E_σ[v₀]^{3/2}`.
    pub predicted: f64,
    /// `max_t |(E_σ[v(t)] − E_σ[v₀]) − ∫₀ᵗ∫vN dx ds| / sup_deviation`.
    pub identity_mismatch: f64,
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub integrated: Vec<f64>,
}

impl AlmostConservation {
    pub fn ratio(&self) -> f64 {
        self.sup_deviation / self.predicted
    }
}

/// Evolves `η₀` over `[0, t_span]` and compares the drift of `E_σ[v(t)]`
/// with the time integral of `∫ v N(v) dx` sampled at every step.
pub fn almost_conservation_experiment<T: Real>(
    model: &Model<T>,
    eta0_hat: &SpectralField<T>,
    sigma: T,
    cfg: &StepperConfig,
    t_span: T,
) -> Result<AlmostConservation> {
    let p = *model.params();
    let mut samples: Vec<(f64, f64, f64)> = Vec::new();
    let mut record = |s: &EvolutionState<T>| -> Result<()> {
        let v = s.eta_hat.lambda_sigma(sigma)?;
        samples.push((
            s.t.to_f64_lossy(),
            energy(&v, &p).to_f64_lossy(),
            error_integral(&v, sigma, &p)?.to_f64_lossy(),
        ));
        Ok(())
    };
    let start = EvolutionState::new(T::zero(), eta0_hat.clone());
    let steps = ((t_span.to_f64_lossy() / cfg.dt) * (1.0 - 1e-12))
        .ceil()
        .max(4.0) as usize;
    let h = t_span / T::count(steps);
    let fine = StepperConfig {
        dt: h.to_f64_lossy(),
        ..*cfg
    };
    evolve(model, start, t_span, &fine, h, &mut [&mut record])?;

    let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let e0 = samples[0].1;
    let deviations: Vec<f64> = samples.iter().map(|s| s.1 - e0).collect();
    let rates: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let integrated = cumulative_quadrature_scalar(&rates, h.to_f64_lossy());
    let sup_deviation = deviations.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let worst = deviations
        .iter()
        .zip(&integrated)
        .fold(0.0f64, |m, (d, q)| m.max((d - q).abs()));
    let identity_mismatch = if sup_deviation > 0.0 {
        worst / sup_deviation
    } else {
        worst
    };
    let sigma = sigma.to_f64_lossy();
    Ok(AlmostConservation {
        sigma,
        initial_modified_energy: e0,
        sup_deviation,
        predicted: sigma * (1.0 + e0.sqrt()) * e0.powf(1.5),
        identity_mismatch,
        times,
        deviations,
        integrated,
    })
}
