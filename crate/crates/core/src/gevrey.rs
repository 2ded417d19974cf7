//! Gevrey/Sobolev norms, analytic test data and the analyticity-radius estimator.
//!
//! A function in `G^{σ,s}` extends holomorphically to the strip `|Im z| < σ`,
//! and its Fourier coefficients decay like `e^{−σ|ξ|}`. On a finite grid every
//! norm is finite, so the radius is read off the slope of `ln|coeff(k)|`
//! against `|ξ_k|` on the resolved tail instead.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{Grid, RealField, SpectralField};

/// A point `(σ, s)` of the Gevrey scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyPair<T> {
    pub sigma: T,
    pub s: T,
}

impl<T: Real> GevreyPair<T> {
    pub fn new(sigma: T, s: T) -> Result<Self> {
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        if !s.is_finite() {
            return Err(Error::InvalidArgument(
                "Sobolev index must be finite".into(),
            ));
        }
        Ok(Self { sigma, s })
    }

    /// `(0, s)`: the plain Sobolev space `H^s`.
    pub fn sobolev(s: T) -> Self {
        Self {
            sigma: T::zero(),
            s,
        }
    }
}

/// `‖e^{σ|D|}⟨D⟩^s f‖_{L²}` with `⟨ξ⟩ = sqrt(1+ξ²)`.
///
/// Weights are applied before squaring, and the sum is rescaled by its largest
/// term, so the result is representable whenever the guard passes.
pub fn gevrey_norm<T: Real>(field: &SpectralField<T>, gp: GevreyPair<T>) -> Result<T> {
    let grid = field.grid();
    grid.check_overflow(gp.sigma)?;
    let half_s = gp.s * T::lit(0.5);
    let terms: Vec<T> = field
        .coeffs()
        .iter()
        .zip(grid.frequencies())
        .map(|(c, &xi)| (gp.sigma * xi.abs()).exp() * (T::one() + xi * xi).powf(half_s) * c.norm())
        .collect();
    Ok(scaled_l2(&terms) * grid.length().sqrt())
}

/// `sqrt(Σ a²)` without intermediate overflow.
fn scaled_l2<T: Real>(terms: &[T]) -> T {
    let big = terms.iter().fold(T::zero(), |m, &a| m.max(a.abs()));
    if big == T::zero() {
        return T::zero();
    }
    big * terms
        .iter()
        .map(|&a| (a / big) * (a / big))
        .sum::<T>()
        .sqrt()
}

pub fn sobolev_norm<T: Real>(field: &SpectralField<T>, s: T) -> T {
    gevrey_norm(field, GevreyPair::sobolev(s)).expect("sigma = 0 never overflows")
}

/// `‖F‖_{G^{σ,s}} / ‖F‖_{G^{σ',s'}}` for `σ < σ'`; zero for the zero field.
pub fn check_embedding<T: Real>(
    field: &SpectralField<T>,
    small: GevreyPair<T>,
    big: GevreyPair<T>,
) -> Result<T> {
    if !(small.sigma < big.sigma) {
        return Err(Error::InvalidArgument(format!(
            "embedding needs sigma < sigma', got {} and {}",
            small.sigma, big.sigma
        )));
    }
    let den = gevrey_norm(field, big)?;
    if den == T::zero() {
        return Ok(T::zero());
    }
    Ok(gevrey_norm(field, small)? / den)
}

/// Smallest relative coefficient kept by the data generators.
fn generator_floor<T: Real>() -> T {
    T::epsilon() * T::lit(1e-3)
}

/// Periodized Poisson kernel: `coeff(k) = amplitude·e^{−σ₀|ξ_k|}`.
///
/// Its holomorphic extension lives exactly on the strip `|Im z| < σ₀`.
/// Coefficients below machine precision relative to the mean are dropped.
pub fn poisson_kernel_spectrum<T: Real>(
    grid: &Grid<T>,
    sigma0: T,
    amplitude: T,
) -> Result<SpectralField<T>> {
    if !(sigma0 > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "sigma0 must be > 0, got {sigma0}"
        )));
    }
    let floor = generator_floor::<T>();
    SpectralField::from_spectrum(grid, |xi| {
        let decay = (-sigma0 * xi.abs()).exp();
        let c = if decay < floor {
            T::zero()
        } else {
            amplitude * decay
        };
        Complex::new(c, T::zero())
    })
}

pub fn poisson_kernel_data<T: Real>(
    grid: &Grid<T>,
    sigma0: T,
    amplitude: T,
) -> Result<RealField<T>> {
    Ok(poisson_kernel_spectrum(grid, sigma0, amplitude)?.inverse())
}

/// Same envelope as the Poisson kernel with seeded random phases.
pub fn mode_sum_spectrum<T: Real>(
    grid: &Grid<T>,
    sigma0: T,
    amplitude: T,
    seed: u64,
) -> Result<SpectralField<T>> {
    if !(sigma0 > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "sigma0 must be > 0, got {sigma0}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_modes();
    let floor = generator_floor::<T>();
    let mut field = SpectralField::zeros(grid);
    for k in 1..(n / 2) as i64 {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let xi = grid.frequencies()[k as usize];
        let decay = (-sigma0 * xi.abs()).exp();
        if decay < floor {
            continue;
        }
        let c = Complex::from_polar(amplitude * decay, T::lit(theta));
        field.set_mode(k, c)?;
    }
    Ok(field)
}

/// Periodized `amplitude·exp(−x²/width²)` centred at `x = 0`. Entire, so its
/// radius is unbounded.
pub fn gaussian_bump_spectrum<T: Real>(
    grid: &Grid<T>,
    amplitude: T,
    width: T,
) -> Result<SpectralField<T>> {
    if !(width > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "width must be > 0, got {width}"
        )));
    }
    let pre = amplitude * T::PI().sqrt() * width / grid.length();
    let quarter = T::lit(0.25);
    SpectralField::from_spectrum(grid, |xi| {
        Complex::new(
            pre * (-(xi * width) * (xi * width) * quarter).exp(),
            T::zero(),
        )
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusOptions {
    /// Noise floor relative to the largest coefficient.
    pub floor: f64,
    /// Fraction of the active modes (from the top) used in the fit.
    pub window_fraction: f64,
}

impl Default for RadiusOptions {
    fn default() -> Self {
        Self {
            floor: 1e-13,
            window_fraction: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub sigma_hat: f64,
    /// Inclusive wavenumber window `(k_min, k_max)` of the fit.
    pub fit_range: (usize, usize),
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// Fewer than 8 modes stayed above the floor.
    pub floor_hit: bool,
}

/// Modes needed above the floor before the decay is considered resolved.
const RESOLVED_MODES: usize = 8;
/// Fits need at least this many points.
const MIN_FIT_MODES: usize = 4;
/// The two highest retained modes carry dealiasing contamination.
const GUARD_MODES: usize = 2;

/// Least-squares fit of `ln|coeff(k)|` against `|ξ_k|` on the upper part of
/// the contiguous run of modes above `floor · max|coeff|`.
pub fn estimate_radius<T: Real>(
    field: &SpectralField<T>,
    opts: &RadiusOptions,
) -> Result<RadiusEstimate> {
    let grid = field.grid();
    let n = grid.n_modes();
    let mags: Vec<f64> = (0..n / 2)
        .map(|k| field.coeffs()[k].norm().to_f64_lossy())
        .collect();
    let peak = field.max_abs().to_f64_lossy();
    if !(peak > 0.0) {
        return Err(Error::InsufficientDecay { usable: 0 });
    }
    let threshold = opts.floor * peak;
    let active = mags[1..].iter().take_while(|&&m| m > threshold).count();
    let floor_hit = active < RESOLVED_MODES;

    let top = active.min(n / 2 - 1 - GUARD_MODES);
    let from_top = ((active as f64) * opts.window_fraction).ceil() as usize;
    let k_min = (active + 1).saturating_sub(from_top).max(1);
    if top < k_min || top + 1 - k_min < MIN_FIT_MODES {
        return Err(Error::InsufficientDecay {
            usable: (top + 1).saturating_sub(k_min),
        });
    }

    let xs: Vec<f64> = (k_min..=top)
        .map(|k| grid.frequencies()[k].abs().to_f64_lossy())
        .collect();
    let ys: Vec<f64> = (k_min..=top).map(|k| mags[k].ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(RadiusEstimate {
        sigma_hat: (-slope).max(0.0),
        fit_range: (k_min, top),
        residual,
        floor_hit,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_mode(g: &Grid<f64>, k: f64) -> SpectralField<f64> {
        RealField::from_fn(g, |x| (k * x).cos()).unwrap().forward()
    }

    /// Direct `sqrt(L Σ (1+ξ²)^s |c|²)` without the rescaled sum.
    fn sobolev_oracle(f: &SpectralField<f64>, s: f64) -> f64 {
        let mut acc = 0.0;
        for (c, xi) in f.coeffs().iter().zip(f.grid().frequencies()) {
            acc += (1.0 + xi * xi).powf(s) * c.norm_sqr();
        }
        (f.grid().length() * acc).sqrt()
    }

    #[test]
    fn gevrey_norm_hand_value() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let f = cos_mode(&g, 3.0);
        let v = gevrey_norm(&f, GevreyPair::new(0.1, 2.0).unwrap()).unwrap();
        // sqrt(2π · 2 · e^{0.6} · 100 · 0.25)
        let expect = (2.0 * PI * 2.0 * 0.6f64.exp() * 100.0 * 0.25).sqrt();
        assert!((v - expect).abs() < 1e-12 * expect);
        assert!((v - 23.926).abs() < 1e-3);
        let l2 = gevrey_norm(&f, GevreyPair::sobolev(0.0)).unwrap();
        assert!((l2 - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn sobolev_matches_direct_sum() {
        let g = Grid::new(64, 7.0).unwrap();
        let f = mode_sum_spectrum(&g, 0.3, 1.0, 5).unwrap();
        for s in [-1.0, 0.0, 1.0, 2.0, 3.5] {
            let a = sobolev_norm(&f, s);
            let b = sobolev_oracle(&f, s);
            assert!((a - b).abs() <= 1e-12 * b, "s={s}");
        }
    }

    #[test]
    fn lambda_identity_for_norms() {
        let g = Grid::new(128, 20.0).unwrap();
        let f = mode_sum_spectrum(&g, 0.4, 1.0, 11).unwrap();
        for sigma in [0.0f64, 0.05, 0.2, 0.5] {
            let lhs = sobolev_norm(&f.lambda_sigma(sigma).unwrap(), 2.0);
            let rhs = gevrey_norm(&f, GevreyPair::new(sigma, 2.0).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    #[test]
    fn embedding_single_mode_closed_form() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let f = cos_mode(&g, 5.0);
        let small = GevreyPair::new(0.1, 3.0).unwrap();
        let big = GevreyPair::new(0.4, 1.0).unwrap();
        let r = check_embedding(&f, small, big).unwrap();
        let expect = ((0.1 - 0.4) * 5.0f64).exp() * 26.0f64.powf(0.5 * (3.0 - 1.0));
        assert!((r - expect).abs() < 1e-13 * expect);

        let zero = SpectralField::zeros(&g);
        assert_eq!(check_embedding(&zero, small, big).unwrap(), 0.0);
        assert!(check_embedding(&f, big, small).is_err());
    }

    #[test]
    fn huge_weights_do_not_overflow() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let f = cos_mode(&g, 30.0);
        // e^{2·21·30} overflows; e^{21·30} does not.
        let v = gevrey_norm(&f, GevreyPair::new(21.0, 0.0).unwrap()).unwrap();
        assert!(v.is_finite() && v > 1e200);
    }

    #[test]
    fn poisson_data_edge_cases() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let zero = poisson_kernel_data(&g, 0.5, 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let flat = poisson_kernel_spectrum(&g, 1e3, 2.0).unwrap();
        assert_eq!(flat.coeff(0).re, 2.0);
        assert!(flat.coeffs()[1..].iter().all(|c| c.norm() == 0.0));
        assert!(poisson_kernel_data(&g, 0.0, 1.0).is_err());
    }

    #[test]
    fn radius_of_poisson_data() {
        let g = Grid::new(256, 2.0 * PI).unwrap();
        let f = poisson_kernel_spectrum(&g, 0.2, 1.0).unwrap();
        let est = estimate_radius(&f, &RadiusOptions::default()).unwrap();
        assert!((est.sigma_hat - 0.2).abs() < 1e-3 * 0.2);
        assert!(!est.floor_hit);
        assert_eq!(est.fit_range.1, 125);

        let g = Grid::new(128, 2.0 * PI).unwrap();
        let f = poisson_kernel_spectrum(&g, 0.5, 1.0).unwrap();
        let est = estimate_radius(&f, &RadiusOptions::default()).unwrap();
        assert!((est.sigma_hat - 0.5).abs() <= 0.005);
    }

    #[test]
    fn radius_is_scale_invariant() {
        let g = Grid::new(128, 30.0).unwrap();
        let f = mode_sum_spectrum(&g, 0.3, 1.0, 2).unwrap();
        let a = estimate_radius(&f, &RadiusOptions::default()).unwrap();
        let b = estimate_radius(&f.scale(1234.5), &RadiusOptions::default()).unwrap();
        assert!((a.sigma_hat - b.sigma_hat).abs() < 1e-9);
    }

    #[test]
    fn gaussian_tail_looks_entire() {
        let mut last = 0.0;
        for n in [32, 64, 128] {
            let g = Grid::new(n, 40.0).unwrap();
            let f = gaussian_bump_spectrum(&g, 1.0, 1.0).unwrap();
            let est = estimate_radius(&f, &RadiusOptions::default()).unwrap();
            assert!(est.sigma_hat > last, "n={n}: {est:?}");
            last = est.sigma_hat;
        }
        assert!(last > 1.0);
    }

    #[test]
    fn white_noise_has_no_decay() {
        let g = Grid::new(256, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut f = SpectralField::zeros(&g);
        for k in 1..128 {
            let c = Complex::from_polar(
                rng.gen_range(0.5..1.5),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            f.set_mode(k, c).unwrap();
        }
        let est = estimate_radius(&f, &RadiusOptions::default()).unwrap();
        assert!(est.sigma_hat < 0.01, "{est:?}");
        assert!(est.residual > 0.1);
    }

    #[test]
    fn too_few_modes_is_an_error() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let f = poisson_kernel_spectrum(&g, 0.1, 1.0).unwrap();
        assert!(matches!(
            estimate_radius(&f, &RadiusOptions::default()),
            Err(Error::InsufficientDecay { .. })
        ));
        assert!(estimate_radius(&SpectralField::zeros(&g), &RadiusOptions::default()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_sigma(seed in 0u64..1000, s1 in 0.0f64..1.0, ds in 0.0f64..1.0, s in -2.0f64..3.0) {
                let g = Grid::new(64, 10.0).unwrap();
                let f = mode_sum_spectrum(&g, 0.5, 1.0, seed).unwrap();
                let a = gevrey_norm(&f, GevreyPair::new(s1, s).unwrap()).unwrap();
                let b = gevrey_norm(&f, GevreyPair::new(s1 + ds, s).unwrap()).unwrap();
                prop_assert!(b >= a * (1.0 - 1e-15));
            }

            #[test]
            fn equal_index_embedding_is_contractive(seed in 0u64..1000, s1 in 0.0f64..1.0, ds in 1e-3f64..1.0) {
                let g = Grid::new(64, 10.0).unwrap();
                let f = mode_sum_spectrum(&g, 0.5, 1.0, seed).unwrap();
                let r = check_embedding(&f, GevreyPair::new(s1, 2.0).unwrap(),
                                        GevreyPair::new(s1 + ds, 2.0).unwrap()).unwrap();
                prop_assert!(r <= 1.0 + 1e-15);
            }
        }
    }
}
