//! Periodic grid, real/spectral fields and the Fourier-side operators.
//!
//! Coefficients use the normalization `c_k = (1/n) Σ_j f(x_j) e^{−i ξ_k x_j}`,
//! so `A cos(kx)` has `c_{±k} = A/2` and `‖f‖²_{L²} = L Σ_k |c_k|²`.
//! Spectral arrays are stored in FFT order: index `j` holds wavenumber
//! `j` for `j ≤ n/2` and `j − n` above, so the lattice is `−n/2+1 … n/2`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest admissible exponent `σ·max|ξ|` for the Gevrey weights.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

struct Plans<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// 3n/2 points: exact for quadratic products.
    forward_quad: Arc<dyn Fft<T>>,
    inverse_quad: Arc<dyn Fft<T>>,
    /// 2n points: exact for cubic products.
    forward_cubic: Arc<dyn Fft<T>>,
    inverse_cubic: Arc<dyn Fft<T>>,
}

struct GridInner<T: Real> {
    n_modes: usize,
    length: T,
    xi: Vec<T>,
    plans: Plans<T>,
}

/// Uniform periodic grid on `[0, L)` with `n_modes` collocation points.
///
/// Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridInner<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_modes", &self.inner.n_modes)
            .field("length", &self.inner.length)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n_modes == other.inner.n_modes
                && self.inner.length == other.inner.length)
    }
}

impl<T: Real> Grid<T> {
    pub fn new(n_modes: usize, length: T) -> Result<Self> {
        if n_modes < 8 || n_modes % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_modes must be even and >= 8, got {n_modes}"
            )));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "length must be > 0, got {length}"
            )));
        }
        let base = T::TAU() / length;
        let xi = (0..n_modes)
            .map(|j| base * T::lit(wavenumber_at(j, n_modes) as f64))
            .collect();
        let mut planner = FftPlanner::new();
        let quad = 3 * n_modes / 2;
        let cubic = 2 * n_modes;
        let plans = Plans {
            forward: planner.plan_fft_forward(n_modes),
            inverse: planner.plan_fft_inverse(n_modes),
            forward_quad: planner.plan_fft_forward(quad),
            inverse_quad: planner.plan_fft_inverse(quad),
            forward_cubic: planner.plan_fft_forward(cubic),
            inverse_cubic: planner.plan_fft_inverse(cubic),
        };
        Ok(Self {
            inner: Arc::new(GridInner {
                n_modes,
                length,
                xi,
                plans,
            }),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.inner.n_modes
    }

    pub fn length(&self) -> T {
        self.inner.length
    }

    pub fn dx(&self) -> T {
        self.inner.length / T::count(self.inner.n_modes)
    }

    /// Frequencies `ξ_k = 2πk/L` in storage order.
    pub fn frequencies(&self) -> &[T] {
        &self.inner.xi
    }

    /// Integer wavenumber stored at index `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        wavenumber_at(j, self.inner.n_modes)
    }

    /// Storage index of wavenumber `k`, if it lies on the lattice.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let n = self.inner.n_modes as i64;
        if k > n / 2 || k <= -n / 2 {
            return None;
        }
        Some(if k >= 0 { k as usize } else { (n + k) as usize })
    }

    /// Largest |ξ| on the lattice (the Nyquist frequency).
    pub fn xi_max(&self) -> T {
        self.inner.xi[self.inner.n_modes / 2].abs()
    }

    /// Collocation points `x_j = j L / n`.
    pub fn nodes(&self) -> Vec<T> {
        let dx = self.dx();
        (0..self.inner.n_modes).map(|j| dx * T::count(j)).collect()
    }

    pub(crate) fn ensure_same(&self, other: &Grid<T>) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Rejects `σ·max|ξ|` above [`OVERFLOW_EXPONENT`].
    pub fn check_overflow(&self, sigma: T) -> Result<()> {
        let exponent = (sigma * self.xi_max()).to_f64_lossy();
        if exponent > OVERFLOW_EXPONENT || exponent.is_nan() {
            return Err(Error::Overflow {
                exponent,
                limit: OVERFLOW_EXPONENT,
            });
        }
        Ok(())
    }
}

fn wavenumber_at(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Point values of a real field on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> RealField<T> {
    pub fn new(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_modes() {
            return Err(Error::SizeMismatch {
                expected: grid.n_modes(),
                got: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at node {j}"
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn forward(&self) -> SpectralField<T> {
        let n = self.grid.n_modes();
        let mut buf: Vec<Complex<T>> = self
            .values
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        self.grid.inner.plans.forward.process(&mut buf);
        let scale = T::one() / T::count(n);
        for c in &mut buf {
            *c = c.scale(scale);
        }
        let mut out = SpectralField {
            grid: self.grid.clone(),
            coeffs: buf,
        };
        out.symmetrize();
        out
    }

    /// Pointwise product with aliased modes removed (3n/2 zero padding).
    pub fn dealiased_product(&self, other: &RealField<T>) -> Result<RealField<T>> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.forward().product(&other.forward())?.inverse())
    }

    /// Pointwise triple product with aliased modes removed (2n zero padding).
    pub fn dealiased_triple(&self, g: &RealField<T>, h: &RealField<T>) -> Result<RealField<T>> {
        self.grid.ensure_same(&g.grid)?;
        self.grid.ensure_same(&h.grid)?;
        Ok(self.forward().triple(&g.forward(), &h.forward())?.inverse())
    }

    /// Discrete L² norm `sqrt(Δx Σ f_j²)`.
    pub fn l2_norm(&self) -> T {
        (self.grid.dx() * self.values.iter().map(|&v| v * v).sum::<T>()).sqrt()
    }
}

/// How a multiplier acts on conjugate symmetry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    /// Real and even in ξ: maps real fields to real fields.
    EvenReal,
    /// Imaginary and odd in ξ (e.g. ∂ₓ): maps real fields to real fields.
    OddImaginary,
    /// Real and odd in ξ: maps real fields to imaginary ones.
    OddReal,
    /// No symmetry is asserted on the result.
    General,
}

/// Fourier coefficients of a field on the lattice `−n/2+1 … n/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T: Real> {
    grid: Grid<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex::new(T::zero(), T::zero()); grid.n_modes()],
        }
    }

    /// Wraps coefficients given in storage order.
    pub fn from_coeffs(grid: &Grid<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(Error::SizeMismatch {
                expected: grid.n_modes(),
                got: coeffs.len(),
            });
        }
        if let Some(j) = coeffs
            .iter()
            .position(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "non-finite coefficient at wavenumber {}",
                grid.wavenumber(j)
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Real field with `coeff(k) = f(ξ_k)` for `0 ≤ k < n/2`, mirrored by
    /// conjugation. The Nyquist mode is left at zero, matching the space the
    /// evolution acts on.
    pub fn from_spectrum(grid: &Grid<T>, f: impl Fn(T) -> Complex<T>) -> Result<Self> {
        let n = grid.n_modes();
        let mut out = Self::zeros(grid);
        for j in 0..n / 2 {
            let c = f(grid.frequencies()[j]);
            out.coeffs[j] = c;
            if j > 0 {
                out.coeffs[n - j] = c.conj();
            }
        }
        out.symmetrize();
        Self::from_coeffs(grid, out.coeffs)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex<T>> {
        self.coeffs
    }

    /// Coefficient of wavenumber `k`; zero off the lattice.
    pub fn coeff(&self, k: i64) -> Complex<T> {
        self.grid
            .index_of(k)
            .map(|j| self.coeffs[j])
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Sets mode `k` and its conjugate partner `−k`.
    pub fn set_mode(&mut self, k: i64, value: Complex<T>) -> Result<()> {
        let n = self.grid.n_modes() as i64;
        let j = self
            .grid
            .index_of(k)
            .ok_or_else(|| Error::InvalidArgument(format!("wavenumber {k} not on the lattice")))?;
        if k == 0 || k == n / 2 {
            self.coeffs[j] = Complex::new(value.re, T::zero());
        } else {
            self.coeffs[j] = value;
            self.coeffs[self.grid.index_of(-k).unwrap()] = value.conj();
        }
        Ok(())
    }

    pub fn inverse(&self) -> RealField<T> {
        let mut buf = self.coeffs.clone();
        self.grid.inner.plans.inverse.process(&mut buf);
        RealField {
            grid: self.grid.clone(),
            values: buf.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Projects onto `coeff(−k) = conj(coeff(k))`; the mean and Nyquist become real.
    pub fn symmetrize(&mut self) {
        let n = self.coeffs.len();
        let half = T::lit(0.5);
        for j in 1..n / 2 {
            let m = (self.coeffs[j] + self.coeffs[n - j].conj()).scale(half);
            self.coeffs[j] = m;
            self.coeffs[n - j] = m.conj();
        }
        self.coeffs[0].im = T::zero();
        self.coeffs[n / 2].im = T::zero();
    }

    /// Projects onto `coeff(−k) = −conj(coeff(k))` (purely imaginary fields).
    pub fn antisymmetrize(&mut self) {
        let n = self.coeffs.len();
        let half = T::lit(0.5);
        for j in 1..n / 2 {
            let m = (self.coeffs[j] - self.coeffs[n - j].conj()).scale(half);
            self.coeffs[j] = m;
            self.coeffs[n - j] = -m.conj();
        }
        self.coeffs[0].re = T::zero();
        self.coeffs[n / 2].re = T::zero();
    }

    /// `max_k |coeff(−k) − conj(coeff(k))|` over the paired modes.
    pub fn symmetry_defect(&self) -> T {
        let n = self.coeffs.len();
        let mut worst = self.coeffs[0].im.abs().max(self.coeffs[n / 2].im.abs());
        for j in 1..n / 2 {
            worst = worst.max((self.coeffs[n - j] - self.coeffs[j].conj()).norm());
        }
        worst
    }

    fn settle(&mut self, parity: Parity) {
        let nyq = self.coeffs.len() / 2;
        match parity {
            Parity::EvenReal => self.symmetrize(),
            Parity::OddImaginary => {
                self.coeffs[nyq] = Complex::new(T::zero(), T::zero());
                self.symmetrize();
            }
            Parity::OddReal => {
                self.coeffs[nyq] = Complex::new(T::zero(), T::zero());
                self.antisymmetrize();
            }
            Parity::General => {}
        }
    }

    /// `coeff(k) ↦ m(ξ_k)·coeff(k)`, then re-imposes the symmetry implied by `parity`.
    ///
    /// Odd multipliers annihilate the Nyquist mode, whose sign is ambiguous.
    pub fn apply_multiplier(&self, m: impl Fn(T) -> Complex<T>, parity: Parity) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (c, &xi) in self.coeffs.iter().zip(self.grid.frequencies()) {
            let w = m(xi);
            if !(w.re.is_finite() && w.im.is_finite()) {
                return Err(Error::NonFiniteMultiplier {
                    xi: xi.to_f64_lossy(),
                });
            }
            coeffs.push(c * w);
        }
        let mut out = Self {
            grid: self.grid.clone(),
            coeffs,
        };
        out.settle(parity);
        Ok(out)
    }

    /// Real-valued symbol version of [`apply_multiplier`](Self::apply_multiplier).
    pub fn apply_real_symbol(&self, m: impl Fn(T) -> T, parity: Parity) -> Result<Self> {
        self.apply_multiplier(|xi| Complex::new(m(xi), T::zero()), parity)
    }

    /// `∂ₓ^order`, i.e. the multiplier `(iξ)^order`.
    pub fn derivative(&self, order: u32) -> Self {
        let parity = if order % 2 == 0 {
            Parity::EvenReal
        } else {
            Parity::OddImaginary
        };
        let i = Complex::new(T::zero(), T::one());
        self.apply_multiplier(|xi| (i * xi).powu(order), parity)
            .expect("derivative multiplier is finite")
    }

    /// `Λ_σ = e^{σ|D_x|}`: `coeff(k) ↦ e^{σ|ξ_k|} coeff(k)`.
    pub fn lambda_sigma(&self, sigma: T) -> Result<Self> {
        self.grid.check_overflow(sigma)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.grid.frequencies())
            .map(|(c, &xi)| c.scale((sigma * xi.abs()).exp()))
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            coeffs,
        })
    }

    /// Dealiased spectral product (3n/2 zero padding), exact on retained modes.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let d = Dealias::quadratic(&self.grid);
        let (a, b) = d.to_physical_pair(&self.coeffs, &other.coeffs);
        let prod: Vec<T> = a.iter().zip(&b).map(|(&x, &y)| x * y).collect();
        Ok(self.with_coeffs(d.to_spectral(&prod)))
    }

    /// Dealiased spectral triple product (2n zero padding).
    pub fn triple(&self, g: &Self, h: &Self) -> Result<Self> {
        self.grid.ensure_same(&g.grid)?;
        self.grid.ensure_same(&h.grid)?;
        let d = Dealias::cubic(&self.grid);
        let (a, b) = d.to_physical_pair(&self.coeffs, &g.coeffs);
        let c = d.to_physical(&h.coeffs);
        let prod: Vec<T> = a
            .iter()
            .zip(&b)
            .zip(&c)
            .map(|((&x, &y), &z)| x * y * z)
            .collect();
        Ok(self.with_coeffs(d.to_spectral(&prod)))
    }

    pub(crate) fn with_coeffs(&self, coeffs: Vec<Complex<T>>) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn scale(&self, a: T) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|c| c.scale(a)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `sqrt(L Σ|coeff(k)|²)`, the L² norm via Parseval.
    pub fn l2_norm(&self) -> T {
        (self.grid.length() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<T>()).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.coeffs.iter().map(|c| c.norm()).fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Zero-padded transforms used to form exact (alias-free) products.
pub(crate) struct Dealias<'a, T: Real> {
    grid: &'a Grid<T>,
    padded: usize,
    forward: &'a Arc<dyn Fft<T>>,
    inverse: &'a Arc<dyn Fft<T>>,
}

impl<'a, T: Real> Dealias<'a, T> {
    pub(crate) fn quadratic(grid: &'a Grid<T>) -> Self {
        let p = &grid.inner.plans;
        Self {
            grid,
            padded: 3 * grid.n_modes() / 2,
            forward: &p.forward_quad,
            inverse: &p.inverse_quad,
        }
    }

    pub(crate) fn cubic(grid: &'a Grid<T>) -> Self {
        let p = &grid.inner.plans;
        Self {
            grid,
            padded: 2 * grid.n_modes(),
            forward: &p.forward_cubic,
            inverse: &p.inverse_cubic,
        }
    }

    /// Copies retained modes `|k| < n/2` into the padded layout. Nyquist is dropped.
    fn pad_into(&self, src: &[Complex<T>], dst: &mut [Complex<T>], rotate: Complex<T>) {
        let n = self.grid.n_modes();
        let m = self.padded;
        for j in 0..n / 2 {
            dst[j] = dst[j] + src[j] * rotate;
        }
        for k in 1..n / 2 {
            dst[m - k] = dst[m - k] + src[n - k] * rotate;
        }
    }

    /// Point values of one real spectral field on the padded grid.
    pub(crate) fn to_physical(&self, a: &[Complex<T>]) -> Vec<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let mut buf = vec![zero; self.padded];
        self.pad_into(a, &mut buf, Complex::new(T::one(), T::zero()));
        self.inverse.process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Point values of two real spectral fields from a single complex transform.
    pub(crate) fn to_physical_pair(&self, a: &[Complex<T>], b: &[Complex<T>]) -> (Vec<T>, Vec<T>) {
        let zero = Complex::new(T::zero(), T::zero());
        let mut buf = vec![zero; self.padded];
        self.pad_into(a, &mut buf, Complex::new(T::one(), T::zero()));
        self.pad_into(b, &mut buf, Complex::new(T::zero(), T::one()));
        self.inverse.process(&mut buf);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    fn truncate(&self, w: &[Complex<T>], j: usize) -> Complex<T> {
        let n = self.grid.n_modes();
        if j < n / 2 {
            w[j]
        } else {
            w[self.padded - (n - j)]
        }
    }

    /// Spectrum of a real padded-grid field, truncated to the retained modes.
    pub(crate) fn to_spectral(&self, x: &[T]) -> Vec<Complex<T>> {
        let n = self.grid.n_modes();
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward.process(&mut buf);
        let scale = T::one() / T::count(self.padded);
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; n];
        out[0] = Complex::new(buf[0].re * scale, T::zero());
        for j in 1..n / 2 {
            let m = (buf[j] + buf[self.padded - j].conj()).scale(scale * T::lit(0.5));
            out[j] = m;
            out[n - j] = m.conj();
        }
        out
    }

    /// Spectra of two real padded-grid fields from a single complex transform.
    pub(crate) fn to_spectral_pair(&self, x: &[T], y: &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let n = self.grid.n_modes();
        let mut buf: Vec<Complex<T>> = x.iter().zip(y).map(|(&a, &b)| Complex::new(a, b)).collect();
        self.forward.process(&mut buf);
        let half = T::lit(0.5) / T::count(self.padded);
        let zero = Complex::new(T::zero(), T::zero());
        let mut a = vec![zero; n];
        let mut b = vec![zero; n];
        for j in 0..n / 2 {
            let w = self.truncate(&buf, j);
            let wm = if j == 0 {
                buf[0]
            } else {
                self.truncate(&buf, n - j)
            };
            let sa = (w + wm.conj()).scale(half);
            // (w − conj(w₋))/(2i)
            let d = w - wm.conj();
            let sb = Complex::new(d.im, -d.re).scale(half);
            if j == 0 {
                a[0] = Complex::new(sa.re, T::zero());
                b[0] = Complex::new(sb.re, T::zero());
            } else {
                a[j] = sa;
                a[n - j] = sa.conj();
                b[j] = sb;
                b[n - j] = sb.conj();
            }
        }
        (a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize, l: f64) -> Grid<f64> {
        Grid::new(n, l).unwrap()
    }

    fn cos_field(g: &Grid<f64>, k: f64) -> RealField<f64> {
        RealField::from_fn(g, |x| (k * x).cos()).unwrap()
    }

    /// O(n²) convolution on the lattice restricted to |k| < n/2.
    fn brute_convolution(a: &SpectralField<f64>, b: &SpectralField<f64>) -> Vec<Complex<f64>> {
        let n = a.grid().n_modes() as i64;
        let mut out = vec![Complex::new(0.0, 0.0); n as usize];
        for k in -(n / 2 - 1)..n / 2 {
            let mut s = Complex::new(0.0, 0.0);
            for k1 in -(n / 2 - 1)..n / 2 {
                let k2 = k - k1;
                if k2.abs() < n / 2 {
                    s += a.coeff(k1) * b.coeff(k2);
                }
            }
            out[a.grid().index_of(k).unwrap()] = s;
        }
        out
    }

    fn brute_triple(
        a: &SpectralField<f64>,
        b: &SpectralField<f64>,
        c: &SpectralField<f64>,
    ) -> Vec<Complex<f64>> {
        let n = a.grid().n_modes() as i64;
        let h = n / 2;
        let mut out = vec![Complex::new(0.0, 0.0); n as usize];
        for k in -(h - 1)..h {
            let mut s = Complex::new(0.0, 0.0);
            for k1 in -(h - 1)..h {
                for k2 in -(h - 1)..h {
                    let k3 = k - k1 - k2;
                    if k3.abs() < h {
                        s += a.coeff(k1) * b.coeff(k2) * c.coeff(k3);
                    }
                }
            }
            out[a.grid().index_of(k).unwrap()] = s;
        }
        out
    }

    fn random_band_limited(g: &Grid<f64>, kmax: i64, rng: &mut ChaCha8Rng) -> SpectralField<f64> {
        let mut f = SpectralField::zeros(g);
        for k in 0..=kmax {
            f.set_mode(
                k,
                Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
            .unwrap();
        }
        f
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::<f64>::new(6, 1.0).is_err());
        assert!(Grid::<f64>::new(9, 1.0).is_err());
        assert!(Grid::<f64>::new(8, 0.0).is_err());
        let g = grid(16, 2.0 * PI);
        assert_eq!(g.wavenumber(8), 8);
        assert_eq!(g.wavenumber(9), -7);
        assert_eq!(g.index_of(-7), Some(9));
        assert_eq!(g.index_of(-8), None);
        assert!((g.frequencies()[3] - 3.0).abs() < 1e-15);
        assert!((g.dx() - 2.0 * PI / 16.0).abs() < 1e-15);
    }

    #[test]
    fn forward_constant_and_cosine() {
        let g = grid(32, 2.0 * PI);
        let one = RealField::from_fn(&g, |_| 1.0).unwrap().forward();
        assert!((one.coeff(0).re - 1.0).abs() < 1e-15);
        assert!(one.coeffs()[1..].iter().all(|c| c.norm() < 1e-15));

        let c3 = cos_field(&g, 3.0).forward();
        for k in -15i64..=16 {
            let expect = if k.abs() == 3 { 0.5 } else { 0.0 };
            assert!(
                (c3.coeff(k) - Complex::new(expect, 0.0)).norm() < 1e-15,
                "k={k}"
            );
        }
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let g = grid(16, 1.0);
        assert!(matches!(
            RealField::new(&g, vec![0.0; 15]),
            Err(Error::SizeMismatch {
                expected: 16,
                got: 15
            })
        ));
        assert!(SpectralField::from_coeffs(&g, vec![Complex::new(0.0, 0.0); 17]).is_err());
    }

    #[test]
    fn multiplier_identity_derivative_and_psi() {
        let g = grid(32, 2.0 * PI);
        let f = cos_field(&g, 1.0).forward();
        let same = f.apply_real_symbol(|_| 1.0, Parity::EvenReal).unwrap();
        assert_eq!(same, f);

        let d = f
            .apply_multiplier(|xi| Complex::new(0.0, xi), Parity::OddImaginary)
            .unwrap()
            .inverse();
        for (x, v) in g.nodes().iter().zip(d.values()) {
            assert!((v + x.sin()).abs() < 1e-12);
        }

        let p = crate::params::Parameters::<f64>::default_set();
        let c2 = cos_field(&g, 2.0).forward();
        let out = c2
            .apply_real_symbol(|xi| p.psi(xi), Parity::OddReal)
            .unwrap();
        assert!((out.coeff(2).re - 1.0 / 21.0).abs() < 1e-15);
        assert!((out.coeff(-2).re + 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_multiplier_names_frequency() {
        let g = grid(16, 2.0 * PI);
        let f = cos_field(&g, 1.0).forward();
        let err = f
            .apply_real_symbol(
                |xi| if xi == 2.0 { f64::NAN } else { 1.0 },
                Parity::EvenReal,
            )
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteMultiplier { xi } if xi == 2.0));
    }

    #[test]
    fn product_examples() {
        let g = grid(32, 2.0 * PI);
        let c = cos_field(&g, 1.0);
        let sq = c.dealiased_product(&c).unwrap();
        for (x, v) in g.nodes().iter().zip(sq.values()) {
            assert!((v - (0.5 + 0.5 * (2.0 * x).cos())).abs() < 1e-14);
        }
        let cube = c.dealiased_triple(&c, &c).unwrap();
        for (x, v) in g.nodes().iter().zip(cube.values()) {
            assert!((v - (0.75 * x.cos() + 0.25 * (3.0 * x).cos())).abs() < 1e-14);
        }
    }

    #[test]
    fn product_matches_brute_force_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[16usize, 32, 64] {
            let g = grid(n, 5.0);
            let kmax = n as i64 / 3;
            let a = random_band_limited(&g, kmax, &mut rng);
            let b = random_band_limited(&g, kmax, &mut rng);
            let fast = a.product(&b).unwrap();
            let slow = brute_convolution(&a, &b);
            for (j, s) in slow.iter().enumerate() {
                if j == n / 2 {
                    continue;
                }
                assert!((fast.coeffs()[j] - s).norm() < 1e-12, "n={n} j={j}");
            }
            // full-band inputs are still exact on retained modes
            let a = random_band_limited(&g, n as i64 / 2 - 1, &mut rng);
            let b = random_band_limited(&g, n as i64 / 2 - 1, &mut rng);
            let fast = a.product(&b).unwrap();
            let slow = brute_convolution(&a, &b);
            for (j, s) in slow.iter().enumerate() {
                assert!(
                    (fast.coeffs()[j] - s).norm() < 1e-12,
                    "full band n={n} j={j}"
                );
            }
            let c = random_band_limited(&g, n as i64 / 2 - 1, &mut rng);
            let fast = a.triple(&b, &c).unwrap();
            let slow = brute_triple(&a, &b, &c);
            for (j, s) in slow.iter().enumerate() {
                assert!((fast.coeffs()[j] - s).norm() < 1e-11, "triple n={n} j={j}");
            }
        }
    }

    #[test]
    fn packed_transforms_match_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = grid(32, 3.0);
        let a = random_band_limited(&g, 15, &mut rng);
        let b = random_band_limited(&g, 15, &mut rng);
        let d = Dealias::cubic(&g);
        let (pa, pb) = d.to_physical_pair(a.coeffs(), b.coeffs());
        let sa = d.to_physical(a.coeffs());
        for (x, y) in pa.iter().zip(&sa) {
            assert!((x - y).abs() < 1e-13);
        }
        let (ra, rb) = d.to_spectral_pair(&pa, &pb);
        for j in 0..32 {
            if j == 16 {
                continue;
            }
            assert!((ra[j] - a.coeffs()[j]).norm() < 1e-13);
            assert!((rb[j] - b.coeffs()[j]).norm() < 1e-13);
        }
    }

    #[test]
    fn lambda_sigma_examples() {
        let g = grid(32, 2.0 * PI);
        let f = cos_field(&g, 3.0).forward();
        assert_eq!(f.lambda_sigma(0.0).unwrap(), f);
        let s = f.lambda_sigma(0.1).unwrap();
        assert!((s.coeff(3).re - 0.5 * 1.349_858_807_576_003_1).abs() < 1e-12);
        let shrunk = f.lambda_sigma(-0.3).unwrap();
        assert!(shrunk.l2_norm() < f.l2_norm());
        let back = s.lambda_sigma(-0.1).unwrap();
        assert!(back.sub(&f).l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn lambda_sigma_overflow_guard() {
        let g = grid(64, 2.0 * PI);
        let f = cos_field(&g, 1.0).forward();
        // xi_max = 32
        assert!(f.lambda_sigma(21.0).is_ok());
        assert!(matches!(f.lambda_sigma(22.0), Err(Error::Overflow { .. })));
    }

    #[test]
    fn single_precision_roundtrip() {
        let g = Grid::<f32>::new(64, 10.0).unwrap();
        let f = RealField::from_fn(&g, |x| (0.3 * x).sin() + 0.1).unwrap();
        let back = f.forward().inverse();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0f64..10.0, n)
        }

        proptest! {
            #[test]
            fn roundtrip_and_parseval(values in field_strategy(64), l in 0.5f64..300.0) {
                let g = grid(64, l);
                let f = RealField::new(&g, values).unwrap();
                let spec = f.forward();
                let back = spec.inverse();
                let scale = f.values().iter().fold(1e-300f64, |m, v| m.max(v.abs()));
                for (a, b) in f.values().iter().zip(back.values()) {
                    prop_assert!((a - b).abs() <= 1e-12 * scale);
                }
                let phys = f.l2_norm();
                prop_assert!((phys - spec.l2_norm()).abs() <= 1e-12 * phys.max(1e-300));
                prop_assert!(spec.symmetry_defect() == 0.0);
            }

            #[test]
            fn pipeline_keeps_symmetry(values in field_strategy(32), sigma in -0.5f64..0.5) {
                let g = grid(32, 2.0 * PI);
                let f = RealField::new(&g, values).unwrap().forward();
                let p = crate::params::Parameters::<f64>::default_set();
                let out = f.lambda_sigma(sigma).unwrap()
                    .derivative(1)
                    .apply_real_symbol(|xi| p.varphi(xi), Parity::EvenReal).unwrap();
                let out = out.product(&f).unwrap().triple(&f, &out).unwrap();
                prop_assert!(out.symmetry_defect() == 0.0);
            }
        }
    }
}
