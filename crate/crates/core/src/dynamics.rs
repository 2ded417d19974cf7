//! Time evolution.
//!
//! On the Fourier side the equation reads `i∂ₜη̂ − φ(ξ)η̂ = F̂(η)` with
//!
//! ```text
//! F(η) = τ(D)η² − ⅛ψ(D)η³ − κψ(D)η_x²
//! ```
//!
//! so `∂ₜη̂ = −iφη̂ − iF̂`. Two solvers are provided: an integrating-factor
//! RK4 for long runs and a Picard iteration on the Duhamel formula
//! `η(t) = e^{−itφ(D)}η₀ − i∫₀ᵗ e^{−i(t−t')φ(D)}F(η(t'))dt'`, which mirrors
//! the local existence argument and serves as an independent cross-check.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gevrey::sobolev_norm;
use crate::params::Parameters;
use crate::scalar::Real;
use crate::spectral::{Dealias, Grid, SpectralField};

/// Default calibration constant of [`existence_time`].
pub const DEFAULT_EXISTENCE_CONSTANT: f64 = 0.5;

/// Growth factor of the L² norm that aborts a run.
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// `c_T (1 + ‖η₀‖)^{-2}`: length of the local existence interval.
pub fn existence_time<T: Real>(norm_data: T, c_t: T) -> T {
    let d = T::one() + norm_data;
    c_t / (d * d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ExponentialRK4,
    PicardIteration,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Drop the nonlinearity (F ≡ 0): pure linear dispersive flow.
    pub linear: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            scheme: Scheme::ExponentialRK4,
            picard_tol: 1e-12,
            picard_max_iter: 50,
            linear: false,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidArgument("picard_tol must be > 0".into()));
        }
        if self.picard_max_iter < 1 {
            return Err(Error::InvalidArgument(
                "picard_max_iter must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState<T: Real> {
    pub t: T,
    pub eta_hat: SpectralField<T>,
}

impl<T: Real> EvolutionState<T> {
    pub fn new(t: T, eta_hat: SpectralField<T>) -> Self {
        Self { t, eta_hat }
    }
}

/// Called with the current state at the start, every observer interval and at the end.
pub trait Observer<T: Real> {
    fn observe(&mut self, state: &EvolutionState<T>) -> Result<()>;
}

impl<T: Real, F: FnMut(&EvolutionState<T>) -> Result<()>> Observer<T> for F {
    fn observe(&mut self, state: &EvolutionState<T>) -> Result<()> {
        self(state)
    }
}

/// Parameters and grid with the symbols tabulated on the frequency lattice.
#[derive(Clone, Debug)]
pub struct Model<T: Real> {
    params: Parameters<T>,
    grid: Grid<T>,
    phi: Vec<T>,
    psi: Vec<T>,
    tau: Vec<T>,
}

impl<T: Real> Model<T> {
    pub fn new(params: Parameters<T>, grid: &Grid<T>) -> Result<Self> {
        params.validate()?;
        let xi = grid.frequencies();
        Ok(Self {
            phi: xi.iter().map(|&x| params.phi(x)).collect(),
            psi: xi.iter().map(|&x| params.psi(x)).collect(),
            tau: xi.iter().map(|&x| params.tau(x)).collect(),
            params,
            grid: grid.clone(),
        })
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub(crate) fn products(&self, eta_hat: &[Complex<T>]) -> [Vec<Complex<T>>; 3] {
        nonlinear_products(&self.grid, eta_hat)
    }

    /// `−iF̂(η)`: the nonlinear part of `∂ₜη̂`. Conjugate symmetric.
    pub fn forcing(&self, eta_hat: &SpectralField<T>) -> SpectralField<T> {
        let [a, b, c] = self.products(eta_hat.coeffs());
        let eighth = T::lit(0.125);
        let kappa = self.params.gamma_slope;
        let coeffs = (0..a.len())
            .map(|j| {
                let f = a[j].scale(self.tau[j])
                    - (c[j].scale(eighth) + b[j].scale(kappa)).scale(self.psi[j]);
                // −i·f
                Complex::new(f.im, -f.re)
            })
            .collect();
        eta_hat.with_coeffs(coeffs)
    }

    /// `F̂(η) = τη² − ⅛ψη³ − κψη_x²` exactly as written (conjugate antisymmetric).
    pub fn nonlinearity(&self, eta_hat: &SpectralField<T>) -> SpectralField<T> {
        let mut f = self.forcing(eta_hat);
        for c in f.coeffs_mut() {
            // i·(−iF̂)
            *c = Complex::new(-c.im, c.re);
        }
        f.antisymmetrize();
        f
    }

    /// `e^{−i·dt·φ(D)}`.
    pub fn semigroup(&self, eta_hat: &SpectralField<T>, dt: T) -> SpectralField<T> {
        let w = self.propagator(dt);
        eta_hat.with_coeffs(
            eta_hat
                .coeffs()
                .iter()
                .zip(&w)
                .map(|(c, e)| c * e)
                .collect(),
        )
    }

    fn propagator(&self, dt: T) -> Vec<Complex<T>> {
        self.phi
            .iter()
            .map(|&p| Complex::from_polar(T::one(), -dt * p))
            .collect()
    }

    /// Time derivative of the nonlinear part, or zero for linear runs.
    fn rhs(&self, eta_hat: &SpectralField<T>, linear: bool) -> SpectralField<T> {
        if linear {
            SpectralField::zeros(&self.grid)
        } else {
            self.forcing(eta_hat)
        }
    }
}

/// Spectra of `η²`, `η_x²` and `η³`, all alias-free on the retained modes.
///
/// One padded inverse transform yields both `η` and `η_x`, and one forward
/// transform returns both quadratic products.
pub(crate) fn nonlinear_products<T: Real>(
    grid: &Grid<T>,
    eta_hat: &[Complex<T>],
) -> [Vec<Complex<T>>; 3] {
    let d = Dealias::cubic(grid);
    let i = Complex::new(T::zero(), T::one());
    let eta_x: Vec<Complex<T>> = eta_hat
        .iter()
        .zip(grid.frequencies())
        .map(|(c, &xi)| c * i * xi)
        .collect();
    let (u, ux) = d.to_physical_pair(eta_hat, &eta_x);
    let sq: Vec<T> = u.iter().map(|&v| v * v).collect();
    let slope: Vec<T> = ux.iter().map(|&v| v * v).collect();
    let cube: Vec<T> = u.iter().map(|&v| v * v * v).collect();
    let (a, b) = d.to_spectral_pair(&sq, &slope);
    let c = d.to_spectral(&cube);
    [a, b, c]
}

/// Integrating-factor RK4 on `w = e^{itφ(D)}η̂`, `ẇ = e^{itφ(D)}(−iF̂(η))`.
pub struct IfRk4<'m, T: Real> {
    model: &'m Model<T>,
    dt: T,
    half: Vec<Complex<T>>,
    full: Vec<Complex<T>>,
    linear: bool,
}

impl<'m, T: Real> IfRk4<'m, T> {
    pub fn new(model: &'m Model<T>, dt: T, linear: bool) -> Self {
        Self {
            model,
            dt,
            half: model.propagator(dt * T::lit(0.5)),
            full: model.propagator(dt),
            linear,
        }
    }

    pub fn step(&self, u: &SpectralField<T>) -> SpectralField<T> {
        let h = self.dt;
        let h2 = h * T::lit(0.5);
        let e = &self.half;
        let e2 = &self.full;
        let mul = |f: &SpectralField<T>, w: &[Complex<T>]| -> SpectralField<T> {
            f.with_coeffs(f.coeffs().iter().zip(w).map(|(a, b)| a * b).collect())
        };
        let axpy = |x: &SpectralField<T>, a: T, y: &SpectralField<T>| -> SpectralField<T> {
            x.with_coeffs(
                x.coeffs()
                    .iter()
                    .zip(y.coeffs())
                    .map(|(p, q)| p + q.scale(a))
                    .collect(),
            )
        };
        let k1 = self.model.rhs(u, self.linear);
        let k2 = self.model.rhs(&mul(&axpy(u, h2, &k1), e), self.linear);
        let eu = mul(u, e);
        let k3 = self.model.rhs(&axpy(&eu, h2, &k2), self.linear);
        let k4 = self
            .model
            .rhs(&axpy(&mul(&eu, e), h, &mul(&k3, e)), self.linear);

        let sixth = h / T::lit(6.0);
        let third = h / T::lit(3.0);
        let coeffs = (0..u.coeffs().len())
            .map(|j| {
                e2[j] * (u.coeffs()[j] + k1.coeffs()[j].scale(sixth))
                    + e[j] * (k2.coeffs()[j] + k3.coeffs()[j]).scale(third)
                    + k4.coeffs()[j].scale(sixth)
            })
            .collect();
        let mut out = u.with_coeffs(coeffs);
        out.symmetrize();
        out
    }
}

/// Result of a Picard solve: iterates are stored at the quadrature nodes.
#[derive(Clone, Debug)]
pub struct PicardSolution<T: Real> {
    pub times: Vec<T>,
    pub nodes: Vec<SpectralField<T>>,
    pub iterations: usize,
    /// H² sup-over-nodes distance between successive iterates.
    pub increments: Vec<f64>,
    /// Largest ratio of successive increments (the empirical contraction factor).
    pub max_ratio: f64,
}

impl<T: Real> PicardSolution<T> {
    pub fn final_state(&self) -> EvolutionState<T> {
        EvolutionState::new(
            *self.times.last().expect("nonempty"),
            self.nodes.last().expect("nonempty").clone(),
        )
    }
}

/// Stencil for the cumulative integral up to node `j ≥ 1`: the node whose
/// cumulative value it extends, and `(weight/h, node)` terms of the new panel.
///
/// Composite Simpson on even nodes; Simpson plus a 3/8 panel on odd nodes;
/// a cubic-interpolation rule on the first interval. Fourth order throughout.
pub(crate) fn quadrature_panel(j: usize) -> (Option<usize>, Vec<(f64, usize)>) {
    match j {
        0 => (None, Vec::new()),
        1 => (
            None,
            vec![
                (9.0 / 24.0, 0),
                (19.0 / 24.0, 1),
                (-5.0 / 24.0, 2),
                (1.0 / 24.0, 3),
            ],
        ),
        _ if j % 2 == 0 => (
            Some(j - 2),
            vec![(1.0 / 3.0, j - 2), (4.0 / 3.0, j - 1), (1.0 / 3.0, j)],
        ),
        _ => (
            Some(j - 3),
            vec![
                (3.0 / 8.0, j - 3),
                (9.0 / 8.0, j - 2),
                (9.0 / 8.0, j - 1),
                (3.0 / 8.0, j),
            ],
        ),
    }
}

/// Cumulative integrals `∫₀^{t_j} g` of uniformly sampled scalars.
pub fn cumulative_quadrature_scalar(g: &[f64], h: f64) -> Vec<f64> {
    assert!(g.len() >= 4, "need at least 3 intervals");
    let mut out: Vec<f64> = Vec::with_capacity(g.len());
    for j in 0..g.len() {
        let (base, terms) = quadrature_panel(j);
        let panel: f64 = terms.iter().map(|&(w, i)| w * h * g[i]).sum();
        out.push(base.map_or(0.0, |b| out[b]) + panel);
    }
    out
}

/// Cumulative integrals `∫₀^{t_j} g` of uniformly sampled fields.
pub(crate) fn cumulative_quadrature<T: Real>(
    g: &[SpectralField<T>],
    h: T,
) -> Vec<SpectralField<T>> {
    assert!(g.len() >= 4, "need at least 3 intervals");
    let n = g[0].coeffs().len();
    let mut out: Vec<SpectralField<T>> = Vec::with_capacity(g.len());
    for j in 0..g.len() {
        let (base, terms) = quadrature_panel(j);
        let mut acc = match base {
            Some(b) => out[b].coeffs().to_vec(),
            None => vec![Complex::new(T::zero(), T::zero()); n],
        };
        for (w, i) in terms {
            let w = T::lit(w) * h;
            for (a, c) in acc.iter_mut().zip(g[i].coeffs()) {
                *a = *a + c.scale(w);
            }
        }
        out.push(g[0].with_coeffs(acc));
    }
    out
}

/// Fixed point of the Duhamel map on `[t₀, t₀ + T_local]`, seeded with the free evolution.
///
/// Stops once successive iterates differ by less than `picard_tol·max(1, ‖η₀‖_{H²})`
/// in H² (sup over nodes). A non-decreasing increment is reported as non-contraction.
pub fn picard_solve<T: Real>(
    model: &Model<T>,
    state: &EvolutionState<T>,
    t_local: T,
    cfg: &StepperConfig,
) -> Result<PicardSolution<T>> {
    cfg.validate()?;
    if !(t_local > T::zero()) {
        return Err(Error::InvalidArgument("T_local must be > 0".into()));
    }
    let intervals = {
        let raw = (t_local.to_f64_lossy() / cfg.dt).ceil() as usize;
        let m = raw.max(4);
        m + m % 2
    };
    let h = t_local / T::count(intervals);
    let times: Vec<T> = (0..=intervals).map(|j| state.t + h * T::count(j)).collect();
    let offsets: Vec<T> = (0..=intervals).map(|j| h * T::count(j)).collect();
    let eta0 = &state.eta_hat;
    let scale = sobolev_norm(eta0, T::lit(2.0)).to_f64_lossy().max(1.0);
    let tol = cfg.picard_tol * scale;

    let mut nodes: Vec<SpectralField<T>> =
        offsets.iter().map(|&s| model.semigroup(eta0, s)).collect();
    let mut increments: Vec<f64> = Vec::new();
    let mut max_ratio = 0.0f64;
    for iteration in 1..=cfg.picard_max_iter {
        let pulled: Vec<SpectralField<T>> = nodes
            .iter()
            .zip(&offsets)
            .map(|(eta, &s)| model.semigroup(&model.rhs(eta, cfg.linear), -s))
            .collect();
        let integrals = cumulative_quadrature(&pulled, h);
        let next: Vec<SpectralField<T>> = integrals
            .iter()
            .zip(&offsets)
            .map(|(int, &s)| {
                let mut f = model.semigroup(&eta0.add(int), s);
                f.symmetrize();
                f
            })
            .collect();
        let inc = next
            .iter()
            .zip(&nodes)
            .map(|(a, b)| sobolev_norm(&a.sub(b), T::lit(2.0)).to_f64_lossy())
            .fold(0.0f64, f64::max);
        nodes = next;
        if !inc.is_finite() {
            return Err(Error::NotFinite {
                t: times.last().unwrap().to_f64_lossy(),
            });
        }
        if let Some(&prev) = increments.last() {
            if prev > 0.0 {
                let ratio = inc / prev;
                max_ratio = max_ratio.max(ratio);
                if ratio >= 1.0 && inc >= tol {
                    return Err(Error::NonContraction { ratio, iteration });
                }
            }
        }
        increments.push(inc);
        if inc < tol {
            return Ok(PicardSolution {
                times,
                nodes,
                iterations: iteration,
                increments,
                max_ratio,
            });
        }
    }
    Err(Error::PicardMaxIter {
        iterations: cfg.picard_max_iter,
        increment: increments.last().copied().unwrap_or(f64::NAN),
        ratio: max_ratio,
    })
}

/// Advances `state` to `t_end` with uniform steps no longer than `cfg.dt`.
///
/// Observers run at the initial time, every `observer_interval` (rounded to a
/// whole number of steps) and at `t_end`. The run aborts if the solution turns
/// non-finite or its L² norm grows past [`BLOW_UP_FACTOR`] times the initial one.
pub fn evolve<T: Real>(
    model: &Model<T>,
    state: EvolutionState<T>,
    t_end: T,
    cfg: &StepperConfig,
    observer_interval: T,
    observers: &mut [&mut dyn Observer<T>],
) -> Result<EvolutionState<T>> {
    cfg.validate()?;
    if !(t_end > state.t) {
        return Err(Error::InvalidArgument(format!(
            "t_end ({t_end}) must exceed the current time ({})",
            state.t
        )));
    }
    let span = (t_end - state.t).to_f64_lossy();
    let steps = ((span / cfg.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = (t_end - state.t) / T::count(steps);
    let every = if observer_interval > T::zero() {
        ((observer_interval / h).round().to_usize().unwrap_or(1)).max(1)
    } else {
        usize::MAX
    };

    let t0 = state.t;
    let norm0 = state.eta_hat.l2_norm().to_f64_lossy();
    let threshold = BLOW_UP_FACTOR * norm0.max(f64::MIN_POSITIVE);
    for o in observers.iter_mut() {
        o.observe(&state)?;
    }
    let stepper = IfRk4::new(model, h, cfg.linear);
    let mut eta = state.eta_hat;
    for i in 1..=steps {
        eta = match cfg.scheme {
            Scheme::ExponentialRK4 => stepper.step(&eta),
            Scheme::PicardIteration => {
                let start = EvolutionState::new(t0 + h * T::count(i - 1), eta);
                let sub = StepperConfig {
                    dt: h.to_f64_lossy() / 4.0,
                    ..*cfg
                };
                picard_solve(model, &start, h, &sub)?.final_state().eta_hat
            }
        };
        let t = if i == steps {
            t_end
        } else {
            t0 + h * T::count(i)
        };
        if !eta.is_finite() {
            return Err(Error::NotFinite {
                t: t.to_f64_lossy(),
            });
        }
        let norm = eta.l2_norm().to_f64_lossy();
        if norm > threshold {
            return Err(Error::BlowUp {
                t: t.to_f64_lossy(),
                norm,
                threshold,
            });
        }
        if i % every == 0 || i == steps {
            let s = EvolutionState::new(t, eta);
            for o in observers.iter_mut() {
                o.observe(&s)?;
            }
            eta = s.eta_hat;
        }
    }
    Ok(EvolutionState::new(t_end, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gevrey::{gevrey_norm, mode_sum_spectrum, GevreyPair};
    use crate::spectral::RealField;
    use std::f64::consts::PI;

    fn default_model(n: usize, l: f64) -> Model<f64> {
        Model::new(Parameters::default_set(), &Grid::new(n, l).unwrap()).unwrap()
    }

    #[test]
    fn nonlinearity_of_cosine() {
        let m = default_model(32, 2.0 * PI);
        let eta = RealField::from_fn(m.grid(), |x| x.cos()).unwrap().forward();
        let f = m.nonlinearity(&eta);
        // coefficient of "cos kx" is twice coeff(+k); the symbol makes coeff(−k) = −coeff(k)
        let expect = [
            (1, -1.0 / 32.0),
            (2, 1.0 / 126.0 + 1.0 / 144.0),
            (3, -3.0 / 2912.0),
        ];
        for (k, v) in expect {
            assert!(
                (2.0 * f.coeff(k).re - v).abs() < 1e-15,
                "k={k}: {:?}",
                f.coeff(k)
            );
            assert!((f.coeff(-k) + f.coeff(k)).norm() < 1e-15);
        }
        for k in [0i64, 4, 5, 6] {
            assert!(f.coeff(k).norm() < 1e-16);
        }
        assert!(m.nonlinearity(&SpectralField::zeros(m.grid())).max_abs() == 0.0);
    }

    #[test]
    fn quadratic_part_support() {
        let m = default_model(64, 2.0 * PI);
        let eta = RealField::from_fn(m.grid(), |x| (5.0 * x).cos())
            .unwrap()
            .forward();
        let square = &m.products(eta.coeffs())[0];
        for (j, c) in square.iter().enumerate() {
            let k = m.grid().wavenumber(j).abs();
            if k != 0 && k != 10 {
                assert!(c.norm() < 1e-15, "k={k}");
            }
        }
    }

    #[test]
    fn semigroup_group_property() {
        let m = default_model(64, 10.0);
        let f = mode_sum_spectrum(m.grid(), 0.3, 1.0, 4).unwrap();
        assert_eq!(m.semigroup(&f, 0.0), f);
        let g = m.semigroup(&f, 0.7);
        for (a, b) in f.coeffs().iter().zip(g.coeffs()) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
        let back = m.semigroup(&g, -0.7);
        assert!(back.sub(&f).l2_norm() < 1e-12 * f.l2_norm());
        let gp = GevreyPair::new(0.2, 2.0).unwrap();
        let a = gevrey_norm(&f, gp).unwrap();
        let b = gevrey_norm(&g, gp).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn existence_time_formula() {
        assert_eq!(existence_time(0.0, 0.5), 0.5);
        assert_eq!(existence_time(1.0, 0.5), 0.125);
        let a: f64 = existence_time(3.0, 0.5);
        let b = existence_time(7.0, 0.5);
        assert!((a / b - 4.0).abs() < 1e-15);
    }

    #[test]
    fn cumulative_quadrature_is_fourth_order() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let field_at = |t: f64| {
            let mut f = SpectralField::zeros(&g);
            f.set_mode(1, Complex::new(t.exp(), 0.0)).unwrap();
            f
        };
        let err = |m: usize| {
            let h = 1.0 / m as f64;
            let vals: Vec<_> = (0..=m).map(|j| field_at(j as f64 * h)).collect();
            let ints = cumulative_quadrature(&vals, h);
            (0..=m)
                .map(|j| (ints[j].coeff(1).re - ((j as f64 * h).exp() - 1.0)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(8), err(16));
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
        let scalar = |m: usize| {
            let h = 1.0 / m as f64;
            let vals: Vec<f64> = (0..=m).map(|j| (j as f64 * h).cos()).collect();
            let ints = cumulative_quadrature_scalar(&vals, h);
            (0..=m)
                .map(|j| (ints[j] - (j as f64 * h).sin()).abs())
                .fold(0.0, f64::max)
        };
        assert!(scalar(8) / scalar(16) > 12.0);
    }

    #[test]
    fn picard_zero_data_and_seed() {
        let m = default_model(32, 2.0 * PI);
        let zero = EvolutionState::new(0.0, SpectralField::zeros(m.grid()));
        let cfg = StepperConfig::default();
        let sol = picard_solve(&m, &zero, 0.1, &cfg).unwrap();
        assert!(sol.final_state().eta_hat.max_abs() == 0.0);

        // one iteration of the linear problem is exactly the free evolution
        let f = mode_sum_spectrum(m.grid(), 0.3, 0.1, 1).unwrap();
        let lin = StepperConfig {
            linear: true,
            picard_max_iter: 1,
            ..cfg
        };
        let start = EvolutionState::new(0.0, f.clone());
        let sol = picard_solve(&m, &start, 0.1, &lin).unwrap();
        assert_eq!(sol.iterations, 1);
        let free = m.semigroup(&f, 0.1);
        assert!(sol.final_state().eta_hat.sub(&free).l2_norm() < 1e-15);
    }

    #[test]
    fn picard_reports_non_contraction() {
        let m = default_model(64, 2.0 * PI);
        let f = mode_sum_spectrum(m.grid(), 0.2, 30.0, 3).unwrap();
        let start = EvolutionState::new(0.0, f);
        let cfg = StepperConfig {
            dt: 0.05,
            ..StepperConfig::default()
        };
        let err = picard_solve(&m, &start, 5.0, &cfg).unwrap_err();
        assert!(
            matches!(
                err,
                Error::NonContraction { .. }
                    | Error::PicardMaxIter { .. }
                    | Error::NotFinite { .. }
            ),
            "{err}"
        );
    }

    #[test]
    fn picard_agrees_with_rk4() {
        let m = default_model(64, 8.0 * PI);
        let f = mode_sum_spectrum(m.grid(), 0.5, 0.2, 9).unwrap();
        let start = EvolutionState::new(0.0, f);
        let cfg = StepperConfig {
            dt: 2e-3,
            ..StepperConfig::default()
        };
        let t_local = 0.1;
        let sol = picard_solve(&m, &start, t_local, &cfg).unwrap();
        assert!(sol.max_ratio < 1.0);
        let rk = evolve(&m, start, t_local, &cfg, 0.0, &mut []).unwrap();
        let diff = sobolev_norm(&rk.eta_hat.sub(&sol.final_state().eta_hat), 2.0);
        let scale = sobolev_norm(&rk.eta_hat, 2.0);
        assert!(diff < 1e-10 * scale, "diff {diff:e}");
    }

    #[test]
    fn linear_run_preserves_moduli() {
        let m = default_model(64, 10.0);
        let f = mode_sum_spectrum(m.grid(), 0.3, 1.0, 2).unwrap();
        let cfg = StepperConfig {
            dt: 0.05,
            linear: true,
            ..StepperConfig::default()
        };
        let end = evolve(
            &m,
            EvolutionState::new(0.0, f.clone()),
            500.0,
            &cfg,
            0.0,
            &mut [],
        )
        .unwrap();
        for (a, b) in f.coeffs().iter().zip(end.eta_hat.coeffs()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn observers_fire_on_schedule() {
        let m = default_model(32, 2.0 * PI);
        let f = mode_sum_spectrum(m.grid(), 0.5, 0.1, 2).unwrap();
        let cfg = StepperConfig {
            dt: 0.01,
            ..StepperConfig::default()
        };
        let mut times = Vec::new();
        let mut rec = |s: &EvolutionState<f64>| {
            times.push(s.t);
            Ok(())
        };
        evolve(
            &m,
            EvolutionState::new(0.0, f),
            1.0,
            &cfg,
            0.25,
            &mut [&mut rec],
        )
        .unwrap();
        assert_eq!(times.len(), 5);
        assert_eq!(*times.last().unwrap(), 1.0);
        assert!((times[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evolve_rejects_backwards_time() {
        let m = default_model(32, 2.0 * PI);
        let s = EvolutionState::new(1.0, SpectralField::zeros(m.grid()));
        assert!(evolve(&m, s, 0.5, &StepperConfig::default(), 0.0, &mut []).is_err());
    }

    #[test]
    fn forcing_is_real_field() {
        let m = default_model(64, 12.0);
        let f = mode_sum_spectrum(m.grid(), 0.3, 0.7, 8).unwrap();
        assert_eq!(m.forcing(&f).symmetry_defect(), 0.0);
        let stepped = IfRk4::new(&m, 0.01, false).step(&f);
        assert_eq!(stepped.symmetry_defect(), 0.0);
    }
}
