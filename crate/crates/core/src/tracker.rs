//! Experiment drivers: radius-tracking runs, the σ-continuation loop and the
//! decay-law fit. Everything here runs in `f64`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::conservation::{energy, modified_energy};
use crate::dynamics::{evolve, existence_time, EvolutionState, Model, Observer, StepperConfig};
use crate::error::{Error, Result};
use crate::gevrey::{
    estimate_radius, gevrey_norm, linear_fit, sobolev_norm, GevreyPair, RadiusOptions,
};
use crate::params::Parameters;
use crate::spectral::SpectralField;

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// File name of the trajectory inside the output directory.
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub sigma_hat: f64,
    pub fit_kmin: usize,
    pub fit_kmax: usize,
    pub fit_residual: f64,
    pub floor_hit: bool,
    pub energy: f64,
    pub h2_norm: f64,
    /// `E_σ` for each entry of the σ grid, in order.
    pub modified_energy: Vec<f64>,
    /// `‖η‖_{G^{σ̂,2}}`. Kept in memory only; not part of the CSV schema.
    pub gevrey_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RadiusTrajectory {
    pub sigma_grid: Vec<f64>,
    pub rows: Vec<TrajectoryRow>,
}

/// Shortest decimal that round-trips, so output is reproducible byte for byte.
fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

impl RadiusTrajectory {
    pub fn new(sigma_grid: Vec<f64>) -> Self {
        Self {
            sigma_grid,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: TrajectoryRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(row.t > last.t) {
                return Err(Error::InvalidArgument(format!(
                    "trajectory times must increase: {} after {}",
                    row.t, last.t
                )));
            }
        }
        let finite = [
            row.t,
            row.sigma_hat,
            row.fit_residual,
            row.energy,
            row.h2_norm,
            row.gevrey_norm,
        ]
        .iter()
        .chain(&row.modified_energy)
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NotFinite { t: row.t });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn header(&self) -> String {
        let mut h = String::from(
            "#schema_version,t,sigma_hat,fit_kmin,fit_kmax,fit_residual,floor_hit,energy,h2_norm",
        );
        for s in &self.sigma_grid {
            write!(h, ",modified_energy_sigma_{}", fmt_f64(*s)).unwrap();
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                CSV_SCHEMA_VERSION,
                fmt_f64(r.t),
                fmt_f64(r.sigma_hat),
                r.fit_kmin,
                r.fit_kmax,
                fmt_f64(r.fit_residual),
                r.floor_hit as u8,
                fmt_f64(r.energy),
                fmt_f64(r.h2_norm)
            )
            .unwrap();
            for e in &r.modified_energy {
                write!(out, ",{}", fmt_f64(*e)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Observer that records one [`TrajectoryRow`] per call.
pub struct TrajectoryRecorder {
    params: Parameters<f64>,
    radius: RadiusOptions,
    pub trajectory: RadiusTrajectory,
}

impl TrajectoryRecorder {
    pub fn new(params: Parameters<f64>, radius: RadiusOptions, sigma_grid: Vec<f64>) -> Self {
        Self {
            params,
            radius,
            trajectory: RadiusTrajectory::new(sigma_grid),
        }
    }

    pub fn row(&self, t: f64, eta_hat: &SpectralField<f64>) -> Result<TrajectoryRow> {
        let r = estimate_radius(eta_hat, &self.radius)?;
        let modified = self
            .trajectory
            .sigma_grid
            .iter()
            .map(|&s| modified_energy(eta_hat, s, &self.params))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryRow {
            t,
            sigma_hat: r.sigma_hat,
            fit_kmin: r.fit_range.0,
            fit_kmax: r.fit_range.1,
            fit_residual: r.residual,
            floor_hit: r.floor_hit,
            energy: energy(eta_hat, &self.params),
            h2_norm: sobolev_norm(eta_hat, 2.0),
            modified_energy: modified,
            gevrey_norm: gevrey_norm(eta_hat, GevreyPair::new(r.sigma_hat, 2.0)?)?,
        })
    }
}

impl Observer<f64> for TrajectoryRecorder {
    fn observe(&mut self, state: &EvolutionState<f64>) -> Result<()> {
        let row = self.row(state.t, &state.eta_hat)?;
        self.trajectory.push(row)
    }
}

/// Runs the configured evolution with radius tracking.
pub fn simulate(cfg: &RunConfig) -> Result<RadiusTrajectory> {
    let params = cfg.parameters()?;
    let grid = cfg.grid_instance()?;
    let model = Model::new(params, &grid)?;
    let eta0 = cfg.initial_data(&grid)?;
    let mut rec = TrajectoryRecorder::new(params, cfg.radius, cfg.sigma_grid.clone());
    evolve(
        &model,
        EvolutionState::new(0.0, eta0),
        cfg.t_end,
        &cfg.stepper,
        cfg.observer_interval,
        &mut [&mut rec],
    )?;
    Ok(rec.trajectory)
}

/// [`simulate`] and write the CSV into the output directory.
pub fn simulate_to_dir(cfg: &RunConfig) -> Result<(RadiusTrajectory, PathBuf)> {
    let traj = simulate(cfg)?;
    let path = cfg.output_dir.join(TRAJECTORY_FILE);
    traj.write_csv(&path)?;
    Ok((traj, path))
}

/// `σ = min(σ₀, c/T*)`.
pub fn continuation_sigma(sigma0: f64, c: f64, t_star: f64) -> f64 {
    sigma0.min(c / t_star)
}

/// Local intervals beyond this count abort the continuation.
const MAX_LOCAL_STEPS: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOutcome {
    pub sigma: f64,
    pub keybound_ok: bool,
    /// First time at which `E_σ[v(t)] > 2E_{σ₀}[v₀]`.
    pub failure_time: Option<f64>,
    pub local_steps: usize,
    /// `E_{σ₀}[v₀]`.
    pub reference_energy: f64,
    /// `sup_t E_σ[v(t)] / E_{σ₀}[v₀]` over the checked times.
    pub max_energy_ratio: f64,
}

/// Advances the configured data to `t_star` in local steps of length
/// `existence_time(‖η(t)‖_{G^{σ,2}})` with `σ = min(σ₀, c/T*)`, checking
/// `E_σ[v(t)] ≤ 2E_{σ₀}[v₀]` after every step.
pub fn continuation_run(cfg: &RunConfig, t_star: f64) -> Result<ContinuationOutcome> {
    continuation_run_with(cfg, t_star, cfg.continuation_c)
}

pub fn continuation_run_with(cfg: &RunConfig, t_star: f64, c: f64) -> Result<ContinuationOutcome> {
    if !(t_star > 0.0) || !t_star.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_star must be > 0, got {t_star}"
        )));
    }
    let params = cfg.parameters()?;
    let grid = cfg.grid_instance()?;
    let model = Model::new(params, &grid)?;
    let sigma0 = cfg.data.sigma0;
    let sigma = continuation_sigma(sigma0, c, t_star);
    let eta0 = cfg.initial_data(&grid)?;
    let reference = modified_energy(&eta0, sigma0, &params)?;
    let bound = 2.0 * reference;

    let mut state = EvolutionState::new(0.0, eta0);
    let mut outcome = ContinuationOutcome {
        sigma,
        keybound_ok: true,
        failure_time: None,
        local_steps: 0,
        reference_energy: reference,
        max_energy_ratio: modified_energy(&state.eta_hat, sigma, &params)? / reference,
    };
    while state.t < t_star {
        if outcome.local_steps >= MAX_LOCAL_STEPS {
            return Err(Error::InvalidArgument(format!(
                "continuation needs more than {MAX_LOCAL_STEPS} local steps; the data are too large for this sigma"
            )));
        }
        let norm = gevrey_norm(&state.eta_hat, GevreyPair::new(sigma, 2.0)?)?;
        let t_local = existence_time(norm, cfg.existence_c);
        let t_next = (state.t + t_local).min(t_star);
        // avoid a sliver of a step at the very end
        let t_next = if t_star - t_next < 1e-9 * t_star {
            t_star
        } else {
            t_next
        };
        let step_cfg = StepperConfig {
            dt: cfg.stepper.dt.min(t_next - state.t),
            ..cfg.stepper
        };
        state = evolve(&model, state, t_next, &step_cfg, 0.0, &mut [])?;
        outcome.local_steps += 1;
        let e = modified_energy(&state.eta_hat, sigma, &params)?;
        outcome.max_energy_ratio = outcome.max_energy_ratio.max(e / reference);
        if e > bound {
            outcome.keybound_ok = false;
            outcome.failure_time = Some(state.t);
            break;
        }
    }
    Ok(outcome)
}

/// Largest `c` from `candidates` (scanned in order) for which the key bound
/// holds up to `t_star`; stops at the first failure.
pub fn largest_continuation_constant(
    cfg: &RunConfig,
    t_star: f64,
    candidates: &[f64],
) -> Result<Option<f64>> {
    let mut best = None;
    for &c in candidates {
        if continuation_run_with(cfg, t_star, c)?.keybound_ok {
            best = Some(c);
        } else {
            break;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayLaw {
    /// `σ̂(t) ≈ c_hat · t^{exponent_hat}` on the tail.
    pub c_hat: f64,
    pub exponent_hat: f64,
    /// `inf t·σ̂(t)` over the tail.
    pub inf_t_sigma: f64,
    pub tail_samples: usize,
    pub min_sigma_hat: f64,
    pub max_sigma_hat: f64,
    pub trajectory: RadiusTrajectory,
}

/// Fits `ln σ̂` against `ln t` on an already recorded trajectory.
pub fn fit_decay_law(cfg: &RunConfig, trajectory: RadiusTrajectory) -> Result<DecayLaw> {
    let t_from = (1.0 - cfg.tail_fraction) * cfg.t_end;
    let tail: Vec<&TrajectoryRow> = trajectory
        .rows
        .iter()
        .filter(|r| r.t >= t_from && r.t > 0.0)
        .collect();
    if tail.len() < cfg.tail_min_samples.max(2) {
        return Err(Error::InvalidArgument(format!(
            "only {} observer samples in t >= {t_from}; need {} (shorten observer_interval)",
            tail.len(),
            cfg.tail_min_samples
        )));
    }
    let hits = tail.iter().filter(|r| r.floor_hit).count();
    if hits > 0 {
        return Err(Error::FloorHit {
            hits,
            samples: tail.len(),
        });
    }
    let inf_t_sigma = tail
        .iter()
        .map(|r| r.t * r.sigma_hat)
        .fold(f64::INFINITY, f64::min);
    let min_sigma_hat = tail
        .iter()
        .map(|r| r.sigma_hat)
        .fold(f64::INFINITY, f64::min);
    let max_sigma_hat = tail.iter().map(|r| r.sigma_hat).fold(0.0, f64::max);
    let (exponent_hat, c_hat) = if min_sigma_hat > 0.0 {
        let xs: Vec<f64> = tail.iter().map(|r| r.t.ln()).collect();
        let ys: Vec<f64> = tail.iter().map(|r| r.sigma_hat.ln()).collect();
        let (slope, intercept) = linear_fit(&xs, &ys);
        (slope, intercept.exp())
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    let tail_samples = tail.len();
    Ok(DecayLaw {
        c_hat,
        exponent_hat,
        inf_t_sigma,
        tail_samples,
        min_sigma_hat,
        max_sigma_hat,
        trajectory,
    })
}

/// Tracks `σ̂(t)` over `[0, t_end]` and fits a power law on the tail.
pub fn decay_law_experiment(cfg: &RunConfig) -> Result<DecayLaw> {
    fit_decay_law(cfg, simulate(cfg)?)
}
