//! Fixed-step classic Runge–Kutta propagation of density matrices.
//!
//! The state is re-Hermitized after every step. The trace is monitored at
//! sample times but never renormalized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{DensityMatrix, MasterEquation};
use crate::observables::ObservableRecord;

pub const TRACE_TOL: f64 = 1e-8;
pub const EIGEN_FLOOR: f64 = -1e-7;
pub const MAX_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record a sample every this many steps (the final time is always sampled).
    pub sample_every: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig { dt: 1e-3, t_end: 10.0, sample_every: 10 }
    }
}

impl IntegrationConfig {
    pub fn new(dt: f64, t_end: f64, sample_every: usize) -> Result<Self> {
        let cfg = IntegrationConfig { dt, t_end, sample_every };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidConfig(format!("dt = {} outside (0, {MAX_DT}]", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_end = {} must be positive", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidConfig("sample_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Step sizes covering `[0, t_end]`: whole steps of `dt`, then a shorter
    /// closing step if `t_end` is not a multiple of `dt`.
    pub fn schedule(&self) -> StepSchedule {
        let ratio = self.t_end / self.dt;
        let full = (ratio + 1e-9).floor() as usize;
        let rest = self.t_end - full as f64 * self.dt;
        let tail = if rest > 1e-12 * self.t_end.max(1.0) { Some(rest) } else { None };
        StepSchedule { dt: self.dt, full_steps: full, tail, sample_every: self.sample_every, t_end: self.t_end }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepSchedule {
    pub dt: f64,
    pub full_steps: usize,
    pub tail: Option<f64>,
    pub sample_every: usize,
    pub t_end: f64,
}

impl StepSchedule {
    pub fn total_steps(&self) -> usize {
        self.full_steps + usize::from(self.tail.is_some())
    }

    pub fn step_size(&self, step: usize) -> f64 {
        if step < self.full_steps { self.dt } else { self.tail.unwrap_or(self.dt) }
    }

    /// Time after `n` steps.
    pub fn time_at(&self, n: usize) -> f64 {
        if n <= self.full_steps { n as f64 * self.dt } else { self.t_end }
    }

    pub fn is_sample(&self, n: usize) -> bool {
        n.is_multiple_of(self.sample_every) || n == self.total_steps()
    }

    pub fn sample_count(&self) -> usize {
        (0..=self.total_steps()).filter(|&n| self.is_sample(n)).count()
    }
}

/// Sampled observables (and states) over a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub samples: Vec<ObservableRecord>,
    pub states: Vec<DensityMatrix>,
}

impl TimeSeries {
    pub fn with_capacity(n: usize) -> Self {
        TimeSeries { times: Vec::with_capacity(n), samples: Vec::with_capacity(n), states: Vec::with_capacity(n) }
    }

    pub fn push(&mut self, t: f64, rho: DensityMatrix) -> Result<()> {
        self.samples.push(ObservableRecord::measure(t, &rho)?);
        self.times.push(t);
        self.states.push(rho);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, f: impl Fn(&ObservableRecord) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    pub fn last_state(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }
}

/// One classic RK4 step followed by `(ρ + ρ†)/2`.
pub fn rk4_step<F>(rhs: &F, rho: &CMatrix, dt: f64) -> CMatrix
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let k1 = rhs(rho);
    let k2 = rhs(&(rho + &k1.scale_real(0.5 * dt)));
    let k3 = rhs(&(rho + &k2.scale_real(0.5 * dt)));
    let k4 = rhs(&(rho + &k3.scale_real(dt)));
    let mut incr = &k2 + &k3;
    incr = &incr.scale_real(2.0) + &k1;
    incr += &k4;
    (rho + &incr.scale_real(dt / 6.0)).hermitian_part()
}

/// Trace and positivity check applied at sample times.
pub fn check_state(t: f64, rho: &CMatrix) -> Result<()> {
    let tr = rho.trace();
    let drift = (tr - 1.0).norm();
    if drift.is_nan() || drift > TRACE_TOL {
        return Err(Error::StateCorrupted { t, quantity: "|trace - 1|", value: drift, bound: TRACE_TOL });
    }
    let min = *linalg::hermitian_eigenvalues(rho)?.last().unwrap();
    if min < EIGEN_FLOOR {
        return Err(Error::StateCorrupted { t, quantity: "min eigenvalue", value: min, bound: EIGEN_FLOOR });
    }
    Ok(())
}

/// Propagate `rho0` under `rhs` and record samples per `cfg`.
pub fn evolve<F>(rho0: &DensityMatrix, rhs: F, cfg: &IntegrationConfig) -> Result<TimeSeries>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    cfg.validate()?;
    let schedule = cfg.schedule();
    let mut series = TimeSeries::with_capacity(schedule.sample_count());
    let mut rho = rho0.matrix().clone();
    for n in 0..=schedule.total_steps() {
        if n > 0 {
            rho = rk4_step(&rhs, &rho, schedule.step_size(n - 1));
        }
        if schedule.is_sample(n) {
            let t = schedule.time_at(n);
            check_state(t, &rho)?;
            series.push(t, DensityMatrix::from_matrix_unchecked(rho.clone()))?;
        }
    }
    Ok(series)
}

pub fn evolve_master(rho0: &DensityMatrix, eq: &MasterEquation, cfg: &IntegrationConfig) -> Result<TimeSeries> {
    evolve(rho0, |r| eq.rhs(r), cfg)
}

/// State at `cfg.t_end` only, without sampling or checks.
pub fn final_state(rho0: &DensityMatrix, eq: &MasterEquation, dt: f64, t_end: f64) -> CMatrix {
    let schedule = IntegrationConfig { dt, t_end, sample_every: 1 }.schedule();
    let rhs = |r: &CMatrix| eq.rhs(r);
    let mut rho = rho0.matrix().clone();
    for n in 0..schedule.total_steps() {
        rho = rk4_step(&rhs, &rho, schedule.step_size(n));
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::model::{basis, SystemParams};

    #[test]
    fn zero_field_is_identity() {
        let rho = DensityMatrix::maximally_mixed().into_matrix();
        let out = rk4_step(&|r: &CMatrix| CMatrix::zeros(r.rows(), r.cols()), &rho, 0.1);
        assert_eq!(out, rho);
    }

    #[test]
    fn exponential_decay_matches_rk4_polynomial() {
        let rho = DensityMatrix::maximally_mixed().into_matrix();
        let out = rk4_step(&|r: &CMatrix| r.scale_real(-1.0), &rho, 0.1);
        let h: f64 = 0.1;
        let poly = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((poly - 0.904_837_5).abs() < 1e-7);
        for i in 0..4 {
            assert!((out[(i, i)].re - 0.25 * poly).abs() < 1e-15);
        }
    }

    #[test]
    fn ground_state_step_is_stationary() {
        let eq = MasterEquation::uncontrolled(&SystemParams::default());
        let rho = DensityMatrix::basis_state(basis::GG).into_matrix();
        let out = rk4_step(&|r: &CMatrix| eq.rhs(r), &rho, 1e-3);
        assert!(out.max_abs_diff(&rho) < 1e-14);
    }

    #[test]
    fn step_output_is_exactly_hermitian() {
        let eq = MasterEquation::uncontrolled(&SystemParams::default());
        let rho = DensityMatrix::from_pure(&[C64::new(0.3, 0.1), C64::new(0.5, -0.2), C64::new(0.1, 0.7), C64::new(0.2, 0.0)])
            .unwrap()
            .into_matrix();
        let out = rk4_step(&|r: &CMatrix| eq.rhs(r), &rho, 1e-3);
        assert_eq!((&out - &out.dagger()).max_abs(), 0.0);
    }

    #[test]
    fn schedule_handles_non_multiple_end_time() {
        let s = IntegrationConfig::new(1e-3, std::f64::consts::FRAC_PI_2, 100).unwrap().schedule();
        assert_eq!(s.full_steps, 1570);
        assert!(s.tail.is_some());
        assert_eq!(s.time_at(s.total_steps()), std::f64::consts::FRAC_PI_2);
        let exact = IntegrationConfig::new(1e-3, 10.0, 10).unwrap().schedule();
        assert_eq!((exact.full_steps, exact.tail), (10_000, None));
        assert_eq!(exact.sample_count(), 1001);
    }

    #[test]
    fn config_validation() {
        assert!(IntegrationConfig::new(0.0, 1.0, 1).is_err());
        assert!(IntegrationConfig::new(0.02, 1.0, 1).is_err());
        assert!(IntegrationConfig::new(1e-3, -1.0, 1).is_err());
        assert!(IntegrationConfig::new(1e-3, 1.0, 0).is_err());
    }

    #[test]
    fn corrupted_state_is_reported_with_time() {
        let rho = CMatrix::diag_real(&[0.6, 0.6, 0.0, 0.0]);
        match check_state(2.5, &rho) {
            Err(Error::StateCorrupted { t, quantity, .. }) => {
                assert_eq!(t, 2.5);
                assert_eq!(quantity, "|trace - 1|");
            }
            other => panic!("unexpected {other:?}"),
        }
        let rho = CMatrix::diag_real(&[1.1, -0.1, 0.0, 0.0]);
        assert!(matches!(check_state(0.0, &rho), Err(Error::StateCorrupted { quantity: "min eigenvalue", .. })));
    }

    #[test]
    fn growing_rhs_trips_the_trace_monitor() {
        let rho0 = DensityMatrix::maximally_mixed();
        let cfg = IntegrationConfig::new(1e-2, 1.0, 10).unwrap();
        let err = evolve(&rho0, |r| r.scale_real(1.0), &cfg).unwrap_err();
        assert!(matches!(err, Error::StateCorrupted { .. }));
    }
}
