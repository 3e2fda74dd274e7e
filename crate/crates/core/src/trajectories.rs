//! Quantum-jump unraveling of the feedback master equation.
//!
//! Each step either registers a photodetection on qubit 2 (probability
//! `γ dt ⟨σ₂⁺σ₂⁻⟩`), in which case the state is mapped by `σ₂⁻` and then
//! immediately by the feedback unitary, or evolves under the no-jump
//! operator. The branch result is renormalized. Averaging `|ψ⟩⟨ψ|` over
//! trajectories reproduces the feedback master equation.
//!
//! # Seeding
//!
//! Trajectory `k` of an ensemble with seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(splitmix64(s ^ k))`, one uniform `f64` per
//! step. Outputs depend only on `(s, k)`, never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{IntegrationConfig, StepSchedule, TimeSeries};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::model::{basis, DensityMatrix, FeedbackVector, MasterEquation, SystemParams};
use crate::parallel::{self, Execution};

pub const NORM_TOL: f64 = 1e-9;
const PURITY_TOL: f64 = 1e-9;
const BLOCK: usize = 64;

type Mat4 = [[C64; 4]; 4];

/// Normalized two-qubit amplitude vector in the `|ee⟩,|eg⟩,|ge⟩,|gg⟩` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState4([C64; 4]);

impl PureState4 {
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("amplitude norm {n} is not 1")));
        }
        Ok(PureState4(amplitudes))
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: [C64; 4]) -> Result<Self> {
        let n = norm(&amplitudes);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::ZeroNorm);
        }
        Ok(PureState4(amplitudes.map(|a| a / n)))
    }

    pub fn basis(index: usize) -> Self {
        let mut a = [ZERO; 4];
        a[index] = C64::new(1.0, 0.0);
        PureState4(a)
    }

    /// Dominant eigenvector of a rank-one density matrix.
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        let (values, vectors) = linalg::hermitian_eigen(rho.matrix())?;
        if values[1] > PURITY_TOL {
            return Err(Error::NotPure { second_eigenvalue: values[1] });
        }
        Self::normalized([0, 1, 2, 3].map(|i| vectors[(i, 0)]))
    }

    pub fn amplitudes(&self) -> &[C64; 4] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// `⟨ψ|σ₂⁺σ₂⁻|ψ⟩`.
    pub fn excitation2(&self) -> f64 {
        self.0[basis::EE].norm_sqr() + self.0[basis::GE].norm_sqr()
    }

    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.0, &self.0)
    }
}

fn norm(a: &[C64; 4]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Operator applied in steps without a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoJumpScheme {
    /// `Ω₀ = I − (iH + ½γσ₂⁺σ₂⁻) dt`, accurate to first order in `dt`.
    FirstOrder,
    /// `exp(−(iH + ½γσ₂⁺σ₂⁻) dt)`, which agrees with `Ω₀` to first order and
    /// is exact for the conditional no-jump evolution.
    #[default]
    Exponential,
}

impl std::str::FromStr for NoJumpScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first-order" => Ok(NoJumpScheme::FirstOrder),
            "exponential" => Ok(NoJumpScheme::Exponential),
            other => Err(format!("unknown no-jump scheme `{other}` (expected first-order or exponential)")),
        }
    }
}

/// Precomputed operators for one time step.
#[derive(Debug, Clone)]
pub struct TrajectoryStepper {
    no_jump: Mat4,
    jump: Mat4,
    gamma_dt: f64,
}

impl TrajectoryStepper {
    pub fn new(p: &SystemParams, f: &FeedbackVector, dt: f64, scheme: NoJumpScheme) -> Self {
        let eq = MasterEquation::with_feedback(p, f);
        let k_dt = eq.generator().scale_real(dt);
        let no_jump = match scheme {
            NoJumpScheme::FirstOrder => &CMatrix::identity(4) + &k_dt,
            NoJumpScheme::Exponential => linalg::expm(&k_dt),
        };
        TrajectoryStepper { no_jump: to_array(&no_jump), jump: to_array(eq.jump_operator()), gamma_dt: p.gamma * dt }
    }

    pub fn no_jump_operator(&self) -> CMatrix {
        CMatrix::from_fn(4, 4, |i, j| self.no_jump[i][j])
    }

    /// `p₁ = γ dt ⟨σ₂⁺σ₂⁻⟩`.
    pub fn jump_probability(&self, psi: &PureState4) -> f64 {
        self.gamma_dt * psi.excitation2()
    }

    /// Advances `psi` by one step; the flag reports whether a jump occurred.
    pub fn step<R: Rng + ?Sized>(&self, psi: &PureState4, rng: &mut R) -> Result<(PureState4, bool)> {
        let u: f64 = rng.random();
        self.step_with_draw(psi, u)
    }

    /// Same as [`step`](Self::step) with the uniform draw supplied.
    pub fn step_with_draw(&self, psi: &PureState4, u: f64) -> Result<(PureState4, bool)> {
        let jumped = u < self.jump_probability(psi);
        let op = if jumped { &self.jump } else { &self.no_jump };
        let next = apply(op, &psi.0);
        let n = norm(&next);
        if n.is_nan() || n <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok((PureState4(next.map(|a| a / n)), jumped))
    }
}

fn to_array(m: &CMatrix) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = m[(i, j)];
        }
    }
    out
}

#[inline]
fn apply(m: &Mat4, v: &[C64; 4]) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}

/// One step with freshly built operators (default no-jump scheme).
pub fn trajectory_step<R: Rng + ?Sized>(
    psi: &PureState4,
    p: &SystemParams,
    f: &FeedbackVector,
    dt: f64,
    rng: &mut R,
) -> Result<(PureState4, bool)> {
    TrajectoryStepper::new(p, f, dt, NoJumpScheme::default()).step(psi, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub sample_every: usize,
    pub no_jump: NoJumpScheme,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { n_traj: 1000, dt: 1e-3, t_end: 10.0, seed: 0, sample_every: 10, no_jump: NoJumpScheme::default() }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidConfig("n_traj must be at least 1".into()));
        }
        self.integration().validate()
    }

    pub fn integration(&self) -> IntegrationConfig {
        IntegrationConfig { dt: self.dt, t_end: self.t_end, sample_every: self.sample_every }
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ index))
}

/// Sampled states and detection times of a single trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PureState4>,
    pub jump_times: Vec<f64>,
}

struct Steppers {
    full: TrajectoryStepper,
    tail: Option<TrajectoryStepper>,
}

impl Steppers {
    fn new(p: &SystemParams, f: &FeedbackVector, schedule: &StepSchedule, scheme: NoJumpScheme) -> Self {
        Steppers {
            full: TrajectoryStepper::new(p, f, schedule.dt, scheme),
            tail: schedule.tail.map(|dt| TrajectoryStepper::new(p, f, dt, scheme)),
        }
    }
}

fn drive(
    psi0: PureState4,
    steppers: &Steppers,
    schedule: &StepSchedule,
    rng: &mut ChaCha8Rng,
    mut on_sample: impl FnMut(usize, &PureState4),
    mut on_jump: impl FnMut(usize),
) -> Result<()> {
    let mut psi = psi0;
    let mut sample = 0;
    for n in 0..=schedule.total_steps() {
        if n > 0 {
            let stepper = if n - 1 < schedule.full_steps { &steppers.full } else { steppers.tail.as_ref().unwrap() };
            let (next, jumped) = stepper.step(&psi, rng)?;
            psi = next;
            if jumped {
                on_jump(n);
            }
        }
        if schedule.is_sample(n) {
            on_sample(sample, &psi);
            sample += 1;
        }
    }
    Ok(())
}

/// Runs trajectory `index` of the ensemble described by `cfg`.
pub fn run_trajectory(
    psi0: PureState4,
    p: &SystemParams,
    f: &FeedbackVector,
    cfg: &EnsembleConfig,
    index: u64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let schedule = cfg.integration().schedule();
    let steppers = Steppers::new(p, f, &schedule, cfg.no_jump);
    let mut rng = trajectory_rng(cfg.seed, index);
    let mut out = Trajectory { times: Vec::new(), states: Vec::new(), jump_times: Vec::new() };
    let mut sampled = Vec::new();
    let mut jumps = Vec::new();
    drive(psi0, &steppers, &schedule, &mut rng, |_, psi| sampled.push(*psi), |n| jumps.push(n))?;
    out.times = (0..=schedule.total_steps()).filter(|&n| schedule.is_sample(n)).map(|n| schedule.time_at(n)).collect();
    out.states = sampled;
    out.jump_times = jumps.into_iter().map(|n| schedule.time_at(n)).collect();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// Observables of the trajectory-averaged density matrix.
    pub series: TimeSeries,
    /// Number of detections per trajectory, in trajectory-index order.
    pub jump_counts: Vec<u32>,
}

impl EnsembleResult {
    pub fn mean_jumps(&self) -> f64 {
        self.jump_counts.iter().map(|&c| c as f64).sum::<f64>() / self.jump_counts.len() as f64
    }

    /// Standard error of [`mean_jumps`](Self::mean_jumps).
    pub fn jump_std_error(&self) -> f64 {
        let n = self.jump_counts.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.mean_jumps();
        let var = self.jump_counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Averages `n_traj` trajectories started from the pure state `rho0`.
///
/// Trajectories are processed in fixed blocks of consecutive indices and the
/// block sums are added in index order, so the result is the same with
/// either execution mode and any thread count.
pub fn run_ensemble(
    rho0: &DensityMatrix,
    p: &SystemParams,
    f: &FeedbackVector,
    cfg: &EnsembleConfig,
    exec: Execution,
) -> Result<EnsembleResult> {
    cfg.validate()?;
    p.validate()?;
    let psi0 = PureState4::from_density(rho0)?;
    let schedule = cfg.integration().schedule();
    let steppers = Steppers::new(p, f, &schedule, cfg.no_jump);
    let n_samples = schedule.sample_count();
    let n_blocks = cfg.n_traj.div_ceil(BLOCK);

    let blocks = parallel::map_indexed(n_blocks, exec, |b| -> Result<(Vec<[C64; 16]>, Vec<u32>)> {
        let mut acc = vec![[ZERO; 16]; n_samples];
        let mut counts = Vec::with_capacity(BLOCK);
        for k in (b * BLOCK)..((b + 1) * BLOCK).min(cfg.n_traj) {
            let mut rng = trajectory_rng(cfg.seed, k as u64);
            let mut jumps = 0u32;
            drive(
                psi0,
                &steppers,
                &schedule,
                &mut rng,
                |s, psi| {
                    let a = psi.amplitudes();
                    for i in 0..4 {
                        for j in 0..4 {
                            acc[s][4 * i + j] += a[i] * a[j].conj();
                        }
                    }
                },
                |_| jumps += 1,
            )?;
            counts.push(jumps);
        }
        Ok((acc, counts))
    });

    let mut total = vec![[ZERO; 16]; n_samples];
    let mut jump_counts = Vec::with_capacity(cfg.n_traj);
    for block in blocks {
        let (acc, counts) = block?;
        for (t, a) in total.iter_mut().zip(&acc) {
            for (x, y) in t.iter_mut().zip(a) {
                *x += y;
            }
        }
        jump_counts.extend(counts);
    }

    let inv = 1.0 / cfg.n_traj as f64;
    let mut series = TimeSeries::with_capacity(n_samples);
    let sample_steps = (0..=schedule.total_steps()).filter(|&n| schedule.is_sample(n));
    for (n, sum) in sample_steps.zip(&total) {
        let m = CMatrix::new(4, 4, sum.iter().map(|z| z * inv).collect());
        series.push(schedule.time_at(n), DensityMatrix::from_matrix_unchecked(m.hermitian_part()))?;
    }
    Ok(EnsembleResult { series, jump_counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lifted_feedback_unitary;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn qubit_two_ground_never_jumps() {
        let p = SystemParams::default();
        let stepper = TrajectoryStepper::new(&p, &FeedbackVector::new(1.2, 0.0, 0.0), 1e-3, NoJumpScheme::default());
        let psi = PureState4::basis(basis::EG);
        assert_eq!(stepper.jump_probability(&psi), 0.0);
        let (_, jumped) = stepper.step_with_draw(&psi, 0.0).unwrap();
        assert!(!jumped);
    }

    #[test]
    fn excited_jump_probability() {
        let stepper = TrajectoryStepper::new(&SystemParams::default(), &FeedbackVector::zero(), 1e-3, NoJumpScheme::default());
        let p1 = stepper.jump_probability(&PureState4::basis(basis::EE));
        assert!((p1 - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn jump_without_feedback_drops_qubit_two() {
        let stepper = TrajectoryStepper::new(&SystemParams::default(), &FeedbackVector::zero(), 1e-3, NoJumpScheme::default());
        let (psi, jumped) = stepper.step_with_draw(&PureState4::basis(basis::EE), 0.0).unwrap();
        assert!(jumped);
        assert_eq!(psi, PureState4::basis(basis::EG));
    }

    #[test]
    fn jump_applies_feedback_after_lowering() {
        let f = FeedbackVector::new(0.4, -0.9, 0.3);
        let stepper = TrajectoryStepper::new(&SystemParams::default(), &f, 1e-3, NoJumpScheme::default());
        let (psi, jumped) = stepper.step_with_draw(&PureState4::basis(basis::GE), 0.0).unwrap();
        assert!(jumped);
        let expected = lifted_feedback_unitary(&f).mul_vec(&[ZERO, ZERO, ZERO, c(1.0, 0.0)]);
        for (a, b) in psi.amplitudes().iter().zip(&expected) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn first_order_operator_is_literal() {
        let p = SystemParams::default();
        let dt = 1e-3;
        let stepper = TrajectoryStepper::new(&p, &FeedbackVector::zero(), dt, NoJumpScheme::FirstOrder);
        let h = crate::model::build_hamiltonian(&p);
        let n = crate::model::excitation2();
        let expected = &CMatrix::identity(4)
            - &(&h.scale(crate::linalg::I) + &n.scale_real(0.5 * p.gamma)).scale_real(dt);
        assert!(stepper.no_jump_operator().max_abs_diff(&expected) < 1e-16);
        let exact = TrajectoryStepper::new(&p, &FeedbackVector::zero(), dt, NoJumpScheme::Exponential);
        assert!(exact.no_jump_operator().max_abs_diff(&expected) < 2.0 * dt * dt);
    }

    #[test]
    fn steps_stay_normalized() {
        let p = SystemParams::default();
        let stepper = TrajectoryStepper::new(&p, &FeedbackVector::new(1.2, 0.0, 0.0), 1e-3, NoJumpScheme::FirstOrder);
        let mut psi = PureState4::new([c(0.5, 0.0); 4]).unwrap();
        let mut rng = trajectory_rng(7, 0);
        for _ in 0..5000 {
            psi = stepper.step(&psi, &mut rng).unwrap().0;
            assert!((psi.norm() - 1.0).abs() <= NORM_TOL);
        }
    }

    #[test]
    fn purification_rejects_mixed_states() {
        let err = PureState4::from_density(&DensityMatrix::maximally_mixed()).unwrap_err();
        assert!(matches!(err, Error::NotPure { .. }));
        let h = c(FRAC_1_SQRT_2, 0.0);
        let rho = DensityMatrix::from_pure(&[ZERO, h, c(0.0, FRAC_1_SQRT_2), ZERO]).unwrap();
        let psi = PureState4::from_density(&rho).unwrap();
        assert!(psi.projector().max_abs_diff(rho.matrix()) < 1e-14);
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference splitmix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }
}
