//! Two coupled qubits with qubit 2 decaying into a monitored channel.
//!
//! Basis order everywhere is qubit 1 ⊗ qubit 2 with local order `|e⟩, |g⟩`:
//! index 0 = `|ee⟩`, 1 = `|eg⟩`, 2 = `|ge⟩`, 3 = `|gg⟩`. ħ = 1 and all
//! frequencies are in units of the bare qubit frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, kron, pauli, CMatrix, C64, I};

pub mod basis {
    pub const EE: usize = 0;
    pub const EG: usize = 1;
    pub const GE: usize = 2;
    pub const GG: usize = 3;
}

const TAYLOR_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega1: f64,
    pub omega2: f64,
    pub g: f64,
    pub gamma: f64,
}

impl SystemParams {
    pub fn new(omega1: f64, omega2: f64, g: f64, gamma: f64) -> Result<Self> {
        let p = SystemParams { omega1, omega2, g, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega1, self.omega2, self.g, self.gamma];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("system parameters must be finite".into()));
        }
        if self.omega1 <= 0.0 || self.omega2 <= 0.0 {
            return Err(Error::InvalidConfig("omega1 and omega2 must be positive".into()));
        }
        if self.g < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidConfig("g and gamma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        SystemParams { gamma, ..self }
    }
}

impl Default for SystemParams {
    /// Resonant qubits with g/ω = 1 and γ/ω = 0.5.
    fn default() -> Self {
        SystemParams { omega1: 1.0, omega2: 1.0, g: 1.0, gamma: 0.5 }
    }
}

/// Feedback amplitudes `A = (A_x, A_y, A_z)`; the feedback unitary on qubit 2 is
/// `exp(i A·σ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackVector {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl FeedbackVector {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        FeedbackVector { ax, ay, az }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn norm(&self) -> f64 {
        (self.ax * self.ax + self.ay * self.ay + self.az * self.az).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.ax.is_finite() && self.ay.is_finite() && self.az.is_finite()
    }
}

/// Rotation of qubit 2's Bloch vector by `angle` about the axis
/// `n = (sinθ cosφ, sinθ sinφ, cosθ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationForm {
    pub angle: f64,
    pub theta: f64,
    pub phi: f64,
}

impl RotationForm {
    pub fn new(angle: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(angle.is_finite() && theta.is_finite() && phi.is_finite()) {
            return Err(Error::InvalidConfig("rotation parameters must be finite".into()));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidConfig(format!("theta = {theta} outside [0, π]")));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(Error::InvalidConfig(format!("phi = {phi} outside [0, 2π)")));
        }
        Ok(RotationForm { angle, theta, phi })
    }

    pub fn axis(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

pub fn rotation_to_amplitudes(r: &RotationForm) -> FeedbackVector {
    let half = -0.5 * r.angle;
    let [nx, ny, nz] = r.axis();
    FeedbackVector::new(half * nx, half * ny, half * nz)
}

/// Two-qubit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-9;
    pub const TRACE_TOL: f64 = 1e-9;
    pub const EIGEN_FLOOR: f64 = -1e-7;

    pub fn new(m: CMatrix) -> Result<Self> {
        if m.rows() != 4 || m.cols() != 4 {
            return Err(Error::InvalidState(format!("expected 4x4, got {}x{}", m.rows(), m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        let herm = m.hermiticity_error();
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let m = m.hermitian_part();
        let min = *linalg::hermitian_eigenvalues(&m)?.last().unwrap();
        if min < Self::EIGEN_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityMatrix(m))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized, nonzero) amplitude vector.
    pub fn from_pure(amplitudes: &[C64; 4]) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("amplitude vector has zero or non-finite norm".into()));
        }
        let psi: Vec<C64> = amplitudes.iter().map(|a| a / norm).collect();
        Ok(DensityMatrix(CMatrix::outer(&psi, &psi).hermitian_part()))
    }

    pub fn basis_state(index: usize) -> Self {
        DensityMatrix(CMatrix::basis_projector(4, index))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(CMatrix::diag_real(&[0.25; 4]))
    }

    /// Skips validation; for states produced by the integrators.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

pub fn build_hamiltonian(p: &SystemParams) -> CMatrix {
    let id = pauli::identity();
    let sz = pauli::sigma_z();
    let (sp, sm) = (pauli::sigma_plus(), pauli::sigma_minus());
    let free1 = kron(&sz, &id).scale_real(0.5 * p.omega1);
    let free2 = kron(&id, &sz).scale_real(0.5 * p.omega2);
    let exchange = (&kron(&sp, &sm) + &kron(&sm, &sp)).scale_real(p.g);
    &(&free1 + &free2) + &exchange
}

/// `σ₂⁻ = I ⊗ σ⁻`.
pub fn sigma2_minus() -> CMatrix {
    kron(&pauli::identity(), &pauli::sigma_minus())
}

/// `σ₂⁺σ₂⁻`, the excited-state projector of qubit 2.
pub fn excitation2() -> CMatrix {
    kron(&pauli::identity(), &(&pauli::sigma_plus() * &pauli::sigma_minus()))
}

/// `F₂ = cos|A|·I + i (sin|A|/|A|) A·σ`.
pub fn feedback_unitary(f: &FeedbackVector) -> CMatrix {
    let a = f.norm();
    let sinc = if a < TAYLOR_GUARD { 1.0 - a * a / 6.0 } else { a.sin() / a };
    let a_dot_sigma = &(&pauli::sigma_x().scale_real(f.ax) + &pauli::sigma_y().scale_real(f.ay))
        + &pauli::sigma_z().scale_real(f.az);
    &pauli::identity().scale_real(a.cos()) + &a_dot_sigma.scale(I * sinc)
}

/// `I₂ ⊗ F₂`.
pub fn lifted_feedback_unitary(f: &FeedbackVector) -> CMatrix {
    kron(&pauli::identity(), &feedback_unitary(f))
}

/// Generator of the (feedback) master equation, with operators precomputed.
///
/// Evaluates `−i[H,ρ] + γ(LρL† − ½{σ₂⁺σ₂⁻, ρ})` with `L = F σ₂⁻`, written as
/// `Kρ + (Kρ)† + γ LρL†` where `K = −iH − ½γσ₂⁺σ₂⁻`.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    params: SystemParams,
    feedback: FeedbackVector,
    hamiltonian: CMatrix,
    jump: CMatrix,
    jump_dag: CMatrix,
    generator: CMatrix,
}

impl MasterEquation {
    pub fn uncontrolled(p: &SystemParams) -> Self {
        Self::build(p, FeedbackVector::zero(), sigma2_minus())
    }

    pub fn with_feedback(p: &SystemParams, f: &FeedbackVector) -> Self {
        let jump = &lifted_feedback_unitary(f) * &sigma2_minus();
        Self::build(p, *f, jump)
    }

    fn build(p: &SystemParams, feedback: FeedbackVector, jump: CMatrix) -> Self {
        let hamiltonian = build_hamiltonian(p);
        let generator =
            &hamiltonian.scale(-I) - &excitation2().scale_real(0.5 * p.gamma);
        MasterEquation {
            params: *p,
            feedback,
            jump_dag: jump.dagger(),
            jump,
            hamiltonian,
            generator,
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn feedback(&self) -> &FeedbackVector {
        &self.feedback
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    /// `F σ₂⁻`, the operator applied to the state on a detection.
    pub fn jump_operator(&self) -> &CMatrix {
        &self.jump
    }

    /// Non-Hermitian no-jump generator `K = −iH − ½γσ₂⁺σ₂⁻`.
    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let k_rho = &self.generator * rho;
        let mut out = &k_rho + &k_rho.dagger();
        if self.params.gamma != 0.0 {
            let emitted = &(&self.jump * rho) * &self.jump_dag;
            out += &emitted.scale_real(self.params.gamma);
        }
        out
    }
}

pub fn lindblad_rhs(rho: &DensityMatrix, p: &SystemParams) -> CMatrix {
    MasterEquation::uncontrolled(p).rhs(rho.matrix())
}

pub fn feedback_rhs(rho: &DensityMatrix, p: &SystemParams, f: &FeedbackVector) -> CMatrix {
    MasterEquation::with_feedback(p, f).rhs(rho.matrix())
}
