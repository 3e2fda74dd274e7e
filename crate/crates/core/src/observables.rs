//! Measurements on two-qubit states: reduced state of qubit 1, its coherence,
//! populations and Bloch vector, plus Wootters concurrence and purity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, kron, pauli, CMatrix, ZERO};
use crate::model::DensityMatrix;

/// Observables of one sampled state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub rho1_ee: f64,
    pub rho1_gg: f64,
    pub abs_rho_eg: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub concurrence: f64,
    pub purity: f64,
}

impl ObservableRecord {
    pub fn measure(t: f64, rho: &DensityMatrix) -> Result<Self> {
        let rho1 = partial_trace_qubit2(rho);
        let (abs_rho_eg, rho1_ee, rho1_gg) = coherence_and_populations(&rho1);
        let [px, py, pz] = bloch_vector(&rho1);
        Ok(ObservableRecord {
            t,
            rho1_ee,
            rho1_gg,
            abs_rho_eg,
            px,
            py,
            pz,
            concurrence: concurrence(rho)?,
            purity: rho.purity(),
        })
    }

    /// Values in CSV column order.
    pub fn values(&self) -> [f64; 9] {
        [
            self.t,
            self.rho1_ee,
            self.rho1_gg,
            self.abs_rho_eg,
            self.px,
            self.py,
            self.pz,
            self.concurrence,
            self.purity,
        ]
    }
}

/// `ρ₁[i, j] = Σ_k ρ[(i,k), (j,k)]`.
pub fn partial_trace_qubit2(rho: &DensityMatrix) -> CMatrix {
    let m = rho.matrix();
    CMatrix::from_fn(2, 2, |i, j| m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)])
}

/// `(|ρ_eg|, ρ_ee, ρ_gg)` of a single-qubit density matrix.
pub fn coherence_and_populations(rho1: &CMatrix) -> (f64, f64, f64) {
    (rho1[(0, 1)].norm(), rho1[(0, 0)].re, rho1[(1, 1)].re)
}

/// `P_k = Tr(σ_k ρ₁)`.
pub fn bloch_vector(rho1: &CMatrix) -> [f64; 3] {
    [pauli::sigma_x(), pauli::sigma_y(), pauli::sigma_z()].map(|s| (&s * rho1).trace().re)
}

/// `(σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`.
pub fn spin_flip(rho: &DensityMatrix) -> CMatrix {
    let yy = kron(&pauli::sigma_y(), &pauli::sigma_y());
    &(&yy * &rho.matrix().conj()) * &yy
}

/// Wootters concurrence.
///
/// With `ρ = WW†` from its eigen-decomposition (`W = V·diag(√p)`), the
/// `λ_i` are the singular values of `τ = Wᵀ(σ_y⊗σ_y)W`. They are read off
/// as the non-negative eigenvalues of the Hermitian block `[[0, τ], [τ†, 0]]`,
/// which keeps their absolute error at roundoff level; square roots of the
/// spectrum of `√ρ ρ̃ √ρ` would turn 1e-16 noise into 1e-8 for pure states.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let (p, v) = linalg::hermitian_eigen(rho.matrix())?;
    let mut roots = [0.0; 4];
    for (r, &lambda) in roots.iter_mut().zip(&p) {
        if lambda < -linalg::NEGATIVE_CLAMP {
            return Err(Error::NotPositive { eigenvalue: lambda });
        }
        *r = lambda.max(0.0).sqrt();
    }
    let w = CMatrix::from_fn(4, 4, |i, j| v[(i, j)] * roots[j]);
    let yy = kron(&pauli::sigma_y(), &pauli::sigma_y());
    let tau = &(&w.dagger().conj() * &yy) * &w;
    let block = CMatrix::from_fn(8, 8, |i, j| match (i < 4, j < 4) {
        (true, false) => tau[(i, j - 4)],
        (false, true) => tau[(j, i - 4)].conj(),
        _ => ZERO,
    });
    let s = linalg::hermitian_eigenvalues(&block)?;
    let c = s[0] - s[1] - s[2] - s[3];
    Ok(c.clamp(0.0, 1.0))
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}
