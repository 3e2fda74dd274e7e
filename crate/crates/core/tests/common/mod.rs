#![allow(dead_code)]

use jumpfeed::linalg::{CMatrix, C64};
use jumpfeed::DensityMatrix;
use proptest::prelude::*;

/// ρ = MM†/Tr(MM†) from 32 reals.
pub fn density_from(parts: &[f64]) -> DensityMatrix {
    let m = CMatrix::from_fn(4, 4, |i, j| C64::new(parts[8 * i + 2 * j], parts[8 * i + 2 * j + 1]));
    let p = &m * &m.dagger();
    let tr = p.trace().re;
    DensityMatrix::new(p.scale_real(1.0 / tr).hermitian_part()).expect("valid density matrix")
}

pub fn amplitudes_from(parts: &[f64]) -> [C64; 4] {
    let v: Vec<C64> = (0..4).map(|k| C64::new(parts[2 * k], parts[2 * k + 1])).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    [v[0] / n, v[1] / n, v[2] / n, v[3] / n]
}

pub fn arb_density() -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(-1.0f64..1.0, 32)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|v| density_from(&v))
}

pub fn arb_amplitudes() -> impl Strategy<Value = [C64; 4]> {
    prop::collection::vec(-1.0f64..1.0, 8)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|v| amplitudes_from(&v))
}

/// Haar-ish 2×2 unitary from Euler angles and a global phase.
pub fn unitary2(alpha: f64, beta: f64, gamma: f64, delta: f64) -> CMatrix {
    let (c, s) = ((gamma / 2.0).cos(), (gamma / 2.0).sin());
    let e = |phi: f64| C64::from_polar(1.0, phi);
    CMatrix::new(
        2,
        2,
        vec![
            e(alpha - beta / 2.0 - delta / 2.0) * c,
            -e(alpha - beta / 2.0 + delta / 2.0) * s,
            e(alpha + beta / 2.0 - delta / 2.0) * s,
            e(alpha + beta / 2.0 + delta / 2.0) * c,
        ],
    )
}

/// Trapezoidal time average of `values` over samples with `t >= from`.
pub fn time_average(times: &[f64], values: &[f64], from: f64) -> f64 {
    let mut area = 0.0;
    let mut span = 0.0;
    for i in 1..times.len() {
        if times[i - 1] >= from - 1e-12 {
            let h = times[i] - times[i - 1];
            area += 0.5 * h * (values[i] + values[i - 1]);
            span += h;
        }
    }
    area / span
}
