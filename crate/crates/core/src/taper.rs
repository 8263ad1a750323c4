//! Reference tapers and composition of failure / correction vectors.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::array::{Excitations, FailureScenario};
use crate::error::{Error, Result};

/// Chebyshev polynomial of the first kind, valid for any real argument.
fn chebyshev_t(order: usize, x: f64) -> f64 {
    let n = order as f64;
    if x.abs() <= 1.0 {
        (n * x.acos()).cos()
    } else if x > 1.0 {
        (n * x.acosh()).cosh()
    } else {
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * (n * (-x).acosh()).cosh()
    }
}

/// Dolph-Chebyshev taper for a broadside half-wavelength array of `n` elements
/// with equiripple sidelobes at `sll_db` (negative, relative to the mainlobe).
///
/// The pattern `T_{N-1}(x0 cos(psi/2))` is sampled at `N` points of the
/// inter-element phase `psi` and inverted with a centred DFT, which is exact
/// for both even and odd `N`. Weights are real, symmetric and normalized so
/// the largest one equals 1.
pub fn dolph_chebyshev(n: usize, sll_db: f64) -> Result<Excitations> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "Dolph-Chebyshev taper needs at least 3 elements, got {n}"
        )));
    }
    if !(sll_db < 0.0) || !sll_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sidelobe level must be negative, got {sll_db}"
        )));
    }
    let ratio = 10f64.powf(-sll_db / 20.0);
    let order = n - 1;
    let x0 = (ratio.acosh() / order as f64).cosh();
    let half = order as f64 / 2.0;

    let samples: Vec<f64> = (0..n)
        .map(|k| {
            let psi = 2.0 * PI * k as f64 / n as f64;
            chebyshev_t(order, x0 * (psi / 2.0).cos())
        })
        .collect();

    let mut weights: Vec<f64> = (0..n)
        .map(|m| {
            let offset = m as f64 - half;
            samples
                .iter()
                .enumerate()
                .map(|(k, &p)| p * (2.0 * PI * k as f64 / n as f64 * offset).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect();

    // Enforce exact symmetry against round-off.
    for m in 0..n / 2 {
        let avg = 0.5 * (weights[m] + weights[n - 1 - m]);
        weights[m] = avg;
        weights[n - 1 - m] = avg;
    }
    let peak = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Excitations::from_real(&weights.iter().map(|w| w / peak).collect::<Vec<_>>())
}

/// Faulty weights `w~_n = w_n (1 - Omega_n)`.
pub fn apply_failures(weights: &Excitations, scenario: &FailureScenario) -> Result<Excitations> {
    if weights.len() != scenario.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights but failure mask has {} entries",
            weights.len(),
            scenario.len()
        )));
    }
    Excitations::new(
        weights
            .iter()
            .zip(scenario.mask())
            .map(|(&w, &dead)| if dead { Complex64::new(0.0, 0.0) } else { w })
            .collect(),
    )
}

/// Corrected weights `w^ = w~ + dw`.
///
/// `faulty_mask` marks elements that cannot carry a correction; a nonzero
/// correction there is a [`Error::ConstraintViolation`].
pub fn corrected_weights(
    faulty: &Excitations,
    delta: &Excitations,
    faulty_mask: &FailureScenario,
) -> Result<Excitations> {
    if faulty.len() != delta.len() || faulty.len() != faulty_mask.len() {
        return Err(Error::InvalidArgument(
            "faulty weights, correction and mask must have equal length".into(),
        ));
    }
    if let Some(n) = (0..delta.len()).find(|&n| faulty_mask.is_faulty(n) && delta[n].norm() != 0.0)
    {
        return Err(Error::ConstraintViolation(format!(
            "nonzero correction at failed element {}",
            n + 1
        )));
    }
    Excitations::new(
        faulty
            .iter()
            .zip(delta.iter())
            .map(|(a, b)| a + b)
            .collect(),
    )
}
