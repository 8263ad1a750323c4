//! Linear array model: geometry, excitations, failure masks, angular regions and
//! the pattern metrics built on top of the far-field array factor.
//!
//! Positions are expressed in wavelengths, so the phase of element `n` towards
//! direction `u = sin(theta)` is `2*pi*x_n*u` and no wavenumber is carried around.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// dB value reported for a pattern sample that is exactly zero.
pub const DB_FLOOR: f64 = -300.0;

/// Default number of uniform `u` samples used for beamwidth evaluation and pattern export.
pub const PATTERN_GRID_POINTS: usize = 4001;

/// Default number of uniform `u` samples used to build sidelobe regions.
pub const REGION_GRID_POINTS: usize = 2001;

/// Default inter-element spacing in wavelengths.
pub const DEFAULT_SPACING: f64 = 0.5;

/// Element positions of a linear array along the x axis, in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
}

impl ArrayGeometry {
    /// Uniform array of `n` elements with constant `spacing`, centred on the origin.
    pub fn uniform(n: usize, spacing: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "array needs at least 2 elements, got {n}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        let centre = (n as f64 + 1.0) / 2.0;
        let positions = (1..=n).map(|i| (i as f64 - centre) * spacing).collect();
        Ok(Self { positions })
    }

    /// Arbitrary positions; must be finite and strictly increasing.
    pub fn from_positions(positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidArgument(
                "array needs at least 2 elements".into(),
            ));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite element position".into()));
        }
        if positions.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidArgument(
                "positions must be strictly increasing".into(),
            ));
        }
        Ok(Self { positions })
    }

    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Steering phasor `e^{j 2 pi x_n u}` of element `n`.
    #[inline]
    pub fn phasor(&self, n: usize, u: f64) -> Complex64 {
        Complex64::cis(2.0 * PI * self.positions[n] * u)
    }
}

/// Complex excitation vector. Used for original, faulty and corrected weights
/// as well as for correction vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Excitations(Vec<Complex64>);

impl Excitations {
    pub fn new(weights: Vec<Complex64>) -> Result<Self> {
        if weights
            .iter()
            .any(|w| !w.re.is_finite() || !w.im.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite excitation".into()));
        }
        Ok(Self(weights))
    }

    pub fn from_real(weights: &[f64]) -> Result<Self> {
        Self::new(weights.iter().map(|&w| Complex64::new(w, 0.0)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.0.iter().map(|w| w.norm()).collect()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

impl std::ops::Index<usize> for Excitations {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Binary failure mask. `mask[n] == true` marks a dead, non-reconfigurable element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureScenario {
    mask: Vec<bool>,
}

impl FailureScenario {
    pub fn from_mask(mask: Vec<bool>) -> Result<Self> {
        if mask.iter().all(|&f| f) {
            return Err(Error::InvalidArgument(
                "at least one element must remain reconfigurable".into(),
            ));
        }
        Ok(Self { mask })
    }

    /// Builds a scenario from 1-based faulty element indices.
    pub fn from_faulty_indices(n: usize, faulty: &[usize]) -> Result<Self> {
        let mut mask = vec![false; n];
        for &idx in faulty {
            if idx == 0 || idx > n {
                return Err(Error::InvalidArgument(format!(
                    "faulty index {idx} outside 1..={n}"
                )));
            }
            if mask[idx - 1] {
                return Err(Error::InvalidArgument(format!(
                    "faulty index {idx} listed twice"
                )));
            }
            mask[idx - 1] = true;
        }
        Self::from_mask(mask)
    }

    /// No failures at all.
    pub fn healthy(n: usize) -> Self {
        Self {
            mask: vec![false; n],
        }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn is_faulty(&self, n: usize) -> bool {
        self.mask[n]
    }

    /// Number of failed elements, N_F.
    pub fn n_failed(&self) -> usize {
        self.mask.iter().filter(|&&f| f).count()
    }

    /// Number of reconfigurable elements, N_C = N - N_F.
    pub fn n_reconfigurable(&self) -> usize {
        self.len() - self.n_failed()
    }

    /// Admissible mask (complement of the failure mask).
    pub fn admissible(&self) -> Vec<bool> {
        self.mask.iter().map(|&f| !f).collect()
    }

    /// 1-based indices of the failed elements, ascending.
    pub fn faulty_indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Sorted, deduplicated set of `u = sin(theta)` samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularRegion {
    samples: Vec<f64>,
}

impl AngularRegion {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples
            .iter()
            .any(|u| !u.is_finite() || !(-1.0..=1.0).contains(u))
        {
            return Err(Error::InvalidArgument(
                "region samples must lie in [-1, 1]".into(),
            ));
        }
        samples.sort_by(f64::total_cmp);
        samples.dedup();
        Ok(Self { samples })
    }

    /// `points` uniformly spaced samples covering `[-1, 1]`, exactly symmetric.
    pub fn uniform_grid(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points, got {points}"
            )));
        }
        let last = (points - 1) as f64;
        let samples = (0..points)
            .map(|i| (2.0 * i as f64 - last) / last)
            .collect();
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn contains(&self, u: f64) -> bool {
        self.samples.binary_search_by(|s| s.total_cmp(&u)).is_ok()
    }
}

/// Pattern functional used as the correction constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricKind {
    /// Maximum sidelobe level over the region, in dB relative to broadside.
    #[default]
    MaxSidelobeLevel,
}

/// Metric, the region it is evaluated on, and its target value in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub region: AngularRegion,
    pub target_db: f64,
}

impl MetricSpec {
    pub fn max_sll(region: AngularRegion, target_db: f64) -> Result<Self> {
        if !target_db.is_finite() {
            return Err(Error::InvalidArgument(
                "metric target must be finite".into(),
            ));
        }
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(Self {
            kind: MetricKind::MaxSidelobeLevel,
            region,
            target_db,
        })
    }

    /// Value of the metric for the given weights.
    pub fn evaluate(&self, geometry: &ArrayGeometry, weights: &Excitations) -> Result<f64> {
        match self.kind {
            MetricKind::MaxSidelobeLevel => max_sll(geometry, weights, &self.region),
        }
    }
}

/// Uniform linear array positions `x_n = (n - (N+1)/2) * spacing`.
pub fn uniform_positions(n: usize, spacing: f64) -> Result<ArrayGeometry> {
    ArrayGeometry::uniform(n, spacing)
}

fn check_lengths(geometry: &ArrayGeometry, weights: &Excitations) -> Result<()> {
    if geometry.element_count() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "geometry has {} elements but {} weights were given",
            geometry.element_count(),
            weights.len()
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn array_factor_raw(positions: &[f64], weights: &[Complex64], u: f64) -> Complex64 {
    positions
        .iter()
        .zip(weights)
        .fold(Complex64::new(0.0, 0.0), |acc, (&x, &w)| {
            acc + w * Complex64::cis(2.0 * PI * x * u)
        })
}

/// Far-field array factor `F(u) = sum_n w_n e^{j 2 pi x_n u}`.
pub fn array_factor(geometry: &ArrayGeometry, weights: &Excitations, u: f64) -> Result<Complex64> {
    check_lengths(geometry, weights)?;
    Ok(array_factor_raw(
        geometry.positions(),
        weights.as_slice(),
        u,
    ))
}

/// Power ratio in dB, floored at [`DB_FLOOR`].
#[inline]
pub(crate) fn power_ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        return DB_FLOOR;
    }
    (10.0 * (num / den).log10()).max(DB_FLOOR)
}

fn broadside_power(geometry: &ArrayGeometry, weights: &Excitations) -> Result<f64> {
    check_lengths(geometry, weights)?;
    let p0 = array_factor_raw(geometry.positions(), weights.as_slice(), 0.0).norm_sqr();
    if p0 == 0.0 {
        return Err(Error::DegenerateBroadside);
    }
    Ok(p0)
}

/// Sidelobe level `10 log10(|F(u)|^2 / |F(0)|^2)`.
pub fn sll_db(geometry: &ArrayGeometry, weights: &Excitations, u: f64) -> Result<f64> {
    let p0 = broadside_power(geometry, weights)?;
    let p = array_factor_raw(geometry.positions(), weights.as_slice(), u).norm_sqr();
    Ok(power_ratio_db(p, p0))
}

/// Normalized pattern in dB at every sample of `region`.
pub fn pattern_db(
    geometry: &ArrayGeometry,
    weights: &Excitations,
    region: &AngularRegion,
) -> Result<Vec<f64>> {
    let p0 = broadside_power(geometry, weights)?;
    Ok(region
        .samples()
        .iter()
        .map(|&u| {
            let p = array_factor_raw(geometry.positions(), weights.as_slice(), u).norm_sqr();
            power_ratio_db(p, p0)
        })
        .collect())
}

/// Maximum sidelobe level over the region samples.
pub fn max_sll(
    geometry: &ArrayGeometry,
    weights: &Excitations,
    region: &AngularRegion,
) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::InvalidArgument("empty region".into()));
    }
    Ok(pattern_db(geometry, weights, region)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Width in degrees of the contiguous mainlobe around `u = 0` where the
/// normalized pattern stays at or above `threshold_db`.
///
/// The crossing is located by linear interpolation in (u, dB) between the
/// two grid samples that bracket it; a mainlobe reaching the grid edge is
/// clipped there.
pub fn beamwidth(
    geometry: &ArrayGeometry,
    weights: &Excitations,
    threshold_db: f64,
    grid: &AngularRegion,
) -> Result<f64> {
    if !(threshold_db < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beamwidth threshold must be negative, got {threshold_db}"
        )));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("beamwidth grid too coarse".into()));
    }
    let u = grid.samples();
    let db = pattern_db(geometry, weights, grid)?;
    let centre = u
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    if db[centre] < threshold_db {
        return Err(Error::NoMainlobe { threshold_db });
    }

    let crossing = |inside: usize, outside: usize| -> f64 {
        let (u0, u1) = (u[inside], u[outside]);
        let (d0, d1) = (db[inside], db[outside]);
        u0 + (threshold_db - d0) / (d1 - d0) * (u1 - u0)
    };

    let mut right = centre;
    while right + 1 < u.len() && db[right + 1] >= threshold_db {
        right += 1;
    }
    let u_right = if right + 1 < u.len() {
        crossing(right, right + 1)
    } else {
        u[right]
    };

    let mut left = centre;
    while left > 0 && db[left - 1] >= threshold_db {
        left -= 1;
    }
    let u_left = if left > 0 {
        crossing(left, left - 1)
    } else {
        u[left]
    };

    Ok((u_right.clamp(-1.0, 1.0).asin() - u_left.clamp(-1.0, 1.0).asin()).to_degrees())
}

/// Half-power beamwidth in degrees.
pub fn hpbw(geometry: &ArrayGeometry, weights: &Excitations, grid: &AngularRegion) -> Result<f64> {
    beamwidth(geometry, weights, 10.0 * 0.5f64.log10(), grid)
}

/// Largest ratio between magnitudes of adjacent excitations.
///
/// Pairs where either element is zero (failed or switched off) are skipped and
/// each pair contributes `max(|a|/|b|, |b|/|a|)`.
pub fn dynamic_range(weights: &Excitations) -> Result<f64> {
    let mags = weights.magnitudes();
    if mags.iter().filter(|&&m| m > 0.0).count() < 2 {
        return Err(Error::InvalidArgument(
            "dynamic range needs at least two nonzero excitations".into(),
        ));
    }
    mags.windows(2)
        .filter(|p| p[0] > 0.0 && p[1] > 0.0)
        .map(|p| (p[0] / p[1]).max(p[1] / p[0]))
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidArgument("no adjacent pair of nonzero excitations".into()))
}

/// Sidelobe region `Theta(bw)`: a uniform grid of `grid_density` samples with
/// the open mainlobe interval `|u| < sin(bw/2)` removed.
///
/// The two mainlobe edges `u = +-sin(bw/2)` are always included as samples so
/// the constraint is enforced right at the beamwidth boundary.
pub fn sidelobe_region(bw_target_deg: f64, grid_density: usize) -> Result<AngularRegion> {
    if !(bw_target_deg > 0.0) || !bw_target_deg.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "beamwidth target must be positive, got {bw_target_deg}"
        )));
    }
    if bw_target_deg >= 180.0 {
        return Err(Error::EmptyRegion);
    }
    let edge = (bw_target_deg / 2.0).to_radians().sin();
    let grid = AngularRegion::uniform_grid(grid_density)?;
    let mut samples: Vec<f64> = grid
        .samples()
        .iter()
        .copied()
        .filter(|u| u.abs() >= edge)
        .collect();
    samples.push(edge);
    samples.push(-edge);
    AngularRegion::new(samples)
}
