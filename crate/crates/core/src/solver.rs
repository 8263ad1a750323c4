//! Minimum-l1 correction under a sidelobe-level constraint.
//!
//! The constraint `max_u SLL(u) <= target` over a finite region is written per
//! sample as `|F^(u)| <= s * Re(e^{-j phi} F^(0))` with `s = 10^(target/20)`.
//! Because `|F^(0)| >= Re(e^{-j phi} F^(0))` this is a convex inner
//! approximation of the true constraint (exact when the broadside phase is
//! `phi`), so each solve is a second-order cone program:
//!
//! ```text
//! minimize   sum_n t_n
//! subject to |dw_n| <= t_n                               (free n)
//!            |F~(u_m) + sum_n dw_n e_n(u_m)| <= s * b(dw)  (every sample)
//! ```
//!
//! It is solved by a primal log-barrier interior-point method with damped
//! Newton steps. A phase-one problem finds a strictly feasible start. The
//! region is handled through a working set of samples that grows until the
//! solution satisfies the constraint at every sample of the full region, and
//! the broadside phase `phi` is re-linearized until it matches the solution.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array::{
    array_factor_raw, power_ratio_db, ArrayGeometry, Excitations, FailureScenario, MetricKind,
    MetricSpec,
};
use crate::error::{Error, Result};

/// Control parameters of the inner solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Newton-step budget of one barrier run (I_max).
    pub max_iterations: usize,
    /// Smallest step length accepted by the line search (xi).
    pub min_step: f64,
    /// Duality-gap bound that ends the barrier sequence (zeta).
    pub optimality_tol: f64,
    /// Slack in dB allowed on the metric target when judging feasibility.
    pub constraint_tol_db: f64,
    /// Magnitudes at or below this count as zero in l0 counts (epsilon_0).
    pub zero_threshold: f64,
    /// Initial barrier weight.
    pub barrier_initial: f64,
    /// Barrier weight multiplier between centering steps.
    pub barrier_growth: f64,
    /// Optimize real and imaginary parts; otherwise corrections are real.
    pub complex_corrections: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            min_step: 1e-10,
            optimality_tol: 1e-6,
            constraint_tol_db: 0.02,
            zero_threshold: 1e-12,
            barrier_initial: 1.0,
            barrier_growth: 16.0,
            complex_corrections: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("min_step", self.min_step),
            ("optimality_tol", self.optimality_tol),
            ("constraint_tol_db", self.constraint_tol_db),
            ("zero_threshold", self.zero_threshold),
            ("barrier_initial", self.barrier_initial),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.barrier_growth > 1.0) {
            return Err(Error::InvalidArgument(
                "barrier_growth must exceed 1".into(),
            ));
        }
        if self.constraint_tol_db >= 1.0 {
            return Err(Error::InvalidArgument(
                "constraint_tol_db must be well below 1 dB".into(),
            ));
        }
        Ok(())
    }
}

/// Entries of the correction vector that must stay exactly zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroMask {
    forbidden: Vec<bool>,
}

impl ZeroMask {
    pub fn new(forbidden: Vec<bool>) -> Result<Self> {
        if forbidden.iter().all(|&f| f) {
            return Err(Error::InvalidArgument(
                "zero mask leaves no free entry".into(),
            ));
        }
        Ok(Self { forbidden })
    }

    /// Mask forbidding corrections on failed elements only.
    pub fn from_failures(scenario: &FailureScenario) -> Result<Self> {
        Self::new(scenario.mask().to_vec())
    }

    /// Failed elements plus every index flagged in `extra`.
    pub fn with_extra(scenario: &FailureScenario, extra: &[bool]) -> Result<Self> {
        if extra.len() != scenario.len() {
            return Err(Error::InvalidArgument("mask length mismatch".into()));
        }
        Self::new(
            scenario
                .mask()
                .iter()
                .zip(extra)
                .map(|(&a, &b)| a || b)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.forbidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forbidden.is_empty()
    }

    pub fn is_forbidden(&self, n: usize) -> bool {
        self.forbidden[n]
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.forbidden.len())
            .filter(|&n| !self.forbidden[n])
            .collect()
    }
}

/// `sum_n |dw_n|`.
pub fn l1_norm(delta: &Excitations) -> f64 {
    delta.iter().map(|d| d.norm()).sum()
}

/// Number of entries with `|dw_n| > zero_threshold`.
pub fn l0_norm(delta: &Excitations, zero_threshold: f64) -> usize {
    delta.iter().filter(|d| d.norm() > zero_threshold).count()
}

/// Geometry and faulty weights the correction is applied to.
#[derive(Debug, Clone, Copy)]
pub struct SolveContext<'a> {
    pub geometry: &'a ArrayGeometry,
    pub faulty: &'a Excitations,
}

/// Region sizes up to this are always used whole.
const FULL_REGION_LIMIT: usize = 160;
/// Working-set rounds before giving up.
const MAX_WORKING_SET_ROUNDS: usize = 40;
/// Broadside re-linearization rounds (complex corrections only).
const MAX_PHASE_ROUNDS: usize = 8;
/// Newton decrement `lambda^2 / 2` below which a centering step is done.
const NEWTON_TOL: f64 = 1e-10;
/// Sample-level violation in dB that triggers a working-set extension.
const SAMPLE_VIOLATION_DB: f64 = 1e-7;

/// Minimizes `||dw||_1` subject to `metric(w~ + dw) <= target` and the zero mask.
///
/// Returns [`Error::Infeasible`] when no correction honouring the mask meets
/// `target + constraint_tol_db`. The returned vector is exactly zero on masked
/// entries and satisfies the metric within the tolerance.
pub fn solve_constrained_l1(
    metric: &MetricSpec,
    mask: &ZeroMask,
    start: &Excitations,
    config: &SolverConfig,
    context: SolveContext<'_>,
) -> Result<Excitations> {
    config.validate()?;
    let n = context.geometry.element_count();
    if context.faulty.len() != n || mask.len() != n || start.len() != n {
        return Err(Error::InvalidArgument(
            "geometry, faulty weights, mask and start must have equal length".into(),
        ));
    }
    if metric.region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if let Some(k) = (0..n).find(|&k| mask.is_forbidden(k) && start[k].norm() != 0.0) {
        return Err(Error::InvalidArgument(format!(
            "start point is nonzero at masked entry {}",
            k + 1
        )));
    }
    match metric.kind {
        MetricKind::MaxSidelobeLevel => {}
    }

    let start_is_zero = start.iter().all(|d| d.norm() == 0.0);
    let start_phi = metric_of(context, start, metric)?;
    if !start_phi.is_finite() {
        return Err(Error::NumericalFailure(
            "metric of start point is not finite".into(),
        ));
    }
    if start_is_zero && start_phi <= metric.target_db {
        return Ok(start.clone());
    }

    // Real data on a symmetric region has a real optimum: the conjugate of a
    // feasible correction is feasible and the problem is convex.
    let mirrored =
        is_real(context.faulty) && is_real(start) && is_symmetric(metric.region.samples());
    let complex = config.complex_corrections && !mirrored;
    let layout = Layout::new(mask.free_indices(), complex);
    let mut solver = SlSolver::new(metric, context, config, layout);
    solver.mirrored = mirrored;
    let z = solver.run(start, start_phi)?;
    let delta = solver.layout.to_excitations(&z, n)?;

    let achieved = metric_of(context, &delta, metric)?;
    if !achieved.is_finite() {
        return Err(Error::NumericalFailure(
            "metric of solution is not finite".into(),
        ));
    }
    if achieved > metric.target_db + config.constraint_tol_db {
        return Err(Error::Infeasible(format!(
            "solution reaches {achieved:.4} dB against target {:.4} dB",
            metric.target_db
        )));
    }
    Ok(delta)
}

fn is_real(w: &Excitations) -> bool {
    w.iter().all(|c| c.im == 0.0)
}

fn is_symmetric(u: &[f64]) -> bool {
    u.iter()
        .zip(u.iter().rev())
        .all(|(a, b)| (a + b).abs() <= 1e-12)
}

fn metric_of(context: SolveContext<'_>, delta: &Excitations, metric: &MetricSpec) -> Result<f64> {
    let w = Excitations::new(
        context
            .faulty
            .iter()
            .zip(delta.iter())
            .map(|(a, b)| a + b)
            .collect(),
    )?;
    metric.evaluate(context.geometry, &w)
}

/// Mapping between free complex corrections and the real unknown vector.
#[derive(Debug, Clone)]
struct Layout {
    free: Vec<usize>,
    complex: bool,
}

impl Layout {
    fn new(free: Vec<usize>, complex: bool) -> Self {
        Self { free, complex }
    }

    fn width(&self) -> usize {
        if self.complex {
            2
        } else {
            1
        }
    }

    fn dim(&self) -> usize {
        self.free.len() * self.width()
    }

    fn pack(&self, delta: &Excitations) -> DVector<f64> {
        let w = self.width();
        let mut z = DVector::zeros(self.dim());
        for (f, &n) in self.free.iter().enumerate() {
            z[w * f] = delta[n].re;
            if self.complex {
                z[w * f + 1] = delta[n].im;
            }
        }
        z
    }

    fn to_excitations(&self, z: &DVector<f64>, n: usize) -> Result<Excitations> {
        let w = self.width();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (f, &k) in self.free.iter().enumerate() {
            let im = if self.complex { z[w * f + 1] } else { 0.0 };
            out[k] = Complex64::new(z[w * f], im);
        }
        Excitations::new(out).map_err(|_| Error::NumericalFailure("non-finite correction".into()))
    }
}

/// Second-order cone `|(y_a, y_b)| <= y_t` on entries of the unknown vector.
#[derive(Debug, Clone)]
struct Cone {
    z: [usize; 2],
    width: usize,
    t: usize,
}

/// Barrier terms `-log(q^2 - |v_m|^2)` with `v = k0 + K y` and `q = q0 + p.y`.
///
/// Rows `2m` and `2m+1` of `K` hold the real and imaginary parts of the
/// rotated pattern at sample `m`; `q` is the scaled broadside term.
struct PatternRows {
    k: DMatrix<f64>,
    k0: DVector<f64>,
    p: DVector<f64>,
    q0: f64,
}

struct BarrierProblem {
    rows: PatternRows,
    cones: Vec<Cone>,
    /// Optional `|y[..len]|^2 <= radius^2` bound as `(len, radius^2)`.
    ball: Option<(usize, f64)>,
    cost: DVector<f64>,
}

enum Centering {
    Converged,
    SmallStep,
    Budget,
}

impl BarrierProblem {
    fn dim(&self) -> usize {
        self.cost.len()
    }

    fn sample_count(&self) -> usize {
        self.rows.k0.len() / 2
    }

    /// Total barrier parameter (two per cone).
    fn nu(&self) -> f64 {
        2.0 * (self.sample_count() + self.cones.len()) as f64 + self.ball.map_or(0.0, |_| 1.0)
    }

    fn barrier(&self, y: &DVector<f64>) -> Option<f64> {
        let q = self.rows.q0 + self.rows.p.dot(y);
        if !(q > 0.0) {
            return None;
        }
        let v = &self.rows.k0 + &self.rows.k * y;
        let mut total = 0.0;
        for m in 0..self.sample_count() {
            let g = q * q - v[2 * m] * v[2 * m] - v[2 * m + 1] * v[2 * m + 1];
            if !(g > 0.0) {
                return None;
            }
            total -= g.ln();
        }
        for c in &self.cones {
            let t = y[c.t];
            let mut h = t * t;
            for &i in &c.z[..c.width] {
                h -= y[i] * y[i];
            }
            if !(t > 0.0) || !(h > 0.0) {
                return None;
            }
            total -= h.ln();
        }
        if let Some((len, r2)) = self.ball {
            let h = r2 - y.rows(0, len).norm_squared();
            if !(h > 0.0) {
                return None;
            }
            total -= h.ln();
        }
        Some(total)
    }

    fn objective(&self, tau: f64, y: &DVector<f64>) -> Option<f64> {
        self.barrier(y).map(|b| tau * self.cost.dot(y) + b)
    }

    fn gradient_hessian(&self, tau: f64, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let dim = self.dim();
        let samples = self.sample_count();
        let rows = &self.rows;
        let q = rows.q0 + rows.p.dot(y);
        let v = &rows.k0 + &rows.k * y;

        let mut inv_g = DVector::zeros(samples);
        for m in 0..samples {
            let g = q * q - v[2 * m] * v[2 * m] - v[2 * m + 1] * v[2 * m + 1];
            inv_g[m] = 1.0 / g;
        }

        // Scaled constraint gradients grad(g_m) / g_m, one row per sample.
        let mut jac = DMatrix::zeros(samples, dim);
        // K rows scaled by sqrt(2 / g_m).
        let mut curv = DMatrix::zeros(2 * samples, dim);
        for j in 0..dim {
            let pj = rows.p[j];
            for m in 0..samples {
                let (kr, ki) = (rows.k[(2 * m, j)], rows.k[(2 * m + 1, j)]);
                jac[(m, j)] = 2.0 * (q * pj - v[2 * m] * kr - v[2 * m + 1] * ki) * inv_g[m];
                let w = (2.0 * inv_g[m]).sqrt();
                curv[(2 * m, j)] = kr * w;
                curv[(2 * m + 1, j)] = ki * w;
            }
        }

        let mut grad = &self.cost * tau;
        for m in 0..samples {
            grad -= jac.row(m).transpose();
        }
        let mut hess = jac.tr_mul(&jac);
        hess += curv.tr_mul(&curv);
        let sum_inv: f64 = inv_g.iter().sum();
        hess.ger(-2.0 * sum_inv, &rows.p, &rows.p, 1.0);

        for c in &self.cones {
            let t = y[c.t];
            let zs = &c.z[..c.width];
            let h = t * t - zs.iter().map(|&i| y[i] * y[i]).sum::<f64>();
            let h2 = h * h;
            for &i in zs {
                grad[i] += 2.0 * y[i] / h;
                for &k in zs {
                    hess[(i, k)] += 4.0 * y[i] * y[k] / h2;
                }
                hess[(i, i)] += 2.0 / h;
                hess[(i, c.t)] -= 4.0 * y[i] * t / h2;
                hess[(c.t, i)] -= 4.0 * y[i] * t / h2;
            }
            grad[c.t] -= 2.0 * t / h;
            hess[(c.t, c.t)] += 4.0 * t * t / h2 - 2.0 / h;
        }
        if let Some((len, r2)) = self.ball {
            let yz = y.rows(0, len);
            let h = r2 - yz.norm_squared();
            grad.rows_mut(0, len).axpy(2.0 / h, &yz, 1.0);
            let mut block = hess.view_mut((0, 0), (len, len));
            block.ger(4.0 / (h * h), &yz, &yz, 1.0);
            for i in 0..len {
                block[(i, i)] += 2.0 / h;
            }
        }
        (grad, hess)
    }

    /// Damped Newton iterations on `tau * cost.y + barrier(y)` from a strictly
    /// feasible `y`. `stop` is checked after every accepted step.
    fn center(
        &self,
        tau: f64,
        y: &mut DVector<f64>,
        budget: &mut usize,
        min_step: f64,
        stop: &dyn Fn(&DVector<f64>) -> bool,
    ) -> Result<Centering> {
        let mut f = self.objective(tau, y).ok_or_else(|| {
            Error::NumericalFailure("centering started outside the domain".into())
        })?;
        loop {
            if *budget == 0 {
                return Ok(Centering::Budget);
            }
            *budget -= 1;
            let (grad, hess) = self.gradient_hessian(tau, y);
            if grad.iter().any(|g| !g.is_finite()) || hess.iter().any(|h| !h.is_finite()) {
                return Err(Error::NumericalFailure("non-finite Newton system".into()));
            }
            let step = newton_step(hess, &grad)?;
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= NEWTON_TOL {
                return Ok(Centering::Converged);
            }
            let slope = grad.dot(&step);
            let step_norm = step.amax();
            let mut alpha = 1.0;
            loop {
                if alpha * step_norm < min_step {
                    return Ok(Centering::SmallStep);
                }
                let trial = &*y + &step * alpha;
                if let Some(ft) = self.objective(tau, &trial) {
                    if ft <= f + 0.25 * alpha * slope {
                        *y = trial;
                        f = ft;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if stop(y) {
                return Ok(Centering::Converged);
            }
        }
    }
}

/// Solves `H s = -g` by Cholesky, adding diagonal jitter if `H` is not
/// numerically positive definite.
fn newton_step(hess: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        if jitter > 0.0 {
            for i in 0..h.nrows() {
                h[(i, i)] += jitter;
            }
        }
        if let Some(ch) = h.cholesky() {
            let step = -ch.solve(grad);
            if step.iter().all(|s| s.is_finite()) {
                return Ok(step);
            }
        }
        jitter = if jitter == 0.0 {
            1e-14 * scale
        } else {
            jitter * 100.0
        };
    }
    Err(Error::NumericalFailure("Newton system is singular".into()))
}

enum PhaseOne {
    Feasible(DVector<f64>),
    Infeasible,
}

struct SlSolver<'a> {
    metric: &'a MetricSpec,
    context: SolveContext<'a>,
    config: &'a SolverConfig,
    layout: Layout,
    budget: usize,
    /// Pattern scale used to size phase-one slack.
    scale: f64,
    /// Real corrections on a symmetric region: `|F(u)| = |F(-u)|`, so only
    /// `u >= 0` samples are constrained.
    mirrored: bool,
}

impl<'a> SlSolver<'a> {
    fn new(
        metric: &'a MetricSpec,
        context: SolveContext<'a>,
        config: &'a SolverConfig,
        layout: Layout,
    ) -> Self {
        let scale = context
            .faulty
            .iter()
            .map(|w| w.norm())
            .sum::<f64>()
            .max(1.0);
        Self {
            metric,
            context,
            config,
            layout,
            budget: config.max_iterations,
            scale,
            mirrored: false,
        }
    }

    fn run(&mut self, start: &Excitations, start_phi: f64) -> Result<DVector<f64>> {
        let target = self.metric.target_db;
        let tol = self.config.constraint_tol_db;
        if self.layout.dim() == 0 {
            return if start_phi <= target + tol {
                Ok(DVector::zeros(0))
            } else {
                Err(Error::Infeasible(
                    "no free correction and start misses the target".into(),
                ))
            };
        }

        let mut z = self.layout.pack(start);
        let mut phase = self.broadside(&z).arg();
        let mut working = self.initial_working_set(&z);
        // Strict target first; if it has no interior point, fall back to half
        // the tolerance so the result still meets target + tol.
        let mut target_db = target;
        let mut relaxed = false;

        for _ in 0..MAX_PHASE_ROUNDS {
            let mut converged = false;
            for _ in 0..MAX_WORKING_SET_ROUNDS {
                let samples = self.constrained_samples(&working);
                let mut rows = self.pattern_rows(&samples, phase, target_db);
                let interior = match self.phase_one(&rows, &z)? {
                    PhaseOne::Feasible(zf) => Some(zf),
                    PhaseOne::Infeasible if !relaxed => {
                        relaxed = true;
                        target_db = target + 0.5 * tol;
                        rows = self.pattern_rows(&samples, phase, target_db);
                        match self.phase_one(&rows, &z)? {
                            PhaseOne::Feasible(zf) => Some(zf),
                            PhaseOne::Infeasible => None,
                        }
                    }
                    PhaseOne::Infeasible => None,
                };
                let Some(interior) = interior else {
                    return Err(Error::Infeasible(format!(
                        "no correction meets {target:.4} dB with the given mask"
                    )));
                };
                z = self.phase_two(rows, interior)?;
                if !self.extend_working_set(&z, target_db, &mut working) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NumericalFailure(
                    "working set did not converge on the region".into(),
                ));
            }
            if !self.layout.complex {
                break;
            }
            let new_phase = self.broadside(&z).arg();
            if (new_phase - phase).abs() <= 1e-9 {
                break;
            }
            phase = new_phase;
        }
        Ok(z)
    }

    fn constrained_samples(&self, working: &[usize]) -> Vec<f64> {
        let mut samples: Vec<f64> = working.iter().map(|&i| self.region()[i]).collect();
        if self.mirrored {
            samples = samples.into_iter().map(f64::abs).collect();
            samples.sort_unstable_by(f64::total_cmp);
            samples.dedup();
        }
        samples
    }

    fn region(&self) -> &[f64] {
        self.metric.region.samples()
    }

    fn corrected(&self, z: &DVector<f64>) -> Vec<Complex64> {
        let n = self.context.geometry.element_count();
        let mut w = self.context.faulty.as_slice().to_vec();
        let width = self.layout.width();
        for (f, &k) in self.layout.free.iter().enumerate() {
            let im = if self.layout.complex {
                z[width * f + 1]
            } else {
                0.0
            };
            w[k] += Complex64::new(z[width * f], im);
        }
        debug_assert_eq!(w.len(), n);
        w
    }

    fn broadside(&self, z: &DVector<f64>) -> Complex64 {
        array_factor_raw(self.context.geometry.positions(), &self.corrected(z), 0.0)
    }

    /// Normalized pattern in dB over the full region.
    fn region_db(&self, z: &DVector<f64>) -> Vec<f64> {
        let w = self.corrected(z);
        let x = self.context.geometry.positions();
        let p0 = array_factor_raw(x, &w, 0.0).norm_sqr();
        self.region()
            .iter()
            .map(|&u| power_ratio_db(array_factor_raw(x, &w, u).norm_sqr(), p0))
            .collect()
    }

    /// Indices of region samples that are local maxima of `db`, plus the
    /// endpoints of every contiguous run of samples.
    fn peaks(&self, db: &[f64]) -> Vec<usize> {
        let u = self.region();
        let m = u.len();
        if m == 0 {
            return Vec::new();
        }
        let mut steps: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
        steps.sort_unstable_by(f64::total_cmp);
        let spacing = steps.get(steps.len() / 2).copied().unwrap_or(1.0);
        let gap = |i: usize| u[i + 1] - u[i] > 1.5 * spacing;
        let mut out = Vec::new();
        for i in 0..m {
            let left_edge = i == 0 || gap(i - 1);
            let right_edge = i + 1 == m || gap(i);
            let left_ok = left_edge || db[i] >= db[i - 1];
            let right_ok = right_edge || db[i] >= db[i + 1];
            if left_edge || right_edge || (left_ok && right_ok) {
                out.push(i);
            }
        }
        out
    }

    fn initial_working_set(&self, z: &DVector<f64>) -> Vec<usize> {
        let m = self.region().len();
        if m <= FULL_REGION_LIMIT {
            return (0..m).collect();
        }
        let mut set = self.peaks(&self.region_db(z));
        let faulty_db = self.region_db(&DVector::zeros(self.layout.dim()));
        set.extend(self.peaks(&faulty_db));
        set.sort_unstable();
        set.dedup();
        set
    }

    /// Adds the worst sample of every violating run and returns whether
    /// anything was added.
    fn extend_working_set(
        &self,
        z: &DVector<f64>,
        target_db: f64,
        working: &mut Vec<usize>,
    ) -> bool {
        if working.len() == self.region().len() {
            return false;
        }
        let db = self.region_db(z);
        let limit = target_db + SAMPLE_VIOLATION_DB;
        let mut added = Vec::new();
        let mut i = 0;
        while i < db.len() {
            if db[i] > limit {
                let mut worst = i;
                while i < db.len() && db[i] > limit {
                    if db[i] > db[worst] {
                        worst = i;
                    }
                    i += 1;
                }
                added.push(worst);
            } else {
                i += 1;
            }
        }
        if added.is_empty() {
            return false;
        }
        // Lobes close to the target are likely to become active next.
        added.extend(
            self.peaks(&db)
                .into_iter()
                .filter(|&i| db[i] > target_db - 1.0),
        );
        let before = working.len();
        working.extend(added);
        working.sort_unstable();
        working.dedup();
        working.len() > before
    }

    /// Pattern rows for phase two: unknowns are the correction entries.
    fn pattern_rows(&self, samples: &[f64], phase: f64, target_db: f64) -> PatternRows {
        let amplitude = 10f64.powf(target_db / 20.0);
        let x = self.context.geometry.positions();
        let faulty = self.context.faulty.as_slice();
        let rot = Complex64::cis(-phase);
        let width = self.layout.width();
        let dim = self.layout.dim();
        let mut k = DMatrix::zeros(2 * samples.len(), dim);
        let mut k0 = DVector::zeros(2 * samples.len());
        for (m, &u) in samples.iter().enumerate() {
            let c = rot * array_factor_raw(x, faulty, u);
            k0[2 * m] = c.re;
            k0[2 * m + 1] = c.im;
            for (f, &n) in self.layout.free.iter().enumerate() {
                let e = rot * Complex64::cis(2.0 * PI * x[n] * u);
                k[(2 * m, width * f)] = e.re;
                k[(2 * m + 1, width * f)] = e.im;
                if self.layout.complex {
                    k[(2 * m, width * f + 1)] = -e.im;
                    k[(2 * m + 1, width * f + 1)] = e.re;
                }
            }
        }
        let mut p = DVector::zeros(dim);
        for f in 0..self.layout.free.len() {
            p[width * f] = amplitude * rot.re;
            if self.layout.complex {
                p[width * f + 1] = -amplitude * rot.im;
            }
        }
        let q0 = amplitude * (rot * array_factor_raw(x, faulty, 0.0)).re;
        PatternRows { k, k0, p, q0 }
    }

    /// Finds a point strictly inside every pattern cone by minimizing a
    /// shared slack `sigma` in `|v_m| <= q + sigma`, stopping once `sigma < 0`.
    fn phase_one(&mut self, rows: &PatternRows, z0: &DVector<f64>) -> Result<PhaseOne> {
        let dim = z0.len();
        let samples = rows.k0.len() / 2;
        let q = rows.q0 + rows.p.dot(z0);
        let v = &rows.k0 + &rows.k * z0;
        let worst = (0..samples)
            .map(|m| (v[2 * m].powi(2) + v[2 * m + 1].powi(2)).sqrt() - q)
            .fold(f64::NEG_INFINITY, f64::max);
        if worst < 0.0 {
            return Ok(PhaseOne::Feasible(z0.clone()));
        }

        let mut k = DMatrix::zeros(2 * samples, dim + 1);
        k.view_mut((0, 0), (2 * samples, dim)).copy_from(&rows.k);
        let mut p = DVector::zeros(dim + 1);
        p.rows_mut(0, dim).copy_from(&rows.p);
        p[dim] = 1.0;
        let mut cost = DVector::zeros(dim + 1);
        cost[dim] = 1.0;
        let radius = 2.0 * z0.norm() + 10.0 * self.scale;
        let problem = BarrierProblem {
            rows: PatternRows {
                k,
                k0: rows.k0.clone(),
                p,
                q0: rows.q0,
            },
            cones: Vec::new(),
            ball: Some((dim, radius * radius)),
            cost,
        };

        let mut y = DVector::zeros(dim + 1);
        y.rows_mut(0, dim).copy_from(z0);
        y[dim] = 2.0 * worst + 1e-3 * self.scale;
        let nu = problem.nu();
        let stop = |y: &DVector<f64>| y[dim] < 0.0;
        let mut tau = self.config.barrier_initial * nu / y[dim];
        self.budget = self.config.max_iterations;
        loop {
            let status =
                problem.center(tau, &mut y, &mut self.budget, self.config.min_step, &stop)?;
            if y[dim] < 0.0 {
                return Ok(PhaseOne::Feasible(y.rows(0, dim).into_owned()));
            }
            match status {
                Centering::Converged => {}
                Centering::SmallStep | Centering::Budget => return Ok(PhaseOne::Infeasible),
            }
            // Lower bound on the optimal slack from the central-path gap.
            if y[dim] - nu / tau > 0.0 {
                return Ok(PhaseOne::Infeasible);
            }
            if nu / tau < 1e-13 * self.scale {
                return Ok(PhaseOne::Infeasible);
            }
            tau *= self.config.barrier_growth;
        }
    }

    /// Barrier iterations on the l1 epigraph form from a strictly feasible `z0`.
    fn phase_two(&mut self, rows: PatternRows, z0: DVector<f64>) -> Result<DVector<f64>> {
        let dim = z0.len();
        let free = self.layout.free.len();
        let width = self.layout.width();
        let mut k = DMatrix::zeros(rows.k.nrows(), dim + free);
        k.view_mut((0, 0), (rows.k.nrows(), dim)).copy_from(&rows.k);
        let mut p = DVector::zeros(dim + free);
        p.rows_mut(0, dim).copy_from(&rows.p);
        let mut cost = DVector::zeros(dim + free);
        cost.rows_mut(dim, free).fill(1.0);
        let cones = (0..free)
            .map(|f| Cone {
                z: [width * f, width * f + width - 1],
                width,
                t: dim + f,
            })
            .collect();
        let problem = BarrierProblem {
            rows: PatternRows {
                k,
                k0: rows.k0,
                p,
                q0: rows.q0,
            },
            cones,
            ball: None,
            cost,
        };

        let floor = 0.1
            * self
                .context
                .faulty
                .iter()
                .map(|w| w.norm())
                .fold(0.0, f64::max)
                .max(1e-3);
        let mut y = DVector::zeros(dim + free);
        y.rows_mut(0, dim).copy_from(&z0);
        for f in 0..free {
            let mag = (0..width)
                .map(|i| z0[width * f + i].powi(2))
                .sum::<f64>()
                .sqrt();
            y[dim + f] = 1.2 * mag + floor;
        }

        let nu = problem.nu();
        let mut tau = self.config.barrier_initial * nu / y.rows(dim, free).sum();
        self.budget = self.config.max_iterations;
        let never = |_: &DVector<f64>| false;
        loop {
            let status =
                problem.center(tau, &mut y, &mut self.budget, self.config.min_step, &never)?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure("non-finite iterate".into()));
            }
            match status {
                Centering::Converged => {}
                Centering::SmallStep | Centering::Budget => break,
            }
            if nu / tau <= self.config.optimality_tol {
                break;
            }
            tau *= self.config.barrier_growth;
        }
        Ok(y.rows(0, dim).into_owned())
    }
}
