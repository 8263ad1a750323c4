//! Greedy backtracking search for a correction with few nonzero entries.
//!
//! Starting from the minimum-l1 correction, the least important remaining
//! correction is removed and the rest re-optimized. A removal that makes the
//! target unreachable is undone and the element is marked as required.

use std::time::Instant;

use crate::array::{ArrayGeometry, Excitations, FailureScenario, MetricSpec};
use crate::error::{Error, Result};
use crate::solver::{l0_norm, l1_norm, solve_constrained_l1, SolveContext, SolverConfig, ZeroMask};
use crate::taper::apply_failures;

/// Picks the correction to try removing next.
pub trait ImportanceRule: Sync {
    /// Index of the removal candidate, or `None` when nothing is left to try.
    /// Only entries with `|dw_n| > zero_threshold` and `required[n] == false`
    /// are eligible.
    fn least_important(
        &self,
        delta: &Excitations,
        required: &[bool],
        zero_threshold: f64,
    ) -> Option<usize>;
}

/// Smallest nonzero magnitude first, lowest index on ties.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmallestMagnitude;

impl ImportanceRule for SmallestMagnitude {
    fn least_important(
        &self,
        delta: &Excitations,
        required: &[bool],
        zero_threshold: f64,
    ) -> Option<usize> {
        least_important(delta, required, zero_threshold)
    }
}

/// Smallest-magnitude eligible correction; ties go to the lowest index.
pub fn least_important(
    delta: &Excitations,
    required: &[bool],
    zero_threshold: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (n, d) in delta.iter().enumerate() {
        let mag = d.norm();
        if mag <= zero_threshold || required.get(n).copied().unwrap_or(false) {
            continue;
        }
        if best.is_none_or(|(_, b)| mag < b) {
            best = Some((n, mag));
        }
    }
    best.map(|(n, _)| n)
}

/// Copy of `delta` with entry `n_least` set to zero.
pub fn make_trial(delta: &Excitations, n_least: usize) -> Excitations {
    let mut trial = delta.clone();
    trial.as_mut_slice()[n_least] = num_complex::Complex64::new(0.0, 0.0);
    trial
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Accepted,
    Backtracked,
    Converged,
}

/// One row of the correction trace. `l0`, `l1` and `phi_db` describe the
/// current best and are present only on accepted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub k: usize,
    pub step: u8,
    pub n_least: Option<usize>,
    pub event: TraceEvent,
    pub l0: Option<usize>,
    pub l1: Option<f64>,
    pub phi_db: Option<f64>,
}

/// Loop state: current best, required (`r`) and non-required (`s`) flags.
#[derive(Debug, Clone)]
pub struct CorrectionState {
    pub k: usize,
    pub delta_opt: Excitations,
    pub required: Vec<bool>,
    pub non_required: Vec<bool>,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub delta_opt: Excitations,
    /// Faulty weights plus the correction.
    pub corrected: Excitations,
    pub n_corrections: usize,
    pub l1: f64,
    pub achieved_phi_db: f64,
    /// Iteration at which the loop stopped.
    pub k_opt: usize,
    pub required: Vec<bool>,
    pub non_required: Vec<bool>,
    pub trace: Vec<TraceEntry>,
    pub elapsed: f64,
}

/// Runs the correction loop with the smallest-magnitude rule.
pub fn cp_correct(
    geometry: &ArrayGeometry,
    original: &Excitations,
    scenario: &FailureScenario,
    metric: &MetricSpec,
    config: &SolverConfig,
) -> Result<CorrectionResult> {
    cp_correct_with(
        geometry,
        original,
        scenario,
        metric,
        config,
        &SmallestMagnitude,
    )
}

/// Hard iteration cap; the loop provably ends well before it.
fn iteration_cap(n_reconfigurable: usize) -> usize {
    n_reconfigurable * (n_reconfigurable + 2) + 1
}

pub fn cp_correct_with(
    geometry: &ArrayGeometry,
    original: &Excitations,
    scenario: &FailureScenario,
    metric: &MetricSpec,
    config: &SolverConfig,
    rule: &dyn ImportanceRule,
) -> Result<CorrectionResult> {
    let started = Instant::now();
    config.validate()?;
    let n = geometry.element_count();
    if original.len() != n || scenario.len() != n {
        return Err(Error::InvalidArgument(
            "geometry, weights and failure mask must have equal length".into(),
        ));
    }
    let faulty = apply_failures(original, scenario)?;
    let context = SolveContext {
        geometry,
        faulty: &faulty,
    };
    let eps0 = config.zero_threshold;
    let limit = metric.target_db + config.constraint_tol_db;
    let phi_of = |delta: &Excitations| -> Result<f64> {
        let w = crate::taper::corrected_weights(&faulty, delta, scenario)?;
        metric.evaluate(geometry, &w)
    };

    // Step 0.
    let base_mask = ZeroMask::from_failures(scenario)?;
    let delta0 = solve_constrained_l1(metric, &base_mask, &Excitations::zeros(n), config, context)?;
    let mut state = CorrectionState {
        k: 0,
        delta_opt: delta0,
        required: vec![false; n],
        non_required: vec![false; n],
        trace: Vec::new(),
    };
    let mut best_phi = phi_of(&state.delta_opt)?;
    state
        .trace
        .push(accepted(0, 0, None, &state.delta_opt, best_phi, eps0));

    let cap = iteration_cap(scenario.n_reconfigurable());
    loop {
        state.k += 1;
        if state.k > cap {
            return Err(Error::NumericalFailure(format!(
                "correction loop exceeded {cap} iterations"
            )));
        }
        let k = state.k;

        // Step 1.
        let Some(n_least) = rule.least_important(&state.delta_opt, &state.required, eps0) else {
            state.trace.push(TraceEntry {
                k,
                step: 1,
                n_least: None,
                event: TraceEvent::Converged,
                l0: None,
                l1: None,
                phi_db: None,
            });
            break;
        };
        if scenario.is_faulty(n_least) {
            return Err(Error::ConstraintViolation(format!(
                "importance rule picked failed element {}",
                n_least + 1
            )));
        }
        state.non_required[n_least] = true;
        let trial = make_trial(&state.delta_opt, n_least);

        // Step 2.
        let trial_phi = phi_of(&trial)?;
        let outcome = if trial_phi <= limit {
            Ok((trial, trial_phi))
        } else {
            match ZeroMask::with_extra(scenario, &state.non_required) {
                Ok(mask) => solve_constrained_l1(metric, &mask, &trial, config, context)
                    .and_then(|d| phi_of(&d).map(|p| (d, p))),
                Err(_) => Err(Error::Infeasible(
                    "no correction left to re-optimize".into(),
                )),
            }
        };

        match outcome {
            Ok((delta, phi)) => {
                state.delta_opt = delta;
                best_phi = phi;
                state.required.iter_mut().for_each(|r| *r = false);
                state
                    .trace
                    .push(accepted(k, 2, Some(n_least), &state.delta_opt, phi, eps0));
            }
            // Step 3.
            Err(Error::Infeasible(_)) => {
                state.non_required[n_least] = false;
                state.required[n_least] = true;
                state.trace.push(TraceEntry {
                    k,
                    step: 3,
                    n_least: Some(n_least),
                    event: TraceEvent::Backtracked,
                    l0: None,
                    l1: None,
                    phi_db: None,
                });
            }
            Err(e) => return Err(e),
        }
    }

    let corrected = crate::taper::corrected_weights(&faulty, &state.delta_opt, scenario)?;
    Ok(CorrectionResult {
        n_corrections: l0_norm(&state.delta_opt, eps0),
        l1: l1_norm(&state.delta_opt),
        achieved_phi_db: best_phi,
        k_opt: state.k,
        corrected,
        delta_opt: state.delta_opt,
        required: state.required,
        non_required: state.non_required,
        trace: state.trace,
        elapsed: started.elapsed().as_secs_f64(),
    })
}

fn accepted(
    k: usize,
    step: u8,
    n_least: Option<usize>,
    delta: &Excitations,
    phi: f64,
    eps0: f64,
) -> TraceEntry {
    TraceEntry {
        k,
        step,
        n_least,
        event: TraceEvent::Accepted,
        l0: Some(l0_norm(delta, eps0)),
        l1: Some(l1_norm(delta)),
        phi_db: Some(phi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{sidelobe_region, uniform_positions, AngularRegion, REGION_GRID_POINTS};
    use crate::taper::dolph_chebyshev;
    use approx::assert_abs_diff_eq;

    fn real(v: &[f64]) -> Excitations {
        Excitations::from_real(v).unwrap()
    }

    #[test]
    fn least_important_examples() {
        let d = real(&[-0.438, 0.0, 0.593, -9.72e-6]);
        assert_eq!(least_important(&d, &[false; 4], 1e-12), Some(3));
        let d = real(&[0.0, 0.0, 1.09, 0.0]);
        assert_eq!(
            least_important(&d, &[false, false, true, false], 1e-12),
            None
        );
        let d = real(&[0.5, 0.9, -0.5, 0.7]);
        assert_eq!(least_important(&d, &[false; 4], 1e-12), Some(0));
        assert_eq!(
            least_important(&Excitations::zeros(3), &[false; 3], 1e-12),
            None
        );
    }

    #[test]
    fn make_trial_examples() {
        let d = real(&[-0.438, 0.0, 0.593, -9.72e-6]);
        assert_eq!(make_trial(&d, 3), real(&[-0.438, 0.0, 0.593, 0.0]));
        assert_eq!(make_trial(&d, 1), d);
        assert_eq!(
            make_trial(&real(&[0.0, 0.0, 0.593, 0.0]), 2),
            Excitations::zeros(4)
        );
    }

    fn toy(target: f64) -> (ArrayGeometry, Excitations, FailureScenario, MetricSpec) {
        (
            uniform_positions(4, 0.5).unwrap(),
            real(&[1.0, 0.419, 0.419, 1.0]),
            FailureScenario::from_faulty_indices(4, &[2]).unwrap(),
            MetricSpec::max_sll(
                AngularRegion::new(vec![-0.7, -0.5, 0.5, 0.7]).unwrap(),
                target,
            )
            .unwrap(),
        )
    }

    #[test]
    fn toy_trace() {
        let (g, w, s, m) = toy(-5.5);
        let r = cp_correct(&g, &w, &s, &m, &SolverConfig::default()).unwrap();
        assert_eq!(r.n_corrections, 1);
        assert_abs_diff_eq!(r.delta_opt[2].norm(), 1.09, epsilon = 0.03);
        assert_abs_diff_eq!(r.achieved_phi_db, -5.5, epsilon = 0.05);
        assert_eq!(r.required, vec![false, false, true, false]);
        assert_eq!(r.non_required, vec![true, false, false, true]);
        assert_eq!(r.k_opt, 4);
        let first = &r.trace[0];
        assert_eq!(first.l0, Some(3));
        assert_abs_diff_eq!(first.l1.unwrap(), 1.03, epsilon = 0.03);
        let picks: Vec<_> = r.trace.iter().map(|t| t.n_least).collect();
        assert_eq!(picks, vec![None, Some(3), Some(0), Some(2), None]);
        let events: Vec<_> = r.trace.iter().map(|t| t.event).collect();
        assert_eq!(
            events,
            vec![
                TraceEvent::Accepted,
                TraceEvent::Accepted,
                TraceEvent::Accepted,
                TraceEvent::Backtracked,
                TraceEvent::Converged
            ]
        );
    }

    #[test]
    fn toy_unreachable_target_fails_at_step_zero() {
        let (g, w, s, m) = toy(-100.0);
        assert!(matches!(
            cp_correct(&g, &w, &s, &m, &SolverConfig::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn no_failures_needs_no_correction() {
        let g = uniform_positions(16, 0.5).unwrap();
        let w = dolph_chebyshev(16, -15.0).unwrap();
        let region = sidelobe_region(14.6, REGION_GRID_POINTS).unwrap();
        let m = MetricSpec::max_sll(region, -14.9).unwrap();
        let r = cp_correct(
            &g,
            &w,
            &FailureScenario::healthy(16),
            &m,
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(r.n_corrections, 0);
        assert_eq!(r.l1, 0.0);
    }

    #[test]
    fn accepted_rows_are_feasible_and_sparser() {
        let (g, w, s, m) = toy(-5.5);
        let r = cp_correct(&g, &w, &s, &m, &SolverConfig::default()).unwrap();
        let mut last = usize::MAX;
        for t in r.trace.iter().filter(|t| t.event == TraceEvent::Accepted) {
            assert!(t.phi_db.unwrap() <= -5.5 + 0.02);
            assert!(t.l0.unwrap() <= last);
            last = t.l0.unwrap();
        }
    }
}
