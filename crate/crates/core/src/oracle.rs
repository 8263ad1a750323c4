//! Exact minimum number of corrections by enumerating supports.

use std::time::Instant;

use itertools::Itertools;
use rayon::prelude::*;

use crate::array::{ArrayGeometry, Excitations, FailureScenario, MetricSpec};
use crate::cp::CorrectionResult;
use crate::error::{Error, Result};
use crate::solver::{l0_norm, l1_norm, solve_constrained_l1, SolveContext, SolverConfig, ZeroMask};
use crate::taper::{apply_failures, corrected_weights};

/// Default cap on the number of inner solves of one search.
pub const DEFAULT_SOLVE_BUDGET: u64 = 2_000_000;

/// Subsets handed to the thread pool at once.
const CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub enum OracleOutcome {
    /// Smallest feasible support (0-based indices, ascending) and its correction.
    Minimum {
        support: Vec<usize>,
        result: CorrectionResult,
    },
    /// No support of size up to `max_support` meets the target.
    InfeasibleUpTo { max_support: usize },
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub outcome: OracleOutcome,
    /// Inner solves performed.
    pub solves: u64,
    pub elapsed: f64,
}

/// Searches supports of size 0, 1, ..., `max_support` in lexicographic order
/// and returns the first feasible one.
pub fn exhaustive_min(
    geometry: &ArrayGeometry,
    original: &Excitations,
    scenario: &FailureScenario,
    metric: &MetricSpec,
    config: &SolverConfig,
    max_support: usize,
) -> Result<OracleResult> {
    exhaustive_min_with_budget(
        geometry,
        original,
        scenario,
        metric,
        config,
        max_support,
        DEFAULT_SOLVE_BUDGET,
    )
}

pub fn exhaustive_min_with_budget(
    geometry: &ArrayGeometry,
    original: &Excitations,
    scenario: &FailureScenario,
    metric: &MetricSpec,
    config: &SolverConfig,
    max_support: usize,
    budget: u64,
) -> Result<OracleResult> {
    let started = Instant::now();
    config.validate()?;
    let n = geometry.element_count();
    if original.len() != n || scenario.len() != n {
        return Err(Error::InvalidArgument(
            "geometry, weights and failure mask must have equal length".into(),
        ));
    }
    let candidates: Vec<usize> = (0..n).filter(|&k| !scenario.is_faulty(k)).collect();
    if max_support > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "max_support {max_support} exceeds the {} reconfigurable elements",
            candidates.len()
        )));
    }
    let faulty = apply_failures(original, scenario)?;
    let context = SolveContext {
        geometry,
        faulty: &faulty,
    };
    let limit = metric.target_db + config.constraint_tol_db;

    let finish = |support: Vec<usize>, delta: Excitations, solves: u64| -> Result<OracleResult> {
        let corrected = corrected_weights(&faulty, &delta, scenario)?;
        let phi = metric.evaluate(geometry, &corrected)?;
        Ok(OracleResult {
            outcome: OracleOutcome::Minimum {
                support,
                result: CorrectionResult {
                    n_corrections: l0_norm(&delta, config.zero_threshold),
                    l1: l1_norm(&delta),
                    achieved_phi_db: phi,
                    k_opt: 0,
                    corrected,
                    delta_opt: delta,
                    required: vec![false; n],
                    non_required: vec![false; n],
                    trace: Vec::new(),
                    elapsed: started.elapsed().as_secs_f64(),
                },
            },
            solves,
            elapsed: started.elapsed().as_secs_f64(),
        })
    };

    if metric.evaluate(geometry, &faulty)? <= limit {
        return finish(Vec::new(), Excitations::zeros(n), 0);
    }

    let solve_support = |support: &[usize]| -> Result<Option<Excitations>> {
        let mut forbidden = vec![true; n];
        for &k in support {
            forbidden[k] = false;
        }
        let mask = ZeroMask::new(forbidden)?;
        match solve_constrained_l1(metric, &mask, &Excitations::zeros(n), config, context) {
            Ok(d) => Ok(Some(d)),
            Err(Error::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut solves: u64 = 0;
    for m in 1..=max_support {
        let level = binomial(candidates.len() as u64, m as u64);
        if solves.saturating_add(level) > budget {
            return Err(Error::BudgetExceeded { limit: budget });
        }
        let subsets = candidates.iter().copied().combinations(m);
        for chunk in &subsets.chunks(CHUNK) {
            let chunk: Vec<Vec<usize>> = chunk.collect();
            let results: Vec<Result<Option<Excitations>>> =
                chunk.par_iter().map(|s| solve_support(s)).collect();
            for (support, r) in chunk.iter().zip(results) {
                solves += 1;
                if let Some(delta) = r? {
                    return finish(support.clone(), delta, solves);
                }
            }
        }
    }
    Ok(OracleResult {
        outcome: OracleOutcome::InfeasibleUpTo { max_support },
        solves,
        elapsed: started.elapsed().as_secs_f64(),
    })
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}
