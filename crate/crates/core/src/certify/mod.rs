//! Minimum concurrence compatible with observed statistics.
//!
//! Any model found by the search reproduces the table, so its concurrence is
//! an upper bound on the true minimum `c(p)`. The bound is therefore reported
//! together with the residual and a status, and small values are only called
//! separable once a concrete separable model has been exhibited.

mod constrained;
pub(crate) mod generic;

pub use constrained::{
    certify_constrained, selftest_w1, t_matrix_bb84, t_matrix_sixstate, Bb84FreeEntries, SelfTest,
    SixStateMeasParams, ANGLE_GUARD, T_SLACK,
};
pub(crate) use constrained::{Reduced, Search};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{run_starts, start_rng, OptimOptions, StartLog};
use crate::qmat::{
    born_statistics, concurrence_unchecked, min_eigenvalue, qubit_bloch_parts, Mat2, Povm,
    TwoQubitState, C64,
};
use crate::stats::ProbTable;

/// Bounds at or below this are reported as zero.
pub const C_TOL: f64 = 1e-4;

/// Residual accepted for the analytically constrained paths.
pub const CONSTRAINED_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertStatus {
    SeparableModelFound,
    PositiveBound,
    InfeasibleWithinTol,
}

/// A state together with one POVM per setting and party.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub state: TwoQubitState,
    pub povms_a: Vec<Povm>,
    pub povms_b: Vec<Povm>,
}

impl Model {
    pub fn statistics(&self) -> Result<ProbTable> {
        born_statistics(&self.state.density(), &self.povms_a, &self.povms_b)
    }

    /// Largest entrywise deviation of the model statistics from `p`.
    pub fn residual(&self, p: &ProbTable) -> Result<f64> {
        let q = self.statistics()?;
        if !q.same_shape(p) {
            return Err(Error::Domain("model and table shapes differ".into()));
        }
        Ok(q.max_abs_diff(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertResult {
    pub bound: f64,
    pub model: Model,
    pub residual: f64,
    pub n_starts: usize,
    pub seed: u64,
    pub status: CertStatus,
    pub best_start: usize,
    pub starts: Vec<StartLog>,
}

/// Mixes `ρ` with `1/4` just enough to remove a small negative eigenvalue.
pub(crate) fn repair_state(state: &TwoQubitState) -> TwoQubitState {
    let lmin = min_eigenvalue(&state.density());
    if lmin >= 0.0 {
        return state.clone();
    }
    let t = -lmin / (0.25 - lmin);
    TwoQubitState::new(
        state.m_a * (1.0 - t),
        state.m_b * (1.0 - t),
        state.t * (1.0 - t),
    )
}

/// Mixes a POVM with the uniform one just enough to make every element positive.
pub(crate) fn repair_povm(p: &Povm) -> Result<Povm> {
    let k = p.len() as f64;
    let worst = p
        .elements()
        .iter()
        .map(|e| {
            let (g, v) = qubit_bloch_parts(e);
            g - v.norm()
        })
        .fold(f64::INFINITY, f64::min);
    if worst >= 0.0 {
        return Povm::new(p.elements().to_vec());
    }
    let t = -worst / (1.0 / k - worst);
    let uniform = Mat2::identity() * C64::new(t / k, 0.0);
    Povm::new(
        p.elements()
            .iter()
            .map(|e| e * C64::new(1.0 - t, 0.0) + uniform)
            .collect(),
    )
}

/// Repairs tiny positivity violations of a candidate and scores it against `p`.
/// Returns the concurrence, the residual and the repaired model.
fn finalize(
    state: &TwoQubitState,
    povms_a: &[Povm],
    povms_b: &[Povm],
    p: &ProbTable,
) -> Option<(f64, f64, Model)> {
    let model = Model {
        state: repair_state(state),
        povms_a: povms_a
            .iter()
            .map(repair_povm)
            .collect::<Result<_>>()
            .ok()?,
        povms_b: povms_b
            .iter()
            .map(repair_povm)
            .collect::<Result<_>>()
            .ok()?,
    };
    let residual = model.residual(p).ok()?;
    let c = concurrence_unchecked(&model.state.density());
    Some((c, residual, model))
}

struct Candidate {
    bound: f64,
    residual: f64,
    model: Model,
    log: StartLog,
}

/// Picks the lowest bound among feasible candidates (lowest index on ties),
/// or the smallest residual if none is feasible.
fn assemble(cands: Vec<Option<Candidate>>, tol: f64, opts: &OptimOptions) -> Result<CertResult> {
    let starts: Vec<StartLog> = cands
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            Some(c) => c.log.clone(),
            None => StartLog {
                index: i,
                seed: crate::optim::start_seed(opts.seed, i),
                f: f64::INFINITY,
                evals: 0,
                converged: false,
            },
        })
        .collect();
    let key = |c: &Candidate| {
        if c.residual <= tol {
            (0, c.bound)
        } else {
            (1, c.residual)
        }
    };
    let (best_start, best) = cands
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .fold(None::<(usize, Candidate)>, |acc, (i, c)| match acc {
            Some((j, b)) => {
                let (kb, kc) = (key(&b), key(&c));
                if kc.0 < kb.0 || (kc.0 == kb.0 && kc.1 < kb.1) {
                    Some((i, c))
                } else {
                    Some((j, b))
                }
            }
            None => Some((i, c)),
        })
        .ok_or_else(|| Error::Infeasible("no start produced a candidate model".into()))?;
    let feasible = best.residual <= tol;
    let (bound, status) = if !feasible {
        (best.bound, CertStatus::InfeasibleWithinTol)
    } else if best.bound <= C_TOL {
        (0.0, CertStatus::SeparableModelFound)
    } else {
        (best.bound, CertStatus::PositiveBound)
    };
    Ok(CertResult {
        bound,
        model: best.model,
        residual: best.residual,
        n_starts: opts.n_starts,
        seed: opts.seed,
        status,
        best_start,
        starts,
    })
}

/// Outcome counts above this are accepted but unusual for qubits.
pub const TYPICAL_MAX_OUTCOMES: usize = 4;

/// Minimum concurrence over all qubit states and POVMs reproducing `p`.
pub fn certify_generic(p: &ProbTable, opts: &OptimOptions) -> Result<CertResult> {
    opts.validate()?;
    let report = crate::stats::validate(p);
    if !report.normalized || !report.nonneg {
        return Err(Error::Domain(
            "table must be non-negative and normalized".into(),
        ));
    }
    if p.ka() < 2 || p.kb() < 2 {
        return Err(Error::Domain(
            "each setting needs at least two outcomes".into(),
        ));
    }
    let layout = generic::Layout::new(p);
    let cands = run_starts(opts, |i| {
        let mut rng = start_rng(opts.seed, i);
        let out = generic::run_start(
            &layout,
            &|q: &[f64]| layout.concurrence_objective(q),
            &mut rng,
            opts,
        )?;
        let state = layout.state(&out.q);
        let (pa, pb) = layout.povms(&out.q);
        let (bound, residual, model) = finalize(&state, &pa, &pb, p)?;
        Some(Candidate {
            bound,
            residual,
            model,
            log: StartLog {
                index: i,
                seed: crate::optim::start_seed(opts.seed, i),
                f: out.value,
                evals: out.evals,
                converged: out.converged,
            },
        })
    });
    assemble(cands, opts.residual_tol, opts)
}
