//! JSON shapes shared by the subcommands.

use serde_json::{json, Value};

use dimcert::certify::{Model, CONSTRAINED_RESIDUAL_TOL, C_TOL};
use dimcert::qmat::{qubit_bloch_parts, Povm, POVM_TOL, STATE_TOL};
use dimcert::OptimOptions;

/// `{version, seed, n_starts, tolerances}`; optimizer fields are null for
/// commands that do not optimize.
pub fn metadata(opts: Option<&OptimOptions>) -> Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "rng": "ChaCha8",
        "seed": opts.map(|o| o.seed),
        "n_starts": opts.map(|o| o.n_starts),
        "tolerances": {
            "c_tol": C_TOL,
            "state_tol": STATE_TOL,
            "povm_tol": POVM_TOL,
            "constrained_residual_tol": CONSTRAINED_RESIDUAL_TOL,
            "residual_tol": opts.map(|o| o.residual_tol),
            "xtol": opts.map(|o| o.xtol),
            "ftol": opts.map(|o| o.ftol),
            "max_evals": opts.map(|o| o.max_evals),
        },
    })
}

/// Each element `γ1 + v·σ` as `{"gamma": γ, "bloch": v}`.
fn povm_json(p: &Povm) -> Value {
    p.elements()
        .iter()
        .map(|e| {
            let (g, v) = qubit_bloch_parts(e);
            json!({ "gamma": g, "bloch": [v.x, v.y, v.z] })
        })
        .collect()
}

/// `{m_A, m_B, T, povms: {a, b}}` with `T` row-major.
pub fn model_json(model: &Model) -> Value {
    let s = &model.state;
    let t: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| s.t[(i, j)]).collect())
        .collect();
    json!({
        "m_A": [s.m_a.x, s.m_a.y, s.m_a.z],
        "m_B": [s.m_b.x, s.m_b.y, s.m_b.z],
        "T": t,
        "povms": {
            "a": model.povms_a.iter().map(povm_json).collect::<Vec<_>>(),
            "b": model.povms_b.iter().map(povm_json).collect::<Vec<_>>(),
        },
    })
}
