//! Parameter sweeps written as CSV, one row per grid point.
//!
//! | figure | columns |
//! |--------|---------|
//! | `fig2` | `w, c_werner, c_chsh, c_bb84, c_sixstate, c_noisy_eps_2_3, c_noisy_eps_1_3, c_noisy_eps_1_10` |
//! | `fig3` | `u, v, c, status` over the CHSH slice `u + v ≤ 1` |
//! | `fig4` | `theta, c_sic, c_state` |
//! | `fig5` | `q, r_bb84, r_sixstate, r_bb84_tomographic, r_sixstate_tomographic` |
//! | `figB1` | `panel, eps, w, q, r, r_raw` |
//!
//! Every value depends only on the grid, the seed and the optimizer options,
//! so equal inputs give byte-identical files.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write;

use clap::ValueEnum;
use serde::Serialize;

use dimcert::certify::{certify_constrained, certify_generic, CertStatus};
use dimcert::qkd::{certified_keyrate, noisy_bb84_keyrate, reference_rates};
use dimcert::qmat::{concurrence, TwoQubitState};
use dimcert::stats::{generate, Family, FamilySpec};
use dimcert::OptimOptions;

use crate::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Figure {
    #[value(name = "fig2")]
    #[serde(rename = "fig2")]
    Fig2,
    #[value(name = "fig3")]
    #[serde(rename = "fig3")]
    Fig3,
    #[value(name = "fig4")]
    #[serde(rename = "fig4")]
    Fig4,
    #[value(name = "fig5")]
    #[serde(rename = "fig5")]
    Fig5,
    #[value(name = "figB1")]
    #[serde(rename = "figB1")]
    FigB1,
}

/// Detector efficiencies of the noisy-BB84 columns of `fig2`.
pub const FIG2_EFFICIENCIES: [f64; 3] = [2.0 / 3.0, 1.0 / 3.0, 0.1];
/// Largest QBER of the `fig5` grid.
pub const FIG5_MAX_Q: f64 = 0.12;
/// Efficiencies of the left `figB1` panel; the right panel sweeps `ε` at `W = 1`.
pub const FIGB1_EFFICIENCIES: [f64; 3] = [1.0, 0.95, 0.9];
/// Visibility range of the left `figB1` panel and efficiency range of the right one.
pub const FIGB1_W_RANGE: (f64, f64) = (0.8, 1.0);
pub const FIGB1_EPS_RANGE: (f64, f64) = (0.85, 1.0);

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + step * i as f64 })
}

fn status_name(s: CertStatus) -> &'static str {
    match s {
        CertStatus::SeparableModelFound => "SEPARABLE_MODEL_FOUND",
        CertStatus::PositiveBound => "POSITIVE_BOUND",
        CertStatus::InfeasibleWithinTol => "INFEASIBLE_WITHIN_TOL",
    }
}

/// Runs the sweep for `figure` with `points` grid points per axis.
pub fn cmd_sweep(figure: Figure, points: usize, opts: &OptimOptions) -> CliResult<String> {
    let mut csv = String::new();
    let mut row = |fields: &[String]| {
        let _ = writeln!(csv, "{}", fields.join(","));
    };
    match figure {
        Figure::Fig2 => {
            row(&[
                "w",
                "c_werner",
                "c_chsh",
                "c_bb84",
                "c_sixstate",
                "c_noisy_eps_2_3",
                "c_noisy_eps_1_3",
                "c_noisy_eps_1_10",
            ]
            .map(String::from));
            for w in linspace(0.0, 1.0, points) {
                let mut fields = vec![w, concurrence(&TwoQubitState::werner(w).density())?];
                fields.push(certify_generic(&generate(&FamilySpec::chsh(w))?, opts)?.bound);
                fields.push(certify_constrained(Family::Bb84, w, opts)?.bound);
                fields.push(certify_constrained(Family::SixState, w, opts)?.bound);
                for eps in FIG2_EFFICIENCIES {
                    fields.push(
                        certify_generic(&generate(&FamilySpec::noisy_bb84(w, eps, eps))?, opts)?
                            .bound,
                    );
                }
                row(&fields.iter().map(f64::to_string).collect::<Vec<_>>());
            }
        }
        Figure::Fig3 => {
            row(&["u", "v", "c", "status"].map(String::from));
            let n = points - 1;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                    let res = certify_generic(&generate(&FamilySpec::chsh_slice(u, v))?, opts)?;
                    row(&[
                        u.to_string(),
                        v.to_string(),
                        res.bound.to_string(),
                        status_name(res.status).into(),
                    ]);
                }
            }
        }
        Figure::Fig4 => {
            row(&["theta", "c_sic", "c_state"].map(String::from));
            for theta in linspace(0.0, FRAC_PI_4, points) {
                let c = certify_generic(&generate(&FamilySpec::sic(theta))?, opts)?.bound;
                row(&[theta, c, (2.0 * theta).sin()].map(|v| v.to_string()));
            }
        }
        Figure::Fig5 => {
            row(&[
                "q",
                "r_bb84",
                "r_sixstate",
                "r_bb84_tomographic",
                "r_sixstate_tomographic",
            ]
            .map(String::from));
            for q in linspace(0.0, FIG5_MAX_Q, points) {
                let w = 1.0 - 2.0 * q;
                let bb84 = certified_keyrate(Family::Bb84, w, opts)?.r;
                let six = certified_keyrate(Family::SixState, w, opts)?.r;
                let refs = reference_rates(q)?;
                row(&[q, bb84, six, refs.r_bb84, refs.r_sixstate].map(|v| v.to_string()));
            }
        }
        Figure::FigB1 => {
            row(&["panel", "eps", "w", "q", "r", "r_raw"].map(String::from));
            let mut emit = |panel: &str, eps: f64, w: f64| -> CliResult<()> {
                let res = noisy_bb84_keyrate(w, eps, opts)?;
                row(&[
                    panel.to_string(),
                    eps.to_string(),
                    w.to_string(),
                    res.q.to_string(),
                    res.r.to_string(),
                    res.r_raw.to_string(),
                ]);
                Ok(())
            };
            for eps in FIGB1_EFFICIENCIES {
                for w in linspace(FIGB1_W_RANGE.0, FIGB1_W_RANGE.1, points) {
                    emit("left", eps, w)?;
                }
            }
            for eps in linspace(FIGB1_EPS_RANGE.0, FIGB1_EPS_RANGE.1, points) {
                emit("right", eps, 1.0)?;
            }
        }
    }
    Ok(csv)
}
