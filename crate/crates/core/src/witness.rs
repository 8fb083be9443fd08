//! Closed-form entanglement criteria for dichotomic statistics with unbiased
//! marginals: a singular-value test on the 2×2 correlator matrix and a
//! determinant test on the 3×3 one.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{marginal_bias, ProbTable};

/// Marginals farther than this from uniform put a table outside the criteria's scope.
pub const UNBIASED_TOL: f64 = 1e-9;

/// Margins at or below this are treated as zero, so that boundary points
/// evaluated in floating point are not reported as certified.
pub const MARGIN_GUARD: f64 = 1e-14;

/// Correlators `D[x][y] = ⟨A_x B_y⟩` of a dichotomic table.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    pub fn from_table(p: &ProbTable) -> Result<Self> {
        if !p.is_dichotomic() {
            return Err(Error::Scope(
                "correlators need two outcomes per party".into(),
            ));
        }
        Ok(Self(DMatrix::from_fn(p.nx(), p.ny(), |x, y| {
            p.correlator(x, y)
        })))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.0.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub certified: bool,
    pub margin: f64,
}

impl WitnessResult {
    fn from_margin(margin: f64) -> Self {
        Self {
            certified: margin > MARGIN_GUARD,
            margin,
        }
    }
}

fn scoped_correlators(p: &ProbTable, n: usize) -> Result<CorrelationMatrix> {
    if p.nx() != n || p.ny() != n {
        return Err(Error::Scope(format!(
            "criterion needs {n} settings per party"
        )));
    }
    let d = CorrelationMatrix::from_table(p)?;
    let bias = marginal_bias(p);
    if bias > UNBIASED_TOL {
        return Err(Error::Scope(format!(
            "criterion requires unbiased marginals (deviation {bias:e})"
        )));
    }
    Ok(d)
}

/// Two settings per party: margin `√λ₁ + √λ₂ − √2` over the singular values of `D₂`.
pub fn d2_criterion(p: &ProbTable) -> Result<WitnessResult> {
    let d = scoped_correlators(p, 2)?;
    let margin = d.singular_values().iter().map(|s| s.sqrt()).sum::<f64>() - 2f64.sqrt();
    Ok(WitnessResult::from_margin(margin))
}

/// Three settings per party: margin `|det D₃| − 1/27`.
pub fn d3_criterion(p: &ProbTable) -> Result<WitnessResult> {
    let d = scoped_correlators(p, 3)?;
    Ok(WitnessResult::from_margin(
        d.determinant().abs() - 1.0 / 27.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{generate, FamilySpec};

    #[test]
    fn bb84_margins() {
        let r = d2_criterion(&generate(&FamilySpec::bb84(0.6)).unwrap()).unwrap();
        assert!(r.certified);
        assert!((r.margin - (2.0 * 0.6f64.sqrt() - 2f64.sqrt())).abs() < 1e-12);
        let r = d2_criterion(&generate(&FamilySpec::bb84(0.5)).unwrap()).unwrap();
        assert!(!r.certified);
        assert!(r.margin.abs() < 1e-12);
    }

    #[test]
    fn chsh_half_is_boundary() {
        let r = d2_criterion(&generate(&FamilySpec::chsh(0.5)).unwrap()).unwrap();
        assert!(!r.certified);
        assert!(r.margin.abs() < 1e-12);
    }

    #[test]
    fn sixstate_determinant() {
        let r = d3_criterion(&generate(&FamilySpec::six_state(1.0)).unwrap()).unwrap();
        assert!(r.certified);
        assert!((r.margin - (1.0 - 1.0 / 27.0)).abs() < 1e-12);
        let r = d3_criterion(&generate(&FamilySpec::six_state(1.0 / 3.0)).unwrap()).unwrap();
        assert!(!r.certified);
        assert!(r.margin.abs() < 1e-12);
        let r = d3_criterion(&generate(&FamilySpec::six_state(0.5)).unwrap()).unwrap();
        assert!(r.certified);
        assert!((r.margin + 1.0 / 27.0 - 0.125).abs() < 1e-12);
    }

    #[test]
    fn scope_errors() {
        let biased = crate::stats::deterministic_point();
        assert!(matches!(d2_criterion(&biased), Err(Error::Scope(_))));
        let six = generate(&FamilySpec::six_state(0.5)).unwrap();
        assert!(matches!(d2_criterion(&six), Err(Error::Scope(_))));
        let noisy = generate(&FamilySpec::noisy_bb84(1.0, 0.5, 0.5)).unwrap();
        assert!(matches!(d2_criterion(&noisy), Err(Error::Scope(_))));
    }
}
