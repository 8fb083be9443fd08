//! Bipartite probability tables `p(a,b|x,y)` and the standard families used as
//! certification targets.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{self, Povm, TwoQubitState, C64};

/// Normalization tolerance per setting pair.
pub const NORM_TOL: f64 = 1e-12;

/// Conditional distribution `p(a,b|x,y)` stored row-major in `[x][y][a][b]` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbTableJson", into = "ProbTableJson")]
pub struct ProbTable {
    nx: usize,
    ny: usize,
    ka: usize,
    kb: usize,
    labels_a: Vec<i32>,
    labels_b: Vec<i32>,
    p: Vec<f64>,
}

/// Wire format: `{"nx","ny","ka","kb","labels_a","labels_b","p":[[[[..]]]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProbTableJson {
    nx: usize,
    ny: usize,
    ka: usize,
    kb: usize,
    labels_a: Vec<i32>,
    labels_b: Vec<i32>,
    p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TryFrom<ProbTableJson> for ProbTable {
    type Error = Error;

    fn try_from(j: ProbTableJson) -> Result<Self> {
        if j.nx == 0 || j.ny == 0 || j.ka == 0 || j.kb == 0 {
            return Err(Error::Domain("table dimensions must be positive".into()));
        }
        if j.labels_a.len() != j.ka || j.labels_b.len() != j.kb {
            return Err(Error::Domain(
                "label lists must match outcome counts".into(),
            ));
        }
        let shape_ok = j.p.len() == j.nx
            && j.p.iter().all(|px| {
                px.len() == j.ny
                    && px
                        .iter()
                        .all(|pxy| pxy.len() == j.ka && pxy.iter().all(|pa| pa.len() == j.kb))
            });
        if !shape_ok {
            return Err(Error::Domain(format!(
                "probability array does not have shape [{}][{}][{}][{}]",
                j.nx, j.ny, j.ka, j.kb
            )));
        }
        let p: Vec<f64> = j.p.into_iter().flatten().flatten().flatten().collect();
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("probabilities must be finite".into()));
        }
        Ok(Self {
            nx: j.nx,
            ny: j.ny,
            ka: j.ka,
            kb: j.kb,
            labels_a: j.labels_a,
            labels_b: j.labels_b,
            p,
        })
    }
}

impl From<ProbTable> for ProbTableJson {
    fn from(t: ProbTable) -> Self {
        let p = (0..t.nx)
            .map(|x| {
                (0..t.ny)
                    .map(|y| {
                        (0..t.ka)
                            .map(|a| (0..t.kb).map(|b| t.get(x, y, a, b)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            nx: t.nx,
            ny: t.ny,
            ka: t.ka,
            kb: t.kb,
            labels_a: t.labels_a,
            labels_b: t.labels_b,
            p,
        }
    }
}

/// Default labels: `[+1, −1]` for two outcomes, `[+1, −1, 0]` for three
/// (no-click last), `0..k` otherwise.
pub fn default_labels(k: usize) -> Vec<i32> {
    match k {
        2 => vec![1, -1],
        3 => vec![1, -1, 0],
        _ => (0..k as i32).collect(),
    }
}

impl ProbTable {
    pub fn zeros(nx: usize, ny: usize, ka: usize, kb: usize) -> Self {
        Self {
            nx,
            ny,
            ka,
            kb,
            labels_a: default_labels(ka),
            labels_b: default_labels(kb),
            p: vec![0.0; nx * ny * ka * kb],
        }
    }

    pub fn from_fn(
        nx: usize,
        ny: usize,
        ka: usize,
        kb: usize,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(nx, ny, ka, kb);
        for x in 0..nx {
            for y in 0..ny {
                for a in 0..ka {
                    for b in 0..kb {
                        t.set(x, y, a, b, f(x, y, a, b));
                    }
                }
            }
        }
        t
    }

    pub fn with_labels(mut self, labels_a: Vec<i32>, labels_b: Vec<i32>) -> Result<Self> {
        if labels_a.len() != self.ka || labels_b.len() != self.kb {
            return Err(Error::Domain(
                "label lists must match outcome counts".into(),
            ));
        }
        self.labels_a = labels_a;
        self.labels_b = labels_b;
        Ok(self)
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.ny + y) * self.ka + a) * self.kb + b
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[self.idx(x, y, a, b)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, a: usize, b: usize, v: f64) {
        let i = self.idx(x, y, a, b);
        self.p[i] = v;
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn ka(&self) -> usize {
        self.ka
    }
    pub fn kb(&self) -> usize {
        self.kb
    }
    pub fn labels_a(&self) -> &[i32] {
        &self.labels_a
    }
    pub fn labels_b(&self) -> &[i32] {
        &self.labels_b
    }

    /// Flat `[x][y][a][b]` view.
    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.ka == other.ka && self.kb == other.kb
    }

    /// ∞-norm distance; `+∞` for tables of different shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if !self.same_shape(other) {
            return f64::INFINITY;
        }
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn marginal_a(&self, x: usize, y: usize, a: usize) -> f64 {
        (0..self.kb).map(|b| self.get(x, y, a, b)).sum()
    }

    pub fn marginal_b(&self, x: usize, y: usize, b: usize) -> f64 {
        (0..self.ka).map(|a| self.get(x, y, a, b)).sum()
    }

    pub fn is_dichotomic(&self) -> bool {
        self.ka == 2 && self.kb == 2
    }

    /// Correlator `⟨A_x B_y⟩ = Σ a·b·p(a,b|x,y)` using the numeric labels.
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.ka {
            for b in 0..self.kb {
                acc += f64::from(self.labels_a[a] * self.labels_b[b]) * self.get(x, y, a, b);
            }
        }
        acc
    }

    /// Merges outcome `from` into outcome `into` on both sides (used to
    /// binarize no-click events). The merged outcome is removed.
    pub fn merge_outcome(&self, from_label: i32, into_label: i32) -> Result<Self> {
        let find = |labels: &[i32], l: i32| labels.iter().position(|&v| v == l);
        let (fa, ia) = find(&self.labels_a, from_label)
            .zip(find(&self.labels_a, into_label))
            .ok_or_else(|| Error::Domain("labels to merge not present for party A".into()))?;
        let (fb, ib) = find(&self.labels_b, from_label)
            .zip(find(&self.labels_b, into_label))
            .ok_or_else(|| Error::Domain("labels to merge not present for party B".into()))?;
        let keep_a: Vec<usize> = (0..self.ka).filter(|&a| a != fa).collect();
        let keep_b: Vec<usize> = (0..self.kb).filter(|&b| b != fb).collect();
        let map_a = |a: usize| if a == fa { ia } else { a };
        let map_b = |b: usize| if b == fb { ib } else { b };
        let mut out = Self::zeros(self.nx, self.ny, keep_a.len(), keep_b.len());
        out.labels_a = keep_a.iter().map(|&a| self.labels_a[a]).collect();
        out.labels_b = keep_b.iter().map(|&b| self.labels_b[b]).collect();
        for x in 0..self.nx {
            for y in 0..self.ny {
                for a in 0..self.ka {
                    for b in 0..self.kb {
                        let na = keep_a.iter().position(|&k| k == map_a(a)).unwrap();
                        let nb = keep_b.iter().position(|&k| k == map_b(b)).unwrap();
                        let v = out.get(x, y, na, nb) + self.get(x, y, a, b);
                        out.set(x, y, na, nb, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Convex combination `Σ w_i t_i` of same-shape tables.
    pub fn mixture(parts: &[(f64, &ProbTable)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Domain("empty mixture".into()))?
            .1;
        if parts.iter().any(|(_, t)| !t.same_shape(first)) {
            return Err(Error::Domain(
                "mixture of tables with different shapes".into(),
            ));
        }
        let mut out = first.clone();
        for (i, v) in out.p.iter_mut().enumerate() {
            *v = parts.iter().map(|(w, t)| w * t.p[i]).sum();
        }
        Ok(out)
    }
}

/// Statistics families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Chsh,
    Bb84,
    SixState,
    NoisyBb84,
    NoisyBb84Binarized,
    Sic,
    ChshSlice,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "chsh" => Ok(Self::Chsh),
            "bb84" => Ok(Self::Bb84),
            "sixstate" | "six-state" | "six-states" => Ok(Self::SixState),
            "noisy-bb84" | "noisybb84" => Ok(Self::NoisyBb84),
            "noisy-bb84-binarized" | "noisy-bb84-bin" => Ok(Self::NoisyBb84Binarized),
            "sic" => Ok(Self::Sic),
            "chsh-slice" => Ok(Self::ChshSlice),
            other => Err(Error::Domain(format!("unknown family '{other}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Chsh => "chsh",
            Self::Bb84 => "bb84",
            Self::SixState => "sixstate",
            Self::NoisyBb84 => "noisy-bb84",
            Self::NoisyBb84Binarized => "noisy-bb84-binarized",
            Self::Sic => "sic",
            Self::ChshSlice => "chsh-slice",
        };
        f.write_str(s)
    }
}

/// Family tag plus all parameters; only those relevant to the tag are read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    /// Werner visibility.
    pub w: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    /// State angle of `cos θ|00⟩ + sin θ|11⟩`.
    pub theta: f64,
    /// Barycentric weight of the `W = 1` CHSH point.
    pub u: f64,
    /// Barycentric weight of the `W = 0` CHSH point.
    pub v: f64,
}

impl FamilySpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            w: 1.0,
            eps_a: 1.0,
            eps_b: 1.0,
            theta: 0.0,
            u: 1.0,
            v: 0.0,
        }
    }

    pub fn chsh(w: f64) -> Self {
        Self {
            w,
            ..Self::new(Family::Chsh)
        }
    }

    pub fn bb84(w: f64) -> Self {
        Self {
            w,
            ..Self::new(Family::Bb84)
        }
    }

    pub fn six_state(w: f64) -> Self {
        Self {
            w,
            ..Self::new(Family::SixState)
        }
    }

    pub fn noisy_bb84(w: f64, eps_a: f64, eps_b: f64) -> Self {
        Self {
            w,
            eps_a,
            eps_b,
            ..Self::new(Family::NoisyBb84)
        }
    }

    pub fn noisy_bb84_binarized(w: f64, eps_a: f64, eps_b: f64) -> Self {
        Self {
            w,
            eps_a,
            eps_b,
            ..Self::new(Family::NoisyBb84Binarized)
        }
    }

    pub fn sic(theta: f64) -> Self {
        Self {
            theta,
            ..Self::new(Family::Sic)
        }
    }

    pub fn chsh_slice(u: f64, v: f64) -> Self {
        Self {
            u,
            v,
            ..Self::new(Family::ChshSlice)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        match self.family {
            Family::Chsh | Family::Bb84 | Family::SixState => unit("W", self.w),
            Family::NoisyBb84 | Family::NoisyBb84Binarized => {
                unit("W", self.w)?;
                unit("eps_A", self.eps_a)?;
                unit("eps_B", self.eps_b)
            }
            Family::Sic => {
                if (0.0..=FRAC_PI_4 + 1e-15).contains(&self.theta) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "theta = {} must lie in [0, π/4]",
                        self.theta
                    )))
                }
            }
            Family::ChshSlice => {
                if self.u >= 0.0 && self.v >= 0.0 && self.u + self.v <= 1.0 + 1e-15 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "slice weights (u, v) = ({}, {}) must be non-negative with u + v ≤ 1",
                        self.u, self.v
                    )))
                }
            }
        }
    }
}

fn sign(label: i32) -> f64 {
    f64::from(label)
}

/// `(2 + ab(−1)^{xy}√2 W)/8`.
fn chsh_table(w: f64) -> ProbTable {
    let l = default_labels(2);
    ProbTable::from_fn(2, 2, 2, 2, |x, y, a, b| {
        let parity = if x * y == 1 { -1.0 } else { 1.0 };
        (2.0 + sign(l[a]) * sign(l[b]) * parity * SQRT_2 * w) / 8.0
    })
}

/// `(1 + ab δ_xy W)/4`.
fn bb84_table(w: f64) -> ProbTable {
    let l = default_labels(2);
    ProbTable::from_fn(2, 2, 2, 2, |x, y, a, b| {
        let delta = if x == y { 1.0 } else { 0.0 };
        (1.0 + sign(l[a]) * sign(l[b]) * delta * w) / 4.0
    })
}

/// `(1 + ab(−1)^{δ_{x,2}} δ_xy W)/4`, settings `x, y ∈ {0, 1, 2}`.
fn six_state_table(w: f64) -> ProbTable {
    let l = default_labels(2);
    ProbTable::from_fn(3, 3, 2, 2, |x, y, a, b| {
        let delta = if x == y { 1.0 } else { 0.0 };
        let flip = if x == 2 { -1.0 } else { 1.0 };
        (1.0 + sign(l[a]) * sign(l[b]) * flip * delta * w) / 4.0
    })
}

/// BB84 statistics seen through detectors of efficiency `eps_a`, `eps_b`
/// firing independently; outcome order `[+1, −1, 0]` with 0 = no click.
fn noisy_bb84_table(w: f64, eps_a: f64, eps_b: f64) -> ProbTable {
    let ideal = bb84_table(w);
    ProbTable::from_fn(2, 2, 3, 3, |x, y, a, b| match (a, b) {
        (2, 2) => (1.0 - eps_a) * (1.0 - eps_b),
        // BB84 marginals are unbiased, so a lone click is ±1 with probability ½.
        (2, _) => 0.5 * (1.0 - eps_a) * eps_b,
        (_, 2) => 0.5 * eps_a * (1.0 - eps_b),
        _ => eps_a * eps_b * ideal.get(x, y, a, b),
    })
}

/// Deterministic point `p(a=+1|x) = p(b=+1|y) = 1`.
pub fn deterministic_point() -> ProbTable {
    ProbTable::from_fn(
        2,
        2,
        2,
        2,
        |_, _, a, b| if a == 0 && b == 0 { 1.0 } else { 0.0 },
    )
}

/// `cos θ|00⟩ + sin θ|11⟩`.
pub fn sic_state(theta: f64) -> Vector4<C64> {
    Vector4::new(
        C64::new(theta.cos(), 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(theta.sin(), 0.0),
    )
}

fn sic_table(theta: f64) -> Result<ProbTable> {
    let rho = qmat::pure_density(&sic_state(theta));
    let sic = qmat::sic_povm();
    qmat::born_statistics(&rho, std::slice::from_ref(&sic), std::slice::from_ref(&sic))
}

/// Closed-form statistics of a family.
pub fn generate(spec: &FamilySpec) -> Result<ProbTable> {
    spec.validate()?;
    Ok(match spec.family {
        Family::Chsh => chsh_table(spec.w),
        Family::Bb84 => bb84_table(spec.w),
        Family::SixState => six_state_table(spec.w),
        Family::NoisyBb84 => noisy_bb84_table(spec.w, spec.eps_a, spec.eps_b),
        Family::NoisyBb84Binarized => {
            noisy_bb84_table(spec.w, spec.eps_a, spec.eps_b).merge_outcome(0, 1)?
        }
        Family::Sic => sic_table(spec.theta)?,
        Family::ChshSlice => {
            let p1 = chsh_table(1.0);
            let p0 = chsh_table(0.0);
            let pd = deterministic_point();
            ProbTable::mixture(&[(spec.u, &p1), (spec.v, &p0), (1.0 - spec.u - spec.v, &pd)])?
        }
    })
}

/// Quantum bit error rate `p(a≠b|0,0)`, comparing outcome labels.
pub fn qber(p: &ProbTable) -> f64 {
    let mut q = 0.0;
    for a in 0..p.ka() {
        for b in 0..p.kb() {
            if p.labels_a()[a] != p.labels_b()[b] {
                q += p.get(0, 0, a, b);
            }
        }
    }
    q
}

/// Result of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub normalized: bool,
    pub nonneg: bool,
    /// Largest change of a local marginal across the other party's settings.
    pub no_signaling_gap: f64,
    /// `marginals_a[x][a]`, taken at `y = 0`.
    pub marginals_a: Vec<Vec<f64>>,
    /// `marginals_b[y][b]`, taken at `x = 0`.
    pub marginals_b: Vec<Vec<f64>>,
}

pub fn validate(p: &ProbTable) -> ValidationReport {
    let mut normalized = true;
    for x in 0..p.nx() {
        for y in 0..p.ny() {
            let s: f64 = (0..p.ka())
                .flat_map(|a| (0..p.kb()).map(move |b| (a, b)))
                .map(|(a, b)| p.get(x, y, a, b))
                .sum();
            normalized &= (s - 1.0).abs() <= NORM_TOL;
        }
    }
    let nonneg = p.as_slice().iter().all(|&v| v >= 0.0);
    let mut gap: f64 = 0.0;
    for x in 0..p.nx() {
        for a in 0..p.ka() {
            let m: Vec<f64> = (0..p.ny()).map(|y| p.marginal_a(x, y, a)).collect();
            gap = gap.max(spread(&m));
        }
    }
    for y in 0..p.ny() {
        for b in 0..p.kb() {
            let m: Vec<f64> = (0..p.nx()).map(|x| p.marginal_b(x, y, b)).collect();
            gap = gap.max(spread(&m));
        }
    }
    let marginals_a = (0..p.nx())
        .map(|x| (0..p.ka()).map(|a| p.marginal_a(x, 0, a)).collect())
        .collect();
    let marginals_b = (0..p.ny())
        .map(|y| (0..p.kb()).map(|b| p.marginal_b(0, y, b)).collect())
        .collect();
    ValidationReport {
        normalized,
        nonneg,
        no_signaling_gap: gap,
        marginals_a,
        marginals_b,
    }
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Largest deviation of the local marginals from uniform; zero for unbiased tables.
pub fn marginal_bias(p: &ProbTable) -> f64 {
    let mut bias: f64 = 0.0;
    for x in 0..p.nx() {
        for y in 0..p.ny() {
            for a in 0..p.ka() {
                bias = bias.max((p.marginal_a(x, y, a) - 1.0 / p.ka() as f64).abs());
            }
            for b in 0..p.kb() {
                bias = bias.max((p.marginal_b(x, y, b) - 1.0 / p.kb() as f64).abs());
            }
        }
    }
    bias
}

/// The ideal measurements realizing a family from the Werner state, as
/// `(povms_a, povms_b)`. Only defined for the dichotomic Werner families.
pub fn werner_measurements(family: Family) -> Result<(Vec<Povm>, Vec<Povm>)> {
    let z = Vector3::z();
    let x = Vector3::x();
    let y = Vector3::y();
    match family {
        Family::Bb84 => Ok((
            vec![Povm::projective(&z), Povm::projective(&x)],
            vec![Povm::projective(&z), Povm::projective(&x)],
        )),
        Family::SixState => Ok((
            vec![
                Povm::projective(&z),
                Povm::projective(&x),
                Povm::projective(&y),
            ],
            vec![
                Povm::projective(&z),
                Povm::projective(&x),
                Povm::projective(&y),
            ],
        )),
        Family::Chsh => Ok((
            vec![Povm::projective(&z), Povm::projective(&x)],
            vec![Povm::projective(&(z + x)), Povm::projective(&(z - x))],
        )),
        other => Err(Error::Domain(format!(
            "no Werner realization for family {other}"
        ))),
    }
}

/// Werner-state realization of the BB84/CHSH/six-state families.
pub fn werner_realization(family: Family, w: f64) -> Result<ProbTable> {
    let (a, b) = werner_measurements(family)?;
    qmat::born_statistics(&TwoQubitState::werner(w).density(), &a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bb84_reference_entries() {
        let t = generate(&FamilySpec::bb84(1.0)).unwrap();
        assert_abs_diff_eq!(t.get(0, 0, 0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(0, 0, 0, 1), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(0, 1, 0, 0), 0.25, epsilon = 1e-15);
        let t = generate(&FamilySpec::bb84(0.8)).unwrap();
        assert_abs_diff_eq!(t.get(0, 0, 0, 0), 0.45, epsilon = 1e-15);
    }

    #[test]
    fn chsh_reference_entry() {
        let t = generate(&FamilySpec::chsh(1.0)).unwrap();
        assert_abs_diff_eq!(t.get(1, 1, 0, 0), (2.0 - SQRT_2) / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn noisy_without_clicks_is_all_no_click() {
        let t = generate(&FamilySpec::noisy_bb84(0.7, 0.0, 0.0)).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert_abs_diff_eq!(t.get(x, y, 2, 2), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn sic_product_state() {
        let t = generate(&FamilySpec::sic(0.0)).unwrap();
        assert_abs_diff_eq!(t.get(0, 0, 0, 0), 0.25, epsilon = 1e-15);
        let rho = qmat::pure_density(&sic_state(0.0));
        let sic = qmat::sic_povm();
        let direct =
            qmat::born_statistics(&rho, std::slice::from_ref(&sic), std::slice::from_ref(&sic))
                .unwrap();
        assert!(t.max_abs_diff(&direct) < 1e-15);
        assert_eq!(t.ka(), 4);
    }

    #[test]
    fn slice_vertex_is_chsh() {
        let t = generate(&FamilySpec::chsh_slice(1.0, 0.0)).unwrap();
        assert!(t.max_abs_diff(&generate(&FamilySpec::chsh(1.0)).unwrap()) < 1e-15);
        let t = generate(&FamilySpec::chsh_slice(0.0, 0.0)).unwrap();
        assert!(t.max_abs_diff(&deterministic_point()) < 1e-15);
    }

    #[test]
    fn out_of_range_parameters_rejected() {
        for spec in [
            FamilySpec::bb84(1.2),
            FamilySpec::noisy_bb84(1.0, -0.1, 0.5),
            FamilySpec::sic(1.0),
            FamilySpec::chsh_slice(0.7, 0.5),
        ] {
            assert!(matches!(generate(&spec), Err(Error::Domain(_))), "{spec:?}");
        }
    }

    #[test]
    fn qber_reference_values() {
        let w = 0.7;
        let t = generate(&FamilySpec::bb84(w)).unwrap();
        assert_abs_diff_eq!(qber(&t), (1.0 - w) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            qber(&generate(&FamilySpec::bb84(1.0)).unwrap()),
            0.0,
            epsilon = 1e-15
        );
        let e = 0.9;
        let t = generate(&FamilySpec::noisy_bb84_binarized(w, e, e)).unwrap();
        assert_abs_diff_eq!(
            qber(&t),
            e * e * (1.0 - w) / 2.0 + e * (1.0 - e),
            epsilon = 1e-15
        );
    }

    #[test]
    fn binarized_matches_printed_correlations() {
        // Four entries of the binarized table in closed form (label +1 first).
        let (w, e) = (0.8, 0.75);
        let t = generate(&FamilySpec::noisy_bb84_binarized(w, e, e)).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let d = if x == y { 1.0 } else { 0.0 };
                let pp = e * e * (1.0 + d * w) / 4.0 + e * (1.0 - e) + (1.0 - e) * (1.0 - e);
                let pm = e * e * (1.0 - d * w) / 4.0 + e * (1.0 - e) / 2.0;
                let mm = e * e * (1.0 + d * w) / 4.0;
                assert_abs_diff_eq!(t.get(x, y, 0, 0), pp, epsilon = 1e-15);
                assert_abs_diff_eq!(t.get(x, y, 0, 1), pm, epsilon = 1e-15);
                assert_abs_diff_eq!(t.get(x, y, 1, 0), pm, epsilon = 1e-15);
                assert_abs_diff_eq!(t.get(x, y, 1, 1), mm, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn validation_reports() {
        let r = validate(&generate(&FamilySpec::bb84(0.6)).unwrap());
        assert!(r.normalized && r.nonneg);
        assert!(r.no_signaling_gap <= 1e-15);
        assert!(r
            .marginals_a
            .iter()
            .flatten()
            .all(|&m| (m - 0.5).abs() < 1e-15));
        assert!(r
            .marginals_b
            .iter()
            .flatten()
            .all(|&m| (m - 0.5).abs() < 1e-15));

        let r = validate(&deterministic_point());
        assert_eq!(r.no_signaling_gap, 0.0);
        assert_eq!(r.marginals_a[0][0], 1.0);
        assert_eq!(r.marginals_a[1][0], 1.0);

        // Alice's marginal depends on Bob's setting.
        let mut s = generate(&FamilySpec::bb84(0.0)).unwrap();
        s.set(0, 1, 0, 0, 0.4);
        s.set(0, 1, 1, 0, 0.1);
        let r = validate(&s);
        assert!(r.normalized);
        assert!(r.no_signaling_gap > 0.1);
    }

    #[test]
    fn json_round_trip_and_shape_errors() {
        let t = generate(&FamilySpec::noisy_bb84(0.9, 0.8, 0.7)).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: ProbTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"nx":1,"ny":1,"ka":2,"kb":2,"labels_a":[1,-1],"labels_b":[1,-1],"p":[[[[0.5,0.5]]]]}"#;
        assert!(serde_json::from_str::<ProbTable>(bad).is_err());
    }

    #[test]
    fn merge_of_three_outcome_table() {
        let t = generate(&FamilySpec::noisy_bb84(0.9, 0.8, 0.6)).unwrap();
        let m = t.merge_outcome(0, 1).unwrap();
        assert_eq!(m.labels_a(), &[1, -1]);
        for x in 0..2 {
            for y in 0..2 {
                let pp =
                    t.get(x, y, 0, 0) + t.get(x, y, 0, 2) + t.get(x, y, 2, 0) + t.get(x, y, 2, 2);
                assert_eq!(m.get(x, y, 0, 0), pp);
                assert_eq!(m.get(x, y, 1, 1), t.get(x, y, 1, 1));
            }
        }
    }
}
