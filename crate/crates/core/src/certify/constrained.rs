//! Analytic reductions for the BB84 and six-state statistics.
//!
//! Unbiased marginals let the state be taken as `ρ(0, 0, T)`, and every
//! dichotomic qubit observable is `η n·σ` with `0 < η ≤ 1`. Up to a common
//! rotation the observables are
//!
//! * `A₀ = η_{A0} σ_z`,
//! * `A₁ = η_{A1}(c_A σ_x + s_A σ_z)`,
//! * `A₂ = η_{A2}(D_A σ_y + E_A(d_A σ_x + e_A σ_z))`,
//!
//! and likewise for Bob. The observed correlators `η_{Ax}η_{By} n_{Ax}ᵀ T n_{By}`
//! are linear in `T`. With three settings they determine `T` completely; with
//! two they fix its `xz` block and leave the five entries involving `y` free.

use nalgebra::{Matrix2, Matrix3, Vector3};
use std::f64::consts::TAU;

use super::{assemble, finalize, Candidate, CertResult, CONSTRAINED_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::optim::{
    admissible_start, local_search, run_starts, start_rng, start_seed, Objective, OptimOptions,
    StartLog, StartRng,
};
use crate::qmat::{zero_marginal_spectrum, Mat4, Povm, TwoQubitState, STATE_TOL};
use crate::stats::{generate, Family, FamilySpec};

/// Smallest admissible `|c|` and `|D|`; the correlation system degenerates below it.
pub const ANGLE_GUARD: f64 = 1e-6;
/// Correlation-matrix entries beyond `1 + T_SLACK` mark infeasible parameters.
pub const T_SLACK: f64 = 1e-9;
/// Lower end of the efficiency box.
const ETA_MIN: f64 = 1e-3;
const SEPARABLE_FLOOR: f64 = -0.05;
const RANDOM_START_TRIES: usize = 200;

/// Efficiencies and angles of both parties' observables.
///
/// Unit-circle pairs are stored as angles: `(c, s) = (cos θ, sin θ)`,
/// `(D, E) = (cos φ, sin φ)` and `(d, e) = (cos ψ, sin ψ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SixStateMeasParams {
    pub eta_a: [f64; 3],
    pub eta_b: [f64; 3],
    pub theta_a: f64,
    pub theta_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub psi_a: f64,
    pub psi_b: f64,
}

impl Default for SixStateMeasParams {
    /// Ideal projective `σ_z`, `σ_x`, `σ_y` on both sides.
    fn default() -> Self {
        Self {
            eta_a: [1.0; 3],
            eta_b: [1.0; 3],
            theta_a: 0.0,
            theta_b: 0.0,
            phi_a: 0.0,
            phi_b: 0.0,
            psi_a: 0.0,
            psi_b: 0.0,
        }
    }
}

fn directions(theta: f64, phi: f64, psi: f64) -> [Vector3<f64>; 3] {
    let (s, c) = theta.sin_cos();
    let (e_big, d_big) = phi.sin_cos();
    let (e, d) = psi.sin_cos();
    [
        Vector3::z(),
        Vector3::new(c, 0.0, s),
        Vector3::new(e_big * d, d_big, e_big * e),
    ]
}

impl SixStateMeasParams {
    /// Unit vectors of Alice's observables, settings 0, 1, 2.
    pub fn directions_a(&self) -> [Vector3<f64>; 3] {
        directions(self.theta_a, self.phi_a, self.psi_a)
    }

    pub fn directions_b(&self) -> [Vector3<f64>; 3] {
        directions(self.theta_b, self.phi_b, self.psi_b)
    }

    /// Checks efficiencies and the division guards for the first `settings` settings.
    pub fn check(&self, settings: usize) -> Result<()> {
        let etas = self.eta_a[..settings].iter().chain(&self.eta_b[..settings]);
        if let Some(eta) = etas.copied().find(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::Domain(format!("efficiency {eta} outside (0, 1]")));
        }
        let mut guarded = vec![("c_A", self.theta_a.cos()), ("c_B", self.theta_b.cos())];
        if settings > 2 {
            guarded.extend([("D_A", self.phi_a.cos()), ("D_B", self.phi_b.cos())]);
        }
        match guarded.into_iter().find(|(_, v)| v.abs() < ANGLE_GUARD) {
            Some((name, v)) => Err(Error::Domain(format!(
                "|{name}| = {:e} below guard {ANGLE_GUARD:e}",
                v.abs()
            ))),
            None => Ok(()),
        }
    }

    /// Unbiased POVMs `½(1 ± η n·σ)` for the first `settings` settings.
    pub fn povms(&self, settings: usize) -> Result<(Vec<Povm>, Vec<Povm>)> {
        let build = |eta: &[f64; 3], dirs: [Vector3<f64>; 3]| {
            (0..settings)
                .map(|x| Povm::unbiased(eta[x], &dirs[x]))
                .collect::<Result<Vec<_>>>()
        };
        Ok((
            build(&self.eta_a, self.directions_a())?,
            build(&self.eta_b, self.directions_b())?,
        ))
    }
}

/// Target correlator for settings `(x, y)`: `±W` on the diagonal, zero elsewhere.
fn target(w: f64, x: usize, y: usize) -> f64 {
    match (x == y, x) {
        (false, _) => 0.0,
        (true, 2) => -w,
        (true, _) => w,
    }
}

fn check_entries(t: &Matrix3<f64>) -> Result<()> {
    match t.iter().map(|v| v.abs()).fold(0.0, f64::max) {
        m if m.is_finite() && m <= 1.0 + T_SLACK => Ok(()),
        m => Err(Error::Infeasible(format!(
            "correlation entry of size {m} exceeds 1"
        ))),
    }
}

/// Correlation matrix forced by the six-state statistics for the given
/// measurements, from the nine conditions `η_{Ax}η_{By} n_{Ax}ᵀ T n_{By} = ±W δ_xy`.
pub fn t_matrix_sixstate(w: f64, params: &SixStateMeasParams) -> Result<Matrix3<f64>> {
    params.check(3)?;
    let rows = |d: [Vector3<f64>; 3]| {
        Matrix3::from_rows(&[d[0].transpose(), d[1].transpose(), d[2].transpose()])
    };
    let ma = rows(params.directions_a());
    let mb = rows(params.directions_b());
    let rhs = Matrix3::from_fn(|x, y| target(w, x, y) / (params.eta_a[x] * params.eta_b[y]));
    let inv = |m: Matrix3<f64>| {
        m.try_inverse()
            .ok_or_else(|| Error::Domain("measurement directions are linearly dependent".into()))
    };
    let t = inv(ma)? * rhs * inv(mb)?.transpose();
    check_entries(&t)?;
    Ok(t)
}

/// Entries of `T` not fixed by the BB84 statistics, in the order
/// `[T_xy, T_yx, T_yy, T_zy, T_yz]`.
pub type Bb84FreeEntries = [f64; 5];

/// Correlation matrix for the BB84 statistics: the `xz` block solves the four
/// conditions of settings 0 and 1, the remaining entries are taken from `free`.
pub fn t_matrix_bb84(
    w: f64,
    params: &SixStateMeasParams,
    free: &Bb84FreeEntries,
) -> Result<Matrix3<f64>> {
    params.check(2)?;
    // Directions restricted to the (x, z) plane.
    let plane = |theta: f64| {
        let (s, c) = theta.sin_cos();
        Matrix2::new(0.0, 1.0, c, s)
    };
    let rhs = Matrix2::from_fn(|x, y| target(w, x, y) / (params.eta_a[x] * params.eta_b[y]));
    let inv = |m: Matrix2<f64>| {
        m.try_inverse()
            .ok_or_else(|| Error::Domain("measurement directions are parallel".into()))
    };
    let block = inv(plane(params.theta_a))? * rhs * inv(plane(params.theta_b))?.transpose();
    let [xy, yx, yy, zy, yz] = *free;
    let t = Matrix3::new(
        block[(0, 0)],
        xy,
        block[(0, 1)],
        yx,
        yy,
        yz,
        block[(1, 0)],
        zy,
        block[(1, 1)],
    );
    check_entries(&t)?;
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Reduced {
    Bb84,
    SixState,
}

impl Reduced {
    pub(crate) fn from_family(family: Family, what: &str) -> Result<Self> {
        match family {
            Family::Bb84 => Ok(Reduced::Bb84),
            Family::SixState => Ok(Reduced::SixState),
            other => Err(Error::Scope(format!(
                "{what} covers bb84 and six-state only, not {other}"
            ))),
        }
    }

    pub(crate) fn family(self) -> Family {
        match self {
            Reduced::Bb84 => Family::Bb84,
            Reduced::SixState => Family::SixState,
        }
    }

    pub(crate) fn settings(self) -> usize {
        match self {
            Reduced::Bb84 => 2,
            Reduced::SixState => 3,
        }
    }

    /// Efficiencies, angles and (for BB84) free correlation entries.
    fn dim(self) -> usize {
        match self {
            Reduced::Bb84 => 4 + 2 + 5,
            Reduced::SixState => 6 + 6,
        }
    }
}

pub(crate) struct Search {
    pub(crate) kind: Reduced,
    w: f64,
    bounds: Vec<(f64, f64)>,
}

impl Search {
    pub(crate) fn new(kind: Reduced, w: f64) -> Self {
        let n = kind.settings();
        // Efficiencies enter as η = cos a, which puts η = 1 inside the box.
        let a_max = ETA_MIN.acos();
        let mut bounds = vec![(-a_max, a_max); 2 * n];
        match kind {
            Reduced::Bb84 => {
                bounds.extend([(0.0, TAU); 2]);
                bounds.extend([(-1.0, 1.0); 5]);
            }
            Reduced::SixState => bounds.extend([(0.0, TAU); 6]),
        }
        Self { kind, w, bounds }
    }

    pub(crate) fn params(&self, x: &[f64]) -> SixStateMeasParams {
        let n = self.kind.settings();
        let mut p = SixStateMeasParams::default();
        for (eta, a) in p.eta_a[..n]
            .iter_mut()
            .chain(&mut p.eta_b[..n])
            .zip(&x[..2 * n])
        {
            *eta = a.cos();
        }
        let a = &x[2 * n..];
        p.theta_a = a[0];
        p.theta_b = a[1];
        if self.kind == Reduced::SixState {
            (p.phi_a, p.phi_b, p.psi_a, p.psi_b) = (a[2], a[3], a[4], a[5]);
        }
        p
    }

    pub(crate) fn t_matrix(&self, x: &[f64]) -> Result<Matrix3<f64>> {
        let p = self.params(x);
        match self.kind {
            Reduced::Bb84 => {
                let free: Bb84FreeEntries = x[6..11].try_into().expect("five free entries");
                t_matrix_bb84(self.w, &p, &free)
            }
            Reduced::SixState => t_matrix_sixstate(self.w, &p),
        }
    }

    /// The ideal measurements on the Werner state with correlations `W`.
    pub(crate) fn ideal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.kind.dim()];
        if self.kind == Reduced::Bb84 {
            x[8] = -self.w;
        }
        x
    }

    /// Signed concurrence `2λ_max − 1` of `ρ(0, 0, T)`, or `None` for
    /// inadmissible parameters or a non-positive state.
    pub(crate) fn signed(&self, x: &[f64]) -> Option<f64> {
        let t = self.t_matrix(x).ok()?;
        let ev = zero_marginal_spectrum(&t);
        (ev[3] >= -STATE_TOL).then(|| 2.0 * ev[0] - 1.0)
    }
}

impl Objective for Search {
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.signed(x)
            .map_or(f64::INFINITY, |c| c.max(SEPARABLE_FLOOR))
    }

    /// Uniform in the box when that lands on an admissible point, otherwise
    /// pulled towards the ideal measurements until it does.
    fn initial_point(&self, rng: &mut StartRng) -> Vec<f64> {
        admissible_start(&self.bounds, &self.ideal(), RANDOM_START_TRIES, rng, |x| {
            self.signed(x).is_some()
        })
    }
}

/// Minimum concurrence compatible with the BB84 or six-state statistics of
/// visibility `w`, searching over the reduced parametrization.
pub fn certify_constrained(family: Family, w: f64, opts: &OptimOptions) -> Result<CertResult> {
    opts.validate()?;
    let kind = Reduced::from_family(family, "constrained certification")?;
    let spec = FamilySpec {
        w,
        ..FamilySpec::new(family)
    };
    spec.validate()?;
    let table = generate(&spec)?;
    let search = Search::new(kind, w);
    let cands = run_starts(opts, |i| {
        let mut rng = start_rng(opts.seed, i);
        let x0 = search.initial_point(&mut rng);
        let local = local_search(&search, &x0, opts);
        let t = search.t_matrix(&local.x).ok()?;
        let (pa, pb) = search.params(&local.x).povms(kind.settings()).ok()?;
        let (bound, residual, model) =
            finalize(&TwoQubitState::from_correlations(t), &pa, &pb, &table)?;
        Some(Candidate {
            bound,
            residual,
            model,
            log: StartLog {
                index: i,
                seed: start_seed(opts.seed, i),
                f: local.f,
                evals: local.evals,
                converged: local.converged,
            },
        })
    });
    assemble(cands, CONSTRAINED_RESIDUAL_TOL, opts)
}

/// Outcome of the analytic `W = 1` propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTest {
    pub state: Mat4,
    /// Efficiencies forced to a value, by name (`eta_A0`, …).
    pub forced_etas: Vec<(String, f64)>,
    /// Correlation-matrix entries forced to a value, by name (`T_zz`, …).
    pub forced_t: Vec<(String, f64)>,
    /// Forced observable directions of Alice and Bob per setting.
    pub observables_a: Vec<Vector3<f64>>,
    pub observables_b: Vec<Vector3<f64>>,
}

/// Efficiencies `η_a, η_b ≤ 1` with `η_a η_b |T| = 1` and `|T| ≤ 1` leave only
/// `η_a = η_b = |T| = 1`.
fn force_unit_correlation(correlator: f64) -> Option<(f64, f64, f64)> {
    // |T| = |correlator| / (η_a η_b) ≥ |correlator|, so |correlator| = 1 pins all three.
    ((correlator.abs() - 1.0).abs() <= T_SLACK).then_some((1.0, 1.0, correlator.signum()))
}

/// Self-test of the ideal (`W = 1`) BB84 or six-state statistics: propagates
/// `|T_ij| ≤ 1` and positivity through the correlation conditions.
pub fn selftest_w1(family: Family) -> Result<SelfTest> {
    let settings = match family {
        Family::Bb84 => 2,
        Family::SixState => 3,
        other => {
            return Err(Error::Scope(format!(
                "self-testing covers bb84 and six-state only, not {other}"
            )))
        }
    };
    let mut forced_etas = Vec::new();
    let mut forced_t = Vec::new();
    let mut t = Matrix3::zeros();
    let mut obs_a = Vec::new();
    let mut obs_b = Vec::new();

    // Setting 0: ⟨A₀B₀⟩ = 1 along z.
    let (ea, eb, tzz) = force_unit_correlation(target(1.0, 0, 0)).expect("unit correlator");
    forced_etas.extend([("eta_A0".to_string(), ea), ("eta_B0".to_string(), eb)]);
    t[(2, 2)] = tzz;
    forced_t.push(("T_zz".to_string(), tzz));
    obs_a.push(Vector3::z());
    obs_b.push(Vector3::z());

    // With T_zz = 1 the operator norm ‖T‖ ≤ 1 leaves no room in the z row or
    // column: cos θ + λ sin θ > 1 for small θ whenever λ ≠ 0.
    for name in ["T_zx", "T_xz", "T_zy", "T_yz"] {
        forced_t.push((name.to_string(), 0.0));
    }
    // The conditions ⟨A₀B₁⟩ = ⟨A₁B₀⟩ = 0 then read s_B T_zz = s_A T_zz = 0.
    let (s_a, s_b) = (0.0, 0.0);
    let (c_a, c_b) = (1.0_f64, 1.0_f64);

    // Setting 1: η_{A1}η_{B1} c_A c_B T_xx = 1.
    let (ea, eb, txx) = force_unit_correlation(target(1.0, 1, 1)).expect("unit correlator");
    forced_etas.extend([("eta_A1".to_string(), ea), ("eta_B1".to_string(), eb)]);
    t[(0, 0)] = txx / (c_a * c_b);
    forced_t.push(("T_xx".to_string(), t[(0, 0)]));
    obs_a.push(Vector3::new(c_a, 0.0, s_a));
    obs_b.push(Vector3::new(c_b, 0.0, s_b));
    for name in ["T_xy", "T_yx"] {
        forced_t.push((name.to_string(), 0.0));
    }

    // Positivity of ρ(0,0,diag(T_xx, T_yy, T_zz)): ¼(1 − T_xx − T_yy − T_zz) ≥ 0
    // gives T_yy ≤ 1 − T_xx − T_zz = −1, while |T_yy| ≤ 1.
    let upper = 1.0 - t[(0, 0)] - t[(2, 2)];
    if upper > -1.0 + T_SLACK {
        return Err(Error::Infeasible("propagation did not force T_yy".into()));
    }
    t[(1, 1)] = -1.0;
    forced_t.push(("T_yy".to_string(), -1.0));

    if settings == 3 {
        // ⟨A₂B₀⟩ = ⟨A₂B₁⟩ = 0 force E_A e_A = E_A d_A = 0, hence E_A = 0 and
        // A₂ ∝ σ_y (likewise for Bob); ⟨A₂B₂⟩ = −1 = −η_{A2}η_{B2}D_A D_B.
        let (ea, eb, _) = force_unit_correlation(target(1.0, 2, 2)).expect("unit correlator");
        forced_etas.extend([("eta_A2".to_string(), ea), ("eta_B2".to_string(), eb)]);
        obs_a.push(Vector3::y());
        obs_b.push(Vector3::y());
    }

    Ok(SelfTest {
        state: TwoQubitState::from_correlations(t).density(),
        forced_etas,
        forced_t,
        observables_a: obs_a,
        observables_b: obs_b,
    })
}
