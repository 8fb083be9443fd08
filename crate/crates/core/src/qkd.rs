//! Secret key fractions certified under the qubit assumption.
//!
//! In the asymptotic one-way setting the key fraction is
//! `r = 1 − h(Q) − χ(A:E)`, where Eve holds a purification of `ρ_AB` and
//! `χ` is the Holevo quantity between Alice's key outcomes (setting 0) and
//! Eve's system. The QBER `Q` is fixed by the statistics, so certifying a key
//! fraction means maximizing `χ` over every qubit model reproducing them.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;

use crate::certify::generic::{run_start, Layout};
use crate::certify::{
    repair_povm, repair_state, Model, Reduced, Search, CONSTRAINED_RESIDUAL_TOL, T_SLACK,
};
use crate::error::{Error, Result};
use crate::optim::{
    local_search, run_starts, start_rng, start_seed, LocalResult, Objective, OptimOptions,
    StartLog, StartRng,
};
use crate::qmat::{
    affine_qubit_operator, binary_entropy, eigvalsh4, identity2, kron, purify_unchecked,
    qubit_bloch_parts, spectrum_entropy, validate_state, zero_marginal_spectrum, Mat4, Povm,
    TwoQubitState, C64, STATE_TOL,
};
use crate::stats::{generate, qber, Family, FamilySpec, ProbTable};

/// Threat model of the detector-inefficiency analysis, reported with its results.
pub const NO_CLICK_CAVEAT: &str =
    "Eve does not have the information of when the detectors fail to click";

/// Smallest admissible `|β₁|`, `|β₃|`, `|δ₁|`, `|δ₃|`; the marginal and
/// correlation systems are singular below it.
pub const BETA_GUARD: f64 = 1e-6;

const ZERO_OUTCOME: f64 = 1e-15;

/// Holevo quantity `χ(A:E) = S(ρ_E) − Σ_a p(a) S(ρ_E^a)` between the outcomes
/// of `key` on Alice's qubit and a purifying system of `rho`.
///
/// `Tr_AB[(√Π ⊗ 1)|ψ⟩⟨ψ|(√Π ⊗ 1)]` equals `Tr_AB[(Π ⊗ 1)|ψ⟩⟨ψ|]`, so the
/// conditional states are built from `Π` directly.
pub fn holevo(rho: &Mat4, key: &Povm) -> Result<f64> {
    validate_state(rho)?;
    Povm::new(key.elements().to_vec())?;
    Ok(holevo_unchecked(rho, key))
}

fn holevo_unchecked(rho: &Mat4, key: &Povm) -> f64 {
    let pur = purify_unchecked(rho);
    let s_e = spectrum_entropy(pur.eigenvalues.as_slice());
    let conditional: f64 = key
        .elements()
        .iter()
        .filter_map(|pi| {
            let unnorm = pur.conditional_environment_state(&kron(pi, &identity2()));
            let p = unnorm.trace().re;
            (p > ZERO_OUTCOME).then(|| {
                let ev = eigvalsh4(&(unnorm / C64::new(p, 0.0)));
                p * spectrum_entropy(ev.as_slice())
            })
        })
        .sum();
    s_e - conditional
}

/// Key fraction `1 − h(q) − χ` of a model whose key is Alice's setting 0.
pub fn key_fraction(model: &Model, q: f64) -> Result<f64> {
    let key = model
        .povms_a
        .first()
        .ok_or_else(|| Error::Domain("model has no key measurement".into()))?;
    Ok(1.0 - binary_entropy(q) - holevo(&model.state.density(), key)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRates {
    pub r_bb84: f64,
    pub r_sixstate: f64,
}

/// Tomographic key fractions with ideal complementary measurements; negative
/// values are returned unclipped.
pub fn reference_rates(q: f64) -> Result<ReferenceRates> {
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::Domain(format!("QBER {q} outside [0, 1/2]")));
    }
    let xlog = |p: f64, arg: f64| if p > 0.0 { p * arg.log2() } else { 0.0 };
    let a = 1.5 * q;
    Ok(ReferenceRates {
        r_bb84: 1.0 - 2.0 * binary_entropy(q),
        r_sixstate: 1.0 + xlog(a, 0.5 * q) + xlog(1.0 - a, 1.0 - a),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    /// Certified key fraction, clipped at zero.
    pub r: f64,
    /// `1 − h(Q) − χ` of the returned model before clipping.
    pub r_raw: f64,
    pub q: f64,
    pub holevo: f64,
    /// Eve's best attack found: state and measurements reproducing the statistics.
    pub model: Model,
    pub residual: f64,
    pub feasible: bool,
    pub n_starts: usize,
    pub seed: u64,
    pub best_start: usize,
    pub starts: Vec<StartLog>,
    pub caveat: Option<&'static str>,
    /// The attack in detector-model coordinates, for the noisy BB84 search.
    pub noisy_params: Option<NoisyBb84Params>,
}

struct KeyCandidate {
    r_raw: f64,
    holevo: f64,
    residual: f64,
    model: Model,
    log: StartLog,
}

/// Repairs the model, scores it against `table` and evaluates its key fraction.
fn key_candidate(
    state: &TwoQubitState,
    povms_a: &[Povm],
    povms_b: &[Povm],
    table: &ProbTable,
    q: f64,
    log: StartLog,
) -> Option<KeyCandidate> {
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
    let residual = model.residual(table).ok()?;
    let chi = holevo_unchecked(&model.state.density(), &model.povms_a[0]);
    Some(KeyCandidate {
        r_raw: 1.0 - binary_entropy(q) - chi,
        holevo: chi,
        residual,
        model,
        log,
    })
}

/// Lowest key fraction among feasible candidates (lowest index on ties), or
/// the smallest residual when none is feasible.
fn assemble_key(
    cands: Vec<Option<KeyCandidate>>,
    tol: f64,
    q: f64,
    opts: &OptimOptions,
    caveat: Option<&'static str>,
) -> Result<KeyRateResult> {
    let starts = cands
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            Some(c) => c.log.clone(),
            None => StartLog {
                index: i,
                seed: start_seed(opts.seed, i),
                f: f64::INFINITY,
                evals: 0,
                converged: false,
            },
        })
        .collect();
    let rank = |c: &KeyCandidate| {
        if c.residual <= tol {
            (0, c.r_raw)
        } else {
            (1, c.residual)
        }
    };
    let (best_start, best) = cands
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .reduce(|best, next| {
            let (kb, kn) = (rank(&best.1), rank(&next.1));
            if kn.0 < kb.0 || (kn.0 == kb.0 && kn.1 < kb.1) {
                next
            } else {
                best
            }
        })
        .ok_or_else(|| Error::Infeasible("no start produced an attack model".into()))?;
    Ok(KeyRateResult {
        r: best.r_raw.max(0.0),
        r_raw: best.r_raw,
        q,
        holevo: best.holevo,
        feasible: best.residual <= tol,
        residual: best.residual,
        model: best.model,
        n_starts: opts.n_starts,
        seed: opts.seed,
        best_start,
        starts,
        caveat,
        noisy_params: None,
    })
}

/// Eve's information over the reduced BB84 / six-state parametrization.
struct ReducedKey {
    search: Search,
    h_q: f64,
}

impl ReducedKey {
    fn model(&self, x: &[f64]) -> Option<(TwoQubitState, Vec<Povm>, Vec<Povm>)> {
        let t = self.search.t_matrix(x).ok()?;
        if zero_marginal_spectrum(&t)[3] < -STATE_TOL {
            return None;
        }
        let (pa, pb) = self
            .search
            .params(x)
            .povms(self.search.kind.settings())
            .ok()?;
        Some((TwoQubitState::from_correlations(t), pa, pb))
    }
}

impl Objective for ReducedKey {
    fn bounds(&self) -> &[(f64, f64)] {
        self.search.bounds()
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self.model(x) {
            Some((state, pa, _)) => 1.0 - self.h_q - holevo_unchecked(&state.density(), &pa[0]),
            None => f64::INFINITY,
        }
    }

    fn initial_point(&self, rng: &mut StartRng) -> Vec<f64> {
        self.search.initial_point(rng)
    }
}

/// Certified key fraction for the BB84 or six-state statistics of visibility `w`.
pub fn certified_keyrate(family: Family, w: f64, opts: &OptimOptions) -> Result<KeyRateResult> {
    opts.validate()?;
    let kind = Reduced::from_family(family, "certified key rates")?;
    let spec = FamilySpec {
        w,
        ..FamilySpec::new(kind.family())
    };
    spec.validate()?;
    let table = generate(&spec)?;
    let q = qber(&table);
    let obj = ReducedKey {
        search: Search::new(kind, w),
        h_q: binary_entropy(q),
    };
    let cands = run_starts(opts, |i| {
        let mut rng = start_rng(opts.seed, i);
        let x0 = obj.initial_point(&mut rng);
        let local = local_search(&obj, &x0, opts);
        let (state, pa, pb) = obj.model(&local.x)?;
        key_candidate(&state, &pa, &pb, &table, q, log(opts, i, &local))
    });
    assemble_key(cands, CONSTRAINED_RESIDUAL_TOL, q, opts, None)
}

fn log(opts: &OptimOptions, i: usize, local: &LocalResult) -> StartLog {
    StartLog {
        index: i,
        seed: start_seed(opts.seed, i),
        f: local.f,
        evals: local.evals,
        converged: local.converged,
    }
}

/// The attack on the six-state statistics of visibility `w` that brings the key
/// fraction down to `1 − 2h((1−W)/2)`: `ρ = ¼(1 + W(σx⊗σx − σy⊗σy) + σz⊗σz)`,
/// projective `σz, σx, σy` for Alice, and Bob's key measurement blurred to
/// `½(1 ± Wσz)`.
pub fn sixstate_attack(w: f64) -> Result<Model> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain(format!("visibility {w} outside [0, 1]")));
    }
    let state = TwoQubitState::from_correlations(Matrix3::from_diagonal(&Vector3::new(w, -w, 1.0)));
    let axes = [Vector3::z(), Vector3::x(), Vector3::y()];
    let povms_a = axes.iter().map(Povm::projective).collect();
    let povms_b = vec![
        Povm::unbiased(w, &Vector3::z())?,
        Povm::projective(&Vector3::x()),
        Povm::projective(&Vector3::y()),
    ];
    Ok(Model {
        state,
        povms_a,
        povms_b,
    })
}

/// Levels, frame rotation and rotated Bloch vectors of one party's `+1` elements.
type PartyFrame = ([f64; 2], Matrix3<f64>, [Vector3<f64>; 2]);

/// Dichotomic POVMs `{αI + β·σ, (1−α)I − β·σ}` and free state entries of the
/// detector-inefficiency model. Alice's setting 0 has `β = β₁ẑ`, setting 1
/// `β = β₂ẑ + β₃x̂`; Bob's use `γ`, `δ` in the same way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisyBb84Params {
    pub alpha1: f64,
    pub alpha2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub m_a_y: f64,
    pub m_b_y: f64,
    pub t_xy: f64,
    pub t_yy: f64,
    pub t_zy: f64,
    pub t_yx: f64,
    pub t_yz: f64,
}

/// Bloch vectors `(β_x, β_y, β_z)` of the `+1` elements for settings 0 and 1.
fn plus_vectors(b1: f64, b2: f64, b3: f64) -> [Vector3<f64>; 2] {
    [Vector3::new(0.0, 0.0, b1), Vector3::new(b3, 0.0, b2)]
}

/// Rows `(β_x, β_z)` of the settings, the `xz`-plane part of [`plus_vectors`].
fn plane_rows(b1: f64, b2: f64, b3: f64) -> Result<Matrix2<f64>> {
    if b1.abs() < BETA_GUARD || b3.abs() < BETA_GUARD {
        return Err(Error::Domain(format!(
            "POVM Bloch components {b1:e}, {b3:e} below guard {BETA_GUARD:e}"
        )));
    }
    Ok(Matrix2::new(0.0, b1, b3, b2))
}

impl NoisyBb84Params {
    /// Ideal `σz`, `σx` measurements followed by a detector of efficiency `eps`
    /// whose no-click is read as `+1`, on both sides, with the Werner entries
    /// `T_yy = −w`.
    pub fn honest(w: f64, eps: f64) -> Self {
        let (a, b) = (1.0 - 0.5 * eps, 0.5 * eps);
        Self {
            alpha1: a,
            alpha2: a,
            gamma1: a,
            gamma2: a,
            beta1: b,
            beta2: 0.0,
            beta3: b,
            delta1: b,
            delta2: 0.0,
            delta3: b,
            m_a_y: 0.0,
            m_b_y: 0.0,
            t_xy: 0.0,
            t_yy: -w,
            t_zy: 0.0,
            t_yx: 0.0,
            t_yz: 0.0,
        }
    }

    /// Reads an attack on the binarized table in these coordinates, after
    /// rotating each party so that its setting-0 vector lies along `z` and its
    /// setting-1 vector in the `xz` half-plane with `x > 0`.
    pub fn from_model(model: &Model) -> Result<Self> {
        if model.povms_a.len() != 2 || model.povms_b.len() != 2 {
            return Err(Error::Domain("expected two settings per party".into()));
        }
        let plus = |povms: &[Povm]| -> Result<PartyFrame> {
            if povms.iter().any(|p| p.len() != 2) {
                return Err(Error::Domain("expected dichotomic measurements".into()));
            }
            let (a0, v0) = qubit_bloch_parts(&povms[0].elements()[0]);
            let (a1, v1) = qubit_bloch_parts(&povms[1].elements()[0]);
            let ez = v0
                .try_normalize(BETA_GUARD)
                .ok_or_else(|| Error::Domain("setting-0 element has no Bloch component".into()))?;
            let ex = (v1 - ez * v1.dot(&ez))
                .try_normalize(BETA_GUARD)
                .ok_or_else(|| {
                    Error::Domain("setting-1 element is parallel to setting 0".into())
                })?;
            let rot: Matrix3<f64> =
                Matrix3::from_rows(&[ex.transpose(), ez.cross(&ex).transpose(), ez.transpose()]);
            Ok(([a0, a1], rot, [rot * v0, rot * v1]))
        };
        let (alpha, ra, va) = plus(&model.povms_a)?;
        let (gamma, rb, vb) = plus(&model.povms_b)?;
        let m_a = ra * model.state.m_a;
        let m_b = rb * model.state.m_b;
        let t = ra * model.state.t * rb.transpose();
        Ok(Self {
            alpha1: alpha[0],
            alpha2: alpha[1],
            gamma1: gamma[0],
            gamma2: gamma[1],
            beta1: va[0].z,
            beta2: va[1].z,
            beta3: va[1].x,
            delta1: vb[0].z,
            delta2: vb[1].z,
            delta3: vb[1].x,
            m_a_y: m_a.y,
            m_b_y: m_b.y,
            t_xy: t[(0, 1)],
            t_yy: t[(1, 1)],
            t_zy: t[(2, 1)],
            t_yx: t[(1, 0)],
            t_yz: t[(1, 2)],
        })
    }

    fn party_povms(alphas: [f64; 2], plus: [Vector3<f64>; 2]) -> Result<Vec<Povm>> {
        alphas
            .iter()
            .zip(plus)
            .map(|(&a, v)| {
                Povm::new(vec![
                    affine_qubit_operator(a, &v),
                    affine_qubit_operator(1.0 - a, &(-v)),
                ])
            })
            .collect()
    }

    /// Both parties' POVMs, outcome order `[+1, −1]`; fails if an element is not positive.
    pub fn povms(&self) -> Result<(Vec<Povm>, Vec<Povm>)> {
        Ok((
            Self::party_povms(
                [self.alpha1, self.alpha2],
                plus_vectors(self.beta1, self.beta2, self.beta3),
            )?,
            Self::party_povms(
                [self.gamma1, self.gamma2],
                plus_vectors(self.delta1, self.delta2, self.delta3),
            )?,
        ))
    }

    /// Solves the marginal and correlation conditions of the binarized table
    /// `p` (labels `[+1, −1]`) for `m_A(x), m_A(z), m_B(x), m_B(z)` and the `xz`
    /// block of `T`, and completes the state with the free entries.
    pub fn state(&self, p: &ProbTable) -> Result<TwoQubitState> {
        if p.nx() != 2 || p.ny() != 2 || p.ka() != 2 || p.kb() != 2 {
            return Err(Error::Domain(
                "expected a two-setting, two-outcome table".into(),
            ));
        }
        let ra = plane_rows(self.beta1, self.beta2, self.beta3)?;
        let rb = plane_rows(self.delta1, self.delta2, self.delta3)?;
        let alphas = [self.alpha1, self.alpha2];
        let gammas = [self.gamma1, self.gamma2];
        let singular = || Error::Domain("POVM Bloch vectors are parallel".into());
        let ra_inv = ra.try_inverse().ok_or_else(singular)?;
        let rb_inv = rb.try_inverse().ok_or_else(singular)?;

        // p(+|x) = α_x + β_x·m_A and p(+|y) = γ_y + δ_y·m_B.
        let ma = ra_inv * Vector2::from_fn(|x, _| p.marginal_a(x, 0, 0) - alphas[x]);
        let mb = rb_inv * Vector2::from_fn(|y, _| p.marginal_b(0, y, 0) - gammas[y]);

        // p(++|xy) = α_xγ_y + α_x δ_y·m_B + γ_y β_x·m_A + β_xᵀ T δ_y.
        let rhs = Matrix2::from_fn(|x, y| {
            p.get(x, y, 0, 0)
                - alphas[x] * gammas[y]
                - alphas[x] * rb.row(y).dot(&mb.transpose())
                - gammas[y] * ra.row(x).dot(&ma.transpose())
        });
        let block = ra_inv * rhs * rb_inv.transpose();

        let m_a = Vector3::new(ma[0], self.m_a_y, ma[1]);
        let m_b = Vector3::new(mb[0], self.m_b_y, mb[1]);
        let t = Matrix3::new(
            block[(0, 0)],
            self.t_xy,
            block[(0, 1)],
            self.t_yx,
            self.t_yy,
            self.t_yz,
            block[(1, 0)],
            self.t_zy,
            block[(1, 1)],
        );
        let largest = m_a
            .iter()
            .chain(m_b.iter())
            .chain(t.iter())
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        if !(largest <= 1.0 + T_SLACK) {
            return Err(Error::Infeasible(format!(
                "Bloch entry of size {largest} exceeds 1"
            )));
        }
        Ok(TwoQubitState::new(m_a, m_b, t))
    }
}

/// Certified key fraction for BB84 with detectors of efficiency `eps` on both
/// sides, no-click events read as `+1`, and visibility `w`.
///
/// The search runs over all qubit states and dichotomic POVMs reproducing the
/// binarized table, kept on the constraint manifold, and the best attack is
/// also reported in the coordinates of [`NoisyBb84Params`].
pub fn noisy_bb84_keyrate(w: f64, eps: f64, opts: &OptimOptions) -> Result<KeyRateResult> {
    opts.validate()?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("efficiency {eps} outside (0, 1]")));
    }
    let spec = FamilySpec::noisy_bb84_binarized(w, eps, eps);
    spec.validate()?;
    let table = generate(&spec)?;
    let q = qber(&table);
    let h_q = binary_entropy(q);
    let layout = Layout::new(&table);
    let objective = |x: &[f64]| {
        let (pa, _) = layout.povms(x);
        1.0 - h_q - holevo_unchecked(&layout.density(x), &pa[0])
    };
    let cands = run_starts(opts, |i| {
        let mut rng = start_rng(opts.seed, i);
        let out = run_start(&layout, &objective, &mut rng, opts)?;
        let (pa, pb) = layout.povms(&out.q);
        let log = StartLog {
            index: i,
            seed: start_seed(opts.seed, i),
            f: out.value,
            evals: out.evals,
            converged: out.converged,
        };
        key_candidate(&layout.state(&out.q), &pa, &pb, &table, q, log)
    });
    let mut result = assemble_key(cands, opts.residual_tol, q, opts, Some(NO_CLICK_CAVEAT))?;
    result.noisy_params = NoisyBb84Params::from_model(&result.model).ok();
    Ok(result)
}

/// Bisects the efficiency at which the certified key fraction for visibility
/// `w` becomes positive, given `r(lo) ≤ 0 < r(hi)`.
pub fn noisy_threshold(w: f64, lo: f64, hi: f64, tol: f64, opts: &OptimOptions) -> Result<f64> {
    let positive = |eps: f64| noisy_bb84_keyrate(w, eps, opts).map(|r| r.r_raw > 0.0);
    if positive(lo)? || !positive(hi)? {
        return Err(Error::Domain(format!(
            "no sign change of the key fraction on [{lo}, {hi}]"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{phi_plus_vector, pure_density};
    use approx::assert_abs_diff_eq;

    fn sigma_z_key() -> Povm {
        Povm::projective(&Vector3::z())
    }

    #[test]
    fn holevo_examples() {
        let phi = pure_density(&phi_plus_vector());
        assert_abs_diff_eq!(holevo(&phi, &sigma_z_key()).unwrap(), 0.0, epsilon = 1e-10);
        let mixed = Mat4::identity() * C64::new(0.25, 0.0);
        assert_abs_diff_eq!(
            holevo(&mixed, &sigma_z_key()).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn reference_rates_examples() {
        let r = reference_rates(0.0).unwrap();
        assert_abs_diff_eq!(r.r_bb84, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.r_sixstate, 1.0, epsilon = 1e-15);
        let r = reference_rates(0.05).unwrap();
        assert!(r.r_sixstate > r.r_bb84);
        assert!(reference_rates(0.6).is_err());
    }

    #[test]
    fn honest_noisy_params_reproduce_binarized_table() {
        let (w, eps) = (0.9, 0.7);
        let table = generate(&FamilySpec::noisy_bb84_binarized(w, eps, eps)).unwrap();
        let params = NoisyBb84Params::honest(w, eps);
        let state = params.state(&table).unwrap();
        assert_abs_diff_eq!(
            state.t,
            Matrix3::from_diagonal(&Vector3::new(w, -w, w)),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(state.m_a.norm(), 0.0, epsilon = 1e-12);
        let (pa, pb) = params.povms().unwrap();
        let model = Model {
            state,
            povms_a: pa,
            povms_b: pb,
        };
        assert!(model.residual(&table).unwrap() <= 1e-12);
    }

    #[test]
    fn attack_coordinates_round_trip() {
        let (w, eps) = (0.8, 0.6);
        let table = generate(&FamilySpec::noisy_bb84_binarized(w, eps, eps)).unwrap();
        let params = NoisyBb84Params::honest(w, eps);
        let (pa, pb) = params.povms().unwrap();
        let model = Model {
            state: params.state(&table).unwrap(),
            povms_a: pa,
            povms_b: pb,
        };
        let back = NoisyBb84Params::from_model(&model).unwrap();
        assert_abs_diff_eq!(back.beta3, params.beta3, epsilon = 1e-12);
        assert_abs_diff_eq!(back.t_yy, -w, epsilon = 1e-12);
        assert_abs_diff_eq!(back.alpha1, params.alpha1, epsilon = 1e-12);
    }

    #[test]
    fn sixstate_attack_reproduces_statistics() {
        for w in [0.7, 0.9] {
            let model = sixstate_attack(w).unwrap();
            let table = generate(&FamilySpec::six_state(w)).unwrap();
            assert!(model.residual(&table).unwrap() <= 1e-12);
            let q = (1.0 - w) / 2.0;
            let r = key_fraction(&model, q).unwrap();
            assert_abs_diff_eq!(r, 1.0 - 2.0 * binary_entropy(q), epsilon = 1e-9);
        }
    }

    #[test]
    fn guard_rejects_vanishing_bloch_components() {
        let table = generate(&FamilySpec::noisy_bb84_binarized(0.9, 0.9, 0.9)).unwrap();
        let mut p = NoisyBb84Params::honest(0.9, 0.9);
        p.beta3 = 0.0;
        assert!(matches!(p.state(&table), Err(Error::Domain(_))));
    }
}
