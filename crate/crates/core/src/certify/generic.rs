//! Search over arbitrary qubit states and POVMs reproducing a table.
//!
//! Parametrization, positive by construction:
//! * the state is `ρ = LL†` with `L` lower triangular and `‖L‖ = 1`;
//! * a `k`-outcome POVM is `Π_j = B_j†B_j` with factors `B_j = S_j G_j`,
//!   `G_{j+1} = C_j G_j`, `G_0 = 1` and `B_{k−1} = G_{k−1}`. `S_j` and `C_j`
//!   share an eigenbasis (one direction) and have eigenvalues `sin θ`, `cos θ`,
//!   so completeness holds identically.
//!
//! In Bloch coordinates (`ρ ↔ (m_A, m_B, T)`, `Π ↔ γ1 + v·σ`) every
//! probability is multilinear,
//!
//! `p(a,b|x,y) = γ_a γ_b + γ_b v_a·m_A + γ_a v_b·m_B + v_aᵀ T v_b`,
//!
//! which gives the constraint Jacobian by the chain rule. A vanishing target
//! probability is imposed instead as the support condition `(B_a⊗B_b)L = 0`,
//! whose linearization stays regular.
//!
//! Candidate points are pulled back onto the constraint manifold by
//! Gauss–Newton steps and the simplex search runs in tangent coordinates,
//! re-centred whenever it improves. For certification the objective is the
//! signed concurrence `e₁−e₂−e₃−e₄`, which keeps a slope inside the
//! separable set; other objectives can be plugged into [`run_start`].
//!
//! Local rotations are fixed by putting the eigenbasis of Alice's (and Bob's)
//! first level of setting 0 along `z` and the next one in the `xz` plane.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::optim::{local_search, Objective, OptimOptions, StartRng};
use crate::qmat::{affine_qubit_operator, kron, paulis, Mat2, Mat4, Povm, TwoQubitState, C64};
use crate::stats::ProbTable;

/// Gauss–Newton stops once the largest constraint violation is below this.
const PROJECTION_TOL: f64 = 1e-13;
const PROJECTION_ITERS: usize = 30;
/// Points whose projection ends above this are rejected.
const ACCEPT_TOL: f64 = 1e-11;
/// Singular values of the Jacobian below this (relative) span the tangent space.
const RANK_TOL: f64 = 1e-7;
const LM_ITERS: usize = 500;
/// Residual at which the Levenberg–Marquardt phase hands over to Gauss–Newton.
const LM_HANDOFF: f64 = 1e-6;
/// Target probabilities at or below this are imposed as support conditions.
const ZERO_PROB: f64 = 1e-14;
const FD_STEP: f64 = 1e-7;
const STATE_PARAMS: usize = 16;
const BLOCH_STATE: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Direction {
    /// Eigenbasis along `z`.
    Z,
    /// Eigenbasis in the `xz` plane.
    Xz,
    Free,
}

impl Direction {
    fn params(self) -> usize {
        match self {
            Direction::Z => 2,
            Direction::Xz => 3,
            Direction::Free => 4,
        }
    }

    fn unit(self, p: &[f64]) -> Vector3<f64> {
        match self {
            Direction::Z => Vector3::z(),
            Direction::Xz => Vector3::new(p[2].sin(), 0.0, p[2].cos()),
            Direction::Free => {
                Vector3::new(p[2].sin() * p[3].cos(), p[2].sin() * p[3].sin(), p[2].cos())
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    /// Offset of this POVM's parameters in the search vector.
    offset: usize,
    /// Offset of its Bloch block (first `k−1` elements).
    bloch: usize,
    levels: Vec<Direction>,
}

impl Slot {
    fn n_params(&self) -> usize {
        self.levels.iter().map(|d| d.params()).sum()
    }

    /// Factors `B_j` with `Π_j = B_j†B_j`: `B_j = S_j G_j` and `G_{j+1} = C_j G_j`,
    /// where `S_j`, `C_j` share an eigenbasis and have eigenvalues `sin θ`, `cos θ`.
    /// Completeness telescopes because `S_j² + C_j² = 1`.
    fn factors(&self, q: &[f64]) -> Vec<Mat2> {
        chain(&self.level_pairs(q))
    }

    /// `(S_j, C_j)` for every level.
    fn level_pairs(&self, q: &[f64]) -> Vec<(Mat2, Mat2)> {
        let mut at = self.offset;
        self.levels
            .iter()
            .map(|&dir| {
                let pair = level_pair(dir, &q[at..at + dir.params()]);
                at += dir.params();
                pair
            })
            .collect()
    }

    /// Level index and its first parameter for each parameter of the slot.
    fn param_levels(&self) -> Vec<(usize, usize)> {
        let mut at = self.offset;
        let mut out = Vec::new();
        for (j, dir) in self.levels.iter().enumerate() {
            out.extend(std::iter::repeat_n((j, at), dir.params()));
            at += dir.params();
        }
        out
    }

    fn elements(&self, q: &[f64]) -> Vec<(f64, Vector3<f64>)> {
        self.factors(q)
            .iter()
            .map(|b| bloch_of(&(b.adjoint() * b)))
            .collect()
    }

    fn bloch(&self, q: &[f64], out: &mut [f64]) {
        Self::bloch_from_factors(&self.factors(q)[..self.levels.len()], out);
    }

    /// Bloch coordinates of `B†B` for each factor.
    fn bloch_from_factors(factors: &[Mat2], out: &mut [f64]) {
        for (j, b) in factors.iter().enumerate() {
            let (g, v) = bloch_of(&(b.adjoint() * b));
            out[4 * j] = g;
            out[4 * j + 1..4 * j + 4].copy_from_slice(v.as_slice());
        }
    }
}

/// Rescales the factor entries to unit Frobenius norm, i.e. `Tr ρ = 1`.
fn normalize_state(q: &mut [f64]) {
    let norm = q[..STATE_PARAMS].iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        q[..STATE_PARAMS].iter_mut().for_each(|v| *v /= norm);
    }
}

fn level_pair(dir: Direction, p: &[f64]) -> (Mat2, Mat2) {
    let n = dir.unit(p);
    let (s1, c1) = p[0].sin_cos();
    let (s2, c2) = p[1].sin_cos();
    (
        affine_qubit_operator(0.5 * (s1 + s2), &(n * (0.5 * (s1 - s2)))),
        affine_qubit_operator(0.5 * (c1 + c2), &(n * (0.5 * (c1 - c2)))),
    )
}

fn chain(pairs: &[(Mat2, Mat2)]) -> Vec<Mat2> {
    let mut g = Mat2::identity();
    let mut out = Vec::with_capacity(pairs.len() + 1);
    for (sm, cm) in pairs {
        out.push(sm * g);
        g = cm * g;
    }
    out.push(g);
    out
}

fn bloch_of(m: &Mat2) -> (f64, Vector3<f64>) {
    crate::qmat::qubit_bloch_parts(m)
}

/// `B_a⊗B_b` with the varied factor on the given side.
fn support_matrix(alice: bool, mine: &Mat2, other: &Mat2) -> Mat4 {
    if alice {
        kron(mine, other)
    } else {
        kron(other, mine)
    }
}

fn write_support(r: &mut DVector<f64>, base: usize, k: &Mat4) {
    for row in 0..4 {
        for col in 0..4 {
            let idx = base + 2 * (4 * row + col);
            r[idx] = k[(row, col)].re;
            r[idx + 1] = k[(row, col)].im;
        }
    }
}

/// `σ_i⊗1`, `1⊗σ_j`, `σ_i⊗σ_j` in Bloch-vector order.
fn bloch_operators() -> Vec<Mat4> {
    let s = paulis();
    let id = Mat2::identity();
    let mut ops: Vec<Mat4> = s.iter().map(|p| kron(p, &id)).collect();
    ops.extend(s.iter().map(|p| kron(&id, p)));
    for a in &s {
        for b in &s {
            ops.push(kron(a, b));
        }
    }
    ops
}

/// Lower-triangular factor from the first [`STATE_PARAMS`] entries.
fn factor(q: &[f64]) -> Mat4 {
    let mut l = Mat4::zeros();
    for i in 0..4 {
        l[(i, i)] = C64::new(q[i], 0.0);
    }
    let mut at = 4;
    for i in 1..4 {
        for j in 0..i {
            l[(i, j)] = C64::new(q[at], q[at + 1]);
            at += 2;
        }
    }
    l
}

/// Position of `L[(i, j)]` (real part) in the parameter vector.
fn factor_entries() -> Vec<(usize, usize, usize, bool)> {
    let mut v: Vec<(usize, usize, usize, bool)> = (0..4).map(|i| (i, i, i, false)).collect();
    let mut at = 4;
    for i in 1..4 {
        for j in 0..i {
            v.push((i, j, at, true));
            at += 2;
        }
    }
    v
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    nx: usize,
    ny: usize,
    ka: usize,
    kb: usize,
    slots_a: Vec<Slot>,
    slots_b: Vec<Slot>,
    n_params: usize,
    n_bloch: usize,
    ops: Vec<Mat4>,
    entries: Vec<(usize, usize, usize, bool)>,
    /// Entries `(x, y, a, b)` with vanishing target probability.
    zeros: Vec<(usize, usize, usize, usize)>,
    /// Number of scalar statistics constraints (before the norm row).
    n_scalar: usize,
    target: DVector<f64>,
}

impl Layout {
    pub(crate) fn new(p: &ProbTable) -> Self {
        let (nx, ny, ka, kb) = (p.nx(), p.ny(), p.ka(), p.kb());
        let mut offset = STATE_PARAMS;
        let mut bloch = BLOCH_STATE;
        let mut make = |count: usize, k: usize| -> Vec<Slot> {
            let mut second_fixed = false;
            (0..count)
                .map(|s| {
                    let levels: Vec<Direction> = (0..k - 1)
                        .map(|j| {
                            if s == 0 && j == 0 {
                                Direction::Z
                            } else if !second_fixed
                                && ((s == 1 && j == 0) || (count == 1 && s == 0 && j == 1))
                            {
                                second_fixed = true;
                                Direction::Xz
                            } else {
                                Direction::Free
                            }
                        })
                        .collect();
                    let slot = Slot {
                        offset,
                        bloch,
                        levels,
                    };
                    offset += slot.n_params();
                    bloch += 4 * (k - 1);
                    slot
                })
                .collect()
        };
        let slots_a = make(nx, ka);
        let slots_b = make(ny, kb);
        let mut zeros = Vec::new();
        for x in 0..nx {
            for y in 0..ny {
                for a in 0..ka {
                    for b in 0..kb {
                        if p.get(x, y, a, b) <= ZERO_PROB {
                            zeros.push((x, y, a, b));
                        }
                    }
                }
            }
        }
        let mut this = Self {
            nx,
            ny,
            ka,
            kb,
            slots_a,
            slots_b,
            n_params: offset,
            n_bloch: bloch,
            ops: bloch_operators(),
            entries: factor_entries(),
            zeros,
            n_scalar: 0,
            target: DVector::zeros(0),
        };
        this.target = this.targets(p);
        this.n_scalar = this.target.len();
        this
    }

    fn is_zero(&self, x: usize, y: usize, a: usize, b: usize) -> bool {
        self.zeros.contains(&(x, y, a, b))
    }

    /// Scalar constraints, the norm of `L`, and the support conditions.
    fn n_constraints(&self) -> usize {
        self.n_scalar + 1 + 32 * self.zeros.len()
    }

    /// Scalar targets in the order of [`Layout::bloch_residual`]: nonzero
    /// joint probabilities without the last outcomes, then both marginals.
    fn targets(&self, p: &ProbTable) -> DVector<f64> {
        let mut t = Vec::new();
        for x in 0..self.nx {
            for y in 0..self.ny {
                for a in 0..self.ka - 1 {
                    for b in 0..self.kb - 1 {
                        if !self.is_zero(x, y, a, b) {
                            t.push(p.get(x, y, a, b));
                        }
                    }
                }
            }
        }
        for x in 0..self.nx {
            for a in 0..self.ka - 1 {
                t.push((0..self.ny).map(|y| p.marginal_a(x, y, a)).sum::<f64>() / self.ny as f64);
            }
        }
        for y in 0..self.ny {
            for b in 0..self.kb - 1 {
                t.push((0..self.nx).map(|x| p.marginal_b(x, y, b)).sum::<f64>() / self.nx as f64);
            }
        }
        DVector::from_vec(t)
    }

    pub(crate) fn density(&self, q: &[f64]) -> Mat4 {
        let l = factor(q);
        l * l.adjoint()
    }

    fn bloch(&self, q: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.n_bloch];
        let rho = self.density(q);
        for (k, op) in self.ops.iter().enumerate() {
            b[k] = (rho * op).trace().re;
        }
        for slot in self.slots_a.iter().chain(&self.slots_b) {
            slot.bloch(q, &mut b[slot.bloch..]);
        }
        b
    }

    fn a_off(&self, x: usize, a: usize) -> usize {
        self.slots_a[x].bloch + 4 * a
    }

    fn b_off(&self, y: usize, b: usize) -> usize {
        self.slots_b[y].bloch + 4 * b
    }

    /// Statistics in Bloch coordinates and, optionally, their Jacobian with
    /// respect to the Bloch coordinates.
    fn bloch_residual(&self, b: &[f64], mut jac: Option<&mut DMatrix<f64>>) -> DVector<f64> {
        let elem = |o: usize| (b[o], Vector3::new(b[o + 1], b[o + 2], b[o + 3]));
        let ma = Vector3::new(b[0], b[1], b[2]);
        let mb = Vector3::new(b[3], b[4], b[5]);
        let t = Matrix3::from_row_slice(&b[6..15]);
        let mut r = DVector::zeros(self.n_scalar);
        if let Some(j) = jac.as_deref_mut() {
            j.fill(0.0);
        }
        let mut row = 0;
        for x in 0..self.nx {
            for y in 0..self.ny {
                for a in 0..self.ka - 1 {
                    let oa = self.a_off(x, a);
                    let (ga, va) = elem(oa);
                    let tva = t.transpose() * va;
                    for bo in 0..self.kb - 1 {
                        if self.is_zero(x, y, a, bo) {
                            continue;
                        }
                        let ob = self.b_off(y, bo);
                        let (gb, vb) = elem(ob);
                        let tvb = t * vb;
                        r[row] = ga * gb + gb * va.dot(&ma) + ga * vb.dot(&mb) + va.dot(&tvb);
                        if let Some(j) = jac.as_deref_mut() {
                            j[(row, oa)] += gb + vb.dot(&mb);
                            j[(row, ob)] += ga + va.dot(&ma);
                            for i in 0..3 {
                                j[(row, oa + 1 + i)] += gb * ma[i] + tvb[i];
                                j[(row, ob + 1 + i)] += ga * mb[i] + tva[i];
                                j[(row, i)] += gb * va[i];
                                j[(row, 3 + i)] += ga * vb[i];
                                for k in 0..3 {
                                    j[(row, 6 + 3 * i + k)] += va[i] * vb[k];
                                }
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
        for (alice, count, k, m_off) in [
            (true, self.nx, self.ka, 0usize),
            (false, self.ny, self.kb, 3),
        ] {
            let m_vec = if alice { ma } else { mb };
            for s in 0..count {
                for e in 0..k - 1 {
                    let o = if alice {
                        self.a_off(s, e)
                    } else {
                        self.b_off(s, e)
                    };
                    let (g, v) = elem(o);
                    r[row] = g + v.dot(&m_vec);
                    if let Some(j) = jac.as_deref_mut() {
                        j[(row, o)] += 1.0;
                        for i in 0..3 {
                            j[(row, o + 1 + i)] += m_vec[i];
                            j[(row, m_off + i)] += v[i];
                        }
                    }
                    row += 1;
                }
            }
        }
        r
    }

    /// Residual (model minus target) and optionally its Jacobian in the search coordinates.
    ///
    /// Rows: scalar statistics, `‖L‖² − 1`, then for every vanishing target
    /// probability the 32 real components of `(B_a⊗B_b)L, where Π = B†B`. Requiring that
    /// matrix to vanish is equivalent to `Tr[ρ Π_a⊗Π_b] = 0` but, unlike the
    /// scalar form, has a nondegenerate Jacobian at its solutions.
    fn residual(&self, q: &[f64], jac: Option<&mut DMatrix<f64>>) -> DVector<f64> {
        let b = self.bloch(q);
        let m = self.n_constraints();
        let ns = self.n_scalar;
        let l = factor(q);
        let norm2: f64 = q[..STATE_PARAMS].iter().map(|v| v * v).sum();
        let factors_a: Vec<Vec<Mat2>> = self.slots_a.iter().map(|s| s.factors(q)).collect();
        let factors_b: Vec<Vec<Mat2>> = self.slots_b.iter().map(|s| s.factors(q)).collect();
        let mut r = DVector::zeros(m);
        let mut jb = jac.as_ref().map(|_| DMatrix::zeros(ns, self.n_bloch));
        let scalar = self.bloch_residual(&b, jb.as_mut());
        r.rows_mut(0, ns).copy_from(&(scalar - &self.target));
        r[ns] = norm2 - 1.0;
        for (z, &(x, y, a, bo)) in self.zeros.iter().enumerate() {
            let k = kron(&factors_a[x][a], &factors_b[y][bo]) * l;
            write_support(&mut r, ns + 1 + 32 * z, &k);
        }
        let (Some(jac), Some(jb)) = (jac, jb) else {
            return r;
        };
        jac.fill(0.0);

        // State block: ∂Tr[P LL†]/∂L_ij = 2 Re (L†P)_ji (real part), −2 Im (L†P)_ji (imaginary part).
        let mut ds = DMatrix::zeros(BLOCH_STATE, STATE_PARAMS);
        for (k, op) in self.ops.iter().enumerate() {
            let lp = l.adjoint() * op;
            for &(i, j, at, complex) in &self.entries {
                let z = lp[(j, i)];
                ds[(k, at)] = 2.0 * z.re;
                if complex {
                    ds[(k, at + 1)] = -2.0 * z.im;
                }
            }
        }
        let js = jb.columns(0, BLOCH_STATE) * ds;
        jac.view_mut((0, 0), (ns, STATE_PARAMS)).copy_from(&js);
        for (c, v) in q[..STATE_PARAMS].iter().enumerate() {
            jac[(ns, c)] = 2.0 * v;
        }
        // Support rows are linear in L: ∂K/∂L_ij = M e_i e_jᵀ.
        for (z, &(x, y, a, bo)) in self.zeros.iter().enumerate() {
            let mk = kron(&factors_a[x][a], &factors_b[y][bo]);
            let base = ns + 1 + 32 * z;
            for &(i, j, at, complex) in &self.entries {
                for row in 0..4 {
                    let c = mk[(row, i)];
                    let idx = base + 2 * (4 * row + j);
                    jac[(idx, at)] = c.re;
                    jac[(idx + 1, at)] = c.im;
                    if complex {
                        jac[(idx, at + 1)] = -c.im;
                        jac[(idx + 1, at + 1)] = c.re;
                    }
                }
            }
        }

        // POVM blocks by central differences of the (cheap) element maps.
        let mut qq = q.to_vec();
        for (alice, slots) in [(true, &self.slots_a), (false, &self.slots_b)] {
            for (s, slot) in slots.iter().enumerate() {
                let nb = 4 * slot.levels.len();
                let np = slot.n_params();
                let mut d = DMatrix::zeros(nb, np);
                let (mut plus, mut minus) = (vec![0.0; nb], vec![0.0; nb]);
                let supports: Vec<(usize, usize, Mat2)> = self
                    .zeros
                    .iter()
                    .enumerate()
                    .filter(|(_, &(x, y, _, _))| if alice { x == s } else { y == s })
                    .map(|(z, &(x, y, a, bo))| {
                        let (mine, other) = if alice {
                            (a, factors_b[y][bo])
                        } else {
                            (bo, factors_a[x][a])
                        };
                        (z, mine, other)
                    })
                    .collect();
                let levels = slot.levels.len();
                let pairs = slot.level_pairs(q);
                for (c, &(j, start)) in slot.param_levels().iter().enumerate() {
                    let i = slot.offset + c;
                    let dir = slot.levels[j];
                    let mut perturbed = |delta: f64| {
                        let orig = qq[i];
                        qq[i] = orig + delta;
                        let mut p = pairs.clone();
                        p[j] = level_pair(dir, &qq[start..start + dir.params()]);
                        qq[i] = orig;
                        chain(&p)
                    };
                    let rp = perturbed(FD_STEP);
                    let rm = perturbed(-FD_STEP);
                    Slot::bloch_from_factors(&rp[..levels], &mut plus);
                    Slot::bloch_from_factors(&rm[..levels], &mut minus);
                    for k in 0..nb {
                        d[(k, c)] = (plus[k] - minus[k]) / (2.0 * FD_STEP);
                    }
                    for (z, mine, other) in &supports {
                        let kp = support_matrix(alice, &rp[*mine], other) * l;
                        let km = support_matrix(alice, &rm[*mine], other) * l;
                        let diff = (kp - km) / C64::new(2.0 * FD_STEP, 0.0);
                        let base = ns + 1 + 32 * z;
                        for row in 0..4 {
                            for col in 0..4 {
                                let idx = base + 2 * (4 * row + col);
                                jac[(idx, i)] = diff[(row, col)].re;
                                jac[(idx + 1, i)] = diff[(row, col)].im;
                            }
                        }
                    }
                }
                let block = jb.columns(slot.bloch, nb) * d;
                jac.view_mut((0, slot.offset), (ns, np)).copy_from(&block);
            }
        }
        r
    }

    /// Damped Gauss–Newton step `(JᵀJ + μ)⁻¹Jᵀr`, close to the minimum-norm step.
    fn newton_step(jac: &DMatrix<f64>, r: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
        let jtj = jac.transpose() * jac;
        let scale = 1.0 + jtj.diagonal().amax();
        let mut a = jtj;
        for i in 0..a.nrows() {
            a[(i, i)] += lambda * scale;
        }
        Some(a.cholesky()?.solve(&(jac.transpose() * r)))
    }

    /// Gauss–Newton onto the constraint manifold. Returns the final ∞-norm
    /// residual, or `None` if the iteration broke down.
    pub(crate) fn project(&self, q: &mut [f64]) -> Option<f64> {
        let mut jac = DMatrix::zeros(self.n_constraints(), self.n_params);
        for _ in 0..PROJECTION_ITERS {
            let r = self.residual(q, Some(&mut jac));
            let rn = r.amax();
            if !rn.is_finite() || rn > 1e3 {
                return None;
            }
            if rn <= PROJECTION_TOL {
                return Some(rn);
            }
            let step = Self::newton_step(&jac, &r, 1e-14)?;
            for (v, s) in q.iter_mut().zip(step.iter()) {
                *v -= s;
            }
            normalize_state(q);
        }
        let rn = self.residual(q, None).amax();
        rn.is_finite().then_some(rn)
    }

    /// Levenberg–Marquardt descent on `‖r‖²` followed by [`Layout::project`];
    /// slower but globally convergent, used for starting points.
    pub(crate) fn project_robust(&self, q: &mut [f64]) -> Option<f64> {
        let mut jac = DMatrix::zeros(self.n_constraints(), self.n_params);
        let mut lambda = 1e-3;
        let mut r = self.residual(q, Some(&mut jac));
        let mut cost = r.norm_squared();
        let mut trial = q.to_vec();
        for _ in 0..LM_ITERS {
            if r.amax() <= LM_HANDOFF {
                break;
            }
            let mut improved = false;
            while lambda < 1e12 {
                let Some(step) = Self::newton_step(&jac, &r, lambda) else {
                    lambda *= 10.0;
                    continue;
                };
                for ((t, v), s) in trial.iter_mut().zip(q.iter()).zip(step.iter()) {
                    *t = v - s;
                }
                normalize_state(&mut trial);
                let ct = self.residual(&trial, None).norm_squared();
                if ct < cost {
                    q.copy_from_slice(&trial);
                    lambda = (lambda * 0.3).max(1e-15);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                return None;
            }
            r = self.residual(q, Some(&mut jac));
            cost = r.norm_squared();
        }
        self.project(q)
    }

    /// Orthonormal basis (as columns) of the tangent space at `q`.
    fn tangent_basis(&self, jac: &DMatrix<f64>) -> DMatrix<f64> {
        let sv = jac.singular_values();
        let top = sv.amax();
        let rank = sv.iter().filter(|&&v| v > RANK_TOL * top).count();
        let eig = SymmetricEigen::new(jac.transpose() * jac);
        let mut order: Vec<usize> = (0..self.n_params).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let cols = &order[..self.n_params - rank];
        DMatrix::from_fn(self.n_params, cols.len(), |r, c| {
            eig.eigenvectors[(r, cols[c])]
        })
    }

    /// Concurrence objective: signed concurrence, floored once the state is
    /// clearly separable so the search can stop there.
    pub(crate) fn concurrence_objective(&self, q: &[f64]) -> f64 {
        self.signed_concurrence(q).max(SEPARABLE_FLOOR)
    }

    /// Signed concurrence from the factor: singular values of `Lᵀ(σy⊗σy)L`.
    pub(crate) fn signed_concurrence(&self, q: &[f64]) -> f64 {
        let l = factor(q);
        let yy = kron(&crate::qmat::sigma_y(), &crate::qmat::sigma_y());
        let sv = SVD::new(l.transpose() * yy * l, false, false).singular_values;
        let mut e = [sv[0], sv[1], sv[2], sv[3]];
        e.sort_by(|a, b| b.total_cmp(a));
        e[0] - e[1] - e[2] - e[3]
    }

    pub(crate) fn state(&self, q: &[f64]) -> TwoQubitState {
        TwoQubitState::from_density(&self.density(q))
    }

    pub(crate) fn povms(&self, q: &[f64]) -> (Vec<Povm>, Vec<Povm>) {
        let build = |slots: &[Slot]| -> Vec<Povm> {
            slots
                .iter()
                .map(|slot| {
                    Povm::from_elements_unchecked(
                        slot.elements(q)
                            .iter()
                            .map(|(g, v)| affine_qubit_operator(*g, v))
                            .collect(),
                    )
                })
                .collect()
        };
        (build(&self.slots_a), build(&self.slots_b))
    }

    pub(crate) fn random_point(&self, rng: &mut StartRng) -> Vec<f64> {
        let mut q: Vec<f64> = (0..self.n_params)
            .map(|_| rng.gen_range(0.0..std::f64::consts::PI))
            .collect();
        for v in q.iter_mut().take(STATE_PARAMS) {
            *v = rng.sample(StandardNormal);
        }
        let norm = q[..STATE_PARAMS].iter().map(|v| v * v).sum::<f64>().sqrt();
        q[..STATE_PARAMS].iter_mut().for_each(|v| *v /= norm);
        q
    }
}

/// One chart of the manifold: `u ↦ project(q₀ + N u)`.
struct Chart<'a, F> {
    layout: &'a Layout,
    objective: &'a F,
    base: Vec<f64>,
    basis: DMatrix<f64>,
    bounds: Vec<(f64, f64)>,
    pinv: Option<DMatrix<f64>>,
}

impl<'a, F: Fn(&[f64]) -> f64 + Sync> Chart<'a, F> {
    fn new(layout: &'a Layout, objective: &'a F, base: Vec<f64>, radius: f64) -> Self {
        let mut jac = DMatrix::zeros(layout.n_constraints(), layout.n_params);
        layout.residual(&base, Some(&mut jac));
        let basis = layout.tangent_basis(&jac);
        let svd = SVD::new(jac, true, true);
        let top = svd.singular_values.amax();
        let pinv = svd.pseudo_inverse(RANK_TOL * top).ok();
        Chart {
            layout,
            objective,
            bounds: vec![(-radius, radius); basis.ncols()],
            base,
            basis,
            pinv,
        }
    }

    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn point(&self, u: &[f64]) -> Option<Vec<f64>> {
        let mut q = self.base.clone();
        let step = &self.basis * DVector::from_column_slice(u);
        for (v, s) in q.iter_mut().zip(step.iter()) {
            *v += s;
        }
        // Chord iterations with the base Jacobian, finished by full Gauss–Newton.
        if let Some(pinv) = &self.pinv {
            let mut best = (f64::INFINITY, q.clone());
            for _ in 0..CHORD_ITERS {
                let r = self.layout.residual(&q, None);
                let rn = r.amax();
                if !rn.is_finite() || rn > CHORD_CONTRACTION * best.0 {
                    break;
                }
                best = (rn, q.clone());
                if rn <= PROJECTION_TOL {
                    return Some(q);
                }
                let step = pinv * r;
                for (v, s) in q.iter_mut().zip(step.iter()) {
                    *v -= s;
                }
                normalize_state(&mut q);
            }
            q = best.1;
        }
        let rn = self.layout.project(&mut q)?;
        (rn <= ACCEPT_TOL).then_some(q)
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for Chart<'_, F> {
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.point(u)
            .map_or(f64::INFINITY, |q| (self.objective)(&q))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StartOutcome {
    pub q: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

const CHART_RADIUS: f64 = 0.5;
const CHORD_ITERS: usize = 40;
const CHORD_CONTRACTION: f64 = 0.8;
const SEPARABLE_FLOOR: f64 = -0.05;
const SIGNIFICANT_GAIN: f64 = 1e-9;
const CHART_XTOL: f64 = 1e-7;
const CHART_FTOL: f64 = 1e-12;
const CHART_EVALS_PER_DIM: usize = 100;
const MAX_START_ATTEMPTS: usize = 50;

/// One start of the generic search, minimizing `objective` over the points
/// of `layout` that reproduce the table.
pub(crate) fn run_start<F: Fn(&[f64]) -> f64 + Sync>(
    layout: &Layout,
    objective: &F,
    rng: &mut StartRng,
    opts: &OptimOptions,
) -> Option<StartOutcome> {
    let mut q = (0..MAX_START_ATTEMPTS).find_map(|_| {
        let mut q = layout.random_point(rng);
        let rn = layout.project_robust(&mut q)?;
        (rn <= ACCEPT_TOL).then_some(q)
    })?;
    let mut f = objective(&q);
    let mut evals = 0;
    let mut converged = false;
    let mut radius = CHART_RADIUS;
    while evals < opts.max_evals {
        let chart = Chart::new(layout, objective, q.clone(), radius);
        let dim = chart.dim();
        if dim == 0 {
            converged = true;
            break;
        }
        let sub = OptimOptions {
            max_evals: (opts.max_evals - evals).min(CHART_EVALS_PER_DIM * (dim + 1)),
            xtol: opts.xtol.max(CHART_XTOL),
            ftol: opts.ftol.max(CHART_FTOL),
            ..opts.clone()
        };
        let res = local_search(&chart, &vec![0.0; dim], &sub);
        evals += res.evals;
        let gain = f - res.f;
        if gain > 0.0 {
            if let Some(qn) = chart.point(&res.x) {
                q = qn;
                f = objective(&q);
                if gain > SIGNIFICANT_GAIN {
                    radius = CHART_RADIUS;
                    continue;
                }
            }
        }
        converged = res.converged;
        radius *= 0.25;
        if radius < 1e-6 {
            break;
        }
    }
    Some(StartOutcome {
        q,
        value: f,
        evals,
        converged,
    })
}
