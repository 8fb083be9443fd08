//! Multi-start derivative-free minimization and the unconstrained
//! parametrizations of states and POVMs used by the search.
//!
//! Each start `i` draws its initial point from a ChaCha8 stream seeded with
//! `seed ^ i` and runs a bounded Nelder–Mead descent (adaptive coefficients,
//! restarted from the incumbent until a restart stops improving). The result
//! is the minimum over starts with ties broken by the lower start index, so it
//! depends only on `(seed, n_starts)` and never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{qubit_bloch_parts, Mat2, Mat4, Povm, C64};

pub type StartRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    pub n_starts: usize,
    pub seed: u64,
    /// Objective evaluations per start, summed over Nelder–Mead restarts.
    pub max_evals: usize,
    /// Simplex-size convergence tolerance.
    pub xtol: f64,
    /// Function-spread convergence tolerance.
    pub ftol: f64,
    /// Statistics mismatch (∞-norm) accepted by the final feasibility check.
    pub residual_tol: f64,
    /// Weight of the statistics-mismatch penalty.
    pub stat_penalty: f64,
    /// Weight of the positivity penalty.
    pub psd_penalty: f64,
    /// Worker threads; `0` uses the global rayon pool.
    pub threads: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            n_starts: 100,
            seed: 0,
            max_evals: 20_000,
            xtol: 1e-10,
            ftol: 1e-14,
            residual_tol: 1e-6,
            stat_penalty: 1e4,
            psd_penalty: 1e4,
            threads: 0,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = self.n_starts >= 1
            && self.max_evals >= 1
            && self.xtol > 0.0
            && self.ftol > 0.0
            && self.residual_tol > 0.0
            && self.stat_penalty > 0.0
            && self.psd_penalty > 0.0;
        if positive {
            Ok(())
        } else {
            Err(Error::Domain(
                "optimizer options must all be positive".into(),
            ))
        }
    }

    pub fn with_starts(mut self, n: usize) -> Self {
        self.n_starts = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_evals(mut self, n: usize) -> Self {
        self.max_evals = n;
        self
    }

    pub fn with_threads(mut self, n: usize) -> Self {
        self.threads = n;
        self
    }
}

/// A box-bounded objective. Values may be `+∞` for rejected points.
pub trait Objective: Sync {
    fn bounds(&self) -> &[(f64, f64)];

    fn value(&self, x: &[f64]) -> f64;

    fn dim(&self) -> usize {
        self.bounds().len()
    }

    /// Initial point for a start; uniform in the box unless overridden.
    fn initial_point(&self, rng: &mut StartRng) -> Vec<f64> {
        self.bounds()
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..hi) } else { lo })
            .collect()
    }
}

/// Uniform draw in `bounds` if one of `tries` draws is admissible, otherwise
/// the first admissible point on the segment from `anchor` towards a fresh
/// draw, halving the distance each time.
pub fn admissible_start(
    bounds: &[(f64, f64)],
    anchor: &[f64],
    tries: usize,
    rng: &mut StartRng,
    admissible: impl Fn(&[f64]) -> bool,
) -> Vec<f64> {
    let sample = |rng: &mut StartRng| -> Vec<f64> {
        bounds
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..hi) } else { lo })
            .collect()
    };
    for _ in 0..tries {
        let x = sample(rng);
        if admissible(&x) {
            return x;
        }
    }
    let far = sample(rng);
    let mut t = 1.0;
    while t > 1e-12 {
        let x: Vec<f64> = anchor
            .iter()
            .zip(&far)
            .map(|(a, f)| a + t * (f - a))
            .collect();
        if admissible(&x) {
            return x;
        }
        t *= 0.5;
    }
    anchor.to_vec()
}

/// Closure-backed [`Objective`].
pub struct FnObjective<F> {
    pub f: F,
    pub bounds: Vec<(f64, f64)>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartLog {
    pub index: usize,
    pub seed: u64,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub best_start: usize,
    pub per_start: Vec<StartLog>,
}

pub fn start_seed(master: u64, index: usize) -> u64 {
    master ^ index as u64
}

pub fn start_rng(master: u64, index: usize) -> StartRng {
    ChaCha8Rng::seed_from_u64(start_seed(master, index))
}

/// Multi-start minimization of `obj`.
pub fn minimize<O: Objective + ?Sized>(obj: &O, opts: &OptimOptions) -> MinimizeResult {
    let runs = run_starts(opts, |i| {
        let mut rng = start_rng(opts.seed, i);
        let x0 = obj.initial_point(&mut rng);
        local_search(obj, &x0, opts)
    });
    let per_start = runs
        .iter()
        .enumerate()
        .map(|(i, r)| StartLog {
            index: i,
            seed: start_seed(opts.seed, i),
            f: r.f,
            evals: r.evals,
            converged: r.converged,
        })
        .collect();
    let (best_start, best) = runs
        .into_iter()
        .enumerate()
        .fold(None::<(usize, LocalResult)>, |acc, (i, r)| match acc {
            Some((j, b)) if !(r.f < b.f) => Some((j, b)),
            _ => Some((i, r)),
        })
        .expect("n_starts >= 1");
    MinimizeResult {
        x_best: best.x,
        f_best: best.f,
        best_start,
        per_start,
    }
}

/// Runs `job(i)` for every start index, in parallel when configured, and
/// returns results in index order.
pub fn run_starts<T, J>(opts: &OptimOptions, job: J) -> Vec<T>
where
    T: Send,
    J: Fn(usize) -> T + Sync + Send,
{
    let n = opts.n_starts.max(1);
    match opts.threads {
        1 => (0..n).map(&job).collect(),
        0 => (0..n).into_par_iter().map(&job).collect(),
        t => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&job).collect()),
            Err(_) => (0..n).map(&job).collect(),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Nelder–Mead from `x0`, restarted from the incumbent while restarts keep
/// improving and budget remains.
pub fn local_search<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    opts: &OptimOptions,
) -> LocalResult {
    let bounds = obj.bounds();
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let mut f = obj.value(&x);
    let mut evals = 1;
    let mut converged = false;
    let mut scale = 0.1;
    while evals < opts.max_evals {
        let run = nelder_mead(obj, &x, scale, opts.max_evals - evals, opts);
        evals += run.evals;
        let improved = run.f < f - 1e-12 * (1.0 + f.abs());
        if run.f <= f {
            x = run.x;
            f = run.f;
        }
        converged = run.converged;
        if !improved && run.converged {
            break;
        }
        scale = if improved { 0.05 } else { scale * 0.5 };
        if scale < 1e-6 {
            break;
        }
    }
    LocalResult {
        x,
        f,
        evals,
        converged,
    }
}

fn nelder_mead<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    scale: f64,
    budget: usize,
    opts: &OptimOptions,
) -> LocalResult {
    let bounds = obj.bounds();
    let n = x0.len();
    let nf = n.max(1) as f64;
    // Adaptive coefficients for higher dimensions.
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let eval = |x: &[f64]| {
        let v = obj.value(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let mut step = scale * (hi - lo);
        if step == 0.0 {
            step = scale;
        }
        let mut v = x0.to_vec();
        v[i] = if x0[i] + step <= hi {
            x0[i] + step
        } else {
            x0[i] - step
        };
        project(&mut v, bounds);
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    while evals + 2 <= budget {
        order.sort_by(|&i, &j| fv[i].total_cmp(&fv[j]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let size = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = fv[worst] - fv[best];
        if size <= opts.xtol
            || (spread.is_finite() && spread <= opts.ftol && size <= opts.xtol * 1e4)
        {
            converged = true;
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &k in order.iter().take(n) {
            for (c, v) in centroid.iter_mut().zip(&simplex[k]) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= nf);

        for i in 0..n {
            trial[i] = centroid[i] + alpha * (centroid[i] - simplex[worst][i]);
        }
        project(&mut trial, bounds);
        let fr = eval(&trial);
        evals += 1;

        if fr < fv[best] {
            for i in 0..n {
                trial2[i] = centroid[i] + gamma * (trial[i] - centroid[i]);
            }
            project(&mut trial2, bounds);
            let fe = eval(&trial2);
            evals += 1;
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                fv[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                fv[worst] = fr;
            }
            continue;
        }
        if fr < fv[second] {
            simplex[worst].copy_from_slice(&trial);
            fv[worst] = fr;
            continue;
        }
        // Contraction, outside or inside.
        let outside = fr < fv[worst];
        for i in 0..n {
            trial2[i] = if outside {
                centroid[i] + rho * (trial[i] - centroid[i])
            } else {
                centroid[i] + rho * (simplex[worst][i] - centroid[i])
            };
        }
        project(&mut trial2, bounds);
        let fc = eval(&trial2);
        evals += 1;
        let accept = if outside { fc <= fr } else { fc < fv[worst] };
        if accept {
            simplex[worst].copy_from_slice(&trial2);
            fv[worst] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        let anchor = simplex[best].clone();
        for &k in order.iter().skip(1) {
            for i in 0..n {
                simplex[k][i] = anchor[i] + sigma * (simplex[k][i] - anchor[i]);
            }
            fv[k] = eval(&simplex[k]);
            evals += 1;
        }
    }

    let best = (0..=n).min_by(|&i, &j| fv[i].total_cmp(&fv[j])).unwrap();
    LocalResult {
        x: simplex[best].clone(),
        f: fv[best],
        evals,
        converged,
    }
}

/// `F†F / Tr(F†F)`: positive semidefinite with unit trace for any nonzero `F`.
pub fn psd_state_from_factor(factor: &Mat4) -> Result<Mat4> {
    let g = factor.adjoint() * factor;
    let tr = g.trace().re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Domain(
            "state factor must be nonzero and finite".into(),
        ));
    }
    Ok(g * C64::new(1.0 / tr, 0.0))
}

/// Largest admissible condition number of the element sum in
/// [`povm_from_factors`].
pub const MAX_POVM_CONDITION: f64 = 1e8;

/// `S^{-1/2} F_a†F_a S^{-1/2}` with `S = Σ F_a†F_a`.
pub fn povm_from_factors(factors: &[Mat2]) -> Result<Povm> {
    let raw: Vec<Mat2> = factors.iter().map(|f| f.adjoint() * f).collect();
    povm_from_positive_elements(&raw)
}

/// Normalizes positive 2×2 operators into a POVM by congruence with
/// `S^{-1/2}`. Ill-conditioned sums are rejected with [`Error::Infeasible`].
pub fn povm_from_positive_elements(raw: &[Mat2]) -> Result<Povm> {
    if raw.is_empty() {
        return Err(Error::InvalidPovm("no elements".into()));
    }
    let sum = raw.iter().fold(Mat2::zeros(), |acc, e| acc + e);
    let (g, v) = qubit_bloch_parts(&sum);
    let r = v.norm();
    let (hi, lo) = (g + r, g - r);
    if !(lo > 0.0) || !(hi / lo <= MAX_POVM_CONDITION) {
        return Err(Error::Infeasible(format!(
            "POVM element sum is ill-conditioned (eigenvalues {lo:e}, {hi:e})"
        )));
    }
    let inv_sqrt = qubit_function(g, &v, |t| 1.0 / t.sqrt());
    let elements = raw
        .iter()
        .map(|e| {
            let m = inv_sqrt * e * inv_sqrt;
            (m + m.adjoint()) * C64::new(0.5, 0.0)
        })
        .collect();
    Ok(Povm::from_elements_unchecked(elements))
}

/// `f` applied to the Hermitian operator `γ1 + v·σ`.
fn qubit_function(gamma: f64, v: &nalgebra::Vector3<f64>, f: impl Fn(f64) -> f64) -> Mat2 {
    let r = v.norm();
    let (fp, fm) = (f(gamma + r), f(gamma - r));
    let a = 0.5 * (fp + fm);
    if r == 0.0 {
        return Mat2::identity() * C64::new(a, 0.0);
    }
    let b = 0.5 * (fp - fm) / r;
    crate::qmat::affine_qubit_operator(a, &(v * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{min_eigenvalue, Mat4};

    fn opts() -> OptimOptions {
        OptimOptions::default()
            .with_starts(8)
            .with_max_evals(20_000)
            .with_threads(1)
    }

    #[test]
    fn quadratic_bowl_converges() {
        let target = [0.3, -0.7, 1.2, 0.05];
        let obj = FnObjective {
            f: |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum(),
            bounds: vec![(-2.0, 2.0); 4],
        };
        let r = minimize(&obj, &opts());
        assert!(r.f_best <= 1e-12, "{}", r.f_best);
    }

    #[test]
    fn two_basin_function_finds_global_basin() {
        // Local minimum near x = 1.5 (value 0.5), global near x = −1 (value 0).
        let obj = FnObjective {
            f: |x: &[f64]| {
                let a = (x[0] + 1.0).powi(2);
                let b = 0.5 + 4.0 * (x[0] - 1.5).powi(2);
                a.min(b)
            },
            bounds: vec![(-3.0, 3.0)],
        };
        let r = minimize(&obj, &opts().with_starts(32));
        assert!(r.f_best < 1e-12);
        assert!((r.x_best[0] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejected_region_is_avoided() {
        let obj = FnObjective {
            f: |x: &[f64]| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                if r2 > 1.0 {
                    f64::INFINITY
                } else {
                    (x[0] - 2.0).powi(2) + x[1] * x[1]
                }
            },
            bounds: vec![(-3.0, 3.0); 2],
        };
        let r = minimize(&obj, &opts());
        assert!(r.x_best[0].powi(2) + r.x_best[1].powi(2) <= 1.0);
        assert!(r.f_best < 1.0 + 1e-6);
    }

    #[test]
    fn deterministic_and_prefix_monotone() {
        let obj = FnObjective {
            f: |x: &[f64]| (3.0 * x[0]).sin() + (5.0 * x[1]).cos() + 0.1 * x[0] * x[1],
            bounds: vec![(-2.0, 2.0); 2],
        };
        let o = opts().with_max_evals(300);
        let a = minimize(&obj, &o);
        let b = minimize(&obj, &o);
        assert_eq!(a.f_best.to_bits(), b.f_best.to_bits());
        assert_eq!(a.x_best, b.x_best);
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let r = minimize(&obj, &o.clone().with_starts(k));
            assert!(r.f_best <= prev);
            prev = r.f_best;
        }
    }

    #[test]
    fn state_from_factor() {
        let s = psd_state_from_factor(&Mat4::identity()).unwrap();
        assert!((s - Mat4::identity() * C64::new(0.25, 0.0))
            .iter()
            .all(|z| z.norm() < 1e-15));
        let mut f = Mat4::zeros();
        f[(0, 0)] = C64::new(1.0, 0.0);
        let s = psd_state_from_factor(&f).unwrap();
        assert_eq!(s[(0, 0)], C64::new(1.0, 0.0));
        assert!(psd_state_from_factor(&Mat4::zeros()).is_err());
        let g =
            Mat4::from_fn(|r, c| C64::new((r as f64 + 1.3 * c as f64).sin(), (r * c) as f64 * 0.1));
        let s = psd_state_from_factor(&g).unwrap();
        assert!((s.trace().re - 1.0).abs() < 1e-14);
        assert!(min_eigenvalue(&s) > -1e-14);
    }

    #[test]
    fn povm_from_factor_cases() {
        let half = Mat2::identity() * C64::new(0.3, 0.0);
        let p = povm_from_factors(&[half, half]).unwrap();
        for e in p.elements() {
            assert!((e - Mat2::identity() * C64::new(0.5, 0.0))
                .iter()
                .all(|z| z.norm() < 1e-15));
        }
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let p0 = Mat2::new(one, zero, zero, zero);
        let p1 = Mat2::new(zero, zero, zero, one);
        let p = povm_from_factors(&[p0, p1]).unwrap();
        assert_eq!(p.elements()[0], p0);
        assert_eq!(p.elements()[1], p1);
        let tiny = Mat2::new(C64::new(1e-5, 0.0), zero, zero, zero);
        let big = Mat2::new(one, zero, zero, zero);
        assert!(matches!(
            povm_from_factors(&[tiny, big]),
            Err(Error::Infeasible(_))
        ));
    }
}
