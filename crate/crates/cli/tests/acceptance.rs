//! Acceptance suite: one `criterion N: PASS|FAIL` line per criterion.
//!
//! Runs with the default optimizer settings (100 starts, seed 0) and takes
//! tens of minutes on a single core. `ACCEPTANCE_ONLY=3,6` restricts the run
//! to the listed criteria.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dimcert::certify::{
    certify_constrained, certify_generic, selftest_w1, CertResult, CertStatus, C_TOL,
};
use dimcert::optim::{psd_state_from_factor, start_rng};
use dimcert::qkd::{
    certified_keyrate, key_fraction, noisy_bb84_keyrate, reference_rates, sixstate_attack,
};
use dimcert::qmat::{
    binary_entropy, concurrence, phi_plus_vector, ppt_min_eigenvalue, pure_fidelity, Mat4, C64,
};
use dimcert::stats::{generate, Family, FamilySpec, ProbTable};
use dimcert::witness::{d2_criterion, d3_criterion};
use dimcert::{OptimOptions, TwoQubitState};
use dimcert_cli::{cmd_sweep, Figure};
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

const EQUALITY_TOL: f64 = 0.01;
const RATE_TOL: f64 = 1e-3;
const BOUNDARY_BAND: f64 = 1e-7;
const PER_POINT_BUDGET: Duration = Duration::from_secs(600);

fn bb84_rate(q: f64) -> f64 {
    1.0 - 2.0 * binary_entropy(q)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

/// Constrained results are shared between criteria.
struct Suite {
    opts: OptimOptions,
    constrained: HashMap<(Family, u64), CertResult>,
}

impl Suite {
    fn constrained(&mut self, family: Family, w: f64) -> Result<f64, String> {
        if let Some(r) = self.constrained.get(&(family, w.to_bits())) {
            return Ok(r.bound);
        }
        let r = certify_constrained(family, w, &self.opts).map_err(fail)?;
        let bound = r.bound;
        self.constrained.insert((family, w.to_bits()), r);
        Ok(bound)
    }

    fn generic(&self, spec: FamilySpec, opts: &OptimOptions) -> Result<CertResult, String> {
        certify_generic(&generate(&spec).map_err(fail)?, opts).map_err(fail)
    }

    fn sixstate_equality(&mut self) -> Outcome {
        let mut lines = Vec::new();
        let mut ok = true;
        for w in [0.4, 0.5, 0.6, 0.8, 1.0] {
            let bound = self.constrained(Family::SixState, w)?;
            let oracle = concurrence(&TwoQubitState::werner(w).density()).map_err(fail)?;
            ok &= (bound - oracle).abs() <= EQUALITY_TOL;
            lines.push(format!("W={w}: {bound:.6} vs {oracle:.6}"));
        }
        let third = self.constrained(Family::SixState, 1.0 / 3.0)?;
        ok &= third <= C_TOL;
        lines.push(format!("W=1/3: {third:.2e}"));
        check(ok, lines.join("; "))
    }

    fn bb84_chsh_equality(&mut self) -> Outcome {
        let mut lines = Vec::new();
        let mut ok = true;
        for w in [0.3, 0.5, 0.6, 0.8, 1.0] {
            let bb84 = self.constrained(Family::Bb84, w)?;
            let chsh = self.generic(FamilySpec::chsh(w), &self.opts)?.bound;
            ok &= (bb84 - chsh).abs() <= EQUALITY_TOL;
            if w <= 0.5 + 1e-3 {
                ok &= bb84 == 0.0 && chsh == 0.0;
            }
            if w == 1.0 {
                ok &= (bb84 - 1.0).abs() <= 1e-3 && (chsh - 1.0).abs() <= 1e-3;
            }
            lines.push(format!("W={w}: bb84 {bb84:.6}, chsh {chsh:.6}"));
        }
        check(ok, lines.join("; "))
    }

    fn selftest(&mut self) -> Outcome {
        let mut lines = Vec::new();
        let mut ok = true;
        for family in [Family::Bb84, Family::SixState] {
            let st = selftest_w1(family).map_err(fail)?;
            let fidelity = pure_fidelity(&st.state, &phi_plus_vector());
            let etas_forced =
                !st.forced_etas.is_empty() && st.forced_etas.iter().all(|(_, eta)| *eta == 1.0);
            let self_tested = concurrence(&st.state).map_err(fail)?;
            let bound = self.constrained(family, 1.0)?;
            ok &= fidelity >= 1.0 - 1e-12 && etas_forced && (bound - self_tested).abs() <= 1e-6;
            lines.push(format!(
                "{family}: fidelity {fidelity:.15}, {} etas forced to 1, bound {bound:.9}",
                st.forced_etas.len()
            ));
        }
        check(ok, lines.join("; "))
    }

    fn qkd_equalities(&self) -> Outcome {
        let mut worst = 0.0f64;
        let mut ok = true;
        for q in [0.01, 0.03, 0.05, 0.08, 0.10] {
            let target = bb84_rate(q);
            for family in [Family::Bb84, Family::SixState] {
                let r = certified_keyrate(family, 1.0 - 2.0 * q, &self.opts)
                    .map_err(fail)?
                    .r;
                worst = worst.max((r - target).abs());
            }
            let refs = reference_rates(q).map_err(fail)?;
            ok &= refs.r_sixstate > refs.r_bb84;
        }
        check(
            ok && worst <= RATE_TOL,
            format!("max |r − (1−2h(Q))| = {worst:.2e}; six-state reference above BB84 at every Q"),
        )
    }

    fn detection_loophole(&self) -> Outcome {
        let opts = self.opts.clone().with_starts(200);
        let mut bounds = Vec::new();
        let mut slowest = Duration::ZERO;
        for eps in [0.1, 1.0 / 3.0, 2.0 / 3.0] {
            let t = Instant::now();
            bounds.push(
                self.generic(FamilySpec::noisy_bb84(1.0, eps, eps), &opts)?
                    .bound,
            );
            slowest = slowest.max(t.elapsed());
        }
        let ok = bounds[0] > 0.0
            && bounds[2] > bounds[1]
            && bounds[1] > bounds[0]
            && slowest <= PER_POINT_BUDGET;
        check(
            ok,
            format!(
                "bounds at ε = 0.1, 1/3, 2/3: {:.6}, {:.6}, {:.6}; slowest point {:.0} s",
                bounds[0],
                bounds[1],
                bounds[2],
                slowest.as_secs_f64()
            ),
        )
    }

    fn noisy_threshold(&self) -> Outcome {
        let mut cache: HashMap<u64, (f64, f64)> = HashMap::new();
        let mut rate = |eps: f64| -> Result<(f64, f64), String> {
            if let Some(&v) = cache.get(&eps.to_bits()) {
                return Ok(v);
            }
            let r = noisy_bb84_keyrate(1.0, eps, &self.opts).map_err(fail)?;
            cache.insert(eps.to_bits(), (r.r, r.r_raw));
            Ok((r.r, r.r_raw))
        };
        let (r_low, raw_low) = rate(0.85)?;
        let (r_high, _) = rate(0.95)?;
        let (mut lo, mut hi) = (0.85, 0.90);
        let (_, raw_hi) = rate(hi)?;
        let bracketed = raw_low <= 0.0 && raw_hi > 0.0;
        if bracketed {
            while hi - lo > 0.0125 {
                let mid = 0.5 * (lo + hi);
                if rate(mid)?.1 > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let crossing = 0.5 * (lo + hi);
        let ok = r_low.abs() <= RATE_TOL
            && r_high > RATE_TOL
            && bracketed
            && (0.85..=0.90).contains(&crossing);
        check(
            ok,
            format!("r(0.85) = {r_low:.2e} (raw {raw_low:.4}), r(0.95) = {r_high:.6}, zero crossing ε ≈ {crossing:.4} in [{lo:.4}, {hi:.4}]"),
        )
    }

    fn sic(&self) -> Outcome {
        let grid = [0.0, 0.05, 0.1, FRAC_PI_4];
        let mut results = Vec::new();
        for theta in grid {
            let r = self.generic(FamilySpec::sic(theta), &self.opts)?;
            results.push((theta, r.bound, r.status));
        }
        let separable_below = results
            .iter()
            .take_while(|(_, _, s)| *s == CertStatus::SeparableModelFound)
            .last()
            .map(|&(t, _, _)| t);
        let first_positive = results
            .iter()
            .find(|(_, b, _)| *b > 0.0)
            .map(|&(t, _, _)| t);
        let ok = results[0].1 == 0.0
            && results[grid.len() - 1].1 > 0.0
            && separable_below.is_some_and(|t| t > 0.0);
        let listing: Vec<String> = results
            .iter()
            .map(|(t, b, _)| format!("θ={t:.4}: {b:.6}"))
            .collect();
        check(
            ok,
            format!(
                "{}; θ* in ({:.4}, {:.4}]",
                listing.join(", "),
                separable_below.unwrap_or(f64::NAN),
                first_positive.unwrap_or(f64::NAN)
            ),
        )
    }
}

fn sixstate_attack_criterion() -> Outcome {
    let mut worst_res = 0.0f64;
    let mut worst_rate = 0.0f64;
    for w in [0.7, 0.9] {
        let model = sixstate_attack(w).map_err(fail)?;
        let p = generate(&FamilySpec::six_state(w)).map_err(fail)?;
        worst_res = worst_res.max(model.residual(&p).map_err(fail)?);
        let q = (1.0 - w) / 2.0;
        worst_rate = worst_rate.max((key_fraction(&model, q).map_err(fail)? - bb84_rate(q)).abs());
    }
    check(
        worst_res <= 1e-12 && worst_rate <= 1e-9,
        format!("residual {worst_res:.2e}, |r − (1−2h(Q))| {worst_rate:.2e}"),
    )
}

fn witness_thresholds() -> Outcome {
    let d2 = d2_criterion(&generate(&FamilySpec::chsh(0.5)).map_err(fail)?).map_err(fail)?;
    let d3 =
        d3_criterion(&generate(&FamilySpec::six_state(1.0 / 3.0)).map_err(fail)?).map_err(fail)?;
    let d2_above =
        d2_criterion(&generate(&FamilySpec::chsh(0.5 + 1e-6)).map_err(fail)?).map_err(fail)?;
    let d3_above = d3_criterion(&generate(&FamilySpec::six_state(1.0 / 3.0 + 1e-6)).map_err(fail)?)
        .map_err(fail)?;
    let ok = d2.margin.abs() <= 1e-12
        && d3.margin.abs() <= 1e-12
        && d2_above.certified
        && d3_above.certified;
    check(
        ok,
        format!(
            "d2 margin at W=1/2: {:.1e}; d3 margin at W=1/3: {:.1e}",
            d2.margin, d3.margin
        ),
    )
}

fn random_state(index: usize) -> Mat4 {
    let mut rng = start_rng(0xACCE_55ED, index);
    let rank = 1 + index % 4;
    let factor = Mat4::from_fn(|r, _| {
        if r < rank {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        } else {
            C64::new(0.0, 0.0)
        }
    });
    psd_state_from_factor(&factor).expect("nonzero factor")
}

fn born_defect(p: &ProbTable) -> f64 {
    let mut worst = 0.0f64;
    for x in 0..p.nx() {
        for y in 0..p.ny() {
            let total: f64 = (0..p.ka()).map(|a| p.marginal_a(x, y, a)).sum();
            worst = worst.max((total - 1.0).abs());
            for a in 0..p.ka() {
                worst = worst.max((p.marginal_a(x, y, a) - p.marginal_a(x, 0, a)).abs());
            }
            for b in 0..p.kb() {
                worst = worst.max((p.marginal_b(x, y, b) - p.marginal_b(0, y, b)).abs());
            }
        }
    }
    worst
}

fn oracle_suite() -> Outcome {
    let n = 10_000;
    let mut disagreements = 0usize;
    let mut outside_band = 0usize;
    for i in 0..n {
        let rho = random_state(i);
        let c = concurrence(&rho).map_err(fail)?;
        let lmin = ppt_min_eigenvalue(&rho);
        if (c > 0.0) != (lmin < 0.0) {
            disagreements += 1;
            if c >= BOUNDARY_BAND || lmin.abs() >= BOUNDARY_BAND {
                outside_band += 1;
            }
        }
    }
    let agreement = 1.0 - disagreements as f64 / n as f64;

    let mut specs = Vec::new();
    for w in [0.0, 0.3, 0.5, 0.8, 1.0] {
        specs.extend([
            FamilySpec::chsh(w),
            FamilySpec::bb84(w),
            FamilySpec::six_state(w),
        ]);
        for eps in [0.1, 1.0 / 3.0, 2.0 / 3.0, 1.0] {
            specs.extend([
                FamilySpec::noisy_bb84(w, eps, eps),
                FamilySpec::noisy_bb84_binarized(w, eps, eps),
            ]);
        }
    }
    specs.extend([0.0, 0.1, 0.4, FRAC_PI_4].map(FamilySpec::sic));
    specs.extend(
        [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.3, 0.4)].map(|(u, v)| FamilySpec::chsh_slice(u, v)),
    );
    let mut born = 0.0f64;
    for spec in &specs {
        born = born.max(born_defect(&generate(spec).map_err(fail)?));
    }
    check(
        agreement >= 0.999 && outside_band == 0 && born <= 1e-12,
        format!(
            "agreement {:.4}% ({disagreements} boundary cases, {outside_band} outside the band); Born defect {born:.1e} over {} tables",
            100.0 * agreement,
            specs.len()
        ),
    )
}

fn sweep_determinism() -> Outcome {
    let opts = OptimOptions::default().with_starts(2).with_seed(2024);
    let a = cmd_sweep(Figure::Fig2, 3, &opts).map_err(fail)?;
    let b = cmd_sweep(Figure::Fig2, 3, &opts.with_threads(1)).map_err(fail)?;
    check(
        a == b,
        format!("fig2 CSV: {} bytes, identical = {}", a.len(), a == b),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let selected = |n: usize| only.as_ref().is_none_or(|v| v.contains(&n));
    let mut suite = Suite {
        opts: OptimOptions::default(),
        constrained: HashMap::new(),
    };

    let mut failed = 0;
    for n in 1..=11 {
        if !selected(n) {
            continue;
        }
        let start = Instant::now();
        let outcome = match n {
            1 => suite.sixstate_equality(),
            2 => suite.bb84_chsh_equality(),
            3 => witness_thresholds(),
            4 => suite.selftest(),
            5 => suite.qkd_equalities(),
            6 => sixstate_attack_criterion(),
            7 => suite.detection_loophole(),
            8 => suite.noisy_threshold(),
            9 => suite.sic(),
            10 => oracle_suite(),
            _ => sweep_determinism(),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({secs:.1} s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({secs:.1} s) {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
