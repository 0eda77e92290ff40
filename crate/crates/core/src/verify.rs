//! Property suites run by `depbernstein verify`. Each suite checks a family of
//! invariants on seeded random or exhaustive inputs and records every
//! violation with the property it breaks.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    g, gamma_cn, golden_section_min, sigma_kappa_schedule, split_bound, tail_bound_certified, BernsteinInputs,
    SigmaKappaPair,
};
use crate::cantor::{cantor_set, full_decomposition};
use crate::error::{invalid, Error, Result};
use crate::mc::{linear_grid, run_tail_experiment, trial_rng};
use crate::mixing::{beta_from_joint, beta_k_exact, beta_sequence, berbee_coupling, fit_geometric_rate, JointLaw, MarkovChain};
use crate::models::{shipped_models, Model};
use crate::spectral::{
    check_golden_thompson, check_trace_holder, eig_sym, expm_sym, gerschgorin_bound, trace_exp, weyl_lambda_max_bound,
    SymMatrix,
};
use crate::stats::{chi_square_gof, chi_square_independence};

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Inequalities,
    Cantor,
    Bounds,
    Coupling,
    Dominance,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Inequalities, Suite::Cantor, Suite::Bounds, Suite::Coupling, Suite::Dominance];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Inequalities => "inequalities",
            Suite::Cantor => "cantor",
            Suite::Bounds => "bounds",
            Suite::Coupling => "coupling",
            Suite::Dominance => "dominance",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| invalid(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property: String,
    pub case: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: usize,
    pub violations: Vec<Violation>,
    /// True when the time budget ran out before every case was visited.
    pub budget_exhausted: bool,
    pub elapsed_seconds: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Runner {
    deadline: Instant,
    checks: usize,
    violations: Vec<Violation>,
    exhausted: bool,
}

impl Runner {
    fn out_of_time(&mut self) -> bool {
        if Instant::now() >= self.deadline {
            self.exhausted = true;
        }
        self.exhausted
    }

    fn check(&mut self, ok: bool, property: &str, case: impl FnOnce() -> String, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(Violation { property: property.into(), case: case(), detail: detail() });
        }
    }

    fn fail(&mut self, property: &str, case: String, err: &Error) {
        self.checks += 1;
        self.violations.push(Violation { property: property.into(), case, detail: err.to_string() });
    }
}

/// Runs one suite, stopping early (without failing) once `budget` elapses.
pub fn run_suite(suite: Suite, budget: Duration, seed: u64) -> VerifyReport {
    let start = Instant::now();
    let mut runner = Runner { deadline: start + budget, checks: 0, violations: Vec::new(), exhausted: false };
    match suite {
        Suite::Inequalities => inequalities(&mut runner, seed),
        Suite::Cantor => cantor(&mut runner),
        Suite::Bounds => bounds(&mut runner, seed),
        Suite::Coupling => coupling(&mut runner, seed),
        Suite::Dominance => dominance(&mut runner, seed),
    }
    VerifyReport {
        suite,
        seed,
        checks: runner.checks,
        violations: runner.violations,
        budget_exhausted: runner.exhausted,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Symmetric matrix with independent entries uniform on `[-scale, scale]`.
pub fn random_symmetric<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> SymMatrix {
    let mut entries = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v = rng.random_range(-scale..=scale);
            entries[i * d + j] = v;
            entries[j * d + i] = v;
        }
    }
    SymMatrix::new(d, entries).expect("finite symmetric entries")
}

/// Transition matrix with every entry positive, hence primitive.
pub fn random_chain<R: Rng + ?Sized>(states: usize, rng: &mut R) -> MarkovChain {
    let rows = (0..states)
        .map(|_| {
            let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|r| r / total).collect()
        })
        .collect();
    MarkovChain::new(rows).expect("positive stochastic matrix")
}

const FUZZ_CASES: u64 = 1000;
const HOLDER_EXPONENTS: [f64; 4] = [1.5, 2.0, 3.0, 10.0];

fn inequalities(r: &mut Runner, seed: u64) {
    for case in 0..FUZZ_CASES {
        if r.out_of_time() {
            return;
        }
        let mut rng = trial_rng(seed, case);
        let d = rng.random_range(2..=8);
        let a = random_symmetric(d, 2.0, &mut rng);
        let b = random_symmetric(d, 2.0, &mut rng);
        let label = || format!("case {case}, d = {d}");

        match check_golden_thompson(&a, &b) {
            Ok(gt) => r.check(gt.holds, "golden_thompson: Tr e^(A+B) <= Tr(e^A e^B)", label, || format!("{gt:?}")),
            Err(e) => r.fail("golden_thompson", label(), &e),
        }
        for p in HOLDER_EXPONENTS {
            match check_trace_holder(&a, &b, p) {
                Ok(h) => r.check(h.holds, "trace_holder: |Tr AB| <= |A|_p |B|_q", || format!("{} p = {p}", label()), || {
                    format!("{h:?}")
                }),
                Err(e) => r.fail("trace_holder", label(), &e),
            }
        }

        let len = rng.random_range(1..=16);
        let list: Vec<SymMatrix> = (0..len).map(|_| random_symmetric(d, 2.0, &mut rng)).collect();
        match weyl_lambda_max_bound(&list) {
            Ok(w) => r.check(w.holds(), "weyl: lambda_max(sum) <= sum lambda_max", label, || format!("{w:?}")),
            Err(e) => r.fail("weyl", label(), &e),
        }

        let radius = eig_sym(&a).map(|s| s.spectral_radius()).unwrap_or(f64::NAN);
        let gersh = gerschgorin_bound(&a);
        r.check(gersh >= radius * (1.0 - 1e-9), "gerschgorin: max row sum >= spectral radius", label, || {
            format!("bound {gersh}, radius {radius}")
        });

        let ts = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let values: Vec<f64> = ts.iter().map(|&t| trace_exp(t, &a).map(|te| te.value).unwrap_or(f64::NAN)).collect();
        for w in values.windows(3) {
            let second = w[0] - 2.0 * w[1] + w[2];
            r.check(second >= -1e-8 * (1.0 + w[1].abs()), "trace_exp convex in t", label, || {
                format!("second difference {second}")
            });
        }
        r.check(values[2] == d as f64, "trace_exp(0, A) = d", label, || format!("got {}", values[2]));

        match expm_sym(&a).and_then(|e| eig_sym(&e)) {
            Ok(spec) => r.check(spec.lambda_min > 0.0, "expm_sym positive definite", label, || {
                format!("lambda_min {}", spec.lambda_min)
            }),
            Err(e) => r.fail("expm_sym", label(), &e),
        }
    }
}

const CANTOR_MAX: usize = 5000;

fn cantor(r: &mut Runner) {
    for a in 2..=CANTOR_MAX {
        if r.out_of_time() {
            return;
        }
        match cantor_set(a) {
            Ok(part) => {
                let v = part.violations();
                r.check(v.is_empty(), "cantor construction invariants", || format!("A = {a}"), || v.join("; "));
            }
            Err(e) => r.fail("cantor construction", format!("A = {a}"), &e),
        }
        match full_decomposition(a) {
            Ok(full) => {
                let v = full.violations();
                r.check(v.is_empty(), "recursive decomposition invariants", || format!("n = {a}"), || v.join("; "));
            }
            Err(e) => r.fail("recursive decomposition", format!("n = {a}"), &e),
        }
    }
}

const SCHEDULE_N: [usize; 4] = [4, 16, 256, 4096];
const SCHEDULE_C: [f64; 3] = [0.5, 2.0, 10.0];
const SCHEDULE_VM: [f64; 3] = [0.1, 1.0, 10.0];

fn bounds(r: &mut Runner, seed: u64) {
    let mut prev = g(1e-3).unwrap_or(f64::NAN);
    for k in 2..=20_000 {
        let x = k as f64 * 1e-3;
        let cur = g(x).unwrap_or(f64::NAN);
        r.check(cur > prev, "g strictly increasing on (0, 20]", || format!("x = {x}"), || format!("{prev} -> {cur}"));
        prev = cur;
    }
    let g0 = g(1e-9).unwrap_or(f64::NAN);
    r.check((g0 - 0.5).abs() <= 1e-6, "g(0+) = 1/2", || "x = 1e-9".into(), || format!("{g0}"));

    for &n in &SCHEDULE_N {
        for &c in &SCHEDULE_C {
            for &v in &SCHEDULE_VM {
                for &m in &SCHEDULE_VM {
                    let case = || format!("n = {n}, c = {c}, v = {v}, M = {m}");
                    let sched = BernsteinInputs::new(n, 2, m, v, c).and_then(|i| sigma_kappa_schedule(&i));
                    match sched {
                        Ok(s) => {
                            let total = s.combined();
                            r.check(s.sigma_within_ceiling(), "sum sigma_i <= 15 sqrt(n) v + 2M/sqrt(c)", case, || {
                                format!("{} > {}", total.sigma, s.sigma_ceiling)
                            });
                            r.check(s.kappa_within_ceiling(), "sum kappa_i <= M gamma(c, n)", case, || {
                                format!("{} > {}", total.kappa, s.kappa_ceiling)
                            });
                        }
                        Err(e) => r.fail("schedule", case(), &e),
                    }
                }
            }
        }
    }

    let mut rng = trial_rng(seed, 0);
    for case in 0..1000 {
        let first = SigmaKappaPair { sigma: rng.random_range(0.01..10.0), kappa: rng.random_range(0.01..10.0) };
        let second = SigmaKappaPair { sigma: rng.random_range(0.01..10.0), kappa: rng.random_range(0.01..10.0) };
        let (sigma, kappa) = (first.sigma + second.sigma, first.kappa + second.kappa);
        let t = rng.random_range(0.0..0.999) / kappa;
        let lhs = split_bound(first, second, t);
        let rhs = (sigma * t).powi(2) / (1.0 - kappa * t);
        r.check((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "split identity collapses to (sigma t)^2/(1 - kappa t)", || {
            format!("case {case}")
        }, || format!("{lhs} vs {rhs}"));
    }

    for case in 0..200u64 {
        if r.out_of_time() {
            return;
        }
        let n = rng.random_range(2..5000);
        let d = rng.random_range(1..10);
        let m = rng.random_range(0.1..5.0);
        let v = rng.random_range(0.0..5.0);
        let c = rng.random_range(0.05..5.0);
        let Ok(inputs) = BernsteinInputs::new(n, d, m, v, c) else { continue };
        let label = || format!("case {case}: {inputs:?}");
        let scale = v * (n as f64).sqrt() + m;
        for x in [0.0, 0.5 * scale, scale, 10.0 * scale] {
            match tail_bound_certified(x, &inputs) {
                Ok(t) => r.check(t.bound <= d as f64, "certified tail <= d", label, || format!("x = {x}: {}", t.bound)),
                Err(e) => r.fail("certified tail", label(), &e),
            }
        }
        let far = 1e3 * (v * (n as f64).sqrt() + m * gamma_cn(c, n));
        match tail_bound_certified(far, &inputs) {
            Ok(t) => r.check(t.bound < 1e-6, "certified tail vanishes far out", label, || format!("{}", t.bound)),
            Err(e) => r.fail("certified tail", label(), &e),
        }
        let x = 2.0 * scale;
        if let Ok(t) = tail_bound_certified(x, &inputs) {
            if t.t_star > 0.0 {
                let hi = (1.0 - 1e-12) / (m * gamma_cn(c, n));
                let eps = 1e-6 * hi;
                let phi = |s: f64| {
                    let range = s * m * gamma_cn(c, n);
                    let spread = 15.0 * v + 2.0 * m / (c * n as f64).sqrt();
                    -s * x + (d as f64).ln() + s * s * n as f64 * spread * spread / (1.0 - range)
                };
                let at = phi(t.t_star);
                let ok = [t.t_star - eps, t.t_star + eps]
                    .iter()
                    .filter(|&&s| s > 0.0 && s < hi)
                    .all(|&s| phi(s) >= at - 1e-9 * (1.0 + at.abs()));
                r.check(ok, "certified tail minimizer is optimal", label, || format!("t* = {}", t.t_star));
            }
        }
    }
    let (t, f) = golden_section_min(|t| (t - 0.3).powi(2), 0.0, 1.0, 1e-12);
    r.check((t - 0.3).abs() < 1e-9 && f < 1e-16, "golden section finds quadratic minimum", || "(t - 0.3)^2".into(), || {
        format!("t = {t}")
    });
}

const COUPLING_DRAWS: usize = 100_000;
const CHI_SQUARE_LEVEL: f64 = 1e-3;

fn coupling_case(r: &mut Runner, label: &str, joint: JointLaw, seed: u64) {
    let beta = beta_from_joint(&joint);
    let (rows, cols) = joint.shape();
    let y_marginal = joint.y_marginal();
    let sampler = match berbee_coupling(joint, seed) {
        Ok(s) => s,
        Err(e) => return r.fail("berbee coupling", label.into(), &e),
    };
    let mut mismatches = 0u64;
    let mut ystar_counts = vec![0u64; cols];
    let mut table = vec![0u64; rows * cols];
    for (x, y, ystar) in sampler.take(COUPLING_DRAWS) {
        mismatches += u64::from(y != ystar);
        ystar_counts[ystar] += 1;
        table[x * cols + ystar] += 1;
    }
    let freq = mismatches as f64 / COUPLING_DRAWS as f64;
    let band = 3.0 * (beta * (1.0 - beta) / COUPLING_DRAWS as f64).sqrt() + 1e-12;
    r.check((freq - beta).abs() <= band, "berbee: P(Y != Y*) = beta", || label.into(), || {
        format!("frequency {freq}, beta {beta}")
    });
    let gof = chi_square_gof(&ystar_counts, &y_marginal);
    r.check(gof.p_value >= CHI_SQUARE_LEVEL, "berbee: Y* has the law of Y", || label.into(), || format!("{gof:?}"));
    let ind = chi_square_independence(&table, rows, cols);
    r.check(ind.p_value >= CHI_SQUARE_LEVEL, "berbee: Y* independent of X", || label.into(), || format!("{ind:?}"));
}

fn coupling(r: &mut Runner, seed: u64) {
    let correlated = JointLaw::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).expect("valid joint law");
    coupling_case(r, "correlated uniform binary", correlated, seed);
    let skewed = JointLaw::new(3, 2, vec![0.3, 0.05, 0.1, 0.2, 0.05, 0.3]).expect("valid joint law");
    coupling_case(r, "skewed 3x2 law", skewed, seed.wrapping_add(1));
    let product = JointLaw::product(&[0.2, 0.8], &[0.5, 0.3, 0.2]).expect("valid joint law");
    coupling_case(r, "product law", product, seed.wrapping_add(2));

    for case in 0..200u64 {
        if r.out_of_time() {
            return;
        }
        let mut rng = trial_rng(seed, 1000 + case);
        let states = rng.random_range(2..=6);
        let chain = random_chain(states, &mut rng);
        let label = || format!("chain {case} with {states} states");
        let betas = beta_sequence(&chain, 20);
        r.check(betas.windows(2).all(|w| w[1] <= w[0] + 1e-15), "beta_k nonincreasing", label, || format!("{betas:?}"));
        for k in 1..=6 {
            let exact = beta_k_exact(&chain, k).unwrap_or(f64::NAN);
            let joint = beta_from_joint(&chain.joint_law(k));
            r.check((exact - joint).abs() <= 1e-10, "Markov reduction agrees with joint law of (S_0, S_k)", || {
                format!("{} k = {k}", label())
            }, || format!("{exact} vs {joint}"));
        }
        match fit_geometric_rate(&chain, 20) {
            Ok(c) => {
                let ok = betas.iter().enumerate().all(|(idx, b)| *b <= (-c * idx as f64).exp() * (1.0 + 1e-9));
                r.check(ok, "beta_k <= exp(-c(k-1)) for fitted c", label, || format!("c = {c}"));
            }
            Err(Error::NoValidRate(_)) => {}
            Err(e) => r.fail("rate fit", label(), &e),
        }
    }
}

const DOMINANCE_N: usize = 256;
const DOMINANCE_TRIALS: usize = 10_000;

fn dominance(r: &mut Runner, seed: u64) {
    for spec in shipped_models() {
        if r.out_of_time() {
            return;
        }
        let model = match Model::new(spec) {
            Ok(m) => m,
            Err(e) => return r.fail("shipped model", "config".into(), &e),
        };
        let ceiling = DOMINANCE_N as f64 * model.lambda_max_bound();
        let grid = linear_grid(0.0, ceiling, 41).expect("valid grid");
        match run_tail_experiment(&model, DOMINANCE_N, DOMINANCE_TRIALS, &grid, seed) {
            Ok(report) => {
                let v = report.dominance_violations();
                r.check(v.is_empty(), "certified tail dominates the empirical tail", || model.digest(), || format!("{v:?}"));
            }
            Err(e) => r.fail("tail experiment", model.digest(), &e),
        }
    }
}
