//! Closed-form log-Laplace, tail and expectation bounds for sums of
//! geometrically β-mixing self-adjoint matrices.
//!
//! The headline quantity is [`tail_bound_certified`]: the Chernoff bound
//! `inf_t exp(-t x + γ_n(t))` optimized numerically over the admissible range
//! of `t`, which carries no unknown universal constant.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::cantor::full_decomposition;
use crate::error::{invalid, Error, Result};

/// Parameters shared by every bound: sample count, dimension, a.s. bound on
/// `λ_max(X_i)`, variance proxy `v` (not `v²`) and geometric mixing rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinInputs {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub v: f64,
    pub c: f64,
}

impl BernsteinInputs {
    pub fn new(n: usize, d: usize, m: f64, v: f64, c: f64) -> Result<Self> {
        let inputs = Self { n, d, m, v, c };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if self.d < 1 {
            return Err(invalid("d must be at least 1"));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(invalid(format!("M must be positive and finite, got {}", self.m)));
        }
        if !(self.v.is_finite() && self.v >= 0.0) {
            return Err(invalid(format!("v must be nonnegative and finite, got {}", self.v)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(invalid(format!("c must be positive and finite, got {}", self.c)));
        }
        Ok(())
    }

    fn log_d(&self) -> f64 {
        (self.d as f64).ln()
    }
}

const G_SERIES_CUTOFF: f64 = 1e-4;

/// `g(x) = (e^x - x - 1) / x²`, switching to its Taylor series near zero.
pub fn g(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("g needs x > 0, got {x}")));
    }
    if x <= G_SERIES_CUTOFF {
        return Ok(0.5 + x / 6.0 + x * x / 24.0);
    }
    Ok((x.exp_m1() - x) / (x * x))
}

/// Log of the independent-summand bound `d exp(t² g(tB) λ_max(Σ E U_k²))`.
pub fn tropp_log_laplace(t: f64, b: f64, variance_stat: f64, d: usize) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("B must be positive, got {b}")));
    }
    if !(variance_stat >= 0.0 && variance_stat.is_finite()) {
        return Err(invalid(format!("variance statistic must be nonnegative, got {variance_stat}")));
    }
    Ok((d as f64).ln() + t * t * g(t * b)? * variance_stat)
}

/// A log-Laplace budget `(σt)² / (1 - κt)` valid for `t < 1/κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaKappaPair {
    pub sigma: f64,
    pub kappa: f64,
}

impl SigmaKappaPair {
    /// `(σt)² / (1 - κt)` on `[0, 1/κ)`, `+∞` beyond.
    pub fn gamma(&self, t: f64) -> f64 {
        let denom = 1.0 - self.kappa * t;
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        (self.sigma * t).powi(2) / denom
    }
}

/// Componentwise sums; the combined budget is valid for `t < 1/Σκ`.
pub fn combine_sigma_kappa(pairs: &[SigmaKappaPair]) -> Result<SigmaKappaPair> {
    if pairs.is_empty() {
        return Err(invalid("need at least one (sigma, kappa) pair"));
    }
    Ok(pairs.iter().fold(SigmaKappaPair { sigma: 0.0, kappa: 0.0 }, |acc, p| SigmaKappaPair {
        sigma: acc.sigma + p.sigma,
        kappa: acc.kappa + p.kappa,
    }))
}

/// Hölder weight `u_t = (σ₀/σ)(1 - κt) + κ₀t` used to merge two budgets.
pub fn split_weight(first: SigmaKappaPair, second: SigmaKappaPair, t: f64) -> f64 {
    let sigma = first.sigma + second.sigma;
    let kappa = first.kappa + second.kappa;
    (first.sigma / sigma) * (1.0 - kappa * t) + first.kappa * t
}

/// `u γ₀(t/u) + (1-u) γ₁(t/(1-u))` at `u = u_t`, which collapses to the
/// combined budget `(σt)² / (1 - κt)`.
pub fn split_bound(first: SigmaKappaPair, second: SigmaKappaPair, t: f64) -> f64 {
    let u = split_weight(first, second, t);
    u * first.gamma(t / u) + (1.0 - u) * second.gamma(t / (1.0 - u))
}

/// `γ(c, n) = log₂ n · max(2, 32 log n / (c log 2))`.
pub fn gamma_cn(c: f64, n: usize) -> f64 {
    let log_n = (n as f64).ln();
    (log_n / LN_2) * f64::max(2.0, 32.0 * log_n / (c * LN_2))
}

/// `h(c, x) = min(1/2, c log 2 / (32 log x))`.
pub fn h(c: f64, x: f64) -> Result<f64> {
    if !(x > 1.0) {
        return Err(invalid(format!("h needs x > 1, got {x}")));
    }
    if !(c > 0.0) {
        return Err(invalid(format!("h needs c > 0, got {c}")));
    }
    Ok(f64::min(0.5, c * LN_2 / (32.0 * x.ln())))
}

/// Log-Laplace bound for the sum over a Cantor-like set carved out of
/// `{1, …, A}`:
/// `log d + 4·3.1 t² A v² + 9 (tM)²/c · exp(-3c / (32 tM))`,
/// valid for `tM <= min(1/2, c log 2 / (32 log A))`.
pub fn prop1_log_laplace(t: f64, a: usize, inputs: &BernsteinInputs) -> Result<f64> {
    inputs.validate()?;
    if a < 2 {
        return Err(invalid(format!("A must be at least 2, got {a}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be nonnegative, got {t}")));
    }
    let tm = t * inputs.m;
    if tm > 0.5 {
        return Err(Error::OutOfDomain { constraint: format!("tM = {tm} exceeds 1/2") });
    }
    let range_cap = inputs.c * LN_2 / (32.0 * (a as f64).ln());
    if tm > range_cap {
        return Err(Error::OutOfDomain {
            constraint: format!("tM = {tm} exceeds c log 2 / (32 log A) = {range_cap}"),
        });
    }
    let variance = 4.0 * 3.1 * t * t * a as f64 * inputs.v * inputs.v;
    let coupling = if tm == 0.0 {
        0.0
    } else {
        9.0 * tm * tm / inputs.c * (-3.0 * inputs.c / (32.0 * tm)).exp()
    };
    Ok(inputs.log_d() + variance + coupling)
}

/// Per-round budgets of the recursive decomposition of `{1, …, n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    /// `(σ_i, κ_i)` for `i < L`, followed by the terminal pair `(v√2, M)`.
    pub pairs: Vec<SigmaKappaPair>,
    pub depth: usize,
    pub sigma_ceiling: f64,
    pub kappa_ceiling: f64,
}

impl Schedule {
    pub fn combined(&self) -> SigmaKappaPair {
        combine_sigma_kappa(&self.pairs).expect("schedule always has a terminal pair")
    }

    /// `Σσ_i <= 15√n v + 2M/√c`.
    pub fn sigma_within_ceiling(&self) -> bool {
        self.combined().sigma <= self.sigma_ceiling
    }

    /// `Σκ_i <= M γ(c, n)`.
    pub fn kappa_within_ceiling(&self) -> bool {
        self.combined().kappa <= self.kappa_ceiling
    }
}

pub fn sigma_kappa_schedule(inputs: &BernsteinInputs) -> Result<Schedule> {
    inputs.validate()?;
    let BernsteinInputs { n, m, v, c, .. } = *inputs;
    let depth = full_decomposition(n)?.depth();
    let nf = n as f64;
    let mut pairs = Vec::with_capacity(depth + 1);
    for i in 0..depth {
        let scale = 2f64.powi(i as i32);
        let size = nf / scale;
        let sigma = 2.0 * size.sqrt() * (2.0 * v + 3f64.sqrt() * scale * m / (nf * c.sqrt()));
        let kappa = m / h(c, size)?;
        pairs.push(SigmaKappaPair { sigma, kappa });
    }
    pairs.push(SigmaKappaPair { sigma: v * 2f64.sqrt(), kappa: m });
    Ok(Schedule {
        pairs,
        depth,
        sigma_ceiling: 15.0 * nf.sqrt() * v + 2.0 * m / c.sqrt(),
        kappa_ceiling: m * gamma_cn(c, n),
    })
}

/// Upper end of the admissible `t` range, `1 / (M γ(c, n))`.
pub fn master_t_limit(inputs: &BernsteinInputs) -> f64 {
    1.0 / (inputs.m * gamma_cn(inputs.c, inputs.n))
}

/// `γ_n(t) = log d + t² n (15v + 2M/√(cn))² / (1 - tMγ(c,n))` for `0 <= tMγ < 1`.
pub fn master_log_laplace(t: f64, inputs: &BernsteinInputs) -> Result<f64> {
    inputs.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be nonnegative, got {t}")));
    }
    let range = t * inputs.m * gamma_cn(inputs.c, inputs.n);
    if range >= 1.0 {
        return Err(Error::OutOfDomain {
            constraint: format!("t M γ(c,n) = {range} must stay below 1"),
        });
    }
    Ok(master_unchecked(t, inputs))
}

fn master_unchecked(t: f64, inputs: &BernsteinInputs) -> f64 {
    let nf = inputs.n as f64;
    let spread = 15.0 * inputs.v + 2.0 * inputs.m / (inputs.c * nf).sqrt();
    let range = t * inputs.m * gamma_cn(inputs.c, inputs.n);
    inputs.log_d() + t * t * nf * spread * spread / (1.0 - range)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedTail {
    pub bound: f64,
    /// Minimizing `t`; 0 when no admissible `t` improves on the trivial bound `d`.
    pub t_star: f64,
}

const GOLDEN_REL_TOL: f64 = 1e-10;

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search until
/// the bracket is narrower than `rel_tol * hi`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let width_tol = rel_tol * hi.abs().max(f64::MIN_POSITIVE);
    while b - a > width_tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// `inf_{0 < t < 1/(Mγ)} exp(-tx + γ_n(t))`, capped at `d`.
pub fn tail_bound_certified(x: f64, inputs: &BernsteinInputs) -> Result<CertifiedTail> {
    inputs.validate()?;
    let d = inputs.d as f64;
    if !(x > 0.0) {
        return Ok(CertifiedTail { bound: d, t_star: 0.0 });
    }
    let hi = (1.0 - 1e-12) * master_t_limit(inputs);
    let phi = |t: f64| -t * x + master_unchecked(t, inputs);
    let (t_star, value) = golden_section_min(phi, 0.0, hi, GOLDEN_REL_TOL);
    if value >= d.ln() {
        return Ok(CertifiedTail { bound: d, t_star: 0.0 });
    }
    Ok(CertifiedTail { bound: value.exp(), t_star })
}

/// `d exp(-C x² / (v² n + M²/c + x M γ(c, n)))` for a caller-supplied `C`.
pub fn theorem1_form(x: f64, inputs: &BernsteinInputs, big_c: f64) -> Result<f64> {
    inputs.validate()?;
    if !(big_c > 0.0 && big_c.is_finite()) {
        return Err(invalid(format!("C must be positive, got {big_c}")));
    }
    let BernsteinInputs { n, m, v, c, .. } = *inputs;
    let denom = v * v * n as f64 + m * m / c + x * m * gamma_cn(c, n);
    Ok(inputs.d as f64 * (-big_c * x * x / denom).exp())
}

/// Largest `C` for which [`theorem1_form`] stays above the certified bound at
/// every grid point. Reported for shape studies, not a proven constant.
pub fn calibrate_theorem1_constant(inputs: &BernsteinInputs, x_grid: &[f64]) -> Result<f64> {
    let BernsteinInputs { n, m, v, c, d } = *inputs;
    let mut best = f64::INFINITY;
    for &x in x_grid.iter().filter(|&&x| x > 0.0) {
        let cert = tail_bound_certified(x, inputs)?.bound;
        let denom = v * v * n as f64 + m * m / c + x * m * gamma_cn(c, n);
        best = best.min(denom * (d as f64 / cert).ln() / (x * x));
    }
    Ok(best)
}

/// `30 v √(n log d) + 4 M √(log d / c) + M γ(c,n) log d`; zero when `d = 1`.
pub fn expectation_bound(inputs: &BernsteinInputs) -> f64 {
    let log_d = inputs.log_d();
    if log_d <= 0.0 {
        return 0.0;
    }
    let BernsteinInputs { n, m, v, c, .. } = *inputs;
    30.0 * v * (n as f64 * log_d).sqrt() + 4.0 * m * (log_d / c).sqrt() + m * gamma_cn(c, n) * log_d
}

/// Tail bound for `Σ τ_k Y_k` using `v² <= M² E(τ₀²)`:
/// `d exp(-C x² / (n M² E(τ₀²) + M² + x M (log n)²))`.
pub fn corollary1_bound(x: f64, n: usize, d: usize, m: f64, etau2: f64, big_c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&etau2) {
        return Err(invalid(format!("E(tau^2) must lie in [0, 1], got {etau2}")));
    }
    if n < 2 || d < 1 || !(m > 0.0) || !(big_c > 0.0) || !(x >= 0.0) {
        return Err(invalid("corollary bound needs n >= 2, d >= 1, M > 0, C > 0, x >= 0"));
    }
    let log_n = (n as f64).ln();
    let denom = n as f64 * m * m * etau2 + m * m + x * m * log_n * log_n;
    Ok(d as f64 * (-big_c * x * x / denom).exp())
}

/// `4 β ‖f‖_∞ ‖g‖_∞`, an upper bound on `|Cov(f, g)|` for bounded variables
/// whose σ-fields have β-coefficient `beta`.
pub fn covariance_mixing_bound(beta: f64, sup_first: f64, sup_second: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    if !(sup_first >= 0.0 && sup_second >= 0.0) {
        return Err(invalid("sup norms must be nonnegative"));
    }
    Ok(4.0 * beta * sup_first * sup_second)
}
