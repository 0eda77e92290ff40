//! Monte-Carlo harness: empirical tails, Laplace transforms and expectations of
//! `λ_max(Σ X_i)`, each set against the corresponding bound.
//!
//! Trial `k` of a run with seed `s` draws from its own ChaCha stream `(s, k)`,
//! so results do not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{expectation_bound, tail_bound_certified, BernsteinInputs};
use crate::error::{invalid, Error, Result};
use crate::models::{variance_proxy, Model, ModelSpec, VarianceMethod, VarianceSource};
use crate::spectral::trace_exp;
use crate::stats::{clopper_pearson, mean_and_stderr, Estimate};

/// Minimum number of trials for a tail experiment.
pub const MIN_TAIL_TRIALS: usize = 100;
/// Confidence level of the per-point tail intervals.
pub const TAIL_CONFIDENCE: f64 = 0.99;
/// Largest admissible `|t| n M` for [`empirical_laplace`].
pub const LAPLACE_EXPONENT_GUARD: f64 = 50.0;

/// Generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `steps` evenly spaced points from `a` to `b` inclusive.
pub fn linear_grid(a: f64, b: f64, steps: usize) -> Result<Vec<f64>> {
    if !(a.is_finite() && b.is_finite()) || steps == 0 {
        return Err(invalid("grid needs finite endpoints and at least one step"));
    }
    if steps == 1 {
        return Ok(vec![a]);
    }
    if !(b > a) {
        return Err(invalid(format!("grid end {b} must exceed start {a}")));
    }
    let h = (b - a) / (steps - 1) as f64;
    Ok((0..steps).map(|k| if k == steps - 1 { b } else { a + h * k as f64 }).collect())
}

/// λ_max of the partial sum for every trial, in trial order.
pub fn lambda_max_samples(model: &Model, n: usize, trials: usize, seed: u64) -> Vec<f64> {
    (0..trials as u64)
        .into_par_iter()
        .map(|trial| model.sample_sum(n, &mut trial_rng(seed, trial)).lambda_max())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub x: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub x: f64,
    pub certified_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub model: String,
    pub spec: ModelSpec,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub inputs: BernsteinInputs,
    pub variance_source: VarianceSource,
    pub lambda_max_samples: Vec<f64>,
    pub tail_grid: Vec<TailPoint>,
    pub mean_lambda_max: Estimate,
    pub bound_curve: Vec<BoundPoint>,
}

/// Grid point where the certified bound is below one yet under the lower
/// confidence limit of the empirical tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceViolation {
    pub x: f64,
    pub ci_low: f64,
    pub certified_bound: f64,
}

impl TrialReport {
    pub fn dominance_violations(&self) -> Vec<DominanceViolation> {
        self.tail_grid
            .iter()
            .zip(&self.bound_curve)
            .filter(|(tail, bound)| bound.certified_bound < 1.0 && tail.ci_low > bound.certified_bound)
            .map(|(tail, bound)| DominanceViolation { x: tail.x, ci_low: tail.ci_low, certified_bound: bound.certified_bound })
            .collect()
    }
}

/// Bound inputs `(n, d, M, v, c)` for a model, with the provenance of `v`.
pub fn bernstein_inputs(
    model: &Model,
    n: usize,
    variance: VarianceMethod,
    seed: u64,
) -> Result<(BernsteinInputs, VarianceSource)> {
    let (v2, source) = variance_proxy(model, n, variance, seed)?;
    let inputs = BernsteinInputs::new(n, model.dim(), model.lambda_max_bound(), v2.max(0.0).sqrt(), model.mixing_rate()?)?;
    Ok((inputs, source))
}

fn check_grid(x_grid: &[f64]) -> Result<()> {
    if x_grid.is_empty() {
        return Err(invalid("x grid is empty"));
    }
    if x_grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("x grid values must be finite and nonnegative"));
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("x grid must be strictly increasing"));
    }
    Ok(())
}

/// Runs `trials` independent paths with the default variance route.
pub fn run_tail_experiment(model: &Model, n: usize, trials: usize, x_grid: &[f64], seed: u64) -> Result<TrialReport> {
    run_tail_experiment_with(model, n, trials, x_grid, seed, VarianceMethod::Auto)
}

pub fn run_tail_experiment_with(
    model: &Model,
    n: usize,
    trials: usize,
    x_grid: &[f64],
    seed: u64,
    variance: VarianceMethod,
) -> Result<TrialReport> {
    if trials < MIN_TAIL_TRIALS {
        return Err(invalid(format!("tail experiments need at least {MIN_TAIL_TRIALS} trials, got {trials}")));
    }
    check_grid(x_grid)?;
    let (inputs, variance_source) = bernstein_inputs(model, n, variance, seed)?;
    let samples = lambda_max_samples(model, n, trials, seed);

    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - TAIL_CONFIDENCE;
    let tail_grid = x_grid
        .iter()
        .map(|&x| {
            let below = sorted.partition_point(|&s| s < x);
            let hits = (trials - below) as u64;
            let (ci_low, ci_high) = clopper_pearson(hits, trials as u64, alpha);
            TailPoint { x, p_hat: hits as f64 / trials as f64, ci_low, ci_high }
        })
        .collect();
    let bound_curve = x_grid
        .iter()
        .map(|&x| Ok(BoundPoint { x, certified_bound: tail_bound_certified(x, &inputs)?.bound }))
        .collect::<Result<Vec<_>>>()?;

    Ok(TrialReport {
        model: model.digest(),
        spec: model.spec().clone(),
        n,
        trials,
        seed,
        inputs,
        variance_source,
        mean_lambda_max: mean_and_stderr(&samples),
        lambda_max_samples: samples,
        tail_grid,
        bound_curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplacePoint {
    pub t: f64,
    pub mc_estimate: f64,
    pub std_err: f64,
    /// `log(mc_estimate)` and its delta-method standard error.
    pub log_estimate: f64,
    pub log_std_err: f64,
}

/// Monte-Carlo estimate of `E Tr exp(t Σ X_i)` on a grid of `t`.
pub fn empirical_laplace(model: &Model, n: usize, t_grid: &[f64], trials: usize, seed: u64) -> Result<Vec<LaplacePoint>> {
    if trials < 2 {
        return Err(invalid("at least two trials are needed for a standard error"));
    }
    let m = model.lambda_max_bound();
    for &t in t_grid {
        if !t.is_finite() {
            return Err(invalid("t grid values must be finite"));
        }
        if t.abs() * n as f64 * m > LAPLACE_EXPONENT_GUARD {
            return Err(Error::OutOfDomain {
                constraint: format!("|t| n M = {} exceeds {LAPLACE_EXPONENT_GUARD}", t.abs() * n as f64 * m),
            });
        }
    }
    let sums: Vec<_> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| model.sample_sum(n, &mut trial_rng(seed, trial)))
        .collect();
    t_grid
        .iter()
        .map(|&t| {
            let values = sums.iter().map(|s| trace_exp(t, s).map(|te| te.value)).collect::<Result<Vec<_>>>()?;
            let Estimate { value, stderr } = mean_and_stderr(&values);
            Ok(LaplacePoint { t, mc_estimate: value, std_err: stderr, log_estimate: value.ln(), log_std_err: stderr / value })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    pub mean_lambda_max: Estimate,
    pub bound: f64,
    pub inputs: BernsteinInputs,
    pub variance_source: VarianceSource,
}

impl ExpectationReport {
    /// `mean <= bound + 3 stderr`.
    pub fn holds(&self) -> bool {
        self.mean_lambda_max.value <= self.bound + 3.0 * self.mean_lambda_max.stderr
    }
}

/// Monte-Carlo mean of `λ_max(Σ X_i)` next to the expectation bound.
pub fn run_expectation_experiment(model: &Model, n: usize, trials: usize, seed: u64) -> Result<ExpectationReport> {
    if model.dim() < 2 {
        return Err(invalid("the expectation bound degenerates for d = 1"));
    }
    if trials < 2 {
        return Err(invalid("at least two trials are needed for a standard error"));
    }
    let (inputs, variance_source) = bernstein_inputs(model, n, VarianceMethod::Auto, seed)?;
    let samples = lambda_max_samples(model, n, trials, seed);
    Ok(ExpectationReport {
        mean_lambda_max: mean_and_stderr(&samples),
        bound: expectation_bound(&inputs),
        inputs,
        variance_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{shipped_model, ContractionSpec, IidSpec, YLaw};
    use crate::mixing::MarkovChain;
    use crate::spectral::SymMatrix;

    fn shipped(name: &str) -> Model {
        Model::new(shipped_model(name).unwrap()).unwrap()
    }

    #[test]
    fn streams_are_independent_of_order() {
        use rand::Rng;
        let a: u64 = trial_rng(7, 3).random();
        let _: u64 = trial_rng(7, 2).random();
        assert_eq!(a, trial_rng(7, 3).random::<u64>());
        assert_ne!(a, trial_rng(7, 4).random::<u64>());
    }

    #[test]
    fn grid_construction() {
        assert_eq!(linear_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(linear_grid(2.0, 2.0, 1).unwrap(), vec![2.0]);
        assert!(linear_grid(1.0, 0.0, 4).is_err());
        assert!(linear_grid(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn tail_report_shape_and_ceiling() {
        let model = shipped("contraction");
        let n = 16;
        let grid = vec![0.0, 2.0, 4.0, n as f64 + 1.0];
        let report = run_tail_experiment(&model, n, 200, &grid, 5).unwrap();
        assert_eq!(report.lambda_max_samples.len(), 200);
        let last = report.tail_grid.last().unwrap();
        assert_eq!(last.p_hat, 0.0);
        assert_eq!(report.bound_curve[0].certified_bound, 4.0);
        for w in report.tail_grid.windows(2) {
            assert!(w[1].p_hat <= w[0].p_hat);
        }
        for p in &report.tail_grid {
            assert!(p.ci_low <= p.p_hat && p.p_hat <= p.ci_high);
        }
        assert!(report.dominance_violations().is_empty());
        assert!(run_tail_experiment(&model, n, 50, &grid, 5).is_err());
        assert!(run_tail_experiment(&model, n, 200, &[1.0, 0.5], 5).is_err());
    }

    #[test]
    fn laplace_at_zero_is_dimension() {
        let model = shipped("iid");
        let pts = empirical_laplace(&model, 4, &[0.0], 50, 1).unwrap();
        assert_eq!((pts[0].mc_estimate, pts[0].std_err), (2.0, 0.0));
        assert!(empirical_laplace(&model, 100, &[1.0], 50, 1).is_err());
    }

    #[test]
    fn laplace_two_point_law() {
        // one summand ±diag(1, -1/2): E Tr e^{tY} = e^t + e^{-t} + e^{t/2} + e^{-t/2} over 2
        let law = YLaw::SignFlip { matrix: SymMatrix::from_diag(&[1.0, -0.5]) };
        let model = Model::new(ModelSpec::IidBaseline(IidSpec { d: 2, y_law: Some(law), m: 1.0 })).unwrap();
        let t = 0.8f64;
        let exact = t.cosh() + (t / 2.0).cosh();
        let pts = empirical_laplace(&model, 1, &[t], 20_000, 9).unwrap();
        assert!((pts[0].mc_estimate - exact).abs() <= 3.0 * pts[0].std_err);
    }

    #[test]
    fn zero_model_expectation() {
        let spec = ModelSpec::Contraction(ContractionSpec {
            d: 2,
            chain: MarkovChain::two_state(0.25, 0.25).unwrap(),
            tau_map: vec![0.0, 0.0],
            y_law: None,
            m: 1.0,
        });
        let report = run_expectation_experiment(&Model::new(spec).unwrap(), 8, 20, 3).unwrap();
        assert_eq!(report.mean_lambda_max.value, 0.0);
        assert!(report.holds());
    }
}
