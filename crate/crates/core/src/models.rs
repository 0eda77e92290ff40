//! Chain-driven random matrix models and their exact second-order structure.
//!
//! Three models are provided:
//!
//! * `contraction`: `X_i = τ(S_i) Y_i` with `(S_i)` a stationary chain and
//!   `Y_i` iid centered symmetric matrices independent of the chain.
//! * `block_covariance`: scalars `x_k = f(S_k) - E f(S)` are cut into blocks
//!   `C_i` of length `d` and `X_i = C_i C_iᵀ - E(C_i C_iᵀ)`.
//! * `iid_baseline`: `X_i = Y_i`, no dependence at all.
//!
//! All three are stationary with finitely many states, so the lag moments
//! `G(ℓ) = E(X_0 X_ℓ)` are computed exactly by summing over the chain, and the
//! variance proxy `v² = sup_K λ_max(E(Σ_{i∈K} X_i)²) / |K|` can be evaluated
//! by enumerating subsets.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mixing::{beta_sequence, fit_geometric_rate_from, MarkovChain};
use crate::spectral::SymMatrix;
use crate::stats::Estimate;

/// Number of lags used when fitting the geometric mixing rate of a model.
pub const RATE_FIT_LAGS: usize = 50;
/// Largest `n` accepted by [`v2_bruteforce`].
pub const BRUTEFORCE_MAX_N: usize = 20;

/// Law of the iid symmetric factor `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum YLaw {
    /// `Y = ε D` with `ε` a fair sign.
    SignFlip { matrix: SymMatrix },
    /// `Y = ε Q D Qᵀ` with `Q` Haar-distributed on the orthogonal group.
    RandomRotation { matrix: SymMatrix },
}

impl YLaw {
    /// `D = diag(M, -M, M, …)`, so that `E(Y²) = M² I`.
    pub fn default_for(d: usize, m: f64) -> Self {
        let diag: Vec<f64> = (0..d).map(|k| if k % 2 == 0 { m } else { -m }).collect();
        YLaw::SignFlip { matrix: SymMatrix::from_diag(&diag) }
    }

    fn base(&self) -> &SymMatrix {
        match self {
            YLaw::SignFlip { matrix } | YLaw::RandomRotation { matrix } => matrix,
        }
    }

    /// Exact `E(Y²)`.
    pub fn second_moment(&self) -> SymMatrix {
        match self {
            YLaw::SignFlip { matrix } => matrix.square(),
            YLaw::RandomRotation { matrix } => {
                let d = matrix.dim();
                SymMatrix::identity(d).scale(matrix.square().trace() / d as f64)
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        match self {
            YLaw::SignFlip { matrix } => matrix.scale(sign),
            YLaw::RandomRotation { matrix } => {
                let q = haar_orthogonal(matrix.dim(), rng);
                let rotated = &q * matrix.to_dmatrix() * q.transpose();
                symmetrize(&rotated).scale(sign)
            }
        }
    }
}

fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn symmetrize(m: &DMatrix<f64>) -> SymMatrix {
    let d = m.nrows();
    let entries = (0..d * d).map(|k| 0.5 * (m[(k / d, k % d)] + m[(k % d, k / d)])).collect();
    SymMatrix::new(d, entries).expect("finite symmetric matrix")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionSpec {
    pub d: usize,
    pub chain: MarkovChain,
    /// `τ` per chain state, each in `[-1, 1]`.
    pub tau_map: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_law: Option<YLaw>,
    /// Bound on the spectrum of `Y`, hence on `λ_max(X_i)`.
    #[serde(rename = "M")]
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockCovarianceSpec {
    pub d: usize,
    pub chain: MarkovChain,
    /// Scalar value emitted in each chain state, before centering.
    pub value_map: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidSpec {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_law: Option<YLaw>,
    #[serde(rename = "M")]
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Contraction(ContractionSpec),
    BlockCovariance(BlockCovarianceSpec),
    IidBaseline(IidSpec),
}

/// A validated model ready for simulation and exact moment computations.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    kind: ModelKind,
}

#[derive(Debug, Clone)]
enum ModelKind {
    Contraction { chain: MarkovChain, tau: Vec<f64>, y_law: YLaw, m: f64 },
    Block { chain: MarkovChain, centered: Vec<f64>, d: usize, block_cov: SymMatrix, m: f64 },
    Iid { y_law: YLaw, m: f64 },
}

fn check_y_law(y_law: &YLaw, d: usize, m: f64) -> Result<()> {
    let base = y_law.base();
    if base.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: base.dim() });
    }
    let spectrum = crate::spectral::eig_sym(base)?;
    if spectrum.spectral_radius() > m * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "Y law has spectral radius {} above M = {m}",
            spectrum.spectral_radius()
        )));
    }
    Ok(())
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let kind = match &spec {
            ModelSpec::Contraction(s) => {
                if s.d == 0 || !(s.m > 0.0 && s.m.is_finite()) {
                    return Err(invalid("contraction model needs d >= 1 and M > 0"));
                }
                if s.tau_map.len() != s.chain.states() {
                    return Err(invalid("tau_map must give one value per chain state"));
                }
                if s.tau_map.iter().any(|t| !(t.abs() <= 1.0)) {
                    return Err(invalid("tau_map values must lie in [-1, 1]"));
                }
                let y_law = s.y_law.clone().unwrap_or_else(|| YLaw::default_for(s.d, s.m));
                check_y_law(&y_law, s.d, s.m)?;
                ModelKind::Contraction { chain: s.chain.clone(), tau: s.tau_map.clone(), y_law, m: s.m }
            }
            ModelSpec::BlockCovariance(s) => {
                if s.d == 0 {
                    return Err(invalid("block model needs d >= 1"));
                }
                if s.value_map.len() != s.chain.states() {
                    return Err(invalid("value_map must give one value per chain state"));
                }
                if s.value_map.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("value_map must be finite"));
                }
                let pi = s.chain.stationary();
                let mean: f64 = pi.iter().zip(&s.value_map).map(|(p, v)| p * v).sum();
                let centered: Vec<f64> = s.value_map.iter().map(|v| v - mean).collect();
                let sup = centered.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let block_cov = block_covariance(&s.chain, &centered, s.d);
                // λ_max(CCᵀ - E CCᵀ) <= ‖C‖² <= d sup|x|²; keep M > 0 for degenerate maps
                let m = (s.d as f64 * sup * sup).max(f64::MIN_POSITIVE);
                ModelKind::Block { chain: s.chain.clone(), centered, d: s.d, block_cov, m }
            }
            ModelSpec::IidBaseline(s) => {
                if s.d == 0 || !(s.m > 0.0 && s.m.is_finite()) {
                    return Err(invalid("iid model needs d >= 1 and M > 0"));
                }
                let y_law = s.y_law.clone().unwrap_or_else(|| YLaw::default_for(s.d, s.m));
                check_y_law(&y_law, s.d, s.m)?;
                ModelKind::Iid { y_law, m: s.m }
            }
        };
        Ok(Self { spec, kind })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Contraction { .. } => "contraction",
            ModelKind::Block { .. } => "block_covariance",
            ModelKind::Iid { .. } => "iid_baseline",
        }
    }

    /// Short human-readable identifier of the configuration.
    pub fn digest(&self) -> String {
        match &self.kind {
            ModelKind::Contraction { chain, m, .. } => {
                format!("contraction(d={}, states={}, M={m})", self.dim(), chain.states())
            }
            ModelKind::Block { chain, m, .. } => {
                format!("block_covariance(d={}, states={}, M={m})", self.dim(), chain.states())
            }
            ModelKind::Iid { m, .. } => format!("iid_baseline(d={}, M={m})", self.dim()),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::Contraction { y_law, .. } | ModelKind::Iid { y_law, .. } => y_law.base().dim(),
            ModelKind::Block { d, .. } => *d,
        }
    }

    /// Almost-sure bound on `λ_max(X_i)`.
    pub fn lambda_max_bound(&self) -> f64 {
        match &self.kind {
            ModelKind::Contraction { m, .. } | ModelKind::Iid { m, .. } | ModelKind::Block { m, .. } => *m,
        }
    }

    /// `E(C Cᵀ)` for the block model.
    pub fn block_covariance(&self) -> Option<&SymMatrix> {
        match &self.kind {
            ModelKind::Block { block_cov, .. } => Some(block_cov),
            _ => None,
        }
    }

    /// β-coefficients `β_1, …, β_{k_max}` of the driving chain as seen at the
    /// matrix level. They upper-bound the coefficients of `(X_i)` itself.
    pub fn mixing_coefficients(&self, k_max: usize) -> Vec<f64> {
        match &self.kind {
            ModelKind::Contraction { chain, .. } => beta_sequence(chain, k_max),
            ModelKind::Block { chain, d, .. } => {
                // block lag k separates scalar positions by (k-1)d + 1
                let scalar = beta_sequence(chain, (k_max - 1) * d + 1);
                (1..=k_max).map(|k| scalar[(k - 1) * d]).collect()
            }
            ModelKind::Iid { .. } => vec![0.0; k_max],
        }
    }

    /// Geometric rate `c` with `β_k <= e^{-c(k-1)}` over the first
    /// [`RATE_FIT_LAGS`] lags.
    pub fn mixing_rate(&self) -> Result<f64> {
        fit_geometric_rate_from(&self.mixing_coefficients(RATE_FIT_LAGS))
    }

    /// Calls `f` on each of `X_1, …, X_n` for one stationary path.
    pub fn for_each_summand<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, mut f: impl FnMut(&SymMatrix)) {
        match &self.kind {
            ModelKind::Contraction { chain, tau, y_law, .. } => {
                if n == 0 {
                    return;
                }
                let mut state = chain.sample_stationary(rng);
                for i in 0..n {
                    if i > 0 {
                        state = chain.step(state, rng);
                    }
                    let y = y_law.sample(rng);
                    f(&y.scale(tau[state]));
                }
            }
            ModelKind::Block { chain, centered, d, block_cov, .. } => {
                if n == 0 {
                    return;
                }
                let d = *d;
                let mut state = chain.sample_stationary(rng);
                let mut block = vec![0.0; d];
                for i in 0..n {
                    for (k, slot) in block.iter_mut().enumerate() {
                        if i > 0 || k > 0 {
                            state = chain.step(state, rng);
                        }
                        *slot = centered[state];
                    }
                    let outer: Vec<f64> = (0..d * d).map(|idx| block[idx / d] * block[idx % d]).collect();
                    let mut x = SymMatrix::new(d, outer).expect("outer product is symmetric");
                    x.add_scaled(-1.0, block_cov);
                    f(&x);
                }
            }
            ModelKind::Iid { y_law, .. } => {
                for _ in 0..n {
                    f(&y_law.sample(rng));
                }
            }
        }
    }

    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<SymMatrix> {
        let mut out = Vec::with_capacity(n);
        self.for_each_summand(n, rng, |x| out.push(x.clone()));
        out
    }

    /// `Σ_{i=1}^n X_i` for one path.
    pub fn sample_sum<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SymMatrix {
        let mut sum = SymMatrix::zeros(self.dim());
        self.for_each_summand(n, rng, |x| sum.add_assign(x));
        sum
    }

    /// Exact lag moments `G(ℓ) = E(X_0 X_ℓ)` for `ℓ = 0..max_lag`.
    /// `E(X_i X_j)` equals `G(j - i)` when `i <= j` and `G(i - j)ᵀ` otherwise.
    pub fn lag_moments(&self, max_lag: usize) -> Vec<DMatrix<f64>> {
        let d = self.dim();
        match &self.kind {
            ModelKind::Contraction { chain, tau, y_law, .. } => {
                let e_tau2: f64 = chain.stationary().iter().zip(tau).map(|(p, t)| p * t * t).sum();
                let mut out = vec![DMatrix::zeros(d, d); max_lag.max(1)];
                out[0] = y_law.second_moment().scale(e_tau2).to_dmatrix();
                out
            }
            ModelKind::Iid { y_law, .. } => {
                let mut out = vec![DMatrix::zeros(d, d); max_lag.max(1)];
                out[0] = y_law.second_moment().to_dmatrix();
                out
            }
            ModelKind::Block { chain, centered, block_cov, .. } => {
                let powers = chain.powers(max_lag.max(1) * d + d);
                let moments = FourPointMoments { chain, values: centered, powers: &powers };
                let sigma = block_cov.to_dmatrix();
                let sigma2 = &sigma * &sigma;
                (0..max_lag.max(1))
                    .map(|lag| {
                        DMatrix::from_fn(d, d, |k, l| {
                            let raw: f64 = (0..d)
                                .map(|s| moments.expect([k, s, lag * d + s, lag * d + l]))
                                .sum();
                            raw - sigma2[(k, l)]
                        })
                    })
                    .collect()
            }
        }
    }
}

/// `E(C Cᵀ)` with entries `Cov(x_k, x_l)` of the centered stationary scalars.
fn block_covariance(chain: &MarkovChain, centered: &[f64], d: usize) -> SymMatrix {
    let powers = chain.powers(d);
    let pi = chain.stationary();
    let s = chain.states();
    let lag_cov: Vec<f64> = (0..d)
        .map(|lag| {
            (0..s)
                .map(|x| pi[x] * centered[x] * (0..s).map(|y| powers[lag][(x, y)] * centered[y]).sum::<f64>())
                .sum()
        })
        .collect();
    let entries = (0..d * d).map(|idx| lag_cov[(idx / d).abs_diff(idx % d)]).collect();
    SymMatrix::new(d, entries).expect("covariance is symmetric")
}

struct FourPointMoments<'a> {
    chain: &'a MarkovChain,
    values: &'a [f64],
    powers: &'a [DMatrix<f64>],
}

impl FourPointMoments<'_> {
    /// `E(x_{p1} x_{p2} x_{p3} x_{p4})` for arbitrary time positions.
    fn expect(&self, mut positions: [usize; 4]) -> f64 {
        positions.sort_unstable();
        let s = self.chain.states();
        let mut weights: Vec<f64> = self.chain.stationary().iter().zip(self.values).map(|(p, v)| p * v).collect();
        for w in positions.windows(2) {
            let step = &self.powers[w[1] - w[0]];
            weights = (0..s)
                .map(|y| (0..s).map(|x| weights[x] * step[(x, y)]).sum::<f64>() * self.values[y])
                .collect();
        }
        weights.iter().sum()
    }
}

fn lambda_max_dense(m: &DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn spectral_norm_general(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `λ_max(E(τ₀²) E(Y²))` for the contraction model; the cross terms vanish so
/// every subset gives the same ratio.
pub fn v2_exact_contraction(model: &Model, _n: usize) -> Result<f64> {
    match &model.kind {
        ModelKind::Contraction { chain, tau, y_law, .. } => {
            let e_tau2: f64 = chain.stationary().iter().zip(tau).map(|(p, t)| p * t * t).sum();
            Ok(y_law.second_moment().scale(e_tau2).lambda_max())
        }
        _ => Err(Error::Unsupported(format!("{} has no closed-form variance proxy", model.name()))),
    }
}

/// `λ_max(E(Y²))` for the iid baseline.
pub fn v2_exact_iid(model: &Model) -> Result<f64> {
    match &model.kind {
        ModelKind::Iid { y_law, .. } => Ok(y_law.second_moment().lambda_max()),
        _ => Err(Error::Unsupported(format!("{} is not the iid baseline", model.name()))),
    }
}

/// `sup_K λ_max(E(Σ_{i∈K} X_i)²) / |K|` over all `2^n - 1` nonempty subsets,
/// using exact lag moments. Subsets are visited in Gray-code order so each
/// step adds or removes one index.
pub fn v2_bruteforce(model: &Model, n: usize) -> Result<f64> {
    if n == 0 || n > BRUTEFORCE_MAX_N {
        return Err(invalid(format!("subset enumeration needs 1 <= n <= {BRUTEFORCE_MAX_N}, got {n}")));
    }
    let d = model.dim();
    let lags = model.lag_moments(n);
    // cross[i][j] = E(X_i X_j) + E(X_j X_i)
    let pair = |i: usize, j: usize| if i <= j { lags[j - i].clone() } else { lags[i - j].transpose() };
    let cross: Vec<Vec<DMatrix<f64>>> =
        (0..n).map(|i| (0..n).map(|j| { let p = pair(i, j); &p + p.transpose() }).collect()).collect();
    let diag = &lags[0];

    let mut member = vec![false; n];
    let mut size = 0usize;
    let mut second = DMatrix::<f64>::zeros(d, d);
    let mut best = f64::NEG_INFINITY;
    for step in 1u64..(1u64 << n) {
        let flip = step.trailing_zeros() as usize;
        let mut delta = diag.clone();
        for j in (0..n).filter(|&j| member[j] && j != flip) {
            delta += &cross[flip][j];
        }
        if member[flip] {
            second -= delta;
            size -= 1;
        } else {
            second += delta;
            size += 1;
        }
        member[flip] = !member[flip];
        let sym = 0.5 * (&second + second.transpose());
        best = best.max(lambda_max_dense(&sym) / size as f64);
    }
    Ok(best)
}

/// `‖G(0)‖ + 2 Σ_{ℓ=1}^{n-1} ‖G(ℓ)‖`, an upper bound on `v²` for any `n`:
/// `uᵀ E(S_K²) u <= Σ_{i,j∈K} ‖E(X_i X_j)‖ <= |K| (‖G(0)‖ + 2 Σ ‖G(ℓ)‖)`.
pub fn v2_lag_upper_bound(model: &Model, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let lags = model.lag_moments(n);
    let tail: f64 = lags.iter().skip(1).map(spectral_norm_general).sum();
    Ok(lambda_max_dense(&lags[0]) + 2.0 * tail)
}

/// Monte-Carlo estimate of the variance proxy restricted to contiguous
/// intervals, with sample splitting: the first half of the trials picks the
/// interval `K` and direction `u` maximizing `uᵀ E(S_K²) u / |K|`, the second
/// half estimates that quantity. The result is an unbiased estimate of a
/// number no larger than the full `v²`.
pub fn v2_interval_estimate(model: &Model, n: usize, trials: usize, seed: u64) -> Result<Estimate> {
    if n == 0 || trials < 4 {
        return Err(invalid("interval estimate needs n >= 1 and at least 4 trials"));
    }
    let d = model.dim();
    let select = trials / 2;
    let intervals: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..=n).map(move |b| (a, b))).collect();

    let mut mean_sq = vec![DMatrix::<f64>::zeros(d, d); intervals.len()];
    for trial in 0..select {
        let prefix = prefix_sums(model, n, &mut crate::mc::trial_rng(seed, trial as u64));
        for (acc, &(a, b)) in mean_sq.iter_mut().zip(&intervals) {
            let s = &prefix[b] - &prefix[a];
            *acc += &s * &s;
        }
    }
    let (mut best, mut best_idx, mut best_dir) = (f64::NEG_INFINITY, 0, nalgebra::DVector::zeros(d));
    for (idx, (acc, &(a, b))) in mean_sq.iter().zip(&intervals).enumerate() {
        let sym = 0.5 * (acc + acc.transpose()) / select as f64;
        let eig = sym.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let ratio = eig.eigenvalues[top] / (b - a) as f64;
        if ratio > best {
            best = ratio;
            best_idx = idx;
            best_dir = eig.eigenvectors.column(top).into_owned();
        }
    }

    let (a, b) = intervals[best_idx];
    let samples: Vec<f64> = (select..trials)
        .map(|trial| {
            let prefix = prefix_sums(model, n, &mut crate::mc::trial_rng(seed, trial as u64));
            let su = (&prefix[b] - &prefix[a]) * &best_dir;
            su.norm_squared() / (b - a) as f64
        })
        .collect();
    Ok(crate::stats::mean_and_stderr(&samples))
}

fn prefix_sums<R: Rng + ?Sized>(model: &Model, n: usize, rng: &mut R) -> Vec<DMatrix<f64>> {
    let d = model.dim();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(DMatrix::zeros(d, d));
    model.for_each_summand(n, rng, |x| {
        let next = prefix.last().expect("nonempty") + x.to_dmatrix();
        prefix.push(next);
    });
    prefix
}

/// How the variance proxy attached to a bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum VarianceSource {
    Exact,
    Bruteforce,
    LagUpperBound,
    /// Interval estimate inflated by three standard errors.
    Estimated { estimate: f64, stderr: f64 },
}

/// Requested route to `v²` for experiment bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    /// Closed form when the model has one, subset enumeration for small `n`,
    /// otherwise the lag-moment upper bound.
    #[default]
    Auto,
    Bruteforce,
    LagUpperBound,
    Interval,
}

/// Largest `n` for which `Auto` enumerates subsets.
const AUTO_BRUTEFORCE_MAX_N: usize = 12;
const INTERVAL_TRIALS: usize = 4000;

/// `v²` and its provenance for the first `n` summands.
pub fn variance_proxy(model: &Model, n: usize, method: VarianceMethod, seed: u64) -> Result<(f64, VarianceSource)> {
    match method {
        VarianceMethod::Auto => match &model.kind {
            ModelKind::Contraction { .. } => Ok((v2_exact_contraction(model, n)?, VarianceSource::Exact)),
            ModelKind::Iid { .. } => Ok((v2_exact_iid(model)?, VarianceSource::Exact)),
            ModelKind::Block { .. } if n <= AUTO_BRUTEFORCE_MAX_N => {
                Ok((v2_bruteforce(model, n)?, VarianceSource::Bruteforce))
            }
            ModelKind::Block { .. } => Ok((v2_lag_upper_bound(model, n)?, VarianceSource::LagUpperBound)),
        },
        VarianceMethod::Bruteforce => Ok((v2_bruteforce(model, n)?, VarianceSource::Bruteforce)),
        VarianceMethod::LagUpperBound => Ok((v2_lag_upper_bound(model, n)?, VarianceSource::LagUpperBound)),
        VarianceMethod::Interval => {
            let est = v2_interval_estimate(model, n, INTERVAL_TRIALS, seed)?;
            let inflated = (est.value + 3.0 * est.stderr).max(0.0);
            Ok((inflated, VarianceSource::Estimated { estimate: est.value, stderr: est.stderr }))
        }
    }
}

pub fn simulate_contraction<R: Rng + ?Sized>(model: &Model, n: usize, rng: &mut R) -> Result<Vec<SymMatrix>> {
    match model.kind {
        ModelKind::Contraction { .. } => Ok(model.simulate(n, rng)),
        _ => Err(invalid(format!("expected a contraction model, got {}", model.name()))),
    }
}

pub fn simulate_block_covariance<R: Rng + ?Sized>(model: &Model, n: usize, rng: &mut R) -> Result<Vec<SymMatrix>> {
    match model.kind {
        ModelKind::Block { .. } => Ok(model.simulate(n, rng)),
        _ => Err(invalid(format!("expected a block covariance model, got {}", model.name()))),
    }
}

const SHIPPED_CONTRACTION: &str = include_str!("../configs/contraction.json");
const SHIPPED_BLOCKCOV: &str = include_str!("../configs/blockcov.json");
const SHIPPED_IID: &str = include_str!("../configs/iid.json");

/// The three bundled model configurations: contraction, block covariance, iid.
pub fn shipped_models() -> Vec<ModelSpec> {
    [SHIPPED_CONTRACTION, SHIPPED_BLOCKCOV, SHIPPED_IID]
        .iter()
        .map(|raw| serde_json::from_str(raw).expect("bundled model configs parse"))
        .collect()
}

/// Bundled configuration for a CLI model name (`contraction`, `blockcov`, `iid`).
pub fn shipped_model(name: &str) -> Option<ModelSpec> {
    let raw = match name {
        "contraction" => SHIPPED_CONTRACTION,
        "blockcov" | "block_covariance" => SHIPPED_BLOCKCOV,
        "iid" | "iid_baseline" => SHIPPED_IID,
        _ => return None,
    };
    Some(serde_json::from_str(raw).expect("bundled model configs parse"))
}
