//! Exact absolute-regularity (β-mixing) coefficients for finite-state
//! stationary Markov chains, geometric rate fitting, and the maximal coupling
//! that realizes `P(Y ≠ Y*) = β(σ(X), σ(Y))` on finite spaces.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const MASS_TOL: f64 = 1e-12;
/// Rate reported when every observed coefficient vanishes.
pub const RATE_CEILING: f64 = 1e6;
const BETA_FLOOR: f64 = 1e-300;

/// A stationary, irreducible and aperiodic finite-state Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainFile", into = "ChainFile")]
pub struct MarkovChain {
    p: Vec<Vec<f64>>,
    pi: Vec<f64>,
    labels: Option<Vec<String>>,
}

/// On-disk layout `{"P": [[…]], "labels": […]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl TryFrom<ChainFile> for MarkovChain {
    type Error = Error;

    fn try_from(file: ChainFile) -> Result<Self> {
        let mut chain = MarkovChain::new(file.p)?;
        if let Some(labels) = file.labels {
            if labels.len() != chain.states() {
                return Err(invalid(format!("{} labels for {} states", labels.len(), chain.states())));
            }
            chain.labels = Some(labels);
        }
        Ok(chain)
    }
}

impl From<MarkovChain> for ChainFile {
    fn from(chain: MarkovChain) -> Self {
        ChainFile { p: chain.p, labels: chain.labels }
    }
}

impl MarkovChain {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        let s = p.len();
        if s < 2 {
            return Err(invalid(format!("need at least 2 states, got {s}")));
        }
        for (i, row) in p.iter().enumerate() {
            if row.len() != s {
                return Err(invalid(format!("row {i} has {} entries, expected {s}", row.len())));
            }
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invalid(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(invalid(format!("row {i} sums to {sum}")));
            }
        }
        if !is_primitive(&p) {
            return Err(invalid("chain must be irreducible and aperiodic"));
        }
        let pi = stationary_distribution(&p)?;
        Ok(Self { p, pi, labels: None })
    }

    /// Two-state chain `[[1-a, a], [b, 1-b]]`.
    pub fn two_state(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - a, a], vec![b, 1.0 - b]])
    }

    /// Chain whose every row equals `pi`, i.e. an iid sequence.
    pub fn iid(pi: &[f64]) -> Result<Self> {
        Self::new(vec![pi.to_vec(); pi.len()])
    }

    pub fn states(&self) -> usize {
        self.p.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        let s = self.states();
        DMatrix::from_fn(s, s, |i, j| self.p[i][j])
    }

    /// `P^k` for `k = 0..=max_power`.
    pub fn powers(&self, max_power: usize) -> Vec<DMatrix<f64>> {
        let p = self.to_dmatrix();
        let mut out = Vec::with_capacity(max_power + 1);
        out.push(DMatrix::identity(self.states(), self.states()));
        for k in 1..=max_power {
            let next = &out[k - 1] * &p;
            out.push(next);
        }
        out
    }

    /// Law of `(S₀, S_k)` under stationarity: `π(x) P^k(x, y)`.
    pub fn joint_law(&self, k: usize) -> JointLaw {
        let pk = self.powers(k).pop().expect("at least the identity");
        let s = self.states();
        let pmf = (0..s).flat_map(|x| (0..s).map(move |y| (x, y))).map(|(x, y)| self.pi[x] * pk[(x, y)]).collect();
        JointLaw { rows: s, cols: s, pmf }
    }

    /// Draws a state from `π`.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.pi, rng)
    }

    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        sample_index(&self.p[from], rng)
    }

    /// A stationary path `S_0, …, S_{len-1}`.
    pub fn sample_path<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let mut path = Vec::with_capacity(len);
        if len == 0 {
            return path;
        }
        let mut state = self.sample_stationary(rng);
        path.push(state);
        for _ in 1..len {
            state = self.step(state, rng);
            path.push(state);
        }
        path
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the last partial sum; take the last state with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Primitive iff the support pattern of `P^k` is full for `k = (s-1)² + 1`.
fn is_primitive(p: &[Vec<f64>]) -> bool {
    let s = p.len();
    let pattern: Vec<Vec<bool>> = p.iter().map(|r| r.iter().map(|&x| x > 0.0).collect()).collect();
    let mut reach = pattern.clone();
    for _ in 1..((s - 1) * (s - 1) + 1) {
        reach = (0..s)
            .map(|i| (0..s).map(|j| (0..s).any(|k| reach[i][k] && pattern[k][j])).collect())
            .collect();
    }
    reach.iter().all(|r| r.iter().all(|&x| x))
}

fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let s = p.len();
    // (Pᵀ - I) π = 0 with the last equation replaced by Σπ = 1
    let mut a = DMatrix::from_fn(s, s, |i, j| p[j][i] - if i == j { 1.0 } else { 0.0 });
    let mut rhs = DVector::zeros(s);
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    rhs[s - 1] = 1.0;
    let pi = a.lu().solve(&rhs).ok_or_else(|| invalid("stationary law is not unique"))?;
    let pi: Vec<f64> = pi.iter().map(|&x| if x.abs() < 1e-15 { 0.0 } else { x }).collect();
    for j in 0..s {
        let flow: f64 = (0..s).map(|i| pi[i] * p[i][j]).sum();
        if pi[j] < -STATIONARY_TOL || (flow - pi[j]).abs() > STATIONARY_TOL {
            return Err(invalid("failed to solve for the stationary law"));
        }
    }
    Ok(pi.into_iter().map(|x| x.max(0.0)).collect())
}

/// Joint probability mass function of a pair `(X, Y)` on finite supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLaw {
    rows: usize,
    cols: usize,
    pmf: Vec<f64>,
}

impl JointLaw {
    pub fn new(rows: usize, cols: usize, pmf: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || pmf.len() != rows * cols {
            return Err(invalid("joint law must be a nonempty rows x cols table"));
        }
        if pmf.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("joint law has negative or non-finite mass"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("joint law has total mass {total}")));
        }
        Ok(Self { rows, cols, pmf })
    }

    pub fn product(px: &[f64], py: &[f64]) -> Result<Self> {
        Self::new(px.len(), py.len(), px.iter().flat_map(|a| py.iter().map(move |b| a * b)).collect())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn mass(&self, x: usize, y: usize) -> f64 {
        self.pmf[x * self.cols + y]
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        (0..self.rows).map(|x| (0..self.cols).map(|y| self.mass(x, y)).sum()).collect()
    }

    pub fn y_marginal(&self) -> Vec<f64> {
        (0..self.cols).map(|y| (0..self.rows).map(|x| self.mass(x, y)).sum()).collect()
    }
}

/// `½ Σ |P(x, y) - P(x) P(y)|`.
pub fn beta_from_joint(j: &JointLaw) -> f64 {
    let (px, py) = (j.x_marginal(), j.y_marginal());
    let tv: f64 = (0..j.rows)
        .flat_map(|x| (0..j.cols).map(move |y| (x, y)))
        .map(|(x, y)| (j.mass(x, y) - px[x] * py[y]).abs())
        .sum();
    (0.5 * tv).clamp(0.0, 1.0)
}

fn beta_from_power(pi: &[f64], pk: &DMatrix<f64>) -> f64 {
    let s = pi.len();
    let b: f64 = (0..s)
        .map(|x| pi[x] * 0.5 * (0..s).map(|y| (pk[(x, y)] - pi[y]).abs()).sum::<f64>())
        .sum();
    b.clamp(0.0, 1.0)
}

/// `β_k = Σ_x π(x) ‖P^k(x, ·) - π‖_TV`, the past/future coefficient at lag `k`.
pub fn beta_k_exact(chain: &MarkovChain, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(invalid("lag k must be at least 1"));
    }
    let pk = chain.powers(k).pop().expect("at least the identity");
    Ok(beta_from_power(&chain.pi, &pk))
}

/// `β_1, …, β_{k_max}`, in order.
pub fn beta_sequence(chain: &MarkovChain, k_max: usize) -> Vec<f64> {
    chain.powers(k_max).iter().skip(1).map(|pk| beta_from_power(&chain.pi, pk)).collect()
}

/// Largest `c` with `β_k <= e^{-c(k-1)}` on `k = 2..=k_max`.
pub fn fit_geometric_rate(chain: &MarkovChain, k_max: usize) -> Result<f64> {
    if k_max < 2 {
        return Err(invalid("k_max must be at least 2"));
    }
    fit_geometric_rate_from(&beta_sequence(chain, k_max))
}

/// Same fit from an explicit coefficient list `betas[k-1] = β_k`.
pub fn fit_geometric_rate_from(betas: &[f64]) -> Result<f64> {
    if betas.len() < 2 {
        return Err(invalid("need coefficients for at least k = 1, 2"));
    }
    if betas.iter().skip(1).all(|&b| b >= 1.0) {
        return Err(Error::NoValidRate("every coefficient equals 1".into()));
    }
    let mut rate = RATE_CEILING;
    for (idx, &beta) in betas.iter().enumerate().skip(1) {
        if beta <= BETA_FLOOR {
            continue;
        }
        rate = rate.min(-beta.ln() / idx as f64);
    }
    if rate <= 0.0 {
        return Err(Error::NoValidRate(format!("fitted rate {rate} is not positive")));
    }
    Ok(rate)
}

#[derive(Debug, Clone)]
struct ConditionalCoupling {
    /// `P(Y* = y | X = x, Y = y)` kept-mass ratio `min(q(y), m(y)) / q(y)`.
    keep: Vec<f64>,
    /// Residual law `(m - q)_+ / TV` used when `Y*` must move.
    residual: Vec<f64>,
}

/// Berbee's coupling on finite spaces: `Y*` has the law of `Y`, is independent
/// of `X`, and differs from `Y` with probability exactly `β(σ(X), σ(Y))`.
#[derive(Debug, Clone)]
pub struct BerbeeCoupling {
    joint: JointLaw,
    y_marginal: Vec<f64>,
    per_x: Vec<ConditionalCoupling>,
}

impl BerbeeCoupling {
    pub fn new(joint: JointLaw) -> Result<Self> {
        let total: f64 = joint.pmf.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("joint law has no mass"));
        }
        let px = joint.x_marginal();
        let m = joint.y_marginal();
        let per_x = (0..joint.rows)
            .map(|x| {
                let q: Vec<f64> = (0..joint.cols)
                    .map(|y| if px[x] > 0.0 { joint.mass(x, y) / px[x] } else { m[y] })
                    .collect();
                let keep = q.iter().zip(&m).map(|(&qy, &my)| if qy > 0.0 { (qy.min(my) / qy).min(1.0) } else { 1.0 }).collect();
                let excess: Vec<f64> = q.iter().zip(&m).map(|(&qy, &my)| (my - qy).max(0.0)).collect();
                let tv: f64 = excess.iter().sum();
                let residual = if tv > 0.0 { excess.iter().map(|e| e / tv).collect() } else { m.clone() };
                ConditionalCoupling { keep, residual }
            })
            .collect();
        Ok(Self { joint, y_marginal: m, per_x })
    }

    pub fn joint(&self) -> &JointLaw {
        &self.joint
    }

    pub fn y_marginal(&self) -> &[f64] {
        &self.y_marginal
    }

    /// Exact `P(Y ≠ Y*)` of the construction.
    pub fn mismatch_probability(&self) -> f64 {
        beta_from_joint(&self.joint)
    }

    /// One draw of `(X, Y, Y*)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize, usize) {
        let cell = sample_index(&self.joint.pmf, rng);
        let (x, y) = (cell / self.joint.cols, cell % self.joint.cols);
        let plan = &self.per_x[x];
        let u: f64 = rng.random();
        let y_star = if u < plan.keep[y] { y } else { sample_index(&plan.residual, rng) };
        (x, y, y_star)
    }

    pub fn into_sampler(self, seed: u64) -> BerbeeSampler {
        BerbeeSampler { coupling: self, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

/// Seeded infinite stream of coupled triples `(X, Y, Y*)`. Owns its RNG, so
/// use one sampler per worker.
#[derive(Debug, Clone)]
pub struct BerbeeSampler {
    coupling: BerbeeCoupling,
    rng: ChaCha8Rng,
}

impl BerbeeSampler {
    pub fn coupling(&self) -> &BerbeeCoupling {
        &self.coupling
    }
}

impl Iterator for BerbeeSampler {
    type Item = (usize, usize, usize);

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.coupling.draw(&mut self.rng))
    }
}

pub fn berbee_coupling(joint: JointLaw, seed: u64) -> Result<BerbeeSampler> {
    Ok(BerbeeCoupling::new(joint)?.into_sampler(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_chain() -> MarkovChain {
        MarkovChain::two_state(0.25, 0.25).unwrap()
    }

    #[test]
    fn chain_validation() {
        assert!(MarkovChain::new(vec![vec![1.0]]).is_err());
        assert!(MarkovChain::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        // periodic flip chain
        assert!(MarkovChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_err());
        // reducible
        assert!(MarkovChain::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).is_err());
        let c = MarkovChain::two_state(0.2, 0.3).unwrap();
        assert!((c.stationary()[0] - 0.6).abs() < 1e-14);
    }

    #[test]
    fn primitive_chain_with_zero_powers_below_state_count() {
        // 3-cycle plus one self loop: P^3 still has zeros but P^5 is positive
        let p = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.0, 0.5]];
        assert!(MarkovChain::new(p).is_ok());
    }

    #[test]
    fn chain_json_layout() {
        let c: MarkovChain = serde_json::from_str(r#"{"P": [[0.75, 0.25], [0.25, 0.75]], "labels": ["lo", "hi"]}"#).unwrap();
        assert_eq!(c.labels().unwrap(), ["lo", "hi"]);
        assert!(serde_json::from_str::<MarkovChain>(r#"{"P": [[0.75, 0.25], [0.25, 0.75]], "extra": 1}"#).is_err());
    }

    #[test]
    fn beta_from_joint_examples() {
        let j = JointLaw::product(&[0.3, 0.7], &[0.1, 0.5, 0.4]).unwrap();
        assert!(beta_from_joint(&j) < 1e-15);
        let j = JointLaw::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((beta_from_joint(&j) - 0.5).abs() < 1e-15);
        assert!(JointLaw::new(2, 2, vec![0.5, 0.0, 0.0, 0.4]).is_err());
    }

    #[test]
    fn two_state_closed_form() {
        let c = quarter_chain();
        for k in 1..=20 {
            let want = 0.5f64.powi(k as i32 + 1);
            assert!((beta_k_exact(&c, k).unwrap() - want).abs() < 1e-12);
        }
        assert!(beta_k_exact(&c, 0).is_err());
        // general a, b: 2ab|1-a-b|^k / (a+b)²
        let (a, b) = (0.1, 0.35);
        let c = MarkovChain::two_state(a, b).unwrap();
        for k in 1..=8 {
            let want = 2.0 * a * b * (1.0 - a - b).abs().powi(k as i32) / (a + b).powi(2);
            assert!((beta_k_exact(&c, k).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn iid_chain_has_zero_beta() {
        let c = MarkovChain::iid(&[0.2, 0.3, 0.5]).unwrap();
        assert!(beta_sequence(&c, 5).iter().all(|&b| b < 1e-15));
        assert_eq!(fit_geometric_rate(&c, 10).unwrap(), RATE_CEILING);
    }

    #[test]
    fn rate_fit_examples() {
        let c = quarter_chain();
        let rate = fit_geometric_rate(&c, 50).unwrap();
        assert!((rate - 51.0 / 49.0 * std::f64::consts::LN_2).abs() < 1e-10);
        assert!((rate - 0.7214).abs() < 1e-4);
        let mut prev = f64::INFINITY;
        for k_max in 2..40 {
            let r = fit_geometric_rate(&c, k_max).unwrap();
            assert!(r <= prev);
            prev = r;
        }
        assert!(fit_geometric_rate(&c, 1).is_err());
        assert!(matches!(fit_geometric_rate_from(&[1.0, 1.0, 1.0]), Err(Error::NoValidRate(_))));
    }

    #[test]
    fn coupling_of_product_is_identity() {
        let j = JointLaw::product(&[0.4, 0.6], &[0.3, 0.7]).unwrap();
        let sampler = berbee_coupling(j, 3).unwrap();
        assert!(sampler.take(5000).all(|(_, y, ys)| y == ys));
    }
}
