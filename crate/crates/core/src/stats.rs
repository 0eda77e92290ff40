//! Small statistical helpers: exact binomial intervals, chi-square tests and
//! running moments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

/// Two-sided Clopper–Pearson interval for `successes` out of `trials` at
/// confidence `1 - alpha`.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials, "invalid binomial counts");
    let (k, n) = (successes as f64, trials as f64);
    let low = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).expect("positive shape").inverse_cdf(alpha / 2.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).expect("positive shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    (low, high)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_tail(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(statistic)
}

/// Goodness of fit of observed counts against expected probabilities. Cells
/// with zero expected probability must have zero counts and are dropped.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> ChiSquareTest {
    assert_eq!(counts.len(), probs.len(), "counts and probabilities differ in length");
    let total: u64 = counts.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        let e = p * total as f64;
        statistic += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    ChiSquareTest { statistic, dof, p_value: chi_square_tail(statistic, dof) }
}

/// Pearson test of independence on a contingency table (`rows x cols`, row-major).
pub fn chi_square_independence(table: &[u64], rows: usize, cols: usize) -> ChiSquareTest {
    assert_eq!(table.len(), rows * cols, "table size mismatch");
    let total: u64 = table.iter().sum();
    let row_sums: Vec<u64> = (0..rows).map(|r| table[r * cols..(r + 1) * cols].iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|c| (0..rows).map(|r| table[r * cols + c]).sum()).collect();
    let mut statistic = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let e = row_sums[r] as f64 * col_sums[c] as f64 / total as f64;
            if e > 0.0 {
                statistic += (table[r * cols + c] as f64 - e).powi(2) / e;
            }
        }
    }
    let live_rows = row_sums.iter().filter(|&&s| s > 0).count();
    let live_cols = col_sums.iter().filter(|&&s| s > 0).count();
    let dof = live_rows.saturating_sub(1) * live_cols.saturating_sub(1);
    ChiSquareTest { statistic, dof, p_value: chi_square_tail(statistic, dof) }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

pub fn mean_and_stderr(samples: &[f64]) -> Estimate {
    let n = samples.len();
    assert!(n > 0, "no samples");
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { value: mean, stderr: 0.0 };
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate { value: mean, stderr: (var / n as f64).sqrt() }
}
