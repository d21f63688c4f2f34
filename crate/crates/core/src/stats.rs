//! Pearson chi-square goodness-of-fit against the uniform distribution.

use std::fmt;

/// Significance level of every embedded critical value.
pub const SIGNIFICANCE: f64 = 1e-3;

/// Upper 0.1% quantiles of the chi-square distribution for 1..=100 degrees of
/// freedom, rounded to three decimals.
const CRITICAL_0_001: [f64; 100] = [
    10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, //
    27.877, 29.588, 31.264, 32.909, 34.528, 36.123, 37.697, 39.252, //
    40.790, 42.312, 43.820, 45.315, 46.797, 48.268, 49.728, 51.179, //
    52.620, 54.052, 55.476, 56.892, 58.301, 59.703, 61.098, 62.487, //
    63.870, 65.247, 66.619, 67.985, 69.346, 70.703, 72.055, 73.402, //
    74.745, 76.084, 77.419, 78.750, 80.077, 81.400, 82.720, 84.037, //
    85.351, 86.661, 87.968, 89.272, 90.573, 91.872, 93.168, 94.461, //
    95.751, 97.039, 98.324, 99.607, 100.888, 102.166, 103.442, 104.716, //
    105.988, 107.258, 108.526, 109.791, 111.055, 112.317, 113.577, 114.835, //
    116.092, 117.346, 118.599, 119.850, 121.100, 122.348, 123.594, 124.839, //
    126.083, 127.324, 128.565, 129.804, 131.041, 132.277, 133.512, 134.745, //
    135.978, 137.208, 138.438, 139.666, 140.893, 142.119, 143.344, 144.567, //
    145.789, 147.010, 148.230, 149.449,
];

/// Critical value at significance 10⁻³, if `df` is within the table.
pub fn critical_value(df: usize) -> Option<f64> {
    df.checked_sub(1).and_then(|i| CRITICAL_0_001.get(i)).copied()
}

/// Σ (observed − expected)² / expected with expected = total / bins.
pub fn chi_square(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if counts.is_empty() || total == 0 {
        return 0.0;
    }
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareReport {
    pub bins: Vec<u64>,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub threshold: f64,
    pub pass: bool,
    pub aborted_runs: u64,
}

impl ChiSquareReport {
    /// Returns `None` when the number of bins has no tabulated critical value.
    pub fn new(bins: Vec<u64>, aborted_runs: u64) -> Option<Self> {
        let df = bins.len().checked_sub(1)?;
        let threshold = critical_value(df)?;
        let statistic = chi_square(&bins);
        Some(Self {
            pass: statistic < threshold,
            bins,
            statistic,
            degrees_of_freedom: df,
            threshold,
            aborted_runs,
        })
    }

    pub fn trials(&self) -> u64 {
        self.bins.iter().sum()
    }
}

impl fmt::Display for ChiSquareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trials = self.trials().max(1);
        let widest = self.bins.iter().copied().max().unwrap_or(0).max(1);
        for (i, &c) in self.bins.iter().enumerate() {
            let bar = "#".repeat((c * 40 / widest) as usize);
            writeln!(
                f,
                "{i:>4} {c:>9} {:>7.3}% {bar}",
                c as f64 * 100.0 / trials as f64
            )?;
        }
        write!(
            f,
            "chi-square {:.3} (df {}, critical {:.3} at p={}) {}; aborted runs {}",
            self.statistic,
            self.degrees_of_freedom,
            self.threshold,
            SIGNIFICANCE,
            if self.pass { "PASS" } else { "FAIL" },
            self.aborted_runs
        )
    }
}
