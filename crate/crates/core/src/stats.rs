//! Autocorrelation-aware error analysis for Monte Carlo time series.

use serde::{Deserialize, Serialize};

/// Window constant of the automatic windowing rule: the summation window is
/// the smallest `W` with `W ≥ WINDOW_C · τ_int(W)`.
pub const WINDOW_C: f64 = 6.0;

/// Bin length in units of `τ_int`.
pub const BIN_TAU_FACTOR: f64 = 10.0;

/// Fewest bins for which the binning error is trusted; below this the
/// `τ_int`-inflated naive error is used.
pub const MIN_BINS: usize = 16;

/// A measured observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    /// Integrated autocorrelation time in units of the measurement spacing.
    pub tau_int: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            n_samples: 1,
            tau_int: 0.5,
        }
    }

    pub fn new(value: f64, stderr: f64, n_samples: u64, tau_int: f64) -> Self {
        Estimate {
            value,
            stderr,
            n_samples,
            tau_int,
        }
    }

    /// Mean, binned standard error and `τ_int` of a correlated series.
    pub fn from_series(xs: &[f64]) -> Self {
        assert!(!xs.is_empty(), "empty series");
        let n = xs.len();
        let mean = mean(xs);
        let tau = tau_int(xs);
        let var = variance(xs, mean);
        let stderr = if var == 0.0 {
            0.0
        } else {
            let bin = (BIN_TAU_FACTOR * tau).ceil().max(1.0) as usize;
            if n / bin >= MIN_BINS {
                binned_stderr(xs, bin)
            } else {
                (2.0 * tau * var / n as f64).sqrt()
            }
        };
        Estimate {
            value: mean,
            stderr,
            n_samples: n as u64,
            tau_int: tau,
        }
    }

    /// Number of standard deviations separating two independent estimates.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let s = self.stderr.hypot(other.stderr);
        let d = (self.value - other.value).abs();
        if s == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / s
        }
    }

    /// Agreement with an exact value within `k` standard errors.
    pub fn agrees_with(&self, exact: f64, k: f64) -> bool {
        (self.value - exact).abs() <= k * self.stderr
    }

    /// Pools two estimates of the same quantity by sample count. The pooled
    /// quantities `(Σ n·v, Σ (n·s)², Σ n, Σ n·τ)` are additive, so merging is
    /// associative.
    pub fn merge(&self, other: &Estimate) -> Estimate {
        let (a, b) = (self.n_samples as f64, other.n_samples as f64);
        let n = a + b;
        Estimate {
            value: (a * self.value + b * other.value) / n,
            stderr: ((a * self.stderr).powi(2) + (b * other.stderr).powi(2)).sqrt() / n,
            n_samples: self.n_samples + other.n_samples,
            tau_int: (a * self.tau_int + b * other.tau_int) / n,
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Integrated autocorrelation time with automatic windowing. Returns 0.5 for
/// uncorrelated or constant series.
pub fn tau_int(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.5;
    }
    let m = mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0 = d.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for w in 1..n / 2 {
        let c: f64 = d[..n - w]
            .iter()
            .zip(&d[w..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n - w) as f64;
        tau += c / c0;
        if w as f64 >= WINDOW_C * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Standard error of the mean from non-overlapping bins of length `bin`.
pub fn binned_stderr(xs: &[f64], bin: usize) -> f64 {
    let nb = xs.len() / bin;
    assert!(nb >= 2, "need at least two bins");
    let means: Vec<f64> = xs.chunks_exact(bin).map(mean).collect();
    let m = mean(&means);
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nb - 1) as f64;
    (var / nb as f64).sqrt()
}

/// `Σ num / Σ den` with a blocked jackknife error. `n_samples` counts the
/// measurements with non-zero denominator. Returns `None` when `Σ den = 0`.
pub fn ratio_estimate(num: &[f64], den: &[f64]) -> Option<Estimate> {
    assert_eq!(num.len(), den.len());
    let total_den: f64 = den.iter().sum();
    if total_den == 0.0 {
        return None;
    }
    let total_num: f64 = num.iter().sum();
    let value = total_num / total_den;
    let hits = den.iter().filter(|&&d| d != 0.0).count() as u64;
    let tau = tau_int(num).max(tau_int(den));
    let n = num.len();
    let mut bin = (BIN_TAU_FACTOR * tau).ceil().max(1.0) as usize;
    if n / bin < MIN_BINS {
        bin = (n / MIN_BINS).max(1);
    }
    let nb = n / bin;
    if nb < 2 {
        return Some(Estimate::new(value, f64::NAN, hits, tau));
    }
    let used = nb * bin;
    let block_sums = |xs: &[f64]| -> Vec<f64> {
        xs[..used]
            .chunks_exact(bin)
            .map(|c| c.iter().sum())
            .collect()
    };
    let (bn, bd) = (block_sums(num), block_sums(den));
    let (sn, sd): (f64, f64) = (bn.iter().sum(), bd.iter().sum());
    let mut leave_out = Vec::with_capacity(nb);
    for (a, b) in bn.iter().zip(&bd) {
        let d = sd - b;
        if d != 0.0 {
            leave_out.push((sn - a) / d);
        }
    }
    let k = leave_out.len();
    let stderr = if k < 2 {
        f64::NAN
    } else {
        let m = mean(&leave_out);
        let v = leave_out.iter().map(|x| (x - m).powi(2)).sum::<f64>();
        ((k - 1) as f64 / k as f64 * v).sqrt()
    };
    Some(Estimate::new(value, stderr, hits, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let z: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                x = phi * x + z;
                x
            })
            .collect()
    }

    #[test]
    fn constant_series_has_zero_error() {
        let e = Estimate::from_series(&[1.0; 100]);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.tau_int, 0.5);
    }

    #[test]
    fn white_noise_tau_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..20000).map(|_| rng.random::<f64>()).collect();
        let t = tau_int(&xs);
        assert!((t - 0.5).abs() < 0.05, "tau {t}");
        let e = Estimate::from_series(&xs);
        let naive = (1.0 / 12.0 / 20000.0f64).sqrt();
        assert!((e.stderr / naive - 1.0).abs() < 0.2);
    }

    #[test]
    fn ar1_tau_matches_closed_form() {
        // τ_int = ½ (1 + φ) / (1 - φ)
        let phi = 0.8;
        let xs = ar1(200_000, phi, 7);
        let exact = 0.5 * (1.0 + phi) / (1.0 - phi);
        let t = tau_int(&xs);
        assert!((t / exact - 1.0).abs() < 0.1, "tau {t} vs {exact}");
        // variance of AR(1) is 1/(1-φ²); stderr² ≈ 2τ var / n
        let want = (2.0 * exact / (1.0 - phi * phi) / xs.len() as f64).sqrt();
        let e = Estimate::from_series(&xs);
        assert!(
            (e.stderr / want - 1.0).abs() < 0.2,
            "{} vs {want}",
            e.stderr
        );
    }

    #[test]
    fn merge_is_associative() {
        let a = Estimate::new(1.0, 0.1, 10, 1.0);
        let b = Estimate::new(2.0, 0.2, 30, 2.0);
        let c = Estimate::new(0.5, 0.05, 60, 0.7);
        let l = a.merge(&b).merge(&c);
        let r = a.merge(&b.merge(&c));
        assert!((l.value - r.value).abs() < 1e-14);
        assert!((l.stderr - r.stderr).abs() < 1e-14);
        assert!((l.tau_int - r.tau_int).abs() < 1e-14);
        assert_eq!(l.n_samples, 100);
    }

    #[test]
    fn ratio_of_indicators() {
        let den = vec![1.0; 1000];
        let num: Vec<f64> = (0..1000).map(|i| (i % 4 == 0) as u8 as f64).collect();
        let r = ratio_estimate(&num, &den).unwrap();
        assert!((r.value - 0.25).abs() < 1e-12);
        assert!(r.stderr < 0.05);
        assert!(ratio_estimate(&num, &vec![0.0; 1000]).is_none());
    }
}
