//! Goodness-of-fit helpers.

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample KS test, with the usual small-sample
/// correction of the scaling factor.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample KS test of `sample` against Exp(1). Returns (D, p).
pub fn ks_exponential(sample: &[f64]) -> (f64, f64) {
    let d = ks_statistic(sample, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() });
    (d, ks_p_value(d, sample.len()))
}

/// Two-sample KS test. Returns (D, p) with the asymptotic p-value at the
/// effective size `n m / (n + m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    if n == 0 || m == 0 {
        return (0.0, 1.0);
    }
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        // step past every copy of the smaller value in both samples
        let x = xs[i].min(ys[j]);
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let eff = (n * m) as f64 / (n + m) as f64;
    let se = eff.sqrt();
    (d, kolmogorov_survival((se + 0.12 + 0.11 / se) * d))
}

/// P(K > x) for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Index drawn with probability proportional to `exp(log_weights)`.
/// `u` must lie in `[0, 1)`. Entries equal to `-inf` are never chosen.
pub fn sample_log_categorical(log_weights: &[f64], u: f64) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(max.is_finite(), "no category has positive weight");
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut target = u * total;
    let mut last = 0;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            last = i;
            if target < wi {
                return i;
            }
            target -= wi;
        }
    }
    last
}

/// Normalized probabilities from log-weights.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn two_sample_extremes() {
        let a: Vec<f64> = (0..50).map(f64::from).collect();
        let b: Vec<f64> = (100..150).map(f64::from).collect();
        let (d, p) = ks_two_sample(&a, &b);
        assert_eq!(d, 1.0);
        assert!(p < 1e-10);
        let (d, p) = ks_two_sample(&a, &a);
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn two_sample_same_law() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&a, &b).1 > 0.01);
        let c: Vec<f64> = b.iter().map(|x| x * 1.1).collect();
        assert!(ks_two_sample(&a, &c).1 < 0.01);
    }

    #[test]
    fn kolmogorov_known_values() {
        // P(K > 1.36) is the classic 5% critical point
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn exponential_sample_passes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..2000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let (_, p) = ks_exponential(&xs);
        assert!(p > 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 1.5).collect();
        assert!(ks_exponential(&shifted).1 < 1e-6);
    }

    #[test]
    fn categorical_frequencies() {
        let lw = [0.0, 2f64.ln(), f64::NEG_INFINITY];
        let mut counts = [0usize; 3];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30_000 {
            counts[sample_log_categorical(&lw, rng.random())] += 1;
        }
        assert_eq!(counts[2], 0);
        let frac = counts[1] as f64 / 30_000.0;
        assert!((frac - 2.0 / 3.0).abs() < 0.015);
        let p = softmax(&lw);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12);
    }
}
