//! Losses, curve smoothing, correlation and selectivity analyses, bootstrap.

use std::path::Path;

use crate::error::{check_dim, Error, Result};
use crate::numerics::Rng;

/// Probability floor applied before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// Mean squared error and its gradient `2(o − t)/n` with respect to `output`.
pub fn mse_loss(output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim("mse_loss", output.len(), target.len())?;
    let n = output.len() as f64;
    let loss = output.iter().zip(target).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / n;
    let grad = output.iter().zip(target).map(|(o, t)| 2.0 * (o - t) / n).collect();
    Ok((loss, grad))
}

/// Categorical cross-entropy `−log p[target]` for a one-hot `target`, with
/// `p` floored at [`LOG_FLOOR`]. The gradient is with respect to `output`.
pub fn ce_loss(output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim("ce_loss", output.len(), target.len())?;
    let total: f64 = output.iter().sum();
    if (total - 1.0).abs() > 1e-6 || output.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid(format!("ce_loss expects a probability vector, got sum {total}")));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; output.len()];
    for (i, (&p, &t)) in output.iter().zip(target).enumerate() {
        if t != 0.0 {
            let q = p.max(LOG_FLOOR);
            loss -= t * q.ln();
            grad[i] = if p > LOG_FLOOR { -t / p } else { 0.0 };
        }
    }
    Ok((loss, grad))
}

/// Binary cross-entropy summed over independent sigmoid outputs.
pub fn bce_loss(output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim("bce_loss", output.len(), target.len())?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(output.len());
    for (&p, &t) in output.iter().zip(target) {
        let q = p.clamp(LOG_FLOOR, 1.0 - LOG_FLOOR);
        loss -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
        grad.push((q - t) / (q * (1.0 - q)));
    }
    Ok((loss, grad))
}

/// Trailing mean over `min(window, i + 1)` points.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("moving_average of an empty series"));
    }
    if window == 0 {
        return Err(Error::invalid("moving_average window must be >= 1"));
    }
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / window.min(i + 1) as f64);
    }
    Ok(out)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation. Constant series are an error, not zero.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim("pearson_r", x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} points", x.len())));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Unit roles and the timescale each one is matched with.
pub const ROLE_NAMES: [&str; 3] = ["no_memory", "short_memory", "long_memory"];
pub const TIMESCALE_NAMES: [&str; 3] = ["fast", "medium", "slow"];

#[derive(Debug, Clone, PartialEq)]
pub struct SelectivityReport {
    /// `r_squared[role][timescale]`
    pub r_squared: [[f64; 3]; 3],
    /// Matched r² minus the mean of the two unmatched r², per role.
    pub selectivity: [f64; 3],
}

impl SelectivityReport {
    pub fn from_r_squared(r_squared: [[f64; 3]; 3]) -> Self {
        let selectivity = std::array::from_fn(|role| {
            let others: f64 = (0..3).filter(|&t| t != role).map(|t| r_squared[role][t]).sum();
            r_squared[role][role] - others / 2.0
        });
        Self { r_squared, selectivity }
    }

    /// `role,timescale,r_squared,selectivity`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["role", "timescale", "r_squared", "selectivity"])?;
        for (role, rname) in ROLE_NAMES.iter().enumerate() {
            for (ts, tname) in TIMESCALE_NAMES.iter().enumerate() {
                w.write_record(&[
                    rname.to_string(),
                    tname.to_string(),
                    self.r_squared[role][ts].to_string(),
                    self.selectivity[role].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// r² between each role's hidden series and each timescale's features
/// (averaged over the timescale's elements), and the derived selectivity.
///
/// `hidden[role]` is a time series; `features[timescale][element]` likewise.
pub fn timescale_selectivity(hidden: &[Vec<f64>], features: &[Vec<Vec<f64>>]) -> Result<SelectivityReport> {
    check_dim("timescale_selectivity roles", 3, hidden.len())?;
    check_dim("timescale_selectivity timescales", 3, features.len())?;
    let mut r2 = [[0.0; 3]; 3];
    for (role, h) in hidden.iter().enumerate() {
        for (ts, elems) in features.iter().enumerate() {
            if elems.is_empty() {
                return Err(Error::invalid(format!("timescale {ts} has no features")));
            }
            let mut acc = 0.0;
            for e in elems {
                let r = pearson_r(h, e).map_err(|err| match err {
                    Error::UndefinedCorrelation(m) => {
                        Error::UndefinedCorrelation(format!("{} vs {}: {m}", ROLE_NAMES[role], TIMESCALE_NAMES[ts]))
                    }
                    other => other,
                })?;
                acc += r * r;
            }
            r2[role][ts] = acc / elems.len() as f64;
        }
    }
    Ok(SelectivityReport::from_r_squared(r2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSummary {
    pub mean: f64,
    pub std: f64,
    pub num_bootstraps: usize,
    pub values_per_bootstrap: usize,
}

impl BootstrapSummary {
    /// `mean ± std` band.
    pub fn band(&self) -> (f64, f64) {
        (self.mean - self.std, self.mean + self.std)
    }

    pub fn excludes_zero(&self) -> bool {
        let (lo, hi) = self.band();
        lo > 0.0 || hi < 0.0
    }

    /// True when the two `mean ± std` bands do not overlap and `self` is lower.
    pub fn significantly_below(&self, other: &BootstrapSummary) -> bool {
        self.band().1 < other.band().0
    }
}

/// Mean and standard deviation of resample means (sampling with replacement).
pub fn bootstrap_mean_std(
    values: &[f64],
    num_bootstraps: usize,
    values_per_bootstrap: usize,
    rng: &mut Rng,
) -> Result<BootstrapSummary> {
    if values.is_empty() {
        return Err(Error::invalid("bootstrap of an empty sample"));
    }
    if num_bootstraps == 0 || values_per_bootstrap == 0 {
        return Err(Error::invalid("bootstrap sizes must be >= 1"));
    }
    let means: Vec<f64> = (0..num_bootstraps)
        .map(|_| {
            (0..values_per_bootstrap).map(|_| values[rng.below(values.len())]).sum::<f64>()
                / values_per_bootstrap as f64
        })
        .collect();
    let m = mean(&means);
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / means.len() as f64;
    Ok(BootstrapSummary { mean: m, std: var.sqrt(), num_bootstraps, values_per_bootstrap })
}

/// MSE restricted to each group of output indices. `groups` must partition
/// `0..dim`.
pub fn per_feature_error(outputs: &[Vec<f64>], targets: &[Vec<f64>], groups: &[Vec<usize>]) -> Result<Vec<f64>> {
    check_dim("per_feature_error", outputs.len(), targets.len())?;
    let dim = outputs.first().map_or(0, Vec::len);
    let mut seen = vec![0usize; dim];
    for &i in groups.iter().flatten() {
        if i >= dim {
            return Err(Error::invalid(format!("feature index {i} beyond dim {dim}")));
        }
        seen[i] += 1;
    }
    if seen.iter().any(|&c| c != 1) || groups.iter().any(Vec::is_empty) {
        return Err(Error::invalid("feature groups do not partition the outputs"));
    }
    let mut out = vec![0.0; groups.len()];
    for (o, t) in outputs.iter().zip(targets) {
        check_dim("per_feature_error sample", dim, o.len())?;
        check_dim("per_feature_error target", dim, t.len())?;
        for (g, idx) in groups.iter().enumerate() {
            out[g] += idx.iter().map(|&i| (o[i] - t[i]).powi(2)).sum::<f64>() / idx.len() as f64;
        }
    }
    let n = outputs.len().max(1) as f64;
    Ok(out.into_iter().map(|v| v / n).collect())
}

pub const MIN_INTERFERENCE_RUNS: usize = 20;

/// Across runs, the correlation between a unit's r² with the fast feature
/// and the fast-feature error increase over the no-memory model.
pub fn memory_interference_scan(runs: &[(f64, f64)]) -> Result<f64> {
    if runs.len() < MIN_INTERFERENCE_RUNS {
        return Err(Error::invalid(format!(
            "interference scan needs >= {MIN_INTERFERENCE_RUNS} runs, got {}",
            runs.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = runs.iter().copied().unzip();
    pearson_r(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::softmax;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[0.3, 0.2], &[0.3, 0.2]).unwrap().0, 0.0);
        assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 1.0]).unwrap().0, 1.0);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ce_examples() {
        assert_eq!(ce_loss(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap().0, 0.0);
        let uniform = vec![0.1; 10];
        let mut t = vec![0.0; 10];
        t[3] = 1.0;
        assert!((ce_loss(&uniform, &t).unwrap().0 - 10f64.ln()).abs() < 1e-12);
        assert!((10f64.ln() - 2.3026).abs() < 1e-4);
        assert!(ce_loss(&[0.5, 0.6], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn softmax_ce_delta_is_output_minus_target() {
        // finite differences of CE(softmax(z)) with respect to z
        let z = vec![0.3, -1.2, 2.0, 0.1];
        let t = vec![0.0, 0.0, 1.0, 0.0];
        let f = |z: &[f64]| ce_loss(&softmax(z), &t).unwrap().0;
        let fd = central_diff(f, &z, 1e-6);
        let s = softmax(&z);
        for i in 0..4 {
            assert!((fd[i] - (s[i] - t[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn moving_average_examples() {
        let x = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(moving_average(&x, 1).unwrap(), x);
        assert_eq!(moving_average(&[2.0; 6], 4).unwrap(), vec![2.0; 6]);
        assert_eq!(moving_average(&[0.0, 1.0], 2).unwrap(), vec![0.0, 0.5]);
        assert!(moving_average(&[], 3).is_err());
        assert!(moving_average(&[1.0], 0).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = vec![1.0, 2.0, 4.0, 7.0];
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson_r(&x, &[1.0; 4]), Err(Error::UndefinedCorrelation(_))));

        let mut rng = Rng::new(31);
        let a: Vec<f64> = (0..10_000).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.next_f64()).collect();
        assert!(pearson_r(&a, &b).unwrap().abs() < 0.05);
    }

    #[test]
    fn selectivity_perfect_tracking() {
        let mut rng = Rng::new(5);
        let series: Vec<Vec<f64>> = (0..3).map(|_| (0..500).map(|_| rng.next_f64()).collect()).collect();
        let features: Vec<Vec<Vec<f64>>> = series.iter().map(|s| vec![s.clone(), s.clone()]).collect();
        let rep = timescale_selectivity(&series, &features).unwrap();
        for role in 0..3 {
            let unmatched: f64 = (0..3).filter(|&t| t != role).map(|t| rep.r_squared[role][t]).sum::<f64>() / 2.0;
            assert!((rep.selectivity[role] - (1.0 - unmatched)).abs() < 1e-12);
            assert!(rep.selectivity[role] >= 0.0);
        }
        let exact = SelectivityReport::from_r_squared([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(exact.selectivity, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn selectivity_identical_hidden_series() {
        let mut rng = Rng::new(6);
        let h: Vec<f64> = (0..300).map(|_| rng.next_f64()).collect();
        let features: Vec<Vec<Vec<f64>>> =
            (0..3).map(|_| (0..2).map(|_| (0..300).map(|_| rng.next_f64()).collect()).collect()).collect();
        let rep = timescale_selectivity(&[h.clone(), h.clone(), h], &features).unwrap();
        let total: f64 = rep.r_squared[0].iter().sum();
        for role in 0..3 {
            // matched − mean(unmatched) = (3·matched − total)/2
            let expected = (3.0 * rep.r_squared[0][role] - total) / 2.0;
            assert!((rep.selectivity[role] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn selectivity_propagates_undefined_correlation() {
        let flat = vec![0.0; 10];
        let ramp: Vec<f64> = (0..10).map(f64::from).collect();
        let features = vec![vec![ramp.clone()]; 3];
        let err = timescale_selectivity(&[flat, ramp.clone(), ramp], &features).unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrelation(_)));
    }

    #[test]
    fn bootstrap_examples() {
        let s = bootstrap_mean_std(&[2.5; 40], 1000, 50, &mut Rng::new(1)).unwrap();
        assert_eq!((s.mean, s.std), (2.5, 0.0));
        assert!(bootstrap_mean_std(&[], 10, 10, &mut Rng::new(1)).is_err());

        // binomial standard error: values {0,1} in equal shares
        let values: Vec<f64> = (0..10_000).map(|i| (i % 2) as f64).collect();
        let s = bootstrap_mean_std(&values, 10_000, 50, &mut Rng::new(2)).unwrap();
        let se = 0.5 / 50f64.sqrt();
        assert!((s.std - se).abs() < 0.05 * se, "{} vs {se}", s.std);
        // mean of bootstrap means within 3 standard errors of the sample mean
        assert!((s.mean - 0.5).abs() < 3.0 * se / (10_000f64).sqrt());
    }

    #[test]
    fn bootstrap_full_size_converges_to_sample_mean() {
        let mut rng = Rng::new(12);
        let values: Vec<f64> = (0..50).map(|_| rng.uniform(-1.0, 3.0)).collect();
        let sample_mean = mean(&values);
        let s = bootstrap_mean_std(&values, 100_000, values.len(), &mut Rng::new(3)).unwrap();
        assert!((s.mean - sample_mean).abs() < 4.0 * s.std / (100_000f64).sqrt());
    }

    #[test]
    fn per_feature_error_examples() {
        let groups = vec![vec![0, 1], vec![2, 3], vec![4, 5]];
        let x = vec![vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]; 3];
        assert_eq!(per_feature_error(&x, &x, &groups).unwrap(), vec![0.0; 3]);
        let mut y = x.clone();
        for s in &mut y {
            s[0] += 0.5;
        }
        let e = per_feature_error(&y, &x, &groups).unwrap();
        assert!(e[0] > 0.0 && e[1] == 0.0 && e[2] == 0.0);
        assert!(per_feature_error(&x, &x, &[vec![0, 1], vec![2, 3]]).is_err());
        assert!(per_feature_error(&x, &x, &[vec![0, 1, 2, 3, 4, 5], vec![0]]).is_err());
    }

    #[test]
    fn interference_scan_examples() {
        let mut rng = Rng::new(4);
        let planted: Vec<(f64, f64)> = (0..40)
            .map(|_| {
                let x = rng.next_f64();
                (x, 2.0 * x + 0.1 * rng.next_f64())
            })
            .collect();
        assert!(memory_interference_scan(&planted).unwrap() > 0.9);

        let mut ys: Vec<f64> = planted.iter().map(|p| p.1).collect();
        let mut null_stats = Vec::new();
        for seed in 0..200 {
            Rng::new(seed).shuffle(&mut ys);
            let shuffled: Vec<(f64, f64)> = planted.iter().map(|p| p.0).zip(ys.iter().copied()).collect();
            null_stats.push(memory_interference_scan(&shuffled).unwrap());
        }
        assert!(mean(&null_stats).abs() < 0.05);
        assert!(memory_interference_scan(&planted[..10]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn loss_gradients_match_finite_differences(
            o in proptest::collection::vec(0.05f64..0.95, 2..8),
            seed in any::<u64>(),
        ) {
            let mut rng = Rng::new(seed);
            let t: Vec<f64> = o.iter().map(|_| rng.next_f64()).collect();
            let (_, g) = mse_loss(&o, &t).unwrap();
            let fd = central_diff(|x| mse_loss(x, &t).unwrap().0, &o, 1e-6);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() < 1e-6);
            }

            let total: f64 = o.iter().sum();
            let p: Vec<f64> = o.iter().map(|v| v / total).collect();
            let mut onehot = vec![0.0; p.len()];
            onehot[rng.below(p.len())] = 1.0;
            let (_, g) = ce_loss(&p, &onehot).unwrap();
            // perturb one coordinate at a time, ignoring normalization
            let f = |x: &[f64]| -> f64 {
                x.iter().zip(&onehot).filter(|(_, &t)| t > 0.0).map(|(q, _)| -q.ln()).sum()
            };
            let fd = central_diff(f, &p, 1e-7);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }

        #[test]
        fn pearson_affine_invariance(
            x in proptest::collection::vec(-5.0f64..5.0, 5..40),
            a in 0.1f64..10.0, b in -10.0f64..10.0,
            seed in any::<u64>(),
        ) {
            let mut rng = Rng::new(seed);
            let y: Vec<f64> = x.iter().map(|v| v + rng.uniform(-1.0, 1.0)).collect();
            if let Ok(r) = pearson_r(&x, &y) {
                let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((pearson_r(&xs, &y).unwrap() - r).abs() < 1e-12);
            }
        }

        #[test]
        fn selectivity_ignores_element_order(seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let mut series = || -> Vec<f64> { (0..60).map(|_| rng.next_f64()).collect() };
            let hidden = vec![series(), series(), series()];
            let features: Vec<Vec<Vec<f64>>> = (0..3).map(|_| vec![series(), series()]).collect();
            let swapped: Vec<Vec<Vec<f64>>> = features.iter().map(|f| vec![f[1].clone(), f[0].clone()]).collect();
            let a = timescale_selectivity(&hidden, &features).unwrap();
            let b = timescale_selectivity(&hidden, &swapped).unwrap();
            for r in 0..3 {
                prop_assert!((a.selectivity[r] - b.selectivity[r]).abs() < 1e-12);
            }
        }
    }
}
