//! Split conformal intervals, coverage scoring, permutation importance and
//! recursive multi-step forecasting.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::metrics::rmse;
use crate::nn::train::Forecaster;
use crate::rng::{derive_seed, seeded};
use crate::series::Matrix;
use crate::stats::{mean, std_dev};

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Leading share of each target city's test windows used for calibration.
pub const CALIBRATION_SHARE: f64 = 0.2;
pub const MAX_HORIZON: usize = 48;

/// Per-feature half-widths at confidence `1 − alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalCalibration {
    pub alpha: f64,
    pub q: Vec<f64>,
    pub n_cal: usize,
}

/// Calibrates from point predictions and truths, `[n × features]` each.
/// `q[f]` is the `ceil((n + 1)(1 − alpha))`-th smallest absolute residual,
/// or +∞ when that rank exceeds `n`.
pub fn calibrate_residuals<T: Copy + Into<f64>>(
    pred: &[T],
    truth: &[T],
    features: usize,
    alpha: f64,
) -> Result<ConformalCalibration> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::precondition("alpha must lie in (0, 1)"));
    }
    if features == 0 || pred.len() != truth.len() || pred.len() % features != 0 {
        return Err(Error::shape("calibration predictions and truths must be aligned [n × features]"));
    }
    let n = pred.len() / features;
    if n == 0 {
        return Err(Error::EmptyDataset("calibration set is empty".into()));
    }
    // Guard against (n+1)(1-alpha) landing a hair above an integer.
    let k = libm::ceil((n as f64 + 1.0) * (1.0 - alpha) - 1e-9) as usize;
    let mut q = Vec::with_capacity(features);
    let mut scores = vec![0.0f64; n];
    for f in 0..features {
        for (i, s) in scores.iter_mut().enumerate() {
            *s = libm::fabs(pred[i * features + f].into() - truth[i * features + f].into());
        }
        if k > n {
            q.push(f64::INFINITY);
        } else {
            let (_, kth, _) = scores.select_nth_unstable_by(k - 1, f64::total_cmp);
            q.push(*kth);
        }
    }
    Ok(ConformalCalibration { alpha, q, n_cal: n })
}

pub fn conformal_calibrate<M: Forecaster + ?Sized>(
    model: &M,
    calibration: &WindowedDataset,
    alpha: f64,
) -> Result<ConformalCalibration> {
    if calibration.is_empty() {
        return Err(Error::EmptyDataset("calibration set is empty".into()));
    }
    let pred = model.predict(&calibration.x, calibration.len())?;
    calibrate_residuals(&pred, &calibration.y, calibration.features, alpha)
}

/// Symmetric intervals `[ŷ − q, ŷ + q]`, `[n × features]` each.
#[derive(Debug, Clone, PartialEq)]
pub struct Intervals {
    pub features: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn conformal_interval<T: Copy + Into<f64>>(pred: &[T], cal: &ConformalCalibration) -> Result<Intervals> {
    let features = cal.q.len();
    if features == 0 || pred.len() % features != 0 {
        return Err(Error::shape("predictions do not match the calibration's feature count"));
    }
    let mut lower = Vec::with_capacity(pred.len());
    let mut upper = Vec::with_capacity(pred.len());
    for (i, &p) in pred.iter().enumerate() {
        let (p, q) = (p.into(), cal.q[i % features]);
        lower.push(p - q);
        upper.push(p + q);
    }
    Ok(Intervals { features, lower, upper })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub per_feature: Vec<f64>,
    /// Unweighted mean of the per-feature coverages.
    pub macro_average: f64,
    /// Mean interval width over all features, in scaled units.
    pub mean_width: f64,
}

pub fn empirical_coverage<T: Copy + Into<f64>>(intervals: &Intervals, truth: &[T]) -> Result<Coverage> {
    let f = intervals.features;
    if truth.len() != intervals.lower.len() || truth.is_empty() {
        return Err(Error::shape("truths must align with a nonempty set of intervals"));
    }
    let n = truth.len() / f;
    let mut inside = vec![0usize; f];
    let mut width = 0.0;
    for (i, &t) in truth.iter().enumerate() {
        let t = t.into();
        if intervals.lower[i] <= t && t <= intervals.upper[i] {
            inside[i % f] += 1;
        }
        width += intervals.upper[i] - intervals.lower[i];
    }
    let per_feature: Vec<f64> = inside.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(Coverage { macro_average: mean(&per_feature), mean_width: width / truth.len() as f64, per_feature })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub feature: usize,
    pub baseline_rmse: f64,
    pub permuted_mean: f64,
    pub permuted_std: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub repeats: usize,
    pub baseline_rmse: f64,
    pub features: Vec<FeatureImportance>,
}

/// Copy of `x` where the listed features' whole lookback slices are moved
/// between windows by one shared seeded permutation.
pub fn permute_features(ds: &WindowedDataset, features: &[usize], seed: u64) -> Vec<f32> {
    let mut perm: Vec<usize> = (0..ds.len()).collect();
    perm.shuffle(&mut seeded(seed));
    let mut x = ds.x.clone();
    let (t, f) = (ds.lookback, ds.features);
    for (dst, &src) in perm.iter().enumerate() {
        let s = ds.window(src);
        let d = &mut x[dst * t * f..(dst + 1) * t * f];
        for step in 0..t {
            for &feat in features {
                d[step * f + feat] = s[step * f + feat];
            }
        }
    }
    x
}

/// RMSE after shuffling the given features across windows.
pub fn permuted_rmse<M: Forecaster + ?Sized>(
    model: &M,
    test: &WindowedDataset,
    features: &[usize],
    seed: u64,
) -> Result<f64> {
    let x = permute_features(test, features, seed);
    rmse(&model.predict(&x, test.len())?, &test.y)
}

/// Degradation in RMSE when each feature is shuffled, averaged over
/// `repeats` seeded permutations. Repeat `r` uses the same permutation for
/// every feature.
pub fn permutation_importance<M: Forecaster + ?Sized>(
    model: &M,
    test: &WindowedDataset,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset("test set is empty".into()));
    }
    if repeats == 0 {
        return Err(Error::precondition("at least one repeat is required"));
    }
    let baseline = rmse(&model.predict(&test.x, test.len())?, &test.y)?;
    let mut features = Vec::with_capacity(test.features);
    for feat in 0..test.features {
        let scores = (0..repeats)
            .map(|r| permuted_rmse(model, test, &[feat], derive_seed(seed, r as u64)))
            .collect::<Result<Vec<f64>>>()?;
        let m = mean(&scores);
        features.push(FeatureImportance {
            feature: feat,
            baseline_rmse: baseline,
            permuted_mean: m,
            permuted_std: std_dev(&scores),
            delta: m - baseline,
        });
    }
    Ok(ImportanceReport { repeats, baseline_rmse: baseline, features })
}

/// Feeds predictions back as inputs for `horizon` steps, for a batch of seed
/// windows at once. Returns `[horizon × batch × features]`.
pub fn recursive_forecast_batch<M: Forecaster + ?Sized>(
    model: &M,
    windows: &[f32],
    batch: usize,
    horizon: usize,
) -> Result<Vec<f32>> {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(Error::Precondition(alloc::format!("horizon must lie in 1..={MAX_HORIZON}")));
    }
    let dims = model.dims();
    let (t, f) = (dims.lookback, dims.features);
    if windows.len() != batch * t * f {
        return Err(Error::shape("seed windows do not match the model's input shape"));
    }
    let mut cur = windows.to_vec();
    let mut out = Vec::with_capacity(horizon * batch * f);
    for step in 0..horizon {
        let pred = model.predict(&cur, batch)?;
        if pred.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("prediction at step {} is not finite", step + 1)));
        }
        for b in 0..batch {
            let w = &mut cur[b * t * f..(b + 1) * t * f];
            w.copy_within(f.., 0);
            w[(t - 1) * f..].copy_from_slice(&pred[b * f..(b + 1) * f]);
        }
        out.extend_from_slice(&pred);
    }
    Ok(out)
}

/// `[horizon × features]` forecast from a single seed window.
pub fn recursive_forecast<M: Forecaster + ?Sized>(model: &M, seed_window: &[f32], horizon: usize) -> Result<Vec<f32>> {
    recursive_forecast_batch(model, seed_window, 1, horizon)
}

/// RMSE at each lead time 1..=horizon, starting from windows whose first
/// input row is in `starts`. Every start needs `lookback + horizon` rows.
pub fn horizon_rmse<M: Forecaster + ?Sized>(
    model: &M,
    scaled: &Matrix,
    starts: &[usize],
    horizon: usize,
) -> Result<Vec<f64>> {
    let dims = model.dims();
    let (t, f) = (dims.lookback, dims.features);
    if starts.is_empty() {
        return Err(Error::EmptyDataset("no seed windows".into()));
    }
    if scaled.cols() != f || starts.iter().any(|&s| s + t + horizon > scaled.rows()) {
        return Err(Error::shape("seed windows plus horizon exceed the series"));
    }
    let mut x = Vec::with_capacity(starts.len() * t * f);
    for &s in starts {
        for r in s..s + t {
            x.extend(scaled.row(r).iter().map(|&v| v as f32));
        }
    }
    let preds = recursive_forecast_batch(model, &x, starts.len(), horizon)?;
    let b = starts.len();
    (0..horizon)
        .map(|h| {
            let truth: Vec<f32> = starts
                .iter()
                .flat_map(|&s| scaled.row(s + t + h).iter().map(|&v| v as f32))
                .collect();
            rmse(&preds[h * b * f..(h + 1) * b * f], &truth)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_windows;
    use crate::metrics::Persistence;
    use crate::nn::spec::Dims;
    use crate::rng::standard_normal;
    use proptest::prelude::*;

    #[test]
    fn calibration_examples() {
        let truth = [1.0f64, 2.0, 3.0, 4.0];
        let zeros = [0.0f64; 4];
        let c = calibrate_residuals(&zeros, &truth, 1, 0.5).unwrap();
        assert_eq!(c.q, [3.0]);
        let c = calibrate_residuals(&[0.3f64; 19], &[0.3; 19], 1, 0.05).unwrap();
        assert_eq!(c.q, [0.0]);
        let scores: Vec<f64> = (1..=19).map(f64::from).collect();
        let c = calibrate_residuals(&scores, &[0.0; 19], 1, 0.05).unwrap();
        assert_eq!(c.q, [19.0]);
        let c = calibrate_residuals(&scores[..10], &[0.0; 10], 1, 0.05).unwrap();
        assert!(c.q[0].is_infinite());
        assert!(calibrate_residuals::<f64>(&[], &[], 1, 0.05).is_err());
    }

    #[test]
    fn intervals_are_centered_and_constant_width() {
        let cal = ConformalCalibration { alpha: 0.05, q: vec![0.1, 0.0], n_cal: 10 };
        let iv = conformal_interval(&[0.5f64, 0.2, 0.9, 0.4], &cal).unwrap();
        for i in 0..4 {
            let centre = (iv.lower[i] + iv.upper[i]) / 2.0;
            assert!((centre - [0.5, 0.2, 0.9, 0.4][i]).abs() < 1e-12);
        }
        assert_eq!(iv.upper[0] - iv.lower[0], iv.upper[2] - iv.lower[2]);
        assert_eq!(iv.lower[1], iv.upper[1]);
    }

    #[test]
    fn coverage_counts() {
        let iv = Intervals { features: 1, lower: vec![0.0; 4], upper: vec![1.0; 4] };
        assert_eq!(empirical_coverage(&iv, &[0.5f64, 0.1, 0.9, 1.0]).unwrap().macro_average, 1.0);
        assert_eq!(empirical_coverage(&iv, &[0.5f64, 2.0, 0.9, -1.0]).unwrap().macro_average, 0.5);
    }

    #[test]
    fn gaussian_coverage_near_nominal() {
        let mut rng = seeded(77);
        let mut draw = |n: usize| -> (Vec<f64>, Vec<f64>) {
            let pred: Vec<f64> = (0..n * 2).map(|i| (i as f64 * 0.01).sin()).collect();
            let truth = pred.iter().map(|p| p + 0.1 * standard_normal(&mut rng)).collect();
            (pred, truth)
        };
        let (cp, ct) = draw(2000);
        let cal = calibrate_residuals(&cp, &ct, 2, 0.05).unwrap();
        let (tp, tt) = draw(10_000);
        let cov = empirical_coverage(&conformal_interval(&tp, &cal).unwrap(), &tt).unwrap();
        assert!((0.94..=0.96).contains(&cov.macro_average), "{}", cov.macro_average);
    }

    fn ramp_dataset(n: usize) -> WindowedDataset {
        let rows = n + 24;
        let data: Vec<f64> = (0..rows * 8).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect();
        make_windows(&Matrix::from_vec(rows, 8, data).unwrap(), 24).unwrap()
    }

    #[test]
    fn persistence_ignores_all_but_last_row_features() {
        // Persistence reads every feature, so each permutation changes its RMSE;
        // permuting nothing changes nothing.
        let ds = ramp_dataset(60);
        let p = Persistence::default();
        let base = rmse(&p.predict(&ds.x, ds.len()).unwrap(), &ds.y).unwrap();
        assert_eq!(permuted_rmse(&p, &ds, &[], 3).unwrap(), base);
        let a = permutation_importance(&p, &ds, 3, 1).unwrap();
        let b = permutation_importance(&p, &ds, 3, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.features.len(), 8);
    }

    #[test]
    fn recursive_persistence_is_fixed_point() {
        let ds = ramp_dataset(1);
        let out = recursive_forecast(&Persistence::default(), ds.window(0), 12).unwrap();
        let last = &ds.window(0)[23 * 8..];
        for h in 0..12 {
            assert_eq!(&out[h * 8..(h + 1) * 8], last);
        }
        assert!(recursive_forecast(&Persistence::default(), ds.window(0), 0).is_err());
        assert!(recursive_forecast(&Persistence::default(), ds.window(0), 49).is_err());
    }

    #[test]
    fn horizon_one_equals_single_step() {
        let ds = ramp_dataset(5);
        let p = Persistence { dims: Dims::default() };
        let one = recursive_forecast_batch(&p, &ds.x, 5, 1).unwrap();
        assert_eq!(one, p.predict(&ds.x, 5).unwrap());
    }

    proptest! {
        #[test]
        fn q_is_monotone_in_alpha(
            scores in proptest::collection::vec(0.0f64..10.0, 1..200),
            a1 in 0.01f64..0.5,
            gap in 0.0f64..0.49,
        ) {
            let zeros = vec![0.0; scores.len()];
            let lo = calibrate_residuals(&scores, &zeros, 1, a1).unwrap();
            let hi = calibrate_residuals(&scores, &zeros, 1, a1 + gap).unwrap();
            prop_assert!(lo.q[0] >= hi.q[0]);
        }
    }
}
