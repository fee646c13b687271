//! Monte Carlo oracles for the trend battery: Durbin-Watson behavior on
//! white noise, variance-corrected Mann-Kendall under strong serial
//! correlation, and slope recovery of the full battery.

use agetrace::model::{MetricSeries, SeriesKind};
use agetrace::synth::{generate_values, SeriesSpec};
use agetrace::trend::{
    detect_trend, durbin_watson, mann_kendall, mann_kendall_hamed_rao, Alpha, Decision,
};

fn noise_series(seed: u64, slope: f64, sigma: f64, phi: f64) -> MetricSeries {
    let spec = SeriesSpec {
        n: 720,
        dt: 30.0,
        slope,
        intercept: 300.0,
        noise_sigma: sigma,
        ar1_phi: phi,
        outlier_rate: 0.0,
        outlier_scale: 1.0,
        seed,
    };
    MetricSeries::new(
        "e",
        "m",
        "ms",
        SeriesKind::Instantaneous,
        generate_values(&spec).unwrap(),
    )
    .unwrap()
}

#[test]
fn durbin_watson_mean_is_two_on_white_noise() {
    let reps = 1000;
    let mut sum = 0.0;
    for seed in 0..reps {
        let series = noise_series(30_000 + seed, 0.0, 50.0, 0.0);
        sum += durbin_watson(&series).unwrap().statistic;
    }
    let mean = sum / reps as f64;
    assert!((mean - 2.0).abs() < 0.05, "mean d = {mean}");
}

#[test]
fn variance_correction_restores_calibration_under_strong_ar1() {
    let reps = 1000;
    let alpha = Alpha::default();
    let mut plain_rejections = 0;
    let mut corrected_rejections = 0;
    for seed in 0..reps {
        let series = noise_series(40_000 + seed, 0.0, 50.0, 0.8);
        if mann_kendall(&series, alpha).unwrap().decision == Decision::Reject {
            plain_rejections += 1;
        }
        if mann_kendall_hamed_rao(&series, alpha).unwrap().decision == Decision::Reject {
            corrected_rejections += 1;
        }
    }
    let plain_rate = plain_rejections as f64 / reps as f64;
    let corrected_rate = corrected_rejections as f64 / reps as f64;
    assert!(plain_rate > 0.20, "plain MK false-positive rate {plain_rate}");
    assert!(corrected_rate <= 0.10, "corrected rate {corrected_rate}");
}

#[test]
fn battery_declares_and_covers_injected_slope() {
    let reps = 1000;
    let injected = 0.01;
    let mut joint = 0;
    for seed in 0..reps {
        let series = noise_series(60_000 + seed, injected, 50.0, 0.0);
        let verdict = detect_trend(&series, Alpha::default()).unwrap();
        let covered = verdict.sen.ci_low <= injected && injected <= verdict.sen.ci_high;
        if verdict.declared && covered {
            joint += 1;
        }
    }
    let rate = joint as f64 / reps as f64;
    assert!(rate >= 0.95, "declared-and-covered rate {rate}");
}
