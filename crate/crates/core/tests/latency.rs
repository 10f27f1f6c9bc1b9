//! Distribution properties of the default latency models, checked on 5000
//! seeded samples per path, both on the raw model and through the benchmark.

use proptest::prelude::*;
use relaysim::relay::{sample_delay, AccessPath, LatencyModel, LatencyParams};
use relaysim::timing::{median, run_benchmark, BenchmarkSpec};

const N: u64 = 5000;
const SEED: u64 = 2014;

fn totals(path: AccessPath, seed: u64) -> Vec<f64> {
    let model = LatencyModel::for_path(path);
    (0..N).map(|i| sample_delay(&model, seed, i)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn external_mean_near_thirty() {
    let xs = totals(AccessPath::DirectExternal, SEED);
    let m = mean(&xs);
    assert!((m - 30.0).abs() <= 5.0, "mean {m}");
    assert!(xs.iter().all(|&x| x >= 0.0));
}

#[test]
fn internal_stays_in_range() {
    let xs = totals(AccessPath::DirectInternal, SEED);
    assert!(xs.iter().all(|&x| (50.0..=80.0).contains(&x)));
    // spread over the whole range, not a constant
    let (lo, hi) = xs.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    assert!(lo < 52.0 && hi > 78.0, "{lo}..{hi}");
}

#[test]
fn wifi_adds_between_100_and_210() {
    let relay = totals(AccessPath::RelayWifi, SEED);
    let direct = totals(AccessPath::DirectInternal, SEED);
    let added: Vec<f64> = relay.iter().zip(&direct).map(|(r, d)| r - d).collect();
    let inside = added.iter().filter(|&&a| (100.0..=210.0).contains(&a)).count();
    assert!(inside as f64 >= 0.99 * N as f64, "{inside} of {N}");
}

#[test]
fn internet_is_mostly_above_a_second() {
    let relay = totals(AccessPath::RelayInternet, SEED);
    let direct = totals(AccessPath::DirectInternal, SEED);
    let med = median(&relay).unwrap();
    assert!(med > 1000.0, "median {med}");
    let min_added = relay.iter().zip(&direct).map(|(r, d)| r - d).fold(f64::INFINITY, f64::min);
    assert!(min_added >= 150.0, "min added {min_added}");
}

#[test]
fn benchmark_measurements_follow_the_models() {
    let run = |path| run_benchmark(&BenchmarkSpec::new(path, SEED)).unwrap();
    let external = run(AccessPath::DirectExternal);
    assert_eq!(external.samples.len(), N as usize);
    assert!((mean(&external.samples) - 30.0).abs() <= 5.0);
    assert!(run(AccessPath::DirectInternal).samples.iter().all(|&x| (50.0..=80.0).contains(&x)));
    let internet = run(AccessPath::RelayInternet).summary();
    assert!(internet.median_ms > 1000.0 && internet.share_above_1000_ms > 0.5);
    // simulated timing: measurement equals the sampled model delay
    assert_eq!(external.samples, totals(AccessPath::DirectExternal, SEED));
}

#[test]
fn same_seed_same_sequence() {
    for path in AccessPath::ALL {
        assert_eq!(totals(path, 9), totals(path, 9));
        assert_ne!(totals(path, 9), totals(path, 10));
    }
}

proptest! {
    #[test]
    fn delays_are_finite_and_non_negative(
        seed in any::<u64>(),
        index in any::<u64>(),
        mean in 0.0f64..100.0,
        sd in 0.0f64..100.0,
    ) {
        let params = LatencyParams { external_mean_ms: mean, external_sd_ms: sd, ..LatencyParams::default() };
        for path in AccessPath::ALL {
            let model = LatencyModel::with_params(path, params.clone()).unwrap();
            let s = model.sample(seed, index);
            prop_assert!(s.base_ms.is_finite() && s.base_ms >= 0.0);
            prop_assert!(s.added_ms.is_finite() && s.added_ms >= 0.0);
        }
    }
}
