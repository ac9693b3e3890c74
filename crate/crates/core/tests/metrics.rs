use std::collections::BTreeMap;

use depscale_core::metrics::{aggregate, compare, summarize, summarize_from, Record, RunSummary, Sample, Series};
use depscale_core::Error;
use proptest::prelude::*;

fn series_of(rts: &[f64], cores: &[u32]) -> Series {
    let mut s = Series::new(vec!["f".into()]);
    for (k, (&rt, &c)) in rts.iter().zip(cores).enumerate() {
        s.records.push(Record {
            time_s: (k + 1) as f64,
            samples: vec![Sample {
                arrival_rps: 1.0,
                lrt_ms: rt,
                rt_ms: rt,
                millicores: c,
            }],
        });
    }
    s
}

fn sla(ms: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([("f".to_string(), ms)])
}

fn run_summary(series: &Series, seed: u64, mode: &str) -> RunSummary {
    RunSummary {
        mode: mode.into(),
        replication: 0,
        seed,
        functions: summarize(series, &sla(60.0)).unwrap(),
    }
}

#[test]
fn alternating_series() {
    let rts: Vec<f64> = (0..10).map(|k| if k % 2 == 0 { 30.0 } else { 90.0 }).collect();
    let s = series_of(&rts, &[500; 10]);
    let f = &summarize(&s, &sla(60.0)).unwrap()[0];
    assert_eq!((f.rt_mean_ms, f.rt_std_ms, f.violation_pct), (60.0, 30.0, 50.0));
    assert_eq!((f.cores_mean_millicores, f.cores_std_millicores), (500.0, 0.0));
    // Exactly at the SLA is not a violation.
    let f = &summarize(&series_of(&[60.0; 4], &[1; 4]), &sla(60.0)).unwrap()[0];
    assert_eq!(f.violation_pct, 0.0);
}

#[test]
fn warmup_skip_and_empty_input() {
    let s = series_of(&[1000.0, 10.0, 10.0], &[1, 1, 1]);
    let f = &summarize_from(&s, &[Some(60.0)], 1.0).unwrap()[0];
    assert_eq!((f.windows, f.rt_mean_ms, f.violation_pct), (2, 10.0, 0.0));
    assert!(matches!(summarize_from(&s, &[Some(60.0)], 3.0), Err(Error::EmptySeries)));
    assert!(matches!(summarize_from(&s, &[], 0.0), Err(Error::GridMismatch(_))));
}

#[test]
fn unpaired_comparison_is_rejected() {
    let s = series_of(&[10.0], &[1]);
    let a = [run_summary(&s, 1, "dependency_aware")];
    let b = [run_summary(&s, 2, "baseline")];
    assert!(matches!(compare(&a, &b), Err(Error::GridMismatch(_))));
}

fn samples() -> impl Strategy<Value = (Vec<f64>, Vec<u32>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(1.0f64..200.0, n),
            proptest::collection::vec(100u32..8000, n),
        )
    })
}

proptest! {
    #[test]
    fn self_comparison_is_zero((rts, cores) in samples(), seed in any::<u64>()) {
        let s = series_of(&rts, &cores);
        let a = [run_summary(&s, seed, "dependency_aware")];
        let b = [run_summary(&s, seed, "baseline")];
        let c = compare(&a, &b).unwrap();
        prop_assert_eq!(c.pairs, 1);
        for d in c.functions.iter().chain([&c.overall]) {
            prop_assert_eq!(d.cores_reduction_pct, 0.0);
            prop_assert_eq!(d.rt_delta_pct, 0.0);
            prop_assert_eq!(d.violation_delta_pp, 0.0);
        }
    }

    #[test]
    fn halves_pool_into_the_whole((rts, cores) in samples()) {
        // Equal halves: total variance is the mean within-half variance plus
        // the variance of the two half means.
        let n = rts.len() / 2 * 2;
        let (rts, cores) = (&rts[..n], &cores[..n]);
        let whole = summarize(&series_of(rts, cores), &sla(60.0)).unwrap().remove(0);
        let h1 = summarize(&series_of(&rts[..n / 2], &cores[..n / 2]), &sla(60.0)).unwrap().remove(0);
        let h2 = summarize(&series_of(&rts[n / 2..], &cores[n / 2..]), &sla(60.0)).unwrap().remove(0);
        let mu = (h1.rt_mean_ms + h2.rt_mean_ms) / 2.0;
        let spread = (h1.rt_mean_ms - h2.rt_mean_ms) / 2.0;
        let var = (h1.rt_std_ms.powi(2) + h2.rt_std_ms.powi(2)) / 2.0 + spread * spread;
        prop_assert!((whole.rt_mean_ms - mu).abs() <= 1e-9 * mu);
        prop_assert!((whole.rt_std_ms.powi(2) - var).abs() <= 1e-9 * var.max(1.0));
        let v = (h1.violation_pct + h2.violation_pct) / 2.0;
        prop_assert!((whole.violation_pct - v).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&whole.violation_pct));
    }

    #[test]
    fn aggregate_sigma_is_spread_of_means(means in proptest::collection::vec(1.0f64..500.0, 1..12)) {
        let runs: Vec<RunSummary> = means
            .iter()
            .enumerate()
            .map(|(k, &m)| run_summary(&series_of(&[m, m], &[100, 100]), k as u64, "baseline"))
            .collect();
        let rows = aggregate(&runs).unwrap();
        let mu = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / means.len() as f64;
        prop_assert_eq!(rows.len(), 2);
        prop_assert!((rows[0].rt_mu - mu).abs() <= 1e-9 * mu);
        prop_assert!((rows[0].rt_sigma - var.sqrt()).abs() <= 1e-9 * mu);
        prop_assert_eq!(rows[0].c_sigma, 0.0);
    }
}
