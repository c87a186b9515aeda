//! Property tests for the estimator, the score fusion, the ranking and the
//! evaluation bookkeeping.

use std::collections::BTreeMap;

use proptest::prelude::*;
use surface_mmd::classifier::{evaluate, rank, DiscrepancyScore, Prediction, RankedCandidate};
use surface_mmd::kernels::KernelConfig;
use surface_mmd::mmd::{averaged_mmd, mmd2_biased, mmd2_biased_raw, repetition_mmd, RepetitionOptions};
use surface_mmd::rng::{base_seed, from_seed, substream};
use surface_mmd::samples::SampleSet;
use surface_mmd::sampling::{draw_pair, prepare, DataStream, SamplingSpec, TemporalGap, TimeSeries};

fn sample_set(dim: usize, max_len: usize) -> impl Strategy<Value = SampleSet> {
    (1..=max_len).prop_flat_map(move |n| {
        prop::collection::vec(-4.0f64..4.0, n * dim).prop_map(move |v| SampleSet::from_flat(dim, v).unwrap())
    })
}

fn pair(max_len: usize) -> impl Strategy<Value = (SampleSet, SampleSet)> {
    (1usize..=3).prop_flat_map(move |d| (sample_set(d, max_len), sample_set(d, max_len)))
}

fn ranking(values: &[BTreeMap<String, f64>], weights: &BTreeMap<String, f64>) -> Vec<usize> {
    let mut c: Vec<RankedCandidate> = values
        .iter()
        .enumerate()
        .map(|(j, v)| RankedCandidate {
            class: format!("c{}", j % 3),
            class_index: j % 3,
            trial_index: j / 3,
            trial_id: j.to_string(),
            score: DiscrepancyScore::fuse(v.clone(), weights).unwrap(),
        })
        .collect();
    rank(&mut c);
    c.iter().map(|c| c.trial_id.parse().unwrap()).collect()
}

const SOURCES: [&str; 3] = ["force", "image", "vibration"];

fn per_source_rows() -> impl Strategy<Value = Vec<BTreeMap<String, f64>>> {
    prop::collection::vec(prop::collection::vec(1e-6f64..10.0, 3), 2..12).prop_map(|rows| {
        rows.into_iter()
            .map(|r| SOURCES.iter().map(|s| s.to_string()).zip(r).collect())
            .collect()
    })
}

fn weights() -> impl Strategy<Value = BTreeMap<String, f64>> {
    prop::collection::vec(0.1f64..3.0, 3).prop_map(|w| SOURCES.iter().map(|s| s.to_string()).zip(w).collect())
}

proptest! {
    #[test]
    fn mmd_is_symmetric_and_nonnegative((y, z) in pair(25), sigma in 0.2f64..5.0) {
        let cfg = KernelConfig::new(sigma).unwrap();
        let raw = mmd2_biased_raw(&y, &z, &cfg).unwrap();
        prop_assert!(raw >= -1e-9);
        let a = mmd2_biased(&y, &z, &cfg).unwrap();
        let b = mmd2_biased(&z, &y, &cfg).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a, raw.max(0.0));
    }

    #[test]
    fn mmd_of_a_set_with_itself_is_zero(y in (1usize..=4).prop_flat_map(|d| sample_set(d, 40)), sigma in 0.2f64..5.0) {
        let cfg = KernelConfig::new(sigma).unwrap();
        prop_assert_eq!(mmd2_biased(&y, &y, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn averaged_mmd_replays_from_substreams(
        a in prop::collection::vec(-3.0f64..3.0, 300..500),
        b in prop::collection::vec(-3.0f64..3.0, 300..500),
        seed in any::<u64>(),
        cross_user in any::<bool>(),
    ) {
        let spec = SamplingSpec::temporal(40, TemporalGap::Cover);
        let opts = RepetitionOptions { repetitions: 10, cross_user, ..Default::default() };
        let y = DataStream::TimeSeries(TimeSeries::new(vec![a], 100.0).unwrap());
        let z = DataStream::TimeSeries(TimeSeries::new(vec![b], 100.0).unwrap());
        let got = averaged_mmd(&y, &z, &spec, &opts, &mut from_seed(seed)).unwrap();

        let (py, pz) = (prepare(&y, &spec).unwrap(), prepare(&z, &spec).unwrap());
        let base = base_seed(&mut from_seed(seed));
        let mut values = Vec::new();
        for r in 0..10u64 {
            let (ys, zs) = draw_pair(&py, &pz, &spec, &mut substream(base, &[r])).unwrap();
            values.push(repetition_mmd(&ys, &zs, spec.channel_mode, &opts).unwrap());
        }
        let mean = values.iter().sum::<f64>() / 10.0;
        prop_assert!((got - mean).abs() <= 1e-12, "{got} vs {mean}");
    }

    #[test]
    fn fused_score_is_a_weighted_geometric_product(rows in per_source_rows(), w in weights()) {
        let v = &rows[0];
        let s = DiscrepancyScore::fuse(v.clone(), &w).unwrap();
        let direct: f64 = v.iter().map(|(k, x)| x.powf(w[k])).product();
        prop_assert!((s.value - direct).abs() <= 1e-9 * direct.max(1e-300), "{} vs {direct}", s.value);

        let doubled: BTreeMap<String, f64> = w.iter().map(|(k, x)| (k.clone(), 2.0 * x)).collect();
        let d = DiscrepancyScore::fuse(v.clone(), &doubled).unwrap();
        prop_assert!((d.value - s.value * s.value).abs() <= 1e-9 * d.value);
    }

    #[test]
    fn ranking_ignores_per_source_scale(rows in per_source_rows(), w in weights(), which in 0usize..3, c in 0.01f64..100.0) {
        let base = ranking(&rows, &w);
        let scaled: Vec<BTreeMap<String, f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                *r.get_mut(SOURCES[which]).unwrap() *= c;
                r
            })
            .collect();
        prop_assert_eq!(&ranking(&scaled, &w), &base);
        let doubled: BTreeMap<String, f64> = w.iter().map(|(k, x)| (k.clone(), 2.0 * x)).collect();
        prop_assert_eq!(&ranking(&rows, &doubled), &base);
    }

    #[test]
    fn evaluation_counts_are_consistent(
        labels in prop::collection::vec((0usize..4, 0usize..4, 0usize..3), 1..60),
    ) {
        let classes: Vec<String> = (0..4).map(|c| format!("c{c}")).collect();
        let preds: Vec<Prediction> = labels
            .iter()
            .enumerate()
            .map(|(i, &(a, p, f))| Prediction {
                test_id: i.to_string(),
                actual: classes[a].clone(),
                predicted: classes[p].clone(),
                fold: format!("user{f}"),
            })
            .collect();
        let r = evaluate(&preds, &classes).unwrap();
        prop_assert_eq!(r.total, preds.len());
        for (i, m) in r.per_class.iter().enumerate() {
            prop_assert_eq!(m.tp + m.tn + m.fp + m.fn_, r.total);
            let actual = preds.iter().filter(|p| p.actual == classes[i]).count();
            prop_assert_eq!(r.confusion[i].iter().sum::<usize>(), actual);
            prop_assert_eq!(m.tp + m.fn_, actual);
        }
        let trace: usize = (0..4).map(|i| r.confusion[i][i]).sum();
        prop_assert_eq!(trace, r.correct);
        prop_assert!((trace as f64 / r.total as f64 - r.micro_accuracy()).abs() < 1e-15);
        prop_assert_eq!(r.folds.iter().map(|f| f.count).sum::<usize>(), r.total);
        let fold_mean = r.folds.iter().map(|f| f.accuracy).sum::<f64>() / r.folds.len() as f64;
        prop_assert!((r.accuracy.mean - fold_mean).abs() < 1e-12);
    }
}
