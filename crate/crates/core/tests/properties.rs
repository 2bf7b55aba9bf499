use ensroute::knn::{Metric, NeighborIndex};
use ensroute::metrics::{accuracy_contains, rouge2_f1, spearman_rho};
use ensroute::model::local_index;
use ensroute::router::argmax;
use ensroute::sim::{self, log_spaced, swapped_regions, SyntheticConfig};
use ensroute::*;
use proptest::prelude::*;

fn theta_vec(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..8.0, m)
}

fn config() -> impl Strategy<Value = SyntheticConfig> {
    (3usize..7, 40usize..120, 4usize..24, any::<u64>())
        .prop_flat_map(|(m, n, d, seed)| theta_vec(m).prop_map(move |t| SyntheticConfig::shared(n, d, t, seed)))
}

fn dataset(config: &SyntheticConfig) -> SyntheticDataset<f64> {
    sim::sample_dataset(config).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1e-12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scale_rescales_scores(config in config(), c in 0.1f64..10.0) {
        let data = dataset(&config);
        let spec = data.ensemble_spec().unwrap();
        let base = estimate_global(&data.records, &spec).unwrap();
        prop_assume!(base.clamped_triplets == 0);
        let scaled: Vec<_> = data.records.iter().map(|r| r.map_vectors(|_, _, x| x * c).unwrap()).collect();
        let est = estimate_global(&scaled, &spec).unwrap();
        let rescaled: Vec<f64> = est.scores.iter().map(|s| s * c * c).collect();
        prop_assert!(close(&rescaled, &base.scores, 1e-9));
        prop_assert_eq!(route_argmax(&est).chosen, route_argmax(&base).chosen);
    }

    #[test]
    fn translation_leaves_scores_unchanged(config in config(), shift in prop::collection::vec(-50.0f64..50.0, 24)) {
        let data = dataset(&config);
        let spec = data.ensemble_spec().unwrap();
        let base = estimate_global(&data.records, &spec).unwrap();
        prop_assume!(base.clamped_triplets == 0);
        let moved: Vec<_> = data.records.iter().map(|r| r.map_vectors(|_, c, x| x + shift[c]).unwrap()).collect();
        let est = estimate_global(&moved, &spec).unwrap();
        prop_assert!(close(&est.scores, &base.scores, 1e-6));
    }

    #[test]
    fn generator_permutation_permutes_scores(config in config(), perm_seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let data = dataset(&config);
        let spec = data.ensemble_spec().unwrap();
        let mut order: Vec<usize> = (0..spec.m()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let permuted: Vec<_> = data.records.iter().map(|r| r.permute_generators(&order).unwrap()).collect();
        let base = estimate_global(&data.records, &spec).unwrap().scores;
        let est = estimate_global(&permuted, &spec).unwrap().scores;
        let expected: Vec<f64> = order.iter().map(|&g| base[g]).collect();
        prop_assert!(close(&est, &expected, 1e-9));
    }

    #[test]
    fn estimation_is_deterministic(config in config(), n0 in 1usize..20) {
        let (a, b) = (dataset(&config), dataset(&config));
        prop_assert_eq!(&a.records, &b.records);
        let spec = a.ensemble_spec().unwrap();
        let ia = local_index(&a.records, Metric::Euclidean).unwrap();
        let ib = local_index(&b.records, Metric::Euclidean).unwrap();
        prop_assert_eq!(
            estimate_local(&a.records, &spec, &ia, n0).unwrap(),
            estimate_local(&b.records, &spec, &ib, n0).unwrap()
        );
    }

    #[test]
    fn full_neighborhood_equals_leave_one_out(config in config()) {
        let data = dataset(&config);
        let spec = data.ensemble_spec().unwrap();
        let index = local_index(&data.records, Metric::Euclidean).unwrap();
        let local = estimate_local(&data.records, &spec, &index, data.records.len() - 1).unwrap();
        let loo = estimate_leave_one_out(&data.records, &spec).unwrap();
        for (l, g) in local.iter().zip(&loo) {
            prop_assert_eq!(&l.scores, &g.scores);
        }
    }

    #[test]
    fn clamp_keeps_scores_finite(m in 3usize..6, d in 1usize..4, seed in any::<u64>()) {
        // tiny contexts make degenerate triplets likely
        let data = dataset(&SyntheticConfig::shared(2, d, vec![1.0; m], seed));
        let est = estimate_global(&data.records, &data.ensemble_spec().unwrap()).unwrap();
        prop_assert!(est.scores.iter().all(|s| s.is_finite() && *s > 0.0));
    }

    #[test]
    fn f32_agrees_with_f64(config in config()) {
        let wide = dataset(&config);
        let narrow: SyntheticDataset<f32> = sim::sample_dataset(&config).unwrap();
        let spec = wide.ensemble_spec().unwrap();
        let a = estimate_global(&wide.records, &spec).unwrap();
        prop_assume!(a.clamped_triplets == 0);
        let b = estimate_global(&narrow.records, &spec).unwrap();
        let b: Vec<f64> = b.scores.iter().map(|&s| f64::from(s)).collect();
        prop_assert!(close(&b, &a.scores, 1e-3));
    }
}

fn knn_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, usize)> {
    (1usize..60, 1usize..8).prop_flat_map(|(n, d)| {
        let point = || prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), -3.0f64..3.0], d);
        (prop::collection::vec(point(), n), point(), 0..=n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn knn_is_exact_sorted_and_excludes((keys, query, k) in knn_case(), cosine in any::<bool>(), exclude in any::<bool>()) {
        let metric = if cosine { Metric::Cosine } else { Metric::Euclidean };
        let ids: Vec<String> = (0..keys.len()).map(|i| format!("k{:03}", (i * 37) % 1000)).collect();
        let index = NeighborIndex::build(&keys, &ids, metric).unwrap();
        let excluded = exclude.then(|| ids[0].as_str());
        let available = keys.len() - usize::from(excluded.is_some());
        let k = k.min(available);
        let found = index.query(&query, k, excluded).unwrap();
        prop_assert_eq!(found.len(), k);
        prop_assert!(found.iter().all(|nb| Some(nb.id) != excluded));
        prop_assert!(found.windows(2).all(|w| (w[0].distance, w[0].id) <= (w[1].distance, w[1].id)));
        let mut all: Vec<(f64, &str)> = (0..keys.len())
            .filter(|&p| Some(ids[p].as_str()) != excluded)
            .map(|p| (index.distance(&query, p), ids[p].as_str()))
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<&str> = all.iter().take(k).map(|x| x.1).collect();
        let got: Vec<&str> = found.iter().map(|nb| nb.id).collect();
        prop_assert_eq!(got, expected);
        // a larger k extends a smaller one
        if k < available {
            let more = index.query_ids(&query, k + 1, excluded).unwrap();
            prop_assert_eq!(&more[..k], &index.query_ids(&query, k, excluded).unwrap()[..]);
        }
    }

    #[test]
    fn argmax_survives_monotone_transforms(scores in prop::collection::vec(0.01f64..100.0, 3..8), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let chosen = argmax(&scores);
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let logged: Vec<f64> = scores.iter().map(|s| s.ln()).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
        prop_assert_eq!(argmax(&affine), chosen);
        prop_assert_eq!(argmax(&logged), chosen);
        prop_assert_eq!(argmax(&cubed), chosen);
    }

    #[test]
    fn rouge_is_bounded_and_symmetric(a in "[a-c ,.]{0,30}", b in "[a-c ,.]{0,30}") {
        let (x, y) = (rouge2_f1(&a, &b), rouge2_f1(&b, &a));
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!((x - y).abs() < 1e-12);
        if ensroute::metrics::rouge_tokens(&a).len() >= 2 {
            prop_assert!((rouge2_f1(&a, &a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn containment_finds_embedded_answers(prefix in "[a-z ]{0,12}", answer in "[a-zA-Z]{1,6}( [a-z]{1,4})?", suffix in "[a-z ]{0,12}") {
        let generation = format!("{prefix} {}  {suffix}", answer.to_uppercase().replace(' ', "\t"));
        prop_assert_eq!(accuracy_contains(&generation, &[answer.as_str()]), 1);
        prop_assert_eq!(accuracy_contains(&generation, &[""]), 0);
    }

    #[test]
    fn spearman_bounded_symmetric_and_rank_based(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(rho) = spearman_rho(&a, &b) {
            prop_assert!((-1.0..=1.0).contains(&rho));
            prop_assert!((rho - spearman_rho(&b, &a).unwrap()).abs() < 1e-12);
            let squashed: Vec<f64> = a.iter().map(|x| x.exp()).collect();
            prop_assert!((rho - spearman_rho(&squashed, &b).unwrap()).abs() < 1e-12);
            let flipped: Vec<f64> = a.iter().map(|x| -x).collect();
            prop_assert!((rho + spearman_rho(&flipped, &b).unwrap()).abs() < 1e-12);
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (v[v.len() / 2] + v[(v.len() - 1) / 2]) / 2.0
}

#[test]
fn global_error_shrinks_with_more_samples() {
    let theta = log_spaced(5, 0.5, 8.0);
    let medians: Vec<f64> = [100usize, 1000, 10_000]
        .iter()
        .map(|&n| {
            median(
                (0..20)
                    .map(|seed| {
                        let data = dataset(&SyntheticConfig::shared(n, 64, theta.clone(), seed));
                        let est = estimate_global(&data.records, &data.ensemble_spec().unwrap()).unwrap();
                        est.scores.iter().zip(&theta).map(|(s, t)| (s - t).abs() / t).fold(0.0, f64::max)
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn local_accuracy_falls_as_neighborhoods_cross_regions() {
    let regions = swapped_regions(5, 8.0, 1.0);
    let accuracy: Vec<f64> = [1usize, 20, 100]
        .iter()
        .map(|&n0| {
            median(
                (0..5)
                    .map(|seed| {
                        let data: SyntheticDataset<f64> =
                            sim::sample_piecewise(&SyntheticConfig::piecewise(1000, 64, regions.clone(), 500, seed))
                                .unwrap();
                        let spec = data.ensemble_spec().unwrap();
                        let index = local_index(&data.records, Metric::Euclidean).unwrap();
                        let est = estimate_local(&data.records, &spec, &index, n0).unwrap();
                        let choices: Vec<usize> = est.iter().map(|e| route_argmax(e).chosen).collect();
                        data.routing_accuracy(&choices)
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(accuracy.windows(2).all(|w| w[1] < w[0]), "{accuracy:?}");
}
