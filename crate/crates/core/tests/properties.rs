mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use famf::calibrate::{finalize_weights, residual_signal, ridge_fit, Orientation};
use famf::features::{encode_features, BASE_FEATURES};
use famf::ingest::{self, ItemKey, ItemMeta};
use famf::pipeline::{
    effect_stability, fit_variant, StabilityOptions, VariantOptions, VariantSpec,
};
use famf::sem::fit::SemObjective;
use famf::sem::optimizer::Objective;
use famf::sem::{fit_model, fit_model_from, FitOptions, SemStructure};

use common::*;

fn matrix(k: usize, p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, k * p).prop_map(move |v| DMatrix::from_vec(k, p, v))
}

fn centered(mut z: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in z.column_iter_mut() {
        let mean = c.mean();
        c.add_scalar_mut(-mean);
    }
    z
}

fn ridge_case() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
    (4usize..=12, 1usize..=4).prop_flat_map(|(k, p)| {
        (
            matrix(k, p).prop_map(centered),
            prop::collection::vec(0.0..0.3f64, k).prop_map(DVector::from_vec),
        )
    })
}

fn item_key() -> impl Strategy<Value = ItemKey> {
    (6usize..=14)
        .prop_flat_map(|k| {
            (
                Just(k),
                prop::collection::vec(
                    (
                        any::<bool>(),
                        1u32..=4,
                        prop::sample::select(vec![5u32, 7]),
                        5u32..=25,
                    ),
                    k,
                ),
                Just((1..=k as u32).collect::<Vec<_>>()).prop_shuffle(),
            )
        })
        .prop_map(|(k, rows, orders)| {
            let items = rows
                .into_iter()
                .zip(orders)
                .enumerate()
                .map(|(i, ((rev, page, width, len), order))| ItemMeta {
                    item: format!("i{i}"),
                    scale: if i < k / 2 { "A".into() } else { "B".into() },
                    reversed: rev as u8,
                    page,
                    order,
                    scale_width: width,
                    polarity: if rev { -1 } else { 1 },
                    length: len,
                })
                .collect();
            ItemKey::new(items).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ridge_norm_is_non_increasing_in_lambda((z, m) in ridge_case()) {
        let grid = [0.1, 0.5, 1.0, 2.0, 5.0, 20.0];
        let norms: Vec<f64> = grid.iter().map(|&l| ridge_fit(&z, &m, l).unwrap().gamma.norm()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn finalized_weights_are_centered_and_scaled(
        (z, m) in ridge_case(),
        lambda in prop::sample::select(vec![0.5, 1.0, 2.0, 5.0]),
    ) {
        let fit = ridge_fit(&z, &m, lambda).unwrap();
        if let Ok(fw) = finalize_weights(&z, &fit.gamma, &m, Orientation::Signal) {
            let k = z.nrows() as f64;
            prop_assert!(fw.weights.sum().abs() < 1e-10);
            prop_assert!((fw.weights.norm_squared() - k).abs() < 1e-8);
        }
    }

    #[test]
    fn finalized_weights_ignore_gamma_scale(
        (z, m) in ridge_case(),
        c in 0.01..100.0f64,
    ) {
        let fit = ridge_fit(&z, &m, 1.0).unwrap();
        let scaled = &fit.gamma * c;
        match (
            finalize_weights(&z, &fit.gamma, &m, Orientation::Signal),
            finalize_weights(&z, &scaled, &m, Orientation::Signal),
        ) {
            (Ok(a), Ok(b)) => prop_assert!((a.weights - b.weights).amax() < 1e-9),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "degeneracy depends on the scale of γ"),
        }
    }

    #[test]
    fn permuting_items_permutes_weights(
        (z, m) in ridge_case(),
        seed in any::<u64>(),
    ) {
        let k = z.nrows();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut s = seed | 1;
        for i in (1..k).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            perm.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let zp = DMatrix::from_fn(k, z.ncols(), |i, j| z[(perm[i], j)]);
        let mp = DVector::from_fn(k, |i, _| m[perm[i]]);
        let a = ridge_fit(&z, &m, 1.0).unwrap();
        let b = ridge_fit(&zp, &mp, 1.0).unwrap();
        prop_assert!((&a.gamma - &b.gamma).amax() < 1e-10);
        if let (Ok(wa), Ok(wb)) = (
            finalize_weights(&z, &a.gamma, &m, Orientation::Signal),
            finalize_weights(&zp, &b.gamma, &mp, Orientation::Signal),
        ) {
            for i in 0..k {
                prop_assert!((wa.weights[perm[i]] - wb.weights[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn residual_signal_permutes_with_items(
        v in prop::collection::vec(-0.2..0.2f64, 36),
        shift in 1usize..6,
    ) {
        let k = 6;
        let mut r = DMatrix::from_fn(k, k, |i, j| v[i * k + j]);
        r = (&r + r.transpose()) * 0.5;
        r.fill_diagonal(0.0);
        let perm: Vec<usize> = (0..k).map(|i| (i + shift) % k).collect();
        let rp = DMatrix::from_fn(k, k, |i, j| r[(perm[i], perm[j])]);
        let scales = ["A"; 6];
        let m = residual_signal(&r, &scales, false).unwrap();
        let mp = residual_signal(&rp, &scales, false).unwrap();
        for i in 0..k {
            prop_assert!((m[perm[i]] - mp[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn encoded_columns_are_standardized(key in item_key()) {
        let fm = encode_features(&key).unwrap();
        for (j, col) in fm.z.column_iter().enumerate() {
            prop_assert!(col.mean().abs() < 1e-10, "{} mean {}", fm.feature_names[j], col.mean());
            let numeric = !matches!(fm.feature_names[j].as_str(), "reversed" | "polarity");
            if numeric {
                let k = col.len() as f64;
                let var = col.iter().map(|v| v * v).sum::<f64>() / (k - 1.0);
                prop_assert!((var - 1.0).abs() < 1e-10);
            }
        }
        prop_assert_eq!(fm.clone(), encode_features(&key).unwrap());
        prop_assert!(fm.feature_names.iter().all(|f| BASE_FEATURES.contains(&f.as_str())));
    }
}

fn loadings() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(0.45..0.85f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn analytic_gradient_matches_central_differences(
        lam in loadings(),
        r in -0.5..0.5f64,
        jitter in prop::collection::vec(-0.15..0.15f64, 13),
    ) {
        let (model, items) = two_factor_model();
        let st = structure(&model, &items);
        let s = two_factor_cov(&lam, r);
        let obj = SemObjective::new(&st, &s).unwrap();
        let mut x = st.start_values(&s);
        for (i, j) in jitter.iter().enumerate().take(x.len()) {
            x[i] += j;
        }
        prop_assume!(obj.value(&x).is_some());
        let g = obj.gradient(&x).unwrap();
        let fd = numeric_gradient(|p| obj.value(p).unwrap(), &x, 1e-5);
        let scale = g.amax().max(1e-3);
        prop_assert!((&g - &fd).amax() / scale < 1e-4, "analytic {g} numeric {fd}");
    }

    #[test]
    fn freeing_a_residual_covariance_never_raises_fmin(
        lam in loadings(),
        seed in 0u64..1000,
        pair in (0usize..6, 0usize..6).prop_filter("off-diagonal", |(a, b)| a != b),
    ) {
        let (model, items) = two_factor_model();
        let st = structure(&model, &items);
        let data = draw(&two_factor_cov(&lam, 0.3), 400, seed, items.clone());
        let mom = ingest::sample_moments(&data).unwrap();
        let base = fit_model(&mom, &st, &FitOptions::default()).unwrap();
        let freed = st.free_residual_covariance(pair.0, pair.1).unwrap();
        prop_assert_eq!(freed.df(), st.df() - 1);
        let mut start = base.theta.clone().insert_row(base.theta.len(), 0.0);
        // The freed parameter is appended last; a zero start reproduces the nested optimum.
        start[base.theta.len()] = 0.0;
        let wide = fit_model_from(&mom, &freed, &FitOptions::default(), Some(&start)).unwrap();
        prop_assert!(wide.f_min <= base.f_min + 1e-9, "{} > {}", wide.f_min, base.f_min);
    }

    #[test]
    fn rescaling_an_item_leaves_the_standardized_solution(
        lam in loadings(),
        seed in 0u64..1000,
        item in 0usize..6,
        c in 0.2..5.0f64,
    ) {
        let (model, items) = regression_model();
        let st = structure(&model, &items);
        let data = draw(&two_factor_cov(&lam, 0.4), 300, seed, items.clone());
        let mut scaled = data.clone();
        scaled.values.column_mut(item).scale_mut(c);
        // The default gradient tolerance alone leaves differences near 1e-6.
        let tight = FitOptions { grad_tol: 1e-10, ..FitOptions::default() };
        let a = fit_model(&ingest::sample_moments(&data).unwrap(), &st, &tight).unwrap();
        let b = fit_model(&ingest::sample_moments(&scaled).unwrap(), &st, &tight).unwrap();
        prop_assert!((a.standardized_loadings() - b.standardized_loadings()).amax() < 1e-6);
        prop_assert!((&a.residual_cor - &b.residual_cor).amax() < 1e-6);
        let pa = a.key_paths();
        let pb = b.key_paths();
        prop_assert!((pa[0].estimate - pb[0].estimate).abs() < 1e-6);
        prop_assert!((a.chi_square - b.chi_square).abs() < 1e-6 * a.chi_square.max(1.0));
    }

    #[test]
    fn residual_correlations_are_symmetric_with_zero_diagonal(
        lam in loadings(),
        seed in 0u64..1000,
    ) {
        let (model, items) = two_factor_model();
        let st = structure(&model, &items);
        let data = draw(&two_factor_cov(&lam, 0.2), 200, seed, items);
        let sol = fit_model(&ingest::sample_moments(&data).unwrap(), &st, &FitOptions::default()).unwrap();
        let r = &sol.residual_cor;
        for i in 0..6 {
            prop_assert_eq!(r[(i, i)], 0.0);
            for j in 0..6 {
                prop_assert_eq!(r[(i, j)], r[(j, i)]);
            }
        }
    }

    #[test]
    fn fixed_method_weights_add_no_free_parameters(
        w in prop::collection::vec(-2.0..2.0f64, 6),
    ) {
        let (model, items) = two_factor_model();
        let st = structure(&model, &items);
        let fixed = st.with_fixed_method(&w).unwrap();
        prop_assert_eq!(fixed.n_free(), st.n_free());
        prop_assert_eq!(fixed.df(), st.df());
    }

    #[test]
    fn row_order_does_not_change_moments(seed in 0u64..1000, rot in 1usize..50) {
        let (_, items) = two_factor_model();
        let data = draw(&two_factor_cov(&[0.7; 6], 0.3), 60, seed, items);
        let rows: Vec<usize> = (0..data.n()).map(|i| (i + rot) % data.n()).collect();
        let a = ingest::sample_moments(&data).unwrap();
        let b = ingest::sample_moments(&data.select_rows(&rows)).unwrap();
        prop_assert!((a.cov - b.cov).amax() < 1e-14);
    }

    #[test]
    fn listwise_deletion_accounts_for_every_row(
        blanks in prop::collection::vec(any::<bool>(), 30),
    ) {
        let mut text = String::from("a,b,c\n");
        for (r, blank) in blanks.iter().enumerate() {
            let x = r as f64;
            if *blank {
                text.push_str(&format!("{x},,{}\n", x * x));
            } else {
                text.push_str(&format!("{x},{},{}\n", (x * 0.7).sin(), x * x));
            }
        }
        match ingest::parse_responses(&text) {
            Ok(m) => prop_assert_eq!(m.n() + m.dropped_rows, blanks.len()),
            Err(_) => prop_assert!(blanks.iter().filter(|b| !**b).count() < 2),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn swapping_before_and_after_negates_delta(
        seed in 0u64..1000,
        w in prop::collection::vec(-1.5..1.5f64, 6),
    ) {
        let (model, items) = regression_model();
        let data = draw(&two_factor_cov(&[0.7, 0.6, 0.8, 0.65, 0.75, 0.7], 0.4), 300, seed, items.clone());
        let mom = ingest::sample_moments(&data).unwrap();
        let opts = VariantOptions::default();
        let base = fit_variant(&mom, &model, &items, &VariantSpec::Baseline, &opts).unwrap();
        let after = fit_variant(&mom, &model, &items, &VariantSpec::Famf { weights: w }, &opts).unwrap();
        prop_assume!(base.converged && after.converged);
        let so = StabilityOptions { bootstrap: Some(40), seed, ..StabilityOptions::default() };
        let fwd = effect_stability(&base, &after, &data, &so).unwrap();
        let rev = effect_stability(&after, &base, &data, &so).unwrap();
        let again = effect_stability(&base, &after, &data, &so).unwrap();
        prop_assert_eq!(&fwd, &again);
        prop_assert_eq!(fwd.failures, rev.failures);
        for (a, b) in fwd.rows.iter().zip(&rev.rows) {
            prop_assert!((a.delta + b.delta).abs() < 1e-12);
            if let (Some(lo), Some(hi), Some(rlo), Some(rhi)) = (a.ci_lo, a.ci_hi, b.ci_lo, b.ci_hi) {
                prop_assert!((lo + rhi).abs() < 1e-9 && (hi + rlo).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn structure_from_identical_inputs_is_identical() {
    let (model, items) = two_factor_model();
    let a: SemStructure = structure(&model, &items);
    let b: SemStructure = structure(&model, &items);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}
