use biasprobe::audit::*;
use biasprobe::dataset::{Item, LabeledDataset, Split};
use biasprobe::image::ImageTensor;
use biasprobe::nn::{evaluate, train, ArchSpec, ConvBlock, TrainConfig};
use biasprobe::rng::SplitMix64;
use biasprobe::transforms::TransformSpec;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn choose(n: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn exact_tail(k: u64, n: u64, p: &BigRational) -> BigRational {
    let q = BigRational::one() - p;
    (k..=n).fold(BigRational::zero(), |acc, j| {
        acc + BigRational::from_integer(choose(n, j)) * num_traits::pow(p.clone(), j as usize) * num_traits::pow(q.clone(), (n - j) as usize)
    })
}

#[test]
fn binomial_tail_matches_exact_rational_sum() {
    for denom in [2i64, 3, 5, 7, 10, 20] {
        let p = BigRational::new(BigInt::one(), BigInt::from(denom));
        let pf = 1.0 / denom as f64;
        for n in 1..=30u64 {
            for k in 0..=n {
                let exact = exact_tail(k, n, &p).to_f64().unwrap();
                let got = binomial_p_value(k, n, pf);
                assert!((got - exact).abs() <= 1e-9 * exact, "k={k} n={n} p=1/{denom}: {got} vs {exact}");
            }
        }
    }
}

#[test]
fn binomial_worked_values() {
    assert_eq!(binomial_p_value(0, 20, 0.3), 1.0);
    assert!((binomial_p_value(15, 20, 0.5) - 21700.0 / 1048576.0).abs() < 1e-12);
    assert!((binomial_p_value(9, 9, 0.2) - 0.2f64.powi(9)).abs() < 1e-18);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn flag_is_monotone_in_correct_count(n in 1usize..400, classes in 2usize..25, alpha in 0.001f64..0.2, thr in 1.01f64..4.0) {
        let chance = 1.0 / classes as f64;
        let mut was = false;
        for k in 0..=n {
            let now = SeedResult::new(0, k, n, chance, alpha, thr).flagged;
            prop_assert!(now || !was, "unflagged at k={} after being flagged", k);
            was = now;
        }
    }

    #[test]
    fn p_value_is_non_increasing_in_k(n in 1u64..300, classes in 2u64..25) {
        let p = 1.0 / classes as f64;
        for k in 1..=n {
            prop_assert!(binomial_p_value(k, n, p) <= binomial_p_value(k - 1, n, p) * (1.0 + 1e-12));
        }
    }
}

/// Two classes told apart only by the brightness of the top-left 4x4 block
/// when `marked`; otherwise the classes are identical noise.
fn corner_set(marked: bool) -> LabeledDataset<f32> {
    let mut rng = SplitMix64::new(42);
    let mut items = Vec::new();
    for (si, (split, n)) in [(Split::Train, 60), (Split::Val, 20), (Split::Test, 40)].into_iter().enumerate() {
        for i in 0..n {
            let label = i % 2;
            let img = ImageTensor::from_fn(24, 24, 1, |y, x, _| {
                let v = 0.3 + 0.4 * rng.next_f64();
                if marked && y < 4 && x < 4 { if label == 0 { 0.05 } else { 0.95 } } else { v as f32 }
            })
            .unwrap();
            items.push(Item { path: format!("c{label}/{si}_{i:03}.png"), label, split, image: img });
        }
    }
    LabeledDataset { id: if marked { "marked".into() } else { "plain".into() }, class_names: vec!["c0".into(), "c1".into()], items }
}

fn small_config(conditions: &[&str]) -> AuditConfig {
    let mut cfg = AuditConfig::with_conditions(conditions).unwrap();
    cfg.arch = Some(ArchSpec {
        input_size: [8, 8],
        input_channels: 1,
        blocks: vec![ConvBlock::new(4)],
        fc_widths: vec![8, 2],
        num_classes: 2,
    });
    cfg.train = TrainConfig { epochs: 4, batch_size: 16, ..TrainConfig::default() };
    cfg.train.optimizer.learning_rate = 3e-3;
    cfg
}

#[test]
fn raw_only_is_inconclusive() {
    let report = run_audit(&corner_set(false), &small_config(&["raw"])).unwrap();
    assert_eq!(report.conditions.len(), 1);
    assert_eq!(report.profile_verdict, ProfileVerdict::Inconclusive);
    assert_eq!(report.conditions[0].seeds.len(), 3);
}

#[test]
fn corner_mark_is_detected_and_plain_set_is_not() {
    let marked = run_audit(&corner_set(true), &small_config(&["raw", "cropped20"])).unwrap();
    let crop = &marked.conditions[1];
    assert!(crop.information_free);
    assert!(crop.flagged, "{crop:?}");
    assert_eq!(marked.bias_verdict, BiasVerdict::BiasDetected);

    let plain = run_audit(&corner_set(false), &small_config(&["raw", "cropped20"])).unwrap();
    assert!(!plain.conditions[1].flagged, "{:?}", plain.conditions[1]);
    assert_eq!(plain.bias_verdict, BiasVerdict::NoneDetected);
}

#[test]
fn report_is_deterministic_and_round_trips() {
    let ds = corner_set(true);
    let cfg = small_config(&["raw", "scrambled@4", "median5"]);
    let a = run_audit(&ds, &cfg).unwrap();
    let b = run_audit(&ds, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(biasprobe::chart::render_chart(&a), biasprobe::chart::render_chart(&b));
    let back = AuditReport::from_json(&a.to_json()).unwrap();
    assert_eq!(back, a);
    assert_eq!(a.to_csv().lines().count(), 1 + 3 * 3);
}

#[test]
fn reported_accuracy_equals_evaluate() {
    let ds = corner_set(true);
    let cfg = small_config(&["raw"]);
    let report = run_audit(&ds, &cfg).unwrap();
    let arch = cfg.resolved_arch(2).unwrap();
    let prepared = ds.prepared(8, 8).unwrap();
    for s in &report.conditions[0].seeds {
        let model = train(&prepared, &arch, &TrainConfig { seed: s.seed, ..cfg.train.clone() }).unwrap();
        let m = evaluate(&model, &prepared, Split::Test).unwrap();
        assert_eq!(m.accuracy, s.accuracy);
        assert_eq!(m.correct, s.correct);
    }
}

#[test]
fn failing_condition_is_recorded_and_audit_continues() {
    let ds = corner_set(false);
    let mut cfg = small_config(&["raw"]);
    cfg.conditions.push(Condition { name: "too_big".into(), transform: TransformSpec::scramble(100) });
    let report = run_audit(&ds, &cfg).unwrap();
    assert_eq!(report.conditions[1].status, ConditionStatus::Failed);
    assert_eq!(report.conditions[1].failures.len(), 3);
    assert!(report.to_csv().contains("too_big,1,failed"));

    cfg.conditions.remove(0);
    assert!(cfg.validate().is_err());
}

#[test]
fn written_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_audit(&corner_set(false), &small_config(&["raw"])).unwrap();
    report.write(dir.path()).unwrap();
    for name in [REPORT_JSON, REPORT_CSV, REPORT_SVG] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 3, "no temporary files left: {names:?}");
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(REPORT_JSON)).unwrap()).unwrap();
    for key in ["dataset", "config", "conditions", "bias_verdict", "profile_verdict", "version"] {
        assert!(value.get(key).is_some(), "{key}");
    }
    let cond = &value["conditions"][0];
    for key in ["name", "transform", "seeds", "mean_accuracy", "chance", "ratio", "flagged"] {
        assert!(cond.get(key).is_some(), "{key}");
    }
    for key in ["seed", "accuracy", "n", "p_value"] {
        assert!(cond["seeds"][0].get(key).is_some(), "{key}");
    }
}
