use biasprobe::dataset::{Item, LabeledDataset, Split};
use biasprobe::image::ImageTensor;
use biasprobe::nn::{evaluate, init_params, train, ArchSpec, ConvBlock, Model, TrainConfig, RmsProp};
use biasprobe::rng::SplitMix64;

/// Central finite differences of the mean batch loss w.r.t. every parameter.
fn finite_difference_grads(model: &Model<f64>, batch: &[&ImageTensor<f64>], labels: &[usize], h: f64) -> Vec<Vec<f64>> {
    let mut probe = model.clone();
    let mut out = Vec::new();
    for t in 0..model.params.len() {
        let mut g = Vec::with_capacity(model.params[t].len());
        for i in 0..model.params[t].len() {
            let orig = probe.params[t][i];
            probe.params[t][i] = orig + h;
            let (up, _) = probe.loss_and_grads(batch, labels).unwrap();
            probe.params[t][i] = orig - h;
            let (down, _) = probe.loss_and_grads(batch, labels).unwrap();
            probe.params[t][i] = orig;
            g.push((up - down) / (2.0 * h));
        }
        out.push(g);
    }
    out
}

fn max_relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn random_image(rng: &mut SplitMix64, h: usize, w: usize) -> ImageTensor<f64> {
    ImageTensor::new(h, w, 1, (0..h * w).map(|_| rng.next_f64()).collect()).unwrap()
}

/// He-initialized weights with every tensor (biases and output layer included)
/// jittered, so no ReLU sits exactly on its kink.
fn randomized(arch: ArchSpec, seed: u64) -> Model<f64> {
    let mut model = Model::<f64>::init(arch, seed).unwrap();
    let mut rng = SplitMix64::new(seed ^ 0xF00D);
    for p in model.params.iter_mut() {
        p.iter_mut().for_each(|v| *v += 0.1 * rng.normal());
    }
    model
}

pub fn tiny_arch(seed: u64) -> ArchSpec {
    let mut rng = SplitMix64::new(seed ^ 0xA5A5);
    ArchSpec {
        input_size: [8, 8],
        input_channels: 1,
        blocks: vec![ConvBlock::new(2 + rng.below(3)), ConvBlock::new(2 + rng.below(4))],
        fc_widths: vec![4 + rng.below(4), 3],
        num_classes: 3,
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 1..=5u64 {
        let arch = tiny_arch(seed);
        let model = randomized(arch, seed);
        let mut rng = SplitMix64::new(seed * 77);
        let images: Vec<_> = (0..3).map(|_| random_image(&mut rng, 8, 8)).collect();
        let batch: Vec<_> = images.iter().collect();
        let labels = [0, 1, 2];
        let (_, analytic) = model.loss_and_grads(&batch, &labels).unwrap();
        let numeric = finite_difference_grads(&model, &batch, &labels, 1e-6);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-3, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn duplicated_batch_leaves_loss_and_grads_unchanged() {
    let model = randomized(tiny_arch(3), 3);
    let mut rng = SplitMix64::new(5);
    let images: Vec<_> = (0..3).map(|_| random_image(&mut rng, 8, 8)).collect();
    let single: Vec<_> = images.iter().collect();
    let doubled: Vec<_> = images.iter().chain(images.iter()).collect();
    let (l1, g1) = model.loss_and_grads(&single, &[0, 1, 2]).unwrap();
    let (l2, g2) = model.loss_and_grads(&doubled, &[0, 1, 2, 0, 1, 2]).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    assert!(max_relative_error(&g1, &g2) < 1e-9);
}

#[test]
fn init_is_deterministic_with_zero_bias_and_he_variance() {
    let arch = ArchSpec::mini_vgg(5, 32);
    let a = init_params::<f32>(&arch, 11);
    assert_eq!(a, init_params::<f32>(&arch, 11));
    assert_ne!(a, init_params::<f32>(&arch, 12));
    let last = a.len() - 2;
    assert!(a[last].iter().all(|&v| v == 0.0), "output layer starts at zero");
    for (i, p) in a.iter().enumerate().filter(|(i, _)| i % 2 == 1) {
        assert!(p.iter().all(|&v| v == 0.0), "bias tensor {i}");
    }
    // Second conv reads 64 channels: fan-in 3*3*64 = 576.
    let arch = ArchSpec {
        input_size: [8, 8],
        input_channels: 1,
        blocks: vec![ConvBlock::new(64), ConvBlock::new(32)],
        fc_widths: vec![2],
        num_classes: 2,
    };
    let p = init_params::<f64>(&arch, 4);
    let w = &p[2]; // 32 x 64 x 3 x 3, fan-in 576
    assert!(w.len() >= 10_000);
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
    let target = 2.0 / 576.0;
    assert!((var - target).abs() < 0.2 * target, "{var} vs {target}");
}

#[test]
fn fresh_model_loss_near_ln_c() {
    let arch = ArchSpec::mini_vgg(4, 16);
    let model = Model::<f64>::init(arch, 21).unwrap();
    let mut rng = SplitMix64::new(8);
    let images: Vec<_> = (0..40).map(|_| random_image(&mut rng, 16, 16)).collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let (loss, _) = model.loss_and_grads(&images.iter().collect::<Vec<_>>(), &labels).unwrap();
    let ln_c = 4f64.ln();
    assert!((loss - ln_c).abs() < 0.05 * ln_c, "{loss} vs {ln_c}");
}

fn bright_dark(n_per_split: usize, size: usize) -> LabeledDataset<f32> {
    let mut rng = SplitMix64::new(99);
    let mut items = Vec::new();
    for (si, split) in [Split::Train, Split::Val, Split::Test].into_iter().enumerate() {
        for i in 0..n_per_split {
            let label = i % 2;
            let base = if label == 0 { 0.25 } else { 0.75 };
            let data = (0..size * size).map(|_| (base + 0.1 * (rng.next_f64() - 0.5)) as f32).collect();
            items.push(Item {
                path: format!("c{label}/{si}_{i}.png"),
                label,
                split,
                image: ImageTensor::new(size, size, 1, data).unwrap(),
            });
        }
    }
    LabeledDataset { id: "bright_dark".into(), class_names: vec!["dark".into(), "bright".into()], items }
}

fn small_arch() -> ArchSpec {
    ArchSpec {
        input_size: [16, 16],
        input_channels: 1,
        blocks: vec![ConvBlock::new(4), ConvBlock::new(8)],
        fc_widths: vec![16, 2],
        num_classes: 2,
    }
}

#[test]
fn separable_set_is_learned_within_five_epochs() {
    let ds = bright_dark(40, 16);
    let cfg = TrainConfig { epochs: 5, batch_size: 8, seed: 1, ..TrainConfig::default() };
    let model = train(&ds, &small_arch(), &cfg).unwrap();
    assert_eq!(model.history.len(), 5);
    assert_eq!(evaluate(&model, &ds, Split::Train).unwrap().accuracy, 1.0);
}

#[test]
fn training_is_deterministic() {
    let ds = bright_dark(20, 16);
    let cfg = TrainConfig { epochs: 2, batch_size: 7, seed: 5, ..TrainConfig::default() };
    let a = train(&ds, &small_arch(), &cfg).unwrap();
    let b = train(&ds, &small_arch(), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn kept_weights_score_the_best_validation_accuracy() {
    let ds = bright_dark(20, 16);
    let cfg = TrainConfig { epochs: 4, batch_size: 8, seed: 3, ..TrainConfig::default() };
    let model = train(&ds, &small_arch(), &cfg).unwrap();
    assert_eq!(model.history.len(), 4);
    let best = model.history.iter().map(|e| e.val_acc).fold(0.0, f64::max);
    assert_eq!(evaluate(&model, &ds, Split::Val).unwrap().accuracy, best);
}

#[test]
fn zero_logits_predict_class_zero() {
    let ds = bright_dark(10, 16);
    let mut arch = small_arch();
    arch.fc_widths = vec![16, 4];
    arch.num_classes = 4;
    let mut model = Model::<f32>::init(arch, 0).unwrap();
    model.params.iter_mut().for_each(|p| p.iter_mut().for_each(|v| *v = 0.0));
    let m = evaluate(&model, &ds, Split::Test).unwrap();
    assert_eq!(m.confusion.iter().map(|r| r[0]).sum::<usize>(), m.n);
    let share0 = ds.split(Split::Test).filter(|it| it.label == 0).count() as f64 / m.n as f64;
    assert_eq!(m.accuracy, share0);
    let rows: Vec<usize> = m.confusion.iter().map(|r| r.iter().sum()).collect();
    assert_eq!(rows[0] + rows[1], m.n);
}

#[test]
fn memorizes_twenty_images() {
    let mut rng = SplitMix64::new(4);
    let mut items = Vec::new();
    for i in 0..24 {
        let label = i % 2;
        let split = if i < 20 { Split::Train } else { Split::Val };
        let data = (0..256).map(|_| rng.next_f64() as f32).collect();
        items.push(Item { path: format!("{i}"), label, split, image: ImageTensor::new(16, 16, 1, data).unwrap() });
    }
    let ds = LabeledDataset { id: "noise".into(), class_names: vec!["a".into(), "b".into()], items };
    let cfg = TrainConfig { optimizer: RmsProp { learning_rate: 1e-3, ..RmsProp::default() }, epochs: 40, batch_size: 5, seed: 2, shuffle: true, keep_best: false };
    let model = train(&ds, &small_arch(), &cfg).unwrap();
    let m = evaluate(&model, &ds, Split::Train).unwrap();
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.confusion, vec![vec![10, 0], vec![0, 10]]);
}

#[test]
fn missing_class_in_train_is_rejected() {
    let mut ds = bright_dark(6, 16);
    for it in ds.items.iter_mut().filter(|it| it.label == 1 && it.split == Split::Train) {
        it.split = Split::Val;
    }
    let err = train(&ds, &small_arch(), &TrainConfig::default()).unwrap_err();
    assert!(err.to_string().contains("bright"), "{err}");
}
