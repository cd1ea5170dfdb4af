//! The six classifier architectures, realized as computation graphs.
//!
//! Hyperparameters (filter counts, kernel sizes, depths, widths) are fixed
//! properties of each architecture and live here as constants; `ModelSpec`
//! carries only what varies between runs (input length and seed). All
//! classifiers take 4 input channels and emit 2-class softmax probabilities.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::graph::{GraphBuilder, Model};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    EKYT,
    FCN,
    INCEPTION,
    MCDCNN,
    TCN,
    TLENET,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::EKYT,
        ModelKind::FCN,
        ModelKind::INCEPTION,
        ModelKind::MCDCNN,
        ModelKind::TCN,
        ModelKind::TLENET,
    ];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::EKYT => "EKYT",
            ModelKind::FCN => "FCN",
            ModelKind::INCEPTION => "INCEPTION",
            ModelKind::MCDCNN => "MCDCNN",
            ModelKind::TCN => "TCN",
            ModelKind::TLENET => "TLENET",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EKYT" => Ok(ModelKind::EKYT),
            "FCN" => Ok(ModelKind::FCN),
            "INCEPTION" | "INCEPTIONTIME" => Ok(ModelKind::INCEPTION),
            "MCDCNN" => Ok(ModelKind::MCDCNN),
            "TCN" => Ok(ModelKind::TCN),
            "TLENET" | "TLE-NET" => Ok(ModelKind::TLENET),
            other => Err(NnError::InvalidSpec(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Run-varying part of an architecture description. Identical (spec, seed)
/// values build bitwise-identical models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub in_channels: usize,
    pub input_len: usize,
    pub n_classes: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_len: usize, seed: u64) -> Self {
        ModelSpec { kind, in_channels: 4, input_len, n_classes: 2, seed }
    }

    fn validate(&self, expected: ModelKind) -> Result<(), NnError> {
        if self.kind != expected {
            return Err(NnError::InvalidSpec(format!(
                "spec kind {} passed to the {} builder",
                self.kind, expected
            )));
        }
        if self.in_channels != 4 {
            return Err(NnError::InvalidSpec(format!(
                "all classifiers take 4 input channels, got {}",
                self.in_channels
            )));
        }
        if self.n_classes != 2 {
            return Err(NnError::InvalidSpec(format!(
                "binary classification head requires 2 classes, got {}",
                self.n_classes
            )));
        }
        if self.input_len < 8 {
            return Err(NnError::InvalidSpec(format!(
                "input length {} too short (minimum 8 for the pooling stacks)",
                self.input_len
            )));
        }
        Ok(())
    }
}

/// Builds the architecture named by `spec.kind`.
pub fn build_model(spec: &ModelSpec) -> Result<Model, NnError> {
    match spec.kind {
        ModelKind::EKYT => build_ekyt(spec),
        ModelKind::FCN => build_fcn(spec),
        ModelKind::INCEPTION => build_inception(spec),
        ModelKind::MCDCNN => build_mcdcnn(spec),
        ModelKind::TCN => build_tcn(spec),
        ModelKind::TLENET => build_tlenet(spec),
    }
}

/// Densely connected block of 8 dilated convolutions (kernel 3, growth 32,
/// dilations doubling and capped at 64), each layer fed the concatenation of
/// the input and all earlier layer outputs; final concatenated width
/// 4 + 8×32 = 260 → global average pool → 128-dim embedding → BN → ReLU →
/// linear 2-class head.
pub fn build_ekyt(spec: &ModelSpec) -> Result<Model, NnError> {
    spec.validate(ModelKind::EKYT)?;
    const LAYERS: usize = 8;
    const GROWTH: usize = 32;
    const KERNEL: usize = 3;
    const MAX_DILATION: usize = 64;
    const EMBEDDING: usize = 128;

    let mut b = GraphBuilder::new(spec.seed);
    let x = b.input();
    let mut feats = vec![x];
    let mut width = spec.in_channels;
    for i in 0..LAYERS {
        let dilation = (1usize << i).min(MAX_DILATION);
        let input = if feats.len() == 1 {
            x
        } else {
            b.concat(feats.clone(), &format!("block.cat{i}"))
        };
        let conv = b.conv(input, &format!("block.conv{i}"), width, GROWTH, KERNEL, dilation, true);
        let act = b.relu(conv, &format!("block.relu{i}"));
        feats.push(act);
        width += GROWTH;
    }
    let trunk = b.concat(feats, "trunk"); // width 260
    let pooled = b.global_avg_pool(trunk, "gap");
    let embed = b.dense(pooled, "embed", width, EMBEDDING);
    let bn = b.batch_norm(embed, "head.bn", EMBEDDING);
    let act = b.relu(bn, "head.relu");
    let logits = b.dense(act, "head.fc", EMBEDDING, spec.n_classes);
    let out = b.softmax(logits, "softmax");
    Ok(b.build(spec.clone(), out))
}

/// Three same-padded conv+BN+ReLU stages (128 k8, 256 k5, 128 k3), global
/// average pooling, linear head.
pub fn build_fcn(spec: &ModelSpec) -> Result<Model, NnError> {
    spec.validate(ModelKind::FCN)?;
    const FILTERS: [usize; 3] = [128, 256, 128];
    const KERNELS: [usize; 3] = [8, 5, 3];

    let mut b = GraphBuilder::new(spec.seed);
    let x = b.input();
    let mut cur = x;
    let mut width = spec.in_channels;
    for i in 0..3 {
        let conv = b.conv(cur, &format!("conv{}", i + 1), width, FILTERS[i], KERNELS[i], 1, true);
        let bn = b.batch_norm(conv, &format!("bn{}", i + 1), FILTERS[i]);
        cur = b.relu(bn, &format!("relu{}", i + 1));
        width = FILTERS[i];
    }
    let pooled = b.global_avg_pool(cur, "gap");
    let logits = b.dense(pooled, "fc", width, spec.n_classes);
    let out = b.softmax(logits, "softmax");
    Ok(b.build(spec.clone(), out))
}

/// Six inception blocks. Each block bottlenecks its input to 32 maps, runs
/// three parallel same-padded convolutions (kernels 8/4/2, 32 maps each,
/// bias-free) plus a maxpool(3)→1×1-conv branch, concatenates to 128 maps,
/// then BN + ReLU. Projection shortcuts (1×1 conv + BN) are added after
/// blocks 3 and 6, each followed by ReLU. Global average pool, linear head.
pub fn build_inception(spec: &ModelSpec) -> Result<Model, NnError> {
    spec.validate(ModelKind::INCEPTION)?;
    const BLOCKS: usize = 6;
    const BOTTLENECK: usize = 32;
    const BRANCH: usize = 32;
    const KERNELS: [usize; 3] = [8, 4, 2];
    const WIDTH: usize = 4 * BRANCH; // 128

    let mut b = GraphBuilder::new(spec.seed);
    let x = b.input();
    let mut cur = x;
    let mut width = spec.in_channels;
    let mut residual_origin = x;
    let mut residual_width = spec.in_channels;
    let mut shortcut_no = 0;
    for i in 1..=BLOCKS {
        let prefix = format!("block{i}");
        let bottleneck =
            b.conv(cur, &format!("{prefix}.bottleneck"), width, BOTTLENECK, 1, 1, false);
        let mut branches = Vec::with_capacity(4);
        for (j, &k) in KERNELS.iter().enumerate() {
            branches.push(b.conv(
                bottleneck,
                &format!("{prefix}.branch{j}"),
                BOTTLENECK,
                BRANCH,
                k,
                1,
                false,
            ));
        }
        let pooled = b.max_pool_same(cur, 3, &format!("{prefix}.maxpool"));
        branches.push(b.conv(pooled, &format!("{prefix}.poolconv"), width, BRANCH, 1, 1, false));
        let cat = b.concat(branches, &format!("{prefix}.cat"));
        let bn = b.batch_norm(cat, &format!("{prefix}.bn"), WIDTH);
        cur = b.relu(bn, &format!("{prefix}.relu"));
        width = WIDTH;
        if i % 3 == 0 {
            shortcut_no += 1;
            let prefix = format!("shortcut{shortcut_no}");
            let proj = b.conv(
                residual_origin,
                &format!("{prefix}.proj"),
                residual_width,
                WIDTH,
                1,
                1,
                false,
            );
            let bn = b.batch_norm(proj, &format!("{prefix}.bn"), WIDTH);
            let sum = b.add_nodes(cur, bn, &format!("{prefix}.add"));
            cur = b.relu(sum, &format!("{prefix}.relu"));
            residual_origin = cur;
            residual_width = WIDTH;
        }
    }
    let pooled = b.global_avg_pool(cur, "gap");
    let logits = b.dense(pooled, "fc", WIDTH, spec.n_classes);
    let out = b.softmax(logits, "softmax");
    Ok(b.build(spec.clone(), out))
}

/// Multi-channel deep CNN: each input channel gets its own
/// conv(8, k5) → ReLU → pool(2) → conv(8, k5) → ReLU → pool(2) tower;
/// tower outputs are flattened, concatenated, and fed through a 732-unit
/// hidden layer to the 2-class head.
pub fn build_mcdcnn(spec: &ModelSpec) -> Result<Model, NnError> {
    spec.validate(ModelKind::MCDCNN)?;
    const FILTERS: usize = 8;
    const KERNEL: usize = 5;
    const HIDDEN: usize = 732;

    let mut b = GraphBuilder::new(spec.seed);
    let x = b.input();
    let t_after = (spec.input_len / 2) / 2;
    let mut flats = Vec::with_capacity(spec.in_channels);
    for c in 0..spec.in_channels {
        let prefix = format!("ch{c}");
        let s = b.channel_slice(x, c, 1, &format!("{prefix}.slice"));
        let c1 = b.conv(s, &format!("{prefix}.conv1"), 1, FILTERS, KERNEL, 1, true);
        let r1 = b.relu(c1, &format!("{prefix}.relu1"));
        let p1 = b.max_pool(r1, 2, &format!("{prefix}.pool1"));
        let c2 = b.conv(p1, &format!("{prefix}.conv2"), FILTERS, FILTERS, KERNEL, 1, true);
        let r2 = b.relu(c2, &format!("{prefix}.relu2"));
        let p2 = b.max_pool(r2, 2, &format!("{prefix}.pool2"));
        flats.push(b.flatten(p2, &format!("{prefix}.flatten")));
    }
    let cat = b.concat(flats, "cat");
    let hidden = b.dense(cat, "fc1", spec.in_channels * FILTERS * t_after, HIDDEN);
    let act = b.relu(hidden, "fc1.relu");
    let logits = b.dense(act, "fc2", HIDDEN, spec.n_classes);
    let out = b.softmax(logits, "softmax");
    Ok(b.build(spec.clone(), out))
}

/// Plain three-stage temporal convolution stack (64 → 128 → 256 filters,
/// kernel 3, pad 1) with ReLU between stages, global average pooling, and a
/// linear head.
pub fn build_tcn(spec: &ModelSpec) -> Result<Model, NnError> {
    spec.validate(ModelKind::TCN)?;
    const FILTERS: [usize; 3] = [64, 128, 256];

    let mut b = GraphBuilder::new(spec.seed);
    let x = b.input();
    let mut cur = x;
    let mut width = spec.in_channels;
    for (i, &f) in FILTERS.iter().enumerate() {
        let conv = b.conv(cur, &format!("conv{}", i + 1), width, f, 3, 1, true);
        cur = b.relu(conv, &format!("relu{}", i + 1));
        width = f;
    }
    let pooled = b.global_avg_pool(cur, "gap");
    let logits = b.dense(pooled, "fc", width, spec.n_classes);
    let out = b.softmax(logits, "softmax");
    Ok(b.build(spec.clone(), out))
}

/// Time-LeNet: conv(5, k5) → pool(2) → conv(20, k5) → pool(4) → flatten →
/// 500-unit hidden layer → 2-class head. The convolutions feed the pools
/// directly; the only ReLU sits after the hidden layer.
pub fn build_tlenet(spec: &ModelSpec) -> Result<Model, NnError> {
    spec.validate(ModelKind::TLENET)?;
    const FILTERS: (usize, usize) = (5, 20);
    const KERNEL: usize = 5;
    const HIDDEN: usize = 500;

    let mut b = GraphBuilder::new(spec.seed);
    let x = b.input();
    let c1 = b.conv(x, "conv1", spec.in_channels, FILTERS.0, KERNEL, 1, true);
    let p1 = b.max_pool(c1, 2, "pool1");
    let c2 = b.conv(p1, "conv2", FILTERS.0, FILTERS.1, KERNEL, 1, true);
    let p2 = b.max_pool(c2, 4, "pool2");
    let flat = b.flatten(p2, "flatten");
    let t_after = (spec.input_len / 2) / 4;
    let hidden = b.dense(flat, "fc1", FILTERS.1 * t_after, HIDDEN);
    let act = b.relu(hidden, "fc1.relu");
    let logits = b.dense(act, "fc2", HIDDEN, spec.n_classes);
    let out = b.softmax(logits, "softmax");
    Ok(b.build(spec.clone(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::{Mode, ParamValue};
    use ndarray::{s, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(b: usize, len: usize, seed: u64) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((b, 4, len), |_| rng.gen::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn fixed_length_architectures_have_frozen_param_counts() {
        // these four are L-independent thanks to global average pooling
        for (kind, expected) in [
            (ModelKind::EKYT, 123_266),
            (ModelKind::FCN, 268_034),
            (ModelKind::INCEPTION, 146_434),
            (ModelKind::TCN, 124_610),
        ] {
            let model = build_model(&ModelSpec::new(kind, 64, 1)).unwrap();
            assert_eq!(model.param_count(), expected, "{kind}");
            let model2 = build_model(&ModelSpec::new(kind, 640, 1)).unwrap();
            assert_eq!(model2.param_count(), expected, "{kind} at other length");
        }
    }

    #[test]
    fn flatten_architectures_scale_with_input_length() {
        let m = build_model(&ModelSpec::new(ModelKind::MCDCNN, 1250, 1)).unwrap();
        assert_eq!(m.param_count(), 7_311_990);
        let t = build_model(&ModelSpec::new(ModelKind::TLENET, 1250, 1)).unwrap();
        assert_eq!(t.param_count(), 1_562_127);
    }

    #[test]
    fn all_models_emit_probability_rows() {
        for kind in ModelKind::ALL {
            let mut model = build_model(&ModelSpec::new(kind, 16, 3)).unwrap();
            let x = random_batch(3, 16, 9);
            let probs = model.forward(&x).unwrap();
            assert_eq!(probs.dim(), (3, 2), "{kind}");
            for row in probs.rows() {
                let sum = row[0] + row[1];
                assert!((sum - 1.0).abs() < 1e-6, "{kind}: row sums to {sum}");
                assert!(row[0] >= 0.0 && row[1] >= 0.0);
            }
        }
    }

    #[test]
    fn same_seed_builds_identical_parameters() {
        for kind in ModelKind::ALL {
            let a = build_model(&ModelSpec::new(kind, 16, 7)).unwrap();
            let b = build_model(&ModelSpec::new(kind, 16, 7)).unwrap();
            assert_eq!(a.params.len(), b.params.len());
            for (pa, pb) in a.params.iter().zip(&b.params) {
                assert_eq!(pa, pb, "{kind}: {}", pa.name);
            }
            let c = build_model(&ModelSpec::new(kind, 16, 8)).unwrap();
            let differs = a
                .params
                .iter()
                .zip(&c.params)
                .any(|(pa, pc)| pa.value.as_slice() != pc.value.as_slice());
            assert!(differs, "{kind}: different seeds must differ");
        }
    }

    #[test]
    fn eval_mode_is_batch_independent() {
        for kind in ModelKind::ALL {
            let mut model = build_model(&ModelSpec::new(kind, 16, 5)).unwrap();
            model.set_mode(Mode::Eval);
            let x = random_batch(4, 16, 11);
            let probs = model.forward(&x).unwrap();
            // duplicate sample 2 into a fresh batch with different companions
            let mut x2 = random_batch(4, 16, 12);
            x2.slice_mut(s![1, .., ..]).assign(&x.slice(s![2, .., ..]));
            let probs2 = model.forward(&x2).unwrap();
            for c in 0..2 {
                assert_eq!(probs[[2, c]], probs2[[1, c]], "{kind}");
            }
        }
    }

    #[test]
    fn wrong_builder_and_bad_spec_are_rejected() {
        let spec = ModelSpec::new(ModelKind::FCN, 16, 0);
        assert!(matches!(build_ekyt(&spec), Err(NnError::InvalidSpec(_))));
        let spec = ModelSpec { in_channels: 3, ..ModelSpec::new(ModelKind::FCN, 16, 0) };
        assert!(matches!(build_fcn(&spec), Err(NnError::InvalidSpec(_))));
        let spec = ModelSpec { input_len: 4, ..ModelSpec::new(ModelKind::TLENET, 16, 0) };
        assert!(matches!(build_tlenet(&spec), Err(NnError::InvalidSpec(_))));
    }

    #[test]
    fn ekyt_trunk_is_260_channels_and_embedding_128() {
        let mut model = build_model(&ModelSpec::new(ModelKind::EKYT, 16, 2)).unwrap();
        let trunk = model.nodes.iter().position(|n| n.name == "trunk").unwrap();
        let embed = model.nodes.iter().position(|n| n.name == "embed").unwrap();
        let acts = model.forward_trace(&random_batch(2, 16, 13)).unwrap();
        assert_eq!(acts[trunk].dim(), (2, 260, 16));
        assert_eq!(acts[embed].dim(), (2, 128, 1));
    }

    #[test]
    fn inception_has_six_blocks_and_two_shortcuts() {
        let model = build_model(&ModelSpec::new(ModelKind::INCEPTION, 16, 2)).unwrap();
        let blocks = model.nodes.iter().filter(|n| n.name.ends_with(".cat")).count();
        assert_eq!(blocks, 6);
        let adds = model
            .nodes
            .iter()
            .filter(|n| matches!(n.op, crate::nn::graph::Op::Add))
            .count();
        assert_eq!(adds, 2);
        // shortcut adds come right after blocks 3 and 6
        let names: Vec<&str> = model
            .nodes
            .iter()
            .filter(|n| matches!(n.op, crate::nn::graph::Op::Add))
            .map(|n| n.name.as_str())
            .collect();
        assert_eq!(names, vec!["shortcut1.add", "shortcut2.add"]);
    }

    #[test]
    fn mcdcnn_towers_are_independent() {
        let spec = ModelSpec::new(ModelKind::MCDCNN, 16, 4);
        let mut model = build_model(&spec).unwrap();
        model.set_mode(Mode::Eval);
        let x = random_batch(2, 16, 21);
        let flatten_ids: Vec<usize> = (0..4)
            .map(|c| {
                model
                    .nodes
                    .iter()
                    .position(|n| n.name == format!("ch{c}.flatten"))
                    .unwrap()
            })
            .collect();
        let before = model.forward_trace(&x).unwrap();
        // perturb tower 0's first conv weights; towers 1-3 must not move
        let w0 = model.param_index("ch0.conv1.weight").unwrap();
        if let ParamValue::A2(w) = &mut model.params[w0].value {
            w.mapv_inplace(|v| v + 0.5);
        }
        let after = model.forward_trace(&x).unwrap();
        assert_ne!(before[flatten_ids[0]], after[flatten_ids[0]]);
        for &id in &flatten_ids[1..] {
            assert_eq!(before[id], after[id]);
        }
    }

    #[test]
    fn zeroed_head_blocks_upstream_gradients() {
        let spec = ModelSpec::new(ModelKind::FCN, 16, 6);
        let mut model = build_model(&spec).unwrap();
        for name in ["fc.weight", "fc.bias"] {
            let idx = model.param_index(name).unwrap();
            match &mut model.params[idx].value {
                ParamValue::A1(a) => a.fill(0.0),
                ParamValue::A2(a) => a.fill(0.0),
            }
        }
        let x = random_batch(2, 16, 31);
        let (grads, _) = model.backward(&x, &[true, false]).unwrap();
        for (param, grad) in model.params.iter().zip(grads.0.iter()) {
            if param.name.starts_with("fc.") {
                continue; // the head's own gradient is generally nonzero
            }
            assert!(
                grad.as_slice().iter().all(|&g| g == 0.0),
                "gradient leaked into {}",
                param.name
            );
        }
    }

    #[test]
    fn backward_is_linear_in_output_gradient() {
        let spec = ModelSpec::new(ModelKind::TCN, 16, 9);
        let mut model = build_model(&spec).unwrap();
        let x = random_batch(2, 16, 41);
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let dout = Array3::from_shape_fn((2, 2, 1), |_| rng.gen::<f64>() - 0.5);
        let g1 = model.backward_from(&x, dout.clone()).unwrap();
        let g2 = model.backward_from(&x, &dout * 2.0).unwrap();
        for (a, b) in g1.0.iter().zip(g2.0.iter()) {
            for (ga, gb) in a.as_slice().iter().zip(b.as_slice()) {
                let scale = if ga.abs() > 1e-30 { gb / ga } else { continue };
                assert!((scale - 2.0).abs() < 1e-10, "{ga} vs {gb}");
            }
        }
    }

    #[test]
    fn backward_requires_train_mode() {
        let mut model = build_model(&ModelSpec::new(ModelKind::TCN, 16, 9)).unwrap();
        model.set_mode(Mode::Eval);
        let x = random_batch(1, 16, 1);
        assert!(matches!(
            model.backward(&x, &[true]),
            Err(NnError::WrongMode { .. })
        ));
    }

    #[test]
    fn shape_and_finiteness_are_validated() {
        let mut model = build_model(&ModelSpec::new(ModelKind::FCN, 16, 0)).unwrap();
        let bad_len = random_batch(1, 17, 0);
        assert!(matches!(model.forward(&bad_len), Err(NnError::ShapeMismatch { .. })));
        let mut nan = random_batch(1, 16, 0);
        nan[[0, 0, 0]] = f64::NAN;
        assert!(matches!(model.forward(&nan), Err(NnError::NonFiniteInput)));
    }
}
