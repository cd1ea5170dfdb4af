//! Static computation graph: typed nodes over (batch, channel, time)
//! activations, forward evaluation with per-node caches, and reverse-order
//! backpropagation with gradient accumulation at fan-out points.

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::bce_grad;
use super::models::ModelSpec;
use super::ops::{self, BnCache, BnState, ConvDims};
use super::NnError;

/// Whether batch norm consumes batch statistics (train) or frozen running
/// statistics (eval). Eval-mode forward is a pure function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// One trainable array. Conv weights are stored pre-flattened as
/// (out_ch, in_ch·kernel) so the forward pass is a single GEMM.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    A1(Array1<f64>),
    A2(Array2<f64>),
}

impl ParamValue {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            ParamValue::A1(a) => vec![a.len()],
            ParamValue::A2(a) => vec![a.nrows(), a.ncols()],
        }
    }

    pub fn count(&self) -> usize {
        match self {
            ParamValue::A1(a) => a.len(),
            ParamValue::A2(a) => a.len(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            ParamValue::A1(a) => a.as_slice().expect("standard layout"),
            ParamValue::A2(a) => a.as_slice().expect("standard layout"),
        }
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        match self {
            ParamValue::A1(a) => a.as_slice_mut().expect("standard layout"),
            ParamValue::A2(a) => a.as_slice_mut().expect("standard layout"),
        }
    }

    pub fn zeros_like(&self) -> ParamValue {
        match self {
            ParamValue::A1(a) => ParamValue::A1(Array1::zeros(a.len())),
            ParamValue::A2(a) => ParamValue::A2(Array2::zeros(a.raw_dim())),
        }
    }

    fn a1(&self) -> &Array1<f64> {
        match self {
            ParamValue::A1(a) => a,
            ParamValue::A2(_) => panic!("expected rank-1 parameter"),
        }
    }

    fn a2(&self) -> &Array2<f64> {
        match self {
            ParamValue::A2(a) => a,
            ParamValue::A1(_) => panic!("expected rank-2 parameter"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: ParamValue,
}

/// Per-parameter gradients, index-aligned with `Model::params`.
#[derive(Debug, Clone)]
pub struct Gradients(pub Vec<ParamValue>);

impl Gradients {
    pub fn zeros_like(params: &[Param]) -> Self {
        Gradients(params.iter().map(|p| p.value.zeros_like()).collect())
    }

    fn accumulate(&mut self, idx: usize, add: ParamValue) {
        match (&mut self.0[idx], add) {
            (ParamValue::A1(acc), ParamValue::A1(g)) => *acc += &g,
            (ParamValue::A2(acc), ParamValue::A2(g)) => *acc += &g,
            _ => panic!("gradient rank mismatch"),
        }
    }
}

/// Graph node kinds. Parameter fields are indices into `Model::params`;
/// `state` indexes `Model::bn_states`.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Input,
    Conv1d { weight: usize, bias: Option<usize>, dims: ConvDims },
    BatchNorm { gamma: usize, beta: usize, state: usize },
    Relu,
    MaxPool { kernel: usize },
    MaxPoolSame { kernel: usize },
    GlobalAvgPool,
    Flatten,
    Dense { weight: usize, bias: usize },
    Concat,
    Add,
    ChannelSlice { start: usize, len: usize },
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub op: Op,
    pub inputs: Vec<usize>,
    pub name: String,
}

/// A realized architecture: spec, graph, parameters, and batch-norm state.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub nodes: Vec<Node>,
    pub params: Vec<Param>,
    pub bn_states: Vec<BnState>,
    /// Index of the softmax output node.
    pub output: usize,
    pub mode: Mode,
}

enum Aux {
    None,
    Bn(BnCache),
    Pool(Array3<usize>),
}

impl Model {
    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Total trainable parameter count (batch-norm running statistics are
    /// state, not parameters, and are excluded).
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.count()).sum()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    fn validate_input(&self, x: &Array3<f64>) -> Result<(), NnError> {
        let (b, c, t) = x.dim();
        if b == 0 || c != self.spec.in_channels || t != self.spec.input_len {
            return Err(NnError::ShapeMismatch {
                expected: format!("(B>0, {}, {})", self.spec.in_channels, self.spec.input_len),
                got: format!("({b}, {c}, {t})"),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput);
        }
        Ok(())
    }

    fn run_forward(&mut self, x: &Array3<f64>) -> Result<(Vec<Array3<f64>>, Vec<Aux>), NnError> {
        self.validate_input(x)?;
        let train = self.mode == Mode::Train;
        let mut acts: Vec<Array3<f64>> = Vec::with_capacity(self.nodes.len());
        let mut aux: Vec<Aux> = Vec::with_capacity(self.nodes.len());
        for i in 0..self.nodes.len() {
            let node = &self.nodes[i];
            let (out, a) = match &node.op {
                Op::Input => (x.clone(), Aux::None),
                Op::Conv1d { weight, bias, dims } => {
                    let input = &acts[node.inputs[0]];
                    let w = self.params[*weight].value.a2();
                    let b = bias.map(|bi| self.params[bi].value.a1());
                    (ops::conv1d_forward(input, w, b, dims), Aux::None)
                }
                Op::BatchNorm { gamma, beta, state } => {
                    let input = &acts[node.inputs[0]];
                    let g = self.params[*gamma].value.a1();
                    let b = self.params[*beta].value.a1();
                    if train {
                        let (y, cache) =
                            ops::bn_forward_train(input, g, b, &mut self.bn_states[*state]);
                        (y, Aux::Bn(cache))
                    } else {
                        (ops::bn_forward_eval(input, g, b, &self.bn_states[*state]), Aux::None)
                    }
                }
                Op::Relu => (ops::relu_forward(&acts[node.inputs[0]]), Aux::None),
                Op::MaxPool { kernel } => {
                    let (y, arg) = ops::maxpool_forward(&acts[node.inputs[0]], *kernel);
                    (y, Aux::Pool(arg))
                }
                Op::MaxPoolSame { kernel } => {
                    let (y, arg) = ops::maxpool_same_forward(&acts[node.inputs[0]], *kernel);
                    (y, Aux::Pool(arg))
                }
                Op::GlobalAvgPool => (ops::gap_forward(&acts[node.inputs[0]]), Aux::None),
                Op::Flatten => (ops::flatten_forward(&acts[node.inputs[0]]), Aux::None),
                Op::Dense { weight, bias } => {
                    let input = &acts[node.inputs[0]];
                    let w = self.params[*weight].value.a2();
                    let b = self.params[*bias].value.a1();
                    (ops::dense_forward(input, w, b), Aux::None)
                }
                Op::Concat => {
                    let parts: Vec<&Array3<f64>> = node.inputs.iter().map(|&j| &acts[j]).collect();
                    (ops::concat_forward(&parts), Aux::None)
                }
                Op::Add => {
                    let a = &acts[node.inputs[0]];
                    let b = &acts[node.inputs[1]];
                    (a + b, Aux::None)
                }
                Op::ChannelSlice { start, len } => {
                    (ops::slice_forward(&acts[node.inputs[0]], *start, *len), Aux::None)
                }
                Op::Softmax => (ops::softmax_forward(&acts[node.inputs[0]]), Aux::None),
            };
            acts.push(out);
            aux.push(a);
        }
        Ok((acts, aux))
    }

    /// Class probabilities, shape (B, n_classes); rows sum to 1.
    pub fn forward(&mut self, x: &Array3<f64>) -> Result<Array2<f64>, NnError> {
        let (acts, _) = self.run_forward(x)?;
        let out = &acts[self.output];
        let (b, c, _) = out.dim();
        Ok(out
            .view()
            .into_shape_with_order((b, c))
            .expect("output is (B, C, 1)")
            .to_owned())
    }

    /// All node activations in graph order (testing/diagnostics).
    #[cfg(test)]
    pub(crate) fn forward_trace(&mut self, x: &Array3<f64>) -> Result<Vec<Array3<f64>>, NnError> {
        Ok(self.run_forward(x)?.0)
    }

    /// Mean BCE loss of a forward pass without computing gradients.
    pub fn loss_on(&mut self, x: &Array3<f64>, labels: &[bool]) -> Result<f64, NnError> {
        let probs = self.forward(x)?;
        super::loss::bce_loss(&probs, labels)
    }

    /// Backpropagates the batch BCE loss; requires `Mode::Train` so batch
    /// statistics match the cached forward pass. Returns per-parameter
    /// gradients and the loss value.
    pub fn backward(
        &mut self,
        x: &Array3<f64>,
        labels: &[bool],
    ) -> Result<(Gradients, f64), NnError> {
        if self.mode != Mode::Train {
            return Err(NnError::WrongMode { required: Mode::Train, actual: self.mode });
        }
        let (acts, aux) = self.run_forward(x)?;
        let out = &acts[self.output];
        let (b, c, _) = out.dim();
        let probs = out
            .view()
            .into_shape_with_order((b, c))
            .expect("output is (B, C, 1)")
            .to_owned();
        let (loss, dprobs) = bce_grad(&probs, labels)?;
        let dout = dprobs
            .into_shape_with_order((b, c, 1))
            .expect("contiguous reshape");
        let grads = self.backprop(&acts, &aux, dout)?;
        Ok((grads, loss))
    }

    /// Backpropagates an arbitrary output-gradient (testing hook; loss
    /// linearity in `dout` follows from the chain rule).
    #[cfg(test)]
    pub(crate) fn backward_from(
        &mut self,
        x: &Array3<f64>,
        dout: Array3<f64>,
    ) -> Result<Gradients, NnError> {
        if self.mode != Mode::Train {
            return Err(NnError::WrongMode { required: Mode::Train, actual: self.mode });
        }
        let (acts, aux) = self.run_forward(x)?;
        self.backprop(&acts, &aux, dout)
    }

    fn backprop(
        &self,
        acts: &[Array3<f64>],
        aux: &[Aux],
        dout: Array3<f64>,
    ) -> Result<Gradients, NnError> {
        let mut grads = Gradients::zeros_like(&self.params);
        let mut d_act: Vec<Option<Array3<f64>>> = vec![None; self.nodes.len()];
        d_act[self.output] = Some(dout);

        let accumulate = |slot: &mut Option<Array3<f64>>, g: Array3<f64>| match slot {
            Some(existing) => *existing += &g,
            None => *slot = Some(g),
        };

        for i in (0..self.nodes.len()).rev() {
            let dy = match d_act[i].take() {
                Some(d) => d,
                None => continue, // node not on any path to the output
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Conv1d { weight, bias, dims } => {
                    let inp = node.inputs[0];
                    let want_dx = !matches!(self.nodes[inp].op, Op::Input);
                    let (dx, dw, db) =
                        ops::conv1d_backward(&acts[inp], self.params[*weight].value.a2(), &dy, dims, want_dx);
                    grads.accumulate(*weight, ParamValue::A2(dw));
                    if let Some(bi) = bias {
                        grads.accumulate(*bi, ParamValue::A1(db));
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut d_act[inp], dx);
                    }
                }
                Op::BatchNorm { gamma, beta, state: _ } => {
                    let cache = match &aux[i] {
                        Aux::Bn(c) => c,
                        _ => unreachable!("train-mode forward caches batch norm"),
                    };
                    let (dx, dgamma, dbeta) =
                        ops::bn_backward(&dy, self.params[*gamma].value.a1(), cache);
                    grads.accumulate(*gamma, ParamValue::A1(dgamma));
                    grads.accumulate(*beta, ParamValue::A1(dbeta));
                    accumulate(&mut d_act[node.inputs[0]], dx);
                }
                Op::Relu => {
                    let dx = ops::relu_backward(&dy, &acts[i]);
                    accumulate(&mut d_act[node.inputs[0]], dx);
                }
                Op::MaxPool { .. } | Op::MaxPoolSame { .. } => {
                    let arg = match &aux[i] {
                        Aux::Pool(a) => a,
                        _ => unreachable!("pool forward caches argmax"),
                    };
                    let t_in = acts[node.inputs[0]].dim().2;
                    let dx = ops::maxpool_backward(&dy, arg, t_in);
                    accumulate(&mut d_act[node.inputs[0]], dx);
                }
                Op::GlobalAvgPool => {
                    let t_in = acts[node.inputs[0]].dim().2;
                    accumulate(&mut d_act[node.inputs[0]], ops::gap_backward(&dy, t_in));
                }
                Op::Flatten => {
                    let (_, c, t) = acts[node.inputs[0]].dim();
                    accumulate(&mut d_act[node.inputs[0]], ops::flatten_backward(&dy, c, t));
                }
                Op::Dense { weight, bias } => {
                    let inp = node.inputs[0];
                    let want_dx = !matches!(self.nodes[inp].op, Op::Input);
                    let (dx, dw, db) =
                        ops::dense_backward(&acts[inp], self.params[*weight].value.a2(), &dy, want_dx);
                    grads.accumulate(*weight, ParamValue::A2(dw));
                    grads.accumulate(*bias, ParamValue::A1(db));
                    if let Some(dx) = dx {
                        accumulate(&mut d_act[inp], dx);
                    }
                }
                Op::Concat => {
                    let sizes: Vec<usize> =
                        node.inputs.iter().map(|&j| acts[j].dim().1).collect();
                    for (&j, g) in node.inputs.iter().zip(ops::concat_backward(&dy, &sizes)) {
                        accumulate(&mut d_act[j], g);
                    }
                }
                Op::Add => {
                    accumulate(&mut d_act[node.inputs[0]], dy.clone());
                    accumulate(&mut d_act[node.inputs[1]], dy);
                }
                Op::ChannelSlice { start, .. } => {
                    let c_in = acts[node.inputs[0]].dim().1;
                    accumulate(&mut d_act[node.inputs[0]], ops::slice_backward(&dy, c_in, *start));
                }
                Op::Softmax => {
                    let dx = ops::softmax_backward(&dy, &acts[i]);
                    accumulate(&mut d_act[node.inputs[0]], dx);
                }
            }
        }

        for (param, grad) in self.params.iter().zip(grads.0.iter()) {
            if grad.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteGradient { param: param.name.clone() });
            }
        }
        Ok(grads)
    }
}

/// Incrementally assembles a model graph; nodes are appended in topological
/// order and parameters are drawn from a seed-determined stream, so identical
/// (spec, seed) builds are bitwise identical.
pub struct GraphBuilder {
    nodes: Vec<Node>,
    params: Vec<Param>,
    bn_states: Vec<BnState>,
    rng: ChaCha8Rng,
}

impl GraphBuilder {
    pub fn new(seed: u64) -> Self {
        GraphBuilder {
            nodes: Vec::new(),
            params: Vec::new(),
            bn_states: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn push(&mut self, op: Op, inputs: Vec<usize>, name: impl Into<String>) -> usize {
        self.nodes.push(Node { op, inputs, name: name.into() });
        self.nodes.len() - 1
    }

    /// Fan-in-scaled uniform weights, U(−1/√fan_in, 1/√fan_in).
    fn init_weight(&mut self, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Array2::from_shape_fn((rows, cols), |_| (self.rng.gen::<f64>() * 2.0 - 1.0) * bound)
    }

    fn add_param(&mut self, name: String, value: ParamValue) -> usize {
        self.params.push(Param { name, value });
        self.params.len() - 1
    }

    pub fn input(&mut self) -> usize {
        self.push(Op::Input, vec![], "input")
    }

    pub fn conv(
        &mut self,
        input: usize,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        dilation: usize,
        bias: bool,
    ) -> usize {
        let dims = ConvDims { in_ch, out_ch, kernel, dilation };
        let w = self.init_weight(out_ch, in_ch * kernel, in_ch * kernel);
        let weight = self.add_param(format!("{name}.weight"), ParamValue::A2(w));
        let bias = bias.then(|| {
            self.add_param(format!("{name}.bias"), ParamValue::A1(Array1::zeros(out_ch)))
        });
        self.push(Op::Conv1d { weight, bias, dims }, vec![input], name)
    }

    pub fn batch_norm(&mut self, input: usize, name: &str, channels: usize) -> usize {
        let gamma = self.add_param(format!("{name}.gamma"), ParamValue::A1(Array1::ones(channels)));
        let beta = self.add_param(format!("{name}.beta"), ParamValue::A1(Array1::zeros(channels)));
        self.bn_states.push(BnState::new(channels));
        let state = self.bn_states.len() - 1;
        self.push(Op::BatchNorm { gamma, beta, state }, vec![input], name)
    }

    pub fn relu(&mut self, input: usize, name: &str) -> usize {
        self.push(Op::Relu, vec![input], name)
    }

    pub fn max_pool(&mut self, input: usize, kernel: usize, name: &str) -> usize {
        self.push(Op::MaxPool { kernel }, vec![input], name)
    }

    pub fn max_pool_same(&mut self, input: usize, kernel: usize, name: &str) -> usize {
        self.push(Op::MaxPoolSame { kernel }, vec![input], name)
    }

    pub fn global_avg_pool(&mut self, input: usize, name: &str) -> usize {
        self.push(Op::GlobalAvgPool, vec![input], name)
    }

    pub fn flatten(&mut self, input: usize, name: &str) -> usize {
        self.push(Op::Flatten, vec![input], name)
    }

    pub fn dense(&mut self, input: usize, name: &str, in_f: usize, out_f: usize) -> usize {
        let w = self.init_weight(out_f, in_f, in_f);
        let weight = self.add_param(format!("{name}.weight"), ParamValue::A2(w));
        let bias = self.add_param(format!("{name}.bias"), ParamValue::A1(Array1::zeros(out_f)));
        self.push(Op::Dense { weight, bias }, vec![input], name)
    }

    pub fn concat(&mut self, inputs: Vec<usize>, name: &str) -> usize {
        self.push(Op::Concat, inputs, name)
    }

    pub fn add_nodes(&mut self, a: usize, b: usize, name: &str) -> usize {
        self.push(Op::Add, vec![a, b], name)
    }

    pub fn channel_slice(&mut self, input: usize, start: usize, len: usize, name: &str) -> usize {
        self.push(Op::ChannelSlice { start, len }, vec![input], name)
    }

    pub fn softmax(&mut self, input: usize, name: &str) -> usize {
        self.push(Op::Softmax, vec![input], name)
    }

    pub fn build(self, spec: ModelSpec, output: usize) -> Model {
        Model {
            spec,
            nodes: self.nodes,
            params: self.params,
            bn_states: self.bn_states,
            output,
            mode: Mode::Train,
        }
    }
}
