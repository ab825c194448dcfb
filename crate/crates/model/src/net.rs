//! Forward passes of the classifier.
//!
//! One encoder block (learned token and position embeddings, multi-head
//! self-attention, a ReLU feed-forward, residual connections) encodes both
//! the sentence pair and every knowledge string; its [CLS] output is the
//! sequence representation. Knowledge fusion pools event spans from the
//! token matrix, concatenates each with its knowledge encoding, and runs
//! event-level multi-head attention with no positional encoding, so the
//! pooled result is invariant to event order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{FusionMode, ModelConfig};
use crate::data::PreparedExample;
use crate::params::Parameters;
use crate::tape::{NodeId, Tape, PROB_EPSILON};
use crate::tensor::Matrix;
use crate::{Error, Result};

/// Tape handles of every parameter tensor, in [`Parameters::NAMES`] order.
pub struct ParamNodes {
    pub tok_emb: NodeId,
    pub pos_emb: NodeId,
    pub enc_wq: NodeId,
    pub enc_bq: NodeId,
    pub enc_wk: NodeId,
    pub enc_bk: NodeId,
    pub enc_wv: NodeId,
    pub enc_bv: NodeId,
    pub enc_wo: NodeId,
    pub enc_bo: NodeId,
    pub ff_w1: NodeId,
    pub ff_b1: NodeId,
    pub ff_w2: NodeId,
    pub ff_b2: NodeId,
    pub base_w1: NodeId,
    pub base_b1: NodeId,
    pub base_w2: NodeId,
    pub base_b2: NodeId,
    pub ev_wq: NodeId,
    pub ev_bq: NodeId,
    pub ev_wk: NodeId,
    pub ev_bk: NodeId,
    pub ev_wv: NodeId,
    pub ev_bv: NodeId,
    pub fused_w1: NodeId,
    pub fused_b1: NodeId,
    pub fused_w2: NodeId,
    pub fused_b2: NodeId,
    pub no_knowledge: NodeId,
}

pub fn register_params(tape: &mut Tape, params: &Parameters) -> ParamNodes {
    let mut ids = params.tensors().into_iter().map(|t| tape.leaf(t.clone()));
    let mut next = || ids.next().expect("tensor list length");
    ParamNodes {
        tok_emb: next(),
        pos_emb: next(),
        enc_wq: next(),
        enc_bq: next(),
        enc_wk: next(),
        enc_bk: next(),
        enc_wv: next(),
        enc_bv: next(),
        enc_wo: next(),
        enc_bo: next(),
        ff_w1: next(),
        ff_b1: next(),
        ff_w2: next(),
        ff_b2: next(),
        base_w1: next(),
        base_b1: next(),
        base_w2: next(),
        base_b2: next(),
        ev_wq: next(),
        ev_bq: next(),
        ev_wk: next(),
        ev_bk: next(),
        ev_wv: next(),
        ev_bv: next(),
        fused_w1: next(),
        fused_b1: next(),
        fused_w2: next(),
        fused_b2: next(),
        no_knowledge: next(),
    }
}

impl ParamNodes {
    /// Ids in [`Parameters::NAMES`] order, for gradient collection.
    pub fn ordered(&self) -> [NodeId; 29] {
        [
            self.tok_emb,
            self.pos_emb,
            self.enc_wq,
            self.enc_bq,
            self.enc_wk,
            self.enc_bk,
            self.enc_wv,
            self.enc_bv,
            self.enc_wo,
            self.enc_bo,
            self.ff_w1,
            self.ff_b1,
            self.ff_w2,
            self.ff_b2,
            self.base_w1,
            self.base_b1,
            self.base_w2,
            self.base_b2,
            self.ev_wq,
            self.ev_bq,
            self.ev_wk,
            self.ev_bk,
            self.ev_wv,
            self.ev_bv,
            self.fused_w1,
            self.fused_b1,
            self.fused_w2,
            self.fused_b2,
            self.no_knowledge,
        ]
    }
}

/// Dropout state for one forward pass; `None` disables dropout entirely.
pub struct DropoutState<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub rate: f64,
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let keep = 1.0 - rate;
    let mut mask = Matrix::zeros(rows, cols);
    for v in &mut mask.data {
        if rng.gen::<f64>() >= rate {
            *v = 1.0 / keep;
        }
    }
    mask
}

fn maybe_dropout(
    tape: &mut Tape,
    node: NodeId,
    enabled: bool,
    dropout: &mut Option<DropoutState<'_>>,
) -> NodeId {
    let Some(state) = dropout else { return node };
    if !enabled || state.rate == 0.0 {
        return node;
    }
    let value = tape.value(node);
    let mask = dropout_mask(value.rows, value.cols, state.rate, state.rng);
    tape.mul_mask(node, mask)
}

/// Scaled-dot-product multi-head attention. Every softmaxed attention
/// matrix is appended to `attention_sink` so invariant checks can inspect
/// the rows.
fn multi_head_attention(
    tape: &mut Tape,
    query: NodeId,
    key: NodeId,
    value: NodeId,
    heads: usize,
    attention_sink: &mut Vec<NodeId>,
) -> NodeId {
    let width = tape.value(query).cols;
    debug_assert_eq!(width % heads, 0);
    let head_dim = width / heads;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut outputs = Vec::with_capacity(heads);
    for head in 0..heads {
        let start = head * head_dim;
        let q = tape.slice_cols(query, start, head_dim);
        let k = tape.slice_cols(key, start, head_dim);
        let v = tape.slice_cols(value, start, head_dim);
        let scores = tape.matmul_nt(q, k);
        let scaled = tape.scale(scores, scale);
        let weights = tape.softmax_rows(scaled);
        attention_sink.push(weights);
        outputs.push(tape.matmul(weights, v));
    }
    tape.concat_cols(outputs)
}

fn linear(tape: &mut Tape, input: NodeId, weight: NodeId, bias: NodeId) -> NodeId {
    let product = tape.matmul(input, weight);
    tape.add_row(product, bias)
}

/// Encode a token-id sequence; returns `(h, H)` where `h` is the [CLS]
/// row and `H` the full token matrix.
pub fn encode_sequence(
    tape: &mut Tape,
    nodes: &ParamNodes,
    config: &ModelConfig,
    ids: &[usize],
    dropout: &mut Option<DropoutState<'_>>,
    attention_sink: &mut Vec<NodeId>,
) -> Result<(NodeId, NodeId)> {
    if ids.is_empty() {
        return Err(Error::Argument("cannot encode an empty sequence".into()));
    }
    let vocab_rows = tape.value(nodes.tok_emb).rows;
    if let Some(&bad) = ids.iter().find(|&&id| id >= vocab_rows) {
        return Err(Error::Argument(format!(
            "token id {bad} outside vocabulary of {vocab_rows}"
        )));
    }
    if ids.len() > config.max_positions() {
        return Err(Error::Argument(format!(
            "sequence of {} tokens exceeds position table of {}",
            ids.len(),
            config.max_positions()
        )));
    }

    let tokens = tape.gather(nodes.tok_emb, ids.to_vec());
    let positions = tape.gather(nodes.pos_emb, (0..ids.len()).collect());
    let embedded = tape.add(tokens, positions);

    let q = linear(tape, embedded, nodes.enc_wq, nodes.enc_bq);
    let k = linear(tape, embedded, nodes.enc_wk, nodes.enc_bk);
    let v = linear(tape, embedded, nodes.enc_wv, nodes.enc_bv);
    let mixed = multi_head_attention(tape, q, k, v, config.heads, attention_sink);
    let projected = linear(tape, mixed, nodes.enc_wo, nodes.enc_bo);
    let projected = maybe_dropout(tape, projected, config.dropout_encoder, dropout);
    let after_attention = tape.add(embedded, projected);

    let hidden = linear(tape, after_attention, nodes.ff_w1, nodes.ff_b1);
    let hidden = tape.relu(hidden);
    let ff_out = linear(tape, hidden, nodes.ff_w2, nodes.ff_b2);
    let ff_out = maybe_dropout(tape, ff_out, config.dropout_encoder, dropout);
    let token_matrix = tape.add(after_attention, ff_out);

    let cls = tape.gather(token_matrix, vec![0]);
    Ok((cls, token_matrix))
}

/// Base head: `softmax(MLP(h))` with a ReLU hidden layer.
pub fn classify_base(tape: &mut Tape, nodes: &ParamNodes, h: NodeId) -> NodeId {
    let hidden = linear(tape, h, nodes.base_w1, nodes.base_b1);
    let hidden = tape.relu(hidden);
    let logits = linear(tape, hidden, nodes.base_w2, nodes.base_b2);
    tape.softmax_rows(logits)
}

/// Fused head over `[h ; h_tilde]`.
pub fn classify_fused(
    tape: &mut Tape,
    nodes: &ParamNodes,
    h: NodeId,
    h_tilde: NodeId,
) -> NodeId {
    let joined = tape.concat_cols(vec![h, h_tilde]);
    let hidden = linear(tape, joined, nodes.fused_w1, nodes.fused_b1);
    let hidden = tape.relu(hidden);
    let logits = linear(tape, hidden, nodes.fused_w2, nodes.fused_b2);
    tape.softmax_rows(logits)
}

/// Event-level joint reasoning: Q/K/V projections of the augmented events
/// (2d -> d), multi-head attention without positional encoding, then mean
/// pooling. Returns `(h_tilde, attended)`.
pub fn joint_reason(
    tape: &mut Tape,
    nodes: &ParamNodes,
    config: &ModelConfig,
    augmented: NodeId,
    dropout: &mut Option<DropoutState<'_>>,
    attention_sink: &mut Vec<NodeId>,
) -> Result<(NodeId, NodeId)> {
    if tape.value(augmented).rows == 0 {
        return Err(Error::Argument("joint reasoning over zero events".into()));
    }
    let q = linear(tape, augmented, nodes.ev_wq, nodes.ev_bq);
    let k = linear(tape, augmented, nodes.ev_wk, nodes.ev_bk);
    let v = linear(tape, augmented, nodes.ev_wv, nodes.ev_bv);
    let attended = multi_head_attention(tape, q, k, v, config.heads, attention_sink);
    let attended = maybe_dropout(tape, attended, config.dropout_event_attention, dropout);
    let pooled = tape.mean_rows(attended);
    Ok((pooled, attended))
}

/// Everything a forward pass produced, for tests and diagnostics.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Which path actually ran (fallback may downgrade EKI to NONE).
    pub mode_used: FusionMode,
    /// Pair representation (the [CLS] row).
    pub h: Vec<f64>,
    /// Per-token encoder output of the pair sequence.
    pub token_matrix: Matrix,
    /// Knowledge encodings, one row per event.
    pub knowledge: Vec<Vec<f64>>,
    /// Mean-pooled event representations.
    pub events: Vec<Vec<f64>>,
    /// Knowledge-augmented events (width 2d).
    pub augmented: Vec<Vec<f64>>,
    /// Event-attention output.
    pub attended: Option<Matrix>,
    pub h_tilde: Option<Vec<f64>>,
    /// Base-path distribution, when the base head ran.
    pub p: Option<Vec<f64>>,
    /// Fused distribution, when the fused head ran.
    pub p_star: Option<Vec<f64>>,
    /// Every softmaxed attention matrix (token and event level).
    pub attention: Vec<Matrix>,
}

pub struct ForwardOutput {
    pub distribution: Vec<f64>,
    pub trace: ForwardTrace,
}

pub(crate) struct GraphOutput {
    pub distribution_node: NodeId,
    pub trace: ForwardTrace,
}

/// Build the forward graph for one example under `mode`.
pub(crate) fn forward_graph(
    tape: &mut Tape,
    nodes: &ParamNodes,
    config: &ModelConfig,
    example: &PreparedExample,
    mode: FusionMode,
    mut dropout: Option<DropoutState<'_>>,
) -> Result<GraphOutput> {
    let mut attention_ids: Vec<NodeId> = Vec::new();

    let needs_events = matches!(mode, FusionMode::Eki | FusionMode::ClsConcat);
    let mode_used = if needs_events && example.events.is_empty() {
        log::warn!("no events available; falling back to the base path");
        FusionMode::None
    } else {
        mode
    };

    let pair_ids: &[usize] = match mode_used {
        FusionMode::SentConcat => &example.sent_concat_ids,
        _ => &example.pair_ids,
    };
    let (h, token_matrix) =
        encode_sequence(tape, nodes, config, pair_ids, &mut dropout, &mut attention_ids)?;

    let mut trace = ForwardTrace {
        mode_used,
        h: tape.value(h).data.clone(),
        token_matrix: tape.value(token_matrix).clone(),
        knowledge: Vec::new(),
        events: Vec::new(),
        augmented: Vec::new(),
        attended: None,
        h_tilde: None,
        p: None,
        p_star: None,
        attention: Vec::new(),
    };

    let distribution_node = match mode_used {
        FusionMode::None | FusionMode::SentConcat => {
            let p = classify_base(tape, nodes, h);
            trace.p = Some(tape.value(p).data.clone());
            p
        }
        FusionMode::Eki => {
            let mut augmented_rows = Vec::with_capacity(example.events.len());
            for event in &example.events {
                let knowledge = encode_event_knowledge(
                    tape,
                    nodes,
                    config,
                    event.knowledge_ids.as_deref(),
                    &mut dropout,
                    &mut attention_ids,
                )?;
                trace.knowledge.push(tape.value(knowledge).data.clone());
                let gathered = tape.gather(token_matrix, event.positions.clone());
                let pooled = tape.mean_rows(gathered);
                trace.events.push(tape.value(pooled).data.clone());
                let row = tape.concat_cols(vec![pooled, knowledge]);
                trace.augmented.push(tape.value(row).data.clone());
                augmented_rows.push(row);
            }
            let augmented = tape.concat_rows(augmented_rows);
            let (h_tilde, attended) =
                joint_reason(tape, nodes, config, augmented, &mut dropout, &mut attention_ids)?;
            trace.attended = Some(tape.value(attended).clone());
            trace.h_tilde = Some(tape.value(h_tilde).data.clone());
            let p_star = classify_fused(tape, nodes, h, h_tilde);
            trace.p_star = Some(tape.value(p_star).data.clone());
            p_star
        }
        FusionMode::ClsConcat => {
            let mut knowledge_rows = Vec::with_capacity(example.events.len());
            for event in &example.events {
                let knowledge = encode_event_knowledge(
                    tape,
                    nodes,
                    config,
                    event.knowledge_ids.as_deref(),
                    &mut dropout,
                    &mut attention_ids,
                )?;
                trace.knowledge.push(tape.value(knowledge).data.clone());
                knowledge_rows.push(knowledge);
            }
            let stacked = tape.concat_rows(knowledge_rows);
            let mean_knowledge = tape.mean_rows(stacked);
            trace.h_tilde = Some(tape.value(mean_knowledge).data.clone());
            let p_star = classify_fused(tape, nodes, h, mean_knowledge);
            trace.p_star = Some(tape.value(p_star).data.clone());
            p_star
        }
    };

    trace.attention = attention_ids
        .into_iter()
        .map(|id| tape.value(id).clone())
        .collect();
    Ok(GraphOutput {
        distribution_node,
        trace,
    })
}

fn encode_event_knowledge(
    tape: &mut Tape,
    nodes: &ParamNodes,
    config: &ModelConfig,
    knowledge_ids: Option<&[usize]>,
    dropout: &mut Option<DropoutState<'_>>,
    attention_sink: &mut Vec<NodeId>,
) -> Result<NodeId> {
    match knowledge_ids {
        // Empty retrieval: the learned zero-knowledge embedding stands in.
        None => Ok(nodes.no_knowledge),
        Some(ids) => {
            let (cls, _) = encode_sequence(tape, nodes, config, ids, dropout, attention_sink)?;
            Ok(cls)
        }
    }
}

/// Deterministic forward pass (dropout off).
pub fn forward(
    params: &Parameters,
    config: &ModelConfig,
    example: &PreparedExample,
    mode: FusionMode,
) -> Result<ForwardOutput> {
    let mut tape = Tape::new();
    let nodes = register_params(&mut tape, params);
    let graph = forward_graph(&mut tape, &nodes, config, example, mode, None)?;
    Ok(ForwardOutput {
        distribution: tape.value(graph.distribution_node).data.clone(),
        trace: graph.trace,
    })
}

/// Loss of one example plus gradients for every parameter tensor, in
/// [`Parameters::NAMES`] order. Dropout applies only when a state is given.
pub fn loss_and_gradients(
    params: &Parameters,
    config: &ModelConfig,
    example: &PreparedExample,
    mode: FusionMode,
    dropout: Option<DropoutState<'_>>,
) -> Result<(f64, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let nodes = register_params(&mut tape, params);
    let graph = forward_graph(&mut tape, &nodes, config, example, mode, dropout)?;
    let loss = tape.nll_from_probs(graph.distribution_node, example.label);
    let loss_value = tape.value(loss).get(0, 0);
    let grads = tape.backward(loss);
    let collected = nodes
        .ordered()
        .iter()
        .zip(params.tensors())
        .map(|(&id, tensor)| {
            grads[id.0]
                .clone()
                .unwrap_or_else(|| Matrix::zeros(tensor.rows, tensor.cols))
        })
        .collect();
    Ok((loss_value, collected))
}

/// Loss only, for finite-difference probes.
pub fn loss_only(
    params: &Parameters,
    config: &ModelConfig,
    example: &PreparedExample,
    mode: FusionMode,
) -> Result<f64> {
    let mut tape = Tape::new();
    let nodes = register_params(&mut tape, params);
    let graph = forward_graph(&mut tape, &nodes, config, example, mode, None)?;
    let loss = tape.nll_from_probs(graph.distribution_node, example.label);
    Ok(tape.value(loss).get(0, 0))
}

/// Argmax class with deterministic tie-breaking (lowest index wins).
pub fn predict(
    params: &Parameters,
    config: &ModelConfig,
    example: &PreparedExample,
    mode: FusionMode,
) -> Result<usize> {
    let output = forward(params, config, example, mode)?;
    Ok(argmax(&output.distribution))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-example negative log-likelihood with the documented clamp.
pub fn compute_loss(distribution: &[f64], class: usize) -> f64 {
    let mut p = distribution[class];
    if p < PROB_EPSILON {
        log::warn!("probability {p:.3e} clamped to {PROB_EPSILON:.0e} in loss");
        p = PROB_EPSILON;
    }
    -p.ln()
}

/// Mean loss over a batch of per-example losses.
pub fn batch_loss(losses: &[f64]) -> f64 {
    losses.iter().sum::<f64>() / losses.len() as f64
}
