//! Hand-written forward and backward passes: GATv2-style attention layers
//! with per-edge-type bias, residual + tanh, average pooling, and the
//! feed-forward scoring head.
//!
//! Attention per head, for an edge from j into i:
//! `e_ij = a^T lrelu(W_src h_i + W_tgt h_j) + b_type`, alpha = softmax over
//! i's in-neighbors, message `m_i = sum_j alpha_ij (W_tgt h_j)`, then
//! `h'_i = tanh(h_i + m_i)`.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;

use super::params::{Gradients, LayerSlots, Parameters};
use super::prep::{PairExample, PreppedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderSide {
    Question = 0,
    Sql = 1,
}

const SCORE_CLAMP: f64 = 1e-12;

/// Initial node features: token-table rows for leaves (or external vectors,
/// projected when configured), label-table rows for internals. Unknown
/// tokens and labels map to the reserved UNK rows.
pub fn embed_nodes(pg: &PreppedGraph, params: &Parameters) -> Result<Array2<f64>, ModelError> {
    let d = params.cfg.hidden_dim;
    if pg.n == 0 {
        return Err(ModelError::EmptyGraph);
    }
    let mut h = Array2::<f64>::zeros((pg.n, d));
    for i in 0..pg.n {
        let row = match (&pg.external, pg.node_position[i], pg.node_token[i]) {
            (Some(ext), Some(pos), _) => {
                if ext.ncols() == d {
                    ext.row(pos).to_vec()
                } else if params.cfg.external_dim == Some(ext.ncols()) {
                    let proj = params.view(
                        params.layout.projection.expect("projection configured"),
                    );
                    proj.dot(&ext.row(pos)).to_vec()
                } else {
                    return Err(ModelError::Dimension { expected: d, found: ext.ncols() });
                }
            }
            (None, _, Some(tok)) => params.row(params.layout.token_table, tok).to_vec(),
            (Some(_) | None, ..) => {
                let label = pg.node_label[i].expect("non-leaf node carries a label");
                params.row(params.layout.label_table, label).to_vec()
            }
        };
        h.row_mut(i).iter_mut().zip(row).for_each(|(dst, x)| *dst = x);
    }
    Ok(h)
}

fn lrelu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Per-layer activations cached for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub s: Array2<f64>,
    pub t: Array2<f64>,
    /// Per edge: lrelu(S_dst + T_src), full hidden width.
    pub v: Array2<f64>,
    /// Per edge x head attention weights.
    pub alpha: Array2<f64>,
    pub h_out: Array2<f64>,
    pub drop_mask: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct GraphTrace {
    pub h0: Array2<f64>,
    pub layers: Vec<LayerTrace>,
}

impl GraphTrace {
    pub fn final_h(&self) -> &Array2<f64> {
        self.layers.last().map(|l| &l.h_out).unwrap_or(&self.h0)
    }
}

/// One attention layer, forward. Exposed with its attention matrix so tests
/// can audit row sums and compare against a dense reference.
pub fn gat_layer(
    pg: &PreppedGraph,
    h: &Array2<f64>,
    params: &Parameters,
    side: EncoderSide,
    layer_idx: usize,
    dropout: Option<(&mut ChaCha8Rng, f64)>,
) -> Result<LayerTrace, ModelError> {
    let slots = params.layout.encoders[side as usize][layer_idx];
    gat_layer_with_slots(pg, h, params, slots, dropout)
}

fn gat_layer_with_slots(
    pg: &PreppedGraph,
    h: &Array2<f64>,
    params: &Parameters,
    slots: LayerSlots,
    dropout: Option<(&mut ChaCha8Rng, f64)>,
) -> Result<LayerTrace, ModelError> {
    let d = params.cfg.hidden_dim;
    let heads = params.cfg.attention_heads;
    let dh = params.cfg.head_dim();
    let slope = params.cfg.leaky_relu_slope;
    let n = pg.n;
    let n_edges = pg.edges.len();

    let w_src = params.view(slots.w_src);
    let w_tgt = params.view(slots.w_tgt);
    let attn = params.view(slots.attn);
    let bias = params.view(slots.type_bias);

    let s = h.dot(&w_src.t());
    let t = h.dot(&w_tgt.t());
    let s_flat = s.as_slice().expect("row-major");
    let t_flat = t.as_slice().expect("row-major");

    // Per-edge keys and attention logits.
    let mut v = Array2::<f64>::zeros((n_edges, d));
    let mut logits = Array2::<f64>::zeros((n_edges, heads));
    {
        let v_flat = v.as_slice_mut().expect("row-major");
        for (e, edge) in pg.edges.iter().enumerate() {
            let si = &s_flat[edge.dst * d..(edge.dst + 1) * d];
            let tj = &t_flat[edge.src * d..(edge.src + 1) * d];
            let ve = &mut v_flat[e * d..(e + 1) * d];
            for c in 0..d {
                ve[c] = lrelu(si[c] + tj[c], slope);
            }
            for k in 0..heads {
                let a_k = attn.row(k);
                let a_k = a_k.as_slice().expect("row-major");
                let mut dot = 0.0;
                for c in 0..dh {
                    dot += a_k[c] * ve[k * dh + c];
                }
                logits[(e, k)] = dot + bias[(k, edge.etype)];
            }
        }
    }

    // Softmax per (target node, head) over the node's in-edge group.
    let mut alpha = Array2::<f64>::zeros((n_edges, heads));
    for i in 0..n {
        let (start, end) = pg.dst_ranges[i];
        for k in 0..heads {
            let mut max = f64::NEG_INFINITY;
            for e in start..end {
                max = max.max(logits[(e, k)]);
            }
            let mut total = 0.0;
            for e in start..end {
                let x = (logits[(e, k)] - max).exp();
                alpha[(e, k)] = x;
                total += x;
            }
            for e in start..end {
                alpha[(e, k)] /= total;
            }
        }
    }

    // Messages.
    let mut m = Array2::<f64>::zeros((n, d));
    {
        let m_flat = m.as_slice_mut().expect("row-major");
        for (e, edge) in pg.edges.iter().enumerate() {
            let tj = &t_flat[edge.src * d..(edge.src + 1) * d];
            let mi = &mut m_flat[edge.dst * d..(edge.dst + 1) * d];
            for k in 0..heads {
                let a = alpha[(e, k)];
                for c in k * dh..(k + 1) * dh {
                    mi[c] += a * tj[c];
                }
            }
        }
    }

    let drop_mask = dropout.and_then(|(rng, rate)| {
        if rate == 0.0 {
            return None;
        }
        let keep = 1.0 - rate;
        Some(Array2::from_shape_fn((n, d), |_| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        }))
    });
    if let Some(mask) = &drop_mask {
        m *= mask;
    }

    let mut h_out = h + &m;
    h_out.mapv_inplace(f64::tanh);
    if h_out.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::Numerical("gat_layer output".into()));
    }
    Ok(LayerTrace { s, t, v, alpha, h_out, drop_mask })
}

fn forward_graph(
    pg: &PreppedGraph,
    params: &Parameters,
    side: EncoderSide,
    mut dropout: Option<(&mut ChaCha8Rng, f64)>,
) -> Result<GraphTrace, ModelError> {
    let h0 = embed_nodes(pg, params)?;
    let mut layers = Vec::with_capacity(params.cfg.gat_layers);
    let mut h = h0.clone();
    for layer_idx in 0..params.cfg.gat_layers {
        let trace = gat_layer(
            pg,
            &h,
            params,
            side,
            layer_idx,
            dropout.as_mut().map(|(rng, rate)| (&mut **rng, *rate)),
        )?;
        h = trace.h_out.clone();
        layers.push(trace);
    }
    Ok(GraphTrace { h0, layers })
}

fn mean_pool(h: &Array2<f64>) -> Vec<f64> {
    let n = h.nrows() as f64;
    let mut pooled = vec![0.0; h.ncols()];
    for row in h.rows() {
        for (p, x) in pooled.iter_mut().zip(row) {
            *p += x;
        }
    }
    for p in &mut pooled {
        *p /= n;
    }
    pooled
}

/// Full forward activations for one (question, SQL) pair.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub question: GraphTrace,
    pub sql: GraphTrace,
    pub h_global: Vec<f64>,
    pub a1: Vec<f64>,
    pub logit: f64,
    pub score: f64,
}

/// Concatenated average-pooled representations of both graphs.
pub fn encode_pair(
    question: &PreppedGraph,
    sql: &PreppedGraph,
    params: &Parameters,
) -> Result<Vec<f64>, ModelError> {
    let qt = forward_graph(question, params, EncoderSide::Question, None)?;
    let st = forward_graph(sql, params, EncoderSide::Sql, None)?;
    let mut h_global = mean_pool(qt.final_h());
    h_global.extend(mean_pool(st.final_h()));
    Ok(h_global)
}

/// Scoring head: sigmoid(w2 . tanh(W1 h_global + b1) + b2), strictly inside
/// (0, 1).
pub fn score(h_global: &[f64], params: &Parameters) -> f64 {
    let (logit, _) = head_forward(h_global, params);
    sigmoid(logit).clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

fn head_forward(h_global: &[f64], params: &Parameters) -> (f64, Vec<f64>) {
    let ffn = params.layout.ffn;
    let w1 = params.view(ffn.w1);
    let b1 = params.slice(ffn.b1);
    let w2 = params.slice(ffn.w2);
    let b2 = params.scalar(ffn.b2);
    let x = Array1::from_vec(h_global.to_vec());
    let mut z1 = w1.dot(&x);
    for (z, b) in z1.iter_mut().zip(b1) {
        *z += b;
    }
    let a1: Vec<f64> = z1.iter().map(|z| z.tanh()).collect();
    let logit = a1.iter().zip(w2).map(|(a, w)| a * w).sum::<f64>() + b2;
    (logit, a1)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Forward pass for one example, returning all cached activations.
pub fn forward_pair(
    example: &PairExample,
    params: &Parameters,
    mut dropout: Option<(&mut ChaCha8Rng, f64)>,
) -> Result<ForwardTrace, ModelError> {
    let question = forward_graph(
        &example.question,
        params,
        EncoderSide::Question,
        dropout.as_mut().map(|(rng, rate)| (&mut **rng, *rate)),
    )?;
    let sql = forward_graph(
        &example.sql,
        params,
        EncoderSide::Sql,
        dropout.as_mut().map(|(rng, rate)| (&mut **rng, *rate)),
    )?;
    let mut h_global = mean_pool(question.final_h());
    h_global.extend(mean_pool(sql.final_h()));
    let (logit, a1) = head_forward(&h_global, params);
    let score = sigmoid(logit).clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
    if !score.is_finite() {
        return Err(ModelError::Numerical("score".into()));
    }
    Ok(ForwardTrace { question, sql, h_global, a1, logit, score })
}

/// Deterministic score for one pair (no dropout).
pub fn score_pair(example: &PairExample, params: &Parameters) -> Result<f64, ModelError> {
    Ok(forward_pair(example, params, None)?.score)
}

/// Deterministic scores for many pairs; independent of batch grouping.
pub fn predict(params: &Parameters, pairs: &[PairExample]) -> Result<Vec<f64>, ModelError> {
    pairs.iter().map(|p| score_pair(p, params)).collect()
}

/// Mean binary cross-entropy with clamped logs.
pub fn loss(scores: &[f64], labels: &[bool]) -> Result<f64, ModelError> {
    let (value, _) = loss_and_grad(scores, labels)?;
    Ok(value)
}

/// Loss plus dL/ds per example.
pub fn loss_and_grad(scores: &[f64], labels: &[bool]) -> Result<(f64, Vec<f64>), ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let n = scores.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(scores.len());
    for (&s, &y) in scores.iter().zip(labels) {
        let s_c = s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
        total -= if y { s_c.ln() } else { (1.0 - s_c).ln() };
        grads.push(if y { -1.0 / s_c / n } else { 1.0 / (1.0 - s_c) / n });
    }
    Ok((total / n, grads))
}

/// Backward pass for one example given dL/dlogit; accumulates into `grads`.
pub fn backward_pair(
    example: &PairExample,
    trace: &ForwardTrace,
    d_logit: f64,
    params: &Parameters,
    grads: &mut Gradients,
) {
    let ffn = params.layout.ffn;
    let dffn = params.cfg.ffn_hidden();
    let d2 = 2 * params.cfg.hidden_dim;

    // Head.
    grads.slice_mut(params, ffn.b2)[0] += d_logit;
    let w2: Vec<f64> = params.slice(ffn.w2).to_vec();
    {
        let dw2 = grads.slice_mut(params, ffn.w2);
        for (g, a) in dw2.iter_mut().zip(&trace.a1) {
            *g += d_logit * a;
        }
    }
    let mut dz1 = vec![0.0; dffn];
    for j in 0..dffn {
        let da1 = d_logit * w2[j];
        dz1[j] = da1 * (1.0 - trace.a1[j] * trace.a1[j]);
    }
    {
        let db1 = grads.slice_mut(params, ffn.b1);
        for (g, dz) in db1.iter_mut().zip(&dz1) {
            *g += dz;
        }
    }
    let w1 = params.view(ffn.w1);
    let mut dh_global = vec![0.0; d2];
    {
        let dw1 = grads.slice_mut(params, ffn.w1);
        for j in 0..dffn {
            for k in 0..d2 {
                dw1[j * d2 + k] += dz1[j] * trace.h_global[k];
                dh_global[k] += dz1[j] * w1[(j, k)];
            }
        }
    }

    let d = params.cfg.hidden_dim;
    backward_graph(
        &example.question,
        &trace.question,
        &dh_global[..d],
        params,
        EncoderSide::Question,
        grads,
    );
    backward_graph(&example.sql, &trace.sql, &dh_global[d..], params, EncoderSide::Sql, grads);
}

fn backward_graph(
    pg: &PreppedGraph,
    trace: &GraphTrace,
    d_pool: &[f64],
    params: &Parameters,
    side: EncoderSide,
    grads: &mut Gradients,
) {
    let n = pg.n;
    let d = params.cfg.hidden_dim;
    // Mean pooling spreads the gradient uniformly over nodes.
    let mut d_h = Array2::<f64>::zeros((n, d));
    for mut row in d_h.rows_mut() {
        for (g, dp) in row.iter_mut().zip(d_pool) {
            *g = dp / n as f64;
        }
    }
    for layer_idx in (0..params.cfg.gat_layers).rev() {
        let h_in = if layer_idx == 0 { &trace.h0 } else { &trace.layers[layer_idx - 1].h_out };
        d_h = backward_layer(pg, &trace.layers[layer_idx], h_in, &d_h, params, side, layer_idx, grads);
    }
    // Embedding tables (or the projection of external vectors).
    for i in 0..n {
        let d_row: Vec<f64> = d_h.row(i).to_vec();
        match (&pg.external, pg.node_position[i], pg.node_token[i]) {
            (Some(ext), Some(pos), _) => {
                if let Some(proj_id) = params.layout.projection {
                    let cols = ext.ncols();
                    let dproj = grads.slice_mut(params, proj_id);
                    for r in 0..d {
                        for c in 0..cols {
                            dproj[r * cols + c] += d_row[r] * ext[(pos, c)];
                        }
                    }
                }
                // Pass-through external rows carry no learnable parameters.
            }
            (None, _, Some(tok)) => {
                let g = grads.row_mut(params, params.layout.token_table, tok);
                for (gx, dx) in g.iter_mut().zip(&d_row) {
                    *gx += dx;
                }
            }
            _ => {
                let label = pg.node_label[i].expect("non-leaf node carries a label");
                let g = grads.row_mut(params, params.layout.label_table, label);
                for (gx, dx) in g.iter_mut().zip(&d_row) {
                    *gx += dx;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_layer(
    pg: &PreppedGraph,
    trace: &LayerTrace,
    h_in: &Array2<f64>,
    d_hout: &Array2<f64>,
    params: &Parameters,
    side: EncoderSide,
    layer_idx: usize,
    grads: &mut Gradients,
) -> Array2<f64> {
    let slots = params.layout.encoders[side as usize][layer_idx];
    let d = params.cfg.hidden_dim;
    let heads = params.cfg.attention_heads;
    let dh = params.cfg.head_dim();
    let slope = params.cfg.leaky_relu_slope;
    let n = pg.n;

    // tanh backward, then residual split.
    let mut p = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for c in 0..d {
            let y = trace.h_out[(i, c)];
            p[(i, c)] = d_hout[(i, c)] * (1.0 - y * y);
        }
    }
    let mut d_hin = p.clone();
    let mut d_m = p;
    if let Some(mask) = &trace.drop_mask {
        d_m *= mask;
    }

    let attn = params.view(slots.attn).to_owned();
    let t_flat = trace.t.as_slice().expect("row-major");
    let v_flat = trace.v.as_slice().expect("row-major");
    let d_m_flat = d_m.as_slice().expect("row-major");

    let mut d_s = Array2::<f64>::zeros((n, d));
    let mut d_t = Array2::<f64>::zeros((n, d));
    {
        let d_s_flat = d_s.as_slice_mut().expect("row-major");
        let d_t_flat = d_t.as_slice_mut().expect("row-major");
        let mut d_alpha = Vec::new();
        for i in 0..n {
            let (start, end) = pg.dst_ranges[i];
            let g_i = &d_m_flat[i * d..(i + 1) * d];
            for k in 0..heads {
                let a_k: Vec<f64> =
                    (0..dh).map(|c| attn[(k, c)]).collect();
                d_alpha.clear();
                let mut dot = 0.0;
                for e in start..end {
                    let src = pg.edges[e].src;
                    let tj = &t_flat[src * d + k * dh..src * d + (k + 1) * dh];
                    let mut da = 0.0;
                    for c in 0..dh {
                        da += g_i[k * dh + c] * tj[c];
                    }
                    d_alpha.push(da);
                    dot += trace.alpha[(e, k)] * da;
                }
                for e in start..end {
                    let edge = pg.edges[e];
                    let a_e = trace.alpha[(e, k)];
                    // Message term: dT_src += alpha * g_i.
                    {
                        let dt = &mut d_t_flat[edge.src * d + k * dh..edge.src * d + (k + 1) * dh];
                        for c in 0..dh {
                            dt[c] += a_e * g_i[k * dh + c];
                        }
                    }
                    // Softmax backward.
                    let de = a_e * (d_alpha[e - start] - dot);
                    // Attention vector and type bias.
                    {
                        let da_k = grads.slice_mut(params, slots.attn);
                        let ve = &v_flat[e * d + k * dh..e * d + (k + 1) * dh];
                        for c in 0..dh {
                            da_k[k * dh + c] += de * ve[c];
                        }
                    }
                    {
                        let db = grads.slice_mut(params, slots.type_bias);
                        db[k * params.cfg.edge_types() + edge.etype] += de;
                    }
                    // Through lrelu into S_dst and T_src.
                    let ve = &v_flat[e * d + k * dh..e * d + (k + 1) * dh];
                    for c in 0..dh {
                        let dv = de * a_k[c];
                        let du = if ve[c] > 0.0 { dv } else { dv * slope };
                        d_s_flat[i * d + k * dh + c] += du;
                        d_t_flat[edge.src * d + k * dh + c] += du;
                    }
                }
            }
        }
    }

    // S = H W_src^T, T = H W_tgt^T.
    let w_src = params.view(slots.w_src).to_owned();
    let w_tgt = params.view(slots.w_tgt).to_owned();
    let dw_src = d_s.t().dot(h_in);
    let dw_tgt = d_t.t().dot(h_in);
    {
        let g = grads.slice_mut(params, slots.w_src);
        for (gx, dx) in g.iter_mut().zip(dw_src.iter()) {
            *gx += dx;
        }
    }
    {
        let g = grads.slice_mut(params, slots.w_tgt);
        for (gx, dx) in g.iter_mut().zip(dw_tgt.iter()) {
            *gx += dx;
        }
    }
    d_hin += &d_s.dot(&w_src);
    d_hin += &d_t.dot(&w_tgt);
    d_hin
}
