//! Flat parameter storage. All learnable tensors live in one `Vec<f64>`
//! behind a named slot layout, which keeps the optimizer, checkpointing,
//! checksums, and finite-difference perturbation trivial.

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::ModelError;

use super::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotId(usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-layer attention parameter handles for one encoder.
#[derive(Debug, Clone, Copy)]
pub struct LayerSlots {
    pub w_src: SlotId,
    pub w_tgt: SlotId,
    pub attn: SlotId,
    pub type_bias: SlotId,
}

#[derive(Debug, Clone, Copy)]
pub struct FfnSlots {
    pub w1: SlotId,
    pub b1: SlotId,
    pub w2: SlotId,
    pub b2: SlotId,
}

#[derive(Debug, Clone)]
pub struct Layout {
    slots: Vec<Slot>,
    pub token_table: SlotId,
    pub label_table: SlotId,
    /// `[question encoder, SQL encoder]`, one entry per layer.
    pub encoders: [Vec<LayerSlots>; 2],
    pub ffn: FfnSlots,
    pub projection: Option<SlotId>,
    pub total_len: usize,
}

impl Layout {
    fn build(cfg: &ModelConfig) -> Layout {
        let mut slots = Vec::new();
        let mut offset = 0usize;
        let mut push = |name: String, rows: usize, cols: usize, slots: &mut Vec<Slot>| {
            let id = SlotId(slots.len());
            slots.push(Slot { name, offset, rows, cols });
            offset += rows * cols;
            id
        };
        let d = cfg.hidden_dim;
        let token_table = push("token_table".into(), cfg.token_vocab, d, &mut slots);
        let label_table = push("label_table".into(), cfg.label_vocab, d, &mut slots);
        let mut encoders: [Vec<LayerSlots>; 2] = [Vec::new(), Vec::new()];
        for (enc, side) in ["question", "sql"].iter().enumerate() {
            for layer in 0..cfg.gat_layers {
                let w_src = push(format!("{side}.layer{layer}.w_src"), d, d, &mut slots);
                let w_tgt = push(format!("{side}.layer{layer}.w_tgt"), d, d, &mut slots);
                let attn = push(
                    format!("{side}.layer{layer}.attn"),
                    cfg.attention_heads,
                    cfg.head_dim(),
                    &mut slots,
                );
                let type_bias = push(
                    format!("{side}.layer{layer}.type_bias"),
                    cfg.attention_heads,
                    cfg.edge_types(),
                    &mut slots,
                );
                encoders[enc].push(LayerSlots { w_src, w_tgt, attn, type_bias });
            }
        }
        let ffn = FfnSlots {
            w1: push("ffn.w1".into(), cfg.ffn_hidden(), 2 * d, &mut slots),
            b1: push("ffn.b1".into(), 1, cfg.ffn_hidden(), &mut slots),
            w2: push("ffn.w2".into(), 1, cfg.ffn_hidden(), &mut slots),
            b2: push("ffn.b2".into(), 1, 1, &mut slots),
        };
        let projection = cfg
            .needs_projection()
            .then(|| push("projection".into(), d, cfg.external_dim.unwrap(), &mut slots));
        Layout { slots, token_table, label_table, encoders, ffn, projection, total_len: offset }
    }

    pub fn slot(&self, id: SlotId) -> &Slot {
        &self.slots[id.0]
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }
}

/// All learnable tensors of the scorer.
#[derive(Debug, Clone)]
pub struct Parameters {
    pub cfg: ModelConfig,
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl Parameters {
    /// Random initialization: embeddings and weights are zero-mean normal
    /// with configured scales, biases start at zero.
    pub fn init(cfg: &ModelConfig) -> Result<Parameters, ModelError> {
        cfg.validate()?;
        let layout = Layout::build(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let embed = Normal::new(0.0, cfg.embed_init_std)
            .map_err(|e| ModelError::Config(e.to_string()))?;
        let weight = Normal::new(0.0, cfg.weight_init_std)
            .map_err(|e| ModelError::Config(e.to_string()))?;
        // Hidden FFN weights scale with fan-in so pre-activations stay O(1).
        let w1 = Normal::new(0.0, cfg.ffn_w1_init_std / (2.0 * cfg.hidden_dim as f64).sqrt())
            .map_err(|e| ModelError::Config(e.to_string()))?;
        let readout = Normal::new(0.0, cfg.output_init_std)
            .map_err(|e| ModelError::Config(e.to_string()))?;
        let ffn_bias = Normal::new(0.0, cfg.ffn_bias_init_std)
            .map_err(|e| ModelError::Config(e.to_string()))?;
        let mut data = vec![0.0f64; layout.total_len];
        for slot in layout.slots() {
            let dist = match slot.name.as_str() {
                "token_table" | "label_table" => Some(&embed),
                "ffn.w1" => Some(&w1),
                "ffn.w2" => Some(&readout),
                "ffn.b1" => Some(&ffn_bias),
                name if name.ends_with(".b2") => None,
                name if name.ends_with("type_bias") => None,
                _ => Some(&weight),
            };
            if let Some(dist) = dist {
                for x in &mut data[slot.offset..slot.offset + slot.len()] {
                    *x = dist.sample(&mut rng);
                }
            }
        }
        if cfg.tie_ffn_halves {
            // Copy each hidden row's question-half weights over its SQL half.
            let slot = layout.slot(layout.ffn.w1).clone();
            let d = cfg.hidden_dim;
            for r in 0..slot.rows {
                let row = slot.offset + r * slot.cols;
                for c in 0..d {
                    data[row + d + c] = data[row + c];
                }
            }
        }
        Ok(Parameters { cfg: cfg.clone(), layout, data })
    }

    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.data.len()]
    }

    pub fn slice(&self, id: SlotId) -> &[f64] {
        let slot = self.layout.slot(id);
        &self.data[slot.offset..slot.offset + slot.len()]
    }

    pub fn view(&self, id: SlotId) -> ArrayView2<'_, f64> {
        let slot = self.layout.slot(id);
        ArrayView2::from_shape((slot.rows, slot.cols), self.slice(id))
            .expect("slot shape matches storage")
    }

    pub fn scalar(&self, id: SlotId) -> f64 {
        self.slice(id)[0]
    }

    /// Row `r` of a table-shaped slot.
    pub fn row(&self, id: SlotId, r: usize) -> &[f64] {
        let slot = self.layout.slot(id);
        let start = slot.offset + r * slot.cols;
        &self.data[start..start + slot.cols]
    }

    /// Copies one encoder's parameters over the other, giving both encoders
    /// a shared initialization (used by symmetry tests and ablations).
    pub fn copy_encoder(&mut self, from: usize, to: usize) {
        assert!(from < 2 && to < 2);
        let pairs: Vec<(usize, usize, usize)> = self.layout.encoders[from]
            .iter()
            .zip(&self.layout.encoders[to])
            .flat_map(|(a, b)| {
                [
                    (a.w_src, b.w_src),
                    (a.w_tgt, b.w_tgt),
                    (a.attn, b.attn),
                    (a.type_bias, b.type_bias),
                ]
                .into_iter()
                .map(|(x, y)| {
                    let src = self.layout.slot(x);
                    let dst = self.layout.slot(y);
                    (src.offset, dst.offset, src.len())
                })
                .collect::<Vec<_>>()
            })
            .collect();
        for (src, dst, len) in pairs {
            let chunk: Vec<f64> = self.data[src..src + len].to_vec();
            self.data[dst..dst + len].copy_from_slice(&chunk);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// FNV-1a checksum of the raw parameter bytes; equal checksums mean
    /// bit-identical parameters.
    pub fn checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf29ce484222325;
        for x in &self.data {
            for byte in x.to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x100000001b3);
            }
        }
        hash
    }
}

/// Gradient buffer aligned with a `Parameters` layout.
pub struct Gradients {
    pub data: Vec<f64>,
}

impl Gradients {
    pub fn zeros(params: &Parameters) -> Gradients {
        Gradients { data: vec![0.0; params.data.len()] }
    }

    pub fn slice_mut(&mut self, params: &Parameters, id: SlotId) -> &mut [f64] {
        let slot = params.layout.slot(id);
        &mut self.data[slot.offset..slot.offset + slot.len()]
    }

    pub fn row_mut(&mut self, params: &Parameters, id: SlotId, r: usize) -> &mut [f64] {
        let slot = params.layout.slot(id);
        let start = slot.offset + r * slot.cols;
        &mut self.data[start..start + slot.cols]
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::new(10, 6);
        cfg.hidden_dim = 8;
        cfg.attention_heads = 2;
        cfg
    }

    #[test]
    fn layout_covers_all_parameters_without_overlap() {
        let cfg = tiny_cfg();
        let params = Parameters::init(&cfg).unwrap();
        let mut covered = 0usize;
        for slot in params.layout.slots() {
            assert_eq!(slot.offset, covered, "slot {} misaligned", slot.name);
            covered += slot.len();
        }
        assert_eq!(covered, params.data.len());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let cfg = tiny_cfg();
        let a = Parameters::init(&cfg).unwrap();
        let b = Parameters::init(&cfg).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        let mut cfg2 = cfg.clone();
        cfg2.seed = 1;
        let c = Parameters::init(&cfg2).unwrap();
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn biases_start_at_zero() {
        let cfg = tiny_cfg();
        let params = Parameters::init(&cfg).unwrap();
        assert!(params.slice(params.layout.ffn.b1).iter().all(|x| *x == 0.0));
        assert_eq!(params.scalar(params.layout.ffn.b2), 0.0);
        for enc in &params.layout.encoders {
            for layer in enc {
                assert!(params.slice(layer.type_bias).iter().all(|x| *x == 0.0));
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = tiny_cfg();
        cfg.hidden_dim = 9; // not divisible by 2 heads
        assert!(Parameters::init(&cfg).is_err());
        let mut cfg = tiny_cfg();
        cfg.gat_layers = 2;
        assert!(Parameters::init(&cfg).is_err());
        cfg.allow_custom_layers = true;
        assert!(Parameters::init(&cfg).is_ok());
    }

    #[test]
    fn copy_encoder_duplicates_weights() {
        let cfg = tiny_cfg();
        let mut params = Parameters::init(&cfg).unwrap();
        params.copy_encoder(0, 1);
        for (a, b) in params.layout.encoders[0]
            .clone()
            .iter()
            .zip(params.layout.encoders[1].clone().iter())
        {
            assert_eq!(params.slice(a.w_src), params.slice(b.w_src));
            assert_eq!(params.slice(a.attn), params.slice(b.attn));
        }
    }
}
