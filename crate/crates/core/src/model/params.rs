use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::Mat;
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::text::Vocab;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d: usize,
    pub vocab_size: usize,
    pub max_instruction_tokens: usize,
    pub max_steps: usize,
    pub prefix_len: usize,
    pub max_hint_tokens: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 32,
            vocab_size: 2,
            max_instruction_tokens: 48,
            max_steps: 16,
            prefix_len: 10,
            max_hint_tokens: 80,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.vocab_size < 2 || self.prefix_len == 0 || self.max_steps == 0 {
            return Err(Error::Invalid(format!("bad model config {self:?}")));
        }
        if self.max_instruction_tokens == 0 || self.max_hint_tokens == 0 {
            return Err(Error::Invalid(format!("bad model config {self:?}")));
        }
        Ok(())
    }

    pub fn decoder_positions(&self) -> usize {
        self.prefix_len + self.max_instruction_tokens + self.max_hint_tokens
    }
}

macro_rules! param_table {
    ($($idx:literal $name:ident $label:literal;)*) => {
        $(pub const $name: usize = $idx;)*
        pub const PARAM_NAMES: &[&str] = &[$($label),*];
    };
}

param_table! {
    0 TOK_EMB "token_embedding";
    1 INS_POS "instruction_position";
    2 STEP_EMB "step_embedding";
    3 STATE_INIT "state_init";
    4 VIS_W "vision_w";
    5 VIS_B "vision_b";
    6 SX_Q "stack_to_text_q";
    7 SX_K "stack_to_text_k";
    8 SX_V "stack_to_text_v";
    9 XS_Q "text_to_stack_q";
    10 XS_K "text_to_stack_k";
    11 XS_V "text_to_stack_v";
    12 LN_S_G "stack_norm_gain";
    13 LN_S_B "stack_norm_bias";
    14 LN_X_G "text_norm_gain";
    15 LN_X_B "text_norm_bias";
    16 ACT_Q "action_query";
    17 STOP_KEY "stop_key";
    18 UPD_W "state_update_w";
    19 UPD_B "state_update_b";
    20 PRE_W1 "prefix_w1";
    21 PRE_B1 "prefix_b1";
    22 PRE_W2 "prefix_w2";
    23 PRE_B2 "prefix_b2";
    24 DEC_POS "decoder_position";
    25 DEC_LN1_G "decoder_norm1_gain";
    26 DEC_LN1_B "decoder_norm1_bias";
    27 DEC_Q "decoder_q";
    28 DEC_K "decoder_k";
    29 DEC_V "decoder_v";
    30 DEC_O "decoder_o";
    31 DEC_LN2_G "decoder_norm2_gain";
    32 DEC_LN2_B "decoder_norm2_bias";
    33 DEC_W1 "decoder_ffn_w1";
    34 DEC_B1 "decoder_ffn_b1";
    35 DEC_W2 "decoder_ffn_w2";
    36 DEC_B2 "decoder_ffn_b2";
    37 DEC_LNF_G "decoder_final_norm_gain";
    38 DEC_LNF_B "decoder_final_norm_bias";
    39 OUT_W "output_w";
    40 OUT_B "output_b";
}

/// Parameters used only by the hint head. Their gradients stay zero when
/// the hint head is disabled.
pub const HINT_HEAD_PARAMS: std::ops::RangeInclusive<usize> = PRE_W1..=OUT_B;

#[derive(Debug, Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    Normal(f64),
    /// Normal with std 1/sqrt(rows).
    FanIn,
}

fn layout(c: &ModelConfig) -> Vec<((usize, usize), Init)> {
    let d = c.d;
    let v = c.vocab_size;
    let k = c.prefix_len;
    use Init::*;
    vec![
        ((v, d), Normal(0.5)),
        ((c.max_instruction_tokens, d), Normal(0.5)),
        ((c.max_steps, d), Normal(0.5)),
        ((1, d), Normal(0.5)),
        ((d + 4, d), FanIn),
        ((1, d), Zeros),
        ((d, d), FanIn),
        ((d, d), FanIn),
        ((d, d), FanIn),
        ((d, d), FanIn),
        ((d, d), FanIn),
        ((d, d), FanIn),
        ((1, d), Ones),
        ((1, d), Zeros),
        ((1, d), Ones),
        ((1, d), Zeros),
        ((d, d), FanIn),
        ((1, d), Normal(0.5)),
        ((2 * d, d), FanIn),
        ((1, d), Zeros),
        ((d, d), FanIn),
        ((1, d), Zeros),
        ((d, k * d), FanIn),
        ((1, k * d), Zeros),
        ((c.decoder_positions(), d), Normal(0.5)),
        ((1, d), Ones),
        ((1, d), Zeros),
        ((d, d), FanIn),
        ((d, d), FanIn),
        ((d, d), FanIn),
        ((d, d), FanIn),
        ((1, d), Ones),
        ((1, d), Zeros),
        ((d, 4 * d), FanIn),
        ((1, 4 * d), Zeros),
        ((4 * d, d), FanIn),
        ((1, d), Zeros),
        ((1, d), Ones),
        ((1, d), Zeros),
        ((d, v), FanIn),
        ((1, v), Zeros),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: Vec<Mat>,
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, "model-init");
        let tensors = layout(&config)
            .into_iter()
            .map(|((rows, cols), init)| {
                let std = match init {
                    Init::Zeros => return Mat::zeros(rows, cols),
                    Init::Ones => return Mat::from_vec(rows, cols, vec![1.0; rows * cols]),
                    Init::Normal(s) => s,
                    Init::FanIn => 1.0 / (rows as f64).sqrt(),
                };
                let normal = Normal::new(0.0, std).expect("positive std");
                Mat::from_vec(rows, cols, (0..rows * cols).map(|_| normal.sample(&mut rng)).collect())
            })
            .collect();
        Ok(ModelParams { config, tensors })
    }

    pub fn zeros_like(&self) -> Vec<Mat> {
        self.tensors.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect()
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|m| m.data.len()).sum()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let expected = layout(&self.config);
        if expected.len() != self.tensors.len() {
            return Err(Error::Shape(format!("{} tensors, expected {}", self.tensors.len(), expected.len())));
        }
        for (i, (m, (shape, _))) in self.tensors.iter().zip(&expected).enumerate() {
            if m.shape() != *shape || m.data.len() != m.rows * m.cols {
                return Err(Error::Shape(format!(
                    "{} has shape {:?}, expected {:?}",
                    PARAM_NAMES[i],
                    m.shape(),
                    shape
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }

    /// Random entry index into parameter `group`.
    pub fn sample_entry<R: Rng>(&self, group: usize, rng: &mut R) -> usize {
        rng.random_range(0..self.tensors[group].data.len())
    }
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    schema_version: u32,
    config: ModelConfig,
    vocab: Vocab,
    tensors: Vec<TensorRecord>,
}

/// JSON checkpoint with a shape manifest; floats round-trip exactly.
pub fn save_checkpoint(params: &ModelParams, vocab: &Vocab) -> String {
    let file = CheckpointFile {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        config: params.config.clone(),
        vocab: vocab.clone(),
        tensors: params
            .tensors
            .iter()
            .zip(PARAM_NAMES)
            .map(|(m, name)| TensorRecord { name: name.to_string(), shape: [m.rows, m.cols], data: m.data.clone() })
            .collect(),
    };
    serde_json::to_string(&file).expect("checkpoint serializes")
}

pub fn load_checkpoint(text: &str) -> Result<(ModelParams, Vocab)> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Schema {
            what: "checkpoint",
            found: file.schema_version,
            expected: CHECKPOINT_SCHEMA_VERSION,
        });
    }
    let mut vocab = file.vocab;
    vocab.reindex();
    if vocab.len() != file.config.vocab_size {
        return Err(Error::Shape(format!("vocab has {} tokens, config says {}", vocab.len(), file.config.vocab_size)));
    }
    let mut tensors = Vec::with_capacity(file.tensors.len());
    for (i, t) in file.tensors.into_iter().enumerate() {
        if PARAM_NAMES.get(i) != Some(&t.name.as_str()) {
            return Err(Error::Shape(format!("unexpected tensor {} at position {i}", t.name)));
        }
        if t.data.len() != t.shape[0] * t.shape[1] {
            return Err(Error::Shape(format!("{} data length does not match its shape", t.name)));
        }
        tensors.push(Mat::from_vec(t.shape[0], t.shape[1], t.data));
    }
    let params = ModelParams { config: file.config, tensors };
    params.check_shapes()?;
    Ok((params, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig { d: 8, vocab_size: 5, max_instruction_tokens: 6, max_steps: 3, prefix_len: 2, max_hint_tokens: 5 }
    }

    #[test]
    fn init_matches_layout() {
        let p = ModelParams::init(small(), 1).unwrap();
        assert_eq!(p.tensors.len(), PARAM_NAMES.len());
        p.check_shapes().unwrap();
        assert_eq!(p, ModelParams::init(small(), 1).unwrap());
        assert_ne!(p, ModelParams::init(small(), 2).unwrap());
    }

    #[test]
    fn checkpoint_round_trip_is_lossless() {
        let p = ModelParams::init(small(), 3).unwrap();
        let vocab = Vocab::from_tokens(["<unk>", "<eoh>", "a", "b", "c"].iter().map(|s| s.to_string()).collect());
        let text = save_checkpoint(&p, &vocab);
        let (q, v) = load_checkpoint(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(v.id("b"), 3);
    }

    #[test]
    fn checkpoint_rejects_shape_mismatch() {
        let p = ModelParams::init(small(), 3).unwrap();
        let vocab = Vocab::from_tokens(["<unk>", "<eoh>", "a", "b", "c"].iter().map(|s| s.to_string()).collect());
        let mut value: serde_json::Value = serde_json::from_str(&save_checkpoint(&p, &vocab)).unwrap();
        value["config"]["d"] = serde_json::json!(9);
        assert!(matches!(load_checkpoint(&value.to_string()), Err(Error::Shape(_))));
        let mut value: serde_json::Value = serde_json::from_str(&save_checkpoint(&p, &vocab)).unwrap();
        value["schema_version"] = serde_json::json!(2);
        assert!(matches!(load_checkpoint(&value.to_string()), Err(Error::Schema { .. })));
    }
}
