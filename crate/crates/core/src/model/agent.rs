//! Tape-recorded forward pass: instruction and vision encoders, the
//! cross-modal layer, action attention with a STOP pseudo-candidate, the
//! prefix mapper and the hint decoder.

use super::params::*;
use super::tape::{Mat, Tape, Var};
use crate::error::{Error, Result};
use crate::text::Vocab;
use crate::world::CandidateView;

/// Model-side view of one candidate: head-noun token ids plus orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewInput {
    pub noun_ids: Vec<usize>,
    pub heading: f64,
    pub elevation: f64,
}

impl ViewInput {
    pub fn from_view(view: &CandidateView, vocab: &Vocab) -> Result<Self> {
        if view.objects.is_empty() {
            return Err(Error::Invalid(format!("view toward {} has no objects", view.neighbor)));
        }
        Ok(ViewInput {
            noun_ids: view.objects.iter().map(|o| vocab.id(&o.head_noun)).collect(),
            heading: view.heading,
            elevation: view.elevation,
        })
    }
}

pub fn view_inputs(views: &[CandidateView], vocab: &Vocab) -> Result<Vec<ViewInput>> {
    views.iter().map(|v| ViewInput::from_view(v, vocab)).collect()
}

/// [sin α, cos α, sin β, cos β]
pub fn orientation_feature(heading: f64, elevation: f64) -> [f64; 4] {
    [heading.sin(), heading.cos(), elevation.sin(), elevation.cos()]
}

/// Tape variables produced by one navigation step.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub x_hat: Var,
    pub s_hat: Var,
    pub v_hat: Var,
    /// 1×(n+1) pre-softmax scores; the last column is STOP.
    pub scores: Var,
    pub probs: Var,
    pub log_probs: Var,
    pub next_state: Var,
    /// n×1 action probabilities over views only (STOP dropped, renormalized).
    pub view_probs: Var,
    pub weighted: Var,
}

pub struct Forward<'p> {
    pub params: &'p ModelParams,
    pub tape: Tape,
}

impl<'p> Forward<'p> {
    pub fn new(params: &'p ModelParams) -> Self {
        Forward { params, tape: Tape::new() }
    }

    pub fn p(&mut self, index: usize) -> Var {
        self.tape.param(index, &self.params.tensors[index])
    }

    fn d(&self) -> usize {
        self.params.config.d
    }

    fn linear(&mut self, x: Var, w: usize, b: usize) -> Var {
        let (w, b) = (self.p(w), self.p(b));
        let y = self.tape.matmul(x, w);
        self.tape.add_row(y, b)
    }

    /// Token embedding plus learned position, one row per token.
    pub fn encode_instruction(&mut self, ids: &[usize]) -> Result<Var> {
        let cfg = &self.params.config;
        if ids.is_empty() {
            return Err(Error::UndefinedInput("empty instruction".into()));
        }
        if ids.len() > cfg.max_instruction_tokens {
            return Err(Error::Shape(format!(
                "instruction has {} tokens, limit {}",
                ids.len(),
                cfg.max_instruction_tokens
            )));
        }
        let ids: Vec<usize> = ids.iter().map(|&i| if i < cfg.vocab_size { i } else { 0 }).collect();
        let positions: Vec<usize> = (0..ids.len()).collect();
        let (emb, pos) = (self.p(TOK_EMB), self.p(INS_POS));
        let e = self.tape.gather(emb, &ids);
        let p = self.tape.gather(pos, &positions);
        Ok(self.tape.add(e, p))
    }

    pub fn encode_vision(&mut self, views: &[ViewInput]) -> Result<Var> {
        if views.is_empty() {
            return Err(Error::UndefinedInput("no candidate views".into()));
        }
        let vocab = self.params.config.vocab_size;
        let mut ids = Vec::new();
        let total: usize = views.iter().map(|v| v.noun_ids.len()).sum();
        let mut pool = Mat::zeros(views.len(), total);
        let mut orient = Vec::with_capacity(views.len() * 4);
        for (r, v) in views.iter().enumerate() {
            if v.noun_ids.is_empty() {
                return Err(Error::Invalid("view with no objects".into()));
            }
            for &id in &v.noun_ids {
                pool.data[r * total + ids.len()] = 1.0 / v.noun_ids.len() as f64;
                ids.push(if id < vocab { id } else { 0 });
            }
            orient.extend(orientation_feature(v.heading, v.elevation));
        }
        let emb = self.p(TOK_EMB);
        let objects = self.tape.gather(emb, &ids);
        let pool = self.tape.constant(pool);
        let mean = self.tape.matmul(pool, objects);
        let orient = self.tape.constant(Mat::from_vec(views.len(), 4, orient));
        let feat = self.tape.concat_cols(&[mean, orient]);
        let h = self.linear(feat, VIS_W, VIS_B);
        Ok(self.tape.tanh(h))
    }

    pub fn initial_state(&mut self) -> Var {
        self.p(STATE_INIT)
    }

    fn attend(&mut self, queries: Var, keys: Var, wq: usize, wk: usize, wv: usize) -> Var {
        let scale = 1.0 / (self.d() as f64).sqrt();
        let (wq, wk, wv) = (self.p(wq), self.p(wk), self.p(wv));
        let q = self.tape.matmul(queries, wq);
        let k = self.tape.matmul(keys, wk);
        let v = self.tape.matmul(keys, wv);
        let s = self.tape.matmul_t(q, k);
        let s = self.tape.scale(s, scale);
        let a = self.tape.softmax(s);
        self.tape.matmul(a, v)
    }

    /// One cross-attention layer: the [S; V] stack attends to X and X
    /// attends to the stack, each with a residual connection and layer norm.
    pub fn cross_modal(&mut self, x: Var, state: Var, views: Var) -> Result<(Var, Var, Var)> {
        let d = self.d();
        let (xs, ss, vs) = (self.tape.value(x).shape(), self.tape.value(state).shape(), self.tape.value(views).shape());
        if xs.1 != d || ss != (1, d) || vs.1 != d || xs.0 == 0 || vs.0 == 0 {
            return Err(Error::Shape(format!("cross_modal got X {xs:?}, S {ss:?}, V {vs:?}")));
        }
        let stack = self.tape.concat_rows(&[state, views]);
        let to_text = self.attend(stack, x, SX_Q, SX_K, SX_V);
        let to_stack = self.attend(x, stack, XS_Q, XS_K, XS_V);
        let stack = self.tape.add(stack, to_text);
        let (g, b) = (self.p(LN_S_G), self.p(LN_S_B));
        let stack = self.tape.layer_norm(stack, g, b);
        let x_res = self.tape.add(x, to_stack);
        let (g, b) = (self.p(LN_X_G), self.p(LN_X_B));
        let x_hat = self.tape.layer_norm(x_res, g, b);
        let s_hat = self.tape.slice_rows(stack, 0, 1);
        let v_hat = self.tape.slice_rows(stack, 1, vs.0 + 1);
        Ok((x_hat, s_hat, v_hat))
    }

    /// Scaled dot-product attention of Ŝ over [V̂; STOP]. Returns
    /// (scores, probs, log_probs, next_state).
    pub fn action_attention(&mut self, s_hat: Var, v_hat: Var) -> Result<(Var, Var, Var, Var)> {
        if self.tape.value(v_hat).rows == 0 {
            return Err(Error::UndefinedInput("no candidate views".into()));
        }
        let scale = 1.0 / (self.d() as f64).sqrt();
        let (wq, stop) = (self.p(ACT_Q), self.p(STOP_KEY));
        let q = self.tape.matmul(s_hat, wq);
        let keys = self.tape.concat_rows(&[v_hat, stop]);
        let raw = self.tape.matmul_t(q, keys);
        let scores = self.tape.scale(raw, scale);
        let probs = self.tape.softmax(scores);
        let log_probs = self.tape.log_softmax(scores);
        let attended = self.tape.matmul(probs, keys);
        let both = self.tape.concat_cols(&[s_hat, attended]);
        let h = self.linear(both, UPD_W, UPD_B);
        let next = self.tape.tanh(h);
        Ok((scores, probs, log_probs, next))
    }

    /// Action probabilities restricted to the views, as an n×1 column.
    pub fn view_probs(&mut self, s_hat: Var, v_hat: Var) -> Var {
        let scale = 1.0 / (self.d() as f64).sqrt();
        let wq = self.p(ACT_Q);
        let q = self.tape.matmul(s_hat, wq);
        let raw = self.tape.matmul_t(q, v_hat);
        let scores = self.tape.scale(raw, scale);
        let probs = self.tape.softmax(scores);
        self.tape.transpose(probs)
    }

    /// V̂̂ = a ⊙ V̂, each view row scaled by its probability.
    pub fn weighted_vision(&mut self, view_probs: Var, v_hat: Var) -> Var {
        self.tape.scale_rows(v_hat, view_probs)
    }

    /// Sum-pools the weighted views and maps them to k prefix vectors.
    pub fn map_prefix(&mut self, weighted: Var) -> Var {
        let (k, d) = (self.params.config.prefix_len, self.d());
        let pooled = self.tape.sum_rows(weighted);
        let h = self.linear(pooled, PRE_W1, PRE_B1);
        let h = self.tape.tanh(h);
        let flat = self.linear(h, PRE_W2, PRE_B2);
        self.tape.reshape(flat, k, d)
    }

    /// Full navigation step from state S_t at step index t.
    pub fn step(&mut self, x: Var, state: Var, t: usize, views: &[ViewInput]) -> Result<StepVars> {
        let v = self.encode_vision(views)?;
        let step_row = t.min(self.params.config.max_steps - 1);
        let se = self.p(STEP_EMB);
        let step = self.tape.gather(se, &[step_row]);
        let s_in = self.tape.add(state, step);
        let (x_hat, s_hat, v_hat) = self.cross_modal(x, s_in, v)?;
        let (scores, probs, log_probs, next_state) = self.action_attention(s_hat, v_hat)?;
        let view_probs = self.view_probs(s_hat, v_hat);
        let weighted = self.weighted_vision(view_probs, v_hat);
        Ok(StepVars { x_hat, s_hat, v_hat, scores, probs, log_probs, next_state, view_probs, weighted })
    }

    /// Raw token embeddings of the instruction, used as the decoder's
    /// instruction prefix.
    pub fn instruction_prefix(&mut self, ids: &[usize]) -> Var {
        let vocab = self.params.config.vocab_size;
        let ids: Vec<usize> = ids.iter().map(|&i| if i < vocab { i } else { 0 }).collect();
        let emb = self.p(TOK_EMB);
        self.tape.gather(emb, &ids)
    }

    fn decoder_block(&mut self, h: Var) -> Var {
        let scale = 1.0 / (self.d() as f64).sqrt();
        let (g, b) = (self.p(DEC_LN1_G), self.p(DEC_LN1_B));
        let a = self.tape.layer_norm(h, g, b);
        let (wq, wk, wv, wo) = (self.p(DEC_Q), self.p(DEC_K), self.p(DEC_V), self.p(DEC_O));
        let q = self.tape.matmul(a, wq);
        let k = self.tape.matmul(a, wk);
        let v = self.tape.matmul(a, wv);
        let s = self.tape.matmul_t(q, k);
        let s = self.tape.scale(s, scale);
        let att = self.tape.softmax_causal(s, 0);
        let mixed = self.tape.matmul(att, v);
        let out = self.tape.matmul(mixed, wo);
        let h = self.tape.add(h, out);
        let (g, b) = (self.p(DEC_LN2_G), self.p(DEC_LN2_B));
        let f = self.tape.layer_norm(h, g, b);
        let f = self.linear(f, DEC_W1, DEC_B1);
        let f = self.tape.gelu(f);
        let f = self.linear(f, DEC_W2, DEC_B2);
        self.tape.add(h, f)
    }

    /// Next-token logits for every hint position, teacher-forced on `gold`
    /// (which ends with the end-of-hint id). Row j predicts gold[j].
    pub fn hint_logits(&mut self, prefix: Var, instruction: Var, gold: &[usize]) -> Result<Var> {
        let cfg = self.params.config.clone();
        let (k, l) = (self.tape.value(prefix).rows, self.tape.value(instruction).rows);
        if gold.is_empty() {
            return Err(Error::UndefinedInput("empty hint".into()));
        }
        if gold.len() > cfg.max_hint_tokens || l > cfg.max_instruction_tokens || k != cfg.prefix_len {
            return Err(Error::Shape(format!("hint of {} tokens with prefix {k} and instruction {l}", gold.len())));
        }
        let hint_in: Vec<usize> =
            gold[..gold.len() - 1].iter().map(|&i| if i < cfg.vocab_size { i } else { 0 }).collect();
        let mut parts = vec![prefix, instruction];
        if !hint_in.is_empty() {
            let emb = self.p(TOK_EMB);
            parts.push(self.tape.gather(emb, &hint_in));
        }
        let seq = self.tape.concat_rows(&parts);
        let total = k + l + hint_in.len();
        let pos_table = self.p(DEC_POS);
        let pos = self.tape.gather(pos_table, &(0..total).collect::<Vec<_>>());
        let h = self.tape.add(seq, pos);
        let h = self.decoder_block(h);
        let h = self.tape.slice_rows(h, k + l - 1, total);
        let (g, b) = (self.p(DEC_LNF_G), self.p(DEC_LNF_B));
        let h = self.tape.layer_norm(h, g, b);
        Ok(self.linear(h, OUT_W, OUT_B))
    }

    /// Σ_j −log p(c_j | p, X', c_<j).
    pub fn hint_loss(&mut self, prefix: Var, instruction: Var, gold: &[usize]) -> Result<Var> {
        let logits = self.hint_logits(prefix, instruction, gold)?;
        let lp = self.tape.log_softmax(logits);
        let vocab = self.params.config.vocab_size;
        let entries = gold.iter().enumerate().map(|(j, &c)| (j, if c < vocab { c } else { 0 }, -1.0)).collect();
        Ok(self.tape.pick_sum(lp, entries))
    }

    /// −weight · log p(action) for a 1×(n+1) log-probability row.
    pub fn weighted_nll(&mut self, log_probs: Var, action: usize, weight: f64) -> Var {
        self.tape.pick_sum(log_probs, vec![(0, action, -weight)])
    }

    pub fn sum(&mut self, terms: &[Var]) -> Option<Var> {
        let mut it = terms.iter().copied();
        let first = it.next()?;
        Some(it.fold(first, |acc, t| self.tape.add(acc, t)))
    }
}
