//! Greedy hint decoding with a key/value cache, computed without the tape.

use super::params::*;
use super::tape::{gelu, layer_norm_rows, matmul, Mat};

struct Cache {
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

fn row_linear(x: &Mat, w: &Mat, b: Option<&Mat>) -> Mat {
    let mut y = matmul(x, w);
    if let Some(b) = b {
        for (o, v) in y.data.iter_mut().zip(&b.data) {
            *o += v;
        }
    }
    y
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs one decoder row through the block, appending to the cache, and
/// returns the row's output logits.
fn push_row(params: &ModelParams, cache: &mut Cache, h: Mat) -> Mat {
    let t = &params.tensors;
    let d = params.config.d;
    let a = layer_norm_rows(&h, &t[DEC_LN1_G], &t[DEC_LN1_B]);
    let q = matmul(&a, &t[DEC_Q]);
    cache.keys.push(matmul(&a, &t[DEC_K]).data);
    cache.values.push(matmul(&a, &t[DEC_V]).data);
    let scale = 1.0 / (d as f64).sqrt();
    let scores: Vec<f64> = cache.keys.iter().map(|k| dot(&q.data, k) * scale).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    let mut mixed = Mat::zeros(1, d);
    for (w, v) in exp.iter().zip(&cache.values) {
        for (o, x) in mixed.data.iter_mut().zip(v) {
            *o += w / total * x;
        }
    }
    let att = matmul(&mixed, &t[DEC_O]);
    let mut h2 = h;
    for (o, v) in h2.data.iter_mut().zip(&att.data) {
        *o += v;
    }
    let f = layer_norm_rows(&h2, &t[DEC_LN2_G], &t[DEC_LN2_B]);
    let mut f = row_linear(&f, &t[DEC_W1], Some(&t[DEC_B1]));
    for v in f.data.iter_mut() {
        *v = gelu(*v);
    }
    let f = row_linear(&f, &t[DEC_W2], Some(&t[DEC_B2]));
    for (o, v) in h2.data.iter_mut().zip(&f.data) {
        *o += v;
    }
    let out = layer_norm_rows(&h2, &t[DEC_LNF_G], &t[DEC_LNF_B]);
    row_linear(&out, &t[OUT_W], Some(&t[OUT_B]))
}

fn input_row(params: &ModelParams, base: &[f64], position: usize) -> Mat {
    let pos = params.tensors[DEC_POS].row(position);
    Mat::row_vec(base.iter().zip(pos).map(|(a, b)| a + b).collect())
}

/// Lowest id among the maximal entries.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn clamp_id(params: &ModelParams, id: usize) -> usize {
    if id < params.config.vocab_size {
        id
    } else {
        0
    }
}

/// Logits for each position of a teacher-forced hint, computed row by row
/// through the cache. Row j predicts gold[j]; matches the tape path.
pub fn cached_hint_logits(params: &ModelParams, prefix: &Mat, instruction: &[usize], gold: &[usize]) -> Vec<Mat> {
    let mut cache = Cache { keys: Vec::new(), values: Vec::new() };
    let emb = &params.tensors[TOK_EMB];
    let mut pos = 0;
    let mut last = None;
    for r in 0..prefix.rows {
        last = Some(push_row(params, &mut cache, input_row(params, prefix.row(r), pos)));
        pos += 1;
    }
    for &id in instruction {
        last = Some(push_row(params, &mut cache, input_row(params, emb.row(clamp_id(params, id)), pos)));
        pos += 1;
    }
    let mut out = vec![last.expect("non-empty context")];
    for &id in &gold[..gold.len().saturating_sub(1)] {
        out.push(push_row(params, &mut cache, input_row(params, emb.row(clamp_id(params, id)), pos)));
        pos += 1;
    }
    out
}

/// Greedy decoding from prefix and instruction until the end-of-hint id or
/// `max_tokens` tokens. The end marker is not included in the output.
pub fn decode_hint_greedy(
    params: &ModelParams,
    prefix: &Mat,
    instruction: &[usize],
    end_of_hint: usize,
    max_tokens: usize,
) -> Vec<usize> {
    let mut cache = Cache { keys: Vec::new(), values: Vec::new() };
    let emb = &params.tensors[TOK_EMB];
    let max_tokens = max_tokens.min(params.config.max_hint_tokens);
    let mut pos = 0;
    let mut logits = None;
    for r in 0..prefix.rows {
        logits = Some(push_row(params, &mut cache, input_row(params, prefix.row(r), pos)));
        pos += 1;
    }
    for &id in instruction {
        logits = Some(push_row(params, &mut cache, input_row(params, emb.row(clamp_id(params, id)), pos)));
        pos += 1;
    }
    let mut out = Vec::new();
    let Some(mut logits) = logits else { return out };
    for produced in 0..max_tokens {
        let next = argmax(&logits.data);
        if next == end_of_hint {
            break;
        }
        out.push(next);
        if produced + 1 == max_tokens || pos >= params.tensors[DEC_POS].rows {
            break;
        }
        logits = push_row(params, &mut cache, input_row(params, emb.row(next), pos));
        pos += 1;
    }
    out
}
