//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{probe_loss, Probe};
use super::params::{ModelParams, PARAM_NAMES};
use super::tape::Mat;
use super::Forward;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// The probe loss sums token losses over a whole episode and sits in the
/// hundreds, so round-off in `(plus - minus) / 2h` dominates below this
/// step. Truncation error at 1e-4 is far smaller.
pub const FD_STEP: f64 = 1e-4;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;
/// Denominator floor so that entries whose true gradient is zero compare
/// on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub group: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub groups: usize,
    pub max_relative_error: f64,
    pub worst: Option<GradCheckEntry>,
    pub passed: bool,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` against central differences of `loss` at the listed
/// (tensor, entry) coordinates.
pub fn finite_difference_check<F>(
    tensors: &[Mat],
    names: &[&str],
    analytic: &[Mat],
    entries: &[(usize, usize)],
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Mat]) -> Result<f64>,
{
    let mut work = tensors.to_vec();
    let mut worst: Option<GradCheckEntry> = None;
    let mut groups = std::collections::BTreeSet::new();
    for &(g, i) in entries {
        let orig = work[g].data[i];
        work[g].data[i] = orig + FD_STEP;
        let plus = loss(&work)?;
        work[g].data[i] = orig - FD_STEP;
        let minus = loss(&work)?;
        work[g].data[i] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic[g].data[i];
        let err = relative_error(a, numeric);
        groups.insert(g);
        if worst.as_ref().is_none_or(|w| err > w.relative_error) {
            worst = Some(GradCheckEntry {
                group: names.get(g).copied().unwrap_or("?").to_string(),
                index: i,
                analytic: a,
                numeric,
                relative_error: err,
            });
        }
    }
    let max_relative_error = worst.as_ref().map_or(0.0, |w| w.relative_error);
    Ok(GradCheckReport {
        checked: entries.len(),
        groups: groups.len(),
        max_relative_error,
        worst,
        passed: max_relative_error <= MAX_RELATIVE_ERROR,
    })
}

/// Picks `total` coordinates spread evenly over every parameter group.
pub fn sample_entries(tensors: &[Mat], total: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = rng_for(seed, "gradcheck");
    let per_group = total.div_ceil(tensors.len()).max(1);
    let mut out = Vec::new();
    for (g, m) in tensors.iter().enumerate() {
        let mut idx: Vec<usize> = (0..m.data.len()).collect();
        idx.shuffle(&mut rng);
        out.extend(idx.into_iter().take(per_group).map(|i| (g, i)));
    }
    out
}

pub fn probe_gradients(params: &ModelParams, probe: &Probe) -> Result<(f64, Vec<Mat>)> {
    let mut fwd = Forward::new(params);
    let loss = probe_loss(&mut fwd, probe)?;
    let mut grads = params.zeros_like();
    fwd.tape.backward(loss.total, &mut grads);
    Ok((fwd.tape.scalar(loss.total), grads))
}

/// Full-model check on a probe trajectory over `samples` coordinates.
pub fn grad_check(params: &ModelParams, probe: &Probe, samples: usize, seed: u64) -> Result<GradCheckReport> {
    let (_, grads) = probe_gradients(params, probe)?;
    let entries = sample_entries(&params.tensors, samples, seed);
    let mut scratch = params.clone();
    finite_difference_check(&params.tensors, PARAM_NAMES, &grads, &entries, |tensors| {
        scratch.tensors.clone_from_slice(tensors);
        let mut fwd = Forward::new(&scratch);
        let loss = probe_loss(&mut fwd, probe)?;
        let v = fwd.tape.scalar(loss.total);
        if !v.is_finite() {
            return Err(Error::TrainingAbort("non-finite probe loss".into()));
        }
        Ok(v)
    })
}
