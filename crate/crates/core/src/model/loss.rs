//! Episode objectives: imitation and REINFORCE navigation terms plus the
//! teacher-forced hint likelihood.

use serde::{Deserialize, Serialize};

use super::agent::{Forward, ViewInput};
use super::tape::Var;
use crate::error::{Error, Result};

/// Σ_{k≥t} γ^{k−t} r_k for every t.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}

/// L = L_hint + L_nav.
pub fn total_loss(hint: f64, nav: f64) -> Result<f64> {
    if !hint.is_finite() || !nav.is_finite() {
        return Err(Error::TrainingAbort(format!("non-finite loss (hint {hint}, nav {nav})")));
    }
    Ok(hint + nav)
}

/// One step of a fixed trajectory to score.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeStep {
    pub views: Vec<ViewInput>,
    /// Imitation target: a view index, or `views.len()` for STOP.
    pub teacher: Option<usize>,
    /// Sampled action and its advantage for the REINFORCE term.
    pub reinforce: Option<(usize, f64)>,
    /// Gold hint ids ending with the end-of-hint id.
    pub hint: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub instruction: Vec<usize>,
    pub steps: Vec<ProbeStep>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeLoss {
    pub total: Var,
    pub nav: Option<Var>,
    pub hint: Option<Var>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub total: f64,
    pub nav: f64,
    pub hint: f64,
}

impl ProbeLoss {
    pub fn values(&self, fwd: &Forward) -> LossValues {
        LossValues {
            total: fwd.tape.scalar(self.total),
            nav: self.nav.map_or(0.0, |v| fwd.tape.scalar(v)),
            hint: self.hint.map_or(0.0, |v| fwd.tape.scalar(v)),
        }
    }
}

/// Records the loss of a fixed trajectory on the tape: the state recurs
/// through every step, −log p(teacher) and −λ·A·log p(sampled) form the
/// navigation term and each step with a gold hint adds its likelihood.
pub fn probe_loss(fwd: &mut Forward, probe: &Probe) -> Result<ProbeLoss> {
    if probe.steps.is_empty() {
        return Err(Error::UndefinedInput("empty rollout".into()));
    }
    let x = fwd.encode_instruction(&probe.instruction)?;
    let needs_prefix = probe.steps.iter().any(|s| s.hint.is_some());
    let x_prime = needs_prefix.then(|| fwd.instruction_prefix(&probe.instruction));
    let mut state = fwd.initial_state();
    let mut nav_terms = Vec::new();
    let mut hint_terms = Vec::new();
    for (t, step) in probe.steps.iter().enumerate() {
        let out = fwd.step(x, state, t, &step.views)?;
        if let Some(a) = step.teacher {
            check_action(a, step.views.len())?;
            nav_terms.push(fwd.weighted_nll(out.log_probs, a, 1.0));
        }
        if let Some((a, adv)) = step.reinforce {
            check_action(a, step.views.len())?;
            nav_terms.push(fwd.weighted_nll(out.log_probs, a, probe.lambda * adv));
        }
        if let Some(gold) = &step.hint {
            let prefix = fwd.map_prefix(out.weighted);
            hint_terms.push(fwd.hint_loss(prefix, x_prime.expect("prefix built"), gold)?);
        }
        state = out.next_state;
    }
    let nav = fwd.sum(&nav_terms);
    let hint = fwd.sum(&hint_terms);
    let total = match (nav, hint) {
        (Some(n), Some(h)) => fwd.tape.add(h, n),
        (Some(v), None) | (None, Some(v)) => v,
        (None, None) => return Err(Error::UndefinedInput("probe has no loss terms".into())),
    };
    Ok(ProbeLoss { total, nav, hint })
}

fn check_action(a: usize, n: usize) -> Result<()> {
    if a > n {
        return Err(Error::IndexOutOfRange { index: a, len: n + 1 });
    }
    Ok(())
}
