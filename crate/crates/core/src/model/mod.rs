//! Toy navigation agent with a recurrent state and a prefix-conditioned
//! hint decoder, trained with a small reverse-mode tape.

pub mod agent;
pub mod decode;
pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod params;
pub mod tape;

pub use agent::{orientation_feature, view_inputs, Forward, StepVars, ViewInput};
pub use decode::{argmax, decode_hint_greedy};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{discounted_returns, probe_loss, total_loss, LossValues, Probe, ProbeLoss, ProbeStep};
pub use optim::{clip_global_norm, Adam};
pub use params::{load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
pub use tape::{Mat, Tape, Var};
