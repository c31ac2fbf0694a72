//! `navhint`: world and episode generation, hint datasets, training,
//! evaluation, hint analysis and report rendering.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod report;
