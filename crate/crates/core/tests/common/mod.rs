//! Independent oracles shared by the integration tests and the acceptance run.

#![allow(dead_code)]

pub mod gradcheck;
pub mod median;
pub mod reference_blend;
