#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod cox;
pub mod data;
pub mod diag;
pub mod metrics;
pub mod screening;
pub mod simgen;
