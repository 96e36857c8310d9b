pub mod dataset;
pub mod grouping;
pub mod mlp;
pub mod most;
pub mod protocol;
