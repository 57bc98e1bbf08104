pub mod cli;
pub mod eval;
pub mod ingest;
pub mod layers;
pub mod models;
pub mod ndkernel;
pub mod train;
