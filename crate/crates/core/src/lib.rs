pub mod ingest;
pub mod parser;
pub mod classify;
pub mod config;
pub mod snapshot;
pub mod facts;
pub mod graph;
pub mod chart;
pub mod recommend;
pub mod trace;
pub mod bundle;
