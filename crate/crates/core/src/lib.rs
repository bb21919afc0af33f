//! Deterministic simulator for a permissioned oil supply chain.

pub mod cli;
pub mod codec;
#[macro_use]
pub mod identity;
pub mod contracts;
pub mod ledger;
pub mod provenance;
pub mod report;
pub mod runtime;
pub mod scenario;
pub mod telemetry;
pub mod value;
pub mod workflow;
