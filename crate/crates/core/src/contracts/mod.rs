//! Contract state machines executed by the runtime.
//!
//! Contracts are plain data plus a `dispatch` entry point. A call either
//! returns an [`Outcome`] (events plus optional return value) or a
//! [`RevertReason`]; the runtime applies state changes only on success.

pub mod checkprogress;
pub mod distribution;
pub mod product;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Canonical, Encoder};
use crate::identity::Address;
use crate::ledger::Event;
use crate::runtime::ContractAddress;
use crate::value::Value;

pub use checkprogress::{CheckProgress, Quantity, Stage, TrackingInit, ViolationType};
pub use distribution::{DistributionInit, OilDistribution, Trace};
pub use product::{ProductInfo, ProductInit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContractKind {
    CheckProgress,
    OilDistribution,
    ProductInfo,
}

impl ContractKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContractKind::CheckProgress => "CheckProgress",
            ContractKind::OilDistribution => "OilDistribution",
            ContractKind::ProductInfo => "ProductInfo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ContractKind::CheckProgress, ContractKind::OilDistribution, ContractKind::ProductInfo]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

/// Why a call reverted. Reverted calls leave no trace on the ledger.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevertReason {
    #[error("out of gas: requires {required}, limit {limit}")]
    OutOfGas { required: u64, limit: u64 },
    #[error("caller not authorized")]
    Unauthorized,
    #[error("wrong stage: expected {expected}, found {actual}")]
    WrongStage { expected: String, actual: String },
    #[error("contract not initialized")]
    NotInitialized,
    #[error("negative quantity or price")]
    NegativeQuantity,
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("credential rejected")]
    BadCredential,
    #[error("caller not on the chain access list")]
    AccessDenied,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("bad init args: {0}")]
pub struct BadInitArgs(pub String);

#[derive(Clone, Copy, Debug)]
pub struct CallContext {
    pub caller: Address,
    pub contract: ContractAddress,
    pub tick: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub return_value: Option<Value>,
    pub events: Vec<Event>,
}

impl Outcome {
    pub fn event(e: Event) -> Self {
        Self { return_value: None, events: vec![e] }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContractInit {
    CheckProgress(TrackingInit),
    OilDistribution(DistributionInit),
    ProductInfo(ProductInit),
}

impl ContractInit {
    pub fn kind(&self) -> ContractKind {
        match self {
            ContractInit::CheckProgress(_) => ContractKind::CheckProgress,
            ContractInit::OilDistribution(_) => ContractKind::OilDistribution,
            ContractInit::ProductInfo(_) => ContractKind::ProductInfo,
        }
    }

    /// Arguments recorded on the `ContractCreated` event.
    pub fn creation_args(&self) -> Vec<(String, Value)> {
        let mut args: Vec<(String, Value)> = vec![("kind".into(), self.kind().as_str().into())];
        match self {
            ContractInit::CheckProgress(i) => {
                args.push(("batch".into(), i.batch.clone().into()));
                args.push(("data_address".into(), i.data_address.into()));
                if let Some(p) = i.predecessor {
                    args.push(("predecessor".into(), p.into()));
                }
                args.push(("buyer".into(), i.buyer.into()));
            }
            ContractInit::OilDistribution(i) => {
                args.push(("batch".into(), i.batch.clone().into()));
                args.push(("driller".into(), i.driller.into()));
                args.push(("factory".into(), i.factory.into()));
                args.push(("storage".into(), i.storage.into()));
                args.push(("pump".into(), i.pump.into()));
            }
            ContractInit::ProductInfo(i) => {
                args.push(("batch".into(), i.batch.clone().into()));
                args.push(("buyer".into(), i.buyer.into()));
                args.push(("tracking".into(), i.tracking.into()));
            }
        }
        args
    }
}

impl Canonical for ContractInit {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            ContractInit::CheckProgress(i) => enc.u8(0).value(i),
            ContractInit::OilDistribution(i) => enc.u8(1).value(i),
            ContractInit::ProductInfo(i) => enc.u8(2).value(i),
        };
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContractState {
    CheckProgress(CheckProgress),
    OilDistribution(OilDistribution),
    ProductInfo(ProductInfo),
}

impl ContractState {
    pub fn instantiate(address: ContractAddress, owner: Address, init: ContractInit) -> Result<Self, BadInitArgs> {
        Ok(match init {
            ContractInit::CheckProgress(i) => ContractState::CheckProgress(CheckProgress::new(owner, i)?),
            ContractInit::OilDistribution(i) => ContractState::OilDistribution(OilDistribution::new(owner, i)?),
            ContractInit::ProductInfo(i) => ContractState::ProductInfo(ProductInfo::new(address, owner, i)?),
        })
    }

    pub fn kind(&self) -> ContractKind {
        match self {
            ContractState::CheckProgress(_) => ContractKind::CheckProgress,
            ContractState::OilDistribution(_) => ContractKind::OilDistribution,
            ContractState::ProductInfo(_) => ContractKind::ProductInfo,
        }
    }

    pub fn functions(&self) -> &'static [&'static str] {
        match self {
            ContractState::CheckProgress(_) => checkprogress::FUNCTIONS,
            ContractState::OilDistribution(_) => distribution::FUNCTIONS,
            ContractState::ProductInfo(_) => product::FUNCTIONS,
        }
    }

    pub fn has_function(&self, name: &str) -> bool {
        self.functions().contains(&name)
    }

    pub fn dispatch(&mut self, ctx: &CallContext, function: &str, args: &[Value]) -> Result<Outcome, RevertReason> {
        match self {
            ContractState::CheckProgress(c) => c.dispatch(ctx, function, args),
            ContractState::OilDistribution(c) => c.dispatch(ctx, function, args),
            ContractState::ProductInfo(c) => c.dispatch(ctx, function, args),
        }
    }

    pub fn as_check_progress(&self) -> Option<&CheckProgress> {
        match self {
            ContractState::CheckProgress(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_distribution(&self) -> Option<&OilDistribution> {
        match self {
            ContractState::OilDistribution(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_product(&self) -> Option<&ProductInfo> {
        match self {
            ContractState::ProductInfo(c) => Some(c),
            _ => None,
        }
    }
}

/// Positional argument reader.
pub(crate) struct Args<'a>(pub &'a [Value]);

impl<'a> Args<'a> {
    pub fn expect_len(&self, n: usize) -> Result<(), RevertReason> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(RevertReason::BadArgs(format!("expected {n} arguments, got {}", self.0.len())))
        }
    }

    fn get(&self, i: usize) -> Result<&'a Value, RevertReason> {
        self.0.get(i).ok_or_else(|| RevertReason::BadArgs(format!("missing argument {i}")))
    }

    pub fn int(&self, i: usize) -> Result<i64, RevertReason> {
        self.get(i)?.as_int().ok_or_else(|| RevertReason::BadArgs(format!("argument {i} must be an integer")))
    }

    pub fn text(&self, i: usize) -> Result<&'a str, RevertReason> {
        self.get(i)?.as_text().ok_or_else(|| RevertReason::BadArgs(format!("argument {i} must be text")))
    }

    pub fn address(&self, i: usize) -> Result<Address, RevertReason> {
        self.get(i)?.as_address().ok_or_else(|| RevertReason::BadArgs(format!("argument {i} must be an address")))
    }

    pub fn bytes(&self, i: usize) -> Result<&'a [u8], RevertReason> {
        self.get(i)?.as_bytes().ok_or_else(|| RevertReason::BadArgs(format!("argument {i} must be bytes")))
    }
}

/// Converts a quantity/price argument, rejecting negatives.
pub(crate) fn non_negative(v: i64) -> Result<u64, RevertReason> {
    u64::try_from(v).map_err(|_| RevertReason::NegativeQuantity)
}
