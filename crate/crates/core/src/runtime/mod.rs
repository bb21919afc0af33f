//! Deterministic contract execution over the ledgers.
//!
//! The runtime owns every chain, the consortium committees and all deployed
//! contract state. Each successful deploy or call commits exactly one block.

mod gas;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec::{Canonical, Decode, DecodeError, Decoder, Encoder};
use crate::contracts::{CallContext, ContractInit, ContractKind, ContractState, RevertReason};
use crate::identity::{Address, Hash32, IdentityError};
use crate::ledger::{collect_endorsements, Chain, ChainClass, Committee, Event, LedgerError, Transaction};
use crate::value::{encode_args, Value};

pub use gas::{
    fiat_cost, gas_report, FiatBySpeed, GasCost, GasEntry, GasReportRow, GasSchedule, Speed, DEFAULT_ETH_USD,
    DEFAULT_GAS_LIMIT, PLUMBING_GAS,
};

/// 20-byte contract identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ContractAddress([u8; 20]);

hex_newtype!(ContractAddress, 20);

impl ContractAddress {
    pub const ZERO: ContractAddress = ContractAddress([0; 20]);

    /// Last 20 bytes of `H("oilchain/contract" || deployer || nonce)`.
    pub fn derive(deployer: &Address, nonce: u64) -> Self {
        let mut enc = Encoder::new();
        enc.str("oilchain/contract").value(deployer).u64(nonce);
        let h = Hash32::digest(&enc.finish());
        let mut out = [0u8; 20];
        out.copy_from_slice(&h.as_bytes()[12..]);
        Self(out)
    }
}

pub const DEPLOY_FUNCTION: &str = "deploy";
pub const CONTRACT_CREATED: &str = "ContractCreated";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown contract {0}")]
    UnknownContract(ContractAddress),
    #[error("unknown chain `{0}`")]
    UnknownChain(String),
    #[error("chain `{0}` already registered")]
    DuplicateChain(String),
    #[error("{caller} is not on the access list of chain `{chain}`")]
    AccessDenied { caller: Address, chain: String },
    #[error("bad init args: {0}")]
    BadInitArgs(String),
    #[error("consortium chain `{0}` has no validator committee")]
    MissingCommittee(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum CallStatus {
    Ok,
    Reverted(RevertReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallResult {
    pub return_value: Option<Value>,
    pub events: Vec<Event>,
    pub gas_used: u64,
    pub status: CallStatus,
}

impl CallResult {
    pub fn is_ok(&self) -> bool {
        self.status == CallStatus::Ok
    }

    fn reverted(reason: RevertReason, gas_used: u64) -> Self {
        Self { return_value: None, events: Vec::new(), gas_used, status: CallStatus::Reverted(reason) }
    }
}

#[derive(Clone, Debug)]
pub struct DeployedContract {
    pub chain: String,
    pub owner: Address,
    pub state: ContractState,
}

#[derive(Clone, Debug, Default)]
pub struct Runtime {
    chains: BTreeMap<String, Chain>,
    committees: BTreeMap<String, Committee>,
    contracts: BTreeMap<ContractAddress, DeployedContract>,
    nonces: BTreeMap<Address, u64>,
    schedule: GasSchedule,
    clock: u64,
}

impl Runtime {
    pub fn new(schedule: GasSchedule) -> Self {
        Self { schedule, ..Self::default() }
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    /// Registers a chain. Consortium chains need a committee whose validator
    /// set matches the chain's.
    pub fn add_chain(&mut self, chain: Chain, committee: Option<Committee>) -> Result<(), RuntimeError> {
        if self.chains.contains_key(&chain.id) {
            return Err(RuntimeError::DuplicateChain(chain.id));
        }
        if chain.class == ChainClass::Consortium {
            let committee = committee.ok_or_else(|| RuntimeError::MissingCommittee(chain.id.clone()))?;
            if committee.validators() != chain.validators {
                return Err(RuntimeError::MissingCommittee(chain.id.clone()));
            }
            self.committees.insert(chain.id.clone(), committee);
        }
        self.chains.insert(chain.id.clone(), chain);
        Ok(())
    }

    pub fn chain(&self, id: &str) -> Result<&Chain, RuntimeError> {
        self.chains.get(id).ok_or_else(|| RuntimeError::UnknownChain(id.to_owned()))
    }

    pub fn chains(&self) -> impl Iterator<Item = &Chain> {
        self.chains.values()
    }

    pub fn into_chains(self) -> Vec<Chain> {
        self.chains.into_values().collect()
    }

    pub fn committee_mut(&mut self, chain_id: &str) -> Option<&mut Committee> {
        self.committees.get_mut(chain_id)
    }

    pub fn contract(&self, address: &ContractAddress) -> Result<&DeployedContract, RuntimeError> {
        self.contracts.get(address).ok_or(RuntimeError::UnknownContract(*address))
    }

    pub fn state(&self, address: &ContractAddress) -> Result<&ContractState, RuntimeError> {
        self.contract(address).map(|c| &c.state)
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    /// Moves the logical clock forward; never backwards.
    pub fn advance_to(&mut self, tick: u64) {
        self.clock = self.clock.max(tick);
    }

    pub fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn gas_cost(&self, function: &str) -> Result<GasCost, RuntimeError> {
        self.schedule.gas_cost(function)
    }

    fn check_access(&self, chain_id: &str, caller: &Address) -> Result<(), RuntimeError> {
        if self.chain(chain_id)?.is_member(caller) {
            Ok(())
        } else {
            Err(RuntimeError::AccessDenied { caller: *caller, chain: chain_id.to_owned() })
        }
    }

    fn commit(&mut self, chain_id: &str, tx: Transaction) -> Result<(), RuntimeError> {
        let caller = tx.caller;
        let chain = self.chain(chain_id)?;
        let body = chain.propose(vec![tx], self.clock);
        let endorsements = match chain.class {
            ChainClass::Consortium => {
                let committee =
                    self.committees.get(chain_id).ok_or_else(|| RuntimeError::MissingCommittee(chain_id.to_owned()))?;
                collect_endorsements(&body, chain_id, committee)?
            }
            ChainClass::Private => Vec::new(),
        };
        let chain = self.chains.get_mut(chain_id).expect("checked above");
        chain.append_block(&caller, body, endorsements)?;
        Ok(())
    }

    /// Deploys a contract owned by `deployer` and records a `ContractCreated`
    /// event carrying the creation arguments.
    pub fn deploy(
        &mut self,
        chain_id: &str,
        init: ContractInit,
        deployer: Address,
    ) -> Result<ContractAddress, RuntimeError> {
        self.check_access(chain_id, &deployer)?;
        let nonce = self.nonces.get(&deployer).copied().unwrap_or(0);
        let address = ContractAddress::derive(&deployer, nonce);
        let args = init.to_canonical_bytes();
        let mut event = Event::new(CONTRACT_CREATED, address).with("owner", deployer);
        event.args.extend(init.creation_args());
        let state = ContractState::instantiate(address, deployer, init).map_err(|e| RuntimeError::BadInitArgs(e.0))?;
        let gas = self.schedule.gas_cost(DEPLOY_FUNCTION)?;
        let tx = Transaction {
            caller: deployer,
            contract: address,
            function: DEPLOY_FUNCTION.to_owned(),
            args,
            gas_used: gas.transaction,
            events: vec![event],
        };
        self.commit(chain_id, tx)?;
        self.nonces.insert(deployer, nonce + 1);
        self.contracts.insert(address, DeployedContract { chain: chain_id.to_owned(), owner: deployer, state });
        Ok(address)
    }

    /// Dispatches a call. Modifier failures and gas exhaustion come back as a
    /// `Reverted` status with no state change and no block.
    pub fn call(
        &mut self,
        contract: ContractAddress,
        function: &str,
        args: &[Value],
        caller: Address,
        gas_limit: u64,
    ) -> Result<CallResult, RuntimeError> {
        let deployed = self.contract(&contract)?;
        if !deployed.state.has_function(function) {
            return Err(RuntimeError::UnknownFunction(function.to_owned()));
        }
        let chain_id = deployed.chain.clone();
        self.check_access(&chain_id, &caller)?;
        let gas = self.schedule.gas_cost(function)?;
        if gas.transaction > gas_limit {
            return Ok(CallResult::reverted(
                RevertReason::OutOfGas { required: gas.transaction, limit: gas_limit },
                gas_limit,
            ));
        }
        let mut state = deployed.state.clone();
        let ctx = CallContext { caller, contract, tick: self.clock };
        let outcome = match state.dispatch(&ctx, function, args) {
            Ok(o) => o,
            Err(reason) => return Ok(CallResult::reverted(reason, gas.transaction)),
        };
        let tx = Transaction {
            caller,
            contract,
            function: function.to_owned(),
            args: encode_args(args),
            gas_used: gas.transaction,
            events: outcome.events.clone(),
        };
        self.commit(&chain_id, tx)?;
        self.contracts.get_mut(&contract).expect("exists").state = state;
        Ok(CallResult {
            return_value: outcome.return_value,
            events: outcome.events,
            gas_used: gas.transaction,
            status: CallStatus::Ok,
        })
    }

    /// `call` with the default gas limit.
    pub fn invoke(
        &mut self,
        contract: ContractAddress,
        function: &str,
        args: &[Value],
        caller: Address,
    ) -> Result<CallResult, RuntimeError> {
        self.call(contract, function, args, caller, DEFAULT_GAS_LIMIT)
    }

    pub fn contracts_of_kind(&self, kind: ContractKind) -> Vec<ContractAddress> {
        self.contracts.iter().filter(|(_, c)| c.state.kind() == kind).map(|(a, _)| *a).collect()
    }
}
