//! Hop orchestration: per-hop contract pairs, the buyer handshake, telemetry
//! feeds, deliveries and settlement.
//!
//! Each batch has one `OilDistribution` contract on the consortium chain. Each
//! hop gets a private chain holding its `ProductInfo` contract and raw
//! telemetry, plus a `CheckProgress` tracking contract on the consortium chain
//! linked to the previous hop's tracking contract.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::checkprogress::ENTER_OIL;
use crate::contracts::distribution::{OIL_IN_OIL_STORAGE, PUMP_SOLD_OIL, READY_TO_FACTORY, READY_TO_STORAGE};
use crate::contracts::product::{self, accept_args, ACCEPT_SHIPMENT, CLOSE_HOP, CONFIRM_DELIVERY, RECORD_TELEMETRY};
use crate::contracts::{ContractInit, DistributionInit, ProductInit, RevertReason, TrackingInit};
use crate::identity::{
    generate_actor, make_passphrase_credential, Actor, Address, Credential, Hash32, IdentityError, Keypair, Role,
};
use crate::ledger::{Chain, Committee, EventFilter, LedgerError, Participant};
use crate::provenance::{self, ProvenanceError, ProvenanceReport};
use crate::runtime::{CallResult, CallStatus, ContractAddress, GasSchedule, Runtime, RuntimeError, DEFAULT_GAS_LIMIT};
use crate::telemetry::{SensorKind, SensorReading};
use crate::value::Value;

pub const CONSORTIUM_CHAIN: &str = "consortium";

/// Role pairs that may form a hop.
pub const ALLOWED_HOPS: [(Role, Role); 5] = [
    (Role::Driller, Role::Refinery),
    (Role::Refinery, Role::Storage),
    (Role::Storage, Role::Pump),
    (Role::Storage, Role::OtherFactory),
    (Role::Pump, Role::Consumer),
];

pub const REQUIRED_ROLES: [Role; 4] = [Role::Driller, Role::Refinery, Role::Storage, Role::Pump];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkflowError {
    #[error("{seller} cannot sell to {buyer}")]
    InvalidRolePair { seller: Role, buyer: Role },
    #[error("hop from {0} needs a predecessor tracking contract")]
    MissingPredecessor(Role),
    #[error("{0} is not a valid predecessor for this hop")]
    InvalidPredecessor(ContractAddress),
    #[error("topology has no {0}")]
    MissingRole(Role),
    #[error("unknown batch `{0}`")]
    UnknownBatch(String),
    #[error("batch `{0}` already exists")]
    DuplicateBatch(String),
    #[error("unknown hop {0}")]
    UnknownHop(usize),
    #[error("hop {hop} is {actual}, expected {expected}")]
    WrongStatus { hop: usize, expected: String, actual: HopStatus },
    #[error("credential rejected")]
    BadCredential,
    #[error("reading from {0} is not the hop's data address")]
    Unauthorized(Address),
    #[error("reading ticks must be non-decreasing")]
    TickRegression,
    #[error("hop {hop} silent for {gap} ticks, budget {budget}")]
    SilenceExceeded { hop: usize, gap: u64, budget: u64 },
    #[error("{function} reverted: {reason}")]
    Reverted { function: String, reason: RevertReason },
    #[error("value {0} out of range")]
    OutOfRange(u64),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl From<ProvenanceError> for WorkflowError {
    fn from(e: ProvenanceError) -> Self {
        match e {
            ProvenanceError::UnknownBatch(b) => WorkflowError::UnknownBatch(b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopStatus {
    Proposed,
    Accepted,
    InTransit,
    Delivered,
    Settled,
}

impl std::fmt::Display for HopStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            HopStatus::Proposed => "proposed",
            HopStatus::Accepted => "accepted",
            HopStatus::InTransit => "in_transit",
            HopStatus::Delivered => "delivered",
            HopStatus::Settled => "settled",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setpoints {
    pub temperature: i64,
    pub humidity: i64,
    pub pressure: i64,
}

impl Setpoints {
    pub fn get(&self, kind: SensorKind) -> Option<i64> {
        match kind {
            SensorKind::Temperature => Some(self.temperature),
            SensorKind::Humidity => Some(self.humidity),
            SensorKind::Pressure => Some(self.pressure),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopTerms {
    pub oil_id: String,
    pub oil_name: String,
    pub price: u64,
    pub quantity: u64,
    pub setpoints: Setpoints,
    /// Accurate band half-width.
    pub tolerance: u64,
    /// Registers a passphrase the buyer may accept with.
    pub passphrase: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub id: usize,
    pub batch: String,
    pub seller_role: Role,
    pub buyer_role: Role,
    pub seller: Address,
    pub buyer: Address,
    pub chain_id: String,
    pub product_contract: ContractAddress,
    pub tracking_contract: ContractAddress,
    pub predecessor: Option<ContractAddress>,
    pub status: HopStatus,
    pub terms: HopTerms,
    /// Logical tick that local reading tick 0 maps to.
    pub feed_base: Option<u64>,
    pub last_reading_tick: Option<u64>,
    pub readings_fed: u64,
    pub last_weight: Option<i64>,
    pub weight_delta: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Settlement {
    pub hop: usize,
    pub chain: String,
    pub block_index: u64,
    pub from: Address,
    pub to: Address,
    pub amount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocationRecord {
    pub block_index: u64,
    pub tick: u64,
    pub lat: i64,
    pub lon: i64,
    pub source: Address,
}

/// Actors, telemetry gateways and the validator committee.
#[derive(Clone, Debug)]
pub struct Topology {
    seed: u64,
    actors: BTreeMap<Role, Actor>,
    gateways: BTreeMap<Role, Keypair>,
    committee: Committee,
}

impl Topology {
    /// Generates one actor per role. `faulty` validators are chosen from the seed.
    pub fn generate(seed: u64, roles: &[Role], validators: usize, faulty: usize) -> Result<Self, WorkflowError> {
        for r in REQUIRED_ROLES {
            if !roles.contains(&r) {
                return Err(WorkflowError::MissingRole(r));
            }
        }
        crate::ledger::fault_tolerance(validators)?;
        let actors = roles.iter().map(|r| (*r, generate_actor(*r, seed))).collect();
        let gateways = roles
            .iter()
            .filter(|r| **r != Role::Consumer)
            .map(|r| (*r, Keypair::from_seed(&format!("gateway/{}", r.as_str()), seed)))
            .collect();
        let committee = Committee::generate(validators, seed).with_random_faults(faulty, seed);
        Ok(Self { seed, actors, gateways, committee })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn actor(&self, role: Role) -> Result<&Actor, WorkflowError> {
        self.actors.get(&role).ok_or(WorkflowError::MissingRole(role))
    }

    pub fn actors(&self) -> impl Iterator<Item = &Actor> {
        self.actors.values()
    }

    /// Telemetry gateway registered as the seller's data address.
    pub fn gateway(&self, role: Role) -> Result<&Keypair, WorkflowError> {
        self.gateways.get(&role).ok_or(WorkflowError::MissingRole(role))
    }

    pub fn committee(&self) -> &Committee {
        &self.committee
    }

    /// Consortium members: every actor plus every gateway.
    pub fn members(&self) -> Vec<Participant> {
        let actors =
            self.actors.values().map(|a| Participant { address: a.address(), label: a.role().as_str().into() });
        let gateways = self
            .gateways
            .iter()
            .map(|(r, k)| Participant { address: k.address(), label: format!("gateway/{}", r.as_str()) });
        actors.chain(gateways).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkflowConfig {
    pub gas_limit: u64,
    /// Maximum gap between consecutive readings on a hop; `None` disables the check.
    pub max_silence: Option<u64>,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self { gas_limit: DEFAULT_GAS_LIMIT, max_silence: None }
    }
}

#[derive(Clone, Debug)]
struct Batch {
    distribution: ContractAddress,
    hops: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SupplyChain {
    topology: Topology,
    config: WorkflowConfig,
    runtime: Runtime,
    batches: BTreeMap<String, Batch>,
    hops: Vec<Hop>,
    settlements: Vec<Settlement>,
}

fn to_i64(v: u64) -> Result<i64, WorkflowError> {
    i64::try_from(v).map_err(|_| WorkflowError::OutOfRange(v))
}

impl SupplyChain {
    pub fn new(topology: Topology, config: WorkflowConfig) -> Result<Self, WorkflowError> {
        let committee = topology.committee().clone();
        let chain = Chain::new_consortium(CONSORTIUM_CHAIN, topology.members(), committee.validators())?;
        let mut runtime = Runtime::new(GasSchedule::standard());
        runtime.add_chain(chain, Some(committee))?;
        Ok(Self { topology, config, runtime, batches: BTreeMap::new(), hops: Vec::new(), settlements: Vec::new() })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn runtime(&self) -> &Runtime {
        &self.runtime
    }

    pub fn runtime_mut(&mut self) -> &mut Runtime {
        &mut self.runtime
    }

    pub fn consortium(&self) -> &Chain {
        self.runtime.chain(CONSORTIUM_CHAIN).expect("consortium registered at construction")
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn hop(&self, id: usize) -> Result<&Hop, WorkflowError> {
        id.checked_sub(1).and_then(|i| self.hops.get(i)).ok_or(WorkflowError::UnknownHop(id))
    }

    fn hop_mut(&mut self, id: usize) -> Result<&mut Hop, WorkflowError> {
        id.checked_sub(1).and_then(|i| self.hops.get_mut(i)).ok_or(WorkflowError::UnknownHop(id))
    }

    pub fn settlements(&self) -> &[Settlement] {
        &self.settlements
    }

    pub fn batch_ids(&self) -> impl Iterator<Item = &str> {
        self.batches.keys().map(String::as_str)
    }

    pub fn distribution_contract(&self, batch: &str) -> Result<ContractAddress, WorkflowError> {
        self.batches.get(batch).map(|b| b.distribution).ok_or_else(|| WorkflowError::UnknownBatch(batch.to_owned()))
    }

    pub fn batch_hops(&self, batch: &str) -> Result<Vec<&Hop>, WorkflowError> {
        let b = self.batches.get(batch).ok_or_else(|| WorkflowError::UnknownBatch(batch.to_owned()))?;
        b.hops.iter().map(|id| self.hop(*id)).collect()
    }

    fn invoke(
        &mut self,
        contract: ContractAddress,
        function: &str,
        args: &[Value],
        caller: Address,
    ) -> Result<CallResult, WorkflowError> {
        let r = self.runtime.call(contract, function, args, caller, self.config.gas_limit)?;
        match r.status {
            CallStatus::Ok => Ok(r),
            CallStatus::Reverted(reason) => Err(WorkflowError::Reverted { function: function.to_owned(), reason }),
        }
    }

    /// Deploys the batch's distribution contract, owned by the driller.
    pub fn create_batch(&mut self, batch: &str, accurate_hum: i64) -> Result<ContractAddress, WorkflowError> {
        if self.batches.contains_key(batch) {
            return Err(WorkflowError::DuplicateBatch(batch.to_owned()));
        }
        let t = &self.topology;
        let init = DistributionInit {
            batch: batch.to_owned(),
            driller: t.actor(Role::Driller)?.address(),
            factory: t.actor(Role::Refinery)?.address(),
            storage: t.actor(Role::Storage)?.address(),
            pump: t.actor(Role::Pump)?.address(),
            accurate_hum,
        };
        let driller = init.driller;
        self.runtime.tick();
        let address = self.runtime.deploy(CONSORTIUM_CHAIN, ContractInit::OilDistribution(init), driller)?;
        self.batches.insert(batch.to_owned(), Batch { distribution: address, hops: Vec::new() });
        Ok(address)
    }

    /// Opens a hop: private chain and product contract, tracking contract with
    /// the terms entered, predecessor link recorded. Returns the hop id.
    pub fn initiate_hop(
        &mut self,
        batch: &str,
        seller_role: Role,
        buyer_role: Role,
        terms: HopTerms,
        predecessor: Option<ContractAddress>,
    ) -> Result<usize, WorkflowError> {
        if !self.batches.contains_key(batch) {
            return Err(WorkflowError::UnknownBatch(batch.to_owned()));
        }
        if !ALLOWED_HOPS.contains(&(seller_role, buyer_role)) {
            return Err(WorkflowError::InvalidRolePair { seller: seller_role, buyer: buyer_role });
        }
        match (seller_role, predecessor) {
            (Role::Driller, None) => {}
            (Role::Driller, Some(p)) => return Err(WorkflowError::InvalidPredecessor(p)),
            (r, None) => return Err(WorkflowError::MissingPredecessor(r)),
            (r, Some(p)) => {
                let ok = self.batches[batch].hops.iter().any(|id| {
                    let h = &self.hops[id - 1];
                    h.tracking_contract == p && h.buyer_role == r
                });
                if !ok {
                    return Err(WorkflowError::InvalidPredecessor(p));
                }
            }
        }
        let price = to_i64(terms.price)?;
        let quantity = to_i64(terms.quantity)?;
        let seller = self.topology.actor(seller_role)?.clone();
        let buyer = self.topology.actor(buyer_role)?.clone();
        let gateway = self.topology.gateway(seller_role)?.address();

        let id = self.hops.len() + 1;
        let chain_id = format!("private-hop-{id}");
        let acl = vec![
            Participant { address: seller.address(), label: seller_role.as_str().into() },
            Participant { address: buyer.address(), label: buyer_role.as_str().into() },
        ];
        self.runtime.add_chain(Chain::new_private(chain_id.clone(), acl), None)?;

        self.runtime.tick();
        let tracking_init = TrackingInit {
            batch: batch.to_owned(),
            data_address: gateway,
            buyer: buyer.address(),
            predecessor,
            tolerance: terms.tolerance,
        };
        let tracking =
            self.runtime.deploy(CONSORTIUM_CHAIN, ContractInit::CheckProgress(tracking_init), seller.address())?;
        self.runtime.tick();
        let s = terms.setpoints;
        let args = [
            Value::Text(terms.oil_name.clone()),
            Value::Text(terms.oil_id.clone()),
            Value::Int(quantity),
            Value::Int(price),
            Value::Int(s.temperature),
            Value::Int(s.humidity),
            Value::Int(s.pressure),
        ];
        self.invoke(tracking, ENTER_OIL, &args, seller.address())?;

        let passphrase =
            terms.passphrase.as_deref().map(|p| make_passphrase_credential(p, chain_id.as_bytes())).transpose()?;
        let product_init = ProductInit {
            batch: batch.to_owned(),
            buyer: buyer.address(),
            buyer_key: buyer.public_key(),
            tracking,
            oil_name: terms.oil_name.clone(),
            price: terms.price,
            quantity: terms.quantity,
            setpoints: [s.temperature, s.humidity, s.pressure],
            passphrase,
        };
        self.runtime.tick();
        let product = self.runtime.deploy(&chain_id, ContractInit::ProductInfo(product_init), seller.address())?;

        self.hops.push(Hop {
            id,
            batch: batch.to_owned(),
            seller_role,
            buyer_role,
            seller: seller.address(),
            buyer: buyer.address(),
            chain_id,
            product_contract: product,
            tracking_contract: tracking,
            predecessor,
            status: HopStatus::Proposed,
            terms,
            feed_base: None,
            last_reading_tick: None,
            readings_fed: 0,
            last_weight: None,
            weight_delta: None,
        });
        self.batches.get_mut(batch).expect("checked").hops.push(id);
        Ok(id)
    }

    /// Digest the buyer signs to accept the hop.
    pub fn accept_message(&self, hop: usize) -> Result<Hash32, WorkflowError> {
        let h = self.hop(hop)?;
        let state = self.runtime.state(&h.product_contract)?;
        Ok(state.as_product().expect("product contract").accept_message)
    }

    /// Signature credential over the accept message by `signer`'s key.
    pub fn sign_acceptance(&self, hop: usize, signer: Role) -> Result<Credential, WorkflowError> {
        let msg = self.accept_message(hop)?;
        Ok(Credential::signature(self.topology.actor(signer)?.sign(msg.as_bytes())))
    }

    /// Passphrase credential as presented by the buyer.
    pub fn passphrase_credential(&self, hop: usize, passphrase: &str) -> Result<Credential, WorkflowError> {
        let h = self.hop(hop)?;
        Ok(make_passphrase_credential(passphrase, h.chain_id.as_bytes())?)
    }

    fn expect_status(&self, hop: usize, allowed: &[HopStatus]) -> Result<(), WorkflowError> {
        let actual = self.hop(hop)?.status;
        if allowed.contains(&actual) {
            Ok(())
        } else {
            let expected = allowed.iter().map(ToString::to_string).collect::<Vec<_>>().join(" or ");
            Err(WorkflowError::WrongStatus { hop, expected, actual })
        }
    }

    /// Buyer presents a credential. On success the settlement is recorded on
    /// the hop's private chain.
    pub fn accept_shipment(&mut self, hop: usize, credential: &Credential) -> Result<&Settlement, WorkflowError> {
        self.expect_status(hop, &[HopStatus::Proposed])?;
        let h = self.hop(hop)?.clone();
        self.runtime.tick();
        match self.invoke(h.product_contract, ACCEPT_SHIPMENT, &accept_args(credential), h.buyer) {
            Ok(_) => {}
            Err(WorkflowError::Reverted { reason: RevertReason::BadCredential, .. }) => {
                return Err(WorkflowError::BadCredential)
            }
            Err(e) => return Err(e),
        }
        let block_index = self.runtime.chain(&h.chain_id)?.tip().index;
        self.hop_mut(hop)?.status = HopStatus::Accepted;
        self.settlements.push(Settlement {
            hop,
            chain: h.chain_id,
            block_index,
            from: h.buyer,
            to: h.seller,
            amount: h.terms.price,
        });
        Ok(self.settlements.last().expect("just pushed"))
    }

    /// Dispatches readings in order: temperature, humidity and pressure go to
    /// the tracking contract's checks, everything else is recorded on the
    /// hop's private chain.
    pub fn feed(&mut self, hop: usize, readings: &[SensorReading]) -> Result<Vec<CallResult>, WorkflowError> {
        self.expect_status(hop, &[HopStatus::Accepted, HopStatus::InTransit])?;
        let h = self.hop(hop)?.clone();
        let gateway = self.topology.gateway(h.seller_role)?.address();
        if let Some(r) = readings.iter().find(|r| r.source != gateway) {
            return Err(WorkflowError::Unauthorized(r.source));
        }
        let mut last = h.last_reading_tick;
        for r in readings {
            if last.is_some_and(|l| r.tick < l) {
                return Err(WorkflowError::TickRegression);
            }
            if let Some(budget) = self.config.max_silence {
                let gap = r.tick - last.unwrap_or(0);
                if gap > budget {
                    return Err(WorkflowError::SilenceExceeded { hop, gap, budget });
                }
            }
            last = Some(r.tick);
        }

        let base = h.feed_base.unwrap_or(self.runtime.now() + 1);
        {
            let hm = self.hop_mut(hop)?;
            hm.feed_base = Some(base);
            hm.status = HopStatus::InTransit;
        }
        let mut results = Vec::with_capacity(readings.len());
        for r in readings {
            self.runtime.advance_to(base + r.tick);
            let result = match r.kind.quantity() {
                Some(q) => {
                    self.invoke(h.tracking_contract, q.check_function(), &[Value::Int(r.value.scalar())], gateway)?
                }
                None => {
                    let (a, b) = r.value.pair();
                    let args = [
                        Value::Text(r.kind.as_str().into()),
                        Value::Int(a),
                        Value::Int(b),
                        Value::Int(to_i64(r.tick)?),
                        Value::Address(r.source),
                    ];
                    self.invoke(h.product_contract, RECORD_TELEMETRY, &args, h.seller)?
                }
            };
            let hm = self.hop_mut(hop)?;
            hm.readings_fed += 1;
            hm.last_reading_tick = Some(r.tick);
            if r.kind == SensorKind::Weight {
                hm.last_weight = Some(r.value.scalar());
            }
            results.push(result);
        }
        Ok(results)
    }

    /// Feeds GPS fixes and returns the resulting records.
    pub fn track_location(
        &mut self,
        hop: usize,
        readings: &[SensorReading],
    ) -> Result<Vec<LocationRecord>, WorkflowError> {
        let fixes: Vec<SensorReading> = readings.iter().filter(|r| r.kind == SensorKind::Location).copied().collect();
        let before = self.runtime.chain(&self.hop(hop)?.chain_id)?.len() as u64;
        self.feed(hop, &fixes)?;
        let seller = self.hop(hop)?.seller;
        Ok(self.location_records(hop, &seller)?.into_iter().filter(|r| r.block_index >= before).collect())
    }

    /// GPS records on the hop's private chain, readable by hop participants only.
    pub fn location_records(&self, hop: usize, querier: &Address) -> Result<Vec<LocationRecord>, WorkflowError> {
        let h = self.hop(hop)?;
        let chain = self.runtime.chain(&h.chain_id)?;
        let filter = EventFilter::default().contract(h.product_contract).name(product::TELEMETRY_RECORDED);
        let events = chain.query_events(querier, &filter)?;
        Ok(events
            .into_iter()
            .filter(|e| e.event.arg("kind").and_then(Value::as_text) == Some(SensorKind::Location.as_str()))
            .map(|e| LocationRecord {
                block_index: e.block_index,
                tick: e.event.arg("tick").and_then(Value::as_int).unwrap_or(0) as u64,
                lat: e.event.arg("value").and_then(Value::as_int).unwrap_or(0),
                lon: e.event.arg("value2").and_then(Value::as_int).unwrap_or(0),
                source: e.event.arg("source").and_then(Value::as_address).unwrap_or(Address::ZERO),
            })
            .collect())
    }

    /// Completes the hop: fires the matching distribution transition, then the
    /// buyer confirms delivery with the weight delta, if any was measured.
    pub fn deliver(&mut self, hop: usize) -> Result<(), WorkflowError> {
        self.expect_status(hop, &[HopStatus::Accepted, HopStatus::InTransit])?;
        let h = self.hop(hop)?.clone();
        let distribution = self.distribution_contract(&h.batch)?;
        let price = Value::Int(to_i64(h.terms.price)?);
        let quantity = Value::Int(to_i64(h.terms.quantity)?);
        let transition = match (h.seller_role, h.buyer_role) {
            (Role::Driller, Role::Refinery) => Some((
                READY_TO_FACTORY,
                vec![Value::Text(h.terms.oil_id.clone()), Value::Text(h.terms.oil_name.clone()), price, quantity],
                h.seller,
            )),
            (Role::Refinery, Role::Storage) => Some((READY_TO_STORAGE, vec![price, quantity], h.seller)),
            (Role::Storage, Role::Pump) => Some((OIL_IN_OIL_STORAGE, vec![price, quantity], h.seller)),
            (Role::Pump, Role::Consumer) => Some((PUMP_SOLD_OIL, vec![price, quantity], h.buyer)),
            _ => None,
        };
        if let Some((function, args, caller)) = transition {
            self.runtime.tick();
            self.invoke(distribution, function, &args, caller)?;
        }
        let weight_delta = h.last_weight.map(|w| w - h.terms.quantity as i64);
        let args: Vec<Value> = weight_delta.map(Value::Int).into_iter().collect();
        self.runtime.tick();
        self.invoke(h.product_contract, CONFIRM_DELIVERY, &args, h.buyer)?;
        let hm = self.hop_mut(hop)?;
        hm.status = HopStatus::Delivered;
        hm.weight_delta = weight_delta;
        Ok(())
    }

    /// Seller closes a delivered hop.
    pub fn close(&mut self, hop: usize) -> Result<(), WorkflowError> {
        self.expect_status(hop, &[HopStatus::Delivered])?;
        let h = self.hop(hop)?.clone();
        self.runtime.tick();
        self.invoke(h.product_contract, CLOSE_HOP, &[], h.seller)?;
        self.hop_mut(hop)?.status = HopStatus::Settled;
        Ok(())
    }

    /// Provenance from the consortium ledger alone.
    pub fn trace(&self, batch: &str) -> Result<ProvenanceReport, WorkflowError> {
        Ok(provenance::trace(self.consortium(), batch)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::Trace;
    use crate::telemetry::{generate_readings, Channel, SensorProfile, SensorValue};

    const ROLES: [Role; 6] = Role::ALL;

    fn terms(name: &str, price: u64) -> HopTerms {
        HopTerms {
            oil_id: "101".into(),
            oil_name: name.into(),
            price,
            quantity: 1000,
            setpoints: Setpoints { temperature: 22, humidity: 10, pressure: 8 },
            tolerance: 0,
            passphrase: None,
        }
    }

    fn chain() -> SupplyChain {
        let t = Topology::generate(5, &ROLES, 4, 0).unwrap();
        let mut sc = SupplyChain::new(t, WorkflowConfig::default()).unwrap();
        sc.create_batch("b1", 10).unwrap();
        sc
    }

    fn readings(sc: &SupplyChain, seller: Role, kind: SensorKind, setpoint: i64, duration: u64) -> Vec<SensorReading> {
        let p = SensorProfile { channels: vec![Channel::new(kind, setpoint, 0)], duration, faults: vec![] };
        generate_readings(&p, sc.topology().gateway(seller).unwrap().address(), 1)
    }

    fn accept(sc: &mut SupplyChain, hop: usize) {
        let role = sc.hop(hop).unwrap().buyer_role;
        let c = sc.sign_acceptance(hop, role).unwrap();
        sc.accept_shipment(hop, &c).unwrap();
    }

    #[test]
    fn first_hop_created_with_enter_oil() {
        let mut sc = chain();
        let h = sc.initiate_hop("b1", Role::Driller, Role::Refinery, terms("Crude", 50), None).unwrap();
        let hop = sc.hop(h).unwrap();
        assert_eq!(hop.status, HopStatus::Proposed);
        let cp = sc.runtime().state(&hop.tracking_contract).unwrap().as_check_progress().unwrap();
        assert!(cp.initialized);
        assert_eq!(cp.oil_name, "Crude");
        assert_eq!(cp.data_address, sc.topology().gateway(Role::Driller).unwrap().address());
    }

    #[test]
    fn predecessor_rules() {
        let mut sc = chain();
        assert_eq!(
            sc.initiate_hop("b1", Role::Refinery, Role::Storage, terms("Refined", 60), None),
            Err(WorkflowError::MissingPredecessor(Role::Refinery))
        );
        assert_eq!(
            sc.initiate_hop("b1", Role::Driller, Role::Pump, terms("Crude", 60), None),
            Err(WorkflowError::InvalidRolePair { seller: Role::Driller, buyer: Role::Pump })
        );
        let h1 = sc.initiate_hop("b1", Role::Driller, Role::Refinery, terms("Crude", 50), None).unwrap();
        let t1 = sc.hop(h1).unwrap().tracking_contract;
        assert_eq!(
            sc.initiate_hop("b1", Role::Storage, Role::Pump, terms("Refined", 60), Some(t1)),
            Err(WorkflowError::InvalidPredecessor(t1))
        );
        let h2 = sc.initiate_hop("b1", Role::Refinery, Role::Storage, terms("Refined", 60), Some(t1)).unwrap();
        assert_eq!(sc.hop(h2).unwrap().predecessor, Some(t1));
        assert!(matches!(
            sc.initiate_hop("nope", Role::Driller, Role::Refinery, terms("Crude", 50), None),
            Err(WorkflowError::UnknownBatch(_))
        ));
    }

    #[test]
    fn handshake_signature_and_third_party() {
        let mut sc = chain();
        let h = sc.initiate_hop("b1", Role::Driller, Role::Refinery, terms("Crude", 50), None).unwrap();
        let bad = sc.sign_acceptance(h, Role::Storage).unwrap();
        assert_eq!(sc.accept_shipment(h, &bad).unwrap_err(), WorkflowError::BadCredential);
        assert_eq!(sc.hop(h).unwrap().status, HopStatus::Proposed);
        assert!(sc.settlements().is_empty());
        accept(&mut sc, h);
        assert_eq!(sc.settlements().len(), 1);
        assert_eq!(sc.settlements()[0].amount, 50);
        assert!(matches!(sc.accept_shipment(h, &bad), Err(WorkflowError::WrongStatus { .. })));
    }

    #[test]
    fn handshake_passphrase() {
        let mut sc = chain();
        let mut t = terms("Crude", 50);
        t.passphrase = Some("open-sesame".into());
        let h = sc.initiate_hop("b1", Role::Driller, Role::Refinery, t, None).unwrap();
        let wrong = sc.passphrase_credential(h, "Open-Sesame").unwrap();
        assert_eq!(sc.accept_shipment(h, &wrong).unwrap_err(), WorkflowError::BadCredential);
        let right = sc.passphrase_credential(h, "open-sesame").unwrap();
        sc.accept_shipment(h, &right).unwrap();
        assert_eq!(sc.hop(h).unwrap().status, HopStatus::Accepted);
    }

    #[test]
    fn feed_low_pressure_returns_low_message() {
        let mut sc = chain();
        let h = sc.initiate_hop("b1", Role::Driller, Role::Refinery, terms("Crude", 50), None).unwrap();
        accept(&mut sc, h);
        let r = readings(&sc, Role::Driller, SensorKind::Pressure, 6, 1);
        let out = sc.feed(h, &r).unwrap();
        assert_eq!(out[0].return_value, Some(Value::Text("Current Pressure is very LOW".into())));
        assert_eq!(sc.hop(h).unwrap().status, HopStatus::InTransit);
    }

    #[test]
    fn feed_rejects_foreign_source_and_wrong_status() {
        let mut sc = chain();
        let h = sc.initiate_hop("b1", Role::Driller, Role::Refinery, terms("Crude", 50), None).unwrap();
        let r = readings(&sc, Role::Driller, SensorKind::Pressure, 8, 2);
        assert!(matches!(sc.feed(h, &r), Err(WorkflowError::WrongStatus { .. })));
        accept(&mut sc, h);
        let foreign = readings(&sc, Role::Refinery, SensorKind::Pressure, 8, 2);
        assert!(matches!(sc.feed(h, &foreign), Err(WorkflowError::Unauthorized(_))));
    }

    #[test]
    fn silence_budget() {
        let t = Topology::generate(5, &ROLES, 4, 0).unwrap();
        let mut sc = SupplyChain::new(t, WorkflowConfig { max_silence: Some(2), ..Default::default() }).unwrap();
        sc.create_batch("b1", 10).unwrap();
        let h = sc.initiate_hop("b1", Role::Driller, Role::Refinery, terms("Crude", 50), None).unwrap();
        accept(&mut sc, h);
        let mut r = readings(&sc, Role::Driller, SensorKind::Pressure, 8, 2);
        r[1].tick = 5;
        assert_eq!(sc.feed(h, &r), Err(WorkflowError::SilenceExceeded { hop: h, gap: 5, budget: 2 }));
    }

    #[test]
    fn location_records_acl() {
        let mut sc = chain();
        let h = sc.initiate_hop("b1", Role::Driller, Role::Refinery, terms("Crude", 50), None).unwrap();
        accept(&mut sc, h);
        let gw = sc.topology().gateway(Role::Driller).unwrap().address();
        let fixes: Vec<_> = (0..3)
            .map(|t| SensorReading {
                kind: SensorKind::Location,
                value: SensorValue::location(25_000_000 + t, 55_000_000),
                tick: t as u64,
                source: gw,
            })
            .collect();
        assert_eq!(sc.track_location(h, &fixes).unwrap().len(), 3);
        let buyer = sc.hop(h).unwrap().buyer;
        assert_eq!(sc.location_records(h, &buyer).unwrap().len(), 3);
        let consumer = sc.topology().actor(Role::Consumer).unwrap().address();
        assert!(matches!(sc.location_records(h, &consumer), Err(WorkflowError::Ledger(LedgerError::AccessDenied(_)))));
    }

    #[test]
    fn deliver_fires_distribution_and_orders_status() {
        let mut sc = chain();
        let h = sc.initiate_hop("b1", Role::Driller, Role::Refinery, terms("Crude", 50), None).unwrap();
        assert!(matches!(sc.deliver(h), Err(WorkflowError::WrongStatus { .. })));
        accept(&mut sc, h);
        let w = readings(&sc, Role::Driller, SensorKind::Weight, 997, 1);
        sc.feed(h, &w).unwrap();
        sc.deliver(h).unwrap();
        assert_eq!(sc.hop(h).unwrap().weight_delta, Some(-3));
        let dist = sc.distribution_contract("b1").unwrap();
        let d = sc.runtime().state(&dist).unwrap().as_distribution().unwrap();
        assert_eq!(d.current_trace, Trace::AtDriller);
        assert!(matches!(sc.deliver(h), Err(WorkflowError::WrongStatus { .. })));
        sc.close(h).unwrap();
        assert_eq!(sc.hop(h).unwrap().status, HopStatus::Settled);
    }
}
