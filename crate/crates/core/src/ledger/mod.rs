//! Append-only, hash-chained block stores.
//!
//! Two chain classes exist. Private chains hold per-hop product data and raw
//! telemetry and are gated by an access list. The consortium chain holds the
//! tracking and distribution contracts; each of its blocks must carry
//! endorsements from at least `2f+1` of its `3f+1` validators.

mod consensus;
mod store;

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Canonical, Decode, DecodeError, Decoder, Encoder};
use crate::identity::{verify, Address, Hash32, PublicKey, Signature};
use crate::runtime::ContractAddress;
use crate::value::{hex_bytes, Value};

pub use consensus::{collect_endorsements, fault_tolerance, quorum_size, Committee};
pub use store::{load_chain, load_store, save_chain, save_store, StoreManifest, STORE_SCHEMA_VERSION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("quorum not met: {valid} valid endorsements, {required} required ({invalid} invalid)")]
    QuorumNotMet { valid: usize, required: usize, invalid: usize },
    #[error("access denied for {0}")]
    AccessDenied(Address),
    #[error("validator set of size {0} is not of the form 3f+1")]
    InvalidValidatorSet(usize),
    #[error("stale candidate: expected index {expected}, got {actual}")]
    StaleCandidate { expected: u64, actual: u64 },
    #[error("timestamp {timestamp} precedes tip timestamp {tip}")]
    TimestampRegression { timestamp: u64, tip: u64 },
    #[error("corrupt ledger `{chain}` at block {index}: {reason}")]
    CorruptLedger { chain: String, index: u64, reason: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainClass {
    Private,
    Consortium,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub emitter: ContractAddress,
    pub args: Vec<(String, Value)>,
}

impl Event {
    pub fn new(name: impl Into<String>, emitter: ContractAddress) -> Self {
        Self { name: name.into(), emitter, args: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.args.push((key.to_owned(), value.into()));
        self
    }

    pub fn arg(&self, key: &str) -> Option<&Value> {
        self.args.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

impl Canonical for Event {
    fn encode(&self, enc: &mut Encoder) {
        enc.str(&self.name).value(&self.emitter);
        enc.u64(self.args.len() as u64);
        for (k, v) in &self.args {
            enc.str(k).value(v);
        }
    }
}

impl Decode for Event {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let name = dec.str()?;
        let emitter = ContractAddress::decode(dec)?;
        let n = dec.u64()?;
        let mut args = Vec::new();
        for _ in 0..n {
            args.push((dec.str()?, Value::decode(dec)?));
        }
        Ok(Self { name, emitter, args })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub caller: Address,
    pub contract: ContractAddress,
    pub function: String,
    /// Canonical encoding of the call arguments.
    #[serde(with = "hex_bytes")]
    pub args: Vec<u8>,
    pub gas_used: u64,
    pub events: Vec<Event>,
}

impl Canonical for Transaction {
    fn encode(&self, enc: &mut Encoder) {
        enc.value(&self.caller)
            .value(&self.contract)
            .str(&self.function)
            .bytes(&self.args)
            .u64(self.gas_used)
            .seq(&self.events);
    }
}

impl Decode for Transaction {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            caller: Address::decode(dec)?,
            contract: ContractAddress::decode(dec)?,
            function: dec.str()?,
            args: dec.bytes()?,
            gas_used: dec.u64()?,
            events: dec.seq()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endorsement {
    pub validator: Address,
    pub signature: Signature,
}

impl Canonical for Endorsement {
    fn encode(&self, enc: &mut Encoder) {
        enc.value(&self.validator).value(&self.signature);
    }
}

impl Decode for Endorsement {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self { validator: Address::decode(dec)?, signature: Signature::decode(dec)? })
    }
}

/// A block before endorsement: everything validators sign over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockBody {
    pub index: u64,
    pub prev_hash: Hash32,
    pub timestamp: u64,
    pub transactions: Vec<Transaction>,
}

impl BlockBody {
    /// Message endorsed by validators. Bound to the chain id so an endorsement
    /// cannot be replayed onto another chain.
    pub fn endorsement_message(&self, chain_id: &str) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.str("oilchain/endorse")
            .str(chain_id)
            .u64(self.index)
            .value(&self.prev_hash)
            .u64(self.timestamp)
            .seq(&self.transactions);
        Hash32::digest(&enc.finish()).as_bytes().to_vec()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub prev_hash: Hash32,
    pub timestamp: u64,
    pub transactions: Vec<Transaction>,
    pub endorsements: Vec<Endorsement>,
    pub hash: Hash32,
}

impl Block {
    pub fn compute_hash(&self) -> Hash32 {
        let mut enc = Encoder::new();
        enc.u64(self.index).value(&self.prev_hash).u64(self.timestamp).seq(&self.transactions).seq(&self.endorsements);
        Hash32::digest(&enc.finish())
    }

    pub fn body(&self) -> BlockBody {
        BlockBody {
            index: self.index,
            prev_hash: self.prev_hash,
            timestamp: self.timestamp,
            transactions: self.transactions.clone(),
        }
    }

    fn seal(body: BlockBody, endorsements: Vec<Endorsement>) -> Self {
        let mut block = Block {
            index: body.index,
            prev_hash: body.prev_hash,
            timestamp: body.timestamp,
            transactions: body.transactions,
            endorsements,
            hash: Hash32::ZERO,
        };
        block.hash = block.compute_hash();
        block
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub address: Address,
    pub label: String,
}

impl Canonical for Participant {
    fn encode(&self, enc: &mut Encoder) {
        enc.value(&self.address).str(&self.label);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validator {
    pub address: Address,
    pub public_key: PublicKey,
}

impl Canonical for Validator {
    fn encode(&self, enc: &mut Encoder) {
        enc.value(&self.address).value(&self.public_key);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub first_bad_index: Option<u64>,
    pub reason: Option<String>,
}

impl VerificationReport {
    fn ok() -> Self {
        Self { valid: true, first_bad_index: None, reason: None }
    }

    fn bad(index: u64, reason: impl Into<String>) -> Self {
        Self { valid: false, first_bad_index: Some(index), reason: Some(reason.into()) }
    }
}

/// An event located in the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoggedEvent {
    pub block_index: u64,
    pub timestamp: u64,
    pub tx_index: usize,
    pub caller: Address,
    pub function: String,
    pub event: Event,
}

#[derive(Clone, Debug, Default)]
pub struct EventFilter {
    pub contract: Option<ContractAddress>,
    pub name: Option<String>,
    pub blocks: Option<RangeInclusive<u64>>,
}

impl EventFilter {
    pub fn contract(mut self, c: ContractAddress) -> Self {
        self.contract = Some(c);
        self
    }

    pub fn name(mut self, n: impl Into<String>) -> Self {
        self.name = Some(n.into());
        self
    }

    pub fn blocks(mut self, r: RangeInclusive<u64>) -> Self {
        self.blocks = Some(r);
        self
    }

    fn matches(&self, block: u64, e: &Event) -> bool {
        self.contract.is_none_or(|c| e.emitter == c)
            && self.name.as_deref().is_none_or(|n| e.name == n)
            && self.blocks.as_ref().is_none_or(|r| r.contains(&block))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub id: String,
    pub class: ChainClass,
    /// Participants allowed to submit and read. For the consortium chain this is
    /// every registered supply-chain member.
    pub acl: Vec<Participant>,
    /// Endorsing validators (consortium only; empty for private chains).
    pub validators: Vec<Validator>,
    pub blocks: Vec<Block>,
}

pub const GENESIS_FUNCTION: &str = "genesis";

impl Chain {
    pub fn new_private(id: impl Into<String>, acl: Vec<Participant>) -> Self {
        Self::with_genesis(id.into(), ChainClass::Private, acl, Vec::new())
    }

    pub fn new_consortium(
        id: impl Into<String>,
        members: Vec<Participant>,
        validators: Vec<Validator>,
    ) -> Result<Self, LedgerError> {
        fault_tolerance(validators.len())?;
        Ok(Self::with_genesis(id.into(), ChainClass::Consortium, members, validators))
    }

    fn with_genesis(id: String, class: ChainClass, acl: Vec<Participant>, validators: Vec<Validator>) -> Self {
        let mut chain = Self { id, class, acl, validators, blocks: Vec::new() };
        let genesis = BlockBody {
            index: 0,
            prev_hash: Hash32::ZERO,
            timestamp: 0,
            transactions: vec![chain.genesis_transaction()],
        };
        chain.blocks.push(Block::seal(genesis, Vec::new()));
        chain
    }

    /// The genesis block commits to the chain configuration so the access list
    /// and validator set are covered by the hash chain.
    fn genesis_transaction(&self) -> Transaction {
        let mut enc = Encoder::new();
        enc.str(&self.id)
            .u8(match self.class {
                ChainClass::Private => 0,
                ChainClass::Consortium => 1,
            })
            .seq(&self.acl)
            .seq(&self.validators);
        Transaction {
            caller: Address::ZERO,
            contract: ContractAddress::ZERO,
            function: GENESIS_FUNCTION.to_owned(),
            args: enc.finish(),
            gas_used: 0,
            events: Vec::new(),
        }
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds a genesis block")
    }

    pub fn tip_hash(&self) -> Hash32 {
        self.tip().hash
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_member(&self, who: &Address) -> bool {
        self.acl.iter().any(|p| &p.address == who)
    }

    pub fn member_labelled(&self, label: &str) -> Option<Address> {
        self.acl.iter().find(|p| p.label == label).map(|p| p.address)
    }

    /// Candidate body for the next block.
    pub fn propose(&self, transactions: Vec<Transaction>, timestamp: u64) -> BlockBody {
        let tip = self.tip();
        BlockBody { index: tip.index + 1, prev_hash: tip.hash, timestamp, transactions }
    }

    fn check_access(&self, who: &Address) -> Result<(), LedgerError> {
        if self.is_member(who) {
            Ok(())
        } else {
            Err(LedgerError::AccessDenied(*who))
        }
    }

    /// Number of distinct valid validator endorsements, or an error if any
    /// endorsement is invalid or the quorum is short.
    pub fn check_quorum(&self, message: &[u8], endorsements: &[Endorsement]) -> Result<usize, LedgerError> {
        let required = quorum_size(self.validators.len())?;
        let mut seen: Vec<Address> = Vec::with_capacity(endorsements.len());
        let mut invalid = 0;
        for e in endorsements {
            let Some(v) = self.validators.iter().find(|v| v.address == e.validator) else {
                invalid += 1;
                continue;
            };
            if seen.contains(&e.validator) || !verify(message, &e.signature, &v.public_key) {
                invalid += 1;
                continue;
            }
            seen.push(e.validator);
        }
        let valid = seen.len();
        if invalid > 0 || valid < required {
            return Err(LedgerError::QuorumNotMet { valid, required, invalid });
        }
        Ok(valid)
    }

    /// Appends a block built from `body`. `caller` must be on the access list;
    /// consortium blocks additionally need a `2f+1` endorsement quorum.
    pub fn append_block(
        &mut self,
        caller: &Address,
        body: BlockBody,
        endorsements: Vec<Endorsement>,
    ) -> Result<&Block, LedgerError> {
        self.check_access(caller)?;
        let tip = self.tip();
        if body.index != tip.index + 1 || body.prev_hash != tip.hash {
            return Err(LedgerError::StaleCandidate { expected: tip.index + 1, actual: body.index });
        }
        if body.timestamp < tip.timestamp {
            return Err(LedgerError::TimestampRegression { timestamp: body.timestamp, tip: tip.timestamp });
        }
        let endorsements = match self.class {
            ChainClass::Consortium => {
                self.check_quorum(&body.endorsement_message(&self.id), &endorsements)?;
                endorsements
            }
            ChainClass::Private => Vec::new(),
        };
        self.blocks.push(Block::seal(body, endorsements));
        Ok(self.tip())
    }

    pub fn verify(&self) -> VerificationReport {
        verify_chain(self)
    }

    pub fn query_events(&self, querier: &Address, filter: &EventFilter) -> Result<Vec<LoggedEvent>, LedgerError> {
        self.check_access(querier)?;
        Ok(self.scan_events(filter))
    }

    /// Event scan without an access check, for holders of the chain files.
    pub(crate) fn scan_events(&self, filter: &EventFilter) -> Vec<LoggedEvent> {
        let mut out = Vec::new();
        for block in &self.blocks {
            for (tx_index, tx) in block.transactions.iter().enumerate() {
                for event in &tx.events {
                    if filter.matches(block.index, event) {
                        out.push(LoggedEvent {
                            block_index: block.index,
                            timestamp: block.timestamp,
                            tx_index,
                            caller: tx.caller,
                            function: tx.function.clone(),
                            event: event.clone(),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Recomputes every hash, link and (for consortium chains) endorsement quorum.
pub fn verify_chain(chain: &Chain) -> VerificationReport {
    for (i, block) in chain.blocks.iter().enumerate() {
        let i = i as u64;
        if block.index != i {
            return VerificationReport::bad(i, format!("index field {} at position {i}", block.index));
        }
        if i == 0 {
            if block.prev_hash != Hash32::ZERO {
                return VerificationReport::bad(0, "genesis prev_hash is not zero");
            }
            if block.transactions != [chain.genesis_transaction()] || !block.endorsements.is_empty() {
                return VerificationReport::bad(0, "genesis does not match chain configuration");
            }
        } else {
            let prev = &chain.blocks[i as usize - 1];
            if block.prev_hash != prev.hash {
                return VerificationReport::bad(i, "prev_hash does not link to previous block");
            }
            if block.timestamp < prev.timestamp {
                return VerificationReport::bad(i, "timestamp regression");
            }
        }
        if block.compute_hash() != block.hash {
            return VerificationReport::bad(i, "hash mismatch");
        }
        if i > 0 {
            match chain.class {
                ChainClass::Consortium => {
                    let message = block.body().endorsement_message(&chain.id);
                    if let Err(e) = chain.check_quorum(&message, &block.endorsements) {
                        return VerificationReport::bad(i, e.to_string());
                    }
                }
                ChainClass::Private => {
                    if !block.endorsements.is_empty() {
                        return VerificationReport::bad(i, "private block carries endorsements");
                    }
                }
            }
        }
    }
    if chain.blocks.is_empty() {
        return VerificationReport::bad(0, "missing genesis block");
    }
    VerificationReport::ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{generate_actor, Role};

    fn participants(n: u64) -> Vec<(Participant, crate::identity::Actor)> {
        (0..n)
            .map(|i| {
                let a = generate_actor(Role::ALL[i as usize % 6], 100 + i);
                (Participant { address: a.address(), label: format!("p{i}") }, a)
            })
            .collect()
    }

    fn tx(caller: Address, name: &str) -> Transaction {
        let emitter = ContractAddress::from_bytes([7; 20]);
        Transaction {
            caller,
            contract: emitter,
            function: "F".into(),
            args: vec![1, 2, 3],
            gas_used: 10,
            events: vec![Event::new(name, emitter).with("msg", "m")],
        }
    }

    fn consortium(n: usize) -> (Chain, Committee, Address) {
        let committee = Committee::generate(n, 5);
        let members = participants(2);
        let member = members[0].1.address();
        let chain =
            Chain::new_consortium("consortium", members.into_iter().map(|(p, _)| p).collect(), committee.validators())
                .unwrap();
        (chain, committee, member)
    }

    #[test]
    fn genesis_only_chain_is_valid() {
        let chain = Chain::new_private("p", participants(2).into_iter().map(|(p, _)| p).collect());
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.tip().index, 0);
        assert_eq!(chain.tip().prev_hash, Hash32::ZERO);
        assert!(chain.verify().valid);
    }

    #[test]
    fn consortium_three_of_four_appends() {
        let (mut chain, committee, member) = consortium(4);
        let body = chain.propose(vec![tx(member, "E")], 1);
        let mut ends = committee.endorse(&body, &chain.id);
        ends.truncate(3);
        let block = chain.append_block(&member, body, ends).unwrap();
        assert_eq!(block.index, 1);
        assert!(chain.verify().valid);
    }

    #[test]
    fn consortium_two_of_four_rejected() {
        let (mut chain, committee, member) = consortium(4);
        let body = chain.propose(vec![tx(member, "E")], 1);
        let mut ends = committee.endorse(&body, &chain.id);
        ends.truncate(2);
        let err = chain.append_block(&member, body, ends).unwrap_err();
        assert_eq!(err, LedgerError::QuorumNotMet { valid: 2, required: 3, invalid: 0 });
        assert_eq!(chain.len(), 1);
    }

    #[test]
    fn invalid_endorsement_signature_rejected_even_with_quorum() {
        let (mut chain, committee, member) = consortium(4);
        let body = chain.propose(vec![tx(member, "E")], 1);
        let mut ends = committee.endorse(&body, &chain.id);
        let mut bad = ends[0].signature.as_bytes().to_vec();
        bad[5] ^= 1;
        ends[0].signature = Signature::from_vec(bad);
        assert!(matches!(chain.append_block(&member, body, ends), Err(LedgerError::QuorumNotMet { invalid: 1, .. })));
    }

    #[test]
    fn duplicate_endorsements_do_not_count_twice() {
        let (mut chain, committee, member) = consortium(4);
        let body = chain.propose(vec![], 1);
        let ends = committee.endorse(&body, &chain.id);
        let dup = vec![ends[0].clone(), ends[0].clone(), ends[1].clone()];
        assert!(chain.append_block(&member, body, dup).is_err());
    }

    #[test]
    fn endorsements_bound_to_chain_id() {
        let (mut chain, committee, member) = consortium(4);
        let body = chain.propose(vec![], 1);
        let ends = committee.endorse(&body, "some-other-chain");
        assert!(chain.append_block(&member, body, ends).is_err());
    }

    #[test]
    fn private_chain_rejects_outsider() {
        let people = participants(3);
        let outsider = people[2].1.address();
        let mut chain = Chain::new_private("p", people[..2].iter().map(|(p, _)| p.clone()).collect());
        let body = chain.propose(vec![tx(outsider, "E")], 1);
        assert_eq!(chain.append_block(&outsider, body, vec![]), Err(LedgerError::AccessDenied(outsider)));
    }

    #[test]
    fn stale_candidate_rejected() {
        let people = participants(1);
        let me = people[0].1.address();
        let mut chain = Chain::new_private("p", vec![people[0].0.clone()]);
        let body = chain.propose(vec![], 1);
        chain.append_block(&me, body.clone(), vec![]).unwrap();
        assert!(matches!(chain.append_block(&me, body, vec![]), Err(LedgerError::StaleCandidate { .. })));
    }

    #[test]
    fn timestamps_must_not_regress() {
        let people = participants(1);
        let me = people[0].1.address();
        let mut chain = Chain::new_private("p", vec![people[0].0.clone()]);
        chain.append_block(&me, chain.propose(vec![], 5), vec![]).unwrap();
        let err = chain.append_block(&me, chain.propose(vec![], 4), vec![]).unwrap_err();
        assert_eq!(err, LedgerError::TimestampRegression { timestamp: 4, tip: 5 });
    }

    #[test]
    fn flipped_transaction_byte_detected_at_that_block() {
        let people = participants(1);
        let me = people[0].1.address();
        let mut chain = Chain::new_private("p", vec![people[0].0.clone()]);
        for t in 1..5 {
            chain.append_block(&me, chain.propose(vec![tx(me, "E")], t), vec![]).unwrap();
        }
        let before = chain.verify();
        assert_eq!(before, chain.verify());
        chain.blocks[2].transactions[0].args[1] ^= 0x40;
        let report = chain.verify();
        assert!(!report.valid);
        assert_eq!(report.first_bad_index, Some(2));
    }

    #[test]
    fn tampered_acl_detected_at_genesis() {
        let mut chain = Chain::new_private("p", participants(2).into_iter().map(|(p, _)| p).collect());
        chain.acl.pop();
        assert_eq!(chain.verify().first_bad_index, Some(0));
    }

    #[test]
    fn query_filters_in_block_order() {
        let (mut chain, committee, member) = consortium(4);
        for (t, name) in
            ["PressureViolation", "oilAdded", "PressureViolation", "oilAdded", "PressureViolation"].iter().enumerate()
        {
            let body = chain.propose(vec![tx(member, name)], t as u64 + 1);
            let ends = committee.endorse(&body, &chain.id);
            chain.append_block(&member, body, ends).unwrap();
        }
        let hits = chain.query_events(&member, &EventFilter::default().name("PressureViolation")).unwrap();
        assert_eq!(hits.iter().map(|h| h.block_index).collect::<Vec<_>>(), vec![1, 3, 5]);
        let ranged =
            chain.query_events(&member, &EventFilter::default().name("PressureViolation").blocks(2..=5)).unwrap();
        assert_eq!(ranged.len(), 2);
    }

    #[test]
    fn query_by_outsider_denied_and_empty_chain_empty() {
        let (chain, _, member) = consortium(1);
        let outsider = generate_actor(Role::Consumer, 999).address();
        assert!(chain.query_events(&member, &EventFilter::default()).unwrap().is_empty());
        assert_eq!(chain.query_events(&outsider, &EventFilter::default()), Err(LedgerError::AccessDenied(outsider)));
    }
}
