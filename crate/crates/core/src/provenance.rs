//! Reverse traceability over the consortium ledger.
//!
//! The report is derived from ledger contents only: `ContractCreated` events
//! give each tracking contract's batch, owner, buyer and predecessor, and the
//! contracts' own events give readings and custody transitions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::contracts::checkprogress::OIL_ADDED;
use crate::contracts::distribution::DISTRIBUTION_EVENTS;
use crate::contracts::{ContractKind, Quantity, Stage};
use crate::identity::Address;
use crate::ledger::{Chain, EventFilter, LoggedEvent};
use crate::runtime::{ContractAddress, CONTRACT_CREATED};
use crate::value::Value;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProvenanceError {
    #[error("unknown batch `{0}`")]
    UnknownBatch(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ViolationEntry {
    pub kind: Quantity,
    pub stage: Stage,
    pub tick: u64,
    pub block_index: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DistributionEntry {
    pub event: String,
    pub message: String,
    pub actor: Address,
    pub tick: u64,
    pub block_index: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HopSummary {
    pub position: usize,
    pub tracking_contract: ContractAddress,
    pub predecessor: Option<ContractAddress>,
    pub seller: Address,
    pub seller_label: Option<String>,
    pub buyer: Address,
    pub buyer_label: Option<String>,
    pub oil_id: Option<String>,
    pub oil_name: Option<String>,
    pub amount: Option<i64>,
    pub price: Option<i64>,
    /// Temperature, humidity, pressure setpoints as entered.
    pub setpoints: Option<[i64; 3]>,
    /// Stage-0 check events: recorded, but not violations.
    pub accurate_readings: u64,
    pub violations: Vec<ViolationEntry>,
    pub distribution: Vec<DistributionEntry>,
}

impl HopSummary {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProvenanceReport {
    pub schema_version: u32,
    pub batch: String,
    pub distribution_contract: Option<ContractAddress>,
    pub hops: Vec<HopSummary>,
    pub violation_count: usize,
    pub clean: bool,
}

#[derive(Clone, Debug)]
struct Created {
    address: ContractAddress,
    block_index: u64,
    owner: Address,
    kind: ContractKind,
    buyer: Option<Address>,
    predecessor: Option<ContractAddress>,
}

fn created_for_batch(chain: &Chain, batch: &str) -> Vec<Created> {
    chain
        .scan_events(&EventFilter::default().name(CONTRACT_CREATED))
        .into_iter()
        .filter(|e| e.event.arg("batch").and_then(Value::as_text) == Some(batch))
        .filter_map(|e| {
            let ev = &e.event;
            Some(Created {
                address: ev.emitter,
                block_index: e.block_index,
                owner: ev.arg("owner")?.as_address()?,
                kind: ContractKind::parse(ev.arg("kind")?.as_text()?)?,
                buyer: ev.arg("buyer").and_then(Value::as_address),
                predecessor: ev.arg("predecessor").and_then(Value::as_contract),
            })
        })
        .collect()
}

/// Tracking contracts of `batch`, walked from the most recently created one
/// back through predecessor links, returned oldest first.
pub fn custody_path(chain: &Chain, batch: &str) -> Result<Vec<ContractAddress>, ProvenanceError> {
    let created = created_for_batch(chain, batch);
    let tracking: BTreeMap<ContractAddress, &Created> =
        created.iter().filter(|c| c.kind == ContractKind::CheckProgress).map(|c| (c.address, c)).collect();
    let last = tracking
        .values()
        .max_by_key(|c| c.block_index)
        .ok_or_else(|| ProvenanceError::UnknownBatch(batch.to_owned()))?;
    let mut path = Vec::new();
    let mut seen = BTreeSet::new();
    let mut cursor = Some(last.address);
    while let Some(addr) = cursor {
        let Some(c) = tracking.get(&addr) else { break };
        if !seen.insert(addr) {
            break;
        }
        path.push(addr);
        cursor = c.predecessor;
    }
    path.reverse();
    Ok(path)
}

fn text_arg(e: &LoggedEvent, key: &str) -> Option<String> {
    e.event.arg(key).and_then(Value::as_text).map(str::to_owned)
}

fn int_arg(e: &LoggedEvent, key: &str) -> Option<i64> {
    e.event.arg(key).and_then(Value::as_int)
}

/// Builds the provenance report for `batch`. Read-only.
pub fn trace(chain: &Chain, batch: &str) -> Result<ProvenanceReport, ProvenanceError> {
    let path = custody_path(chain, batch)?;
    let created = created_for_batch(chain, batch);
    let by_addr: BTreeMap<ContractAddress, &Created> = created.iter().map(|c| (c.address, c)).collect();
    let distribution = created.iter().find(|c| c.kind == ContractKind::OilDistribution).map(|c| c.address);
    let label = |a: &Address| chain.acl.iter().find(|p| p.address == *a).map(|p| p.label.clone());

    let mut hops: Vec<HopSummary> = path
        .iter()
        .enumerate()
        .map(|(i, addr)| {
            let c = by_addr[addr];
            let buyer = c.buyer.unwrap_or(Address::ZERO);
            let mut hop = HopSummary {
                position: i + 1,
                tracking_contract: *addr,
                predecessor: c.predecessor,
                seller: c.owner,
                seller_label: label(&c.owner),
                buyer,
                buyer_label: label(&buyer),
                oil_id: None,
                oil_name: None,
                amount: None,
                price: None,
                setpoints: None,
                accurate_readings: 0,
                violations: Vec::new(),
                distribution: Vec::new(),
            };
            for e in chain.scan_events(&EventFilter::default().contract(*addr)) {
                if e.event.name == OIL_ADDED {
                    hop.oil_id = text_arg(&e, "oil_id");
                    hop.oil_name = text_arg(&e, "name");
                    hop.amount = int_arg(&e, "amt");
                    hop.price = int_arg(&e, "price");
                    hop.setpoints = match (int_arg(&e, "temp"), int_arg(&e, "hum"), int_arg(&e, "press")) {
                        (Some(t), Some(h), Some(p)) => Some([t, h, p]),
                        _ => None,
                    };
                    continue;
                }
                let Some(kind) = Quantity::from_event_name(&e.event.name) else { continue };
                let message = text_arg(&e, "msg").unwrap_or_default();
                match kind.stage_from_message(&message) {
                    Some(Stage::Accurate) => hop.accurate_readings += 1,
                    Some(stage) => hop.violations.push(ViolationEntry {
                        kind,
                        stage,
                        tick: e.timestamp,
                        block_index: e.block_index,
                        message,
                    }),
                    None => {}
                }
            }
            hop
        })
        .collect();

    if let Some(dist) = distribution {
        for e in chain.scan_events(&EventFilter::default().contract(dist)) {
            if !DISTRIBUTION_EVENTS.contains(&e.event.name.as_str()) {
                continue;
            }
            let actor = e.event.arg("ad").and_then(Value::as_address).unwrap_or(Address::ZERO);
            let slot =
                hops.iter().position(|h| h.seller == actor).or_else(|| hops.iter().rposition(|h| h.buyer == actor));
            if let Some(i) = slot {
                hops[i].distribution.push(DistributionEntry {
                    event: e.event.name.clone(),
                    message: text_arg(&e, "msg").unwrap_or_default(),
                    actor,
                    tick: e.timestamp,
                    block_index: e.block_index,
                });
            }
        }
    }

    let violation_count = hops.iter().map(|h| h.violations.len()).sum();
    Ok(ProvenanceReport {
        schema_version: REPORT_SCHEMA_VERSION,
        batch: batch.to_owned(),
        distribution_contract: distribution,
        hops,
        violation_count,
        clean: violation_count == 0,
    })
}

/// Every batch id with at least one tracking contract, in creation order.
pub fn batches(chain: &Chain) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in chain.scan_events(&EventFilter::default().name(CONTRACT_CREATED)) {
        if e.event.arg("kind").and_then(Value::as_text) != Some(ContractKind::CheckProgress.as_str()) {
            continue;
        }
        if let Some(b) = text_arg(&e, "batch") {
            if !out.contains(&b) {
                out.push(b);
            }
        }
    }
    out
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_owned(), ToString::to_string)
}

impl ProvenanceReport {
    /// Plain-text rendering with a fixed line layout.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let flag = if self.clean { "CLEAN" } else { "VIOLATED" };
        let _ = writeln!(s, "batch {}: {flag}", self.batch);
        let _ = writeln!(s, "  hops: {}  violations: {}", self.hops.len(), self.violation_count);
        let _ = writeln!(s, "  distribution contract: {}", opt(&self.distribution_contract));
        for h in &self.hops {
            let _ = writeln!(
                s,
                "  hop {} {} -> {} [{}]",
                h.position,
                h.seller_label.as_deref().unwrap_or("?"),
                h.buyer_label.as_deref().unwrap_or("?"),
                if h.is_clean() { "clean" } else { "violated" }
            );
            let _ = writeln!(s, "    tracking: {}  predecessor: {}", h.tracking_contract, opt(&h.predecessor));
            let _ = writeln!(s, "    seller: {}  buyer: {}", h.seller, h.buyer);
            let _ = writeln!(
                s,
                "    oil: {} ({})  amount: {}  price: {}",
                opt(&h.oil_name),
                opt(&h.oil_id),
                opt(&h.amount),
                opt(&h.price)
            );
            if let Some([t, hu, p]) = h.setpoints {
                let _ = writeln!(s, "    setpoints: temperature {t}  humidity {hu}  pressure {p}");
            }
            let _ = writeln!(s, "    accurate readings: {}", h.accurate_readings);
            for v in &h.violations {
                let _ = writeln!(
                    s,
                    "    violation: tick {} block {} {} {} \"{}\"",
                    v.tick,
                    v.block_index,
                    v.kind.label().to_lowercase(),
                    v.stage.as_str(),
                    v.message
                );
            }
            for d in &h.distribution {
                let _ = writeln!(
                    s,
                    "    distribution: tick {} block {} {} \"{}\"",
                    d.tick, d.block_index, d.event, d.message
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::Role;
    use crate::telemetry::{generate_readings, inject_fault, Channel, FaultSpec, SensorKind, SensorProfile};
    use crate::workflow::{HopTerms, Setpoints, SupplyChain, Topology, WorkflowConfig};

    fn terms() -> HopTerms {
        HopTerms {
            oil_id: "7".into(),
            oil_name: "Crude".into(),
            price: 10,
            quantity: 100,
            setpoints: Setpoints { temperature: 22, humidity: 10, pressure: 8 },
            tolerance: 0,
            passphrase: None,
        }
    }

    fn run(fault_on: Option<usize>) -> SupplyChain {
        let t = Topology::generate(3, &Role::ALL, 4, 1).unwrap();
        let mut sc = SupplyChain::new(t, WorkflowConfig::default()).unwrap();
        sc.create_batch("b", 10).unwrap();
        let pairs = [
            (Role::Driller, Role::Refinery),
            (Role::Refinery, Role::Storage),
            (Role::Storage, Role::Pump),
            (Role::Pump, Role::Consumer),
        ];
        let mut pred = None;
        for (i, (s, b)) in pairs.into_iter().enumerate() {
            let h = sc.initiate_hop("b", s, b, terms(), pred).unwrap();
            let c = sc.sign_acceptance(h, b).unwrap();
            sc.accept_shipment(h, &c).unwrap();
            let p =
                SensorProfile { channels: vec![Channel::new(SensorKind::Pressure, 8, 0)], duration: 6, faults: vec![] };
            let mut r = generate_readings(&p, sc.topology().gateway(s).unwrap().address(), 1);
            if fault_on == Some(i + 1) {
                r = inject_fault(&r, &FaultSpec { kind: SensorKind::Pressure, start: 2, end: 3, offset: 3 }).unwrap();
            }
            sc.feed(h, &r).unwrap();
            sc.deliver(h).unwrap();
            sc.close(h).unwrap();
            pred = Some(sc.hop(h).unwrap().tracking_contract);
        }
        sc
    }

    #[test]
    fn clean_four_hop_trace() {
        let sc = run(None);
        let r = sc.trace("b").unwrap();
        assert!(r.clean);
        assert_eq!(r.hops.len(), 4);
        assert!(r.hops.iter().all(|h| h.accurate_readings == 6));
        let events: Vec<_> = r.hops.iter().map(|h| h.distribution.len()).collect();
        assert_eq!(events, [1, 1, 1, 1]);
        assert_eq!(r.hops[3].distribution[0].event, "PumpOilSold");
        assert_eq!(r.hops[0].seller_label.as_deref(), Some("driller"));
    }

    #[test]
    fn fault_lands_on_hop_two_only() {
        let sc = run(Some(2));
        let tip = sc.consortium().tip_hash();
        let r = sc.trace("b").unwrap();
        assert!(!r.clean);
        assert_eq!(r.hops[1].violations.len(), 2);
        assert!(r.hops[1].violations.iter().all(|v| v.stage == Stage::High && v.kind == Quantity::Pressure));
        assert!(r.hops.iter().enumerate().all(|(i, h)| i == 1 || h.is_clean()));
        assert_eq!(sc.consortium().tip_hash(), tip);
    }

    #[test]
    fn unknown_batch() {
        let sc = run(None);
        assert_eq!(trace(sc.consortium(), "no-such-batch"), Err(ProvenanceError::UnknownBatch("no-such-batch".into())));
    }

    #[test]
    fn links_visit_each_hop_once() {
        let sc = run(None);
        let path = custody_path(sc.consortium(), "b").unwrap();
        let expected: Vec<_> = sc.hops().iter().map(|h| h.tracking_contract).collect();
        assert_eq!(path, expected);
        assert_eq!(batches(sc.consortium()), ["b"]);
    }

    #[test]
    fn text_render_is_stable() {
        let a = run(Some(2)).trace("b").unwrap().render_text();
        let b = run(Some(2)).trace("b").unwrap().render_text();
        assert_eq!(a, b);
        assert!(a.starts_with("batch b: VIOLATED\n"));
        assert!(a.contains("violation: tick"));
    }
}
