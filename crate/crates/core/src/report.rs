//! Scenario report: tips, per-hop summaries, provenance, violations, gas.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::contracts::Quantity;
use crate::identity::{Hash32, Role};
use crate::ledger::{ChainClass, GENESIS_FUNCTION};
use crate::provenance::ProvenanceReport;
use crate::runtime::{ContractAddress, FiatBySpeed, Speed};
use crate::workflow::{HopStatus, Settlement, SupplyChain, WorkflowError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainTip {
    pub id: String,
    pub class: ChainClass,
    pub height: u64,
    pub tip_hash: Hash32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttemptReport {
    pub method: String,
    pub signer: Option<Role>,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HopReport {
    pub hop: usize,
    pub seller: Role,
    pub buyer: Role,
    pub chain: String,
    pub product_contract: ContractAddress,
    pub tracking_contract: ContractAddress,
    pub predecessor: Option<ContractAddress>,
    pub status: HopStatus,
    pub readings_fed: u64,
    pub weight_delta: Option<i64>,
    pub accept_attempts: Vec<AttemptReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchReport {
    pub batch: String,
    pub distribution_contract: ContractAddress,
    pub hops: Vec<HopReport>,
    pub provenance: ProvenanceReport,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ViolationTotals {
    pub temperature: usize,
    pub humidity: usize,
    pub pressure: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GasLine {
    pub function: String,
    pub calls: u64,
    pub execution_gas: u64,
    pub transaction_gas: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GasSummary {
    pub functions: Vec<GasLine>,
    pub total_execution_gas: u64,
    pub total_transaction_gas: u64,
    pub usd: FiatBySpeed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub eth_usd: f64,
    pub chains: Vec<ChainTip>,
    pub batches: Vec<BatchReport>,
    pub violation_totals: ViolationTotals,
    pub gas: GasSummary,
    pub settlements: Vec<Settlement>,
}

impl ScenarioReport {
    pub fn is_clean(&self) -> bool {
        self.violation_totals.total == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario {} (seed {}, schema {})", self.scenario, self.seed, self.schema_version);
        let _ = writeln!(s, "chains:");
        for c in &self.chains {
            let class = match c.class {
                ChainClass::Private => "private",
                ChainClass::Consortium => "consortium",
            };
            let _ = writeln!(s, "  {:<16} {:<10} height {:>4}  tip {}", c.id, class, c.height, c.tip_hash);
        }
        for b in &self.batches {
            let _ = writeln!(s, "batch {} (distribution {})", b.batch, b.distribution_contract);
            for h in &b.hops {
                let attempts: Vec<String> = h
                    .accept_attempts
                    .iter()
                    .map(|a| {
                        format!(
                            "{}{}:{}",
                            a.method,
                            a.signer.map(|r| format!("/{r}")).unwrap_or_default(),
                            if a.accepted { "ok" } else { "rejected" }
                        )
                    })
                    .collect();
                let _ = writeln!(
                    s,
                    "  hop {} {} -> {}  {}  readings {}  weight delta {}  accept [{}]",
                    h.hop,
                    h.seller,
                    h.buyer,
                    h.status,
                    h.readings_fed,
                    h.weight_delta.map_or_else(|| "-".into(), |d| d.to_string()),
                    attempts.join(", ")
                );
            }
            for line in b.provenance.render_text().lines() {
                let _ = writeln!(s, "  {line}");
            }
        }
        let v = &self.violation_totals;
        let _ = writeln!(
            s,
            "violations: temperature {}  humidity {}  pressure {}  total {}",
            v.temperature, v.humidity, v.pressure, v.total
        );
        let _ = writeln!(s, "settlements:");
        for st in &self.settlements {
            let _ = writeln!(
                s,
                "  hop {} {} -> {} amount {} ({} block {})",
                st.hop, st.from, st.to, st.amount, st.chain, st.block_index
            );
        }
        let _ = writeln!(s, "gas (eth_usd {}):", self.eth_usd);
        for g in &self.gas.functions {
            let _ = writeln!(
                s,
                "  {:<18} calls {:>5}  execution {:>10}  transaction {:>10}",
                g.function, g.calls, g.execution_gas, g.transaction_gas
            );
        }
        let _ = writeln!(
            s,
            "  total execution {}  transaction {}",
            self.gas.total_execution_gas, self.gas.total_transaction_gas
        );
        let usd: Vec<String> =
            Speed::ALL.iter().map(|sp| format!("{sp:?} {:.5}", self.gas.usd.get(*sp)).to_lowercase()).collect();
        let _ = writeln!(s, "  usd: {}", usd.join("  "));
        s
    }
}

fn gas_summary(sc: &SupplyChain, eth_usd: f64) -> Result<GasSummary, WorkflowError> {
    let schedule = sc.runtime().schedule();
    let mut by_fn: BTreeMap<String, GasLine> = BTreeMap::new();
    for chain in sc.runtime().chains() {
        for tx in chain.blocks.iter().flat_map(|b| &b.transactions) {
            if tx.function == GENESIS_FUNCTION {
                continue;
            }
            let cost = schedule.gas_cost(&tx.function)?;
            let line = by_fn.entry(tx.function.clone()).or_insert_with(|| GasLine {
                function: tx.function.clone(),
                calls: 0,
                execution_gas: 0,
                transaction_gas: 0,
            });
            line.calls += 1;
            line.execution_gas += cost.execution;
            line.transaction_gas += tx.gas_used;
        }
    }
    let functions: Vec<GasLine> = by_fn.into_values().collect();
    let total_execution_gas = functions.iter().map(|g| g.execution_gas).sum();
    let total_transaction_gas = functions.iter().map(|g| g.transaction_gas).sum();
    Ok(GasSummary {
        functions,
        total_execution_gas,
        total_transaction_gas,
        usd: FiatBySpeed::for_gas(total_execution_gas, eth_usd),
    })
}

pub(crate) fn build_report(
    scenario: &str,
    seed: u64,
    eth_usd: f64,
    sc: &SupplyChain,
    attempts: &[Vec<AttemptReport>],
) -> Result<ScenarioReport, WorkflowError> {
    let chains = sc
        .runtime()
        .chains()
        .map(|c| ChainTip { id: c.id.clone(), class: c.class, height: c.len() as u64, tip_hash: c.tip_hash() })
        .collect();
    let mut totals = ViolationTotals::default();
    let mut batches = Vec::new();
    for batch in sc.batch_ids() {
        let hops = sc
            .batch_hops(batch)?
            .into_iter()
            .map(|h| HopReport {
                hop: h.id,
                seller: h.seller_role,
                buyer: h.buyer_role,
                chain: h.chain_id.clone(),
                product_contract: h.product_contract,
                tracking_contract: h.tracking_contract,
                predecessor: h.predecessor,
                status: h.status,
                readings_fed: h.readings_fed,
                weight_delta: h.weight_delta,
                accept_attempts: attempts.get(h.id - 1).cloned().unwrap_or_default(),
            })
            .collect();
        let provenance = sc.trace(batch)?;
        for v in provenance.hops.iter().flat_map(|h| &h.violations) {
            match v.kind {
                Quantity::Temperature => totals.temperature += 1,
                Quantity::Humidity => totals.humidity += 1,
                Quantity::Pressure => totals.pressure += 1,
            }
            totals.total += 1;
        }
        batches.push(BatchReport {
            batch: batch.to_owned(),
            distribution_contract: sc.distribution_contract(batch)?,
            hops,
            provenance,
        });
    }
    Ok(ScenarioReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: scenario.to_owned(),
        seed,
        eth_usd,
        chains,
        batches,
        violation_totals: totals,
        gas: gas_summary(sc, eth_usd)?,
        settlements: sc.settlements().to_vec(),
    })
}
