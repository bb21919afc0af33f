//! Gas schedule and fiat conversion.
//!
//! The schedule is a calibration table of measured per-function costs, not an
//! opcode-level meter. Fiat cost is computed from the execution gas column.

use serde::{Deserialize, Serialize};

use super::RuntimeError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasCost {
    pub execution: u64,
    pub transaction: u64,
}

/// Cost assigned to plumbing functions that have no measured entry.
pub const PLUMBING_GAS: GasCost = GasCost { execution: 21_000, transaction: 42_000 };

pub const DEFAULT_GAS_LIMIT: u64 = 1_000_000;

/// USD per ETH implied by the measured cost table.
pub const DEFAULT_ETH_USD: f64 = 2291.0;

/// Measured (function, execution gas, transaction gas).
const MEASURED: [(&str, u64, u64); 9] = [
    ("EnterOil", 11_408, 35_368),
    ("CheckPressure", 29_915, 51_379),
    ("CheckTemperature", 13_683, 35_147),
    ("CheckHumidity", 14_825, 36_289),
    ("OccuredViolation", 11_715, 33_371),
    ("readyToFactory", 108_601, 131_857),
    ("ReadyToStorage", 85_051, 106_707),
    ("oilInOilStorage", 84_865, 106_721),
    ("pumpSoldOil", 68_923, 90_579),
];

const PLUMBING: [&str; 5] = ["deploy", "acceptShipment", "recordTelemetry", "confirmDelivery", "closeHop"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasEntry {
    pub function: String,
    pub cost: GasCost,
    /// False for plumbing defaults.
    pub measured: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GasSchedule {
    entries: Vec<GasEntry>,
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self::standard()
    }
}

impl GasSchedule {
    pub fn standard() -> Self {
        let measured = MEASURED.iter().map(|&(f, execution, transaction)| GasEntry {
            function: f.to_owned(),
            cost: GasCost { execution, transaction },
            measured: true,
        });
        let plumbing =
            PLUMBING.iter().map(|f| GasEntry { function: (*f).to_owned(), cost: PLUMBING_GAS, measured: false });
        Self { entries: measured.chain(plumbing).collect() }
    }

    pub fn entries(&self) -> &[GasEntry] {
        &self.entries
    }

    pub fn gas_cost(&self, function: &str) -> Result<GasCost, RuntimeError> {
        self.entries
            .iter()
            .find(|e| e.function == function)
            .map(|e| e.cost)
            .ok_or_else(|| RuntimeError::UnknownFunction(function.to_owned()))
    }
}

/// Gas price tiers in Gwei per gas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speed {
    Slow,
    Average,
    Fast,
    Fastest,
}

impl Speed {
    pub const ALL: [Speed; 4] = [Speed::Slow, Speed::Average, Speed::Fast, Speed::Fastest];

    pub fn gwei(self) -> f64 {
        match self {
            Speed::Slow => 82.0,
            Speed::Average => 83.0,
            Speed::Fast => 125.0,
            Speed::Fastest => 147.0,
        }
    }
}

fn round5(x: f64) -> f64 {
    (x * 1e5).round() / 1e5
}

/// `gas × price(Gwei) × 1e-9 × eth_usd`, rounded to 5 decimals.
pub fn fiat_cost(execution_gas: u64, gas_price_gwei: f64, eth_usd: f64) -> f64 {
    round5(execution_gas as f64 * gas_price_gwei * 1e-9 * eth_usd)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiatBySpeed {
    pub slow: f64,
    pub average: f64,
    pub fast: f64,
    pub fastest: f64,
}

impl FiatBySpeed {
    pub fn for_gas(execution_gas: u64, eth_usd: f64) -> Self {
        let at = |s: Speed| fiat_cost(execution_gas, s.gwei(), eth_usd);
        Self { slow: at(Speed::Slow), average: at(Speed::Average), fast: at(Speed::Fast), fastest: at(Speed::Fastest) }
    }

    pub fn get(&self, speed: Speed) -> f64 {
        match speed {
            Speed::Slow => self.slow,
            Speed::Average => self.average,
            Speed::Fast => self.fast,
            Speed::Fastest => self.fastest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasReportRow {
    pub function: String,
    pub execution_gas: u64,
    pub transaction_gas: u64,
    pub measured: bool,
    pub usd: FiatBySpeed,
}

pub fn gas_report(schedule: &GasSchedule, eth_usd: f64) -> Vec<GasReportRow> {
    schedule
        .entries()
        .iter()
        .map(|e| GasReportRow {
            function: e.function.clone(),
            execution_gas: e.cost.execution,
            transaction_gas: e.cost.transaction,
            measured: e.measured,
            usd: FiatBySpeed::for_gas(e.cost.execution, eth_usd),
        })
        .collect()
}
