//! Scenario files: TOML description of a topology, batches, hops, sensors,
//! faults and acceptance attempts, plus the runner that executes them.

use serde::Deserialize;
use thiserror::Error;

use crate::identity::Role;
use crate::ledger::{fault_tolerance, Chain};
use crate::report::{build_report, AttemptReport, ScenarioReport};
use crate::runtime::{DEFAULT_ETH_USD, DEFAULT_GAS_LIMIT};
use crate::telemetry::{derive_seed, Channel, FaultSpec, SensorKind, SensorProfile, TelemetryError};
use crate::workflow::{HopTerms, Setpoints, SupplyChain, Topology, WorkflowConfig, WorkflowError, ALLOWED_HOPS};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("happy_path", include_str!("../scenarios/happy_path.toml")),
    ("pressure_fault_hop2", include_str!("../scenarios/pressure_fault_hop2.toml")),
    ("other_factory_branch", include_str!("../scenarios/other_factory_branch.toml")),
    ("noisy_cold_chain", include_str!("../scenarios/noisy_cold_chain.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("telemetry: {0}")]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    pub topology: TopologySpec,
    #[serde(default)]
    pub options: Options,
    pub batches: Vec<BatchSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub roles: Vec<Role>,
    pub validators: usize,
    #[serde(default)]
    pub faulty_validators: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    pub gas_limit: u64,
    pub max_silence: Option<u64>,
    pub eth_usd: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self { gas_limit: DEFAULT_GAS_LIMIT, max_silence: None, eth_usd: DEFAULT_ETH_USD }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    pub id: String,
    pub oil_id: String,
    #[serde(default)]
    pub accurate_hum: i64,
    pub hops: Vec<HopSpec>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopSpec {
    pub seller: Role,
    pub buyer: Role,
    pub oil_name: String,
    pub price: u64,
    pub quantity: u64,
    pub setpoints: Setpoints,
    #[serde(default)]
    pub tolerance: u64,
    pub passphrase: Option<String>,
    pub duration: u64,
    /// Noise half-width for the default temperature/humidity/pressure sensors.
    #[serde(default)]
    pub noise: u64,
    /// Replaces the default sensors when present.
    pub sensors: Option<Vec<SensorSpec>>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    /// Defaults to one valid buyer signature.
    pub accept: Option<Vec<AcceptAttempt>>,
    #[serde(default = "yes")]
    pub deliver: bool,
    #[serde(default = "yes")]
    pub close: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub kind: SensorKind,
    /// Defaults to the hop setpoint for temperature/humidity/pressure.
    pub setpoint: Option<i64>,
    #[serde(default)]
    pub noise: u64,
    #[serde(default)]
    pub setpoint_lon: i64,
    #[serde(default)]
    pub step: (i64, i64),
}

#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum AcceptAttempt {
    /// Signature by `signer`, the buyer when omitted.
    Signature {
        signer: Option<Role>,
    },
    Passphrase {
        passphrase: String,
    },
}

impl HopSpec {
    pub fn profile(&self) -> SensorProfile {
        let channels = match &self.sensors {
            Some(specs) => specs
                .iter()
                .map(|s| Channel {
                    kind: s.kind,
                    setpoint: s.setpoint.or(self.setpoints.get(s.kind)).unwrap_or(0),
                    noise: s.noise,
                    setpoint_lon: s.setpoint_lon,
                    step: s.step,
                })
                .collect(),
            None => [SensorKind::Temperature, SensorKind::Humidity, SensorKind::Pressure]
                .into_iter()
                .map(|k| Channel::new(k, self.setpoints.get(k).expect("checked kind"), self.noise))
                .collect(),
        };
        SensorProfile { channels, duration: self.duration, faults: self.faults.clone() }
    }

    fn terms(&self, oil_id: &str) -> HopTerms {
        HopTerms {
            oil_id: oil_id.to_owned(),
            oil_name: self.oil_name.clone(),
            price: self.price,
            quantity: self.quantity,
            setpoints: self.setpoints,
            tolerance: self.tolerance,
            passphrase: self.passphrase.clone(),
        }
    }

    fn attempts(&self) -> Vec<AcceptAttempt> {
        self.accept.clone().unwrap_or_else(|| vec![AcceptAttempt::Signature { signer: None }])
    }
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string().trim_end().to_owned()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} unsupported (expected {SCENARIO_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let t = &self.topology;
        if fault_tolerance(t.validators).is_err() {
            return bad(format!("topology.validators = {} is not of the form 3f+1", t.validators));
        }
        if t.faulty_validators > t.validators {
            return bad(format!("topology.faulty_validators = {} exceeds validator count", t.faulty_validators));
        }
        for r in crate::workflow::REQUIRED_ROLES {
            if !t.roles.contains(&r) {
                return bad(format!("topology.roles is missing {r}"));
            }
        }
        if self.options.eth_usd.is_nan() || self.options.eth_usd < 0.0 {
            return bad("options.eth_usd must be non-negative".into());
        }
        let mut ids: Vec<&str> = Vec::new();
        for (bi, b) in self.batches.iter().enumerate() {
            if ids.contains(&b.id.as_str()) {
                return bad(format!("batches[{bi}].id `{}` is duplicated", b.id));
            }
            ids.push(&b.id);
            for (hi, h) in b.hops.iter().enumerate() {
                let at = format!("batches[{bi}].hops[{hi}]");
                if !ALLOWED_HOPS.contains(&(h.seller, h.buyer)) {
                    return bad(format!("{at}: {} cannot sell to {}", h.seller, h.buyer));
                }
                for r in [h.seller, h.buyer] {
                    if !t.roles.contains(&r) {
                        return bad(format!("{at}: role {r} is not in topology.roles"));
                    }
                }
                if h.seller != Role::Driller && !b.hops[..hi].iter().any(|p| p.buyer == h.seller) {
                    return bad(format!("{at}: no earlier hop delivers to {}", h.seller));
                }
                if let Err(e) = h.profile().validate() {
                    return bad(format!("{at}.faults: {e}"));
                }
            }
        }
        Ok(())
    }
}

/// Output of a run: the report and every chain, ready to persist.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub chains: Vec<Chain>,
    pub supply_chain: SupplyChain,
}

/// Executes the scenario. `seed` overrides the file's seed; `eth_usd`
/// overrides the file's rate.
pub fn run_scenario(
    scenario: &Scenario,
    seed: Option<u64>,
    eth_usd: Option<f64>,
) -> Result<ScenarioRun, ScenarioError> {
    scenario.validate()?;
    let seed = seed.unwrap_or(scenario.seed);
    let eth_usd = eth_usd.unwrap_or(scenario.options.eth_usd);
    let t = &scenario.topology;
    let topology = Topology::generate(seed, &t.roles, t.validators, t.faulty_validators)?;
    let config = WorkflowConfig { gas_limit: scenario.options.gas_limit, max_silence: scenario.options.max_silence };
    let mut sc = SupplyChain::new(topology, config)?;
    let mut attempts: Vec<Vec<AttemptReport>> = Vec::new();

    for batch in &scenario.batches {
        sc.create_batch(&batch.id, batch.accurate_hum)?;
        let mut opened: Vec<usize> = Vec::new();
        for (i, spec) in batch.hops.iter().enumerate() {
            let predecessor = match spec.seller {
                Role::Driller => None,
                seller => opened
                    .iter()
                    .rev()
                    .map(|id| sc.hop(*id).expect("opened hop"))
                    .find(|h| h.buyer_role == seller)
                    .map(|h| h.tracking_contract),
            };
            let hop = sc.initiate_hop(&batch.id, spec.seller, spec.buyer, spec.terms(&batch.oil_id), predecessor)?;
            opened.push(hop);

            let mut hop_attempts = Vec::new();
            let mut accepted = false;
            for attempt in spec.attempts() {
                if accepted {
                    break;
                }
                let (credential, method, signer) = match &attempt {
                    AcceptAttempt::Signature { signer } => {
                        let who = signer.unwrap_or(spec.buyer);
                        (sc.sign_acceptance(hop, who)?, "signature", Some(who))
                    }
                    AcceptAttempt::Passphrase { passphrase } => {
                        (sc.passphrase_credential(hop, passphrase)?, "passphrase", None)
                    }
                };
                accepted = match sc.accept_shipment(hop, &credential) {
                    Ok(_) => true,
                    Err(WorkflowError::BadCredential) => false,
                    Err(e) => return Err(e.into()),
                };
                hop_attempts.push(AttemptReport { method: method.into(), signer, accepted });
            }
            attempts.push(hop_attempts);
            if !accepted {
                continue;
            }

            let gateway = sc.topology().gateway(spec.seller)?.address();
            let stream_seed = derive_seed(seed, &format!("{}/hop-{}", batch.id, i + 1));
            let readings = spec.profile().stream(gateway, stream_seed)?;
            sc.feed(hop, &readings)?;
            if spec.deliver {
                sc.deliver(hop)?;
                if spec.close {
                    sc.close(hop)?;
                }
            }
        }
    }

    let report = build_report(&scenario.name, seed, eth_usd, &sc, &attempts)?;
    let chains = sc.runtime().chains().cloned().collect();
    Ok(ScenarioRun { report, chains, supply_chain: sc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for (name, text) in BUNDLED {
            let s = Scenario::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn parse_error_names_location() {
        let err = Scenario::parse("schema_version = 1\nname = 3\n").unwrap_err();
        let ScenarioError::Parse(msg) = err else { panic!("{err:?}") };
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn validation_rejects_bad_validator_count_and_role_order() {
        let base = bundled("happy_path").unwrap();
        let five = base.replace("validators = 4", "validators = 5");
        assert!(matches!(Scenario::parse(&five), Err(ScenarioError::Validation(m)) if m.contains("3f+1")));
        let skip = base.replacen("buyer = \"refinery\"", "buyer = \"pump\"", 1);
        assert!(matches!(Scenario::parse(&skip), Err(ScenarioError::Validation(m)) if m.contains("cannot sell")));
    }

    #[test]
    fn fault_window_validated() {
        let text = bundled("pressure_fault_hop2").unwrap().replace("end = 7", "end = 70");
        assert!(matches!(Scenario::parse(&text), Err(ScenarioError::Validation(m)) if m.contains("faults")));
    }

    #[test]
    fn accept_attempts_parse() {
        let h: HopSpec = toml::from_str(
            r#"
            seller = "driller"
            buyer = "refinery"
            oil_name = "Crude"
            price = 1
            quantity = 1
            setpoints = { temperature = 1, humidity = 1, pressure = 1 }
            duration = 1
            accept = [{ method = "signature", signer = "storage" }, { method = "passphrase", passphrase = "x" }]
            "#,
        )
        .unwrap();
        assert_eq!(
            h.attempts(),
            [
                AcceptAttempt::Signature { signer: Some(Role::Storage) },
                AcceptAttempt::Passphrase { passphrase: "x".into() }
            ]
        );
    }
}
