//! Per-hop tracking contract.
//!
//! Holds the batch setpoints entered by its owner and classifies every
//! temperature, humidity and pressure reading pushed by the authorized data
//! source as accurate, low or high. Each classification emits exactly one
//! `<Kind>Violation` event (accurate readings included, with an
//! "Accurate <Kind>" message) and updates the per-kind stage and the shared
//! `violation_type` field.

use serde::Serialize;

use super::{non_negative, Args, BadInitArgs, CallContext, Outcome, RevertReason};
use crate::codec::{Canonical, Encoder};
use crate::identity::Address;
use crate::ledger::Event;
use crate::runtime::ContractAddress;
use crate::value::Value;

pub const ENTER_OIL: &str = "EnterOil";
pub const CHECK_TEMPERATURE: &str = "CheckTemperature";
pub const CHECK_HUMIDITY: &str = "CheckHumidity";
pub const CHECK_PRESSURE: &str = "CheckPressure";
pub const OCCURRED_VIOLATION: &str = "OccuredViolation";
pub const OIL_ADDED: &str = "oilAdded";

pub(super) const FUNCTIONS: &[&str] =
    &[ENTER_OIL, CHECK_TEMPERATURE, CHECK_HUMIDITY, CHECK_PRESSURE, OCCURRED_VIOLATION];

/// Reading classification. Discriminants are the on-chain stage codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    #[default]
    Accurate = 0,
    Low = 1,
    High = 2,
}

impl Stage {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(Stage::Accurate),
            1 => Some(Stage::Low),
            2 => Some(Stage::High),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        self as i64
    }

    /// Classifies `value` against `setpoint`; readings within `tolerance` are accurate.
    pub fn classify(value: i64, setpoint: i64, tolerance: u64) -> Self {
        let diff = i128::from(value) - i128::from(setpoint);
        let tol = i128::from(tolerance);
        if diff > tol {
            Stage::High
        } else if diff < -tol {
            Stage::Low
        } else {
            Stage::Accurate
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Accurate => "accurate",
            Stage::Low => "low",
            Stage::High => "high",
        }
    }
}

/// Monitored physical quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Temperature,
    Humidity,
    Pressure,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::Temperature, Quantity::Humidity, Quantity::Pressure];

    pub fn label(self) -> &'static str {
        match self {
            Quantity::Temperature => "Temperature",
            Quantity::Humidity => "Humidity",
            Quantity::Pressure => "Pressure",
        }
    }

    pub fn check_function(self) -> &'static str {
        match self {
            Quantity::Temperature => CHECK_TEMPERATURE,
            Quantity::Humidity => CHECK_HUMIDITY,
            Quantity::Pressure => CHECK_PRESSURE,
        }
    }

    pub fn event_name(self) -> String {
        format!("{}Violation", self.label())
    }

    pub fn from_event_name(name: &str) -> Option<Self> {
        Quantity::ALL.into_iter().find(|q| name == q.event_name())
    }

    pub fn violation_type(self) -> ViolationType {
        match self {
            Quantity::Temperature => ViolationType::Temperature,
            Quantity::Humidity => ViolationType::Humidity,
            Quantity::Pressure => ViolationType::Pressure,
        }
    }

    /// Return value of a check call.
    pub fn report(self, stage: Stage) -> String {
        match stage {
            Stage::High => format!("Current {} is very HIGH", self.label()),
            Stage::Low => format!("Current {} is very LOW", self.label()),
            Stage::Accurate => format!("Current {} is ACCURATE", self.label()),
        }
    }

    /// Message carried by the violation event.
    pub fn event_message(self, stage: Stage) -> String {
        let prefix = match stage {
            Stage::High => "Higher",
            Stage::Low => "Lower",
            Stage::Accurate => "Accurate",
        };
        format!("{prefix} {}", self.label())
    }

    /// Inverse of [`Quantity::event_message`].
    pub fn stage_from_message(self, msg: &str) -> Option<Stage> {
        [Stage::Accurate, Stage::Low, Stage::High].into_iter().find(|s| self.event_message(*s) == msg)
    }
}

/// Last violation kind recorded. Codes are the on-chain argument values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ViolationType {
    #[default]
    None = 0,
    Temperature = 1,
    Humidity = 2,
    Pressure = 3,
}

impl ViolationType {
    pub fn code(self) -> i64 {
        self as i64
    }

    /// Quantity for a violation-type code; `None` and unknown codes map to `None`.
    pub fn quantity_for_code(code: i64) -> Option<Quantity> {
        match code {
            1 => Some(Quantity::Temperature),
            2 => Some(Quantity::Humidity),
            3 => Some(Quantity::Pressure),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackingInit {
    pub batch: String,
    /// Telemetry source allowed to feed checks.
    pub data_address: Address,
    pub buyer: Address,
    /// Tracking contract of the previous hop.
    pub predecessor: Option<ContractAddress>,
    /// Half-width of the accurate band; 0 means exact equality.
    pub tolerance: u64,
}

impl Canonical for TrackingInit {
    fn encode(&self, enc: &mut Encoder) {
        enc.str(&self.batch).value(&self.data_address).value(&self.buyer).value(&self.predecessor).u64(self.tolerance);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckProgress {
    pub my_address: Address,
    pub data_address: Address,
    pub buyer: Address,
    pub previous_contract: Option<ContractAddress>,
    pub batch: String,
    pub oil_id: String,
    pub oil_name: String,
    pub amount: u64,
    pub total_price: u64,
    pub accurate_temp: i64,
    pub accurate_hum: i64,
    pub accurate_press: i64,
    pub temp_stage: Stage,
    pub humidity_stage: Stage,
    pub pressure_stage: Stage,
    pub violation_type: ViolationType,
    pub tolerance: u64,
    pub initialized: bool,
}

impl CheckProgress {
    pub fn new(owner: Address, init: TrackingInit) -> Result<Self, BadInitArgs> {
        if init.data_address == Address::ZERO {
            return Err(BadInitArgs("data address must be set".into()));
        }
        if init.batch.is_empty() {
            return Err(BadInitArgs("batch id must not be empty".into()));
        }
        Ok(Self {
            my_address: owner,
            data_address: init.data_address,
            buyer: init.buyer,
            previous_contract: init.predecessor,
            batch: init.batch,
            oil_id: String::new(),
            oil_name: String::new(),
            amount: 0,
            total_price: 0,
            accurate_temp: 0,
            accurate_hum: 0,
            accurate_press: 0,
            temp_stage: Stage::Accurate,
            humidity_stage: Stage::Accurate,
            pressure_stage: Stage::Accurate,
            violation_type: ViolationType::None,
            tolerance: init.tolerance,
            initialized: false,
        })
    }

    pub fn stage(&self, q: Quantity) -> Stage {
        match q {
            Quantity::Temperature => self.temp_stage,
            Quantity::Humidity => self.humidity_stage,
            Quantity::Pressure => self.pressure_stage,
        }
    }

    pub fn setpoint(&self, q: Quantity) -> i64 {
        match q {
            Quantity::Temperature => self.accurate_temp,
            Quantity::Humidity => self.accurate_hum,
            Quantity::Pressure => self.accurate_press,
        }
    }

    fn only_self(&self, ctx: &CallContext) -> Result<(), RevertReason> {
        if ctx.caller == self.my_address {
            Ok(())
        } else {
            Err(RevertReason::Unauthorized)
        }
    }

    fn only_checker(&self, ctx: &CallContext) -> Result<(), RevertReason> {
        if ctx.caller == self.data_address {
            Ok(())
        } else {
            Err(RevertReason::Unauthorized)
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn enter_oil(
        &mut self,
        ctx: &CallContext,
        name: &str,
        oil_id: &str,
        amt: i64,
        price: i64,
        actual_temp: i64,
        actual_hum: i64,
        actual_press: i64,
    ) -> Result<Outcome, RevertReason> {
        self.only_self(ctx)?;
        let amount = non_negative(amt)?;
        let price = non_negative(price)?;
        self.oil_name = name.to_owned();
        self.oil_id = oil_id.to_owned();
        self.amount = amount;
        self.total_price = price;
        self.accurate_temp = actual_temp;
        self.accurate_hum = actual_hum;
        self.accurate_press = actual_press;
        self.initialized = true;
        Ok(Outcome::event(
            Event::new(OIL_ADDED, ctx.contract)
                .with("addr", ctx.caller)
                .with("oil_id", oil_id)
                .with("name", name)
                .with("amt", amt)
                .with("price", price as i64)
                .with("temp", actual_temp)
                .with("hum", actual_hum)
                .with("press", actual_press),
        ))
    }

    /// Compares a reading with its setpoint and records the resulting stage.
    pub fn check(&mut self, ctx: &CallContext, q: Quantity, value: i64) -> Result<Outcome, RevertReason> {
        self.only_checker(ctx)?;
        if !self.initialized {
            return Err(RevertReason::NotInitialized);
        }
        let stage = Stage::classify(value, self.setpoint(q), self.tolerance);
        let mut outcome = self.apply_violation(ctx, q.violation_type().code(), stage.code());
        outcome.return_value = Some(Value::Text(q.report(stage)));
        Ok(outcome)
    }

    pub fn occurred_violation(&mut self, ctx: &CallContext, vtype: i64, stage: i64) -> Result<Outcome, RevertReason> {
        self.only_checker(ctx)?;
        Ok(self.apply_violation(ctx, vtype, stage))
    }

    /// Unknown type or stage codes fall through with no change and no event.
    fn apply_violation(&mut self, ctx: &CallContext, vtype: i64, stage: i64) -> Outcome {
        let (Some(q), Some(stage)) = (ViolationType::quantity_for_code(vtype), Stage::from_code(stage)) else {
            return Outcome::default();
        };
        match q {
            Quantity::Temperature => self.temp_stage = stage,
            Quantity::Humidity => self.humidity_stage = stage,
            Quantity::Pressure => self.pressure_stage = stage,
        }
        self.violation_type = match stage {
            Stage::Accurate => ViolationType::None,
            Stage::Low | Stage::High => q.violation_type(),
        };
        Outcome::event(
            Event::new(q.event_name(), ctx.contract).with("addr", ctx.caller).with("msg", q.event_message(stage)),
        )
    }

    pub(super) fn dispatch(
        &mut self,
        ctx: &CallContext,
        function: &str,
        args: &[Value],
    ) -> Result<Outcome, RevertReason> {
        let a = Args(args);
        match function {
            ENTER_OIL => {
                a.expect_len(7)?;
                self.enter_oil(ctx, a.text(0)?, a.text(1)?, a.int(2)?, a.int(3)?, a.int(4)?, a.int(5)?, a.int(6)?)
            }
            CHECK_TEMPERATURE | CHECK_HUMIDITY | CHECK_PRESSURE => {
                a.expect_len(1)?;
                let q = Quantity::ALL.into_iter().find(|q| q.check_function() == function).expect("check fn");
                self.check(ctx, q, a.int(0)?)
            }
            OCCURRED_VIOLATION => {
                a.expect_len(2)?;
                self.occurred_violation(ctx, a.int(0)?, a.int(1)?)
            }
            other => Err(RevertReason::BadArgs(format!("no function {other}"))),
        }
    }
}
