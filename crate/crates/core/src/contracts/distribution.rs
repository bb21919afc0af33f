//! Per-batch custody contract: driller, factory, storage, pump, sold.

use serde::Serialize;

use super::{non_negative, Args, BadInitArgs, CallContext, Outcome, RevertReason};
use crate::codec::{Canonical, Encoder};
use crate::identity::Address;
use crate::ledger::Event;
use crate::value::Value;

pub const READY_TO_FACTORY: &str = "readyToFactory";
pub const READY_TO_STORAGE: &str = "ReadyToStorage";
pub const OIL_IN_OIL_STORAGE: &str = "oilInOilStorage";
pub const PUMP_SOLD_OIL: &str = "pumpSoldOil";

pub const INITIATE_DIST: &str = "InitiateDist";
pub const FACTORY_DISTRIBUTION: &str = "FactoryDistribution";
pub const STORAGE_WHOLESALE: &str = "StorageWholesale";
pub const PUMP_OIL_SOLD: &str = "PumpOilSold";

pub const MSG_READY_TO_FACTORY: &str = "Crude Oil is Ready to go to the Factory.";
pub const MSG_READY_TO_STORAGE: &str = "Refined Oil is Ready to go to the Storage.";
pub const MSG_IN_STORAGE: &str = "Oil is stored in the Oil Storage.";
pub const MSG_SOLD: &str = "Oil has been Sold at the Pump.";

pub(super) const FUNCTIONS: &[&str] = &[READY_TO_FACTORY, READY_TO_STORAGE, OIL_IN_OIL_STORAGE, PUMP_SOLD_OIL];

pub const DISTRIBUTION_EVENTS: [&str; 4] = [INITIATE_DIST, FACTORY_DISTRIBUTION, STORAGE_WHOLESALE, PUMP_OIL_SOLD];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Trace {
    #[default]
    Created,
    AtDriller,
    AtFactory,
    AtStorage,
    AtPump,
    Sold,
}

impl Trace {
    pub fn as_str(self) -> &'static str {
        match self {
            Trace::Created => "created",
            Trace::AtDriller => "at_driller",
            Trace::AtFactory => "at_factory",
            Trace::AtStorage => "at_storage",
            Trace::AtPump => "at_pump",
            Trace::Sold => "sold",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributionInit {
    pub batch: String,
    pub driller: Address,
    pub factory: Address,
    pub storage: Address,
    pub pump: Address,
    pub accurate_hum: i64,
}

impl Canonical for DistributionInit {
    fn encode(&self, enc: &mut Encoder) {
        enc.str(&self.batch)
            .value(&self.driller)
            .value(&self.factory)
            .value(&self.storage)
            .value(&self.pump)
            .i64(self.accurate_hum);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OilDistribution {
    pub my_address: Address,
    pub driller_address: Address,
    pub factory_address: Address,
    pub storage_address: Address,
    pub pump_address: Address,
    pub current_trace: Trace,
    pub drilling_date: Option<u64>,
    pub factory_dist_start_date: Option<u64>,
    pub refiner_start_date: Option<u64>,
    pub pump_start_date: Option<u64>,
    pub drill_price: u64,
    pub factory_price: u64,
    pub storage_price: u64,
    pub pump_price: u64,
    pub driller_sold_amount: u64,
    pub factory_sold_amount: u64,
    pub storage_sold_amount: u64,
    pub pump_sold_amount: u64,
    pub batch: String,
    pub oil_id: String,
    pub oil_name: String,
    pub accurate_hum: i64,
}

impl OilDistribution {
    pub fn new(owner: Address, init: DistributionInit) -> Result<Self, BadInitArgs> {
        let actors = [init.driller, init.factory, init.storage, init.pump];
        if actors.contains(&Address::ZERO) {
            return Err(BadInitArgs("actor addresses must be set".into()));
        }
        for (i, a) in actors.iter().enumerate() {
            if actors[i + 1..].contains(a) {
                return Err(BadInitArgs("actor addresses must be distinct".into()));
            }
        }
        Ok(Self {
            my_address: owner,
            driller_address: init.driller,
            factory_address: init.factory,
            storage_address: init.storage,
            pump_address: init.pump,
            current_trace: Trace::Created,
            drilling_date: None,
            factory_dist_start_date: None,
            refiner_start_date: None,
            pump_start_date: None,
            drill_price: 0,
            factory_price: 0,
            storage_price: 0,
            pump_price: 0,
            driller_sold_amount: 0,
            factory_sold_amount: 0,
            storage_sold_amount: 0,
            pump_sold_amount: 0,
            batch: init.batch,
            oil_id: String::new(),
            oil_name: String::new(),
            accurate_hum: init.accurate_hum,
        })
    }

    fn only(&self, ctx: &CallContext, who: Address) -> Result<(), RevertReason> {
        if ctx.caller == who {
            Ok(())
        } else {
            Err(RevertReason::Unauthorized)
        }
    }

    fn at(&self, expected: Trace) -> Result<(), RevertReason> {
        if self.current_trace == expected {
            Ok(())
        } else {
            Err(RevertReason::WrongStage {
                expected: expected.as_str().into(),
                actual: self.current_trace.as_str().into(),
            })
        }
    }

    fn emit(ctx: &CallContext, name: &str, msg: &str) -> Outcome {
        Outcome::event(Event::new(name, ctx.contract).with("ad", ctx.caller).with("msg", msg))
    }

    pub fn ready_to_factory(
        &mut self,
        ctx: &CallContext,
        oil_id: &str,
        name: &str,
        price: i64,
        quantity: i64,
    ) -> Result<Outcome, RevertReason> {
        self.only(ctx, self.driller_address)?;
        self.at(Trace::Created)?;
        let (price, quantity) = (non_negative(price)?, non_negative(quantity)?);
        self.current_trace = Trace::AtDriller;
        self.drilling_date = Some(ctx.tick);
        self.oil_id = oil_id.to_owned();
        self.oil_name = name.to_owned();
        self.drill_price = price;
        self.driller_sold_amount = quantity;
        Ok(Self::emit(ctx, INITIATE_DIST, MSG_READY_TO_FACTORY))
    }

    pub fn ready_to_storage(&mut self, ctx: &CallContext, price: i64, quantity: i64) -> Result<Outcome, RevertReason> {
        self.only(ctx, self.factory_address)?;
        self.at(Trace::AtDriller)?;
        let (price, quantity) = (non_negative(price)?, non_negative(quantity)?);
        self.current_trace = Trace::AtFactory;
        self.factory_dist_start_date = Some(ctx.tick);
        self.factory_price = price;
        self.factory_sold_amount = quantity;
        Ok(Self::emit(ctx, FACTORY_DISTRIBUTION, MSG_READY_TO_STORAGE))
    }

    pub fn oil_in_oil_storage(
        &mut self,
        ctx: &CallContext,
        price: i64,
        quantity: i64,
    ) -> Result<Outcome, RevertReason> {
        self.only(ctx, self.storage_address)?;
        self.at(Trace::AtFactory)?;
        let (price, quantity) = (non_negative(price)?, non_negative(quantity)?);
        self.current_trace = Trace::AtStorage;
        self.refiner_start_date = Some(ctx.tick);
        self.storage_price = price;
        self.storage_sold_amount = quantity;
        Ok(Self::emit(ctx, STORAGE_WHOLESALE, MSG_IN_STORAGE))
    }

    /// Public, but only valid once the batch is in storage. Passes through
    /// `AtPump` to `Sold` in one transition.
    pub fn pump_sold_oil(&mut self, ctx: &CallContext, price: i64, quantity: i64) -> Result<Outcome, RevertReason> {
        self.at(Trace::AtStorage)?;
        let (price, quantity) = (non_negative(price)?, non_negative(quantity)?);
        self.current_trace = Trace::Sold;
        self.pump_start_date = Some(ctx.tick);
        self.pump_price = price;
        self.pump_sold_amount = quantity;
        Ok(Self::emit(ctx, PUMP_OIL_SOLD, MSG_SOLD))
    }

    pub(super) fn dispatch(
        &mut self,
        ctx: &CallContext,
        function: &str,
        args: &[Value],
    ) -> Result<Outcome, RevertReason> {
        let a = Args(args);
        match function {
            READY_TO_FACTORY => {
                a.expect_len(4)?;
                self.ready_to_factory(ctx, a.text(0)?, a.text(1)?, a.int(2)?, a.int(3)?)
            }
            READY_TO_STORAGE => {
                a.expect_len(2)?;
                self.ready_to_storage(ctx, a.int(0)?, a.int(1)?)
            }
            OIL_IN_OIL_STORAGE => {
                a.expect_len(2)?;
                self.oil_in_oil_storage(ctx, a.int(0)?, a.int(1)?)
            }
            PUMP_SOLD_OIL => {
                a.expect_len(2)?;
                self.pump_sold_oil(ctx, a.int(0)?, a.int(1)?)
            }
            other => Err(RevertReason::BadArgs(format!("no function {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{generate_actor, Role};
    use crate::runtime::ContractAddress;

    struct F {
        c: OilDistribution,
        ctx: std::collections::BTreeMap<Role, CallContext>,
    }

    fn fixture() -> F {
        let addr = ContractAddress::from_bytes([3; 20]);
        let ctx = Role::ALL
            .into_iter()
            .map(|r| (r, CallContext { caller: generate_actor(r, 1).address(), contract: addr, tick: 10 }))
            .collect::<std::collections::BTreeMap<_, _>>();
        let c = OilDistribution::new(
            ctx[&Role::Driller].caller,
            DistributionInit {
                batch: "101".into(),
                driller: ctx[&Role::Driller].caller,
                factory: ctx[&Role::Refinery].caller,
                storage: ctx[&Role::Storage].caller,
                pump: ctx[&Role::Pump].caller,
                accurate_hum: 10,
            },
        )
        .unwrap();
        F { c, ctx }
    }

    #[test]
    fn ready_to_factory_emits_reference_message() {
        let mut f = fixture();
        let out = f.c.ready_to_factory(&f.ctx[&Role::Driller], "101", "Crude", 50, 1000).unwrap();
        let e = &out.events[0];
        assert_eq!(e.name, INITIATE_DIST);
        assert_eq!(e.arg("msg"), Some(&Value::text("Crude Oil is Ready to go to the Factory.")));
        assert_eq!(e.arg("ad"), Some(&Value::Address(f.ctx[&Role::Driller].caller)));
        assert_eq!(f.c.current_trace, Trace::AtDriller);
        assert_eq!(f.c.drilling_date, Some(10));
        assert_eq!((f.c.drill_price, f.c.driller_sold_amount), (50, 1000));
    }

    #[test]
    fn ready_to_factory_wrong_caller_and_repeat() {
        let mut f = fixture();
        let before = f.c.clone();
        assert_eq!(
            f.c.ready_to_factory(&f.ctx[&Role::Refinery], "101", "Crude", 50, 1000),
            Err(RevertReason::Unauthorized)
        );
        assert_eq!(f.c, before);
        f.c.ready_to_factory(&f.ctx[&Role::Driller], "101", "Crude", 50, 1000).unwrap();
        assert!(matches!(
            f.c.ready_to_factory(&f.ctx[&Role::Driller], "101", "Crude", 50, 1000),
            Err(RevertReason::WrongStage { .. })
        ));
    }

    #[test]
    fn full_custody_sequence() {
        let mut f = fixture();
        f.c.ready_to_factory(&f.ctx[&Role::Driller], "101", "Crude", 50, 1000).unwrap();
        assert_eq!(f.c.ready_to_storage(&f.ctx[&Role::Storage], 60, 900), Err(RevertReason::Unauthorized));
        let out = f.c.ready_to_storage(&f.ctx[&Role::Refinery], 60, 900).unwrap();
        assert_eq!(out.events[0].name, FACTORY_DISTRIBUTION);
        let out = f.c.oil_in_oil_storage(&f.ctx[&Role::Storage], 70, 800).unwrap();
        assert_eq!(out.events[0].name, STORAGE_WHOLESALE);
        let out = f.c.pump_sold_oil(&f.ctx[&Role::Consumer], 80, 0).unwrap();
        assert_eq!(out.events[0].name, PUMP_OIL_SOLD);
        assert_eq!(f.c.current_trace, Trace::Sold);
        assert_eq!(f.c.pump_sold_amount, 0);
    }

    #[test]
    fn out_of_order_transitions_rejected() {
        let mut f = fixture();
        assert!(matches!(f.c.ready_to_storage(&f.ctx[&Role::Refinery], 1, 1), Err(RevertReason::WrongStage { .. })));
        assert!(matches!(f.c.oil_in_oil_storage(&f.ctx[&Role::Storage], 1, 1), Err(RevertReason::WrongStage { .. })));
        f.c.ready_to_factory(&f.ctx[&Role::Driller], "101", "Crude", 50, 1000).unwrap();
        assert!(matches!(f.c.pump_sold_oil(&f.ctx[&Role::Consumer], 1, 1), Err(RevertReason::WrongStage { .. })));
    }

    #[test]
    fn duplicate_actor_addresses_rejected() {
        let a = generate_actor(Role::Driller, 1).address();
        let b = generate_actor(Role::Refinery, 1).address();
        let init = DistributionInit {
            batch: "b".into(),
            driller: a,
            factory: a,
            storage: b,
            pump: Address::ZERO,
            accurate_hum: 0,
        };
        assert!(OilDistribution::new(a, init).is_err());
    }
}
