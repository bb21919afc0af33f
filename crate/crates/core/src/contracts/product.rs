//! Product-information contract for one hop, deployed on the hop's private chain.
//!
//! It records the agreed terms, verifies the buyer's acceptance credential,
//! logs the settlement and raw telemetry, and tracks delivery and closure.

use serde::Serialize;

use super::{Args, BadInitArgs, CallContext, Outcome, RevertReason};
use crate::codec::{Canonical, Encoder};
use crate::identity::{verify, Address, Credential, CredentialKind, Hash32, PublicKey, Signature};
use crate::ledger::Event;
use crate::runtime::ContractAddress;
use crate::value::Value;

pub const ACCEPT_SHIPMENT: &str = "acceptShipment";
pub const RECORD_TELEMETRY: &str = "recordTelemetry";
pub const CONFIRM_DELIVERY: &str = "confirmDelivery";
pub const CLOSE_HOP: &str = "closeHop";

pub const SETTLEMENT: &str = "Settlement";
pub const TELEMETRY_RECORDED: &str = "TelemetryRecorded";
pub const SHIPMENT_DELIVERED: &str = "ShipmentDelivered";
pub const HOP_CLOSED: &str = "HopClosed";

pub(super) const FUNCTIONS: &[&str] = &[ACCEPT_SHIPMENT, RECORD_TELEMETRY, CONFIRM_DELIVERY, CLOSE_HOP];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductInit {
    pub batch: String,
    pub buyer: Address,
    pub buyer_key: PublicKey,
    pub tracking: ContractAddress,
    pub oil_name: String,
    pub price: u64,
    pub quantity: u64,
    /// Temperature, humidity, pressure.
    pub setpoints: [i64; 3],
    /// Stored passphrase verifier, when the buyer may accept by passphrase.
    pub passphrase: Option<Credential>,
}

impl Canonical for ProductInit {
    fn encode(&self, enc: &mut Encoder) {
        enc.str(&self.batch)
            .value(&self.buyer)
            .value(&self.buyer_key)
            .value(&self.tracking)
            .str(&self.oil_name)
            .u64(self.price)
            .u64(self.quantity);
        for s in self.setpoints {
            enc.i64(s);
        }
        match &self.passphrase {
            None => enc.u8(0),
            Some(c) => enc.u8(1).bytes(&c.payload),
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductStatus {
    Proposed,
    Accepted,
    Delivered,
    Closed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProductInfo {
    pub seller: Address,
    pub buyer: Address,
    #[serde(skip)]
    pub buyer_key: PublicKey,
    pub tracking: ContractAddress,
    pub batch: String,
    pub oil_name: String,
    pub price: u64,
    pub quantity: u64,
    pub setpoints: [i64; 3],
    #[serde(skip)]
    pub passphrase: Option<Credential>,
    pub accept_message: Hash32,
    pub status: ProductStatus,
    pub telemetry_records: u64,
}

impl ProductInfo {
    pub fn new(address: ContractAddress, owner: Address, init: ProductInit) -> Result<Self, BadInitArgs> {
        if init.buyer == owner {
            return Err(BadInitArgs("buyer and seller must differ".into()));
        }
        if Address::from_public_key(&init.buyer_key) != init.buyer {
            return Err(BadInitArgs("buyer key does not match buyer address".into()));
        }
        if let Some(c) = &init.passphrase {
            if c.kind != CredentialKind::Passphrase || c.salt().is_none() {
                return Err(BadInitArgs("malformed passphrase verifier".into()));
            }
        }
        let accept_message = accept_message(&init, owner, address);
        Ok(Self {
            seller: owner,
            buyer: init.buyer,
            buyer_key: init.buyer_key,
            tracking: init.tracking,
            batch: init.batch,
            oil_name: init.oil_name,
            price: init.price,
            quantity: init.quantity,
            setpoints: init.setpoints,
            passphrase: init.passphrase,
            accept_message,
            status: ProductStatus::Proposed,
            telemetry_records: 0,
        })
    }

    fn expect_status(&self, expected: ProductStatus) -> Result<(), RevertReason> {
        if self.status == expected {
            Ok(())
        } else {
            Err(RevertReason::WrongStage {
                expected: format!("{expected:?}").to_lowercase(),
                actual: format!("{:?}", self.status).to_lowercase(),
            })
        }
    }

    fn only(&self, ctx: &CallContext, who: Address) -> Result<(), RevertReason> {
        if ctx.caller == who {
            Ok(())
        } else {
            Err(RevertReason::Unauthorized)
        }
    }

    pub fn credential_valid(&self, credential: &Credential) -> bool {
        match credential.kind {
            CredentialKind::Signature => verify(
                self.accept_message.as_bytes(),
                &Signature::from_vec(credential.payload.clone()),
                &self.buyer_key,
            ),
            CredentialKind::Passphrase => self
                .passphrase
                .as_ref()
                .is_some_and(|stored| !credential.payload.is_empty() && stored.payload == credential.payload),
        }
    }

    pub fn accept(&mut self, ctx: &CallContext, credential: &Credential) -> Result<Outcome, RevertReason> {
        self.only(ctx, self.buyer)?;
        self.expect_status(ProductStatus::Proposed)?;
        if !self.credential_valid(credential) {
            return Err(RevertReason::BadCredential);
        }
        self.status = ProductStatus::Accepted;
        Ok(Outcome::event(
            Event::new(SETTLEMENT, ctx.contract)
                .with("from", self.buyer)
                .with("to", self.seller)
                .with("amount", self.price as i64),
        ))
    }

    pub fn record_telemetry(
        &mut self,
        ctx: &CallContext,
        kind: &str,
        value: i64,
        value2: i64,
        tick: i64,
        source: Address,
    ) -> Result<Outcome, RevertReason> {
        self.only(ctx, self.seller)?;
        self.expect_status(ProductStatus::Accepted)?;
        self.telemetry_records += 1;
        Ok(Outcome::event(
            Event::new(TELEMETRY_RECORDED, ctx.contract)
                .with("kind", kind)
                .with("value", value)
                .with("value2", value2)
                .with("tick", tick)
                .with("source", source),
        ))
    }

    pub fn confirm_delivery(&mut self, ctx: &CallContext, weight_delta: Option<i64>) -> Result<Outcome, RevertReason> {
        self.only(ctx, self.buyer)?;
        self.expect_status(ProductStatus::Accepted)?;
        self.status = ProductStatus::Delivered;
        let mut e = Event::new(SHIPMENT_DELIVERED, ctx.contract).with("addr", ctx.caller);
        if let Some(d) = weight_delta {
            e = e.with("weight_delta", d);
        }
        Ok(Outcome::event(e))
    }

    pub fn close(&mut self, ctx: &CallContext) -> Result<Outcome, RevertReason> {
        self.only(ctx, self.seller)?;
        self.expect_status(ProductStatus::Delivered)?;
        self.status = ProductStatus::Closed;
        Ok(Outcome::event(Event::new(HOP_CLOSED, ctx.contract).with("addr", ctx.caller)))
    }

    pub(super) fn dispatch(
        &mut self,
        ctx: &CallContext,
        function: &str,
        args: &[Value],
    ) -> Result<Outcome, RevertReason> {
        let a = Args(args);
        match function {
            ACCEPT_SHIPMENT => {
                a.expect_len(2)?;
                let kind = match a.int(0)? {
                    0 => CredentialKind::Signature,
                    1 => CredentialKind::Passphrase,
                    k => return Err(RevertReason::BadArgs(format!("unknown credential kind {k}"))),
                };
                let credential = Credential { kind, payload: a.bytes(1)?.to_vec() };
                self.accept(ctx, &credential)
            }
            RECORD_TELEMETRY => {
                a.expect_len(5)?;
                self.record_telemetry(ctx, a.text(0)?, a.int(1)?, a.int(2)?, a.int(3)?, a.address(4)?)
            }
            CONFIRM_DELIVERY => match args.len() {
                0 => self.confirm_delivery(ctx, None),
                _ => {
                    a.expect_len(1)?;
                    self.confirm_delivery(ctx, Some(a.int(0)?))
                }
            },
            CLOSE_HOP => {
                a.expect_len(0)?;
                self.close(ctx)
            }
            other => Err(RevertReason::BadArgs(format!("no function {other}"))),
        }
    }
}

/// Message the buyer signs to accept: digest of the terms and both contract addresses.
fn accept_message(init: &ProductInit, seller: Address, product: ContractAddress) -> Hash32 {
    let mut enc = Encoder::new();
    enc.str("oilchain/accept").value(&seller).value(init).value(&product).value(&init.tracking);
    Hash32::digest(&enc.finish())
}

/// Encodes a credential as `acceptShipment` arguments.
pub fn accept_args(credential: &Credential) -> Vec<Value> {
    let kind = match credential.kind {
        CredentialKind::Signature => 0,
        CredentialKind::Passphrase => 1,
    };
    vec![Value::Int(kind), Value::Bytes(credential.payload.clone())]
}
