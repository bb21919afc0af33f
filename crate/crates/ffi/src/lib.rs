//! C ABI over the oilchain simulator.
//!
//! Every fallible function returns an [`OcStatus`]. On failure a message is
//! kept per thread and can be fetched with [`oc_last_error`]. Strings handed
//! out by this library are owned by the caller and released with
//! [`oc_string_free`]; handles are released with their `_free` function.
//! Passing `NULL` to a `_free` function is a no-op.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use oilchain::identity::{generate_actor, verify, Actor, PublicKey, Role, Signature};
use oilchain::ledger::{load_chain, save_store, LedgerError, StoreManifest, STORE_SCHEMA_VERSION};
use oilchain::provenance::{self, ProvenanceError};
use oilchain::runtime::{fiat_cost, GasSchedule, RuntimeError};
use oilchain::scenario::{bundled, run_scenario, Scenario, ScenarioError, ScenarioRun};

pub const OC_ADDRESS_LEN: usize = 20;
pub const OC_PUBLIC_KEY_LEN: usize = 32;
pub const OC_SIGNATURE_LEN: usize = 64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Runtime = 5,
    UnknownBatch = 6,
    UnknownFunction = 7,
    Io = 8,
    CorruptLedger = 9,
    InvalidArgument = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OcRole {
    Driller = 0,
    Refinery = 1,
    Storage = 2,
    Pump = 3,
    OtherFactory = 4,
    Consumer = 5,
}

fn role_from_code(code: u32) -> Option<Role> {
    [
        (OcRole::Driller, Role::Driller),
        (OcRole::Refinery, Role::Refinery),
        (OcRole::Storage, Role::Storage),
        (OcRole::Pump, Role::Pump),
        (OcRole::OtherFactory, Role::OtherFactory),
        (OcRole::Consumer, Role::Consumer),
    ]
    .into_iter()
    .find(|(c, _)| *c as u32 == code)
    .map(|(_, r)| r)
}

/// Result of a scenario run: report plus every chain.
pub struct OcRun {
    inner: ScenarioRun,
}

/// Actor key pair.
pub struct OcActor {
    inner: Actor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Error(OcStatus, String);

impl Error {
    fn new(status: OcStatus, msg: impl Into<String>) -> Self {
        Error(status, msg.into())
    }
}

impl From<ScenarioError> for Error {
    fn from(e: ScenarioError) -> Self {
        let status = match e {
            ScenarioError::Parse(_) => OcStatus::Parse,
            ScenarioError::Validation(_) | ScenarioError::Telemetry(_) => OcStatus::Validation,
            ScenarioError::Workflow(_) => OcStatus::Runtime,
        };
        Error(status, e.to_string())
    }
}

impl From<LedgerError> for Error {
    fn from(e: LedgerError) -> Self {
        let status = match e {
            LedgerError::CorruptLedger { .. } => OcStatus::CorruptLedger,
            LedgerError::Io { .. } => OcStatus::Io,
            _ => OcStatus::Runtime,
        };
        Error(status, e.to_string())
    }
}

impl From<ProvenanceError> for Error {
    fn from(e: ProvenanceError) -> Self {
        Error(OcStatus::UnknownBatch, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> OcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OcStatus::Ok
        }
        Ok(Err(Error(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            OcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(Error::new(OcStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Error::new(OcStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Error> {
    p.as_ref().ok_or_else(|| Error::new(OcStatus::NullArgument, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Error> {
    p.as_mut().ok_or_else(|| Error::new(OcStatus::NullArgument, format!("{name} is null")))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Copy of the calling thread's last error message, or `NULL` if the last
/// call succeeded. Free with `oc_string_free`.
#[no_mangle]
pub extern "C" fn oc_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

#[no_mangle]
pub unsafe extern "C" fn oc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string. Do not free.
#[no_mangle]
pub extern "C" fn oc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn run_text(text: &str, seed: *const u64, out: *mut *mut OcRun) -> Result<(), Error> {
    let out = out_arg(out, "out")?;
    let scenario = Scenario::parse(text)?;
    let run = run_scenario(&scenario, seed.as_ref().copied(), None)?;
    *out = Box::into_raw(Box::new(OcRun { inner: run }));
    Ok(())
}

/// Runs a scenario given as TOML text. `seed` may be `NULL` to use the
/// scenario's own seed.
#[no_mangle]
pub unsafe extern "C" fn oc_run_scenario(toml: *const c_char, seed: *const u64, out: *mut *mut OcRun) -> OcStatus {
    guard(|| run_text(str_arg(toml, "toml")?, seed, out))
}

/// Runs a bundled scenario by name.
#[no_mangle]
pub unsafe extern "C" fn oc_run_bundled(name: *const c_char, seed: *const u64, out: *mut *mut OcRun) -> OcStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let text = bundled(name)
            .ok_or_else(|| Error::new(OcStatus::InvalidArgument, format!("no bundled scenario `{name}`")))?;
        run_text(text, seed, out)
    })
}

/// Structured report of a run as JSON.
#[no_mangle]
pub unsafe extern "C" fn oc_run_report_json(run: *const OcRun, out: *mut *mut c_char) -> OcStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        *out_arg(out, "out")? = to_c_string(run.inner.report.to_json());
        Ok(())
    })
}

/// Number of violations across every batch of the run.
#[no_mangle]
pub unsafe extern "C" fn oc_run_violation_count(run: *const OcRun, out: *mut u64) -> OcStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        *out_arg(out, "out")? = run.inner.report.violation_totals.total as u64;
        Ok(())
    })
}

/// Provenance of `batch` as JSON. `clean` may be `NULL`.
#[no_mangle]
pub unsafe extern "C" fn oc_run_trace_json(
    run: *const OcRun,
    batch: *const c_char,
    out: *mut *mut c_char,
    clean: *mut bool,
) -> OcStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let batch = str_arg(batch, "batch")?;
        let out = out_arg(out, "out")?;
        let report = provenance::trace(run.inner.supply_chain.consortium(), batch)?;
        if let Some(c) = clean.as_mut() {
            *c = report.clean;
        }
        let json = serde_json::to_string_pretty(&report).map_err(|e| Error::new(OcStatus::Runtime, e.to_string()))?;
        *out = to_c_string(json);
        Ok(())
    })
}

/// Persists every chain of the run under `dir`, replacing its contents.
#[no_mangle]
pub unsafe extern "C" fn oc_run_save_store(run: *const OcRun, dir: *const c_char) -> OcStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let dir = str_arg(dir, "dir")?;
        let manifest = StoreManifest {
            schema_version: STORE_SCHEMA_VERSION,
            scenario: run.inner.report.scenario.clone(),
            seed: run.inner.report.seed,
            chains: run.inner.chains.iter().map(|c| c.id.clone()).collect(),
        };
        Ok(save_store(Path::new(dir), &manifest, &run.inner.chains)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_run_free(run: *mut OcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Re-verifies one persisted chain directory. On `CorruptLedger`,
/// `first_bad_index` receives the offending block index.
#[no_mangle]
pub unsafe extern "C" fn oc_chain_verify(dir: *const c_char, first_bad_index: *mut u64) -> OcStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        match load_chain(Path::new(dir)) {
            Ok(_) => Ok(()),
            Err(e) => {
                if let (LedgerError::CorruptLedger { index, .. }, Some(out)) = (&e, first_bad_index.as_mut()) {
                    *out = *index;
                }
                Err(e.into())
            }
        }
    })
}

/// Execution and transaction gas of a contract function.
#[no_mangle]
pub unsafe extern "C" fn oc_gas_cost(function: *const c_char, execution: *mut u64, transaction: *mut u64) -> OcStatus {
    guard(|| {
        let function = str_arg(function, "function")?;
        let cost = GasSchedule::standard().gas_cost(function).map_err(|e| match e {
            RuntimeError::UnknownFunction(_) => Error::new(OcStatus::UnknownFunction, e.to_string()),
            other => Error::new(OcStatus::Runtime, other.to_string()),
        })?;
        *out_arg(execution, "execution")? = cost.execution;
        *out_arg(transaction, "transaction")? = cost.transaction;
        Ok(())
    })
}

/// `gas * gwei * 1e-9 * eth_usd`.
#[no_mangle]
pub extern "C" fn oc_fiat_cost(gas: u64, gwei: f64, eth_usd: f64) -> f64 {
    fiat_cost(gas, gwei, eth_usd)
}

/// Deterministic actor for an `OcRole` code and seed.
#[no_mangle]
pub unsafe extern "C" fn oc_actor_generate(role: u32, seed: u64, out: *mut *mut OcActor) -> OcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let role = role_from_code(role)
            .ok_or_else(|| Error::new(OcStatus::InvalidArgument, format!("unknown role code {role}")))?;
        *out = Box::into_raw(Box::new(OcActor { inner: generate_actor(role, seed) }));
        Ok(())
    })
}

/// Writes `OC_ADDRESS_LEN` bytes to `out`.
#[no_mangle]
pub unsafe extern "C" fn oc_actor_address(actor: *const OcActor, out: *mut u8) -> OcStatus {
    guard(|| {
        let actor = ref_arg(actor, "actor")?;
        out_arg(out, "out")?;
        ptr::copy_nonoverlapping(actor.inner.address().as_bytes().as_ptr(), out, OC_ADDRESS_LEN);
        Ok(())
    })
}

/// Writes `OC_PUBLIC_KEY_LEN` bytes to `out`.
#[no_mangle]
pub unsafe extern "C" fn oc_actor_public_key(actor: *const OcActor, out: *mut u8) -> OcStatus {
    guard(|| {
        let actor = ref_arg(actor, "actor")?;
        out_arg(out, "out")?;
        ptr::copy_nonoverlapping(actor.inner.public_key().as_bytes().as_ptr(), out, OC_PUBLIC_KEY_LEN);
        Ok(())
    })
}

/// Signs `len` bytes at `msg`; writes `OC_SIGNATURE_LEN` bytes to `out`.
#[no_mangle]
pub unsafe extern "C" fn oc_actor_sign(actor: *const OcActor, msg: *const u8, len: usize, out: *mut u8) -> OcStatus {
    guard(|| {
        let actor = ref_arg(actor, "actor")?;
        let msg = bytes_arg(msg, len, "msg")?;
        out_arg(out, "out")?;
        let sig = actor.inner.sign(msg);
        let bytes = sig.as_bytes();
        if bytes.len() != OC_SIGNATURE_LEN {
            return Err(Error::new(OcStatus::Runtime, "unexpected signature length"));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, OC_SIGNATURE_LEN);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_actor_free(actor: *mut OcActor) {
    if !actor.is_null() {
        drop(Box::from_raw(actor));
    }
}

unsafe fn bytes_arg<'a>(p: *const u8, len: usize, name: &str) -> Result<&'a [u8], Error> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Error::new(OcStatus::NullArgument, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Checks an Ed25519 signature (`OC_SIGNATURE_LEN` bytes) over `len` bytes at
/// `msg` against a public key (`OC_PUBLIC_KEY_LEN` bytes). `valid` receives
/// the verdict; an invalid signature is not an error.
#[no_mangle]
pub unsafe extern "C" fn oc_verify(
    msg: *const u8,
    len: usize,
    signature: *const u8,
    public_key: *const u8,
    valid: *mut bool,
) -> OcStatus {
    guard(|| {
        let msg = bytes_arg(msg, len, "msg")?;
        let sig = bytes_arg(signature, OC_SIGNATURE_LEN, "signature")?;
        let pk = bytes_arg(public_key, OC_PUBLIC_KEY_LEN, "public_key")?;
        let valid = out_arg(valid, "valid")?;
        let mut key = [0u8; OC_PUBLIC_KEY_LEN];
        key.copy_from_slice(pk);
        *valid = verify(msg, &Signature::from_vec(sig.to_vec()), &PublicKey::from_bytes(key));
        Ok(())
    })
}
