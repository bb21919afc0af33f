//! On-disk ledger store.
//!
//! ```text
//! <store>/store.json              StoreManifest
//! <store>/<chain-id>/manifest.json  class, access list, validators
//! <store>/<chain-id>/blocks.jsonl   one JSON block record per line
//! ```
//!
//! Loading re-verifies every chain and refuses corrupt files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Block, Chain, ChainClass, LedgerError, Participant, Validator};

pub const STORE_SCHEMA_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const BLOCKS: &str = "blocks.jsonl";
const STORE_MANIFEST: &str = "store.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub chains: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ChainManifest {
    schema_version: u32,
    id: String,
    class: ChainClass,
    acl: Vec<Participant>,
    validators: Vec<Validator>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LedgerError {
    LedgerError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn corrupt(chain: &str, index: u64, reason: impl Into<String>) -> LedgerError {
    LedgerError::CorruptLedger { chain: chain.to_owned(), index, reason: reason.into() }
}

pub fn save_chain(dir: &Path, chain: &Chain) -> Result<(), LedgerError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest = ChainManifest {
        schema_version: STORE_SCHEMA_VERSION,
        id: chain.id.clone(),
        class: chain.class,
        acl: chain.acl.clone(),
        validators: chain.validators.clone(),
    };
    let path = dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;

    let path = dir.join(BLOCKS);
    let mut file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    for block in &chain.blocks {
        let line = serde_json::to_string(block).expect("block serializes");
        writeln!(file, "{line}").map_err(|e| io_err(&path, e))?;
    }
    file.sync_all().map_err(|e| io_err(&path, e))
}

pub fn load_chain(dir: &Path) -> Result<Chain, LedgerError> {
    let label = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: ChainManifest =
        serde_json::from_str(&text).map_err(|e| corrupt(&label, 0, format!("manifest: {e}")))?;

    let path = dir.join(BLOCKS);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut blocks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let block: Block = serde_json::from_str(line)
            .map_err(|e| corrupt(&manifest.id, i as u64, format!("unparseable block record: {e}")))?;
        blocks.push(block);
    }
    let chain =
        Chain { id: manifest.id, class: manifest.class, acl: manifest.acl, validators: manifest.validators, blocks };
    let report = chain.verify();
    if !report.valid {
        return Err(corrupt(&chain.id, report.first_bad_index.unwrap_or(0), report.reason.unwrap_or_default()));
    }
    Ok(chain)
}

/// Writes all chains into `root`, replacing any previous store. Files are
/// staged in a sibling directory and moved into place only once complete.
pub fn save_store(root: &Path, manifest: &StoreManifest, chains: &[Chain]) -> Result<(), LedgerError> {
    let staging = staging_dir(root);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
    }
    let result = (|| {
        fs::create_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
        for chain in chains {
            save_chain(&staging.join(&chain.id), chain)?;
        }
        let path = staging.join(STORE_MANIFEST);
        let json = serde_json::to_string_pretty(manifest).expect("store manifest serializes");
        fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
        if root.exists() {
            fs::remove_dir_all(root).map_err(|e| io_err(root, e))?;
        }
        fs::rename(&staging, root).map_err(|e| io_err(root, e))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

fn staging_dir(root: &Path) -> PathBuf {
    let mut name = root.file_name().map(|s| s.to_os_string()).unwrap_or_else(|| "store".into());
    name.push(".staging");
    root.with_file_name(name)
}

pub fn load_store(root: &Path) -> Result<(StoreManifest, Vec<Chain>), LedgerError> {
    let path = root.join(STORE_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: StoreManifest =
        serde_json::from_str(&text).map_err(|e| corrupt("store", 0, format!("store manifest: {e}")))?;
    let chains = manifest.chains.iter().map(|id| load_chain(&root.join(id))).collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, chains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{generate_actor, Role};
    use crate::ledger::{Committee, Event, Transaction};
    use crate::runtime::ContractAddress;

    fn sample_chain() -> Chain {
        let committee = Committee::generate(4, 3);
        let a = generate_actor(Role::Driller, 1);
        let mut chain = Chain::new_consortium(
            "consortium",
            vec![Participant { address: a.address(), label: "driller".into() }],
            committee.validators(),
        )
        .unwrap();
        for t in 1..=3 {
            let tx = Transaction {
                caller: a.address(),
                contract: ContractAddress::from_bytes([1; 20]),
                function: "EnterOil".into(),
                args: vec![t as u8],
                gas_used: 35368,
                events: vec![Event::new("oilAdded", ContractAddress::from_bytes([1; 20])).with("msg", "x")],
            };
            let body = chain.propose(vec![tx], t);
            let ends = committee.endorse(&body, &chain.id);
            chain.append_block(&a.address(), body, ends).unwrap();
        }
        chain
    }

    #[test]
    fn chain_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let chain = sample_chain();
        save_chain(&dir.path().join("c"), &chain).unwrap();
        let loaded = load_chain(&dir.path().join("c")).unwrap();
        assert_eq!(loaded, chain);
        let lines = fs::read_to_string(dir.path().join("c").join(BLOCKS)).unwrap();
        assert_eq!(lines.lines().count(), chain.len());
    }

    #[test]
    fn tampered_file_refused_with_index() {
        let dir = tempfile::tempdir().unwrap();
        let chain = sample_chain();
        let cdir = dir.path().join("c");
        save_chain(&cdir, &chain).unwrap();
        let path = cdir.join(BLOCKS);
        let text = fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("\"gas_used\":35368", "\"gas_used\":35369", 1);
        assert_ne!(text, tampered);
        fs::write(&path, tampered).unwrap();
        match load_chain(&cdir) {
            Err(LedgerError::CorruptLedger { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected corrupt ledger, got {other:?}"),
        }
    }

    #[test]
    fn store_round_trip_and_replace() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("store");
        let chain = sample_chain();
        let manifest = StoreManifest {
            schema_version: STORE_SCHEMA_VERSION,
            scenario: "s".into(),
            seed: 9,
            chains: vec![chain.id.clone()],
        };
        save_store(&root, &manifest, std::slice::from_ref(&chain)).unwrap();
        save_store(&root, &manifest, std::slice::from_ref(&chain)).unwrap();
        let (m, chains) = load_store(&root).unwrap();
        assert_eq!(m, manifest);
        assert_eq!(chains, vec![chain]);
        assert!(!staging_dir(&root).exists());
    }
}
