//! BFT endorsement for consortium blocks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BlockBody, Endorsement, LedgerError, Validator};
use crate::identity::Keypair;

/// `f` for a validator set of size `3f+1`.
pub fn fault_tolerance(n: usize) -> Result<usize, LedgerError> {
    if n % 3 == 1 {
        Ok((n - 1) / 3)
    } else {
        Err(LedgerError::InvalidValidatorSet(n))
    }
}

/// Endorsements required to append: `2f+1`.
pub fn quorum_size(n: usize) -> Result<usize, LedgerError> {
    Ok(2 * fault_tolerance(n)? + 1)
}

/// Validator key holders plus the subset that is simulated as faulty (silent).
#[derive(Clone, Debug)]
pub struct Committee {
    keys: Vec<Keypair>,
    faulty: BTreeSet<usize>,
}

impl Committee {
    pub fn generate(n: usize, seed: u64) -> Self {
        let keys = (0..n).map(|i| Keypair::from_seed(&format!("validator/{i}"), seed)).collect();
        Self { keys, faulty: BTreeSet::new() }
    }

    pub fn with_faulty(mut self, indices: impl IntoIterator<Item = usize>) -> Self {
        self.faulty.extend(indices.into_iter().filter(|i| *i < self.keys.len()));
        self
    }

    /// Marks `count` validators faulty, chosen deterministically from `seed`.
    pub fn with_random_faults(self, count: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..self.keys.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(count);
        self.with_faulty(idx)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn faulty(&self) -> &BTreeSet<usize> {
        &self.faulty
    }

    pub fn keys(&self) -> &[Keypair] {
        &self.keys
    }

    pub fn validators(&self) -> Vec<Validator> {
        self.keys.iter().map(|k| Validator { address: k.address(), public_key: k.public_key() }).collect()
    }

    /// Signatures from every non-faulty validator, in validator order.
    pub fn endorse(&self, body: &BlockBody, chain_id: &str) -> Vec<Endorsement> {
        let message = body.endorsement_message(chain_id);
        self.keys
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.faulty.contains(i))
            .map(|(_, k)| Endorsement { validator: k.address(), signature: k.sign(&message) })
            .collect()
    }
}

/// Gathers endorsements for a candidate body. The set must have size `3f+1`.
pub fn collect_endorsements(
    body: &BlockBody,
    chain_id: &str,
    committee: &Committee,
) -> Result<Vec<Endorsement>, LedgerError> {
    fault_tolerance(committee.len())?;
    Ok(committee.endorse(body, chain_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::Hash32;

    fn body() -> BlockBody {
        BlockBody { index: 1, prev_hash: Hash32::ZERO, timestamp: 1, transactions: vec![] }
    }

    #[test]
    fn sizes_of_form_3f_plus_1() {
        assert_eq!(fault_tolerance(1), Ok(0));
        assert_eq!(fault_tolerance(4), Ok(1));
        assert_eq!(fault_tolerance(7), Ok(2));
        assert_eq!(quorum_size(4), Ok(3));
        assert_eq!(quorum_size(7), Ok(5));
        for n in [0, 2, 3, 5, 6, 8] {
            assert_eq!(fault_tolerance(n), Err(LedgerError::InvalidValidatorSet(n)));
        }
    }

    #[test]
    fn four_honest_validators_endorse() {
        let c = Committee::generate(4, 1);
        assert_eq!(collect_endorsements(&body(), "c", &c).unwrap().len(), 4);
    }

    #[test]
    fn one_faulty_of_four_leaves_quorum() {
        let c = Committee::generate(4, 1).with_faulty([2]);
        let ends = collect_endorsements(&body(), "c", &c).unwrap();
        assert_eq!(ends.len(), 3);
        assert!(ends.len() >= quorum_size(4).unwrap());
    }

    #[test]
    fn size_five_rejected() {
        let c = Committee::generate(5, 1);
        assert!(matches!(collect_endorsements(&body(), "c", &c), Err(LedgerError::InvalidValidatorSet(5))));
    }

    #[test]
    fn random_faults_are_seeded() {
        let a = Committee::generate(7, 1).with_random_faults(2, 42);
        let b = Committee::generate(7, 1).with_random_faults(2, 42);
        assert_eq!(a.faulty(), b.faulty());
        assert_eq!(a.faulty().len(), 2);
    }
}
