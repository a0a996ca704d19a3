//! Binary Merkle tree with domain-separated hashing.
//!
//! Leaves hash as `SHA-256(0x00 || leaf)` and internal nodes as
//! `SHA-256(0x01 || left || right)`. When a level has an odd number of
//! nodes the last one is promoted unchanged to the next level, so proofs
//! for promoted leaves are shorter than `ceil(log2 n)`.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::leaf::LeafRecord;
use super::CommitmentError;
use crate::model::EpochIndex;

pub type Digest = [u8; 32];

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

pub fn leaf_hash(encoded: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([LEAF_PREFIX]);
    h.update(encoded);
    h.finalize().into()
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update([NODE_PREFIX]);
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// Root committed for an epoch with no records: the hash of the tagged
/// empty string.
pub fn empty_root_digest() -> Digest {
    leaf_hash(&[])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootKind {
    TxRoot,
    CreditRoot,
}

impl RootKind {
    pub const fn tag(self) -> u8 {
        match self {
            RootKind::TxRoot => 0x01,
            RootKind::CreditRoot => 0x02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MerkleRoot {
    #[serde(with = "crate::model::hex_bytes")]
    pub digest: Digest,
    pub kind: RootKind,
    pub epoch: EpochIndex,
}

impl MerkleRoot {
    pub fn sentinel(kind: RootKind, epoch: EpochIndex) -> Self {
        MerkleRoot { digest: empty_root_digest(), kind, epoch }
    }

    pub fn is_sentinel(&self) -> bool {
        self.digest == empty_root_digest()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionProof {
    pub leaf_index: u64,
    pub leaf_count: u64,
    /// Sibling digests ordered from the leaf level towards the root.
    #[serde(with = "digest_vec")]
    pub siblings: Vec<Digest>,
    pub root: MerkleRoot,
}

mod digest_vec {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use super::Digest;

    pub fn serialize<S: Serializer>(v: &[Digest], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(hex::encode))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Digest>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.into_iter()
            .map(|s| {
                let bytes = hex::decode(&s).map_err(de::Error::custom)?;
                bytes.try_into().map_err(|_| de::Error::custom("expected 32-byte digest"))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MerkleTree {
    kind: RootKind,
    epoch: EpochIndex,
    levels: Vec<Vec<Digest>>,
}

impl MerkleTree {
    pub fn build(kind: RootKind, epoch: EpochIndex, leaves: &[LeafRecord]) -> Result<Self, CommitmentError> {
        let hashes = leaves.iter().map(|l| leaf_hash(&l.encode())).collect();
        Self::from_leaf_hashes(kind, epoch, hashes)
    }

    pub fn from_leaf_hashes(
        kind: RootKind,
        epoch: EpochIndex,
        leaf_hashes: Vec<Digest>,
    ) -> Result<Self, CommitmentError> {
        if leaf_hashes.is_empty() {
            return Err(CommitmentError::EmptyBatch);
        }
        let mut levels = vec![leaf_hashes];
        while levels.last().map_or(0, Vec::len) > 1 {
            let prev = levels.last().expect("non-empty");
            let next = prev
                .chunks(2)
                .map(|pair| match pair {
                    [l, r] => node_hash(l, r),
                    [single] => *single,
                    _ => unreachable!(),
                })
                .collect();
            levels.push(next);
        }
        Ok(MerkleTree { kind, epoch, levels })
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> MerkleRoot {
        MerkleRoot { digest: self.levels.last().expect("at least one level")[0], kind: self.kind, epoch: self.epoch }
    }

    pub fn leaf_hashes(&self) -> &[Digest] {
        &self.levels[0]
    }

    pub fn prove(&self, index: usize) -> Result<InclusionProof, CommitmentError> {
        let count = self.len();
        if index >= count {
            return Err(CommitmentError::IndexOutOfRange { index, len: count });
        }
        let mut siblings = Vec::new();
        let mut idx = index;
        for level in &self.levels[..self.levels.len() - 1] {
            let sibling = if idx % 2 == 1 { Some(level[idx - 1]) } else { level.get(idx + 1).copied() };
            siblings.extend(sibling);
            idx /= 2;
        }
        Ok(InclusionProof { leaf_index: index as u64, leaf_count: count as u64, siblings, root: self.root() })
    }
}

/// Builds the root for a batch, falling back to the sentinel root when the
/// batch is empty.
pub fn batch_root(kind: RootKind, epoch: EpochIndex, leaves: &[LeafRecord]) -> MerkleRoot {
    match MerkleTree::build(kind, epoch, leaves) {
        Ok(tree) => tree.root(),
        Err(_) => MerkleRoot::sentinel(kind, epoch),
    }
}

/// Recomputes the path from `leaf` and compares it against `root`.
/// Never panics; malformed proofs simply fail.
pub fn verify_inclusion(root: &MerkleRoot, leaf: &LeafRecord, proof: &InclusionProof) -> bool {
    if proof.root != *root || proof.leaf_index >= proof.leaf_count {
        return false;
    }
    let mut acc = leaf_hash(&leaf.encode());
    let mut idx = proof.leaf_index;
    let mut width = proof.leaf_count;
    let mut siblings = proof.siblings.iter();
    while width > 1 {
        if idx % 2 == 1 {
            match siblings.next() {
                Some(s) => acc = node_hash(s, &acc),
                None => return false,
            }
        } else if idx + 1 < width {
            match siblings.next() {
                Some(s) => acc = node_hash(&acc, s),
                None => return false,
            }
        }
        idx /= 2;
        width = width.div_ceil(2);
    }
    siblings.next().is_none() && acc == root.digest
}
