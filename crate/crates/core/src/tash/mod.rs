//! Analog on-tag hashing.
//!
//! A tag's user bank holds a precomputed digest of its EPC. The tash value
//! `f_l(t, r)` is the `l`-bit slice of that digest starting at bit `r`, and is
//! read indirectly: a Select whose mask is the entry index `i` over that slice
//! picks exactly the tags hashed into entry `i`. A table of dimension `l` takes
//! `2^l` such entry-inventories.
//!
//! Operators combine several seeds inside one entry-inventory by chaining
//! Selects: the first uses action 0 and later ones use action 2 (AND),
//! 1 (OR) or 5 (XOR, i.e. set difference). The chain folds left to right.

mod chain;
pub mod fixtures;
mod table;

pub use chain::{TashChainSpec, TashOp, entry_inventory_chain, entry_selects};
pub use table::{
    Reader, TashTable, oracle_operator, tash_table, tash_table_readout, tash_table_selective, to_presence_bitmap,
};

use md5::{Digest, Md5};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::gen2::{DEFAULT_USER_BITS, Population, TagRecord};

pub const DIGEST_BITS: usize = 128;

/// Largest dimension a table may be built at.
pub const MAX_TABLE_DIMENSION: u32 = 24;

/// Selects per entry-inventory a reader accepts by default (C1G2Filter limit).
pub const DEFAULT_MAX_CHAIN: usize = 4;

/// MD5 of the EPC packed big-endian into bytes.
pub fn compute_digest(epc: &Bits) -> Bits {
    Bits::from_bytes(&Md5::digest(epc.to_bytes()))
}

/// A present tag whose user bank holds its EPC digest.
pub fn provisioned_tag(epc: Bits) -> Result<TagRecord> {
    let mut user = compute_digest(&epc);
    if user.len() < DEFAULT_USER_BITS {
        user.concat(&Bits::zeros(DEFAULT_USER_BITS - user.len()));
    }
    TagRecord::new(epc, user)
}

/// A population of present, provisioned tags.
pub fn provisioned_population<I: IntoIterator<Item = Bits>>(epcs: I) -> Result<Population> {
    epcs.into_iter().map(provisioned_tag).collect()
}

/// Seed `r`, dimension `l` and the usable digest length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TashParams {
    seed: usize,
    dimension: u32,
    digest_len: usize,
}

impl TashParams {
    /// Requires `seed < digest_len` and `seed + dimension <= digest_len`.
    /// Dimension 0 is allowed and puts every tag in entry 0.
    pub fn new(seed: usize, dimension: u32, digest_len: usize) -> Result<Self> {
        if seed >= digest_len {
            return Err(Error::InvalidParams(format!(
                "seed {seed} outside [0, {}]",
                digest_len.saturating_sub(1)
            )));
        }
        if seed + dimension as usize > digest_len {
            return Err(Error::InvalidParams(format!(
                "dimension {dimension} at seed {seed} overruns a {digest_len}-bit digest"
            )));
        }
        if dimension > 64 {
            return Err(Error::InvalidParams(format!("dimension {dimension} > 64")));
        }
        Ok(TashParams {
            seed,
            dimension,
            digest_len,
        })
    }

    pub fn seed(&self) -> usize {
        self.seed
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn digest_len(&self) -> usize {
        self.digest_len
    }

    pub fn table_size(&self) -> u64 {
        1u64 << self.dimension
    }

    pub fn chain(&self) -> TashChainSpec {
        TashChainSpec::single(self.seed)
    }
}

/// `f_l(t, r)`: the big-endian value of user-bank bits `[r, r + l)`.
pub fn tash_value(tag: &TagRecord, params: &TashParams) -> Result<u64> {
    slice_of(tag, params.seed, params.dimension)
}

pub(crate) fn slice_of(tag: &TagRecord, seed: usize, dimension: u32) -> Result<u64> {
    tag.user()
        .slice_value(seed, dimension as usize)
        .ok_or_else(|| Error::DigestNotProvisioned {
            epc: tag.epc().to_hex(),
            required: seed + dimension as usize,
            available: tag.user().len(),
        })
}

/// Same as [`tash_value`] on a bare digest.
pub fn digest_slice(digest: &Bits, seed: usize, dimension: u32) -> Result<u64> {
    digest
        .slice_value(seed, dimension as usize)
        .ok_or_else(|| Error::InvalidParams(format!(
            "slice [{seed}, {}) outside a {}-bit digest",
            seed + dimension as usize,
            digest.len()
        )))
}

/// True when the slices `[r1, r1 + l)` and `[r2, r2 + l)` share no bit.
pub fn seed_independence_check(r1: usize, r2: usize, l: u32) -> bool {
    let l = l as usize;
    r2 >= r1 + l || r1 >= r2 + l
}
