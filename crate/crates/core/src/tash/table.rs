use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::chain::{TashChainSpec, entry_inventory_chain, entry_selects};
use super::slice_of;
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::gen2::Population;
use crate::sim::{InventoryLog, TimingModel, derive_seed, run_inventory};

/// A simulated reader: timing, reply mode and slot randomness.
#[derive(Debug, Clone)]
pub struct Reader {
    pub timing: TimingModel,
    /// Append the one-bit truncate to every entry-inventory.
    pub truncate: bool,
    pub rng_seed: u64,
    /// Entry-inventories per ROSpec before the reader must be re-armed.
    pub aispecs_per_rospec: usize,
}

impl Reader {
    pub fn new(timing: TimingModel, truncate: bool, rng_seed: u64) -> Self {
        Reader {
            timing,
            truncate,
            rng_seed,
            aispecs_per_rospec: 16,
        }
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Reader {
            rng_seed,
            ..self.clone()
        }
    }

    fn respecs(&self, inventories: usize) -> u64 {
        inventories.div_ceil(self.aispecs_per_rospec.max(1)).saturating_sub(1) as u64
    }
}

impl Default for Reader {
    fn default() -> Self {
        Reader::new(TimingModel::default(), true, 0)
    }
}

/// `2^l` entry counts; `None` marks an entry that was not inventoried.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "TableJson", try_from = "TableJson")]
pub struct TashTable {
    dimension: u32,
    entries: Vec<Option<u64>>,
    chain: TashChainSpec,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    l: u32,
    seeds: Vec<usize>,
    chain: Vec<u8>,
    entries: Vec<Option<u64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

impl From<TashTable> for TableJson {
    fn from(t: TashTable) -> Self {
        TableJson {
            l: t.dimension,
            seeds: t.chain.seeds(),
            chain: t.chain.action_codes(),
            entries: t.entries,
            warnings: t.warnings,
        }
    }
}

impl TryFrom<TableJson> for TashTable {
    type Error = Error;

    fn try_from(j: TableJson) -> Result<Self> {
        if j.seeds.len() != j.chain.len() {
            return Err(Error::Document("seeds and chain differ in length".into()));
        }
        let steps: Vec<(u8, usize)> = j.chain.into_iter().zip(j.seeds).collect();
        let chain = TashChainSpec::from_actions(&steps)?;
        let mut t = TashTable::unknown(j.l, chain)?;
        if j.entries.len() != t.entries.len() {
            return Err(Error::Document(format!(
                "{} entries for dimension {}",
                j.entries.len(),
                j.l
            )));
        }
        t.entries = j.entries;
        t.warnings = j.warnings;
        Ok(t)
    }
}

impl TashTable {
    /// A table whose entries are all unknown.
    pub fn unknown(dimension: u32, chain: TashChainSpec) -> Result<Self> {
        if dimension > super::MAX_TABLE_DIMENSION {
            return Err(Error::InvalidParams(format!("dimension {dimension} too large")));
        }
        Ok(TashTable {
            dimension,
            entries: vec![None; 1 << dimension],
            chain,
            warnings: Vec::new(),
        })
    }

    pub fn from_counts(dimension: u32, chain: TashChainSpec, counts: Vec<u64>) -> Result<Self> {
        let mut t = Self::unknown(dimension, chain)?;
        if counts.len() != t.entries.len() {
            return Err(Error::InvalidParams(format!(
                "{} counts for dimension {dimension}",
                counts.len()
            )));
        }
        t.entries = counts.into_iter().map(Some).collect();
        Ok(t)
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn chain(&self) -> &TashChainSpec {
        &self.chain
    }

    pub fn entries(&self) -> &[Option<u64>] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> Option<u64> {
        self.entries.get(index).copied().flatten()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(Option::is_some)
    }

    /// All counts, or an error if any entry is unknown.
    pub fn counts(&self) -> Result<Vec<u64>> {
        self.entries
            .iter()
            .map(|e| e.ok_or(Error::UnknownEntries))
            .collect()
    }

    /// Sum of the known entries.
    pub fn known_total(&self) -> u64 {
        self.entries.iter().flatten().sum()
    }

    pub(crate) fn set(&mut self, index: usize, count: u64) {
        self.entries[index] = Some(count);
    }
}

/// Bit `i` set iff entry `i` is non-zero.
pub fn to_presence_bitmap(table: &TashTable) -> Result<Bits> {
    Ok(table.counts()?.into_iter().map(|c| c > 0).collect())
}

fn check_provisioned(pop: &Population, dimension: u32, chain: &TashChainSpec) -> Result<()> {
    let need = chain.seeds().into_iter().max().unwrap_or(0) + dimension as usize;
    for tag in pop.tags().iter().filter(|t| t.present) {
        if tag.user().len() < need {
            return Err(Error::DigestNotProvisioned {
                epc: tag.epc().to_hex(),
                required: need,
                available: tag.user().len(),
            });
        }
    }
    Ok(())
}

fn run_entries(
    pop: &mut Population,
    dimension: u32,
    chain: &TashChainSpec,
    indices: &[u64],
    reader: &Reader,
) -> Result<(TashTable, Vec<Vec<usize>>, InventoryLog)> {
    check_provisioned(pop, dimension, chain)?;
    let mut table = TashTable::unknown(dimension, chain.clone())?;
    let overlaps = chain.overlapping_seeds(dimension);
    if !overlaps.is_empty() {
        table.warn(format!("overlapping seed slices: {overlaps:?}"));
    }
    let mut log = InventoryLog::default();
    let mut readouts = Vec::with_capacity(indices.len());
    for &entry in indices {
        let cmds = if reader.truncate {
            entry_inventory_chain(entry, dimension, chain)?
        } else {
            entry_selects(entry, dimension, chain)?
        };
        let (responders, round) =
            run_inventory(pop, &cmds, &reader.timing, derive_seed(reader.rng_seed, entry))?;
        table.set(entry as usize, responders.len() as u64);
        log += &round;
        readouts.push(responders);
    }
    log.charge_respecs(reader.respecs(indices.len()), &reader.timing);
    Ok((table, readouts, log))
}

/// Builds the full table with `2^l` simulated entry-inventories.
pub fn tash_table(
    pop: &mut Population,
    dimension: u32,
    chain: &TashChainSpec,
    reader: &Reader,
) -> Result<(TashTable, InventoryLog)> {
    chain.validate(dimension, usize::MAX)?;
    let all: Vec<u64> = (0..1u64 << dimension).collect();
    let (table, _, log) = run_entries(pop, dimension, chain, &all, reader)?;
    Ok((table, log))
}

/// Like [`tash_table`] but also returns, per entry, the indices of the tags
/// singulated in that entry-inventory.
pub fn tash_table_readout(
    pop: &mut Population,
    dimension: u32,
    chain: &TashChainSpec,
    reader: &Reader,
) -> Result<(TashTable, Vec<Vec<usize>>, InventoryLog)> {
    chain.validate(dimension, usize::MAX)?;
    let all: Vec<u64> = (0..1u64 << dimension).collect();
    run_entries(pop, dimension, chain, &all, reader)
}

/// Inventories only `indices`; every other entry stays unknown.
pub fn tash_table_selective(
    pop: &mut Population,
    dimension: u32,
    chain: &TashChainSpec,
    indices: &[u64],
    reader: &Reader,
) -> Result<(TashTable, InventoryLog)> {
    chain.validate(dimension, usize::MAX)?;
    let size = 1u64 << dimension;
    let mut seen = BTreeSet::new();
    for &i in indices {
        if i >= size {
            return Err(Error::InvalidEntry { index: i, size });
        }
        if !seen.insert(i) {
            return Err(Error::DuplicateEntry(i));
        }
    }
    let (table, _, log) = run_entries(pop, dimension, chain, indices, reader)?;
    Ok((table, log))
}

/// Ground truth for a chain: evaluates the operator fold on every present
/// tag's digest directly, without any Select traffic.
pub fn oracle_operator(pop: &Population, dimension: u32, chain: &TashChainSpec) -> Result<TashTable> {
    chain.validate(dimension, usize::MAX)?;
    let seeds = chain.seeds();
    let size = 1u64 << dimension;
    let mut counts = vec![0u64; size as usize];
    let mut values = vec![0u64; seeds.len()];
    for tag in pop.tags().iter().filter(|t| t.present) {
        for (v, &seed) in values.iter_mut().zip(&seeds) {
            *v = slice_of(tag, seed, dimension)?;
        }
        for (entry, count) in counts.iter_mut().enumerate() {
            if chain.membership(&values, entry as u64) {
                *count += 1;
            }
        }
    }
    TashTable::from_counts(dimension, chain.clone(), counts)
}
