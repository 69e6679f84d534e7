use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::gen2::{Action, MemBank, SelectCommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TashOp {
    And,
    Or,
    Xor,
}

impl TashOp {
    pub const ALL: [TashOp; 3] = [TashOp::And, TashOp::Or, TashOp::Xor];

    pub fn action(self) -> Action {
        match self {
            TashOp::And => Action::NothingDeassert,
            TashOp::Or => Action::AssertNothing,
            TashOp::Xor => Action::DeassertNothing,
        }
    }

    pub fn from_action(action: Action) -> Result<Self> {
        match action {
            Action::NothingDeassert => Ok(TashOp::And),
            Action::AssertNothing => Ok(TashOp::Or),
            Action::DeassertNothing => Ok(TashOp::Xor),
            other => Err(Error::InvalidChain(format!(
                "action {} is not a tash operator",
                other.code()
            ))),
        }
    }

    /// Folds one step into a tag's running membership.
    pub fn fold(self, acc: bool, matched: bool) -> bool {
        match self {
            TashOp::And => acc && matched,
            TashOp::Or => acc || matched,
            TashOp::Xor => acc && !matched,
        }
    }
}

impl fmt::Display for TashOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TashOp::And => "and",
            TashOp::Or => "or",
            TashOp::Xor => "xor",
        })
    }
}

impl FromStr for TashOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "and" => Ok(TashOp::And),
            "or" => Ok(TashOp::Or),
            "xor" => Ok(TashOp::Xor),
            other => Err(Error::InvalidChain(format!("unknown operator {other:?}"))),
        }
    }
}

/// A left-associative operator expression over seeds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TashChainSpec {
    first: usize,
    rest: Vec<(TashOp, usize)>,
}

impl TashChainSpec {
    pub fn single(seed: usize) -> Self {
        TashChainSpec {
            first: seed,
            rest: Vec::new(),
        }
    }

    pub fn then(mut self, op: TashOp, seed: usize) -> Self {
        self.rest.push((op, seed));
        self
    }

    pub fn and(self, seed: usize) -> Self {
        self.then(TashOp::And, seed)
    }

    pub fn or(self, seed: usize) -> Self {
        self.then(TashOp::Or, seed)
    }

    pub fn xor(self, seed: usize) -> Self {
        self.then(TashOp::Xor, seed)
    }

    /// `seeds[0]` followed by `seeds[1..]` each combined with `op`.
    pub fn uniform(op: TashOp, seeds: &[usize]) -> Result<Self> {
        let (&first, rest) = seeds
            .split_first()
            .ok_or_else(|| Error::InvalidChain("no seeds".into()))?;
        Ok(rest.iter().fold(Self::single(first), |c, &s| c.then(op, s)))
    }

    /// From `(action code, seed)` pairs: the first code must be 0 and the
    /// rest drawn from {1, 2, 5}.
    pub fn from_actions(steps: &[(u8, usize)]) -> Result<Self> {
        let (&(code, first), rest) = steps
            .split_first()
            .ok_or_else(|| Error::InvalidChain("empty chain".into()))?;
        if code != 0 {
            return Err(Error::InvalidChain(format!("first action must be 0, got {code}")));
        }
        let rest = rest
            .iter()
            .map(|&(code, seed)| Ok((TashOp::from_action(Action::try_from(code)?)?, seed)))
            .collect::<Result<_>>()?;
        Ok(TashChainSpec { first, rest })
    }

    pub fn len(&self) -> usize {
        1 + self.rest.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn seeds(&self) -> Vec<usize> {
        std::iter::once(self.first)
            .chain(self.rest.iter().map(|&(_, s)| s))
            .collect()
    }

    pub fn first_seed(&self) -> usize {
        self.first
    }

    pub fn steps(&self) -> &[(TashOp, usize)] {
        &self.rest
    }

    pub fn action_codes(&self) -> Vec<u8> {
        std::iter::once(0)
            .chain(self.rest.iter().map(|(op, _)| op.action().code()))
            .collect()
    }

    /// Checks every slice fits a digest of `digest_len` bits.
    pub fn validate(&self, dimension: u32, digest_len: usize) -> Result<()> {
        if dimension > super::MAX_TABLE_DIMENSION {
            return Err(Error::InvalidParams(format!(
                "dimension {dimension} > {}",
                super::MAX_TABLE_DIMENSION
            )));
        }
        for seed in self.seeds() {
            if seed + dimension as usize > digest_len || (seed >= digest_len && dimension > 0) {
                return Err(Error::InvalidParams(format!(
                    "seed {seed} with dimension {dimension} overruns a {digest_len}-bit digest"
                )));
            }
        }
        Ok(())
    }

    /// Whether a tag with these per-seed slice values lands in `entry`.
    pub fn membership(&self, values: &[u64], entry: u64) -> bool {
        debug_assert_eq!(values.len(), self.len());
        self.rest
            .iter()
            .zip(&values[1..])
            .fold(values[0] == entry, |acc, ((op, _), &v)| op.fold(acc, v == entry))
    }

    /// Seed pairs whose slices overlap at `dimension`.
    pub fn overlapping_seeds(&self, dimension: u32) -> Vec<(usize, usize)> {
        let seeds = self.seeds();
        let mut out = Vec::new();
        for (a, &r1) in seeds.iter().enumerate() {
            for &r2 in &seeds[a + 1..] {
                if !super::seed_independence_check(r1, r2, dimension) {
                    out.push((r1, r2));
                }
            }
        }
        out
    }
}

impl fmt::Display for TashChainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F({})", self.first)?;
        for (op, seed) in &self.rest {
            write!(f, " {op} F({seed})")?;
        }
        Ok(())
    }
}

fn selection(entry: u64, dimension: u32, chain: &TashChainSpec) -> Result<Vec<SelectCommand>> {
    if dimension > 64 || (dimension < 64 && entry >> dimension != 0) {
        return Err(Error::InvalidEntry {
            index: entry,
            size: 1u64.checked_shl(dimension).unwrap_or(0),
        });
    }
    let mask = Bits::from_u64(entry, dimension as usize);
    let head = SelectCommand::select(Action::AssertDeassert, MemBank::User, chain.first, mask.clone())?;
    let mut out = vec![head];
    for &(op, seed) in &chain.rest {
        out.push(SelectCommand::select(op.action(), MemBank::User, seed, mask.clone())?);
    }
    Ok(out)
}

/// The selects of entry-inventory `entry` followed by the one-bit truncate.
pub fn entry_inventory_chain(
    entry: u64,
    dimension: u32,
    chain: &TashChainSpec,
) -> Result<Vec<SelectCommand>> {
    let mut cmds = selection(entry, dimension, chain)?;
    cmds.push(SelectCommand::one_bit_truncate());
    Ok(cmds)
}

/// The selects of entry-inventory `entry` without truncation.
pub fn entry_selects(entry: u64, dimension: u32, chain: &TashChainSpec) -> Result<Vec<SelectCommand>> {
    selection(entry, dimension, chain)
}
