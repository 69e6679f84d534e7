//! Most-significant-first bitstrings.
//!
//! Bit 0 is the first bit of a memory bank, and integer views of a slice read
//! the slice big-endian. Hex renderings pad the final nibble with zero bits.

use std::fmt;

use bitvec::field::BitField;
use bitvec::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits(BitVec<u8, Msb0>);

impl Bits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Bits(bitvec![u8, Msb0; 0; len])
    }

    pub fn ones(len: usize) -> Self {
        Bits(bitvec![u8, Msb0; 1; len])
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Bits(bits.into_iter().collect())
    }

    /// Parses a string of `0`/`1` characters; `_` and spaces are ignored.
    pub fn from_binary(s: &str) -> Result<Self> {
        let mut out = BitVec::new();
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                '_' | ' ' => {}
                _ => return Err(Error::InvalidHex(s.to_string())),
            }
        }
        Ok(Bits(out))
    }

    /// `value` rendered in `width` bits, most significant first.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64, "width {width} exceeds 64 bits");
        let mut out = Self::zeros(width);
        if width > 0 {
            out.0.store_be(value & mask_low(width));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Bits(BitVec::from_slice(bytes))
    }

    /// Parses hex digits. The bit length is four times the digit count unless
    /// `len` trims it further.
    pub fn from_hex(s: &str, len: Option<usize>) -> Result<Self> {
        let digits: String = s.trim().chars().filter(|c| *c != '_').collect();
        let digits = digits
            .strip_prefix("0x")
            .or_else(|| digits.strip_prefix("0X"))
            .unwrap_or(&digits);
        let mut out = BitVec::<u8, Msb0>::with_capacity(digits.len() * 4);
        for c in digits.chars() {
            let nibble = c.to_digit(16).ok_or_else(|| Error::InvalidHex(s.to_string()))?;
            for shift in (0..4).rev() {
                out.push((nibble >> shift) & 1 == 1);
            }
        }
        if let Some(len) = len {
            if len > out.len() {
                return Err(Error::InvalidHex(s.to_string()));
            }
            out.truncate(len);
        }
        Ok(Bits(out))
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.len().div_ceil(4));
        for chunk in self.0.chunks(4) {
            let mut nibble = 0u32;
            for (k, bit) in chunk.iter().enumerate() {
                if *bit {
                    nibble |= 1 << (3 - k);
                }
            }
            s.push(char::from_digit(nibble, 16).unwrap().to_ascii_uppercase());
        }
        s
    }

    pub fn to_binary(&self) -> String {
        self.0.iter().map(|b| if *b { '1' } else { '0' }).collect()
    }

    /// Packs into bytes, zero-padding the last byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = self.0.clone();
        v.set_uninitialized(false);
        v.into_vec()
    }

    /// Packs into 16-bit words, zero-padding the last word.
    pub fn to_words(&self) -> Vec<u16> {
        self.0
            .chunks(16)
            .map(|c| {
                let v: u16 = c.load_be();
                v << (16 - c.len())
            })
            .collect()
    }

    pub fn from_words(words: &[u16], len: usize) -> Result<Self> {
        if len > words.len() * 16 {
            return Err(Error::Document(format!(
                "{} words cannot hold {len} bits",
                words.len()
            )));
        }
        let mut out = BitVec::<u8, Msb0>::with_capacity(words.len() * 16);
        for w in words {
            for shift in (0..16).rev() {
                out.push((w >> shift) & 1 == 1);
            }
        }
        out.truncate(len);
        Ok(Bits(out))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        self.0.get(index).map(|b| *b)
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.0.set(index, value);
    }

    pub fn push(&mut self, value: bool) {
        self.0.push(value);
    }

    pub fn count_ones(&self) -> usize {
        self.0.count_ones()
    }

    pub fn count_zeros(&self) -> usize {
        self.0.count_zeros()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().by_vals()
    }

    /// Sub-bitstring `[start, start + len)`, or `None` when it runs past the end.
    pub fn slice(&self, start: usize, len: usize) -> Option<Bits> {
        let end = start.checked_add(len)?;
        self.0.get(start..end).map(|s| Bits(s.to_bitvec()))
    }

    /// Big-endian integer value of `[start, start + len)`; `len` is at most 64.
    pub fn slice_value(&self, start: usize, len: usize) -> Option<u64> {
        if len > 64 {
            return None;
        }
        let end = start.checked_add(len)?;
        let s = self.0.get(start..end)?;
        if len == 0 {
            return Some(0);
        }
        Some(s.load_be::<u64>())
    }

    /// Whether `[start, start + pattern.len())` equals `pattern`; `None` when
    /// the window runs past the end.
    pub fn window_equals(&self, start: usize, pattern: &Bits) -> Option<bool> {
        let end = start.checked_add(pattern.len())?;
        self.0.get(start..end).map(|s| s == pattern.0.as_bitslice())
    }

    /// Overwrites `[start, start + src.len())` with `src`.
    pub fn overwrite(&mut self, start: usize, src: &Bits) -> Option<()> {
        let end = start.checked_add(src.len())?;
        self.0.get_mut(start..end)?.copy_from_bitslice(&src.0);
        Some(())
    }

    pub fn concat(&mut self, other: &Bits) {
        self.0.extend_from_bitslice(&other.0);
    }
}

fn mask_low(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() <= 32 {
            write!(f, "Bits({}b:{})", self.len(), self.to_binary())
        } else {
            write!(f, "Bits({}b:0x{})", self.len(), self.to_hex())
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        Bits::from_bools(iter)
    }
}

/// Serialized as `"<len>:<hex>"` so lengths that are not a multiple of four survive.
impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}:{}", self.len(), self.to_hex()))
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let parsed = match s.split_once(':') {
            Some((len, hex)) => len
                .parse::<usize>()
                .map_err(|_| Error::InvalidHex(s.clone()))
                .and_then(|len| Bits::from_hex(hex, Some(len))),
            None => Bits::from_hex(&s, None),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}
