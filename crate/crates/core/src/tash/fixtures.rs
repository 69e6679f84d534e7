//! Small hand-built populations with known tables.

use crate::bits::Bits;
use crate::gen2::{DEFAULT_EPC_BITS, DEFAULT_USER_BITS, Population, TagRecord};

/// Seed and dimension of [`eight_tag_population`].
pub const EIGHT_TAG_PARAMS: (usize, u32) = (5, 2);

/// Tash values of the eight tags at [`EIGHT_TAG_PARAMS`].
pub const EIGHT_TAG_VALUES: [u64; 8] = [0, 0, 0, 2, 2, 2, 2, 3];

/// The table those values produce.
pub const EIGHT_TAG_TABLE: [u64; 4] = [3, 0, 4, 1];

/// Seeds `(r1, r2)` of [`operator_demo_population`], dimension 3.
pub const OPERATOR_DEMO_SEEDS: (usize, usize) = (0, 3);

/// Per-tag `(f(r1), f(r2))` of [`operator_demo_population`].
pub const OPERATOR_DEMO_VALUES: [(u64, u64); 7] =
    [(1, 0), (1, 1), (0, 3), (2, 6), (5, 2), (5, 5), (5, 5)];

fn synthetic_tag(serial: u64, slices: &[(usize, u32, u64)]) -> TagRecord {
    let epc = Bits::from_u64(serial, 64);
    let mut full = Bits::zeros(DEFAULT_EPC_BITS - 64);
    full.concat(&epc);
    let mut user = Bits::zeros(DEFAULT_USER_BITS);
    for &(seed, dim, value) in slices {
        user.overwrite(seed, &Bits::from_u64(value, dim as usize))
            .expect("slice inside the user bank");
    }
    TagRecord::new(full, user).expect("valid synthetic tag")
}

/// Eight tags whose slice at seed 5, dimension 2 is [`EIGHT_TAG_VALUES`].
pub fn eight_tag_population() -> Population {
    let (seed, dim) = EIGHT_TAG_PARAMS;
    EIGHT_TAG_VALUES
        .iter()
        .enumerate()
        .map(|(i, &v)| synthetic_tag(i as u64 + 1, &[(seed, dim, v)]))
        .collect()
}

/// Seven tags for the AND/OR/XOR walk-through at dimension 3.
pub fn operator_demo_population() -> Population {
    let (r1, r2) = OPERATOR_DEMO_SEEDS;
    OPERATOR_DEMO_VALUES
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| synthetic_tag(i as u64 + 1, &[(r1, 3, a), (r2, 3, b)]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tash::{TashParams, tash_value};

    #[test]
    fn values_are_as_declared() {
        let pop = eight_tag_population();
        let p = TashParams::new(5, 2, 128).unwrap();
        let got: Vec<u64> = pop.tags().iter().map(|t| tash_value(t, &p).unwrap()).collect();
        assert_eq!(got, EIGHT_TAG_VALUES);

        let pop = operator_demo_population();
        let p1 = TashParams::new(0, 3, 128).unwrap();
        let p2 = TashParams::new(3, 3, 128).unwrap();
        for (t, &(a, b)) in pop.tags().iter().zip(&OPERATOR_DEMO_VALUES) {
            assert_eq!((tash_value(t, &p1).unwrap(), tash_value(t, &p2).unwrap()), (a, b));
        }
    }
}
