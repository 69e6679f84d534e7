//! Seeded EPC generators.
//!
//! [`sgtin_corpus`] mimics a logistics feed: SGTIN-96 layout (8-bit header
//! `0x30`, 3-bit filter, 3-bit partition, 44-bit company prefix plus item
//! reference, 38-bit serial) drawn from a few dozen companies and product
//! classes, with serials issued sequentially within each class.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::Bits;

const SGTIN96_HEADER: u64 = 0x30;
const PARTITION: u64 = 5;
const SERIAL_BITS: usize = 38;

fn sgtin(filter: u64, company_item: u64, serial: u64) -> Bits {
    let mut epc = Bits::from_u64(SGTIN96_HEADER, 8);
    epc.concat(&Bits::from_u64(filter, 3));
    epc.concat(&Bits::from_u64(PARTITION, 3));
    epc.concat(&Bits::from_u64(company_item, 44));
    epc.concat(&Bits::from_u64(serial, SERIAL_BITS));
    epc
}

/// `n` distinct structured EPCs, fully determined by `seed`.
pub fn sgtin_corpus(n: usize, seed: u64) -> Vec<Bits> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let companies: Vec<u64> = (0..24).map(|_| rng.gen_range(0..1u64 << 24)).collect();
    let mut classes: Vec<(u64, u64, u64)> = Vec::new();
    for &c in &companies {
        for _ in 0..rng.gen_range(2..8) {
            let item = rng.gen_range(0..1u64 << 20);
            let filter = rng.gen_range(0..8);
            classes.push((filter, (c << 20) | item, rng.gen_range(0..1u64 << 30)));
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(n);
    while out.len() < n {
        let (filter, company_item, next) = classes.choose_mut(&mut rng).expect("classes exist");
        let serial = *next & ((1u64 << SERIAL_BITS) - 1);
        *next += 1;
        let epc = sgtin(*filter, *company_item, serial);
        if seen.insert(epc.clone()) {
            out.push(epc);
        }
    }
    out
}

/// `n` distinct uniformly random EPCs of `bits` bits.
pub fn random_epcs<R: Rng + ?Sized>(n: usize, bits: usize, rng: &mut R) -> Vec<Bits> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let epc: Bits = (0..bits).map(|_| rng.gen_bool(0.5)).collect();
        if seen.insert(epc.clone()) {
            out.push(epc);
        }
    }
    out
}

/// `n` distinct random 96-bit EPCs using 64-bit draws (faster than bitwise).
pub fn random_epcs96<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Bits> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut epc = Bits::from_u64(rng.gen::<u32>().into(), 32);
        epc.concat(&Bits::from_u64(rng.gen(), 64));
        if seen.insert(epc.clone()) {
            out.push(epc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_seeded_and_distinct() {
        let a = sgtin_corpus(500, 7);
        assert_eq!(a, sgtin_corpus(500, 7));
        assert_ne!(a, sgtin_corpus(500, 8));
        let set: HashSet<_> = a.iter().collect();
        assert_eq!(set.len(), 500);
        assert!(a.iter().all(|e| e.len() == 96 && e.slice_value(0, 8) == Some(0x30)));
    }

    #[test]
    fn random_epcs_have_requested_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = random_epcs(50, 128, &mut rng);
        assert!(e.iter().all(|b| b.len() == 128));
        let e = random_epcs96(50, &mut rng);
        assert!(e.iter().all(|b| b.len() == 96));
    }
}
