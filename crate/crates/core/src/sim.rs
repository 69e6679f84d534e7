//! Inventory rounds over a selected subset: framed slotted ALOHA with a
//! floating-point Q and a parametric air-time model.
//!
//! Within a frame every collided slot raises `Qfp` by `q_step` and every empty
//! slot lowers it, clamped to `[0, 15]`; the next frame has `2^round(Qfp)`
//! slots. Frames are charged in full. The round ends after the frame in which
//! the last responder was singulated; with no responders at all the reader
//! still listens to one frame of `2^q_initial` empty slots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::gen2::{Population, ReplyMode, SelField, SelectCommand};

pub const MAX_Q: u8 = 15;

/// PC word plus CRC-16 sent alongside a full EPC reply.
pub const FULL_REPLY_FRAMING_BITS: usize = 32;

/// Air-time costs in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub t_select_cmd: f64,
    pub t_query_cmd: f64,
    pub t_empty_slot: f64,
    pub t_collision_slot: f64,
    pub t_single_slot_overhead: f64,
    pub t_bit: f64,
    /// Re-arming the reader with another ROSpec once 16 AISpecs are used up.
    pub t_respec: f64,
    pub q_initial: u8,
    pub q_step: f64,
}

const DEFAULT_TIMING: &str = include_str!("../data/timing_default.conf");

impl Default for TimingModel {
    fn default() -> Self {
        Self::parse(DEFAULT_TIMING).expect("bundled timing model is valid")
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<()> {
        let times = [
            ("t_select_cmd", self.t_select_cmd),
            ("t_query_cmd", self.t_query_cmd),
            ("t_empty_slot", self.t_empty_slot),
            ("t_collision_slot", self.t_collision_slot),
            ("t_single_slot_overhead", self.t_single_slot_overhead),
            ("t_bit", self.t_bit),
            ("t_respec", self.t_respec),
        ];
        for (name, v) in times {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.q_initial > MAX_Q {
            return Err(Error::Config(format!("q_initial {} > {MAX_Q}", self.q_initial)));
        }
        if !(0.1..=0.5).contains(&self.q_step) {
            return Err(Error::Config(format!("q_step {} outside [0.1, 0.5]", self.q_step)));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Every key is required.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |key: &str| -> Result<String> {
            kv.remove(key)
                .ok_or_else(|| Error::Config(format!("missing timing key {key}")))
        };
        let num = |key: &str, v: String| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: not a number: {v}")))
        };
        let model = TimingModel {
            t_select_cmd: num("t_select_cmd", take("t_select_cmd")?)?,
            t_query_cmd: num("t_query_cmd", take("t_query_cmd")?)?,
            t_empty_slot: num("t_empty_slot", take("t_empty_slot")?)?,
            t_collision_slot: num("t_collision_slot", take("t_collision_slot")?)?,
            t_single_slot_overhead: num("t_single_slot_overhead", take("t_single_slot_overhead")?)?,
            t_bit: num("t_bit", take("t_bit")?)?,
            t_respec: num("t_respec", take("t_respec")?)?,
            q_initial: take("q_initial")?
                .parse()
                .map_err(|_| Error::Config("q_initial: not an integer".into()))?,
            q_step: num("q_step", take("q_step")?)?,
        };
        if let Some(extra) = kv.keys().next() {
            return Err(Error::Config(format!("unknown timing key {extra}")));
        }
        model.validate()?;
        Ok(model)
    }

    pub fn to_config(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "t_select_cmd = {}", self.t_select_cmd);
        let _ = writeln!(s, "t_query_cmd = {}", self.t_query_cmd);
        let _ = writeln!(s, "t_empty_slot = {}", self.t_empty_slot);
        let _ = writeln!(s, "t_collision_slot = {}", self.t_collision_slot);
        let _ = writeln!(s, "t_single_slot_overhead = {}", self.t_single_slot_overhead);
        let _ = writeln!(s, "t_bit = {}", self.t_bit);
        let _ = writeln!(s, "t_respec = {}", self.t_respec);
        let _ = writeln!(s, "q_initial = {}", self.q_initial);
        let _ = writeln!(s, "q_step = {}", self.q_step);
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical config text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_config().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Slot and command counts of one or more inventory rounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InventoryLog {
    pub n_slots_empty: u64,
    pub n_slots_single: u64,
    pub n_slots_collision: u64,
    pub n_select_cmds: u64,
    /// Query plus every frame restart.
    pub n_query_cmds: u64,
    /// EPC payload bits backscattered by singulated tags.
    pub n_payload_bits: u64,
    pub n_respecs: u64,
    pub responders_read: u64,
    pub air_time: f64,
}

impl InventoryLog {
    /// Air time implied by the counters under `timing`.
    pub fn weighted_air_time(&self, timing: &TimingModel) -> f64 {
        self.n_select_cmds as f64 * timing.t_select_cmd
            + self.n_query_cmds as f64 * timing.t_query_cmd
            + self.n_slots_empty as f64 * timing.t_empty_slot
            + self.n_slots_collision as f64 * timing.t_collision_slot
            + self.n_slots_single as f64 * timing.t_single_slot_overhead
            + self.n_payload_bits as f64 * timing.t_bit
            + self.n_respecs as f64 * timing.t_respec
    }

    pub(crate) fn charge_respecs(&mut self, count: u64, timing: &TimingModel) {
        self.n_respecs += count;
        self.air_time += count as f64 * timing.t_respec;
    }
}

impl AddAssign<&InventoryLog> for InventoryLog {
    fn add_assign(&mut self, o: &InventoryLog) {
        self.n_slots_empty += o.n_slots_empty;
        self.n_slots_single += o.n_slots_single;
        self.n_slots_collision += o.n_slots_collision;
        self.n_select_cmds += o.n_select_cmds;
        self.n_query_cmds += o.n_query_cmds;
        self.n_payload_bits += o.n_payload_bits;
        self.n_respecs += o.n_respecs;
        self.responders_read += o.responders_read;
        self.air_time += o.air_time;
    }
}

fn reply_bits(mode: ReplyMode, epc_bits: usize) -> usize {
    match mode {
        ReplyMode::FullEpc => epc_bits + FULL_REPLY_FRAMING_BITS,
        ReplyMode::Truncated { length, .. } => length,
    }
}

/// Broadcasts `chain`, queries the SL-asserted tags and singulates all of them.
///
/// Returns the responder indices (ascending) and the round's log.
pub fn run_inventory(
    population: &mut Population,
    chain: &[SelectCommand],
    timing: &TimingModel,
    rng_seed: u64,
) -> Result<(Vec<usize>, InventoryLog)> {
    let mode = population.apply_chain(chain)?;
    let responders = population.query_responders(SelField::Asserted);
    let payload: Vec<usize> = responders
        .iter()
        .map(|&i| reply_bits(mode, population.tags()[i].epc().len()))
        .collect();

    let mut log = InventoryLog {
        n_select_cmds: chain.len() as u64,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut qfp = f64::from(timing.q_initial);
    // Positions into `responders` still waiting to be singulated.
    let mut unread: Vec<usize> = (0..responders.len()).collect();
    let mut slot_of = Vec::with_capacity(unread.len());
    let mut occupancy: Vec<u32> = Vec::new();

    loop {
        let q = qfp.round().clamp(0.0, f64::from(MAX_Q)) as u32;
        let frame = 1usize << q;
        log.n_query_cmds += 1;

        occupancy.clear();
        occupancy.resize(frame, 0);
        slot_of.clear();
        for _ in &unread {
            let s = rng.gen_range(0..frame);
            occupancy[s] += 1;
            slot_of.push(s);
        }
        for &count in &occupancy {
            match count {
                0 => {
                    log.n_slots_empty += 1;
                    qfp = (qfp - timing.q_step).max(0.0);
                }
                1 => log.n_slots_single += 1,
                _ => {
                    log.n_slots_collision += 1;
                    qfp = (qfp + timing.q_step).min(f64::from(MAX_Q));
                }
            }
        }
        let mut k = 0;
        unread.retain(|&pos| {
            let read = occupancy[slot_of[k]] == 1;
            k += 1;
            if read {
                log.n_payload_bits += payload[pos] as u64;
            }
            !read
        });
        if unread.is_empty() {
            break;
        }
    }

    log.responders_read = log.n_slots_single;
    log.air_time = log.weighted_air_time(timing);
    Ok((responders, log))
}

/// Writes `digest` into the first bits of tag `index`'s user bank.
pub fn write_membank3(population: &mut Population, index: usize, digest: &Bits) -> Result<()> {
    let tag = population.tag_mut(index)?;
    let capacity = tag.user().len();
    if digest.len() > capacity {
        return Err(Error::CapacityExceeded {
            tag: index,
            len: digest.len(),
            capacity,
        });
    }
    tag.user_mut().overwrite(0, digest).expect("length checked");
    Ok(())
}

/// Seed for the `index`-th sub-run of a run seeded with `seed` (SplitMix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen2::{Action, MemBank, TagRecord};

    fn population(n: usize) -> Population {
        (0..n)
            .map(|i| {
                let mut epc = Bits::zeros(64);
                epc.concat(&Bits::from_u64(i as u64, 32));
                TagRecord::blank(epc, 128).unwrap()
            })
            .collect()
    }

    fn select_all() -> SelectCommand {
        SelectCommand::select(Action::AssertDeassert, MemBank::User, 0, Bits::new()).unwrap()
    }

    fn select_none() -> SelectCommand {
        SelectCommand::select(Action::AssertDeassert, MemBank::User, 0, Bits::ones(1)).unwrap()
    }

    #[test]
    fn bundled_timing_is_valid() {
        let t = TimingModel::default();
        t.validate().unwrap();
        assert_eq!(TimingModel::parse(&t.to_config()).unwrap(), t);
        assert_eq!(t.fingerprint().len(), 16);
    }

    #[test]
    fn timing_validation() {
        let base = TimingModel::default();
        for bad in [
            TimingModel { q_step: 0.6, ..base.clone() },
            TimingModel { q_initial: 16, ..base.clone() },
            TimingModel { t_bit: 0.0, ..base.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(TimingModel::parse("t_bit = 1").is_err());
        let extra = format!("{}bogus = 1\n", TimingModel::default().to_config());
        assert!(TimingModel::parse(&extra).is_err());
    }

    #[test]
    fn zero_responders_cost_one_empty_frame() {
        let t = TimingModel::default();
        let mut pop = population(10);
        let chain = [select_none(), SelectCommand::one_bit_truncate()];
        let (resp, log) = run_inventory(&mut pop, &chain, &t, 7).unwrap();
        assert!(resp.is_empty());
        assert_eq!(log.responders_read, 0);
        let frame = f64::from(1u32 << t.q_initial);
        let expected = 2.0 * t.t_select_cmd + t.t_query_cmd + frame * t.t_empty_slot;
        assert!((log.air_time - expected).abs() < 1e-9);
    }

    #[test]
    fn single_responder_never_collides() {
        let t = TimingModel::default();
        for seed in 0..50 {
            let mut pop = population(1);
            let (resp, log) = run_inventory(&mut pop, &[select_all()], &t, seed).unwrap();
            assert_eq!(resp, vec![0]);
            assert_eq!(log.n_slots_single, 1);
            assert_eq!(log.n_slots_collision, 0);
        }
    }

    #[test]
    fn log_is_self_consistent_and_deterministic() {
        let t = TimingModel::default();
        let run = |seed| {
            let mut pop = population(120);
            run_inventory(&mut pop, &[select_all()], &t, seed).unwrap()
        };
        let (resp, log) = run(3);
        assert_eq!(resp.len(), 120);
        assert_eq!(log.responders_read, 120);
        assert_eq!(log.n_payload_bits, 120 * (96 + 32));
        assert!((log.weighted_air_time(&t) - log.air_time).abs() < 1e-6);
        assert_eq!(run(3), (resp, log.clone()));
        assert_ne!(run(4).1, log);
    }

    #[test]
    fn write_then_match() {
        let mut pop = population(2);
        let digest = Bits::from_hex("0123456789ABCDEF0123456789ABCDEF", None).unwrap();
        write_membank3(&mut pop, 1, &digest).unwrap();
        assert_eq!(pop.tags()[1].user(), &digest);
        let short = Bits::from_hex("DEADBEEF", None).unwrap();
        write_membank3(&mut pop, 0, &short).unwrap();
        assert_eq!(pop.tags()[0].user().slice(0, 32).unwrap(), short);
        assert_eq!(pop.tags()[0].user().len(), 128);
        assert!(write_membank3(&mut pop, 5, &short).is_err());
    }

    #[test]
    fn digest_larger_than_bank_is_rejected() {
        let mut pop: Population = [TagRecord::blank(Bits::zeros(96), 32).unwrap()].into_iter().collect();
        let err = write_membank3(&mut pop, 0, &Bits::zeros(128)).unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { tag: 0, len: 128, capacity: 32 }));
    }
}
