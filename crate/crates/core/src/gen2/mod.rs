//! Gen2 tag memory, Select-command semantics and Query participation.
//!
//! Only the SL flag is modeled; inventoried (session) flags are not. A Select
//! whose bitmask runs past the end of the addressed bank does not match the tag,
//! and the miss is logged at `debug` level.

mod fixture;

pub use fixture::{TagFixture, parse_population, render_population};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};

pub const DEFAULT_EPC_BITS: usize = 96;
pub const MIN_EPC_BITS: usize = 96;
pub const MAX_EPC_BITS: usize = 496;
pub const DEFAULT_USER_BITS: usize = 128;
pub const MIN_USER_BITS: usize = 32;
pub const MAX_USER_BITS: usize = 512;
const RESERVED_BITS: usize = 64;
const TID_BITS: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemBank {
    Reserved = 0,
    Epc = 1,
    Tid = 2,
    User = 3,
}

impl TryFrom<u8> for MemBank {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(MemBank::Reserved),
            1 => Ok(MemBank::Epc),
            2 => Ok(MemBank::Tid),
            3 => Ok(MemBank::User),
            _ => Err(Error::InvalidCommand(format!("membank {v} not in 0..=3"))),
        }
    }
}

/// Select target. Only the SL flag (code `100₂`) is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Target {
    #[default]
    Sl,
}

impl Target {
    pub const fn code(self) -> u8 {
        0b100
    }
}

/// What a tag does to its SL flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlTransition {
    Assert,
    Deassert,
    Negate,
    Nothing,
}

impl SlTransition {
    pub fn apply(self, sl: bool) -> bool {
        match self {
            SlTransition::Assert => true,
            SlTransition::Deassert => false,
            SlTransition::Negate => !sl,
            SlTransition::Nothing => sl,
        }
    }
}

/// The eight Select action codes, named `<on match><on mismatch>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Action {
    AssertDeassert = 0,
    AssertNothing = 1,
    NothingDeassert = 2,
    NegateNothing = 3,
    DeassertAssert = 4,
    DeassertNothing = 5,
    NothingAssert = 6,
    NothingNegate = 7,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::AssertDeassert,
        Action::AssertNothing,
        Action::NothingDeassert,
        Action::NegateNothing,
        Action::DeassertAssert,
        Action::DeassertNothing,
        Action::NothingAssert,
        Action::NothingNegate,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn transition(self, matched: bool) -> SlTransition {
        use SlTransition::*;
        let (on_match, on_miss) = match self {
            Action::AssertDeassert => (Assert, Deassert),
            Action::AssertNothing => (Assert, Nothing),
            Action::NothingDeassert => (Nothing, Deassert),
            Action::NegateNothing => (Negate, Nothing),
            Action::DeassertAssert => (Deassert, Assert),
            Action::DeassertNothing => (Deassert, Nothing),
            Action::NothingAssert => (Nothing, Assert),
            Action::NothingNegate => (Nothing, Negate),
        };
        if matched { on_match } else { on_miss }
    }
}

impl TryFrom<u8> for Action {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Action::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::InvalidCommand(format!("action {v} not in 0..=7")))
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a.code()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchOutcome {
    pub matched: bool,
    pub sl_transition: SlTransition,
}

impl MatchOutcome {
    pub fn new(action: Action, matched: bool) -> Self {
        MatchOutcome {
            matched,
            sl_transition: action.transition(matched),
        }
    }
}

/// One simulated tag. Bank 1 is the EPC itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagRecord {
    epc: Bits,
    reserved: Bits,
    tid: Bits,
    user: Bits,
    sl: bool,
    pub present: bool,
}

impl TagRecord {
    /// A present tag with SL deasserted and zeroed reserved/TID banks.
    pub fn new(epc: Bits, user: Bits) -> Result<Self> {
        if !(MIN_EPC_BITS..=MAX_EPC_BITS).contains(&epc.len()) {
            return Err(Error::InvalidTag(format!(
                "EPC of {} bits outside {MIN_EPC_BITS}..={MAX_EPC_BITS}",
                epc.len()
            )));
        }
        if !(MIN_USER_BITS..=MAX_USER_BITS).contains(&user.len()) {
            return Err(Error::InvalidTag(format!(
                "user bank of {} bits outside {MIN_USER_BITS}..={MAX_USER_BITS}",
                user.len()
            )));
        }
        Ok(TagRecord {
            epc,
            reserved: Bits::zeros(RESERVED_BITS),
            tid: Bits::zeros(TID_BITS),
            user,
            sl: false,
            present: true,
        })
    }

    /// A tag with a blank user bank of `user_bits` bits.
    pub fn blank(epc: Bits, user_bits: usize) -> Result<Self> {
        Self::new(epc, Bits::zeros(user_bits))
    }

    pub fn epc(&self) -> &Bits {
        &self.epc
    }

    pub fn user(&self) -> &Bits {
        &self.user
    }

    pub fn sl(&self) -> bool {
        self.sl
    }

    pub fn bank(&self, bank: MemBank) -> &Bits {
        match bank {
            MemBank::Reserved => &self.reserved,
            MemBank::Epc => &self.epc,
            MemBank::Tid => &self.tid,
            MemBank::User => &self.user,
        }
    }

    pub(crate) fn user_mut(&mut self) -> &mut Bits {
        &mut self.user
    }
}

/// A Gen2 Select: target, action, and a (bank, pointer, mask) bitmask. The
/// Length field is the mask length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectCommand {
    target: Target,
    action: Action,
    membank: MemBank,
    pointer: usize,
    mask: Bits,
    truncate: bool,
}

impl SelectCommand {
    pub fn new(
        action: Action,
        membank: MemBank,
        pointer: usize,
        mask: Bits,
        truncate: bool,
    ) -> Result<Self> {
        if truncate && membank != MemBank::Epc {
            return Err(Error::InvalidCommand(format!(
                "truncate requires the EPC bank, got {membank:?}"
            )));
        }
        Ok(SelectCommand {
            target: Target::Sl,
            action,
            membank,
            pointer,
            mask,
            truncate,
        })
    }

    /// A non-truncating select.
    pub fn select(action: Action, membank: MemBank, pointer: usize, mask: Bits) -> Result<Self> {
        Self::new(action, membank, pointer, mask, false)
    }

    /// `S(1,1,1,1,1,1)`: keep SL, ask for a one-bit truncated reply.
    pub fn one_bit_truncate() -> Self {
        SelectCommand {
            target: Target::Sl,
            action: Action::AssertNothing,
            membank: MemBank::Epc,
            pointer: 1,
            mask: Bits::ones(1),
            truncate: true,
        }
    }

    pub fn target(&self) -> Target {
        self.target
    }
    pub fn action(&self) -> Action {
        self.action
    }
    pub fn membank(&self) -> MemBank {
        self.membank
    }
    pub fn pointer(&self) -> usize {
        self.pointer
    }
    pub fn length(&self) -> usize {
        self.mask.len()
    }
    pub fn mask(&self) -> &Bits {
        &self.mask
    }
    pub fn truncate(&self) -> bool {
        self.truncate
    }
}

impl fmt::Display for SelectCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "S({},{},{},{},{},{})",
            self.action.code(),
            self.membank as u8,
            self.pointer,
            self.length(),
            self.mask.to_binary(),
            u8::from(self.truncate)
        )
    }
}

/// `None` when the bitmask does not fit inside the addressed bank.
pub fn try_match(tag: &TagRecord, cmd: &SelectCommand) -> Option<bool> {
    tag.bank(cmd.membank).window_equals(cmd.pointer, &cmd.mask)
}

pub fn matches_bitmask(tag: &TagRecord, cmd: &SelectCommand) -> bool {
    match try_match(tag, cmd) {
        Some(m) => m,
        None => {
            log::debug!(
                "mask {cmd} runs past the {}-bit bank {:?} of tag {}",
                tag.bank(cmd.membank).len(),
                cmd.membank,
                tag.epc
            );
            false
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelectReport {
    pub matched: usize,
    pub out_of_range: usize,
}

/// How responding tags backscatter their EPC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ReplyMode {
    #[default]
    FullEpc,
    /// Backscatter EPC bits `[pointer, pointer + length)`.
    Truncated { pointer: usize, length: usize },
}

impl ReplyMode {
    /// EPC payload bits carried by one reply.
    pub fn payload_bits(self, epc_bits: usize) -> usize {
        match self {
            ReplyMode::FullEpc => epc_bits,
            ReplyMode::Truncated { length, .. } => length,
        }
    }

    pub fn is_truncated(self) -> bool {
        matches!(self, ReplyMode::Truncated { .. })
    }
}

/// Reply mode set by a truncate-enabled select.
pub fn set_truncated_reply(cmd: &SelectCommand) -> Result<ReplyMode> {
    if !cmd.truncate {
        return Err(Error::InvalidCommand(format!("{cmd} does not enable truncation")));
    }
    if cmd.membank != MemBank::Epc {
        return Err(Error::InvalidCommand(format!(
            "{cmd}: truncation requires the EPC bank"
        )));
    }
    Ok(ReplyMode::Truncated {
        pointer: cmd.pointer,
        length: cmd.length(),
    })
}

/// Checks that only the last command of `chain` truncates and returns the
/// reply mode the chain leaves the tags in.
pub fn reply_mode_for_chain(chain: &[SelectCommand]) -> Result<ReplyMode> {
    let mut mode = ReplyMode::FullEpc;
    for (k, cmd) in chain.iter().enumerate() {
        if cmd.truncate {
            if k + 1 != chain.len() {
                return Err(Error::InvalidChain(format!(
                    "truncating select {cmd} at position {k} is not the last of {}",
                    chain.len()
                )));
            }
            mode = set_truncated_reply(cmd)?;
        }
    }
    Ok(mode)
}

/// The Query `Sel` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SelField {
    All,
    /// `10₂`
    Deasserted,
    /// `11₂`
    #[default]
    Asserted,
}

impl SelField {
    pub fn code(self) -> u8 {
        match self {
            SelField::All => 0b00,
            SelField::Deasserted => 0b10,
            SelField::Asserted => 0b11,
        }
    }

    fn admits(self, sl: bool) -> bool {
        match self {
            SelField::All => true,
            SelField::Deasserted => !sl,
            SelField::Asserted => sl,
        }
    }
}

/// The tags in the reader's field, present or not.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Population {
    tags: Vec<TagRecord>,
}

impl Population {
    pub fn new(tags: Vec<TagRecord>) -> Self {
        Population { tags }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[TagRecord] {
        &self.tags
    }

    pub fn tag(&self, index: usize) -> Option<&TagRecord> {
        self.tags.get(index)
    }

    pub fn push(&mut self, tag: TagRecord) {
        self.tags.push(tag);
    }

    pub fn present_count(&self) -> usize {
        self.tags.iter().filter(|t| t.present).count()
    }

    pub fn set_present(&mut self, index: usize, present: bool) -> Result<()> {
        self.tags
            .get_mut(index)
            .ok_or(Error::NoSuchTag(index))?
            .present = present;
        Ok(())
    }

    pub(crate) fn tag_mut(&mut self, index: usize) -> Result<&mut TagRecord> {
        self.tags.get_mut(index).ok_or(Error::NoSuchTag(index))
    }

    /// Broadcasts a non-truncating select to every present tag.
    pub fn apply_select(&mut self, cmd: &SelectCommand) -> Result<SelectReport> {
        if cmd.truncate {
            return Err(Error::InvalidCommand(format!(
                "{cmd} truncates; it sets the reply mode and does not select"
            )));
        }
        let mut report = SelectReport::default();
        for tag in self.tags.iter_mut().filter(|t| t.present) {
            let matched = match try_match(tag, cmd) {
                Some(m) => m,
                None => {
                    report.out_of_range += 1;
                    matches_bitmask(tag, cmd)
                }
            };
            if matched {
                report.matched += 1;
            }
            tag.sl = cmd.action.transition(matched).apply(tag.sl);
        }
        Ok(report)
    }

    /// Applies every select of `chain` in order and returns the reply mode.
    pub fn apply_chain(&mut self, chain: &[SelectCommand]) -> Result<ReplyMode> {
        let mode = reply_mode_for_chain(chain)?;
        for cmd in chain.iter().filter(|c| !c.truncate) {
            self.apply_select(cmd)?;
        }
        Ok(mode)
    }

    /// Indices of present tags admitted by `sel`, ascending.
    pub fn query_responders(&self, sel: SelField) -> Vec<usize> {
        self.tags
            .iter()
            .enumerate()
            .filter(|(_, t)| t.present && sel.admits(t.sl))
            .map(|(i, _)| i)
            .collect()
    }
}

impl FromIterator<TagRecord> for Population {
    fn from_iter<T: IntoIterator<Item = TagRecord>>(iter: T) -> Self {
        Population::new(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn epc_with_prefix(prefix: &str) -> Bits {
        let mut b = Bits::from_binary(prefix).unwrap();
        b.concat(&Bits::zeros(96 - b.len()));
        b
    }

    fn tag_with_user(user_bits: &str) -> TagRecord {
        let mut user = Bits::from_binary(user_bits).unwrap();
        user.concat(&Bits::zeros(128 - user.len()));
        TagRecord::new(epc_with_prefix("0"), user).unwrap()
    }

    fn bits(s: &str) -> Bits {
        Bits::from_binary(s).unwrap()
    }

    #[test]
    fn second_epc_bit() {
        let tag = TagRecord::blank(epc_with_prefix("01"), 128).unwrap();
        let cmd = SelectCommand::select(Action::AssertDeassert, MemBank::Epc, 1, bits("1")).unwrap();
        assert!(matches_bitmask(&tag, &cmd));
    }

    #[test]
    fn empty_mask_matches_everything() {
        let tag = TagRecord::blank(epc_with_prefix("1"), 32).unwrap();
        let cmd = SelectCommand::select(Action::AssertDeassert, MemBank::User, 32, Bits::new()).unwrap();
        assert!(matches_bitmask(&tag, &cmd));
    }

    #[test]
    fn user_bank_window() {
        let tag = tag_with_user("00000 1010");
        let hit = SelectCommand::select(Action::AssertDeassert, MemBank::User, 5, bits("1010")).unwrap();
        let miss = SelectCommand::select(Action::AssertDeassert, MemBank::User, 5, bits("1011")).unwrap();
        assert!(matches_bitmask(&tag, &hit));
        assert!(!matches_bitmask(&tag, &miss));
    }

    #[test]
    fn out_of_range_never_matches() {
        let mut pop = Population::new(vec![TagRecord::blank(epc_with_prefix("0"), 32).unwrap()]);
        let cmd = SelectCommand::select(Action::AssertDeassert, MemBank::User, 30, bits("00000")).unwrap();
        assert!(!matches_bitmask(&pop.tags()[0], &cmd));
        let report = pop.apply_select(&cmd).unwrap();
        assert_eq!(report, SelectReport { matched: 0, out_of_range: 1 });
        assert!(!pop.tags()[0].sl());
    }

    #[test]
    fn action_table() {
        use SlTransition::*;
        let expected = [
            (Assert, Deassert),
            (Assert, Nothing),
            (Nothing, Deassert),
            (Negate, Nothing),
            (Deassert, Assert),
            (Deassert, Nothing),
            (Nothing, Assert),
            (Nothing, Negate),
        ];
        for (code, (m, n)) in expected.into_iter().enumerate() {
            let a = Action::try_from(code as u8).unwrap();
            assert_eq!(a.transition(true), m, "action {code} matching");
            assert_eq!(a.transition(false), n, "action {code} not matching");
            assert_eq!(MatchOutcome::new(a, true).sl_transition, m);
        }
        assert!(Action::try_from(8).is_err());
    }

    #[test]
    fn action_two_keeps_matching_and_drops_others() {
        let mut pop: Population = [tag_with_user("1"), tag_with_user("0")].into_iter().collect();
        pop.tags[0].sl = false;
        pop.tags[1].sl = true;
        let cmd = SelectCommand::select(Action::NothingDeassert, MemBank::User, 0, bits("1")).unwrap();
        pop.apply_select(&cmd).unwrap();
        assert!(!pop.tags()[0].sl(), "matching tag is left alone");
        assert!(!pop.tags()[1].sl(), "non-matching tag is deasserted");
    }

    #[test]
    fn action_zero_selects_everyone_on_full_match() {
        let mut pop: Population = (0..5).map(|_| tag_with_user("1")).collect();
        let cmd = SelectCommand::select(Action::AssertDeassert, MemBank::User, 0, bits("1")).unwrap();
        pop.apply_select(&cmd).unwrap();
        assert_eq!(pop.query_responders(SelField::Asserted).len(), 5);
    }

    #[test]
    fn negate_is_an_involution() {
        let mut pop: Population = ["1", "0", "1", "1"].iter().map(|b| tag_with_user(b)).collect();
        pop.tags[2].sl = true;
        let before: Vec<bool> = pop.tags().iter().map(|t| t.sl()).collect();
        let cmd = SelectCommand::select(Action::NegateNothing, MemBank::User, 0, bits("1")).unwrap();
        pop.apply_select(&cmd).unwrap();
        assert_ne!(pop.tags()[0].sl(), before[0]);
        pop.apply_select(&cmd).unwrap();
        let after: Vec<bool> = pop.tags().iter().map(|t| t.sl()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn absent_tags_are_untouched() {
        let mut pop: Population = (0..3).map(|_| tag_with_user("1")).collect();
        pop.set_present(1, false).unwrap();
        let cmd = SelectCommand::select(Action::AssertDeassert, MemBank::User, 0, bits("1")).unwrap();
        pop.apply_select(&cmd).unwrap();
        assert!(!pop.tags()[1].sl());
        assert_eq!(pop.query_responders(SelField::Asserted), vec![0, 2]);
        assert_eq!(pop.query_responders(SelField::All), vec![0, 2]);
    }

    #[test]
    fn truncation_rules() {
        let s = SelectCommand::one_bit_truncate();
        assert_eq!(s.to_string(), "S(1,1,1,1,1,1)");
        assert_eq!(
            set_truncated_reply(&s).unwrap(),
            ReplyMode::Truncated { pointer: 1, length: 1 }
        );
        assert_eq!(set_truncated_reply(&s).unwrap().payload_bits(96), 1);
        assert!(SelectCommand::new(Action::AssertNothing, MemBank::User, 0, bits("1"), true).is_err());

        let sel = SelectCommand::select(Action::AssertDeassert, MemBank::User, 0, bits("1")).unwrap();
        assert_eq!(reply_mode_for_chain(std::slice::from_ref(&sel)).unwrap(), ReplyMode::FullEpc);
        assert_eq!(ReplyMode::FullEpc.payload_bits(96), 96);
        assert!(reply_mode_for_chain(&[s.clone(), sel.clone()]).is_err());
        assert!(reply_mode_for_chain(&[sel, s]).unwrap().is_truncated());
    }

    #[test]
    fn truncating_select_does_not_partition() {
        let mut pop: Population = (0..2).map(|_| tag_with_user("1")).collect();
        assert!(pop.apply_select(&SelectCommand::one_bit_truncate()).is_err());
        let mode = pop.apply_chain(&[SelectCommand::one_bit_truncate()]).unwrap();
        assert!(mode.is_truncated());
        assert!(pop.tags().iter().all(|t| !t.sl()));
    }

    #[test]
    fn query_defaults_and_empty() {
        assert_eq!(SelField::default(), SelField::Asserted);
        assert_eq!(SelField::Asserted.code(), 0b11);
        assert!(Population::default().query_responders(SelField::Asserted).is_empty());
    }

    #[test]
    fn tag_validation() {
        assert!(TagRecord::blank(Bits::zeros(64), 128).is_err());
        assert!(TagRecord::blank(Bits::zeros(96), 16).is_err());
        assert!(TagRecord::blank(Bits::zeros(96), 1024).is_err());
        let t = TagRecord::blank(Bits::zeros(496), 512).unwrap();
        assert_eq!(t.bank(MemBank::Epc), t.epc());
        assert!(!t.sl());
    }
}
