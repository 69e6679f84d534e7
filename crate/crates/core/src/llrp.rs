//! LLRP document encoding for tash table builds and digest provisioning.
//!
//! Documents use the LLRP Toolkit XML vocabulary: an `ADD_ROSPEC` message
//! whose `AISpec`s each carry one entry-inventory as a list of `C1G2Filter`s,
//! and an `AOSpec` wrapper holding one `AccessSpec` with a `C1G2Write` per
//! tag. Pointers are emitted in the simulator's bank coordinates, where bank 1
//! starts at the first EPC bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::events::Event;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::gen2::{Action, MemBank, SelectCommand};
use crate::tash::{TashChainSpec, TashOp, compute_digest, entry_inventory_chain, entry_selects};

/// Filters an AISpec may carry under the LLRP C1G2 inventory command.
pub const MAX_FILTERS: usize = 4;
/// AISpecs one ROSpec may carry.
pub const MAX_AISPECS: usize = 16;

const NAMESPACE: &str = "http://www.llrp.org/ltk/schema/core/encoding/xml/1.0";
const PROTOCOL: &str = "EPCGlobalClass1Gen2";

/// Capabilities of one reader model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderProfile {
    #[serde(default)]
    pub name: String,
    pub max_filters: usize,
    pub max_aispecs: usize,
    pub truncate: bool,
}

impl ReaderProfile {
    /// The bundled profiles, keyed by model name.
    pub fn bundled() -> BTreeMap<String, ReaderProfile> {
        Self::parse_table(include_str!("../data/reader_profiles.toml")).expect("bundled profiles parse")
    }

    /// A TOML table of `[model]` sections.
    pub fn parse_table(text: &str) -> Result<BTreeMap<String, ReaderProfile>> {
        let mut map: BTreeMap<String, ReaderProfile> =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (name, p) in map.iter_mut() {
            p.name = name.clone();
            if p.max_filters == 0 || p.max_aispecs == 0 {
                return Err(Error::Config(format!("profile {name}: limits must be positive")));
            }
        }
        Ok(map)
    }

    pub fn named(name: &str) -> Result<ReaderProfile> {
        Self::bundled()
            .remove(name)
            .ok_or_else(|| Error::Config(format!("unknown reader profile {name:?}")))
    }

    /// Seeds per chain when an OR over many seeds must be split to fit.
    pub fn seeds_per_chain(&self, truncate: bool) -> usize {
        self.max_filters.saturating_sub(usize::from(truncate)).max(1)
    }
}

impl Default for ReaderProfile {
    fn default() -> Self {
        ReaderProfile {
            name: "gen2".into(),
            max_filters: MAX_FILTERS,
            max_aispecs: MAX_AISPECS,
            truncate: true,
        }
    }
}

/// One entry-inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AiSpec {
    pub entry: u64,
    pub filters: Vec<SelectCommand>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoSpecDoc {
    pub rospec_id: u32,
    pub aispecs: Vec<AiSpec>,
}

/// Write `data` into `membank` at `word_offset` of the tag whose EPC is `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteJob {
    pub target: Bits,
    pub membank: MemBank,
    pub word_offset: usize,
    pub data: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AoSpecDoc {
    pub jobs: Vec<WriteJob>,
}

/// LLRP `C1G2StateUnawareAction` name for a Gen2 action code. The two
/// negating actions have no LLRP equivalent.
pub fn llrp_action_name(action: Action) -> Result<&'static str> {
    Ok(match action {
        Action::AssertDeassert => "Select_Unselect",
        Action::AssertNothing => "Select_DoNothing",
        Action::NothingDeassert => "DoNothing_Unselect",
        Action::DeassertAssert => "Unselect_Select",
        Action::DeassertNothing => "Unselect_DoNothing",
        Action::NothingAssert => "DoNothing_Select",
        Action::NegateNothing | Action::NothingNegate => {
            return Err(Error::DeviceLimit(format!(
                "action {} (negate) has no LLRP encoding",
                action.code()
            )));
        }
    })
}

fn action_from_name(name: &str) -> Result<Action> {
    Action::ALL
        .into_iter()
        .find(|&a| llrp_action_name(a).is_ok_and(|n| n == name))
        .ok_or_else(|| Error::Document(format!("unknown filter action {name:?}")))
}

/// Splits a k-seed OR into chains of at most `per_chain` seeds.
pub fn split_or_chain(seeds: &[usize], per_chain: usize) -> Result<Vec<TashChainSpec>> {
    if per_chain == 0 {
        return Err(Error::InvalidParams("chains need at least one seed".into()));
    }
    seeds
        .chunks(per_chain)
        .map(|group| TashChainSpec::uniform(TashOp::Or, group))
        .collect()
}

/// One AISpec per entry-inventory, `profile.max_aispecs` per ROSpec.
pub fn encode_table_build(
    dimension: u32,
    chain: &TashChainSpec,
    profile: &ReaderProfile,
    truncate: bool,
) -> Result<Vec<RoSpecDoc>> {
    chain.validate(dimension, usize::MAX)?;
    let filters = chain.len() + usize::from(truncate);
    if filters > profile.max_filters {
        let per = profile.seeds_per_chain(truncate);
        let groups = chain.len().div_ceil(per);
        let hint = if truncate && chain.len() <= profile.max_filters {
            " or disable truncation".to_string()
        } else {
            String::new()
        };
        return Err(Error::DeviceLimit(format!(
            "{filters} filters exceed the {} allowed by {}; split into {groups} chains of at most {per} seeds{hint}",
            profile.max_filters, profile.name
        )));
    }
    let aispecs = (0..1u64 << dimension)
        .map(|entry| {
            let filters = if truncate {
                entry_inventory_chain(entry, dimension, chain)?
            } else {
                entry_selects(entry, dimension, chain)?
            };
            Ok(AiSpec { entry, filters })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aispecs
        .chunks(profile.max_aispecs)
        .enumerate()
        .map(|(i, chunk)| RoSpecDoc {
            rospec_id: i as u32 + 1,
            aispecs: chunk.to_vec(),
        })
        .collect())
}

/// One user-bank write of the EPC digest per tag.
pub fn encode_provisioning<'a, I: IntoIterator<Item = &'a Bits>>(epcs: I) -> AoSpecDoc {
    AoSpecDoc {
        jobs: epcs
            .into_iter()
            .map(|epc| WriteJob {
                target: epc.clone(),
                membank: MemBank::User,
                word_offset: 0,
                data: compute_digest(epc).to_words(),
            })
            .collect(),
    }
}

/// Compatibility warnings for running `docs` on a reader with `profile`.
pub fn lint(docs: &[RoSpecDoc], profile: &ReaderProfile) -> Vec<String> {
    let mut out = Vec::new();
    let truncating = docs
        .iter()
        .flat_map(|d| &d.aispecs)
        .any(|a| a.filters.iter().any(SelectCommand::truncate));
    if truncating && !profile.truncate {
        out.push(format!(
            "{} ignores the truncate flag; tags will backscatter full EPCs",
            profile.name
        ));
    }
    for d in docs {
        if d.aispecs.len() > profile.max_aispecs {
            out.push(format!(
                "ROSpec {} has {} AISpecs; {} accepts {}",
                d.rospec_id,
                d.aispecs.len(),
                profile.name,
                profile.max_aispecs
            ));
        }
        for a in &d.aispecs {
            if a.filters.len() > profile.max_filters {
                out.push(format!(
                    "AISpec for entry {} has {} filters; {} accepts {}",
                    a.entry,
                    a.filters.len(),
                    profile.name,
                    profile.max_filters
                ));
            }
        }
    }
    out
}

fn check_rospec(doc: &RoSpecDoc) -> Result<()> {
    if doc.aispecs.is_empty() || doc.aispecs.len() > MAX_AISPECS {
        return Err(Error::DeviceLimit(format!(
            "ROSpec {} has {} AISpecs (1..={MAX_AISPECS} allowed)",
            doc.rospec_id,
            doc.aispecs.len()
        )));
    }
    for a in &doc.aispecs {
        if a.filters.is_empty() || a.filters.len() > MAX_FILTERS {
            return Err(Error::DeviceLimit(format!(
                "entry {} has {} filters (1..={MAX_FILTERS} allowed)",
                a.entry,
                a.filters.len()
            )));
        }
        let truncating = a.filters.iter().filter(|f| f.truncate()).count();
        if truncating > 1 || (truncating == 1 && !a.filters.last().is_some_and(|f| f.truncate())) {
            return Err(Error::InvalidChain(format!(
                "entry {}: the truncating filter must be single and last",
                a.entry
            )));
        }
        for f in &a.filters {
            llrp_action_name(f.action())?;
        }
    }
    Ok(())
}

fn mask_hex(mask: &Bits) -> String {
    if mask.is_empty() { String::new() } else { mask.to_hex() }
}

/// Canonical XML for an ROSpec: LF line endings, two-space indent, fixed
/// element and attribute order. Refuses documents that break device limits.
pub fn render_rospec(doc: &RoSpecDoc) -> Result<String> {
    check_rospec(doc)?;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(s, "<ADD_ROSPEC xmlns=\"{NAMESPACE}\" MessageID=\"{}\">", doc.rospec_id);
    s.push_str("  <ROSpec>\n");
    let _ = writeln!(s, "    <ROSpecID>{}</ROSpecID>", doc.rospec_id);
    s.push_str("    <Priority>0</Priority>\n");
    s.push_str("    <CurrentState>Disabled</CurrentState>\n");
    s.push_str("    <ROBoundarySpec>\n");
    s.push_str("      <ROSpecStartTrigger>\n        <ROSpecStartTriggerType>Null</ROSpecStartTriggerType>\n      </ROSpecStartTrigger>\n");
    s.push_str("      <ROSpecStopTrigger>\n        <ROSpecStopTriggerType>Null</ROSpecStopTriggerType>\n        <DurationTriggerValue>0</DurationTriggerValue>\n      </ROSpecStopTrigger>\n");
    s.push_str("    </ROBoundarySpec>\n");
    for a in &doc.aispecs {
        s.push_str("    <AISpec>\n");
        s.push_str("      <AntennaIDs>0</AntennaIDs>\n");
        s.push_str("      <AISpecStopTrigger>\n        <AISpecStopTriggerType>Tag_Observation</AISpecStopTriggerType>\n        <DurationTrigger>0</DurationTrigger>\n      </AISpecStopTrigger>\n");
        s.push_str("      <InventoryParameterSpec>\n");
        let _ = writeln!(s, "        <InventoryParameterSpecID>{}</InventoryParameterSpecID>", a.entry + 1);
        let _ = writeln!(s, "        <ProtocolID>{PROTOCOL}</ProtocolID>");
        s.push_str("        <AntennaConfiguration>\n");
        s.push_str("          <AntennaID>0</AntennaID>\n");
        s.push_str("          <C1G2InventoryCommand>\n");
        s.push_str("            <TagInventoryStateAware>false</TagInventoryStateAware>\n");
        for f in &a.filters {
            let pad = "            ";
            let _ = writeln!(s, "{pad}<C1G2Filter>");
            let _ = writeln!(s, "{pad}  <T>{}</T>", if f.truncate() { "Truncate" } else { "Do_Not_Truncate" });
            let _ = writeln!(s, "{pad}  <C1G2TagInventoryMask>");
            let _ = writeln!(s, "{pad}    <MB>{}</MB>", f.membank() as u8);
            let _ = writeln!(s, "{pad}    <Pointer>{}</Pointer>", f.pointer());
            let _ = writeln!(s, "{pad}    <TagMask Count=\"{}\">{}</TagMask>", f.length(), mask_hex(f.mask()));
            let _ = writeln!(s, "{pad}  </C1G2TagInventoryMask>");
            let _ = writeln!(s, "{pad}  <C1G2TagInventoryStateUnawareFilterAction>");
            let _ = writeln!(s, "{pad}    <Action>{}</Action>", llrp_action_name(f.action())?);
            let _ = writeln!(s, "{pad}  </C1G2TagInventoryStateUnawareFilterAction>");
            let _ = writeln!(s, "{pad}</C1G2Filter>");
        }
        s.push_str("          </C1G2InventoryCommand>\n");
        s.push_str("        </AntennaConfiguration>\n");
        s.push_str("      </InventoryParameterSpec>\n");
        s.push_str("    </AISpec>\n");
    }
    s.push_str("  </ROSpec>\n");
    s.push_str("</ADD_ROSPEC>\n");
    Ok(s)
}

/// Canonical XML for a provisioning document.
pub fn render_aospec(doc: &AoSpecDoc) -> Result<String> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(s, "<AOSpec xmlns=\"{NAMESPACE}\">");
    for (i, job) in doc.jobs.iter().enumerate() {
        let capacity = crate::gen2::MAX_USER_BITS / 16;
        if job.word_offset + job.data.len() > capacity {
            return Err(Error::DeviceLimit(format!(
                "write job {i} of {} words at offset {} exceeds the user bank",
                job.data.len(),
                job.word_offset
            )));
        }
        let id = i + 1;
        s.push_str("  <AccessSpec>\n");
        let _ = writeln!(s, "    <AccessSpecID>{id}</AccessSpecID>");
        s.push_str("    <AntennaID>0</AntennaID>\n");
        let _ = writeln!(s, "    <ProtocolID>{PROTOCOL}</ProtocolID>");
        s.push_str("    <CurrentState>Disabled</CurrentState>\n");
        s.push_str("    <ROSpecID>0</ROSpecID>\n");
        s.push_str("    <AccessSpecStopTrigger>\n      <AccessSpecStopTrigger>Operation_Count</AccessSpecStopTrigger>\n      <OperationCountValue>1</OperationCountValue>\n    </AccessSpecStopTrigger>\n");
        s.push_str("    <AccessCommand>\n");
        s.push_str("      <C1G2TagSpec>\n        <C1G2TargetTag>\n");
        s.push_str("          <MB>1</MB>\n          <Match>true</Match>\n          <Pointer>0</Pointer>\n");
        let n = job.target.len();
        let _ = writeln!(s, "          <TagMask Count=\"{n}\">{}</TagMask>", Bits::ones(n).to_hex());
        let _ = writeln!(s, "          <TagData Count=\"{n}\">{}</TagData>", job.target.to_hex());
        s.push_str("        </C1G2TargetTag>\n      </C1G2TagSpec>\n");
        s.push_str("      <C1G2Write>\n");
        let _ = writeln!(s, "        <OpSpecID>{id}</OpSpecID>");
        s.push_str("        <AccessPassword>0</AccessPassword>\n");
        let _ = writeln!(s, "        <MB>{}</MB>", job.membank as u8);
        let _ = writeln!(s, "        <WordPointer>{}</WordPointer>", job.word_offset);
        let words: Vec<String> = job.data.iter().map(|w| format!("{w:04X}")).collect();
        let _ = writeln!(s, "        <WriteData Count=\"{}\">{}</WriteData>", job.data.len(), words.join(" "));
        s.push_str("      </C1G2Write>\n");
        s.push_str("    </AccessCommand>\n");
        s.push_str("  </AccessSpec>\n");
    }
    s.push_str("</AOSpec>\n");
    Ok(s)
}

/// A parsed XML element.
#[derive(Debug, Default)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    text: String,
    children: Vec<Node>,
}

impl Node {
    fn child(&self, name: &str) -> Result<&Node> {
        self.children
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Document(format!("<{}> lacks <{name}>", self.name)))
    }

    fn all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    fn attr(&self, name: &str) -> Result<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Document(format!("<{}> lacks attribute {name}", self.name)))
    }

    fn parse<T: std::str::FromStr>(&self) -> Result<T> {
        self.text
            .trim()
            .parse()
            .map_err(|_| Error::Document(format!("<{}>: bad value {:?}", self.name, self.text)))
    }

    fn path(&self, names: &[&str]) -> Result<&Node> {
        names.iter().try_fold(self, |n, name| n.child(name))
    }
}

fn parse_tree(xml: &str) -> Result<Node> {
    let mut reader = quick_xml::Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let bad = |e: &dyn std::fmt::Display| Error::Document(e.to_string());
    let mut stack: Vec<Node> = vec![Node::default()];
    let open = |e: &quick_xml::events::BytesStart| -> Result<Node> {
        let mut node = Node {
            name: String::from_utf8_lossy(e.local_name().as_ref()).into_owned(),
            ..Node::default()
        };
        for a in e.attributes() {
            let a = a.map_err(|e| bad(&e))?;
            let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            let value = a.unescape_value().map_err(|e| bad(&e))?.into_owned();
            node.attrs.push((key, value));
        }
        Ok(node)
    };
    loop {
        match reader.read_event().map_err(|e| bad(&e))? {
            Event::Start(e) => stack.push(open(&e)?),
            Event::Empty(e) => {
                let node = open(&e)?;
                stack.last_mut().expect("root").children.push(node);
            }
            Event::End(_) => {
                let node = stack.pop().expect("balanced");
                stack
                    .last_mut()
                    .ok_or_else(|| Error::Document("unbalanced end tag".into()))?
                    .children
                    .push(node);
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| bad(&e))?;
                stack.last_mut().expect("root").text.push_str(&text);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    let mut root = stack.pop().ok_or_else(|| Error::Document("empty document".into()))?;
    if !stack.is_empty() || root.children.len() != 1 {
        return Err(Error::Document("expected a single root element".into()));
    }
    Ok(root.children.remove(0))
}

fn parse_bits(node: &Node) -> Result<Bits> {
    let count: usize = node
        .attr("Count")?
        .parse()
        .map_err(|_| Error::Document("bad Count".into()))?;
    if count == 0 {
        return Ok(Bits::new());
    }
    Bits::from_hex(node.text.trim(), Some(count))
}

/// Inverse of [`render_rospec`].
pub fn parse_rospec(xml: &str) -> Result<RoSpecDoc> {
    let root = parse_tree(xml)?;
    if root.name != "ADD_ROSPEC" {
        return Err(Error::Document(format!("expected ADD_ROSPEC, found {}", root.name)));
    }
    let rospec = root.child("ROSpec")?;
    let rospec_id = rospec.child("ROSpecID")?.parse()?;
    let mut aispecs = Vec::new();
    for ai in rospec.all("AISpec") {
        let ips = ai.child("InventoryParameterSpec")?;
        let id: u64 = ips.child("InventoryParameterSpecID")?.parse()?;
        let cmd = ips.path(&["AntennaConfiguration", "C1G2InventoryCommand"])?;
        let filters = cmd
            .all("C1G2Filter")
            .map(|f| {
                let mask = f.child("C1G2TagInventoryMask")?;
                let bank: u8 = mask.child("MB")?.parse()?;
                let action = action_from_name(
                    f.path(&["C1G2TagInventoryStateUnawareFilterAction", "Action"])?.text.trim(),
                )?;
                let truncate = match f.child("T")?.text.trim() {
                    "Truncate" => true,
                    "Do_Not_Truncate" | "Unspecified" => false,
                    other => return Err(Error::Document(format!("bad truncate value {other:?}"))),
                };
                SelectCommand::new(
                    action,
                    MemBank::try_from(bank)?,
                    mask.child("Pointer")?.parse()?,
                    parse_bits(mask.child("TagMask")?)?,
                    truncate,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        aispecs.push(AiSpec {
            entry: id.checked_sub(1).ok_or_else(|| Error::Document("spec id 0".into()))?,
            filters,
        });
    }
    Ok(RoSpecDoc { rospec_id, aispecs })
}

/// Inverse of [`render_aospec`].
pub fn parse_aospec(xml: &str) -> Result<AoSpecDoc> {
    let root = parse_tree(xml)?;
    if root.name != "AOSpec" {
        return Err(Error::Document(format!("expected AOSpec, found {}", root.name)));
    }
    let jobs = root
        .all("AccessSpec")
        .map(|spec| {
            let cmd = spec.child("AccessCommand")?;
            let target = parse_bits(cmd.path(&["C1G2TagSpec", "C1G2TargetTag", "TagData"])?)?;
            let write = cmd.child("C1G2Write")?;
            let data_node = write.child("WriteData")?;
            let data = data_node
                .text
                .split_whitespace()
                .map(|w| u16::from_str_radix(w, 16).map_err(|_| Error::Document(format!("bad word {w:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let count: usize = data_node
                .attr("Count")?
                .parse()
                .map_err(|_| Error::Document("bad Count".into()))?;
            if count != data.len() {
                return Err(Error::Document(format!("WriteData Count {count} but {} words", data.len())));
            }
            Ok(WriteJob {
                target,
                membank: MemBank::try_from(write.child("MB")?.parse::<u8>()?)?,
                word_offset: write.child("WordPointer")?.parse()?,
                data,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AoSpecDoc { jobs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impinj() -> ReaderProfile {
        ReaderProfile::named("impinj-r420").unwrap()
    }

    #[test]
    fn bundled_profiles() {
        let p = impinj();
        assert_eq!((p.max_filters, p.max_aispecs, p.truncate), (4, 16, false));
        assert!(ReaderProfile::bundled().contains_key("gen2"));
        assert!(ReaderProfile::named("nope").is_err());
    }

    #[test]
    fn table_build_batches() {
        let p = ReaderProfile::default();
        let docs = encode_table_build(2, &TashChainSpec::single(5), &p, true).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].aispecs.len(), 4);
        assert!(docs[0].aispecs.iter().all(|a| a.filters.len() == 2));
        let docs = encode_table_build(5, &TashChainSpec::single(5), &p, true).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs.iter().map(|d| d.aispecs.len()).sum::<usize>(), 32);
        let docs = encode_table_build(0, &TashChainSpec::single(5), &p, false).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].aispecs[0].filters.len(), 1);
    }

    #[test]
    fn long_chains_are_refused_with_a_split() {
        let chain = TashChainSpec::uniform(TashOp::Or, &[0, 10, 20, 30]).unwrap();
        let err = encode_table_build(3, &chain, &impinj(), true).unwrap_err();
        assert!(matches!(&err, Error::DeviceLimit(m) if m.contains("2 chains of at most 3")), "{err}");
        assert!(encode_table_build(3, &chain, &impinj(), false).is_ok());
        let parts = split_or_chain(&[0, 10, 20, 30, 40, 50, 60, 70, 80], 3).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[2].seeds(), vec![60, 70, 80]);
    }

    #[test]
    fn negate_actions_do_not_encode() {
        assert!(llrp_action_name(Action::NegateNothing).is_err());
        assert!(llrp_action_name(Action::NothingNegate).is_err());
        for a in Action::ALL {
            if let Ok(name) = llrp_action_name(a) {
                assert_eq!(action_from_name(name).unwrap(), a);
            }
        }
    }

    #[test]
    fn rospec_round_trip_and_fidelity() {
        let chain = TashChainSpec::single(4).and(20).xor(40);
        let docs = encode_table_build(3, &chain, &ReaderProfile::default(), true).unwrap();
        for doc in &docs {
            let xml = render_rospec(doc).unwrap();
            assert_eq!(xml, render_rospec(doc).unwrap());
            let back = parse_rospec(&xml).unwrap();
            assert_eq!(&back, doc);
            for a in &back.aispecs {
                assert_eq!(a.filters, entry_inventory_chain(a.entry, 3, &chain).unwrap());
            }
        }
    }

    #[test]
    fn render_refuses_five_filters() {
        let f = SelectCommand::select(Action::AssertDeassert, MemBank::User, 0, Bits::ones(2)).unwrap();
        let doc = RoSpecDoc {
            rospec_id: 1,
            aispecs: vec![AiSpec {
                entry: 0,
                filters: vec![f; 5],
            }],
        };
        assert!(matches!(render_rospec(&doc), Err(Error::DeviceLimit(_))));
        let mut ok = doc.clone();
        ok.aispecs[0].filters.truncate(4);
        assert!(render_rospec(&ok).is_ok());
        ok.aispecs[0].filters.insert(0, SelectCommand::one_bit_truncate());
        ok.aispecs[0].filters.truncate(3);
        assert!(matches!(render_rospec(&ok), Err(Error::InvalidChain(_))));
    }

    #[test]
    fn provisioning_words_decode_to_digest() {
        let epcs = crate::corpus::sgtin_corpus(300, 1);
        let doc = encode_provisioning(&epcs);
        assert_eq!(doc.jobs.len(), 300);
        for (job, epc) in doc.jobs.iter().zip(&epcs) {
            assert_eq!(job.data.len(), 8);
            assert_eq!(Bits::from_words(&job.data, 128).unwrap(), compute_digest(epc));
        }
        let xml = render_aospec(&doc).unwrap();
        assert_eq!(parse_aospec(&xml).unwrap(), doc);
    }

    #[test]
    fn lint_flags_truncate_on_impinj() {
        let docs = encode_table_build(1, &TashChainSpec::single(0), &impinj(), true).unwrap();
        assert_eq!(lint(&docs, &impinj()).len(), 1);
        assert!(lint(&docs, &ReaderProfile::default()).is_empty());
    }

    #[test]
    fn malformed_documents() {
        assert!(parse_rospec("<AOSpec/>").is_err());
        assert!(parse_rospec("<ADD_ROSPEC><ROSpec></ROSpec>").is_err());
        assert!(parse_aospec("not xml <").is_err());
    }
}
