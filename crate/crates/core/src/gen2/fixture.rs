//! Population fixtures.
//!
//! Text form, one tag per line, `#` starts a comment:
//!
//! ```text
//! # epc                      membank3                          [absent]
//! 300833B2DDD9014000000001   1049840899F0857C38650C1F002E8592
//! 300833B2DDD9014000000002   00000000000000000000000000000000  absent
//! ```
//!
//! JSON form is an array of `{"epc": hex, "membank3": hex, "present": bool}`.

use serde::{Deserialize, Serialize};

use super::{Population, TagRecord};
use crate::bits::Bits;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagFixture {
    pub epc: String,
    pub membank3: String,
    #[serde(default = "yes")]
    pub present: bool,
}

fn yes() -> bool {
    true
}

impl TagFixture {
    pub fn to_tag(&self) -> Result<TagRecord> {
        let mut tag = TagRecord::new(
            Bits::from_hex(&self.epc, None)?,
            Bits::from_hex(&self.membank3, None)?,
        )?;
        tag.present = self.present;
        Ok(tag)
    }

    pub fn from_tag(tag: &TagRecord) -> Self {
        TagFixture {
            epc: tag.epc().to_hex(),
            membank3: tag.user().to_hex(),
            present: tag.present,
        }
    }
}

/// Parses either fixture form; JSON is recognised by a leading `[`.
pub fn parse_population(text: &str) -> Result<Population> {
    if text.trim_start().starts_with('[') {
        let fixtures: Vec<TagFixture> = serde_json::from_str(text)?;
        return fixtures.iter().map(TagFixture::to_tag).collect();
    }
    let mut tags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let present = match cols.get(2) {
            None => true,
            Some(&"absent") => false,
            Some(&"present") => true,
            Some(other) => {
                return Err(Error::Config(format!(
                    "line {}: unknown tag state {other:?}",
                    lineno + 1
                )));
            }
        };
        if cols.len() < 2 || cols.len() > 3 {
            return Err(Error::Config(format!(
                "line {}: expected `epc membank3 [absent]`",
                lineno + 1
            )));
        }
        let fixture = TagFixture {
            epc: cols[0].to_string(),
            membank3: cols[1].to_string(),
            present,
        };
        tags.push(fixture.to_tag()?);
    }
    Ok(Population::new(tags))
}

pub fn render_population(pop: &Population) -> String {
    let mut out = String::new();
    for tag in pop.tags() {
        out.push_str(&tag.epc().to_hex());
        out.push(' ');
        out.push_str(&tag.user().to_hex());
        if !tag.present {
            out.push_str(" absent");
        }
        out.push('\n');
    }
    out
}
