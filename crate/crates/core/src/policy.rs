//! Piecewise-constant input policies and block-form state profiles.
//!
//! Durations are normalized times in units of the message length `k`; the
//! last policy piece and the last profile block always extend forever.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{ChannelFamily, Distribution};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Duration
// ---------------------------------------------------------------------------

/// A piece or block duration: finite normalized time, or infinite for tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Duration {
    Finite(f64),
    Infinite,
}

impl Duration {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Duration::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Duration::Finite(d) => Some(*d),
            Duration::Infinite => None,
        }
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Duration::Finite(d) => write!(f, "{d}"),
            Duration::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Duration {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Duration::Finite(d) => s.serialize_f64(*d),
            Duration::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Duration::Finite(x)),
            Raw::Text(t) if t == "inf" => Ok(Duration::Infinite),
            Raw::Text(t) => Err(D::Error::custom(format!(
                "duration must be a number or \"inf\", got \"{t}\""
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

/// One policy piece: an input distribution held for a normalized duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(rename = "p")]
    pub dist: Distribution,
    pub duration: Duration,
}

/// A piecewise-constant input policy with an infinite tail piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyJson", into = "PolicyJson")]
pub struct Policy {
    pieces: Vec<Piece>,
}

#[derive(Serialize, Deserialize)]
struct PolicyJson {
    pieces: Vec<Piece>,
}

impl TryFrom<PolicyJson> for Policy {
    type Error = Error;
    fn try_from(raw: PolicyJson) -> Result<Self> {
        Policy::new(raw.pieces)
    }
}

impl From<Policy> for PolicyJson {
    fn from(p: Policy) -> Self {
        PolicyJson { pieces: p.pieces }
    }
}

impl Policy {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidPolicy("policy needs at least one piece".into()));
        }
        let dim = pieces[0].dist.len();
        for (i, piece) in pieces.iter().enumerate() {
            if piece.dist.len() != dim {
                return Err(Error::InvalidPolicy(format!(
                    "piece {i} has alphabet size {}, expected {dim}",
                    piece.dist.len()
                )));
            }
            let last = i == pieces.len() - 1;
            match piece.duration {
                Duration::Infinite if !last => {
                    return Err(Error::InvalidPolicy(format!(
                        "piece {i} is infinite but is not the last piece"
                    )));
                }
                Duration::Finite(d) if last => {
                    return Err(Error::InvalidPolicy(format!(
                        "last piece must be infinite, got duration {d}"
                    )));
                }
                Duration::Finite(d) if !(d > 0.0 && d.is_finite()) => {
                    return Err(Error::InvalidPolicy(format!(
                        "piece {i} duration must be positive, got {d}"
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { pieces })
    }

    /// Single-distribution policy (one infinite piece).
    pub fn single(dist: Distribution) -> Self {
        Self {
            pieces: vec![Piece {
                dist,
                duration: Duration::Infinite,
            }],
        }
    }

    /// Two-piece policy: `first` until normalized time `t`, then `tail`.
    pub fn two(first: Distribution, t: f64, tail: Distribution) -> Result<Self> {
        Self::new(vec![
            Piece {
                dist: first,
                duration: Duration::Finite(t),
            },
            Piece {
                dist: tail,
                duration: Duration::Infinite,
            },
        ])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn tail(&self) -> &Distribution {
        &self.pieces.last().expect("nonempty").dist
    }

    /// Sum of the finite piece durations.
    pub fn finite_duration(&self) -> f64 {
        self.pieces
            .iter()
            .filter_map(|p| p.duration.finite())
            .sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy serializes")
    }
}

/// Parses the CLI policy shorthand for the four-symbol symmetric
/// parametrization: `single:<p>` or `two:<p1>@<t>,<p2>`.
pub fn parse_policy_shorthand(text: &str) -> Result<Policy> {
    use crate::channel::symmetric_input;
    let parse_f64 = |s: &str, pos: usize| -> Result<f64> {
        s.trim().parse::<f64>().map_err(|_| Error::Parse {
            position: pos,
            message: format!("expected a number, got `{s}`"),
        })
    };
    if let Some(rest) = text.strip_prefix("single:") {
        let p = parse_f64(rest, 7)?;
        return Ok(Policy::single(symmetric_input(p)?));
    }
    if let Some(rest) = text.strip_prefix("two:") {
        let (head, p2_text) = rest.split_once(',').ok_or(Error::Parse {
            position: 4,
            message: "expected `two:<p1>@<t>,<p2>`".into(),
        })?;
        let (p1_text, t_text) = head.split_once('@').ok_or(Error::Parse {
            position: 4,
            message: "expected `<p1>@<t>` before the comma".into(),
        })?;
        let p1 = parse_f64(p1_text, 4)?;
        let t = parse_f64(t_text, 4 + p1_text.len() + 1)?;
        let p2 = parse_f64(p2_text, 4 + head.len() + 1)?;
        return Policy::two(symmetric_input(p1)?, t, symmetric_input(p2)?);
    }
    Err(Error::Parse {
        position: 0,
        message: format!("unknown policy shorthand `{text}`; use single:<p> or two:<p1>@<t>,<p2>"),
    })
}

// ---------------------------------------------------------------------------
// StateProfile
// ---------------------------------------------------------------------------

/// One profile block: a state label held for a normalized duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub label: String,
    pub duration: Duration,
}

/// A state sequence as blocks, the last of which extends forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Block>", into = "Vec<Block>")]
pub struct StateProfile {
    blocks: Vec<Block>,
}

impl TryFrom<Vec<Block>> for StateProfile {
    type Error = Error;
    fn try_from(blocks: Vec<Block>) -> Result<Self> {
        StateProfile::new(blocks)
    }
}

impl From<StateProfile> for Vec<Block> {
    fn from(p: StateProfile) -> Self {
        p.blocks
    }
}

impl StateProfile {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidProfile("profile needs at least one block".into()));
        }
        for (i, block) in blocks.iter().enumerate() {
            if block.label.is_empty() {
                return Err(Error::InvalidProfile(format!("block {i} has an empty label")));
            }
            let last = i == blocks.len() - 1;
            match block.duration {
                Duration::Infinite if !last => {
                    return Err(Error::InvalidProfile(format!(
                        "block {i} is infinite but is not the last block"
                    )));
                }
                Duration::Finite(d) if last => {
                    return Err(Error::InvalidProfile(format!(
                        "last block must be infinite, got duration {d}"
                    )));
                }
                Duration::Finite(d) if !(d > 0.0 && d.is_finite()) => {
                    return Err(Error::InvalidProfile(format!(
                        "block {i} duration must be positive, got {d}"
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { blocks })
    }

    /// The constant profile `label^inf`.
    pub fn constant(label: &str) -> Self {
        Self {
            blocks: vec![Block {
                label: label.to_string(),
                duration: Duration::Infinite,
            }],
        }
    }

    /// Builds a profile from `(label, finite duration)` prefix blocks and an
    /// infinite tail state, merging adjacent blocks with equal labels.
    pub fn from_prefix_and_tail(prefix: &[(&str, f64)], tail: &str) -> Result<Self> {
        let mut blocks: Vec<Block> = Vec::with_capacity(prefix.len() + 1);
        for &(label, d) in prefix {
            match blocks.last_mut() {
                Some(last) if last.label == label => {
                    let cur = last.duration.finite().expect("prefix blocks are finite");
                    last.duration = Duration::Finite(cur + d);
                }
                _ => blocks.push(Block {
                    label: label.to_string(),
                    duration: Duration::Finite(d),
                }),
            }
        }
        match blocks.last() {
            Some(last) if last.label == tail => {
                blocks.last_mut().unwrap().duration = Duration::Infinite;
            }
            _ => blocks.push(Block {
                label: tail.to_string(),
                duration: Duration::Infinite,
            }),
        }
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Parses the profile grammar: comma-separated `label^duration` blocks
    /// with an infinite final block, e.g. `1^1.0,2^inf`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut pos = 0usize;
        for part in text.split(',') {
            let caret = part.find('^').ok_or(Error::Parse {
                position: pos,
                message: format!("block `{part}` is missing `^`"),
            })?;
            let (label, dur_text) = (&part[..caret], &part[caret + 1..]);
            if label.is_empty() {
                return Err(Error::Parse {
                    position: pos,
                    message: "empty state label".into(),
                });
            }
            let duration = if dur_text == "inf" {
                Duration::Infinite
            } else {
                let d: f64 = dur_text.parse().map_err(|_| Error::Parse {
                    position: pos + caret + 1,
                    message: format!("bad duration `{dur_text}`"),
                })?;
                Duration::Finite(d)
            };
            blocks.push(Block {
                label: label.to_string(),
                duration,
            });
            pos += part.len() + 1;
        }
        Self::new(blocks)
    }

    /// Checks every label against the family.
    pub fn validate_against(&self, family: &ChannelFamily) -> Result<()> {
        for block in &self.blocks {
            if family.state_index(&block.label).is_none() {
                return Err(Error::UnknownState(block.label.clone()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for StateProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}^{}", block.label, block.duration)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::symmetric_input;

    #[test]
    fn policy_validation() {
        let p = symmetric_input(0.5).unwrap();
        assert!(Policy::new(vec![]).is_err());
        // Non-final infinite piece rejected.
        assert!(Policy::new(vec![
            Piece {
                dist: p.clone(),
                duration: Duration::Infinite
            },
            Piece {
                dist: p.clone(),
                duration: Duration::Infinite
            },
        ])
        .is_err());
        // Finite last piece rejected.
        assert!(Policy::new(vec![Piece {
            dist: p.clone(),
            duration: Duration::Finite(1.0)
        }])
        .is_err());
        // Zero-duration piece rejected.
        assert!(Policy::two(p.clone(), 0.0, p.clone()).is_err());
        assert!(Policy::two(p.clone(), 1.5, p.clone()).is_ok());
    }

    #[test]
    fn policy_json_round_trip() {
        let pol = Policy::two(
            symmetric_input(10.0 / 33.0).unwrap(),
            1.5,
            symmetric_input(2.0 / 3.0).unwrap(),
        )
        .unwrap();
        let text = pol.to_json();
        let back = Policy::from_json(&text).unwrap();
        assert_eq!(back, pol);
        // The documented wire shape.
        assert!(text.starts_with(r#"{"pieces":[{"p":["#), "got {text}");
        assert!(text.contains(r#""duration":"inf""#));
    }

    #[test]
    fn shorthand_parsing() {
        let single = parse_policy_shorthand("single:0.6667").unwrap();
        assert_eq!(single.num_pieces(), 1);
        let two = parse_policy_shorthand("two:0.30303@1.5,0.66667").unwrap();
        assert_eq!(two.num_pieces(), 2);
        assert_eq!(two.pieces()[0].duration, Duration::Finite(1.5));
        assert!(parse_policy_shorthand("three:1,2,3").is_err());
        assert!(parse_policy_shorthand("single:abc").is_err());
    }

    #[test]
    fn profile_grammar_round_trip() {
        let prof = StateProfile::parse("1^1.0,2^inf").unwrap();
        assert_eq!(prof.num_blocks(), 2);
        assert_eq!(prof.to_string(), "1^1,2^inf");
        assert_eq!(StateProfile::parse(&prof.to_string()).unwrap(), prof);
        assert_eq!(StateProfile::parse("2^inf").unwrap().num_blocks(), 1);
    }

    #[test]
    fn profile_grammar_errors() {
        match StateProfile::parse("1^1.0,2^2.0") {
            Err(Error::InvalidProfile(_)) => {}
            other => panic!("expected finite-tail rejection, got {other:?}"),
        }
        match StateProfile::parse("1^x,2^inf") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(StateProfile::parse("^1,2^inf").is_err());
        assert!(StateProfile::parse("1^-2,2^inf").is_err());
    }

    #[test]
    fn prefix_and_tail_merges() {
        let prof = StateProfile::from_prefix_and_tail(&[("1", 1.0), ("1", 0.5), ("2", 0.25)], "2")
            .unwrap();
        assert_eq!(prof.to_string(), "1^1.5,2^inf");
        let constant = StateProfile::from_prefix_and_tail(&[("1", 1.0)], "1").unwrap();
        assert_eq!(constant.to_string(), "1^inf");
    }
}
