//! Agent message schemas and their JSON wire form.
//!
//! Field names follow the replies the agents were instructed to produce, so
//! a recorded model response parses directly into these types. Replies are
//! free text: [`parse_agent_json`] digs the first JSON object out of prose,
//! think tags or code fences before validating it against the role schema.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, IgnoredAny, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::controller::{ControllerKind, Gains, Ranges};
use crate::error::{schema, Error};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Selector,
    Scenarist,
    Actor,
    Critic,
    Terminator,
    Juror,
}

impl Role {
    pub const ALL: [Role; 6] =
        [Role::Selector, Role::Scenarist, Role::Actor, Role::Critic, Role::Terminator, Role::Juror];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Selector => "selector",
            Role::Scenarist => "scenarist",
            Role::Actor => "actor",
            Role::Critic => "critic",
            Role::Terminator => "terminator",
            Role::Juror => "juror",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown agent role '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "EXPLORE")]
    Explore,
    #[serde(rename = "EXPLOIT")]
    Exploit,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Explore => "EXPLORE",
            Strategy::Exploit => "EXPLOIT",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "TERMINATE_SUCCESS")]
    TerminateSuccess,
    #[serde(rename = "TERMINATE_REDESIGN")]
    TerminateRedesign,
    #[serde(rename = "CONTINUE")]
    Continue,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::TerminateSuccess => "TERMINATE_SUCCESS",
            Decision::TerminateRedesign => "TERMINATE_REDESIGN",
            Decision::Continue => "CONTINUE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JurorDecision {
    #[serde(rename = "RECONSIDER_RANGE")]
    ReconsiderRange,
    #[serde(rename = "EXPLORE_FURTHER")]
    ExploreFurther,
}

impl JurorDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            JurorDecision::ReconsiderRange => "RECONSIDER_RANGE",
            JurorDecision::ExploreFurther => "EXPLORE_FURTHER",
        }
    }
}

/// Gains proposed by the actor; on the wire the gains sit beside `reasoning`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ActorProposal {
    pub gains: Gains,
    pub reasoning: String,
}

impl Serialize for ActorProposal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.gains.len() + 1))?;
        for (k, v) in self.gains.iter() {
            m.serialize_entry(k, v)?;
        }
        m.serialize_entry("reasoning", &self.reasoning)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for ActorProposal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ActorProposal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of numeric gains plus an optional reasoning string")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<ActorProposal, A::Error> {
                let mut out = ActorProposal::default();
                while let Some(key) = map.next_key::<String>()? {
                    if key == "reasoning" {
                        out.reasoning = map.next_value()?;
                    } else {
                        let v: f64 =
                            map.next_value().map_err(|_| de::Error::custom(format!("gain '{key}' is not a number")))?;
                        out.gains.insert(key, v);
                    }
                }
                if out.gains.is_empty() {
                    return Err(de::Error::custom("no gains in proposal"));
                }
                Ok(out)
            }
        }
        d.deserialize_map(V)
    }
}

/// A proposed gain that had to be pulled back into its range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClampWarning {
    pub gain: String,
    pub proposed: f64,
    pub clamped: f64,
}

impl ActorProposal {
    /// Gains in canonical order, clamped into `ranges`.
    ///
    /// Every name in `names` must be present and no other gain may appear.
    pub fn conform(&self, names: &[String], ranges: &Ranges) -> Result<(Gains, Vec<ClampWarning>), Error> {
        if let Some(extra) = self.gains.names().find(|n| !names.iter().any(|m| m == n)) {
            return Err(schema(format!("unexpected gain '{extra}'")));
        }
        let mut gains = Gains::new();
        let mut warnings = Vec::new();
        for name in names {
            let v = *self.gains.get(name).ok_or_else(|| schema(format!("missing gain '{name}'")))?;
            let c = ranges.get(name).map_or(v, |r| r.clamp(v));
            if c != v {
                warnings.push(ClampWarning { gain: name.clone(), proposed: v, clamped: c });
            }
            gains.insert(name.as_str(), c);
        }
        Ok((gains, warnings))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticFeedback {
    pub strategy: Strategy,
    #[serde(default)]
    pub result_analysis: String,
    #[serde(default)]
    pub suggested_improvements: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminatorVerdict {
    pub decision: Decision,
    #[serde(default)]
    pub reasoning: String,
    #[serde(default)]
    pub recommendations: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JurorVerdict {
    pub decision: JurorDecision,
    #[serde(default)]
    pub new_range: Option<Ranges>,
    #[serde(default)]
    pub reasoning: String,
}

impl JurorVerdict {
    pub fn validate(&self) -> Result<(), Error> {
        match (self.decision, &self.new_range) {
            (JurorDecision::ReconsiderRange, None) => Err(schema("RECONSIDER_RANGE needs new_range")),
            (JurorDecision::ReconsiderRange, Some(r)) if r.is_empty() => Err(schema("new_range is empty")),
            (JurorDecision::ReconsiderRange, Some(r)) => match r.iter().find(|(_, g)| !g.is_valid()) {
                Some((name, g)) => {
                    Err(schema(format!("new_range for {name} is [{}, {}]; need min < max", g.min, g.max)))
                }
                None => Ok(()),
            },
            (JurorDecision::ExploreFurther, Some(_)) => Err(schema("EXPLORE_FURTHER must not carry new_range")),
            (JurorDecision::ExploreFurther, None) => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorChoice {
    pub controller_type: ControllerKind,
    #[serde(default)]
    pub parameters: Gains,
    #[serde(default)]
    pub reasoning: String,
}

/// Any validated agent reply.
#[derive(Clone, Debug, PartialEq)]
pub enum AgentMessage {
    Selector(SelectorChoice),
    Scenarist(Scenario),
    Actor(ActorProposal),
    Critic(CriticFeedback),
    Terminator(TerminatorVerdict),
    Juror(JurorVerdict),
}

impl AgentMessage {
    pub fn role(&self) -> Role {
        match self {
            AgentMessage::Selector(_) => Role::Selector,
            AgentMessage::Scenarist(_) => Role::Scenarist,
            AgentMessage::Actor(_) => Role::Actor,
            AgentMessage::Critic(_) => Role::Critic,
            AgentMessage::Terminator(_) => Role::Terminator,
            AgentMessage::Juror(_) => Role::Juror,
        }
    }

    /// Canonical wire form: pretty JSON, fields in schema order.
    pub fn to_json(&self) -> String {
        let r = match self {
            AgentMessage::Selector(m) => serde_json::to_string_pretty(m),
            AgentMessage::Scenarist(m) => serde_json::to_string_pretty(m),
            AgentMessage::Actor(m) => serde_json::to_string_pretty(m),
            AgentMessage::Critic(m) => serde_json::to_string_pretty(m),
            AgentMessage::Terminator(m) => serde_json::to_string_pretty(m),
            AgentMessage::Juror(m) => serde_json::to_string_pretty(m),
        };
        r.expect("agent messages always serialize")
    }
}

/// Removes `<think>…</think>` spans; an unclosed tag hides the rest of the text.
fn strip_think(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(start) = rest.find("<think>") {
        out.push_str(&rest[..start]);
        match rest[start..].find("</think>") {
            Some(end) => rest = &rest[start + end + "</think>".len()..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Byte spans of every well-formed JSON object in `text`, outermost first.
fn json_objects(text: &str) -> Vec<&str> {
    let mut found = Vec::new();
    let mut from = 0;
    while let Some(off) = text[from..].find('{') {
        let start = from + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<IgnoredAny>();
        if let Some(Ok(_)) = stream.next() {
            let end = start + stream.byte_offset();
            found.push(&text[start..end]);
            from = end;
        } else {
            from = start + 1;
        }
    }
    found
}

fn decode(role: Role, obj: &str) -> Result<AgentMessage, Error> {
    let bad = |e: serde_json::Error| schema(format!("{role} reply: {e}"));
    Ok(match role {
        Role::Selector => AgentMessage::Selector(serde_json::from_str(obj).map_err(bad)?),
        Role::Scenarist => {
            let s: Scenario = serde_json::from_str(obj).map_err(bad)?;
            s.validate().map_err(|e| schema(e.to_string()))?;
            AgentMessage::Scenarist(s)
        }
        Role::Actor => AgentMessage::Actor(serde_json::from_str(obj).map_err(bad)?),
        Role::Critic => AgentMessage::Critic(serde_json::from_str(obj).map_err(bad)?),
        Role::Terminator => AgentMessage::Terminator(serde_json::from_str(obj).map_err(bad)?),
        Role::Juror => {
            let v: JurorVerdict = serde_json::from_str(obj).map_err(bad)?;
            v.validate()?;
            AgentMessage::Juror(v)
        }
    })
}

/// Extracts and validates the reply of `role` from raw model output.
///
/// The first object that satisfies the schema wins. With no object at all
/// the error is [`Error::Parse`]; with objects that all fail validation it
/// is the [`Error::Schema`] of the first one.
pub fn parse_agent_json(raw: &str, role: Role) -> Result<AgentMessage, Error> {
    let text = strip_think(raw);
    let objects = json_objects(&text);
    let mut first_err = None;
    for obj in objects {
        match decode(role, obj) {
            Ok(m) => return Ok(m),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or_else(|| Error::Parse(format!("no JSON object in {role} reply"))))
}

/// Appended to the user prompt when a reply could not be parsed.
pub const FORMAT_REMINDER: &str =
    "Your previous reply could not be used. Respond again with exactly one JSON object in the required format and nothing else.";
