//! Prompt construction and reply parsing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoder::{format_fixed, AgentDescription};

pub const SYSTEM_INSTRUCTIONS: &str = "You supervise the speed of an autonomous vehicle. \
Read the scene description below and suggest a driving speed limit between 0 and 15 m/s. \
Use 0 only when hard braking is needed. \
Answer with a JSON object {\"speed\": <number>, \"rationale\": <string>}.";

/// Replies are only scanned up to this many bytes.
const MAX_REPLY_BYTES: usize = 64 * 1024;

pub const NO_AGENTS_SENTINEL: &str = "No agents nearby.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
    /// Agent blocks left out to respect the length budget.
    pub omitted_agents: usize,
}

impl Prompt {
    /// System and user parts joined by a blank line.
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }

    /// Length of [`Prompt::text`] in characters.
    pub fn char_count(&self) -> usize {
        self.system.chars().count() + 2 + self.user.chars().count()
    }

    /// Lowercase hex SHA-256 of [`Prompt::text`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.text().as_bytes()))
    }
}

fn user_text(ego_line: &str, blocks: &[AgentDescription], omitted: usize) -> String {
    let mut out = String::from(ego_line);
    out.push('\n');
    if blocks.is_empty() && omitted == 0 {
        out.push_str(NO_AGENTS_SENTINEL);
        return out;
    }
    out.push_str("Agents:");
    for b in blocks {
        out.push_str("\n\n");
        out.push_str(&b.text);
    }
    if omitted > 0 {
        out.push_str(&format!("\n\n({omitted} farther agents omitted)"));
    }
    out
}

/// Builds the prompt, dropping agent blocks from the end (the farthest, as
/// the encoder orders by distance) until the text fits in `max_chars`.
pub fn build_prompt(
    descriptions: &[AgentDescription],
    ego_speed: f64,
    speed_limit: f64,
    max_chars: usize,
) -> Prompt {
    let ego_line = format!(
        "Ego vehicle: speed {} m/s, road speed limit {} m/s.",
        format_fixed(ego_speed, 1),
        format_fixed(speed_limit, 1)
    );
    let mut keep = descriptions.len();
    loop {
        let prompt = Prompt {
            system: SYSTEM_INSTRUCTIONS.to_string(),
            user: user_text(&ego_line, &descriptions[..keep], descriptions.len() - keep),
            omitted_agents: descriptions.len() - keep,
        };
        if prompt.char_count() <= max_chars || keep == 0 {
            return prompt;
        }
        keep -= 1;
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplyError {
    #[error("reply contains no JSON object")]
    NoJsonObject,
    #[error("reply JSON has no numeric `speed` field")]
    MissingSpeed,
    #[error("reply speed is not finite")]
    NonFiniteSpeed,
}

/// Byte ranges of balanced `{...}` spans, honoring JSON string escapes.
fn balanced_objects(text: &str) -> impl Iterator<Item = &str> {
    let bytes = text.as_bytes();
    (0..bytes.len())
        .filter(move |&i| bytes[i] == b'{')
        .filter_map(move |start| {
            let mut depth = 0usize;
            let mut in_string = false;
            let mut escaped = false;
            for (off, &c) in bytes[start..].iter().enumerate() {
                if in_string {
                    match c {
                        _ if escaped => escaped = false,
                        b'\\' => escaped = true,
                        b'"' => in_string = false,
                        _ => {}
                    }
                    continue;
                }
                match c {
                    b'"' => in_string = true,
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            return Some(&text[start..start + off + 1]);
                        }
                    }
                    _ => {}
                }
            }
            None
        })
}

/// Extracts `(speed, rationale)` from the first balanced JSON object in the
/// reply that parses. The speed is returned unclamped.
pub fn parse_reply(content: &str) -> Result<(f64, String), ReplyError> {
    let mut cut = content.len().min(MAX_REPLY_BYTES);
    while !content.is_char_boundary(cut) {
        cut -= 1;
    }
    let content = &content[..cut];
    for candidate in balanced_objects(content) {
        let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) else {
            continue;
        };
        let speed = match value.get("speed") {
            Some(serde_json::Value::Number(n)) => n.as_f64(),
            Some(serde_json::Value::String(s)) => s.trim().parse::<f64>().ok(),
            _ => None,
        };
        let Some(speed) = speed else {
            return Err(ReplyError::MissingSpeed);
        };
        if !speed.is_finite() {
            return Err(ReplyError::NonFiniteSpeed);
        }
        let rationale = value
            .get("rationale")
            .and_then(|r| r.as_str())
            .unwrap_or_default()
            .to_string();
        return Ok((speed, rationale));
    }
    Err(ReplyError::NoJsonObject)
}
