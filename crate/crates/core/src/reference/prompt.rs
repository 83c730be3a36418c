use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LlmError;

/// Correction prompt with its two substitution points left in place.
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");
pub const LANGUAGE_SLOT: &str = "[Dutch/English/Spanish]";
pub const SENTENCE_SLOT: &str = "[Sentence]";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    Dutch,
    English,
    Spanish,
    Other(String),
}

impl Language {
    pub fn display_name(&self) -> &str {
        match self {
            Self::Dutch => "Dutch",
            Self::English => "English",
            Self::Spanish => "Spanish",
            Self::Other(name) => name,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Language {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_lowercase().as_str() {
            "dutch" | "nl" => Self::Dutch,
            "english" | "en" => Self::English,
            "spanish" | "es" => Self::Spanish,
            _ => Self::Other(s.trim().to_string()),
        })
    }
}

pub fn build_prompt(language: &Language, sentence: &str) -> String {
    let (head, tail) = PROMPT_TEMPLATE
        .split_once(LANGUAGE_SLOT)
        .expect("template has a language slot");
    let (middle, rest) = tail.split_once(SENTENCE_SLOT).expect("template has a sentence slot");
    let mut out = String::with_capacity(PROMPT_TEMPLATE.len() + sentence.len());
    out.push_str(head);
    out.push_str(language.display_name());
    out.push_str(middle);
    out.push_str(sentence);
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    Bracketed,
    FallbackWholeReply,
}

/// Contents of the first balanced `[...]` span, or the whole trimmed reply when there is none.
pub fn extract_bracketed(reply: &str) -> Result<(String, Extraction), LlmError> {
    let trimmed = reply.trim();
    if trimmed.is_empty() {
        return Err(LlmError::EmptyReply);
    }
    let mut start = None;
    let mut depth = 0usize;
    for (i, c) in trimmed.char_indices() {
        match c {
            '[' => {
                if depth == 0 {
                    start = Some(i + 1);
                }
                depth += 1;
            }
            ']' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    let from = start.expect("opened span");
                    return Ok((trimmed[from..i].trim().to_string(), Extraction::Bracketed));
                }
            }
            _ => {}
        }
    }
    Ok((trimmed.to_string(), Extraction::FallbackWholeReply))
}
