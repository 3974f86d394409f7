use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::tokenize;

/// A normalized word or short word combination; `text` is the space-join of `tokens`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    text: String,
    tokens: Vec<String>,
}

impl Term {
    /// Normalizes raw text into a term. Returns `None` when nothing survives tokenization.
    pub fn parse(raw: &str) -> Option<Term> {
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            return None;
        }
        Some(Term {
            text: tokens.join(" "),
            tokens,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Term::parse(&raw).ok_or_else(|| serde::de::Error::custom("empty term"))
    }
}
