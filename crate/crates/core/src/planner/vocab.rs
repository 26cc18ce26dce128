//! Closed vocabulary: structural tokens, bins, category names and the
//! sentence pieces of every embedded question template.

use crate::qa::grammar::ChainElement;
use crate::qa::templates::{all_questions, segment_question, QuestionPiece};
use crate::scene::Category;
use std::collections::HashMap;
use thiserror::Error;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const SEP: u32 = 2;
pub const EOS: u32 = 3;
pub const UNK: u32 = 4;
pub const QUERY: u32 = 5;

const SPECIALS: [&str; 6] = ["<pad>", "<bos>", "<sep>", "<eos>", "<unk>", "<query>"];
const PUNCT: [&str; 3] = ["[", "]", ","];
const BINS: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("duplicate token {0:?}")]
    Duplicate(String),
    #[error("vocabulary mismatch: {0}")]
    Mismatch(String),
}

/// A prompt element: a text token or the index of a `<query>` slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptItem {
    Token(u32),
    Slot(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    bin_offset: u32,
}

impl Vocab {
    /// The standard vocabulary.
    pub fn build() -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        for e in [
            ChainElement::V,
            ChainElement::A,
            ChainElement::Y,
            ChainElement::T,
            ChainElement::P,
        ] {
            tokens.push(e.marker().to_string());
        }
        tokens.push("CAT".into());
        tokens.push("LANE".into());
        tokens.extend(PUNCT.iter().map(|s| s.to_string()));
        tokens.extend(Category::ALL.iter().map(|c| c.name().to_string()));
        tokens.extend((0..BINS).map(|b| b.to_string()));
        let mut pieces: Vec<String> = all_questions()
            .iter()
            .flat_map(|q| segment_question(q))
            .filter_map(|p| match p {
                QuestionPiece::Text(s) => Some(s),
                QuestionPiece::Query => None,
            })
            .collect();
        pieces.sort();
        pieces.dedup();
        tokens.extend(pieces);
        Vocab::from_tokens(tokens).expect("standard vocabulary is duplicate-free")
    }

    /// Rebuild from a stored token list, which must agree with the standard
    /// layout of specials and bins.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(VocabError::Duplicate(t.clone()));
            }
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(s) {
                return Err(VocabError::Mismatch(format!("token {i} should be {s}")));
            }
        }
        let bin_offset = *index
            .get("0")
            .ok_or_else(|| VocabError::Mismatch("no bin tokens".into()))?;
        for b in 0..BINS {
            if index.get(&b.to_string()) != Some(&(bin_offset + b)) {
                return Err(VocabError::Mismatch("bin tokens must be contiguous".into()));
            }
        }
        Ok(Vocab {
            tokens,
            index,
            bin_offset,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn bin_id(&self, bin: u32) -> u32 {
        debug_assert!(bin < BINS);
        self.bin_offset + bin
    }

    /// The bin value of `id`, if it is a bin token.
    pub fn bin_of(&self, id: u32) -> Option<u32> {
        (id >= self.bin_offset && id < self.bin_offset + BINS).then(|| id - self.bin_offset)
    }

    pub fn bin_range(&self) -> std::ops::Range<u32> {
        self.bin_offset..self.bin_offset + BINS
    }

    /// Tokenize a question into text pieces and slot markers. Unknown pieces
    /// become `<unk>`.
    pub fn encode_question(&self, question: &str) -> Vec<PromptItem> {
        let mut slot = 0;
        segment_question(question)
            .into_iter()
            .map(|p| match p {
                QuestionPiece::Text(s) => PromptItem::Token(self.id(&s).unwrap_or(UNK)),
                QuestionPiece::Query => {
                    slot += 1;
                    PromptItem::Slot(slot - 1)
                }
            })
            .collect()
    }

    /// Tokenize answer text. Numbers become bin tokens when they are
    /// canonical bins; anything unrecognized becomes `<unk>`.
    pub fn encode_answer(&self, text: &str) -> Vec<u32> {
        let b = text.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < b.len() {
            let c = b[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            if c.is_ascii_digit() {
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let d = &text[start..i];
                let id = match d.parse::<u32>() {
                    Ok(v) if v < BINS && v.to_string() == d => self.bin_id(v),
                    _ => UNK,
                };
                out.push(id);
            } else if c.is_ascii_alphabetic() || c == b'_' {
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                out.push(self.id(&text[start..i]).unwrap_or(UNK));
            } else if matches!(c, b'[' | b']' | b',') {
                i += 1;
                out.push(self.id(&text[start..i]).expect("punctuation is in vocab"));
            } else {
                i += text[start..].chars().next().map_or(1, char::len_utf8);
                out.push(UNK);
            }
        }
        out
    }

    /// Render answer tokens back to canonical answer text, stopping at `<eos>`.
    pub fn decode_answer(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        let mut prev: Option<&str> = None;
        for &id in ids {
            if id == EOS {
                break;
            }
            let tok = self.token(id).unwrap_or("<unk>");
            let glue = matches!(prev, None | Some("[") | Some(",")) || matches!(tok, "]" | ",");
            if !glue {
                out.push(' ');
            }
            out.push_str(tok);
            prev = Some(tok);
        }
        out
    }
}
