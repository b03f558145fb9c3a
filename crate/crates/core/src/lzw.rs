//! Word-level LZW dictionaries.
//!
//! A dictionary is built from one class of training tweets and then frozen.
//! A tweet that compresses well under the author's dictionary shares many
//! word patterns with the author's past writing.
//!
//! Code layout: base tokens get codes `0..V` in order of first appearance,
//! `V` is the out-of-vocabulary code, and multi-token phrases follow from
//! `V + 1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LzwWire", into = "LzwWire")]
pub struct LzwDictionary {
    base_vocab: Vec<String>,
    base_index: HashMap<String, u32>,
    oov_code: u32,
    /// `(prefix code, last token index)` for each multi-token code, in code order.
    phrases: Vec<(u32, u32)>,
    extensions: HashMap<(u32, u32), u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingResult {
    pub codes: Vec<u32>,
    pub encoded_len: usize,
    pub source_len: usize,
}

impl LzwDictionary {
    /// Runs the LZW pass over each tweet in order. The current match restarts
    /// at every tweet; the dictionary carries over.
    pub fn build<D: AsRef<[String]>>(train: &[D]) -> Result<Self> {
        if train.iter().all(|d| d.as_ref().is_empty()) {
            return Err(Error::Empty("LZW training set"));
        }
        let mut base_vocab = Vec::new();
        let mut base_index = HashMap::new();
        for doc in train {
            for token in doc.as_ref() {
                if !base_index.contains_key(token) {
                    base_index.insert(token.clone(), base_vocab.len() as u32);
                    base_vocab.push(token.clone());
                }
            }
        }
        let oov_code = base_vocab.len() as u32;
        let mut dict = LzwDictionary {
            base_vocab,
            base_index,
            oov_code,
            phrases: Vec::new(),
            extensions: HashMap::new(),
        };
        for doc in train {
            let symbols: Vec<u32> = doc.as_ref().iter().map(|t| dict.base_index[t]).collect();
            let Some((&first, rest)) = symbols.split_first() else { continue };
            let mut current = first;
            for &symbol in rest {
                match dict.extensions.get(&(current, symbol)) {
                    Some(&code) => current = code,
                    None => {
                        dict.insert_phrase(current, symbol);
                        current = symbol;
                    }
                }
            }
        }
        Ok(dict)
    }

    fn insert_phrase(&mut self, prefix: u32, symbol: u32) -> u32 {
        let code = self.next_code();
        self.phrases.push((prefix, symbol));
        self.extensions.insert((prefix, symbol), code);
        code
    }

    pub fn next_code(&self) -> u32 {
        self.oov_code + 1 + self.phrases.len() as u32
    }

    pub fn oov_code(&self) -> u32 {
        self.oov_code
    }

    pub fn base_vocab(&self) -> &[String] {
        &self.base_vocab
    }

    /// Total number of codes including the OOV code.
    pub fn len(&self) -> usize {
        self.next_code() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Code of an exact token sequence, if it is an entry.
    pub fn code_of<S: AsRef<str>>(&self, sequence: &[S]) -> Option<u32> {
        let (first, rest) = sequence.split_first()?;
        let mut code = *self.base_index.get(first.as_ref())?;
        for token in rest {
            let symbol = *self.base_index.get(token.as_ref())?;
            code = *self.extensions.get(&(code, symbol))?;
        }
        Some(code)
    }

    /// Token sequence for a code; `None` for the OOV code or unknown codes.
    pub fn sequence_of(&self, code: u32) -> Option<Vec<String>> {
        if code < self.oov_code {
            return Some(vec![self.base_vocab[code as usize].clone()]);
        }
        let idx = code.checked_sub(self.oov_code + 1)? as usize;
        let &(prefix, symbol) = self.phrases.get(idx)?;
        let mut seq = self.sequence_of(prefix)?;
        seq.push(self.base_vocab[symbol as usize].clone());
        Some(seq)
    }

    /// Greedy longest-match encoding against the frozen dictionary. Each
    /// unknown token emits the OOV code.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> EncodingResult {
        let mut codes = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let Some(&start) = self.base_index.get(tokens[i].as_ref()) else {
                codes.push(self.oov_code);
                i += 1;
                continue;
            };
            let mut current = start;
            i += 1;
            while i < tokens.len() {
                let next = self
                    .base_index
                    .get(tokens[i].as_ref())
                    .and_then(|&s| self.extensions.get(&(current, s)));
                match next {
                    Some(&code) => {
                        current = code;
                        i += 1;
                    }
                    None => break,
                }
            }
            codes.push(current);
        }
        EncodingResult {
            encoded_len: codes.len(),
            source_len: tokens.len(),
            codes,
        }
    }
}

/// `1 - encoded_len / source_len` under the author's dictionary, clamped to `[0, 1]`.
pub fn lzw_score<S: AsRef<str>>(dict_pos: &LzwDictionary, tokens: &[S]) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::TooShort { len: 0, required: 1 });
    }
    let enc = dict_pos.encode(tokens);
    Ok((1.0 - enc.encoded_len as f64 / enc.source_len as f64).clamp(0.0, 1.0))
}

/// Positive iff the tweet encodes strictly shorter under `dict_pos`.
pub fn lzw_classify<S: AsRef<str>>(dict_pos: &LzwDictionary, dict_neg: &LzwDictionary, tokens: &[S]) -> Result<Label> {
    if tokens.is_empty() {
        return Err(Error::TooShort { len: 0, required: 1 });
    }
    let pos = dict_pos.encode(tokens).encoded_len;
    let neg = dict_neg.encode(tokens).encoded_len;
    Ok(Label::from_bool(pos < neg))
}

/// Dictionaries for both classes of one author.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LzwPair {
    pub positive: LzwDictionary,
    pub negative: LzwDictionary,
}

impl LzwPair {
    pub fn train<D: AsRef<[String]>>(train_pos: &[D], train_neg: &[D]) -> Result<Self> {
        Ok(LzwPair {
            positive: LzwDictionary::build(train_pos)?,
            negative: LzwDictionary::build(train_neg)?,
        })
    }

    pub fn score<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        lzw_score(&self.positive, tokens)
    }

    pub fn classify<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Label> {
        lzw_classify(&self.positive, &self.negative, tokens)
    }
}

#[derive(Serialize, Deserialize)]
struct LzwWire {
    version: u32,
    base_vocab: Vec<String>,
    entries: Vec<(Vec<String>, u32)>,
    oov_code: u32,
}

impl From<LzwDictionary> for LzwWire {
    fn from(dict: LzwDictionary) -> Self {
        let entries = (0..dict.next_code())
            .filter(|&c| c != dict.oov_code)
            .map(|c| (dict.sequence_of(c).expect("every code below next_code is an entry"), c))
            .collect();
        LzwWire {
            version: FORMAT_VERSION,
            base_vocab: dict.base_vocab,
            entries,
            oov_code: dict.oov_code,
        }
    }
}

impl TryFrom<LzwWire> for LzwDictionary {
    type Error = Error;

    fn try_from(wire: LzwWire) -> Result<Self> {
        if wire.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported LZW dictionary version {}", wire.version)));
        }
        if wire.oov_code as usize != wire.base_vocab.len() {
            return Err(Error::Format("oov_code must equal the base vocabulary size".into()));
        }
        let mut base_index = HashMap::new();
        for (i, token) in wire.base_vocab.iter().enumerate() {
            if base_index.insert(token.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate base token `{token}`")));
            }
        }
        let mut dict = LzwDictionary {
            base_vocab: wire.base_vocab,
            base_index,
            oov_code: wire.oov_code,
            phrases: Vec::new(),
            extensions: HashMap::new(),
        };
        let mut entries = wire.entries;
        entries.sort_by_key(|&(_, code)| code);
        for (seq, code) in entries {
            match seq.len() {
                0 => return Err(Error::Format("empty entry".into())),
                1 => {
                    if dict.base_index.get(&seq[0]) != Some(&code) {
                        return Err(Error::Format(format!("base entry `{}` has wrong code {code}", seq[0])));
                    }
                }
                _ => {
                    if code != dict.next_code() {
                        return Err(Error::Format(format!("phrase codes not contiguous at {code}")));
                    }
                    let (last, prefix) = seq.split_last().expect("len >= 2");
                    let prefix_code = dict
                        .code_of(prefix)
                        .ok_or_else(|| Error::Format(format!("phrase {code} has no prefix entry")))?;
                    let symbol = *dict
                        .base_index
                        .get(last)
                        .ok_or_else(|| Error::Format(format!("phrase {code} uses unknown token `{last}`")))?;
                    dict.insert_phrase(prefix_code, symbol);
                }
            }
        }
        Ok(dict)
    }
}
