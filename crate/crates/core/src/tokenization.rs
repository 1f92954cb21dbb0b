//! Character and BPE token handling, detokenization, and the word-boundary
//! detection used for word-level delay merging.
//!
//! Subword convention: non-word-final BPE units carry an `@@` suffix, so a
//! word is complete exactly when a token without the marker is emitted. This
//! keeps word completion detectable without lookahead. In char mode a word
//! is only known to be complete once the following separator (or the end of
//! the utterance) arrives; whether the word's delay is taken from that
//! separator step or from its own last character is switchable.

use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Granularity, TokenId, Vocabulary};

/// Continuation marker on non-word-final subwords.
pub const CONTINUATION: &str = "@@";

/// An ordered list of BPE merges, applied top-down.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
}

impl BpeModel {
    pub fn new(merges: Vec<(String, String)>) -> Self {
        Self { merges }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Parse a merge file: one merge pair per line, space-separated.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
        let mut merges = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&display, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => merges.push((a.to_string(), b.to_string())),
                _ => {
                    return Err(Error::format(
                        &display,
                        format!("line {}: expected two space-separated symbols", lineno + 1),
                    ))
                }
            }
        }
        Ok(Self { merges })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let display = path.as_ref().display().to_string();
        let mut body = String::new();
        for (a, b) in &self.merges {
            body.push_str(a);
            body.push(' ');
            body.push_str(b);
            body.push('\n');
        }
        std::fs::write(path, body).map_err(|e| Error::io(&display, e))
    }

    /// Segment one word into subword symbols by applying the merges in order.
    pub fn segment(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        for (a, b) in &self.merges {
            let mut i = 0;
            while i + 1 < symbols.len() {
                if symbols[i] == *a && symbols[i + 1] == *b {
                    let merged = format!("{}{}", symbols[i], symbols[i + 1]);
                    symbols[i] = merged;
                    symbols.remove(i + 1);
                } else {
                    i += 1;
                }
            }
        }
        symbols
    }
}

/// Which step a char-mode word's delay is committed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharWordDelay {
    /// The step that emitted the separator (or eos/end) following the word.
    #[default]
    FollowingSeparator,
    /// The step that emitted the word's own last character.
    LastCharacter,
}

impl std::fmt::Display for CharWordDelay {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CharWordDelay::FollowingSeparator => write!(f, "following_separator"),
            CharWordDelay::LastCharacter => write!(f, "last_character"),
        }
    }
}

impl std::str::FromStr for CharWordDelay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "following_separator" => Ok(CharWordDelay::FollowingSeparator),
            "last_character" => Ok(CharWordDelay::LastCharacter),
            other => Err(Error::Argument(format!(
                "unknown char word delay mode {other:?} (expected following_separator or last_character)"
            ))),
        }
    }
}

/// A vocabulary plus, for BPE granularity, its merge list.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokenizer {
    vocab: Vocabulary,
    bpe: Option<BpeModel>,
}

impl Tokenizer {
    pub fn new(vocab: Vocabulary, bpe: Option<BpeModel>) -> Result<Self> {
        match (vocab.granularity(), &bpe) {
            (Granularity::Bpe, None) => Err(Error::Argument(
                "bpe vocabulary requires a merge list".into(),
            )),
            (Granularity::Char, Some(_)) => Err(Error::Argument(
                "char vocabulary does not take a merge list".into(),
            )),
            _ => Ok(Self { vocab, bpe }),
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn bpe(&self) -> Option<&BpeModel> {
        self.bpe.as_ref()
    }

    /// Text to token ids. Char mode: one token per character including
    /// spaces. BPE mode: whitespace-split words are segmented with the merge
    /// list and all non-final subwords get the continuation marker.
    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        if text.is_empty() {
            return Err(Error::Argument("cannot tokenize empty text".into()));
        }
        match self.vocab.granularity() {
            Granularity::Char => text.chars().map(|c| self.lookup(&c.to_string())).collect(),
            Granularity::Bpe => {
                let bpe = self.bpe.as_ref().expect("validated in constructor");
                let mut ids = Vec::new();
                for word in text.split_whitespace() {
                    let symbols = bpe.segment(word);
                    let last = symbols.len() - 1;
                    for (i, sym) in symbols.iter().enumerate() {
                        let marked = if i < last {
                            format!("{sym}{CONTINUATION}")
                        } else {
                            sym.clone()
                        };
                        ids.push(self.lookup(&marked)?);
                    }
                }
                Ok(ids)
            }
        }
    }

    fn lookup(&self, symbol: &str) -> Result<TokenId> {
        self.vocab.id_of(symbol).ok_or_else(|| Error::UnknownToken {
            symbol: symbol.to_string(),
        })
    }

    /// Token ids back to text. Char mode concatenates; BPE mode joins
    /// subwords at continuation markers and words with single spaces. A
    /// trailing continuation marker (possible when decoding was cut off
    /// mid-word) is stripped.
    pub fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        let mut text = String::new();
        match self.vocab.granularity() {
            Granularity::Char => {
                for &id in ids {
                    text.push_str(self.token_str(id)?);
                }
            }
            Granularity::Bpe => {
                let mut first = true;
                let mut continuing = false;
                for &id in ids {
                    let tok = self.token_str(id)?;
                    if !continuing && !first {
                        text.push(' ');
                    }
                    match tok.strip_suffix(CONTINUATION) {
                        Some(stem) => {
                            text.push_str(stem);
                            continuing = true;
                        }
                        None => {
                            text.push_str(tok);
                            continuing = false;
                        }
                    }
                    first = false;
                }
            }
        }
        Ok(text)
    }

    fn token_str(&self, id: TokenId) -> Result<&str> {
        self.vocab
            .token(id)
            .ok_or_else(|| Error::Argument(format!("token id {id} out of range")))
    }

    /// Merge a timed token sequence into complete words, each with the step
    /// it became complete at.
    ///
    /// The input is the engine's committed token stream; it may end with the
    /// eos token when decoding terminated on end-of-sequence. Char mode: a
    /// word completes at the separator/eos following it (or, under
    /// [`CharWordDelay::LastCharacter`], at its own last character); at an
    /// end without eos the word completes at its last character's step. BPE
    /// mode: a word completes at its first unmarked token; a pending partial
    /// word at the end completes at the eos step when present, otherwise at
    /// its own last token.
    pub fn word_boundaries(
        &self,
        timed_tokens: &[(TokenId, usize)],
        char_delay: CharWordDelay,
    ) -> Result<Vec<(String, usize)>> {
        let eos = self.vocab.eos_id();
        let mut words = Vec::new();
        let mut pending = String::new();
        let mut pending_step = 0usize;

        for &(id, step) in timed_tokens {
            if id == eos {
                if !pending.is_empty() {
                    let at = match (self.vocab.granularity(), char_delay) {
                        (Granularity::Char, CharWordDelay::LastCharacter) => pending_step,
                        _ => step,
                    };
                    words.push((std::mem::take(&mut pending), at));
                }
                return Ok(words);
            }
            let tok = self.token_str(id)?.to_string();
            match self.vocab.granularity() {
                Granularity::Char => {
                    if tok == " " {
                        if !pending.is_empty() {
                            let at = match char_delay {
                                CharWordDelay::FollowingSeparator => step,
                                CharWordDelay::LastCharacter => pending_step,
                            };
                            words.push((std::mem::take(&mut pending), at));
                        }
                    } else {
                        pending.push_str(&tok);
                        pending_step = step;
                    }
                }
                Granularity::Bpe => match tok.strip_suffix(CONTINUATION) {
                    Some(stem) => {
                        pending.push_str(stem);
                        pending_step = step;
                    }
                    None => {
                        pending.push_str(&tok);
                        words.push((std::mem::take(&mut pending), step));
                    }
                },
            }
        }
        if !pending.is_empty() {
            words.push((pending, pending_step));
        }
        Ok(words)
    }
}
