//! CoNLL-U reader for dependency-parsed corpora.
//!
//! Parsing itself is an external preprocessing step; this module only
//! consumes its standard 10-column output. Multiword-token ranges (`1-2`)
//! and empty nodes (`1.1`) are skipped: extraction operates on the
//! syntactic token layer only.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Universal POS tags (UD v2 inventory).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Upos {
    ADJ,
    ADP,
    ADV,
    AUX,
    CCONJ,
    DET,
    INTJ,
    NOUN,
    NUM,
    PART,
    PRON,
    PROPN,
    PUNCT,
    SCONJ,
    SYM,
    VERB,
    X,
}

impl FromStr for Upos {
    type Err = ();

    fn from_str(value: &str) -> std::result::Result<Self, Self::Err> {
        use Upos::*;
        match value {
            "ADJ" => Ok(ADJ),
            "ADP" => Ok(ADP),
            "ADV" => Ok(ADV),
            "AUX" => Ok(AUX),
            "CCONJ" => Ok(CCONJ),
            "DET" => Ok(DET),
            "INTJ" => Ok(INTJ),
            "NOUN" => Ok(NOUN),
            "NUM" => Ok(NUM),
            "PART" => Ok(PART),
            "PRON" => Ok(PRON),
            "PROPN" => Ok(PROPN),
            "PUNCT" => Ok(PUNCT),
            "SCONJ" => Ok(SCONJ),
            "SYM" => Ok(SYM),
            "VERB" => Ok(VERB),
            "X" => Ok(X),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

/// One syntactic token of a dependency parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position within the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: Upos,
    /// Index of the syntactic head; 0 marks the root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    /// Lowercased lemma, falling back to the surface form when the lemma
    /// column was `_`.
    pub fn norm(&self) -> String {
        if self.lemma.is_empty() {
            self.surface.to_lowercase()
        } else {
            self.lemma.to_lowercase()
        }
    }
}

/// A validated dependency-parsed sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub sent_id: String,
    pub tokens: Vec<Token>,
}

impl ParsedSentence {
    /// Build a sentence and check every structural invariant: consecutive
    /// 1..n indices, heads in range and non-reflexive, at least one root,
    /// and an acyclic head graph.
    pub fn new(sent_id: impl Into<String>, tokens: Vec<Token>) -> Result<Self> {
        let sentence = ParsedSentence {
            sent_id: sent_id.into(),
            tokens,
        };
        sentence.validate()?;
        Ok(sentence)
    }

    fn invalid(&self, message: impl Into<String>) -> Error {
        Error::validation(format!("sentence {}", self.sent_id), message)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(self.invalid("sentence has no tokens"));
        }
        for (pos, token) in self.tokens.iter().enumerate() {
            if token.index != pos + 1 {
                return Err(self.invalid(format!(
                    "token indices not consecutive: expected {}, found {}",
                    pos + 1,
                    token.index
                )));
            }
            if token.head > n {
                return Err(self.invalid(format!(
                    "token {} has head {} outside [0, {}]",
                    token.index, token.head, n
                )));
            }
            if token.head == token.index {
                return Err(self.invalid(format!("token {} is its own head", token.index)));
            }
            if token.deprel.is_empty() {
                return Err(self.invalid(format!("token {} has an empty deprel", token.index)));
            }
        }
        if !self.tokens.iter().any(|t| t.head == 0) {
            return Err(self.invalid("no root token (head = 0)"));
        }
        // Walk each head chain; a chain longer than n tokens means a cycle.
        for token in &self.tokens {
            let mut current = token.head;
            let mut steps = 0;
            while current != 0 {
                current = self.tokens[current - 1].head;
                steps += 1;
                if steps > n {
                    return Err(self.invalid(format!(
                        "cyclic head chain starting at token {}",
                        token.index
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    /// Indices of the direct dependents of `head` (0 for root dependents),
    /// in sentence order.
    pub fn children(&self, head: usize) -> Vec<usize> {
        self.tokens
            .iter()
            .filter(|t| t.head == head)
            .map(|t| t.index)
            .collect()
    }
}

fn field(value: &str) -> String {
    if value == "_" {
        String::new()
    } else {
        value.to_string()
    }
}

/// Parse a CoNLL-U byte stream into validated sentences.
///
/// Comment lines contribute only the `# sent_id = ...` metadata; sentences
/// without one get a sequential `s<n>` id. Multiword ranges and empty nodes
/// are skipped.
pub fn parse_conllu(mut reader: impl Read) -> Result<Vec<ParsedSentence>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Encoding {
        message: format!("input is not valid UTF-8: {e}"),
    })?;
    parse_conllu_str(&text)
}

pub fn parse_conllu_str(text: &str) -> Result<Vec<ParsedSentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sent_id: Option<String> = None;

    let mut finish = |tokens: &mut Vec<Token>, sent_id: &mut Option<String>| -> Result<()> {
        if tokens.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let id = sent_id
            .take()
            .unwrap_or_else(|| format!("s{}", sentences.len() + 1));
        sentences.push(ParsedSentence::new(id, std::mem::take(tokens))?);
        Ok(())
    };

    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            finish(&mut tokens, &mut sent_id)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::format(
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        // Multiword ranges ("1-2") and empty nodes ("1.1") carry no parse
        // structure of their own.
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| Error::format(line_no, format!("invalid token id {:?}", cols[0])))?;
        let upos = Upos::from_str(cols[3]).map_err(|_| {
            Error::validation(
                format!("line {line_no}"),
                format!("unknown universal POS tag {:?}", cols[3]),
            )
        })?;
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::format(line_no, format!("invalid head {:?}", cols[6])))?;
        tokens.push(Token {
            index,
            surface: field(cols[1]),
            lemma: field(cols[2]),
            upos,
            head,
            deprel: field(cols[7]),
        });
    }
    finish(&mut tokens, &mut sent_id)?;
    Ok(sentences)
}

/// Serialize one sentence back to CoNLL-U, inverse of [`parse_conllu`].
pub fn sentence_to_conllu(sentence: &ParsedSentence) -> String {
    let mut out = format!("# sent_id = {}\n", sentence.sent_id);
    for t in &sentence.tokens {
        let unfield = |s: &str| if s.is_empty() { "_".to_string() } else { s.to_string() };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_\n",
            t.index,
            unfield(&t.surface),
            unfield(&t.lemma),
            t.upos,
            t.head,
            unfield(&t.deprel),
        ));
    }
    out.push('\n');
    out
}

/// Distinct sentence ids, used by loaders that join parses to datasets.
pub fn sentence_index(sentences: &[ParsedSentence]) -> Result<HashSet<&str>> {
    let mut seen = HashSet::new();
    for s in sentences {
        if !seen.insert(s.sent_id.as_str()) {
            return Err(Error::validation(
                format!("sentence {}", s.sent_id),
                "duplicate sent_id",
            ));
        }
    }
    Ok(seen)
}
