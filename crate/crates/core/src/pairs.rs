//! Loader for labeled sentence-pair datasets (JSON Lines).

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The four semantic-relation classes of a sentence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Contrasting,
    Reasoning,
    Entailment,
    Neutral,
}

impl Label {
    pub const ALL: [Label; 4] = [
        Label::Contrasting,
        Label::Reasoning,
        Label::Entailment,
        Label::Neutral,
    ];

    /// Stable class index used by the classifier head and the confusion matrix.
    pub fn index(self) -> usize {
        match self {
            Label::Contrasting => 0,
            Label::Reasoning => 1,
            Label::Entailment => 2,
            Label::Neutral => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    /// Case-insensitive label parsing ("reasoning" and "Reasoning" both map
    /// to [`Label::Reasoning`]).
    pub fn parse(value: &str) -> Option<Label> {
        match value.to_ascii_lowercase().as_str() {
            "contrasting" => Some(Label::Contrasting),
            "reasoning" => Some(Label::Reasoning),
            "entailment" => Some(Label::Entailment),
            "neutral" => Some(Label::Neutral),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

/// A whitespace-tokenized premise/hypothesis pair with its gold class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub label: Label,
}

#[derive(Deserialize)]
struct RawPair {
    premise: String,
    hypothesis: String,
    label: String,
}

fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Load labeled pairs from JSON Lines. Blank lines are skipped; record
/// order is preserved.
pub fn load_labeled_pairs(mut reader: impl Read) -> Result<Vec<LabeledPair>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Encoding {
        message: format!("input is not valid UTF-8: {e}"),
    })?;

    let mut pairs = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPair = serde_json::from_str(line)
            .map_err(|e| Error::format(line_no, format!("bad pair record: {e}")))?;
        let label = Label::parse(&raw.label).ok_or_else(|| {
            Error::validation(
                format!("line {line_no}"),
                format!("unknown label {:?}", raw.label),
            )
        })?;
        let premise = tokenize(&raw.premise);
        let hypothesis = tokenize(&raw.hypothesis);
        if premise.is_empty() || hypothesis.is_empty() {
            return Err(Error::validation(
                format!("line {line_no}"),
                "premise and hypothesis must be nonempty",
            ));
        }
        pairs.push(LabeledPair {
            premise,
            hypothesis,
            label,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_record_lowercase_label() {
        let input = r#"{"premise":"a","hypothesis":"b","label":"reasoning"}"#;
        let pairs = load_labeled_pairs(input.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].label, Label::Reasoning);
        assert_eq!(pairs[0].premise, vec!["a"]);
    }

    #[test]
    fn unknown_label_rejected_with_line() {
        let input = "{\"premise\":\"a\",\"hypothesis\":\"b\",\"label\":\"entailment\"}\n\
                     {\"premise\":\"a\",\"hypothesis\":\"b\",\"label\":\"cause\"}\n";
        match load_labeled_pairs(input.as_bytes()) {
            Err(Error::Validation { context, .. }) => assert!(context.contains("2")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn blank_lines_skipped() {
        // Hand-trace of the loader rules: 3 lines, one blank, yields 2 pairs.
        let input = "{\"premise\":\"x y\",\"hypothesis\":\"z\",\"label\":\"Neutral\"}\n\
                     \n\
                     {\"premise\":\"p\",\"hypothesis\":\"q r\",\"label\":\"Contrasting\"}\n";
        let pairs = load_labeled_pairs(input.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].premise, vec!["x", "y"]);
        assert_eq!(pairs[1].hypothesis, vec!["q", "r"]);
    }

    #[test]
    fn missing_field_is_format_error() {
        let input = r#"{"premise":"a","label":"neutral"}"#;
        assert!(matches!(
            load_labeled_pairs(input.as_bytes()),
            Err(Error::Format { line: 1, .. })
        ));
    }

    #[test]
    fn empty_premise_rejected() {
        let input = r#"{"premise":"  ","hypothesis":"b","label":"neutral"}"#;
        assert!(matches!(
            load_labeled_pairs(input.as_bytes()),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn loader_is_deterministic() {
        let input = r#"{"premise":"a b","hypothesis":"c","label":"entailment"}"#;
        let first = load_labeled_pairs(input.as_bytes()).unwrap();
        let second = load_labeled_pairs(input.as_bytes()).unwrap();
        assert_eq!(first, second);
    }
}
