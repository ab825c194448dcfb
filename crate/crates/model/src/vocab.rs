//! Whitespace-token vocabulary with reserved special tokens. Built from
//! the training corpus in first-occurrence order, so identical data yields
//! an identical table.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use skg_core::AugmentedExample;

pub const CLS: usize = 0;
pub const SEP: usize = 1;
pub const UNK: usize = 2;

pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";
pub const UNK_TOKEN: &str = "[UNK]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn with_specials() -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for special in [CLS_TOKEN, SEP_TOKEN, UNK_TOKEN] {
            vocab.intern(special);
        }
        vocab
    }

    fn intern(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Build from every token the classifier will see: pair tokens
    /// (lowercased, matching retrieval normalization) and retrieved
    /// triplet text.
    pub fn build(examples: &[AugmentedExample]) -> Self {
        let mut vocab = Vocabulary::with_specials();
        for example in examples {
            for token in example.premise.iter().chain(&example.hypothesis) {
                vocab.intern(&token.to_lowercase());
            }
            for event in &example.events {
                for triplet in &event.triplets {
                    for token in triplet.split_whitespace() {
                        vocab.intern(token);
                    }
                }
            }
        }
        vocab
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
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

    /// Lookup with the unknown-token fallback.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use skg_core::{Label, PairEvent, SentenceSide};

    fn example() -> AugmentedExample {
        AugmentedExample {
            premise: vec!["BERT".into(), "improves".into(), "accuracy".into()],
            hypothesis: vec!["models".into(), "gain".into()],
            label: Label::Entailment,
            events: vec![PairEvent {
                source: SentenceSide::Premise,
                anchor: 2,
                members: vec![1, 2, 3],
                triplets: vec!["bert improve accuracy".into()],
            }],
        }
    }

    #[test]
    fn specials_reserved() {
        let vocab = Vocabulary::build(&[example()]);
        assert_eq!(vocab.id(CLS_TOKEN), CLS);
        assert_eq!(vocab.id(SEP_TOKEN), SEP);
        assert_eq!(vocab.id(UNK_TOKEN), UNK);
    }

    #[test]
    fn pair_tokens_lowercased_and_shared_with_triplets() {
        let vocab = Vocabulary::build(&[example()]);
        // "BERT" in the premise and "bert" in the triplet map to one id.
        assert_eq!(vocab.id("bert"), 3);
        assert!(vocab.id("unseen-token") == UNK);
    }

    #[test]
    fn build_is_deterministic() {
        let a = Vocabulary::build(&[example()]);
        let b = Vocabulary::build(&[example()]);
        assert_eq!(a.tokens(), b.tokens());
    }

    #[test]
    fn roundtrip_through_token_list() {
        let vocab = Vocabulary::build(&[example()]);
        let rebuilt = Vocabulary::from_tokens(vocab.tokens().to_vec());
        assert_eq!(vocab.id("accuracy"), rebuilt.id("accuracy"));
    }
}
