//! Conversion of augmented records into model-ready id sequences with
//! event positions mapped into the concatenated-pair coordinate space.

use skg_core::AugmentedExample;

use crate::config::ModelConfig;
use crate::vocab::{Vocabulary, CLS, SEP};

/// One event ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedEvent {
    /// Member positions inside the `[CLS] P [SEP] Q` sequence, after
    /// truncation.
    pub positions: Vec<usize>,
    /// Token ids of `[CLS] t1 [SEP] t2 [SEP] ... [SEP]`; `None` when the
    /// event retrieved nothing (the zero-knowledge embedding stands in).
    pub knowledge_ids: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedExample {
    /// `[CLS] P [SEP] Q`, truncated to the configured maximum.
    pub pair_ids: Vec<usize>,
    /// Pair sequence with all retrieved triplet text appended, for the
    /// sentence-concatenation mode.
    pub sent_concat_ids: Vec<usize>,
    pub events: Vec<PreparedEvent>,
    pub label: usize,
}

/// Map an augmented record into id space. Events whose members all fall
/// beyond the sequence budget are dropped with a warning.
pub fn prepare_example(
    example: &AugmentedExample,
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> PreparedExample {
    let premise_len = example.premise.len();

    let mut pair_ids = Vec::with_capacity(2 + premise_len + example.hypothesis.len());
    pair_ids.push(CLS);
    for token in &example.premise {
        pair_ids.push(vocab.id(&token.to_lowercase()));
    }
    pair_ids.push(SEP);
    for token in &example.hypothesis {
        pair_ids.push(vocab.id(&token.to_lowercase()));
    }
    pair_ids.truncate(config.max_seq_len);

    // Sentence-concatenation variant: append every event's triplets,
    // [SEP]-separated, under the same length budget.
    let mut sent_concat_ids = pair_ids.clone();
    'outer: for event in &example.events {
        for triplet in &event.triplets {
            sent_concat_ids.push(SEP);
            for token in triplet.split_whitespace() {
                sent_concat_ids.push(vocab.id(token));
            }
            if sent_concat_ids.len() >= config.max_seq_len {
                break 'outer;
            }
        }
    }
    sent_concat_ids.truncate(config.max_seq_len);

    let mut events = Vec::new();
    for event in example.events.iter().take(config.max_events) {
        let mut source_positions: Vec<usize> = event
            .members
            .iter()
            .map(|&member| match event.source {
                // [CLS] is position 0, premise token i sits at position i,
                // [SEP] at premise_len + 1, hypothesis token j after that.
                skg_core::SentenceSide::Premise => member,
                skg_core::SentenceSide::Hypothesis => premise_len + 1 + member,
            })
            .collect();
        source_positions.retain(|&p| p < pair_ids.len());
        if config.pool_endpoints_only && source_positions.len() > 2 {
            source_positions = vec![
                source_positions[0],
                *source_positions.last().expect("nonempty"),
            ];
        }
        if source_positions.is_empty() {
            log::warn!("event truncated away entirely; dropping it");
            continue;
        }

        let knowledge_ids = if event.triplets.is_empty() {
            None
        } else {
            let mut ids = vec![CLS];
            for triplet in &event.triplets {
                for token in triplet.split_whitespace() {
                    ids.push(vocab.id(token));
                }
                ids.push(SEP);
            }
            ids.truncate(config.knowledge_max_len);
            Some(ids)
        };
        events.push(PreparedEvent {
            positions: source_positions,
            knowledge_ids,
        });
    }

    PreparedExample {
        pair_ids,
        sent_concat_ids,
        events,
        label: example.label.index(),
    }
}

pub fn prepare_all(
    examples: &[AugmentedExample],
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> Vec<PreparedExample> {
    examples
        .iter()
        .map(|e| prepare_example(e, vocab, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use skg_core::{Label, PairEvent, SentenceSide};

    fn example() -> AugmentedExample {
        AugmentedExample {
            premise: vec!["BERT".into(), "improves".into(), "accuracy".into()],
            hypothesis: vec!["models".into(), "gain".into()],
            label: Label::Reasoning,
            events: vec![
                PairEvent {
                    source: SentenceSide::Premise,
                    anchor: 2,
                    members: vec![1, 2, 3],
                    triplets: vec!["bert improve accuracy".into()],
                },
                PairEvent {
                    source: SentenceSide::Hypothesis,
                    anchor: 2,
                    members: vec![1, 2],
                    triplets: vec![],
                },
            ],
        }
    }

    fn config() -> ModelConfig {
        ModelConfig {
            vocab_size: 0,
            embed_dim: 8,
            max_seq_len: 16,
            knowledge_max_len: 8,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn pair_layout_and_positions() {
        let ex = example();
        let vocab = Vocabulary::build(&[ex.clone()]);
        let prepared = prepare_example(&ex, &vocab, &config());
        // [CLS] bert improves accuracy [SEP] models gain
        assert_eq!(prepared.pair_ids.len(), 7);
        assert_eq!(prepared.pair_ids[0], CLS);
        assert_eq!(prepared.pair_ids[4], SEP);
        // Premise event members 1..3 map to positions 1..3.
        assert_eq!(prepared.events[0].positions, vec![1, 2, 3]);
        // Hypothesis members 1..2 map past the separator: 3 + 1 + member.
        assert_eq!(prepared.events[1].positions, vec![5, 6]);
    }

    #[test]
    fn knowledge_sequence_pattern() {
        let ex = example();
        let vocab = Vocabulary::build(&[ex.clone()]);
        let prepared = prepare_example(&ex, &vocab, &config());
        let ids = prepared.events[0].knowledge_ids.as_ref().unwrap();
        assert_eq!(ids[0], CLS);
        assert_eq!(*ids.last().unwrap(), SEP);
        assert_eq!(prepared.events[1].knowledge_ids, None);
    }

    #[test]
    fn truncation_drops_out_of_range_members() {
        let ex = example();
        let vocab = Vocabulary::build(&[ex.clone()]);
        let tight = ModelConfig {
            max_seq_len: 5,
            ..config()
        };
        let prepared = prepare_example(&ex, &vocab, &tight);
        // Hypothesis positions 5 and 6 fall outside the 5-token budget, so
        // the second event disappears.
        assert_eq!(prepared.events.len(), 1);
        assert_eq!(prepared.pair_ids.len(), 5);
    }

    #[test]
    fn endpoints_only_pooling_keeps_span_ends() {
        let ex = example();
        let vocab = Vocabulary::build(&[ex.clone()]);
        let cfg = ModelConfig {
            pool_endpoints_only: true,
            ..config()
        };
        let prepared = prepare_example(&ex, &vocab, &cfg);
        assert_eq!(prepared.events[0].positions, vec![1, 3]);
    }

    #[test]
    fn sent_concat_appends_triplets() {
        let ex = example();
        let vocab = Vocabulary::build(&[ex.clone()]);
        let prepared = prepare_example(&ex, &vocab, &config());
        assert!(prepared.sent_concat_ids.len() > prepared.pair_ids.len());
        assert_eq!(prepared.sent_concat_ids[7], SEP);
        assert!(prepared.sent_concat_ids.len() <= 16);
    }
}
