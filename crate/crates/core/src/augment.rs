//! Assemble classifier-ready records: labeled pairs, their pooled events
//! and the verbalized triplets retrieved for each event.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bm25::{verbalize_triplet, Bm25Index};
use crate::conllu::ParsedSentence;
use crate::events::segment_events;
use crate::kg::KnowledgeGraph;
use crate::pairs::{Label, LabeledPair};
use crate::{Error, Result};

/// Which side of the pair an event came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceSide {
    Premise,
    Hypothesis,
}

/// One pooled event with its retrieved knowledge, positions still in
/// per-sentence coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEvent {
    pub source: SentenceSide,
    pub anchor: usize,
    /// 1-based token indices within the source sentence.
    pub members: Vec<usize>,
    /// Verbalized retrieved triplets, best first.
    pub triplets: Vec<String>,
}

/// A labeled pair plus its knowledge-augmented events; the unit consumed
/// by classifier training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub label: Label,
    pub events: Vec<PairEvent>,
}

fn check_alignment(side: &str, tokens: &[String], parse: &ParsedSentence) -> Result<()> {
    if tokens.len() != parse.tokens.len() {
        return Err(Error::validation(
            format!("sentence {}", parse.sent_id),
            format!(
                "{side} has {} whitespace tokens but its parse has {} tokens",
                tokens.len(),
                parse.tokens.len()
            ),
        ));
    }
    Ok(())
}

/// Augment one pair: segment both sides, pool events premise-first, cap at
/// `max_events`, then retrieve `k` triplets per event.
pub fn augment_pair(
    pair: &LabeledPair,
    premise_parse: &ParsedSentence,
    hypothesis_parse: &ParsedSentence,
    kg: &KnowledgeGraph,
    index: &Bm25Index,
    k: usize,
    max_events: usize,
) -> Result<AugmentedExample> {
    check_alignment("premise", &pair.premise, premise_parse)?;
    check_alignment("hypothesis", &pair.hypothesis, hypothesis_parse)?;

    let mut pooled: Vec<(SentenceSide, crate::events::Event)> = Vec::new();
    for event in segment_events(premise_parse, max_events) {
        pooled.push((SentenceSide::Premise, event));
    }
    for event in segment_events(hypothesis_parse, max_events) {
        pooled.push((SentenceSide::Hypothesis, event));
    }
    pooled.truncate(max_events);

    let events: Vec<crate::events::Event> = pooled.iter().map(|(_, e)| e.clone()).collect();
    let retrieved = index.retrieve_topk(&events, k)?;

    let events = pooled
        .into_iter()
        .zip(retrieved)
        .map(|((source, event), hits)| PairEvent {
            source,
            anchor: event.anchor,
            members: event.members,
            triplets: hits
                .into_iter()
                .map(|(doc_id, _)| verbalize_triplet(&kg.triplets[doc_id]))
                .collect(),
        })
        .collect();

    Ok(AugmentedExample {
        premise: pair.premise.clone(),
        hypothesis: pair.hypothesis.clone(),
        label: pair.label,
        events,
    })
}

/// Augment a dataset; `parses[i]` must hold the premise and hypothesis
/// parses of `pairs[i]`.
pub fn augment_pairs(
    pairs: &[LabeledPair],
    parses: &[(ParsedSentence, ParsedSentence)],
    kg: &KnowledgeGraph,
    index: &Bm25Index,
    k: usize,
    max_events: usize,
) -> Result<Vec<AugmentedExample>> {
    if pairs.len() != parses.len() {
        return Err(Error::argument(format!(
            "{} pairs but {} parse pairs",
            pairs.len(),
            parses.len()
        )));
    }
    pairs
        .iter()
        .zip(parses)
        .map(|(pair, (p, h))| augment_pair(pair, p, h, kg, index, k, max_events))
        .collect()
}

pub fn write_examples(examples: &[AugmentedExample], mut writer: impl Write) -> Result<()> {
    for example in examples {
        serde_json::to_writer(&mut writer, example)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_examples(mut reader: impl Read) -> Result<Vec<AugmentedExample>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut examples = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let example: AugmentedExample = serde_json::from_str(line)
            .map_err(|e| Error::format(line_no + 1, format!("bad augmented record: {e}")))?;
        examples.push(example);
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bm25::{build_index, Bm25Params};
    use crate::conllu::parse_conllu_str;
    use crate::kg::{build_skg, LambdaMode};
    use crate::extract::extract_triplets;

    fn fixture() -> (Vec<LabeledPair>, Vec<(ParsedSentence, ParsedSentence)>, KnowledgeGraph) {
        let conllu = "# sent_id = p0\n\
                      1\tBERT\tBERT\tPROPN\t_\t_\t2\tnsubj\t_\t_\n\
                      2\timproves\timprove\tVERB\t_\t_\t0\troot\t_\t_\n\
                      3\taccuracy\taccuracy\tNOUN\t_\t_\t2\tobj\t_\t_\n\
                      \n\
                      # sent_id = h0\n\
                      1\tmodels\tmodel\tNOUN\t_\t_\t2\tnsubj\t_\t_\n\
                      2\tgain\tgain\tVERB\t_\t_\t0\troot\t_\t_\n\
                      3\taccuracy\taccuracy\tNOUN\t_\t_\t2\tobj\t_\t_\n";
        let sentences = parse_conllu_str(conllu).unwrap();
        let mut candidates = Vec::new();
        for s in &sentences {
            candidates.extend(extract_triplets(s));
        }
        let kg = build_skg(candidates, 0, LambdaMode::DropAtOrBelow);
        let pairs = vec![LabeledPair {
            premise: vec!["BERT".into(), "improves".into(), "accuracy".into()],
            hypothesis: vec!["models".into(), "gain".into(), "accuracy".into()],
            label: Label::Entailment,
        }];
        let parses = vec![(sentences[0].clone(), sentences[1].clone())];
        (pairs, parses, kg)
    }

    #[test]
    fn pools_premise_then_hypothesis() {
        let (pairs, parses, kg) = fixture();
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        let examples = augment_pairs(&pairs, &parses, &kg, &index, 10, 10).unwrap();
        assert_eq!(examples.len(), 1);
        let events = &examples[0].events;
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].source, SentenceSide::Premise);
        assert_eq!(events[1].source, SentenceSide::Hypothesis);
        // Both events share the "accuracy" term, so both retrieve.
        assert!(!events[0].triplets.is_empty());
        assert!(!events[1].triplets.is_empty());
    }

    #[test]
    fn cap_applies_after_pooling() {
        let (pairs, parses, kg) = fixture();
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        let examples = augment_pairs(&pairs, &parses, &kg, &index, 10, 1).unwrap();
        let events = &examples[0].events;
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].source, SentenceSide::Premise);
    }

    #[test]
    fn misaligned_parse_rejected() {
        let (mut pairs, parses, kg) = fixture();
        pairs[0].premise.push("extra".into());
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        assert!(matches!(
            augment_pairs(&pairs, &parses, &kg, &index, 10, 10),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn jsonl_roundtrip() {
        let (pairs, parses, kg) = fixture();
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        let examples = augment_pairs(&pairs, &parses, &kg, &index, 10, 10).unwrap();
        let mut buffer = Vec::new();
        write_examples(&examples, &mut buffer).unwrap();
        assert_eq!(read_examples(buffer.as_slice()).unwrap(), examples);
    }
}
