//! Verb-anchored event segmentation: the fine-grained retrieval and fusion
//! units of a sentence.

use serde::{Deserialize, Serialize};

use crate::conllu::ParsedSentence;
use crate::extract::locate_predicates;

/// Relations that open a new clause; event membership never crosses them.
const CLAUSAL_RELATIONS: &[&str] = &["acl", "advcl", "ccomp", "xcomp", "csubj", "parataxis"];

/// A verb-anchored span of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// The anchor verb (or the root token for verbless sentences).
    pub anchor: usize,
    /// Sorted member indices, anchor included.
    pub members: Vec<usize>,
    /// Space-joined surface forms of the members in sentence order.
    pub text: String,
}

fn is_clausal(deprel: &str) -> bool {
    let base = deprel.split(':').next().unwrap_or(deprel);
    CLAUSAL_RELATIONS.contains(&base)
}

fn event_text(sentence: &ParsedSentence, members: &[usize]) -> String {
    members
        .iter()
        .map(|&i| sentence.token(i).surface.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Split a sentence into events: one per predicate, members drawn from the
/// anchor's non-clausal dependent subtrees and truncated at other anchors.
/// Verbless sentences fall back to a single whole-sentence event so
/// retrieval never receives an empty query set.
pub fn segment_events(sentence: &ParsedSentence, max_events: usize) -> Vec<Event> {
    assert!(max_events >= 1, "max_events must be at least 1");
    let anchors = locate_predicates(sentence);
    if anchors.is_empty() {
        let members: Vec<usize> = (1..=sentence.tokens.len()).collect();
        let root = sentence
            .tokens
            .iter()
            .find(|t| t.head == 0)
            .map(|t| t.index)
            .unwrap_or(1);
        let text = event_text(sentence, &members);
        return vec![Event {
            anchor: root,
            members,
            text,
        }];
    }

    let mut events = Vec::new();
    for &anchor in anchors.iter().take(max_events) {
        let mut members = vec![anchor];
        let mut stack: Vec<usize> = sentence
            .children(anchor)
            .into_iter()
            .filter(|&c| !anchors.contains(&c) && !is_clausal(&sentence.token(c).deprel))
            .collect();
        while let Some(current) = stack.pop() {
            members.push(current);
            for child in sentence.children(current) {
                if anchors.contains(&child) || is_clausal(&sentence.token(child).deprel) {
                    continue;
                }
                stack.push(child);
            }
        }
        members.sort_unstable();
        members.dedup();
        let text = event_text(sentence, &members);
        events.push(Event {
            anchor,
            members,
            text,
        });
    }
    events
}

/// Lowercased event text used as the retrieval query. Stopwords stay in;
/// the ranking function down-weights them through document frequency.
pub fn render_event_query(event: &Event) -> String {
    event.text.to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_conllu_str;

    fn parse(input: &str) -> ParsedSentence {
        parse_conllu_str(input).unwrap().into_iter().next().unwrap()
    }

    #[test]
    fn single_verb_whole_span() {
        let s = parse(
            "1\tBERT\tBERT\tPROPN\t_\t_\t2\tnsubj\t_\t_\n\
             2\timproves\timprove\tVERB\t_\t_\t0\troot\t_\t_\n\
             3\taccuracy\taccuracy\tNOUN\t_\t_\t2\tobj\t_\t_\n",
        );
        let events = segment_events(&s, 10);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].anchor, 2);
        assert_eq!(events[0].members, vec![1, 2, 3]);
        assert_eq!(events[0].text, "BERT improves accuracy");
    }

    #[test]
    fn verbless_fragment_falls_back_to_whole_sentence() {
        let s = parse(
            "1\tgreat\tgreat\tADJ\t_\t_\t2\tamod\t_\t_\n\
             2\tresults\tresult\tNOUN\t_\t_\t0\troot\t_\t_\n\
             3\toverall\toverall\tADV\t_\t_\t2\tadvmod\t_\t_\n",
        );
        let events = segment_events(&s, 10);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].members, vec![1, 2, 3]);
        assert_eq!(events[0].anchor, 2);
    }

    fn two_verbs() -> ParsedSentence {
        // "models converge and researchers report gains"
        parse(
            "1\tmodels\tmodel\tNOUN\t_\t_\t2\tnsubj\t_\t_\n\
             2\tconverge\tconverge\tVERB\t_\t_\t0\troot\t_\t_\n\
             3\tand\tand\tCCONJ\t_\t_\t5\tcc\t_\t_\n\
             4\tresearchers\tresearcher\tNOUN\t_\t_\t5\tnsubj\t_\t_\n\
             5\treport\treport\tVERB\t_\t_\t2\tconj\t_\t_\n\
             6\tgains\tgain\tNOUN\t_\t_\t5\tobj\t_\t_\n",
        )
    }

    #[test]
    fn truncation_respects_max_events() {
        let s = two_verbs();
        let events = segment_events(&s, 1);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].anchor, 2);
    }

    #[test]
    fn anchors_are_distinct_and_subtrees_truncate_at_other_anchors() {
        let s = two_verbs();
        let events = segment_events(&s, 10);
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].anchor, 2);
        assert_eq!(events[1].anchor, 5);
        // The conjunct verb and its subtree stay out of the first event.
        assert_eq!(events[0].members, vec![1, 2]);
        assert_eq!(events[1].members, vec![3, 4, 5, 6]);
    }

    #[test]
    fn query_is_lowercased_join() {
        let s = parse(
            "1\tWe\twe\tPRON\t_\t_\t2\tnsubj\t_\t_\n\
             2\tTrain\ttrain\tVERB\t_\t_\t0\troot\t_\t_\n",
        );
        let events = segment_events(&s, 10);
        assert_eq!(render_event_query(&events[0]), "we train");
    }

    #[test]
    fn members_join_in_index_order() {
        let e = Event {
            anchor: 5,
            members: vec![2, 5, 6],
            text: "models Train quickly".to_string(),
        };
        assert_eq!(render_event_query(&e), "models train quickly");
    }

    #[test]
    fn clausal_subtree_excluded() {
        // "we show that models converge": ccomp clause is its own event.
        let s = parse(
            "1\twe\twe\tPRON\t_\t_\t2\tnsubj\t_\t_\n\
             2\tshow\tshow\tVERB\t_\t_\t0\troot\t_\t_\n\
             3\tthat\tthat\tSCONJ\t_\t_\t5\tmark\t_\t_\n\
             4\tmodels\tmodel\tNOUN\t_\t_\t5\tnsubj\t_\t_\n\
             5\tconverge\tconverge\tVERB\t_\t_\t2\tccomp\t_\t_\n",
        );
        let events = segment_events(&s, 10);
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].members, vec![1, 2]);
        assert_eq!(events[1].members, vec![3, 4, 5]);
    }

    #[test]
    fn segmentation_is_deterministic() {
        let s = two_verbs();
        assert_eq!(segment_events(&s, 10), segment_events(&s, 10));
    }
}
