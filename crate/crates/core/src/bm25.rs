//! Okapi BM25 over verbalized knowledge-graph triplets.
//!
//! The index is in-memory and immutable after build; persistence is a
//! rebuild from the triplet file. Scoring uses the non-negative idf
//! smoothing `ln(1 + (N - df + 0.5) / (df + 0.5))`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::events::{render_event_query, Event};
use crate::kg::{KnowledgeGraph, SkgTriplet};
use crate::{Error, Result};

/// Term-frequency saturation (`k1`) and length normalization (`b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Inverted index over verbalized triplets. Document ids are triplet
/// positions in the source graph, so ranks map straight back to triplets.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    postings: HashMap<String, Vec<(usize, usize)>>,
    doc_len: Vec<usize>,
    avg_doc_len: f64,
    doc_count: usize,
    params: Bm25Params,
}

/// Per-event ranked hits: `(triplet_id, score)`, scores non-increasing,
/// ties broken by ascending id.
pub type RetrievedSet = Vec<Vec<(usize, f64)>>;

/// Render one triplet as its retrieval document: "subject predicate object".
pub fn verbalize_triplet(triplet: &SkgTriplet) -> String {
    format!(
        "{} {} {}",
        triplet.subject, triplet.predicate, triplet.object
    )
}

/// Build the index over every triplet of a nonempty graph.
pub fn build_index(kg: &KnowledgeGraph, params: Bm25Params) -> Result<Bm25Index> {
    if kg.triplets.is_empty() {
        return Err(Error::argument("cannot index an empty knowledge graph"));
    }
    let mut postings: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
    let mut doc_len = Vec::with_capacity(kg.triplets.len());
    for (doc_id, triplet) in kg.triplets.iter().enumerate() {
        let document = verbalize_triplet(triplet);
        let tokens: Vec<&str> = document.split_whitespace().collect();
        doc_len.push(tokens.len());
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for token in tokens {
            *tf.entry(token).or_default() += 1;
        }
        // One pass per document keeps postings sorted by doc_id.
        for (term, count) in tf {
            postings
                .entry(term.to_string())
                .or_default()
                .push((doc_id, count));
        }
    }
    let doc_count = doc_len.len();
    let avg_doc_len = doc_len.iter().sum::<usize>() as f64 / doc_count as f64;
    Ok(Bm25Index {
        postings,
        doc_len,
        avg_doc_len,
        doc_count,
        params,
    })
}

#[derive(PartialEq)]
struct Hit {
    score: f64,
    id: usize,
}

impl Eq for Hit {}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        // Higher score wins; equal scores prefer the lower id.
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Bm25Index {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_len(&self, doc_id: usize) -> Option<usize> {
        self.doc_len.get(doc_id).copied()
    }

    pub fn postings(&self, term: &str) -> Option<&[(usize, usize)]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    fn idf(&self, document_frequency: usize) -> f64 {
        let n = self.doc_count as f64;
        let df = document_frequency as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, term_frequency: usize, doc_id: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = term_frequency as f64;
        let dl = self.doc_len[doc_id] as f64;
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avg_doc_len))
    }

    /// BM25 score of one document against the query terms. Terms absent
    /// from the document contribute zero.
    pub fn score(&self, query: &[&str], doc_id: usize) -> Result<f64> {
        if doc_id >= self.doc_count {
            return Err(Error::argument(format!(
                "doc_id {doc_id} outside index of {} documents",
                self.doc_count
            )));
        }
        let mut total = 0.0;
        for term in query {
            let Some(postings) = self.postings.get(*term) else {
                continue;
            };
            let Ok(pos) = postings.binary_search_by_key(&doc_id, |&(d, _)| d) else {
                continue;
            };
            total += self.idf(postings.len()) * self.term_weight(postings[pos].1, doc_id);
        }
        Ok(total)
    }

    /// Top-k documents for one tokenized query, best first. Documents
    /// sharing no term with the query never enter the result.
    pub fn topk_for_query(&self, query: &[&str], k: usize) -> Vec<(usize, f64)> {
        let mut accumulator: HashMap<usize, f64> = HashMap::new();
        for term in query {
            let Some(postings) = self.postings.get(*term) else {
                continue;
            };
            let idf = self.idf(postings.len());
            for &(doc_id, tf) in postings {
                *accumulator.entry(doc_id).or_default() += idf * self.term_weight(tf, doc_id);
            }
        }
        let mut heap: BinaryHeap<std::cmp::Reverse<Hit>> = BinaryHeap::with_capacity(k + 1);
        for (id, score) in accumulator {
            if score <= 0.0 {
                continue;
            }
            heap.push(std::cmp::Reverse(Hit { score, id }));
            if heap.len() > k {
                heap.pop();
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|std::cmp::Reverse(hit)| (hit.id, hit.score))
            .collect()
    }

    /// Retrieve top-k triplets for each event query.
    pub fn retrieve_topk(&self, events: &[Event], k: usize) -> Result<RetrievedSet> {
        if k == 0 {
            return Err(Error::argument("k must be at least 1"));
        }
        Ok(events
            .iter()
            .map(|event| {
                let query = render_event_query(event);
                let terms: Vec<&str> = query.split_whitespace().collect();
                self.topk_for_query(&terms, k)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{KnowledgeGraph, LambdaMode};
    use std::collections::BTreeMap;

    fn graph(rows: &[(&str, &str, &str)]) -> KnowledgeGraph {
        KnowledgeGraph {
            triplets: rows
                .iter()
                .map(|(s, p, o)| SkgTriplet {
                    subject: s.to_string(),
                    predicate: p.to_string(),
                    object: o.to_string(),
                    frequency: 1,
                    sources: vec!["t".to_string()],
                })
                .collect(),
            entity_freq: BTreeMap::new(),
            lambda_used: 0,
            lambda_mode: LambdaMode::DropAtOrBelow,
        }
    }

    fn event(text: &str) -> Event {
        Event {
            anchor: 1,
            members: (1..=text.split_whitespace().count()).collect(),
            text: text.to_string(),
        }
    }

    #[test]
    fn verbalization_joins_slots() {
        let kg = graph(&[("bert", "improve", "accuracy")]);
        assert_eq!(verbalize_triplet(&kg.triplets[0]), "bert improve accuracy");
    }

    #[test]
    fn suffixed_predicate_stays_one_token() {
        let kg = graph(&[("model", "train_on", "dataset")]);
        let doc = verbalize_triplet(&kg.triplets[0]);
        assert_eq!(doc.split_whitespace().count(), 3);
        assert!(doc.contains("train_on"));
    }

    #[test]
    fn multiword_subject_lengthens_document() {
        let kg = graph(&[("neural machine translation", "improve", "quality")]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        assert_eq!(index.doc_len(0), Some(5));
    }

    #[test]
    fn average_doc_len() {
        let kg = graph(&[("a b", "p", "x"), ("a b c d", "p", "x")]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        assert!((index.avg_doc_len() - 5.0).abs() < 1e-12);
        assert_eq!(index.doc_len(0), Some(4));
        assert_eq!(index.doc_len(1), Some(6));
    }

    #[test]
    fn shared_term_postings_sorted() {
        let kg = graph(&[
            ("bert", "improve", "accuracy"),
            ("gpt", "improve", "fluency"),
        ]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        assert_eq!(index.postings("improve"), Some(&[(0, 1), (1, 1)][..]));
    }

    #[test]
    fn empty_graph_is_argument_error() {
        let kg = graph(&[]);
        assert!(matches!(
            build_index(&kg, Bm25Params::default()),
            Err(Error::Argument { .. })
        ));
    }

    #[test]
    fn disjoint_query_scores_zero() {
        let kg = graph(&[("bert", "improve", "accuracy")]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        assert_eq!(index.score(&["unrelated", "words"], 0).unwrap(), 0.0);
    }

    #[test]
    fn single_doc_score_matches_hand_evaluation() {
        // One document "bert improve accuracy", query = the same three
        // terms. With N = 1, df = 1: idf = ln(1 + 0.5/1.5) = ln(4/3); with
        // tf = 1 and dl = avgdl the term weight is exactly 1, so the score
        // is 3 ln(4/3) = 0.86304621735534258...
        let kg = graph(&[("bert", "improve", "accuracy")]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        let score = index.score(&["bert", "improve", "accuracy"], 0).unwrap();
        assert!((score - 0.8630462173553426).abs() < 1e-12);
    }

    #[test]
    fn longer_doc_scores_lower_at_equal_tf() {
        let kg = graph(&[
            ("bert", "improve", "accuracy"),
            ("bert large variant", "improve", "accuracy of parsing"),
        ]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        let short = index.score(&["bert"], 0).unwrap();
        let long = index.score(&["bert"], 1).unwrap();
        assert!(short > long);
    }

    #[test]
    fn unknown_doc_id_is_argument_error() {
        let kg = graph(&[("bert", "improve", "accuracy")]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        assert!(matches!(index.score(&["bert"], 5), Err(Error::Argument { .. })));
    }

    #[test]
    fn k_at_least_doc_count_returns_all_positive_docs_sorted() {
        let kg = graph(&[
            ("bert", "improve", "accuracy"),
            ("bert", "reduce", "latency"),
            ("gpt", "generate", "text"),
        ]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        let hits = index.topk_for_query(&["bert"], 10);
        assert_eq!(hits.len(), 2);
        assert!(hits[0].1 >= hits[1].1);
    }

    #[test]
    fn equal_scores_prefer_lower_id() {
        let kg = graph(&[
            ("bert", "improve", "accuracy"),
            ("bert", "improve", "accuracy"),
        ]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        let hits = index.topk_for_query(&["bert"], 2);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].0, 0);
        assert_eq!(hits[1].0, 1);
        assert_eq!(hits[0].1, hits[1].1);
    }

    #[test]
    fn zero_score_docs_excluded() {
        let kg = graph(&[("bert", "improve", "accuracy")]);
        let index = build_index(&kg, Bm25Params::default()).unwrap();
        let hits = index.retrieve_topk(&[event("unmatched query")], 5).unwrap();
        assert!(hits[0].is_empty());
    }
}
