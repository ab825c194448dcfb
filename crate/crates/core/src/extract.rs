//! Subject-predicate-object triplet extraction from dependency trees.
//!
//! Predicates are lexical verbs; arguments are noun chunks grown through a
//! closed set of modifier relations. Oblique arguments are admitted with
//! their case marker folded into the predicate ("evaluate" + "on" ->
//! "evaluate_on"), and passive subjects swap with the agent when one is
//! present. The whole relation inventory is validated against a
//! hand-annotated mini corpus rather than any gold parser.

use serde::{Deserialize, Serialize};

use crate::conllu::{ParsedSentence, Upos};

/// Relations an argument chunk may grow through, starting at its head.
const CHUNK_RELATIONS: &[&str] = &["compound", "amod", "flat", "nummod", "nmod"];

/// Deprels that mark a verb as an auxiliary or copula dependent rather than
/// a lexical predicate.
const NON_PREDICATE_RELATIONS: &[&str] = &["aux", "aux:pass", "cop"];

/// A contiguous-by-closure argument span: sorted token indices plus the
/// normalized (lowercased lemma) text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub token_indices: Vec<usize>,
    pub text: String,
}

/// One extracted (subject, predicate, object) candidate with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletCandidate {
    pub subject: Chunk,
    pub predicate: String,
    pub object: Chunk,
    pub sent_id: String,
}

/// Indices of lexical-verb predicates, ascending. AUX tokens and verbs in
/// auxiliary/copula positions are excluded.
pub fn locate_predicates(sentence: &ParsedSentence) -> Vec<usize> {
    sentence
        .tokens
        .iter()
        .filter(|t| t.upos == Upos::VERB && !NON_PREDICATE_RELATIONS.contains(&t.deprel.as_str()))
        .map(|t| t.index)
        .collect()
}

/// Grow the argument chunk rooted at `head_index`: the head plus every
/// dependent reachable through modifier relations only. An `nmod` dependent
/// brings its `case` token along; clausal and coordination relations are
/// never crossed.
pub fn extract_argument_chunk(sentence: &ParsedSentence, head_index: usize) -> Chunk {
    let mut members = vec![head_index];
    let mut stack = vec![head_index];
    while let Some(current) = stack.pop() {
        for child in sentence.children(current) {
            let deprel = sentence.token(child).deprel.as_str();
            if CHUNK_RELATIONS.contains(&deprel) {
                members.push(child);
                stack.push(child);
                if deprel == "nmod" {
                    for grandchild in sentence.children(child) {
                        if sentence.token(grandchild).deprel == "case" {
                            members.push(grandchild);
                        }
                    }
                }
            }
        }
    }
    members.sort_unstable();
    members.dedup();
    let text = members
        .iter()
        .map(|&i| sentence.token(i).norm())
        .collect::<Vec<_>>()
        .join(" ");
    Chunk {
        token_indices: members,
        text,
    }
}

/// Where a predicate found its subject dependent.
struct SubjectLink {
    /// Token index of the subject dependent.
    index: usize,
    /// True when the dependent is `nsubj:pass`.
    passive: bool,
    /// The verb the subject is attached to; differs from the predicate when
    /// the subject was re-resolved through a `conj` chain.
    owner: usize,
}

/// Subjects of `predicate`, re-resolving through the conjunct head chain
/// when a coordinated verb carries no subject of its own.
fn find_subjects(sentence: &ParsedSentence, predicate: usize) -> Vec<SubjectLink> {
    let mut verb = predicate;
    loop {
        let subjects: Vec<SubjectLink> = sentence
            .children(verb)
            .into_iter()
            .filter_map(|child| match sentence.token(child).deprel.as_str() {
                "nsubj" => Some(SubjectLink {
                    index: child,
                    passive: false,
                    owner: verb,
                }),
                "nsubj:pass" => Some(SubjectLink {
                    index: child,
                    passive: true,
                    owner: verb,
                }),
                _ => None,
            })
            .collect();
        if !subjects.is_empty() {
            return subjects;
        }
        let token = sentence.token(verb);
        if token.deprel == "conj" && token.head != 0 {
            verb = token.head;
        } else {
            return Vec::new();
        }
    }
}

/// The lemma of the `case` dependent of `index`, if any.
fn case_marker(sentence: &ParsedSentence, index: usize) -> Option<String> {
    sentence
        .children(index)
        .into_iter()
        .find(|&c| sentence.token(c).deprel == "case")
        .map(|c| sentence.token(c).norm())
}

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|i| !b.contains(i))
}

/// Extract every triplet candidate of one sentence. Deterministic and
/// order-stable: predicates ascending, objects in sentence order.
pub fn extract_triplets(sentence: &ParsedSentence) -> Vec<TripletCandidate> {
    let mut out = Vec::new();
    for predicate in locate_predicates(sentence) {
        let lemma = sentence.token(predicate).norm();
        if lemma.is_empty() {
            continue;
        }
        let subjects = find_subjects(sentence, predicate);
        if subjects.is_empty() {
            continue;
        }

        // Direct and oblique object specs: (object head, predicate string).
        let mut objects: Vec<(usize, String)> = Vec::new();
        for child in sentence.children(predicate) {
            match sentence.token(child).deprel.as_str() {
                "obj" | "iobj" => objects.push((child, lemma.clone())),
                "obl" => {
                    // An oblique only qualifies when its case marker can be
                    // folded into the predicate.
                    if let Some(case) = case_marker(sentence, child) {
                        objects.push((child, format!("{lemma}_{case}")));
                    }
                }
                _ => {}
            }
        }

        for subject in &subjects {
            if subject.passive {
                // Passive voice: the agent becomes the subject and the
                // grammatical subject becomes an object. Without an agent
                // there is no subject slot and the candidate is dropped.
                let agent = [predicate, subject.owner]
                    .iter()
                    .flat_map(|&v| sentence.children(v))
                    .find(|&c| sentence.token(c).deprel == "obl:agent");
                let Some(agent) = agent else {
                    continue;
                };
                let subject_chunk = extract_argument_chunk(sentence, agent);
                let mut pairs = vec![(subject.index, lemma.clone())];
                pairs.extend(objects.iter().cloned());
                for (object_head, predicate_text) in pairs {
                    push_candidate(
                        sentence,
                        &mut out,
                        subject_chunk.clone(),
                        predicate_text,
                        object_head,
                    );
                }
            } else {
                let subject_chunk = extract_argument_chunk(sentence, subject.index);
                for (object_head, predicate_text) in objects.iter().cloned() {
                    push_candidate(
                        sentence,
                        &mut out,
                        subject_chunk.clone(),
                        predicate_text,
                        object_head,
                    );
                }
            }
        }
    }
    out
}

fn push_candidate(
    sentence: &ParsedSentence,
    out: &mut Vec<TripletCandidate>,
    subject: Chunk,
    predicate: String,
    object_head: usize,
) {
    let object = extract_argument_chunk(sentence, object_head);
    if subject.text.is_empty() || object.text.is_empty() || predicate.is_empty() {
        return;
    }
    if !disjoint(&subject.token_indices, &object.token_indices) {
        return;
    }
    out.push(TripletCandidate {
        subject,
        predicate,
        object,
        sent_id: sentence.sent_id.clone(),
    });
}
