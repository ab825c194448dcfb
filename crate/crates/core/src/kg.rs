//! Knowledge-graph construction: the three filtering heuristics and the
//! deduplicated triplet store.
//!
//! Filter order is fixed and frequency counting happens on normalized
//! entities: meaningless-token removal, then stopword stripping, then the
//! frequency threshold.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::{Chunk, TripletCandidate};
use crate::stopwords::{is_stopword, STOPWORDS_VERSION};
use crate::{Error, Result};

/// How the frequency threshold compares against entity counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LambdaMode {
    /// Drop entities with frequency <= lambda, so lambda = 1 removes hapax
    /// entities. The default reading.
    #[default]
    DropAtOrBelow,
    /// Drop entities with frequency < lambda, under which lambda = 1 is
    /// vacuous.
    DropBelow,
}

/// A deduplicated graph triplet with its corpus frequency and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkgTriplet {
    #[serde(rename = "s")]
    pub subject: String,
    #[serde(rename = "p")]
    pub predicate: String,
    #[serde(rename = "o")]
    pub object: String,
    #[serde(rename = "freq")]
    pub frequency: usize,
    pub sources: Vec<String>,
}

/// The scientific knowledge graph: filtered, deduplicated triplets plus the
/// entity-frequency table the threshold was applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub triplets: Vec<SkgTriplet>,
    /// Frequency of each surviving entity over the filtered candidate list.
    pub entity_freq: BTreeMap<String, usize>,
    pub lambda_used: usize,
    pub lambda_mode: LambdaMode,
}

fn is_purely_numeric(word: &str) -> bool {
    word.chars().any(|c| c.is_ascii_digit())
        && word
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | '%'))
}

fn is_purely_punctuation(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| !c.is_alphanumeric())
}

fn is_single_letter(word: &str) -> bool {
    let mut chars = word.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphabetic())
}

fn is_meaningless(word: &str) -> bool {
    is_single_letter(word) || is_purely_numeric(word) || is_purely_punctuation(word)
}

/// Rebuild a chunk keeping only tokens that pass `keep`; `None` when the
/// chunk empties out.
fn retain_chunk_tokens(chunk: &Chunk, keep: impl Fn(&str) -> bool) -> Option<Chunk> {
    let words: Vec<&str> = chunk.text.split_whitespace().collect();
    let mut indices = Vec::new();
    let mut kept = Vec::new();
    for (i, word) in words.iter().enumerate() {
        if keep(word) {
            kept.push(*word);
            if let Some(&idx) = chunk.token_indices.get(i) {
                indices.push(idx);
            }
        }
    }
    if kept.is_empty() {
        None
    } else {
        Some(Chunk {
            token_indices: indices,
            text: kept.join(" "),
        })
    }
}

fn filter_chunks(
    candidates: Vec<TripletCandidate>,
    keep: impl Fn(&str) -> bool + Copy,
) -> Vec<TripletCandidate> {
    candidates
        .into_iter()
        .filter_map(|candidate| {
            let subject = retain_chunk_tokens(&candidate.subject, keep)?;
            let object = retain_chunk_tokens(&candidate.object, keep)?;
            Some(TripletCandidate {
                subject,
                object,
                ..candidate
            })
        })
        .collect()
}

/// Remove single letters, numbers and punctuation from entity chunks;
/// candidates whose subject or object empties out are dropped.
pub fn filter_meaningless(candidates: Vec<TripletCandidate>) -> Vec<TripletCandidate> {
    filter_chunks(candidates, |w| !is_meaningless(w))
}

/// Remove stopwords from entity chunks (predicates are exempt); candidates
/// whose subject or object empties out are dropped.
pub fn strip_stopwords(candidates: Vec<TripletCandidate>) -> Vec<TripletCandidate> {
    filter_chunks(candidates, |w| !is_stopword(w))
}

fn entity_counts(candidates: &[TripletCandidate]) -> HashMap<&str, usize> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for candidate in candidates {
        *counts.entry(candidate.subject.text.as_str()).or_default() += 1;
        *counts.entry(candidate.object.text.as_str()).or_default() += 1;
    }
    counts
}

fn passes(frequency: usize, lambda: usize, mode: LambdaMode) -> bool {
    match mode {
        LambdaMode::DropAtOrBelow => frequency > lambda,
        LambdaMode::DropBelow => frequency >= lambda,
    }
}

/// Drop candidates containing a low-frequency entity. Iterates to a fixed
/// point: removing a candidate lowers its partner entity's count, so a
/// single pass could leave survivors below the threshold.
pub fn filter_low_frequency(
    mut candidates: Vec<TripletCandidate>,
    lambda: usize,
    mode: LambdaMode,
) -> Vec<TripletCandidate> {
    loop {
        let counts: HashMap<String, usize> = entity_counts(&candidates)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let before = candidates.len();
        candidates.retain(|c| {
            passes(counts[&c.subject.text], lambda, mode)
                && passes(counts[&c.object.text], lambda, mode)
        });
        if candidates.len() == before {
            return candidates;
        }
    }
}

/// Run the three filters in order and aggregate the survivors into the
/// deduplicated graph. An empty result is legal (logged, not an error).
pub fn build_skg(
    candidates: Vec<TripletCandidate>,
    lambda: usize,
    mode: LambdaMode,
) -> KnowledgeGraph {
    let filtered = filter_low_frequency(
        strip_stopwords(filter_meaningless(candidates)),
        lambda,
        mode,
    );
    if filtered.is_empty() {
        log::warn!("knowledge graph is empty after filtering (lambda = {lambda})");
    }

    let mut entity_freq = BTreeMap::new();
    for (entity, count) in entity_counts(&filtered) {
        entity_freq.insert(entity.to_string(), count);
    }

    let mut triplets: Vec<SkgTriplet> = Vec::new();
    let mut by_key: HashMap<(String, String, String), usize> = HashMap::new();
    for candidate in filtered {
        let key = (
            candidate.subject.text.clone(),
            candidate.predicate.clone(),
            candidate.object.text.clone(),
        );
        match by_key.get(&key) {
            Some(&pos) => {
                triplets[pos].frequency += 1;
                triplets[pos].sources.push(candidate.sent_id);
            }
            None => {
                by_key.insert(key, triplets.len());
                triplets.push(SkgTriplet {
                    subject: candidate.subject.text,
                    predicate: candidate.predicate,
                    object: candidate.object.text,
                    frequency: 1,
                    sources: vec![candidate.sent_id],
                });
            }
        }
    }

    KnowledgeGraph {
        triplets,
        entity_freq,
        lambda_used: lambda,
        lambda_mode: mode,
    }
}

/// Uniform sample of `n` triplets without replacement, reproducible from
/// the seed. Emitted with provenance so annotators can audit entity and
/// relation correctness.
pub fn sample_audit(kg: &KnowledgeGraph, n: usize, seed: u64) -> Result<Vec<SkgTriplet>> {
    if n > kg.triplets.len() {
        return Err(Error::argument(format!(
            "requested {} samples from a graph of {} triplets",
            n,
            kg.triplets.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..kg.triplets.len()).collect();
    // Partial Fisher-Yates: the first n slots are a uniform sample.
    for i in 0..n {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    Ok(indices[..n]
        .iter()
        .map(|&i| kg.triplets[i].clone())
        .collect())
}

/// Sidecar metadata written next to the triplet file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkgMeta {
    pub lambda: usize,
    pub lambda_mode: LambdaMode,
    pub triplet_count: usize,
    /// Number of surviving candidates, i.e. the sum of triplet frequencies.
    pub candidate_count: usize,
    pub entity_count: usize,
    pub stopwords_version: u32,
    /// SHA-256 of the candidate input, when built through the CLI.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_hash: Option<String>,
}

impl KnowledgeGraph {
    pub fn meta(&self, corpus_hash: Option<String>) -> SkgMeta {
        SkgMeta {
            lambda: self.lambda_used,
            lambda_mode: self.lambda_mode,
            triplet_count: self.triplets.len(),
            candidate_count: self.triplets.iter().map(|t| t.frequency).sum(),
            entity_count: self.entity_freq.len(),
            stopwords_version: STOPWORDS_VERSION,
            corpus_hash,
        }
    }

    /// Write the graph as JSON Lines, one triplet per line.
    pub fn write_jsonl(&self, mut writer: impl Write) -> Result<()> {
        for triplet in &self.triplets {
            serde_json::to_writer(&mut writer, triplet)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuild a graph from its JSON Lines form. The entity table is
    /// recounted from triplet frequencies, which reproduces the build-time
    /// table exactly.
    pub fn read_jsonl(mut reader: impl Read, lambda: usize, mode: LambdaMode) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut triplets = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let triplet: SkgTriplet = serde_json::from_str(line)
                .map_err(|e| Error::format(line_no + 1, format!("bad triplet record: {e}")))?;
            triplets.push(triplet);
        }
        let mut entity_freq: BTreeMap<String, usize> = BTreeMap::new();
        for t in &triplets {
            *entity_freq.entry(t.subject.clone()).or_default() += t.frequency;
            *entity_freq.entry(t.object.clone()).or_default() += t.frequency;
        }
        Ok(KnowledgeGraph {
            triplets,
            entity_freq,
            lambda_used: lambda,
            lambda_mode: mode,
        })
    }
}
