//! Shipped English stopword list, frozen for reproducible graph builds.
//!
//! Version 1. The list covers function words only (pronouns, determiners,
//! conjunctions, adpositions, auxiliaries, common adverbs of degree); it is
//! applied to entity chunks, never to predicates.

pub const STOPWORDS_VERSION: u32 = 1;

pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "across", "after", "again", "against", "all", "almost", "alone",
    "along", "already", "also", "although", "always", "am", "among", "an", "and", "another",
    "any", "anyone", "anything", "are", "as", "at", "back", "be", "because", "been", "before",
    "behind", "being", "below", "between", "both", "but", "by", "can", "cannot", "could", "did",
    "do", "does", "doing", "down", "during", "each", "either", "else", "enough", "etc", "even",
    "ever", "every", "few", "for", "from", "further", "had", "has", "have", "having", "he",
    "hence", "her", "here", "hers", "herself", "him", "himself", "his", "how", "however", "i",
    "if", "in", "indeed", "instead", "into", "is", "it", "its", "itself", "just", "least",
    "less", "may", "me", "might", "mine", "more", "moreover", "most", "much", "must", "my",
    "myself", "neither", "never", "no", "nor", "not", "now", "of", "off", "often", "on", "once",
    "one", "only", "onto", "or", "other", "others", "otherwise", "our", "ours", "ourselves",
    "out", "over", "own", "per", "perhaps", "rather", "same", "shall", "she", "should", "since",
    "so", "some", "someone", "something", "sometimes", "somewhere", "still", "such", "than",
    "that", "the", "their", "theirs", "them", "themselves", "then", "thence", "there",
    "therefore", "these", "they", "this", "those", "though", "through", "thus", "to", "too",
    "toward", "under", "until", "up", "upon", "us", "very", "was", "we", "well", "were", "what",
    "when", "where", "whether", "which", "while", "who", "whom", "whose", "why", "will", "with",
    "within", "without", "would", "yet", "you", "your", "yours", "yourself", "yourselves",
];

/// Membership test against the shipped list (expects lowercased input).
pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_is_sorted_and_deduplicated() {
        // Binary search relies on sort order; duplicates would mean the
        // shipped list drifted from its documented contents.
        for pair in STOPWORDS.windows(2) {
            assert!(pair[0] < pair[1], "{:?} >= {:?}", pair[0], pair[1]);
        }
    }

    #[test]
    fn list_size_near_180() {
        assert!(
            (170..=190).contains(&STOPWORDS.len()),
            "list has {} entries",
            STOPWORDS.len()
        );
    }

    #[test]
    fn membership() {
        assert!(is_stopword("the"));
        assert!(is_stopword("of"));
        assert!(is_stopword("we"));
        assert!(is_stopword("be"));
        assert!(!is_stopword("model"));
        assert!(!is_stopword("accuracy"));
    }
}
