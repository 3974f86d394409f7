//! Plain-text ingestion, n-gram inventory and windowed co-occurrence counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_N: usize = 3;
pub const DEFAULT_MIN_COUNT: u64 = 2;
pub const DEFAULT_WINDOW: usize = 4;

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "do", "does", "for", "from", "has", "have",
    "he", "her", "his", "i", "in", "is", "it", "its", "me", "my", "never", "no", "non", "nor",
    "not", "of", "on", "or", "our", "she", "that", "the", "their", "them", "they", "this", "to",
    "us", "was", "we", "were", "with", "you", "your",
];

/// Tokenization rules applied to raw text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Normalization {
    pub lowercase: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { lowercase: true }
    }
}

impl Normalization {
    /// Splits on every non-alphanumeric character and drops empty pieces.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if self.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .collect()
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    Normalization::default().tokenize(text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Vec<String>>,
}

impl Corpus {
    /// Builds a corpus from in-memory texts, one document per text.
    pub fn from_texts<I, S>(texts: I, normalization: Normalization) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let documents: Vec<Vec<String>> = texts
            .into_iter()
            .map(|t| normalization.tokenize(t.as_ref()))
            .collect();
        if documents.is_empty() {
            return Err(Error::EmptyInput);
        }
        if documents.iter().all(|d| d.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[Vec<String>] {
        &self.documents
    }

    pub fn doc_count(&self) -> usize {
        self.documents.len()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }
}

/// Reads every path as one document, in the order given.
pub fn ingest<P: AsRef<Path>>(paths: &[P], normalization: Normalization) -> Result<Corpus> {
    if paths.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut texts = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        texts.push(text);
    }
    Corpus::from_texts(texts, normalization)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stoplist(BTreeSet<String>);

impl Stoplist {
    pub fn empty() -> Self {
        Stoplist(BTreeSet::new())
    }

    pub fn builtin() -> Self {
        Self::from_words(DEFAULT_STOPWORDS.iter().copied())
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stoplist(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line; `#` starts a comment line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_words(
            text.lines().filter(|l| !l.trim_start().starts_with('#')),
        ))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Frequent n-grams keyed by their space-joined text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermInventory {
    frequency: BTreeMap<String, u64>,
}

impl TermInventory {
    pub fn from_frequencies(frequency: BTreeMap<String, u64>) -> Self {
        TermInventory { frequency }
    }

    pub fn contains(&self, text: &str) -> bool {
        self.frequency.contains_key(text)
    }

    pub fn frequency(&self, text: &str) -> Option<u64> {
        self.frequency.get(text).copied()
    }

    /// Terms in lexicographic order with their counts.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.frequency.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.frequency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequency.is_empty()
    }

    pub(crate) fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.frequency.retain(|k, _| keep(k));
    }
}

/// Counts every n-gram (1 ≤ n ≤ `max_n`) inside documents and keeps those seen
/// at least `min_count` times that are not made only of stopwords.
pub fn extract_terms(
    corpus: &Corpus,
    max_n: usize,
    min_count: u64,
    stoplist: &Stoplist,
) -> TermInventory {
    let max_n = max_n.max(1);
    let min_count = min_count.max(1);
    let mut counts: HashMap<String, u64> = HashMap::new();
    for doc in corpus.documents() {
        for start in 0..doc.len() {
            for n in 1..=max_n.min(doc.len() - start) {
                let gram = &doc[start..start + n];
                if gram.iter().all(|t| stoplist.contains(t)) {
                    continue;
                }
                *counts.entry(gram.join(" ")).or_default() += 1;
            }
        }
    }
    TermInventory {
        frequency: counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect(),
    }
}

/// Sparse symmetric matrix of within-window co-occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceCounts {
    vocab: Vec<String>,
    lookup: HashMap<String, usize>,
    rows: Vec<BTreeMap<usize, u64>>,
    window: usize,
}

impl CooccurrenceCounts {
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.lookup.get(word).copied()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.rows
            .get(i)
            .and_then(|r| r.get(&j))
            .copied()
            .unwrap_or(0)
    }

    pub fn count(&self, a: &str, b: &str) -> u64 {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.get(i, j),
            _ => 0,
        }
    }

    /// Non-zero entries of row `i` in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.rows[i].iter().map(|(j, c)| (*j, *c))
    }

    /// Sum over every matrix entry (off-diagonal pairs contribute twice).
    pub fn total(&self) -> u64 {
        self.rows.iter().flat_map(|r| r.values()).sum()
    }
}

/// Vocabulary is the sorted set of corpus tokens. A positioned pair `(p, q)`
/// with `0 < q - p ≤ window` inside one document adds 1 to both `(a, b)` and
/// `(b, a)`, or 1 to the diagonal when the tokens are equal.
pub fn build_cooccurrence(corpus: &Corpus, window: usize) -> CooccurrenceCounts {
    let window = window.max(1);
    let vocab: Vec<String> = corpus
        .documents()
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let lookup: HashMap<String, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let mut rows = vec![BTreeMap::new(); vocab.len()];
    for doc in corpus.documents() {
        let ids: Vec<usize> = doc.iter().map(|t| lookup[t]).collect();
        for (p, &a) in ids.iter().enumerate() {
            for &b in ids.iter().skip(p + 1).take(window) {
                *rows[a].entry(b).or_insert(0) += 1;
                if a != b {
                    *rows[b].entry(a).or_insert(0) += 1;
                }
            }
        }
    }
    CooccurrenceCounts {
        vocab,
        lookup,
        rows,
        window,
    }
}
