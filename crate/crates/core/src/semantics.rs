//! PPMI term vectors and the similarity, relatedness and contradiction relations.
//!
//! Every unigram gets the PPMI-weighted row of the co-occurrence matrix
//! (optionally projected onto its leading spectral components). Multiword
//! terms are the mean of their non-stopword token vectors and all closeness
//! relations are cosine-based.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{CooccurrenceCounts, Stoplist, TermInventory};
use crate::error::{Error, Result};
use crate::term::Term;

pub const DEFAULT_TAU_REL: f64 = 0.35;
pub const DEFAULT_TAU_TOPIC: f64 = 0.25;
pub const DEFAULT_TEMPERATURE: f64 = 0.15;
pub const DEFAULT_NEGATORS: &[&str] = &["never", "no", "non", "not"];

const BUNDLE_FORMAT: &str = "biwheel-index-1";
const HEADER_FILE: &str = "header.txt";
const VOCAB_FILE: &str = "vocab.txt";
const VECTORS_FILE: &str = "vectors.bin";
const INVENTORY_FILE: &str = "inventory.tsv";
const ANTONYMS_FILE: &str = "antonyms.tsv";

/// Unordered word pairs; each pair is stored with its words sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AntonymLexicon {
    pairs: BTreeSet<(String, String)>,
}

impl AntonymLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: &str, b: &str) {
        let (a, b) = (a.trim().to_lowercase(), b.trim().to_lowercase());
        if a <= b {
            self.pairs.insert((a, b));
        } else {
            self.pairs.insert((b, a));
        }
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        let key = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.pairs.contains(&key)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Parses `word1<TAB>word2` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lexicon = Self::new();
        for (n, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty() || f.contains(' ')) {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: n + 1,
                    message: "expected two tab-separated words".into(),
                });
            }
            lexicon.insert(fields[0], fields[1]);
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn to_tsv(&self) -> String {
        self.iter().fold(String::new(), |mut out, (a, b)| {
            let _ = writeln!(out, "{a}\t{b}");
            out
        })
    }
}

/// Settings that shape an index beyond the raw counts.
#[derive(Debug, Clone)]
pub struct IndexOptions {
    pub stoplist: Stoplist,
    pub negators: BTreeSet<String>,
    pub antonyms: AntonymLexicon,
    pub dims: Option<usize>,
    pub max_n: usize,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            stoplist: Stoplist::builtin(),
            negators: DEFAULT_NEGATORS.iter().map(|s| s.to_string()).collect(),
            antonyms: AntonymLexicon::new(),
            dims: None,
            max_n: crate::corpus::DEFAULT_MAX_N,
        }
    }
}

/// Dense PPMI matrix: `max(0, ln(P(i,j) / (P(i) P(j))))`, zero where counts are zero.
pub fn ppmi_matrix(counts: &CooccurrenceCounts) -> Vec<Vec<f64>> {
    let n = counts.vocab().len();
    let total = counts.total() as f64;
    let marginals: Vec<f64> = (0..n)
        .map(|i| counts.row(i).map(|(_, c)| c as f64).sum())
        .collect();
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, c) in counts.row(i) {
            let pmi = ((c as f64) * total / (marginals[i] * marginals[j])).ln();
            row[j] = pmi.max(0.0);
        }
    }
    out
}

/// Projects rows onto the `dims` eigenvectors with the largest |eigenvalue|.
fn spectral_projection(matrix: &[Vec<f64>], dims: usize) -> Vec<Vec<f64>> {
    let n = matrix.len();
    let dims = dims.min(n);
    let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .abs()
            .total_cmp(&eig.eigenvalues[a].abs())
            .then(a.cmp(&b))
    });
    let mut basis = DMatrix::<f64>::zeros(n, dims);
    for (k, &col) in order.iter().take(dims).enumerate() {
        let v = eig.eigenvectors.column(col);
        // fix the sign so the largest-magnitude component is positive
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        basis.set_column(k, &(v * sign));
    }
    let projected = m * basis;
    (0..n)
        .map(|i| projected.row(i).iter().copied().collect())
        .collect()
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu * nv).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone)]
pub struct SemanticIndex {
    vocab: Vec<String>,
    lookup: HashMap<String, usize>,
    dims: usize,
    vectors: Vec<Vec<f32>>,
    inventory: TermInventory,
    antonyms: AntonymLexicon,
    negators: BTreeSet<String>,
    stoplist: Stoplist,
    max_n: usize,
    window: usize,
    // inventory terms in lexicographic order with cached vectors
    terms: Vec<Term>,
    term_vectors: Vec<Vec<f64>>,
}

impl SemanticIndex {
    pub fn build(
        counts: &CooccurrenceCounts,
        inventory: &TermInventory,
        options: IndexOptions,
    ) -> Self {
        let ppmi = ppmi_matrix(counts);
        let projected = match options.dims {
            Some(d) if d > 0 && d < ppmi.len() => spectral_projection(&ppmi, d),
            _ => ppmi,
        };
        let vectors: Vec<Vec<f32>> = projected
            .iter()
            .map(|r| r.iter().map(|&x| x as f32).collect())
            .collect();
        let dims = vectors.first().map_or(0, Vec::len);
        Self::assemble(
            counts.vocab().to_vec(),
            dims,
            vectors,
            inventory.clone(),
            options,
            counts.window(),
        )
    }

    fn assemble(
        vocab: Vec<String>,
        dims: usize,
        vectors: Vec<Vec<f32>>,
        mut inventory: TermInventory,
        options: IndexOptions,
        window: usize,
    ) -> Self {
        let lookup = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let mut index = SemanticIndex {
            vocab,
            lookup,
            dims,
            vectors,
            inventory: TermInventory::default(),
            antonyms: options.antonyms,
            negators: options.negators,
            stoplist: options.stoplist,
            max_n: options.max_n,
            window,
            terms: Vec::new(),
            term_vectors: Vec::new(),
        };
        inventory.retain(|text| Term::parse(text).and_then(|t| index.compose(&t)).is_some());
        for (text, _) in inventory.iter() {
            let term = Term::parse(text).expect("inventory terms are non-empty");
            let v = index.compose(&term).expect("filtered above");
            index.terms.push(term);
            index.term_vectors.push(v);
        }
        index.inventory = inventory;
        index
    }

    /// Mean of the content-token vectors, or `None` if the term is not
    /// representable (no content token, unknown token, too long, zero vector).
    fn compose(&self, term: &Term) -> Option<Vec<f64>> {
        if term.len() > self.max_n {
            return None;
        }
        let ids: Vec<usize> = term
            .tokens()
            .iter()
            .filter(|t| !self.stoplist.contains(t))
            .map(|t| self.lookup.get(t.as_str()).copied())
            .collect::<Option<_>>()?;
        let v = self.mean_of(&ids)?;
        v.iter().any(|&x| x != 0.0).then_some(v)
    }

    fn mean_of(&self, ids: &[usize]) -> Option<Vec<f64>> {
        if ids.is_empty() {
            return None;
        }
        let mut acc = vec![0.0f64; self.dims];
        for &i in ids {
            for (a, &x) in acc.iter_mut().zip(&self.vectors[i]) {
                *a += f64::from(x);
            }
        }
        let n = ids.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Some(acc)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn word_vector(&self, word: &str) -> Option<&[f32]> {
        self.lookup.get(word).map(|&i| self.vectors[i].as_slice())
    }

    pub fn inventory(&self) -> &TermInventory {
        &self.inventory
    }

    /// Inventory terms in lexicographic order.
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn antonyms(&self) -> &AntonymLexicon {
        &self.antonyms
    }

    pub fn negators(&self) -> &BTreeSet<String> {
        &self.negators
    }

    pub fn stoplist(&self) -> &Stoplist {
        &self.stoplist
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// A term is indexed when it is an inventory term or composes from known
    /// content tokens into a non-zero vector within the n-gram length limit.
    pub fn is_indexed(&self, term: &Term) -> bool {
        self.term_vector(term).is_ok()
    }

    pub fn term_vector(&self, term: &Term) -> Result<Vec<f64>> {
        if let Ok(pos) = self.terms.binary_search(term) {
            return Ok(self.term_vectors[pos].clone());
        }
        self.compose(term)
            .ok_or_else(|| Error::UnknownTerm(term.text().to_string()))
    }

    /// Cosine of the two term vectors, in [-1, 1].
    pub fn similarity(&self, a: &Term, b: &Term) -> Result<f64> {
        Ok(cosine(&self.term_vector(a)?, &self.term_vector(b)?))
    }

    pub fn related(&self, a: &Term, b: &Term, tau_rel: f64) -> Result<bool> {
        Ok(self.similarity(a, b)? >= tau_rel)
    }

    /// Two terms contradict when they clash lexically (an antonym pair split
    /// across them, or a negator in exactly one of them next to a shared
    /// content token) and what is left after removing the clashing tokens is
    /// still topically close (cosine ≥ `tau_topic`). A side with nothing left
    /// counts as on-topic.
    pub fn contradicts(&self, a: &Term, b: &Term, tau_topic: f64) -> Result<bool> {
        self.term_vector(a)?;
        self.term_vector(b)?;
        let ta: BTreeSet<&str> = a.tokens().iter().map(String::as_str).collect();
        let tb: BTreeSet<&str> = b.tokens().iter().map(String::as_str).collect();

        let mut clash_a: BTreeSet<&str> = BTreeSet::new();
        let mut clash_b: BTreeSet<&str> = BTreeSet::new();
        for x in ta.difference(&tb) {
            for y in tb.difference(&ta) {
                if self.antonyms.contains(x, y) {
                    clash_a.insert(x);
                    clash_b.insert(y);
                }
            }
        }
        let neg_a = ta.iter().any(|t| self.negators.contains(*t));
        let neg_b = tb.iter().any(|t| self.negators.contains(*t));
        let negation = neg_a != neg_b
            && ta
                .intersection(&tb)
                .any(|t| !self.negators.contains(*t) && !self.stoplist.contains(t));
        if negation {
            clash_a.extend(ta.iter().filter(|t| self.negators.contains(**t)));
            clash_b.extend(tb.iter().filter(|t| self.negators.contains(**t)));
        }
        if clash_a.is_empty() && clash_b.is_empty() {
            return Ok(false);
        }
        let rest = |term: &Term, clash: &BTreeSet<&str>| -> Option<Vec<f64>> {
            let ids: Vec<usize> = term
                .tokens()
                .iter()
                .filter(|t| !clash.contains(t.as_str()) && !self.stoplist.contains(t))
                .filter_map(|t| self.lookup.get(t.as_str()).copied())
                .collect();
            self.mean_of(&ids)
        };
        Ok(match (rest(a, &clash_a), rest(b, &clash_b)) {
            (Some(u), Some(v)) => cosine(&u, &v) >= tau_topic,
            _ => true,
        })
    }

    /// Samples up to `k` inventory terms other than `term` without
    /// replacement, each draw proportional to `exp(similarity / temperature)`.
    /// A non-positive temperature picks greedily by similarity.
    pub fn neighbors<R: Rng + ?Sized>(
        &self,
        term: &Term,
        k: usize,
        rng: &mut R,
        temperature: f64,
    ) -> Result<Vec<Term>> {
        let query = self.term_vector(term)?;
        let mut pool: Vec<(usize, f64)> = self
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.text() != term.text())
            .map(|(i, _)| (i, cosine(&query, &self.term_vectors[i])))
            .collect();
        let mut out = Vec::with_capacity(k.min(pool.len()));
        while out.len() < k && !pool.is_empty() {
            let pick = if temperature > 0.0 {
                sample_softmax(&pool, temperature, rng)
            } else {
                argmax(&pool)
            };
            let (i, _) = pool.remove(pick);
            out.push(self.terms[i].clone());
        }
        Ok(out)
    }

    /// Inventory term closest to `vector` by cosine; ties go to the first in order.
    pub fn nearest(&self, vector: &[f64]) -> Option<&Term> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.term_vectors.iter().enumerate() {
            let s = cosine(vector, v);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| &self.terms[i])
    }

    fn header(&self) -> String {
        let join = |it: &mut dyn Iterator<Item = &str>| it.collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let _ = writeln!(out, "format={BUNDLE_FORMAT}");
        let _ = writeln!(out, "vocab_size={}", self.vocab.len());
        let _ = writeln!(out, "dims={}", self.dims);
        let _ = writeln!(out, "inventory_size={}", self.inventory.len());
        let _ = writeln!(out, "antonym_pairs={}", self.antonyms.len());
        let _ = writeln!(out, "max_n={}", self.max_n);
        let _ = writeln!(out, "window={}", self.window);
        let _ = writeln!(out, "stoplist={}", join(&mut self.stoplist.iter()));
        let _ = writeln!(
            out,
            "negators={}",
            join(&mut self.negators.iter().map(String::as_str))
        );
        out
    }

    /// The bundle files as `(name, bytes)` in a fixed order.
    pub fn bundle_files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let vocab = self.vocab.iter().fold(String::new(), |mut s, w| {
            s.push_str(w);
            s.push('\n');
            s
        });
        let mut vectors = Vec::with_capacity(self.vocab.len() * self.dims * 4);
        for row in &self.vectors {
            for x in row {
                vectors.extend_from_slice(&x.to_le_bytes());
            }
        }
        let inventory = self.inventory.iter().fold(String::new(), |mut s, (t, f)| {
            let _ = writeln!(s, "{t}\t{f}");
            s
        });
        vec![
            (HEADER_FILE, self.header().into_bytes()),
            (VOCAB_FILE, vocab.into_bytes()),
            (VECTORS_FILE, vectors),
            (INVENTORY_FILE, inventory.into_bytes()),
            (ANTONYMS_FILE, self.antonyms.to_tsv().into_bytes()),
        ]
    }

    /// Hex SHA-256 over the bundle files.
    pub fn fingerprint(&self) -> String {
        fingerprint_of(self.bundle_files().iter().map(|(n, b)| (*n, b.as_slice())))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, bytes) in self.bundle_files() {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<(PathBuf, Vec<u8>)> {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            Ok((path, bytes))
        };
        let utf8 = |(path, bytes): (PathBuf, Vec<u8>)| -> Result<(PathBuf, String)> {
            String::from_utf8(bytes)
                .map(|s| (path.clone(), s))
                .map_err(|_| Error::Bundle(format!("{} is not UTF-8", path.display())))
        };

        let (_, header) = utf8(read(HEADER_FILE)?)?;
        let fields: HashMap<&str, &str> =
            header.lines().filter_map(|l| l.split_once('=')).collect();
        let field = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Bundle(format!("header is missing `{k}`")))
        };
        let number = |k: &str| -> Result<usize> {
            field(k)?
                .parse()
                .map_err(|_| Error::Bundle(format!("header field `{k}` is not a count")))
        };
        if field("format")? != BUNDLE_FORMAT {
            return Err(Error::Bundle(format!(
                "unsupported format `{}`",
                field("format")?
            )));
        }
        let vocab_size = number("vocab_size")?;
        let dims = number("dims")?;
        let max_n = number("max_n")?;
        let window = number("window")?;
        let stoplist = Stoplist::from_words(field("stoplist")?.split_whitespace());
        let negators = field("negators")?
            .split_whitespace()
            .map(String::from)
            .collect();

        let (_, vocab_text) = utf8(read(VOCAB_FILE)?)?;
        let vocab: Vec<String> = vocab_text.lines().map(String::from).collect();
        if vocab.len() != vocab_size {
            return Err(Error::Bundle(format!(
                "vocabulary has {} entries, header says {vocab_size}",
                vocab.len()
            )));
        }

        let (_, raw) = read(VECTORS_FILE)?;
        if raw.len() != vocab_size * dims * 4 {
            return Err(Error::Bundle(format!(
                "vector file has {} bytes, expected {}",
                raw.len(),
                vocab_size * dims * 4
            )));
        }
        let flat: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let vectors = if dims == 0 {
            vec![Vec::new(); vocab_size]
        } else {
            flat.chunks(dims).map(<[f32]>::to_vec).collect()
        };

        let (inv_path, inv_text) = utf8(read(INVENTORY_FILE)?)?;
        let mut freq = std::collections::BTreeMap::new();
        for (n, line) in inv_text.lines().enumerate() {
            let parsed = line
                .split_once('\t')
                .and_then(|(t, f)| f.parse::<u64>().ok().map(|f| (t.to_string(), f)));
            let (term, f) = parsed.ok_or_else(|| Error::Parse {
                path: inv_path.clone(),
                line: n + 1,
                message: "expected `term<TAB>frequency`".into(),
            })?;
            freq.insert(term, f);
        }

        let (ant_path, ant_text) = utf8(read(ANTONYMS_FILE)?)?;
        let antonyms = AntonymLexicon::parse(&ant_text, &ant_path)?;

        let options = IndexOptions {
            stoplist,
            negators,
            antonyms,
            dims: Some(dims),
            max_n,
        };
        let index = Self::assemble(
            vocab,
            dims,
            vectors,
            TermInventory::from_frequencies(freq),
            options,
            window,
        );
        if index.inventory.len() != number("inventory_size")? {
            return Err(Error::Bundle("inventory size does not match header".into()));
        }
        Ok(index)
    }
}

fn fingerprint_of<'a>(files: impl Iterator<Item = (&'a str, &'a [u8])>) -> String {
    let mut hasher = Sha256::new();
    for (name, bytes) in files {
        hasher.update(name.as_bytes());
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    hex::encode(hasher.finalize())
}

fn argmax(pool: &[(usize, f64)]) -> usize {
    let mut best = 0;
    for (k, &(_, s)) in pool.iter().enumerate() {
        if s > pool[best].1 {
            best = k;
        }
    }
    best
}

fn sample_softmax<R: Rng + ?Sized>(pool: &[(usize, f64)], temperature: f64, rng: &mut R) -> usize {
    let top = pool
        .iter()
        .map(|&(_, s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = pool
        .iter()
        .map(|&(_, s)| ((s - top) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if target < *w {
            return k;
        }
        target -= w;
    }
    // rounding left us past the end; fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
