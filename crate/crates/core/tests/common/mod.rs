#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use biwheel::annotator::AnnotationSource;
use biwheel::biwheel::PairSets;
use biwheel::cli::{self, IndexArgs};
use biwheel::config::BiWheelConfig;
use biwheel::semantics::{cosine, SemanticIndex};
use biwheel::stream::StreamKind;
use biwheel::term::Term;
use biwheel::trace::Trace;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn corpus_paths() -> Vec<PathBuf> {
    ["street.txt", "emblem.txt", "commission.txt"]
        .iter()
        .map(|f| fixtures().join("corpus").join(f))
        .collect()
}

pub fn index_args() -> IndexArgs {
    IndexArgs {
        antonyms: Some(fixtures().join("antonyms.tsv")),
        ..IndexArgs::new(corpus_paths())
    }
}

struct Shared {
    _dir: tempfile::TempDir,
    path: PathBuf,
    index: SemanticIndex,
}

fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index");
        let index = cli::cmd_index(&index_args(), &path).unwrap();
        Shared {
            _dir: dir,
            path,
            index,
        }
    })
}

/// The fixture index, built once per test binary.
pub fn index() -> &'static SemanticIndex {
    &shared().index
}

pub fn index_dir() -> &'static Path {
    &shared().path
}

pub fn t(s: &str) -> Term {
    Term::parse(s).unwrap()
}

/// A fixture config with every path made absolute and pointed at the shared index.
pub fn config(name: &str) -> BiWheelConfig {
    let path = fixtures().join("configs").join(format!("{name}.json"));
    let mut cfg = BiWheelConfig::load(&path).unwrap();
    cfg.resolve_paths(path.parent().unwrap());
    cfg.index = Some(index_dir().to_path_buf());
    cfg.output = None;
    cfg
}

/// Writes `cfg` into `dir` and returns the config path.
pub fn write_config(dir: &Path, name: &str, cfg: &BiWheelConfig) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, cfg.to_json_pretty()).unwrap();
    path
}

pub fn annotations(cfg: &BiWheelConfig, k: usize) -> AnnotationSource {
    let obj = &cfg.objects[k];
    match &obj.annotations {
        Some(p) => AnnotationSource::load(obj.id.clone(), p, index()).unwrap(),
        None => AnnotationSource::empty(obj.id.clone()),
    }
}

pub type Pair = (String, String);

/// Related pairs, contradicting pairs, and the three projections.
pub type OracleSets = (
    BTreeSet<Pair>,
    BTreeSet<Pair>,
    BTreeSet<String>,
    BTreeSet<String>,
    BTreeSet<String>,
);

/// Set-level restatement of the pair classification.
pub fn oracle_sets(
    pas: &[Term],
    pool: &[Term],
    index: &SemanticIndex,
    tau_rel: f64,
    tau_topic: f64,
) -> OracleSets {
    let mut l1 = BTreeSet::new();
    let mut l2 = BTreeSet::new();
    for a in pas {
        for b in pool {
            let va = index.term_vector(a).unwrap();
            let vb = index.term_vector(b).unwrap();
            let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
            let n = (va.iter().map(|x| x * x).sum::<f64>() * vb.iter().map(|x| x * x).sum::<f64>())
                .sqrt();
            let sim = if n == 0.0 { 0.0 } else { dot / n };
            let key = (a.text().to_string(), b.text().to_string());
            if sim >= tau_rel {
                l1.insert(key.clone());
                if index.contradicts(a, b, tau_topic).unwrap() {
                    l2.insert(key);
                }
            }
        }
    }
    let s: BTreeSet<String> = l1.iter().map(|(a, _)| a.clone()).collect();
    let s1: BTreeSet<String> = l1.difference(&l2).map(|(_, b)| b.clone()).collect();
    let s2: BTreeSet<String> = l2.iter().map(|(_, b)| b.clone()).collect();
    (l1, l2, s, s1, s2)
}

pub fn as_set(pairs: &[(Term, Term)]) -> BTreeSet<Pair> {
    pairs
        .iter()
        .map(|(a, b)| (a.text().to_string(), b.text().to_string()))
        .collect()
}

pub fn text_set(terms: &[Term]) -> BTreeSet<String> {
    terms.iter().map(|x| x.text().to_string()).collect()
}

/// Exact comparison of `sets` against the set-level oracle.
pub fn pair_sets_agree(
    sets: &PairSets,
    pas: &[Term],
    pool: &[Term],
    index: &SemanticIndex,
    tau_rel: f64,
    tau_topic: f64,
) -> bool {
    let (l1, l2, s, s1, s2) = oracle_sets(pas, pool, index, tau_rel, tau_topic);
    let distinct_pas: BTreeSet<&str> = pas.iter().map(Term::text).collect();
    let distinct_pool: BTreeSet<&str> = pool.iter().map(Term::text).collect();
    sets.pairs.len() == distinct_pas.len() * distinct_pool.len()
        && as_set(&sets.related) == l1
        && as_set(&sets.contradicting) == l2
        && text_set(&sets.pas_side) == s
        && text_set(&sets.to_pas) == s1
        && text_set(&sets.to_oas) == s2
}

/// Every (person step, object step) pair scoring at least `tau`.
pub fn brute_resonance(trace: &Trace, index: &SemanticIndex, tau: f64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for a in trace.events().filter(|e| e.kind == StreamKind::Pas) {
        for b in trace.events().filter(|e| e.kind == StreamKind::Oas) {
            let score = if a.event.term == b.event.term {
                1.0
            } else {
                cosine(
                    &index.term_vector(&a.event.term).unwrap(),
                    &index.term_vector(&b.event.term).unwrap(),
                )
            };
            if score >= tau {
                out.push((a.event.step, b.event.step));
            }
        }
    }
    out
}
