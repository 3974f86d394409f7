//! A single weighted term stream: initialization from generating elements,
//! attractor selection under the environmental/continuity conditions,
//! portion generation and selective summarization.

use std::collections::BTreeSet;
use std::fmt;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::SemanticIndex;
use crate::term::Term;

pub const DEFAULT_PORTION_SIZE: usize = 5;
pub const DEFAULT_RETRY_BOUND: usize = 8;
pub const DEFAULT_SUMMARIZE_WINDOW: usize = 12;
pub const DEFAULT_CLUSTER_MIN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Pas,
    Oas,
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamKind::Pas => "pas",
            StreamKind::Oas => "oas",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Support,
    Interleave,
    Summary,
    Annotation,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::Support,
        Role::Interleave,
        Role::Summary,
        Role::Annotation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Support => "support",
            Role::Interleave => "interleave",
            Role::Summary => "summary",
            Role::Annotation => "annotation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Environmental,
    Continuity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenSource {
    Environment,
    Object,
    Persona,
}

/// Global step counter shared by every stream of a run.
#[derive(Debug, Clone, Default)]
pub struct Clock {
    next: u64,
}

impl Clock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tick(&mut self) -> u64 {
        let step = self.next;
        self.next += 1;
        step
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEvent {
    pub step: u64,
    pub term: Term,
    pub role: Role,
    pub origin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attractor: Option<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

/// The seed terms of a stream, deduplicated in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingSet {
    terms: Vec<Term>,
    source: GenSource,
}

impl GeneratingSet {
    pub fn new(terms: impl IntoIterator<Item = Term>, source: GenSource) -> Self {
        let mut seen = BTreeSet::new();
        let terms = terms
            .into_iter()
            .filter(|t| seen.insert(t.text().to_string()))
            .collect();
        GeneratingSet { terms, source }
    }

    /// Normalizes raw strings and keeps only indexed terms, warning about the rest.
    pub fn resolve<S: AsRef<str>>(
        raw: &[S],
        source: GenSource,
        index: &SemanticIndex,
        label: &str,
    ) -> Result<Self> {
        let mut kept = Vec::new();
        for r in raw {
            match Term::parse(r.as_ref()) {
                Some(t) if index.is_indexed(&t) => kept.push(t),
                _ => warn!("{label}: dropping unindexed term `{}`", r.as_ref()),
            }
        }
        let set = Self::new(kept, source);
        if set.is_empty() {
            return Err(Error::EmptyGeneratingSet(label.to_string()));
        }
        Ok(set)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn source(&self) -> GenSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &Term) -> bool {
        self.terms.iter().any(|t| t == term)
    }

    /// Union with `extra`, keeping `self`'s order first.
    pub fn union(&self, extra: &[Term], source: GenSource) -> Self {
        Self::new(self.terms.iter().chain(extra).cloned(), source)
    }
}

/// Terms and stall markers produced by one call to [`Stream::generate_portion`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Portion {
    pub events: Vec<TermEvent>,
    /// Steps at which a slot could not be filled within the retry bound.
    pub stalls: Vec<u64>,
}

/// Parameters for portion generation.
#[derive(Debug, Clone, Copy)]
pub struct PortionParams {
    pub size: usize,
    pub p: f64,
    pub temperature: f64,
    pub retry_bound: usize,
}

#[derive(Debug, Clone)]
pub struct Stream {
    id: String,
    kind: StreamKind,
    events: Vec<TermEvent>,
    weights: Vec<f64>,
    generating: GeneratingSet,
}

impl Stream {
    /// Seeds the stream with its generating terms as equally weighted support events.
    pub fn init(
        kind: StreamKind,
        id: impl Into<String>,
        generating: GeneratingSet,
        clock: &mut Clock,
    ) -> Result<Self> {
        let id = id.into();
        if generating.is_empty() {
            return Err(Error::EmptyGeneratingSet(id));
        }
        let mut stream = Stream {
            id,
            kind,
            events: Vec::new(),
            weights: Vec::new(),
            generating,
        };
        let seeds: Vec<Term> = stream.generating.terms().to_vec();
        for term in seeds {
            let step = clock.tick();
            let event = TermEvent {
                step,
                term,
                role: Role::Support,
                origin: stream.id.clone(),
                attractor: None,
                condition: None,
            };
            stream.push(event);
        }
        stream.normalize();
        Ok(stream)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> StreamKind {
        self.kind
    }

    pub fn events(&self) -> &[TermEvent] {
        &self.events
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn generating_set(&self) -> &GeneratingSet {
        &self.generating
    }

    fn push(&mut self, event: TermEvent) {
        assert!(
            !(event.role == Role::Annotation && self.kind != StreamKind::Oas),
            "annotation event in non-OAS stream {}",
            self.id
        );
        assert!(
            !(event.role == Role::Interleave
                && self.kind == StreamKind::Pas
                && event.origin == self.id),
            "PAS interleave event must originate from an OAS stream"
        );
        self.events.push(event);
        self.weights.push(1.0);
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= total);
        }
    }

    /// Appends events with weight 1 each, then renormalizes to unit sum.
    pub fn append(&mut self, events: Vec<TermEvent>) {
        if events.is_empty() {
            return;
        }
        for e in events {
            self.push(e);
        }
        self.normalize();
    }

    /// With probability `p` a uniform generating-set term (environmental
    /// condition), otherwise an existing event drawn proportionally to its weight.
    pub fn select_attractor<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> (Term, Condition) {
        if rng.gen::<f64>() < p {
            let k = rng.gen_range(0..self.generating.len());
            return (self.generating.terms()[k].clone(), Condition::Environmental);
        }
        let total: f64 = self.weights.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pick = self.events.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            if target < *w {
                pick = k;
                break;
            }
            target -= w;
        }
        (self.events[pick].term.clone(), Condition::Continuity)
    }

    /// Draws `size` new support terms, each a neighbor of an attractor picked
    /// from the pre-portion state. Afterwards every new event gets weight 1 and
    /// the distribution is renormalized.
    pub fn generate_portion<R: Rng + ?Sized>(
        &mut self,
        index: &SemanticIndex,
        params: PortionParams,
        rng: &mut R,
        clock: &mut Clock,
    ) -> Portion {
        let mut portion = Portion::default();
        for _ in 0..params.size {
            let mut placed = false;
            for _ in 0..params.retry_bound.max(1) {
                let (attractor, condition) = self.select_attractor(params.p, rng);
                let candidate = index
                    .neighbors(&attractor, 1, rng, params.temperature)
                    .ok()
                    .and_then(|mut v| v.pop());
                if let Some(term) = candidate {
                    portion.events.push(TermEvent {
                        step: clock.tick(),
                        term,
                        role: Role::Support,
                        origin: self.id.clone(),
                        attractor: Some(attractor),
                        condition: Some(condition),
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                warn!("{}: no candidate within the retry bound", self.id);
                portion.stalls.push(clock.tick());
            }
        }
        self.append(portion.events.clone());
        portion
    }

    /// Looks for the largest mutually related subset among the last `window`
    /// events. If it has at least `cluster_min` members, appends the inventory
    /// term nearest to the subset centroid as a summary event.
    pub fn summarize(
        &mut self,
        index: &SemanticIndex,
        window: usize,
        cluster_min: usize,
        tau_rel: f64,
        clock: &mut Clock,
    ) -> Option<TermEvent> {
        let start = self.events.len().saturating_sub(window);
        let recent = &self.events[start..];
        if recent.len() < cluster_min.max(1) {
            return None;
        }
        let vectors: Vec<Vec<f64>> = recent
            .iter()
            .map(|e| index.term_vector(&e.term).unwrap_or_default())
            .collect();
        let sims: Vec<Vec<f64>> = vectors
            .iter()
            .map(|u| {
                vectors
                    .iter()
                    .map(|v| crate::semantics::cosine(u, v))
                    .collect()
            })
            .collect();
        let cluster = largest_consistent_cluster(&sims, tau_rel);
        if cluster.len() < cluster_min {
            return None;
        }
        let dims = index.dims();
        let mut centroid = vec![0.0; dims];
        for &k in &cluster {
            for (c, x) in centroid.iter_mut().zip(&vectors[k]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= cluster.len() as f64);
        let term = index.nearest(&centroid)?.clone();
        let event = TermEvent {
            step: clock.tick(),
            term,
            role: Role::Summary,
            origin: self.id.clone(),
            attractor: None,
            condition: None,
        };
        self.append(vec![event.clone()]);
        Some(event)
    }
}

/// Largest index set whose pairwise entries in `sims` are all ≥ `tau`. Among
/// equally large sets the one whose sorted indices are lexicographically
/// smallest wins.
pub fn largest_consistent_cluster(sims: &[Vec<f64>], tau: f64) -> Vec<usize> {
    fn grow(
        k: usize,
        sims: &[Vec<f64>],
        tau: f64,
        current: &mut Vec<usize>,
        best: &mut Vec<usize>,
    ) {
        let n = sims.len();
        if current.len() + (n - k) <= best.len() {
            return;
        }
        if k == n {
            *best = current.clone();
            return;
        }
        if current.iter().all(|&j| sims[j][k] >= tau) {
            current.push(k);
            grow(k + 1, sims, tau, current, best);
            current.pop();
        }
        grow(k + 1, sims, tau, current, best);
    }
    let mut best = Vec::new();
    grow(0, sims, tau, &mut Vec::new(), &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_cooccurrence, extract_terms, Corpus, Normalization, Stoplist};
    use crate::semantics::IndexOptions;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(s: &str) -> Term {
        Term::parse(s).unwrap()
    }

    fn index() -> SemanticIndex {
        let corpus = Corpus::from_texts(
            [
                "the street view in cold weather. cold weather on the street. \
                 a green apple is a fruit. fruit nutrition of a green apple. \
                 the weather is cold and the street is grey. apple fruit nutrition.",
            ],
            Normalization::default(),
        )
        .unwrap();
        let counts = build_cooccurrence(&corpus, 3);
        let inv = extract_terms(&corpus, 3, 1, &Stoplist::builtin());
        SemanticIndex::build(&counts, &inv, IndexOptions::default())
    }

    fn stream(kind: StreamKind, terms: &[&str]) -> (Stream, Clock) {
        let mut clock = Clock::new();
        let gen = GeneratingSet::new(terms.iter().map(|s| t(s)), GenSource::Environment);
        (Stream::init(kind, "s", gen, &mut clock).unwrap(), clock)
    }

    #[test]
    fn init_weights_are_uniform() {
        let (s, _) = stream(StreamKind::Pas, &["street view", "weather", "cold"]);
        assert_eq!(s.events().len(), 3);
        assert!(s.events().iter().all(|e| e.role == Role::Support));
        assert!(s.weights().iter().all(|w| (*w - 1.0 / 3.0).abs() < 1e-15));

        let (one, _) = stream(StreamKind::Oas, &["apple"]);
        assert_eq!(one.weights(), [1.0]);
    }

    #[test]
    fn apple_object_seeds_four_events() {
        let idx = index();
        let gen = GeneratingSet::resolve(
            &["apple", "green apple", "fruit", "fruit nutrition"],
            GenSource::Object,
            &idx,
            "apple",
        )
        .unwrap();
        let s = Stream::init(StreamKind::Oas, "oas", gen, &mut Clock::new()).unwrap();
        assert_eq!(s.events().len(), 4);
    }

    #[test]
    fn empty_generating_set_is_an_error() {
        let idx = index();
        let err =
            GeneratingSet::resolve(&["zebra", "  "], GenSource::Object, &idx, "obj").unwrap_err();
        assert!(matches!(err, Error::EmptyGeneratingSet(_)));
        let empty = GeneratingSet::new(Vec::new(), GenSource::Object);
        assert!(Stream::init(StreamKind::Oas, "o", empty, &mut Clock::new()).is_err());
    }

    #[test]
    fn degenerate_probabilities_pick_fixed_condition() {
        let (mut s, mut clock) = stream(StreamKind::Pas, &["weather"]);
        s.append(vec![TermEvent {
            step: clock.tick(),
            term: t("fruit"),
            role: Role::Support,
            origin: "s".into(),
            attractor: None,
            condition: None,
        }]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (term, c) = s.select_attractor(1.0, &mut rng);
            assert_eq!(c, Condition::Environmental);
            assert_eq!(term.text(), "weather");
            let (_, c) = s.select_attractor(0.0, &mut rng);
            assert_eq!(c, Condition::Continuity);
        }
    }

    #[test]
    fn portion_keeps_unit_sum_and_is_deterministic() {
        let idx = index();
        let params = PortionParams {
            size: 5,
            p: 0.5,
            temperature: 0.15,
            retry_bound: 8,
        };
        let run = || {
            let (mut s, mut clock) = stream(StreamKind::Pas, &["street view", "weather", "cold"]);
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut all = Vec::new();
            for _ in 0..4 {
                let p = s.generate_portion(&idx, params, &mut rng, &mut clock);
                assert_eq!(p.events.len(), 5);
                assert!((s.weight_sum() - 1.0).abs() < 1e-9);
                assert!(s.weights().iter().all(|w| *w >= 0.0));
                for e in &p.events {
                    assert_ne!(Some(&e.term), e.attractor.as_ref());
                    assert!(idx.inventory().contains(e.term.text()));
                }
                all.extend(p.events);
            }
            all
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn recent_events_carry_more_weight() {
        let idx = index();
        let (mut s, mut clock) = stream(StreamKind::Pas, &["weather", "cold"]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = PortionParams {
            size: 2,
            p: 0.5,
            temperature: 0.15,
            retry_bound: 8,
        };
        s.generate_portion(&idx, params, &mut rng, &mut clock);
        let w = s.weights();
        assert!(w[3] > w[0]);
    }

    #[test]
    fn exhausted_index_stalls() {
        let corpus = Corpus::from_texts(["fruit fruit fruit"], Normalization::default()).unwrap();
        let counts = build_cooccurrence(&corpus, 1);
        let inv = extract_terms(&corpus, 1, 1, &Stoplist::empty());
        let idx = SemanticIndex::build(&counts, &inv, IndexOptions::default());
        let (mut s, mut clock) = stream(StreamKind::Pas, &["fruit"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = s.generate_portion(
            &idx,
            PortionParams {
                size: 3,
                p: 0.5,
                temperature: 0.15,
                retry_bound: 4,
            },
            &mut rng,
            &mut clock,
        );
        assert!(p.events.is_empty());
        assert_eq!(p.stalls.len(), 3);
        assert_eq!(s.events().len(), 1);
        assert_eq!(s.weight_sum(), 1.0);
    }

    #[test]
    fn dissimilar_window_yields_no_summary() {
        let sims = vec![
            vec![1.0, 0.0, 0.1],
            vec![0.0, 1.0, 0.0],
            vec![0.1, 0.0, 1.0],
        ];
        assert_eq!(largest_consistent_cluster(&sims, 0.35).len(), 1);
    }

    #[test]
    #[should_panic(expected = "annotation")]
    fn annotation_in_pas_is_rejected() {
        let (mut s, mut clock) = stream(StreamKind::Pas, &["weather"]);
        s.append(vec![TermEvent {
            step: clock.tick(),
            term: t("red"),
            role: Role::Annotation,
            origin: "s".into(),
            attractor: None,
            condition: None,
        }]);
    }

    fn brute_force_cluster(sims: &[Vec<f64>], tau: f64) -> Vec<usize> {
        let n = sims.len();
        let mut best: Vec<usize> = Vec::new();
        for mask in 0u32..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let ok = members
                .iter()
                .all(|&a| members.iter().all(|&b| a == b || sims[a][b] >= tau));
            if ok && (members.len() > best.len() || (members.len() == best.len() && members < best))
            {
                best = members;
            }
        }
        best
    }

    proptest! {
        #[test]
        fn cluster_search_matches_brute_force(
            n in 1usize..=8,
            raw in prop::collection::vec(0.0f64..1.0, 64),
            tau in 0.1f64..0.9,
        ) {
            let mut sims = vec![vec![1.0; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    sims[i][j] = raw[i * 8 + j];
                    sims[j][i] = raw[i * 8 + j];
                }
            }
            prop_assert_eq!(largest_consistent_cluster(&sims, tau), brute_force_cluster(&sims, tau));
        }
    }
}
