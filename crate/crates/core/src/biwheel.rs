//! The two-loop controller. Forward iterations grow the person stream and
//! exchange terms with the object streams; backward iterations grow the
//! object streams, inject annotations and summarize.
//!
//! Transfer is asymmetric: agreeing object terms are embedded into the
//! person stream, while contradicting object terms are re-embedded into
//! their own object stream. No person-stream text ever enters an object
//! stream.

use std::collections::{BTreeSet, HashMap};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotator::AnnotationSource;
use crate::config::BiWheelConfig;
use crate::error::Result;
use crate::semantics::{cosine, SemanticIndex};
use crate::stream::{
    Clock, GeneratingSet, Portion, PortionParams, Role, Stream, StreamKind, TermEvent,
};
use crate::term::Term;
use crate::trace::{EventRecord, Record, StallRecord, Trace, TraceHeader, ENGINE};

pub const PAS_ID: &str = "pas";
pub const OAS_ID: &str = "oas";

/// Cross-stream pairs and their projections for one person portion against one object pool.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSets {
    /// Every (person term, object term) pair considered.
    pub pairs: Vec<(Term, Term)>,
    /// Related pairs.
    pub related: Vec<(Term, Term)>,
    /// Related pairs that also contradict.
    pub contradicting: Vec<(Term, Term)>,
    /// Person-side terms of the related pairs.
    pub pas_side: Vec<Term>,
    /// Object terms of related, non-contradicting pairs; embedded into the person stream.
    pub to_pas: Vec<Term>,
    /// Object terms of contradicting pairs; re-embedded into the object stream.
    pub to_oas: Vec<Term>,
}

#[derive(Debug, Clone, Copy)]
pub struct PairParams {
    pub tau_rel: f64,
    pub tau_topic: f64,
    pub mu_bias: f64,
    pub min_pool: usize,
}

impl PairParams {
    pub fn from_config(cfg: &BiWheelConfig) -> Self {
        PairParams {
            tau_rel: cfg.tau_rel,
            tau_topic: cfg.tau_topic,
            mu_bias: cfg.mu_bias,
            min_pool: cfg.min_pool,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IterationKind {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub kind: IterationKind,
    pub emitted: usize,
    pub pairs: usize,
    pub related: usize,
    pub contradicting: usize,
    pub switch_fired: bool,
}

fn dedup_terms<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Vec<Term> {
    let mut seen = BTreeSet::new();
    terms
        .into_iter()
        .filter(|t| seen.insert(t.text()))
        .cloned()
        .collect()
}

/// Distinct object terms ordered by weight (heaviest first, later events
/// first on ties). Keeps every term within `mu_bias` of the heaviest and
/// tops the pool up to `min_pool` terms when fewer qualify.
pub fn candidate_pool(oas: &Stream, mu_bias: f64, min_pool: usize) -> Vec<Term> {
    let mut best: HashMap<&str, (f64, usize)> = HashMap::new();
    for (k, (e, w)) in oas.events().iter().zip(oas.weights()).enumerate() {
        let entry = best.entry(e.term.text()).or_insert((*w, k));
        if *w >= entry.0 {
            *entry = (*w, k);
        }
    }
    let mut ranked: Vec<(f64, usize)> = best.into_values().collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
    let Some(&(top, _)) = ranked.first() else {
        return Vec::new();
    };
    let within = ranked.iter().filter(|(w, _)| *w >= top - mu_bias).count();
    ranked
        .iter()
        .take(within.max(min_pool))
        .map(|&(_, k)| oas.events()[k].term.clone())
        .collect()
}

/// Classifies every pair of `pas_portion × pool`. Both sides are deduplicated
/// by text first, and projections keep first-seen order.
pub fn pair_sets_over(
    pas_portion: &[Term],
    pool: &[Term],
    index: &SemanticIndex,
    tau_rel: f64,
    tau_topic: f64,
) -> Result<PairSets> {
    let pas = dedup_terms(pas_portion);
    let pool = dedup_terms(pool);
    let mut sets = PairSets::default();
    for a in &pas {
        for b in &pool {
            let pair = (a.clone(), b.clone());
            if index.related(a, b, tau_rel)? {
                if index.contradicts(a, b, tau_topic)? {
                    sets.contradicting.push(pair.clone());
                }
                sets.related.push(pair.clone());
            }
            sets.pairs.push(pair);
        }
    }
    sets.pas_side = dedup_terms(sets.related.iter().map(|(a, _)| a));
    let clashing: BTreeSet<&(Term, Term)> = sets.contradicting.iter().collect();
    sets.to_pas = dedup_terms(
        sets.related
            .iter()
            .filter(|p| !clashing.contains(p))
            .map(|(_, b)| b),
    );
    sets.to_oas = dedup_terms(sets.contradicting.iter().map(|(_, b)| b));
    Ok(sets)
}

/// Pair sets between a person portion and the μ-preferred pool of an object stream.
pub fn build_pair_sets(
    pas_portion: &[TermEvent],
    oas: &Stream,
    index: &SemanticIndex,
    params: PairParams,
) -> Result<PairSets> {
    let portion: Vec<Term> = pas_portion.iter().map(|e| e.term.clone()).collect();
    let pool = candidate_pool(oas, params.mu_bias, params.min_pool);
    pair_sets_over(&portion, &pool, index, params.tau_rel, params.tau_topic)
}

/// Hook invoked after every mutation of any stream.
pub trait Observer {
    fn on_update(&mut self, stream: &Stream);
}

pub struct NoObserver;

impl Observer for NoObserver {
    fn on_update(&mut self, _: &Stream) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectParams {
    pub p: f64,
    pub portion_size: usize,
    pub q_annot: f64,
}

impl ObjectParams {
    pub fn from_config(cfg: &BiWheelConfig) -> Self {
        ObjectParams {
            p: cfg.p,
            portion_size: cfg.portion_size_oas,
            q_annot: cfg.q_annot,
        }
    }
}

/// What is needed to start one object loop.
#[derive(Debug, Clone)]
pub struct ObjectLoop {
    pub stream_id: String,
    pub generating: GeneratingSet,
    pub annotations: AnnotationSource,
    pub params: ObjectParams,
}

struct ObjectState {
    stream: Stream,
    annotations: AnnotationSource,
    params: ObjectParams,
    exhausted_logged: bool,
}

/// A running net: one person stream and any number of object streams
/// sharing one seeded random source and one step clock.
pub struct Net<'a> {
    cfg: &'a BiWheelConfig,
    index: &'a SemanticIndex,
    rng: ChaCha8Rng,
    clock: Clock,
    pas: Stream,
    objects: Vec<ObjectState>,
    trace: Trace,
    forward_done: usize,
    backward_done: usize,
}

impl<'a> Net<'a> {
    pub fn new(
        cfg: &'a BiWheelConfig,
        index: &'a SemanticIndex,
        env: GeneratingSet,
        loops: Vec<ObjectLoop>,
        observer: &mut dyn Observer,
    ) -> Result<Self> {
        cfg.validate_params()?;
        let mut clock = Clock::new();
        let mut trace = Trace::new(TraceHeader {
            engine: ENGINE.to_string(),
            index_fingerprint: index.fingerprint(),
            config: cfg.clone(),
        });
        let pas = Stream::init(StreamKind::Pas, PAS_ID, env, &mut clock)?;
        record_events(&mut trace, &pas, pas.events());
        observer.on_update(&pas);
        let mut objects = Vec::with_capacity(loops.len());
        for l in loops {
            let stream = Stream::init(StreamKind::Oas, l.stream_id, l.generating, &mut clock)?;
            record_events(&mut trace, &stream, stream.events());
            observer.on_update(&stream);
            objects.push(ObjectState {
                stream,
                annotations: l.annotations,
                params: l.params,
                exhausted_logged: false,
            });
        }
        Ok(Net {
            cfg,
            index,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            clock,
            pas,
            objects,
            trace,
            forward_done: 0,
            backward_done: 0,
        })
    }

    pub fn pas(&self) -> &Stream {
        &self.pas
    }

    pub fn oas(&self) -> impl Iterator<Item = &Stream> {
        self.objects.iter().map(|o| &o.stream)
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    fn record_portion(&mut self, stream_id: &str, kind: StreamKind, portion: &Portion) {
        let mut events = portion.events.iter().peekable();
        let mut stalls = portion.stalls.iter().peekable();
        loop {
            let take_event = match (events.peek(), stalls.peek()) {
                (Some(e), Some(s)) => e.step < **s,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_event {
                let e = events.next().expect("peeked");
                self.trace.records.push(Record::Event(EventRecord {
                    stream: stream_id.to_string(),
                    kind,
                    event: e.clone(),
                }));
            } else {
                let step = *stalls.next().expect("peeked");
                self.trace.records.push(Record::Stall(StallRecord {
                    step,
                    stream: stream_id.to_string(),
                }));
            }
        }
    }

    fn pas_params(&self) -> PortionParams {
        PortionParams {
            size: self.cfg.portion_size_pas,
            p: self.cfg.p,
            temperature: self.cfg.temperature,
            retry_bound: self.cfg.retry_bound,
        }
    }

    /// Person portion, then for each object in order: pair sets, agreeing
    /// terms into the person stream, contradicting terms back into the object.
    pub fn forward_iteration(&mut self, observer: &mut dyn Observer) -> Result<IterationReport> {
        let params = self.pas_params();
        let portion = self
            .pas
            .generate_portion(self.index, params, &mut self.rng, &mut self.clock);
        self.record_portion(PAS_ID, StreamKind::Pas, &portion);
        observer.on_update(&self.pas);

        let mut report = IterationReport {
            iteration: self.forward_done,
            kind: IterationKind::Forward,
            emitted: portion.events.len(),
            pairs: 0,
            related: 0,
            contradicting: 0,
            switch_fired: false,
        };
        if !portion.events.is_empty() {
            let pair_params = PairParams::from_config(self.cfg);
            for k in 0..self.objects.len() {
                let sets = build_pair_sets(
                    &portion.events,
                    &self.objects[k].stream,
                    self.index,
                    pair_params,
                )?;
                report.pairs += sets.pairs.len();
                report.related += sets.related.len();
                report.contradicting += sets.contradicting.len();

                let origin = self.objects[k].stream.id().to_string();
                if !sets.to_pas.is_empty() {
                    let events = self.interleave(&sets.to_pas, &origin);
                    self.pas.append(events.clone());
                    record_events(&mut self.trace, &self.pas, &events);
                    observer.on_update(&self.pas);
                    report.emitted += events.len();
                }
                if !sets.to_oas.is_empty() {
                    let events = self.interleave(&sets.to_oas, &origin);
                    let oas = &mut self.objects[k].stream;
                    oas.append(events.clone());
                    record_events(&mut self.trace, oas, &events);
                    observer.on_update(oas);
                    report.emitted += events.len();
                    report.switch_fired = true;
                    info!(
                        "switch fired on {origin} at forward iteration {}",
                        self.forward_done
                    );
                }
            }
        }
        self.forward_done += 1;
        self.trace.records.push(Record::Report(report.clone()));
        Ok(report)
    }

    fn interleave(&mut self, terms: &[Term], origin: &str) -> Vec<TermEvent> {
        terms
            .iter()
            .map(|t| TermEvent {
                step: self.clock.tick(),
                term: t.clone(),
                role: Role::Interleave,
                origin: origin.to_string(),
                attractor: None,
                condition: None,
            })
            .collect()
    }

    /// Each object: portion, optional annotation, summary. Then a person-stream summary.
    pub fn backward_iteration(&mut self, observer: &mut dyn Observer) -> Result<IterationReport> {
        let mut emitted = 0;
        for k in 0..self.objects.len() {
            let obj = &mut self.objects[k];
            let params = PortionParams {
                size: obj.params.portion_size,
                p: obj.params.p,
                temperature: self.cfg.temperature,
                retry_bound: self.cfg.retry_bound,
            };
            let portion =
                obj.stream
                    .generate_portion(self.index, params, &mut self.rng, &mut self.clock);
            emitted += portion.events.len();
            let id = obj.stream.id().to_string();
            observer.on_update(&self.objects[k].stream);
            self.record_portion(&id, StreamKind::Oas, &portion);

            let obj = &mut self.objects[k];
            if obj.params.q_annot > 0.0 && self.rng.gen::<f64>() < obj.params.q_annot {
                match obj.annotations.next_annotation() {
                    Some(term) => {
                        let event = TermEvent {
                            step: self.clock.tick(),
                            term,
                            role: Role::Annotation,
                            origin: id.clone(),
                            attractor: None,
                            condition: None,
                        };
                        obj.stream.append(vec![event.clone()]);
                        record_events(&mut self.trace, &obj.stream, &[event]);
                        observer.on_update(&obj.stream);
                        emitted += 1;
                    }
                    None if !obj.exhausted_logged => {
                        info!("{id}: annotation source exhausted");
                        obj.exhausted_logged = true;
                    }
                    None => {}
                }
            }

            let obj = &mut self.objects[k];
            if let Some(event) = obj.stream.summarize(
                self.index,
                self.cfg.summarize_window,
                self.cfg.cluster_min,
                self.cfg.tau_rel,
                &mut self.clock,
            ) {
                record_events(&mut self.trace, &obj.stream, &[event]);
                observer.on_update(&obj.stream);
                emitted += 1;
            }
        }
        if let Some(event) = self.pas.summarize(
            self.index,
            self.cfg.summarize_window,
            self.cfg.cluster_min,
            self.cfg.tau_rel,
            &mut self.clock,
        ) {
            record_events(&mut self.trace, &self.pas, &[event]);
            observer.on_update(&self.pas);
            emitted += 1;
        }
        let report = IterationReport {
            iteration: self.backward_done,
            kind: IterationKind::Backward,
            emitted,
            pairs: 0,
            related: 0,
            contradicting: 0,
            switch_fired: false,
        };
        self.backward_done += 1;
        self.trace.records.push(Record::Report(report.clone()));
        Ok(report)
    }

    /// Strict alternation: forward, backward, forward, backward, …
    pub fn drive(&mut self, iterations: usize, observer: &mut dyn Observer) -> Result<()> {
        for _ in 0..iterations {
            self.forward_iteration(observer)?;
            self.backward_iteration(observer)?;
        }
        Ok(())
    }
}

fn record_events(trace: &mut Trace, stream: &Stream, events: &[TermEvent]) {
    for e in events {
        trace.records.push(Record::Event(EventRecord {
            stream: stream.id().to_string(),
            kind: stream.kind(),
            event: e.clone(),
        }));
    }
}

/// Single-object run with `cfg.iterations` forward/backward rounds.
pub fn run(
    cfg: &BiWheelConfig,
    env: &GeneratingSet,
    obj: &GeneratingSet,
    index: &SemanticIndex,
    annotations: AnnotationSource,
) -> Result<Trace> {
    run_observed(cfg, env, obj, index, annotations, &mut NoObserver)
}

pub fn run_observed(
    cfg: &BiWheelConfig,
    env: &GeneratingSet,
    obj: &GeneratingSet,
    index: &SemanticIndex,
    annotations: AnnotationSource,
    observer: &mut dyn Observer,
) -> Result<Trace> {
    let loops = vec![ObjectLoop {
        stream_id: OAS_ID.to_string(),
        generating: obj.clone(),
        annotations,
        params: ObjectParams::from_config(cfg),
    }];
    let mut net = Net::new(cfg, index, env.clone(), loops, observer)?;
    net.drive(cfg.iterations, observer)?;
    Ok(net.into_trace())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonancePeak {
    pub pas_step: u64,
    pub pas_term: Term,
    pub oas_stream: String,
    pub oas_step: u64,
    pub oas_term: Term,
    pub score: f64,
}

/// Every (person event, object event) pair with similarity ≥ `tau_peak`,
/// highest score first; ties keep step order.
pub fn detect_resonance(
    trace: &Trace,
    index: &SemanticIndex,
    tau_peak: f64,
) -> Result<Vec<ResonancePeak>> {
    let mut vectors: HashMap<&str, Vec<f64>> = HashMap::new();
    for e in trace.events() {
        if !vectors.contains_key(e.event.term.text()) {
            vectors.insert(e.event.term.text(), index.term_vector(&e.event.term)?);
        }
    }
    let pas: Vec<&EventRecord> = trace
        .events()
        .filter(|e| e.kind == StreamKind::Pas)
        .collect();
    let oas: Vec<&EventRecord> = trace
        .events()
        .filter(|e| e.kind == StreamKind::Oas)
        .collect();
    let mut peaks = Vec::new();
    for a in &pas {
        let va = &vectors[a.event.term.text()];
        for b in &oas {
            let score = if a.event.term == b.event.term {
                1.0
            } else {
                cosine(va, &vectors[b.event.term.text()])
            };
            if score >= tau_peak {
                peaks.push(ResonancePeak {
                    pas_step: a.event.step,
                    pas_term: a.event.term.clone(),
                    oas_stream: b.stream.clone(),
                    oas_step: b.event.step,
                    oas_term: b.event.term.clone(),
                    score,
                });
            }
        }
    }
    peaks.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(x.pas_step.cmp(&y.pas_step))
            .then(x.oas_step.cmp(&y.oas_step))
    });
    Ok(peaks)
}
