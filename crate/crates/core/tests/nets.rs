mod common;

use std::collections::{BTreeMap, BTreeSet};

use biwheel::aenet::{self, personalize, AENetSpec, PersonaProfile};
use biwheel::annotator::AnnotationSource;
use biwheel::biwheel::{
    self as bw, candidate_pool, detect_resonance, pair_sets_over, IterationKind, Net, NoObserver,
    ObjectLoop, ObjectParams,
};
use biwheel::cli::{self, IndexArgs};
use biwheel::config::BiWheelConfig;
use biwheel::semantics::SemanticIndex;
use biwheel::stream::{Clock, GenSource, GeneratingSet, Role, Stream, StreamKind, TermEvent};
use biwheel::term::Term;
use biwheel::trace::Trace;
use common::*;
use proptest::prelude::*;

fn spec(cfg: &BiWheelConfig, index: &SemanticIndex) -> AENetSpec {
    cli::net_spec(cfg, index).unwrap()
}

fn single(cfg: &BiWheelConfig, index: &SemanticIndex) -> Trace {
    let s = spec(cfg, index);
    bw::run(
        cfg,
        &s.env,
        &s.objects[0].generating,
        index,
        s.objects[0].annotations.clone(),
    )
    .unwrap()
}

fn texts(terms: &[Term]) -> Vec<&str> {
    terms.iter().map(Term::text).collect()
}

#[test]
fn agreeing_pair_projects_into_the_person_stream() {
    let sets = pair_sets_over(&[t("i wanna drink")], &[t("drink")], index(), 0.35, 0.25).unwrap();
    assert_eq!(sets.pairs.len(), 1);
    assert_eq!(sets.related, vec![(t("i wanna drink"), t("drink"))]);
    assert!(sets.contradicting.is_empty());
    assert_eq!(texts(&sets.pas_side), ["i wanna drink"]);
    assert_eq!(texts(&sets.to_pas), ["drink"]);
    assert!(sets.to_oas.is_empty());
}

#[test]
fn clashing_pair_switches_back_to_the_object() {
    let sets = pair_sets_over(
        &[t("deeply friendly jacket")],
        &[t("jacket not friendly")],
        index(),
        0.35,
        0.25,
    )
    .unwrap();
    assert_eq!(sets.contradicting.len(), 1);
    assert_eq!(sets.related.len(), 1);
    assert!(sets.to_pas.is_empty());
    assert_eq!(texts(&sets.to_oas), ["jacket not friendly"]);
    assert_eq!(texts(&sets.pas_side), ["deeply friendly jacket"]);
}

#[test]
fn unrelated_pairs_project_nothing() {
    let sets = pair_sets_over(&[t("jacket")], &[t("coca cola")], index(), 0.99, 0.25).unwrap();
    assert_eq!(sets.pairs.len(), 1);
    assert!(sets.related.is_empty() && sets.to_pas.is_empty() && sets.to_oas.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_sets_match_brute_force(
        a in proptest::collection::vec(0usize..10_000, 1..=10),
        b in proptest::collection::vec(0usize..10_000, 1..=10),
        tau_rel in 0.1f64..0.6,
    ) {
        let idx = index();
        let terms = idx.terms();
        let pas: Vec<Term> = a.iter().map(|k| terms[k % terms.len()].clone()).collect();
        let pool: Vec<Term> = b.iter().map(|k| terms[k % terms.len()].clone()).collect();
        let sets = pair_sets_over(&pas, &pool, idx, tau_rel, 0.25).unwrap();
        let (l1, l2, s, s1, s2) = oracle_sets(&pas, &pool, idx, tau_rel, 0.25);
        let distinct_pas: BTreeSet<&str> = pas.iter().map(Term::text).collect();
        let distinct_pool: BTreeSet<&str> = pool.iter().map(Term::text).collect();
        prop_assert_eq!(sets.pairs.len(), distinct_pas.len() * distinct_pool.len());
        prop_assert_eq!(as_set(&sets.related), l1);
        prop_assert_eq!(as_set(&sets.contradicting), l2);
        prop_assert_eq!(text_set(&sets.pas_side), s);
        prop_assert_eq!(text_set(&sets.to_pas), s1);
        prop_assert_eq!(text_set(&sets.to_oas), s2);
    }
}

fn oas_with(terms: &[&str]) -> Stream {
    let mut clock = Clock::new();
    let g = GeneratingSet::new(terms.iter().map(|s| t(s)), GenSource::Object);
    Stream::init(StreamKind::Oas, "oas", g, &mut clock).unwrap()
}

#[test]
fn candidate_pool_prefers_heavy_terms() {
    let mut s = oas_with(&["jacket", "commission", "people"]);
    // "people" appended twice more: it now dominates.
    for step in 10..12 {
        s.append(vec![TermEvent {
            step,
            term: t("people"),
            role: Role::Support,
            origin: "oas".into(),
            attractor: None,
            condition: None,
        }]);
    }
    assert_eq!(texts(&candidate_pool(&s, 0.05, 1)), ["people"]);
    let padded = candidate_pool(&s, 0.05, 8);
    assert_eq!(padded.len(), 3);
    assert_eq!(padded[0].text(), "people");
    assert_eq!(text_set(&padded).len(), 3);
    assert_eq!(candidate_pool(&s, 1.0, 1).len(), 3);
}

#[test]
fn reports_alternate_forward_and_backward() {
    let trace = single(&config("cola"), index());
    let reports: Vec<_> = trace.reports().collect();
    assert_eq!(reports.len(), 20);
    for (k, r) in reports.iter().enumerate() {
        let kind = if k % 2 == 0 {
            IterationKind::Forward
        } else {
            IterationKind::Backward
        };
        assert_eq!(r.kind, kind);
        assert_eq!(r.iteration, k / 2);
    }
    let steps: Vec<u64> = trace.events().map(|e| e.event.step).collect();
    assert!(steps.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(Trace::parse(&trace.to_jsonl()).unwrap(), trace);
}

#[test]
fn zero_iterations_leave_only_the_seeds() {
    let mut cfg = config("cola");
    cfg.iterations = 0;
    let trace = single(&cfg, index());
    assert_eq!(trace.reports().count(), 0);
    let pas: Vec<&str> = trace.stream_events("pas").map(|e| e.term.text()).collect();
    let oas: Vec<&str> = trace.stream_events("oas").map(|e| e.term.text()).collect();
    assert_eq!(pas, ["i wanna drink", "thirst", "hot weather"]);
    assert_eq!(oas, ["red", "coca cola", "drink", "star", "rays"]);
}

/// No OAS stream ever carries a term from the person stream unless it was
/// already there, and PAS interleaves always name the object they came from.
fn assert_no_cross_talk(trace: &Trace) {
    let mut seen: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in trace.events() {
        let ev = &e.event;
        match e.kind {
            StreamKind::Oas => {
                assert_eq!(ev.origin, e.stream, "{ev:?}");
                if ev.role == Role::Interleave {
                    assert!(seen[&e.stream].contains(ev.term.text()), "{ev:?}");
                }
            }
            StreamKind::Pas => {
                if ev.role == Role::Interleave {
                    assert!(seen[&ev.origin].contains(ev.term.text()), "{ev:?}");
                } else {
                    assert_eq!(ev.origin, e.stream);
                }
                assert_ne!(ev.role, Role::Annotation);
            }
        }
        seen.entry(e.stream.clone())
            .or_default()
            .insert(ev.term.text().to_string());
    }
}

#[test]
fn forward_projection_has_no_cross_talk() {
    for name in ["cola", "emblem", "commission"] {
        assert_no_cross_talk(&single(&config(name), index()));
    }
}

#[test]
fn no_clash_vocabulary_means_no_switch() {
    let dir = tempfile::tempdir().unwrap();
    let args = IndexArgs {
        negators: Some(vec![]),
        ..IndexArgs::new(corpus_paths())
    };
    let idx = cli::cmd_index(&args, dir.path()).unwrap();
    for name in ["cola", "emblem", "commission"] {
        let trace = single(&config(name), &idx);
        assert!(trace
            .reports()
            .all(|r| r.contradicting == 0 && !r.switch_fired));
        assert!(trace
            .events()
            .all(|e| !(e.kind == StreamKind::Oas && e.event.role == Role::Interleave)));
    }
}

#[test]
fn annotations_follow_q_annot() {
    let mut cfg = config("cola");
    cfg.q_annot = 0.0;
    let trace = single(&cfg, index());
    assert!(trace.events().all(|e| e.event.role != Role::Annotation));

    cfg.q_annot = 1.0;
    let trace = single(&cfg, index());
    let got: Vec<&str> = trace
        .events()
        .filter(|e| e.event.role == Role::Annotation)
        .map(|e| e.event.term.text())
        .collect();
    assert_eq!(got, ["red", "coca cola", "star"]);
}

#[test]
fn annotation_source_skips_comments() {
    let cfg = config("commission");
    let src = annotations(&cfg, 0);
    assert_eq!(
        texts(src.terms()),
        ["uniform", "hostile clothes", "predecessor"]
    );
    let mut s = AnnotationSource::from_lines("x", ["# c", "", "jacket", "zeppelin"], index());
    assert_eq!(s.len(), 1);
    assert_eq!(s.next_annotation(), Some(t("jacket")));
    assert_eq!(s.next_annotation(), None);
}

#[test]
fn switched_terms_become_attractors() {
    let mut cfg = config("commission");
    cfg.iterations = 30;
    let trace = single(&cfg, index());
    let mut switched = BTreeSet::new();
    let mut reused = 0;
    for e in trace.stream_events("oas") {
        if e.role == Role::Interleave {
            switched.insert(e.term.text().to_string());
        } else if let Some(a) = &e.attractor {
            reused += usize::from(switched.contains(a.text()));
        }
    }
    assert!(!switched.is_empty());
    assert!(reused > 0);
}

#[test]
fn resonance_threshold_above_one_is_empty() {
    let trace = single(&config("cola"), index());
    assert!(detect_resonance(&trace, index(), 1.01).unwrap().is_empty());
}

#[test]
fn resonance_matches_brute_force_scan() {
    let trace = single(&config("cola"), index());
    let tau = 0.8;
    let peaks = detect_resonance(&trace, index(), tau).unwrap();
    let mut want = brute_resonance(&trace, index(), tau);
    let mut got: Vec<(u64, u64)> = peaks.iter().map(|p| (p.pas_step, p.oas_step)).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
    assert!(peaks.windows(2).all(|w| w[0].score >= w[1].score));
    // A projected term shares its text with the object stream.
    assert!(peaks
        .iter()
        .any(|p| p.score == 1.0 && p.pas_term == p.oas_term));
}

#[test]
fn multi_object_origins_stay_separate() {
    let cfg = config("street");
    let s = spec(&cfg, index());
    let trace = aenet::run_multi(&s, &cfg, index()).unwrap();
    assert_eq!(trace.stream_ids(StreamKind::Oas), ["oas:cola", "oas:apple"]);
    assert_no_cross_talk(&trace);
    assert_eq!(trace, aenet::run_multi(&s, &cfg, index()).unwrap());
    assert!(trace
        .stream_events("oas:apple")
        .all(|e| e.role != Role::Annotation));
}

#[test]
fn persona_extends_the_environment() {
    let cfg = config("street");
    let s = spec(&cfg, index());
    let persona = s.persona.clone().unwrap();
    assert_eq!(texts(&persona.features), ["age 35 50", "movie lover"]);
    let g = personalize(&s.env, &persona);
    let all = text_set(g.terms());
    assert!(text_set(s.env.terms()).is_subset(&all));
    assert!(text_set(&persona.features).is_subset(&all));
    let trace = aenet::run_multi(&s, &cfg, index()).unwrap();
    let seeds: Vec<&str> = trace
        .stream_events("pas")
        .take(5)
        .map(|e| e.term.text())
        .collect();
    assert_eq!(
        seeds,
        ["street view", "weather", "cold", "age 35 50", "movie lover"]
    );
}

#[test]
fn empty_persona_changes_nothing() {
    let cfg = config("street");
    let mut with = spec(&cfg, index());
    with.persona = Some(PersonaProfile {
        id: "h0".into(),
        features: vec![],
    });
    let mut without = with.clone();
    without.persona = None;
    assert_eq!(
        aenet::run_multi(&with, &cfg, index()).unwrap(),
        aenet::run_multi(&without, &cfg, index()).unwrap()
    );
}

#[test]
fn net_steps_one_iteration_at_a_time() {
    let cfg = config("cola");
    let s = spec(&cfg, index());
    let loops = vec![ObjectLoop {
        stream_id: "oas".into(),
        generating: s.objects[0].generating.clone(),
        annotations: s.objects[0].annotations.clone(),
        params: ObjectParams::from_config(&cfg),
    }];
    let mut net = Net::new(&cfg, index(), s.env.clone(), loops, &mut NoObserver).unwrap();
    let f = net.forward_iteration(&mut NoObserver).unwrap();
    assert_eq!(f.kind, IterationKind::Forward);
    assert_eq!(f.pairs > 0, f.emitted > 0);
    let b = net.backward_iteration(&mut NoObserver).unwrap();
    assert_eq!(b.kind, IterationKind::Backward);
    assert!((net.pas().weight_sum() - 1.0).abs() < 1e-12);
    assert!(net.oas().all(|o| (o.weight_sum() - 1.0).abs() < 1e-12));
    assert_eq!(net.trace().reports().count(), 2);
}
