//! Implementations behind the `index`, `run`, `run-multi` and `analyze` subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::aenet::{self, AENetSpec, ObjectSpec, PersonaProfile};
use crate::annotator::AnnotationSource;
use crate::biwheel::{self, Net, NoObserver, ObjectLoop, ObjectParams, OAS_ID};
use crate::config::BiWheelConfig;
use crate::corpus::{self, Normalization, Stoplist};
use crate::error::{Error, Result};
use crate::semantics::{AntonymLexicon, IndexOptions, SemanticIndex, DEFAULT_NEGATORS};
use crate::stream::{Condition, GenSource, GeneratingSet, Role, StreamKind};
use crate::trace::Trace;

#[derive(Debug, Clone)]
pub struct IndexArgs {
    pub corpus: Vec<PathBuf>,
    pub max_n: usize,
    pub min_count: u64,
    pub window: usize,
    pub dims: Option<usize>,
    pub antonyms: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub negators: Option<Vec<String>>,
}

impl IndexArgs {
    pub fn new(corpus: Vec<PathBuf>) -> Self {
        IndexArgs {
            corpus,
            max_n: corpus::DEFAULT_MAX_N,
            min_count: corpus::DEFAULT_MIN_COUNT,
            window: corpus::DEFAULT_WINDOW,
            dims: None,
            antonyms: None,
            stoplist: None,
            negators: None,
        }
    }
}

/// Ingests the corpus and builds the semantic index in memory.
pub fn build_index(args: &IndexArgs) -> Result<SemanticIndex> {
    if args.max_n == 0 || args.min_count == 0 || args.window == 0 {
        return Err(Error::Config(
            "max-n, min-count and window must be at least 1".into(),
        ));
    }
    let corpus = corpus::ingest(&args.corpus, Normalization::default())?;
    let stoplist = match &args.stoplist {
        Some(p) => Stoplist::load(p)?,
        None => Stoplist::builtin(),
    };
    let antonyms = match &args.antonyms {
        Some(p) => AntonymLexicon::load(p)?,
        None => AntonymLexicon::new(),
    };
    let negators = match &args.negators {
        Some(list) => list.iter().map(|s| s.trim().to_lowercase()).collect(),
        None => DEFAULT_NEGATORS.iter().map(|s| s.to_string()).collect(),
    };
    let inventory = corpus::extract_terms(&corpus, args.max_n, args.min_count, &stoplist);
    let counts = corpus::build_cooccurrence(&corpus, args.window);
    Ok(SemanticIndex::build(
        &counts,
        &inventory,
        IndexOptions {
            stoplist,
            negators,
            antonyms,
            dims: args.dims,
            max_n: args.max_n,
        },
    ))
}

pub fn cmd_index(args: &IndexArgs, out: &Path) -> Result<SemanticIndex> {
    let index = build_index(args)?;
    index.save(out)?;
    Ok(index)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Reads a config file, resolves its relative paths against the file's
/// directory, applies the seed override and validates.
pub fn load_config(path: &Path, opts: &RunOptions) -> Result<BiWheelConfig> {
    let mut cfg = BiWheelConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    cfg.resolve_paths(base);
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads the index and turns the config's term lists into a net spec.
pub fn prepare(cfg: &BiWheelConfig) -> Result<(SemanticIndex, AENetSpec)> {
    let index_dir = cfg
        .index
        .as_ref()
        .ok_or_else(|| Error::Config("missing index directory".into()))?;
    let index = SemanticIndex::load(index_dir)?;
    let spec = net_spec(cfg, &index)?;
    Ok((index, spec))
}

pub fn net_spec(cfg: &BiWheelConfig, index: &SemanticIndex) -> Result<AENetSpec> {
    let env = GeneratingSet::resolve(&cfg.env, GenSource::Environment, index, "env")?;
    let mut objects = Vec::with_capacity(cfg.objects.len());
    for o in &cfg.objects {
        let generating = GeneratingSet::resolve(&o.terms, GenSource::Object, index, &o.id)?;
        let annotations = match &o.annotations {
            Some(p) => AnnotationSource::load(o.id.clone(), p, index)?,
            None => AnnotationSource::empty(o.id.clone()),
        };
        let defaults = ObjectParams::from_config(cfg);
        objects.push(ObjectSpec {
            id: o.id.clone(),
            generating,
            annotations,
            params: ObjectParams {
                p: o.p.unwrap_or(defaults.p),
                portion_size: o.portion_size.unwrap_or(defaults.portion_size),
                q_annot: o.q_annot.unwrap_or(defaults.q_annot),
            },
        });
    }
    let persona = cfg
        .persona
        .as_ref()
        .map(|p| PersonaProfile::resolve(&p.id, &p.terms, index));
    Ok(AENetSpec {
        env,
        objects,
        persona,
    })
}

/// Single-object run. The whole trace is built before anything is written.
pub fn cmd_run(config: &Path, opts: &RunOptions) -> Result<Trace> {
    let cfg = load_config(config, opts)?;
    if cfg.objects.len() != 1 {
        return Err(Error::Config(format!(
            "`run` takes exactly one object, found {}; use `run-multi`",
            cfg.objects.len()
        )));
    }
    let (index, spec) = prepare(&cfg)?;
    let obj = &spec.objects[0];
    let loops = vec![ObjectLoop {
        stream_id: OAS_ID.to_string(),
        generating: obj.generating.clone(),
        annotations: obj.annotations.clone(),
        params: obj.params,
    }];
    let mut net = Net::new(
        &cfg,
        &index,
        spec.pas_generating_set(),
        loops,
        &mut NoObserver,
    )?;
    net.drive(cfg.iterations, &mut NoObserver)?;
    let trace = net.into_trace();
    write_trace(&trace, cfg.output.as_deref())?;
    Ok(trace)
}

pub fn cmd_run_multi(config: &Path, opts: &RunOptions) -> Result<Trace> {
    let cfg = load_config(config, opts)?;
    let (index, spec) = prepare(&cfg)?;
    let trace = aenet::run_multi(&spec, &cfg, &index)?;
    write_trace(&trace, cfg.output.as_deref())?;
    Ok(trace)
}

fn write_trace(trace: &Trace, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => trace.save(path),
        None => write_stdout(&trace.to_jsonl()),
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
pub fn write_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeMode {
    Stats,
    Resonance,
}

/// Aggregate counts over a trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceStats {
    pub events: usize,
    pub by_kind: BTreeMap<&'static str, usize>,
    pub by_role: BTreeMap<&'static str, usize>,
    pub forward_reports: usize,
    pub backward_reports: usize,
    pub switches: usize,
    pub stalls: usize,
    pub environmental: usize,
    pub continuity: usize,
}

impl TraceStats {
    pub fn of(trace: &Trace) -> Self {
        let mut s = TraceStats::default();
        for role in Role::ALL {
            s.by_role.insert(role.as_str(), 0);
        }
        s.by_kind.insert("pas", 0);
        s.by_kind.insert("oas", 0);
        for e in trace.events() {
            s.events += 1;
            let kind = match e.kind {
                StreamKind::Pas => "pas",
                StreamKind::Oas => "oas",
            };
            *s.by_kind.entry(kind).or_default() += 1;
            *s.by_role.entry(e.event.role.as_str()).or_default() += 1;
            match e.event.condition {
                Some(Condition::Environmental) => s.environmental += 1,
                Some(Condition::Continuity) => s.continuity += 1,
                None => {}
            }
        }
        for r in trace.reports() {
            match r.kind {
                biwheel::IterationKind::Forward => s.forward_reports += 1,
                biwheel::IterationKind::Backward => s.backward_reports += 1,
            }
            if r.switch_fired {
                s.switches += 1;
            }
        }
        s.stalls = trace.stalls().count();
        s
    }

    /// Share of attractor selections made under the environmental condition.
    pub fn environmental_fraction(&self) -> f64 {
        let total = self.environmental + self.continuity;
        if total == 0 {
            0.0
        } else {
            self.environmental as f64 / total as f64
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "events\t{}", self.events);
        for (k, v) in &self.by_kind {
            let _ = writeln!(out, "stream.{k}\t{v}");
        }
        for (k, v) in &self.by_role {
            let _ = writeln!(out, "role.{k}\t{v}");
        }
        let _ = writeln!(out, "reports.forward\t{}", self.forward_reports);
        let _ = writeln!(out, "reports.backward\t{}", self.backward_reports);
        let _ = writeln!(out, "switches\t{}", self.switches);
        let _ = writeln!(out, "stalls\t{}", self.stalls);
        let _ = writeln!(out, "condition.environmental\t{}", self.environmental);
        let _ = writeln!(out, "condition.continuity\t{}", self.continuity);
        let _ = writeln!(
            out,
            "environmental_fraction\t{:.6}",
            self.environmental_fraction()
        );
        out
    }
}

/// Renders a report for `trace`. Resonance mode loads the index named in the
/// trace header unless `index` is given, and uses the header's `tau_peak`
/// unless overridden.
pub fn cmd_analyze(
    trace_path: &Path,
    mode: AnalyzeMode,
    index: Option<&Path>,
    tau_peak: Option<f64>,
) -> Result<String> {
    let trace = Trace::load(trace_path)?;
    match mode {
        AnalyzeMode::Stats => Ok(TraceStats::of(&trace).render()),
        AnalyzeMode::Resonance => {
            let dir = index
                .map(Path::to_path_buf)
                .or_else(|| trace.header.config.index.clone())
                .ok_or_else(|| {
                    Error::Config("no index given and none in the trace header".into())
                })?;
            let index = SemanticIndex::load(&dir)?;
            let tau = tau_peak.unwrap_or(trace.header.config.tau_peak);
            let peaks = biwheel::detect_resonance(&trace, &index, tau)?;
            let mut out = String::new();
            let _ = writeln!(out, "peaks\t{}", peaks.len());
            for p in peaks {
                let _ = writeln!(
                    out,
                    "{:.6}\t{}\t{}\t{}\t{}\t{}",
                    p.score, p.pas_step, p.pas_term, p.oas_stream, p.oas_step, p.oas_term
                );
            }
            Ok(out)
        }
    }
}
