//! Multi-object nets and per-person generating sets.

use std::collections::BTreeSet;

use log::warn;

use crate::annotator::AnnotationSource;
use crate::biwheel::{Net, NoObserver, ObjectLoop, ObjectParams, Observer, OAS_ID};
use crate::config::BiWheelConfig;
use crate::error::{Error, Result};
use crate::semantics::SemanticIndex;
use crate::stream::{GenSource, GeneratingSet};
use crate::term::Term;
use crate::trace::Trace;

/// Feature terms describing one person.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonaProfile {
    pub id: String,
    pub features: Vec<Term>,
}

impl PersonaProfile {
    /// Normalizes `raw`, dropping anything the index cannot represent.
    pub fn resolve<S: AsRef<str>>(id: &str, raw: &[S], index: &SemanticIndex) -> Self {
        let mut features = Vec::new();
        for r in raw {
            match Term::parse(r.as_ref()) {
                Some(t) if index.is_indexed(&t) => features.push(t),
                _ => warn!("persona {id}: dropping unindexed term `{}`", r.as_ref()),
            }
        }
        PersonaProfile {
            id: id.to_string(),
            features,
        }
    }
}

/// The environment's generating set extended with the person's feature terms.
pub fn personalize(env: &GeneratingSet, persona: &PersonaProfile) -> GeneratingSet {
    env.union(&persona.features, GenSource::Persona)
}

#[derive(Debug, Clone)]
pub struct ObjectSpec {
    pub id: String,
    pub generating: GeneratingSet,
    pub annotations: AnnotationSource,
    pub params: ObjectParams,
}

#[derive(Debug, Clone)]
pub struct AENetSpec {
    pub env: GeneratingSet,
    pub objects: Vec<ObjectSpec>,
    pub persona: Option<PersonaProfile>,
}

impl AENetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::Config("a net needs at least one object".into()));
        }
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(Error::Config(format!("duplicate object id `{}`", o.id)));
            }
        }
        Ok(())
    }

    /// Environment after personalization, if a persona is present.
    pub fn pas_generating_set(&self) -> GeneratingSet {
        match &self.persona {
            Some(p) => personalize(&self.env, p),
            None => self.env.clone(),
        }
    }
}

pub fn object_stream_id(object: &str) -> String {
    format!("{OAS_ID}:{object}")
}

/// One person stream against every object stream, objects visited in spec order.
pub fn run_multi(spec: &AENetSpec, cfg: &BiWheelConfig, index: &SemanticIndex) -> Result<Trace> {
    run_multi_observed(spec, cfg, index, &mut NoObserver)
}

pub fn run_multi_observed(
    spec: &AENetSpec,
    cfg: &BiWheelConfig,
    index: &SemanticIndex,
    observer: &mut dyn Observer,
) -> Result<Trace> {
    spec.validate()?;
    let loops = spec
        .objects
        .iter()
        .map(|o| ObjectLoop {
            stream_id: object_stream_id(&o.id),
            generating: o.generating.clone(),
            annotations: o.annotations.clone(),
            params: o.params,
        })
        .collect();
    let mut net = Net::new(cfg, index, spec.pas_generating_set(), loops, observer)?;
    net.drive(cfg.iterations, observer)?;
    Ok(net.into_trace())
}
