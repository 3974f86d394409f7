//! Run configuration: a single JSON document with every free parameter of
//! the simulation. Missing fields take their defaults, and the fully
//! materialized document is echoed into each trace header.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::{DEFAULT_TAU_REL, DEFAULT_TAU_TOPIC, DEFAULT_TEMPERATURE};
use crate::stream::{
    DEFAULT_CLUSTER_MIN, DEFAULT_PORTION_SIZE, DEFAULT_RETRY_BOUND, DEFAULT_SUMMARIZE_WINDOW,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub id: String,
    pub terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portion_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_annot: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaConfig {
    pub id: String,
    #[serde(default)]
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiWheelConfig {
    /// Probability of the environmental condition when picking an attractor.
    pub p: f64,
    pub portion_size_pas: usize,
    pub portion_size_oas: usize,
    /// Number of forward (and of backward) iterations.
    pub iterations: usize,
    pub tau_rel: f64,
    pub tau_topic: f64,
    pub tau_peak: f64,
    pub temperature: f64,
    /// OAS events within this much μ of the heaviest one join the pair-set pool.
    pub mu_bias: f64,
    pub min_pool: usize,
    pub q_annot: f64,
    pub summarize_window: usize,
    pub cluster_min: usize,
    pub retry_bound: usize,
    pub seed: u64,
    pub index: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub env: Vec<String>,
    pub objects: Vec<ObjectConfig>,
    pub persona: Option<PersonaConfig>,
}

impl Default for BiWheelConfig {
    fn default() -> Self {
        BiWheelConfig {
            p: 0.5,
            portion_size_pas: DEFAULT_PORTION_SIZE,
            portion_size_oas: DEFAULT_PORTION_SIZE,
            iterations: 10,
            tau_rel: DEFAULT_TAU_REL,
            tau_topic: DEFAULT_TAU_TOPIC,
            tau_peak: 0.8,
            temperature: DEFAULT_TEMPERATURE,
            mu_bias: 0.05,
            min_pool: 8,
            q_annot: 0.25,
            summarize_window: DEFAULT_SUMMARIZE_WINDOW,
            cluster_min: DEFAULT_CLUSTER_MIN,
            retry_bound: DEFAULT_RETRY_BOUND,
            seed: 0,
            index: None,
            output: None,
            env: Vec::new(),
            objects: Vec::new(),
            persona: None,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn probability(name: &str, v: f64) -> Result<()> {
    check((0.0..=1.0).contains(&v), || {
        format!("{name} must lie in [0, 1], got {v}")
    })
}

fn threshold(name: &str, v: f64) -> Result<()> {
    check(v > 0.0 && v < 1.0, || {
        format!("{name} must lie in (0, 1), got {v}")
    })
}

fn count(name: &str, v: usize) -> Result<()> {
    check(v >= 1, || format!("{name} must be at least 1"))
}

impl BiWheelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the numeric parameters only.
    pub fn validate_params(&self) -> Result<()> {
        probability("p", self.p)?;
        probability("q_annot", self.q_annot)?;
        threshold("tau_rel", self.tau_rel)?;
        threshold("tau_topic", self.tau_topic)?;
        threshold("tau_peak", self.tau_peak)?;
        count("portion_size_pas", self.portion_size_pas)?;
        count("portion_size_oas", self.portion_size_oas)?;
        count("retry_bound", self.retry_bound)?;
        count("min_pool", self.min_pool)?;
        check(self.cluster_min >= 2, || {
            "cluster_min must be at least 2".into()
        })?;
        check(self.summarize_window >= self.cluster_min, || {
            "summarize_window must be at least cluster_min".into()
        })?;
        check(
            self.temperature >= 0.0 && self.temperature.is_finite(),
            || "temperature must be a finite non-negative number".into(),
        )?;
        check(self.mu_bias >= 0.0 && self.mu_bias.is_finite(), || {
            "mu_bias must be a finite non-negative number".into()
        })?;
        for obj in &self.objects {
            if let Some(p) = obj.p {
                probability(&format!("objects[{}].p", obj.id), p)?;
            }
            if let Some(q) = obj.q_annot {
                probability(&format!("objects[{}].q_annot", obj.id), q)?;
            }
            if let Some(n) = obj.portion_size {
                count(&format!("objects[{}].portion_size", obj.id), n)?;
            }
        }
        Ok(())
    }

    /// Full validation for a run: parameters plus index, environment and objects.
    pub fn validate(&self) -> Result<()> {
        self.validate_params()?;
        check(self.index.is_some(), || "missing index directory".into())?;
        check(!self.env.is_empty(), || {
            "env must list at least one term".into()
        })?;
        check(!self.objects.is_empty(), || {
            "at least one object is required".into()
        })?;
        let mut ids = BTreeSet::new();
        for obj in &self.objects {
            check(!obj.id.is_empty(), || "object ids must be non-empty".into())?;
            check(ids.insert(obj.id.as_str()), || {
                format!("duplicate object id `{}`", obj.id)
            })?;
            check(!obj.terms.is_empty(), || {
                format!("object `{}` lists no terms", obj.id)
            })?;
        }
        Ok(())
    }

    /// Rewrites relative paths against `base` (normally the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.index.as_mut() {
            fix(p);
        }
        if let Some(p) = self.output.as_mut() {
            fix(p);
        }
        for obj in &mut self.objects {
            if let Some(p) = obj.annotations.as_mut() {
                fix(p);
            }
        }
    }
}
