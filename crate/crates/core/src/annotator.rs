//! File-backed stand-in for external object annotation tools.

use std::fs;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::semantics::SemanticIndex;
use crate::term::Term;

/// Ordered annotation terms for one object, handed out at most once each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSource {
    object: String,
    terms: Vec<Term>,
    cursor: usize,
}

impl AnnotationSource {
    pub fn empty(object: impl Into<String>) -> Self {
        AnnotationSource {
            object: object.into(),
            ..Self::default()
        }
    }

    /// Keeps the indexed terms of `lines` in order; blank and `#` lines are skipped.
    pub fn from_lines<'a>(
        object: impl Into<String>,
        lines: impl IntoIterator<Item = &'a str>,
        index: &SemanticIndex,
    ) -> Self {
        let object = object.into();
        let mut terms = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match Term::parse(line) {
                Some(t) if index.is_indexed(&t) => terms.push(t),
                _ => warn!("{object}: skipping unindexed annotation `{line}`"),
            }
        }
        AnnotationSource {
            object,
            terms,
            cursor: 0,
        }
    }

    pub fn load(object: impl Into<String>, path: &Path, index: &SemanticIndex) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let source = Self::from_lines(object, text.lines(), index);
        if source.terms.is_empty() {
            warn!(
                "{}: no usable annotations in {}",
                source.object,
                path.display()
            );
        }
        Ok(source)
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.terms.len() - self.cursor
    }

    pub fn next_annotation(&mut self) -> Option<Term> {
        let term = self.terms.get(self.cursor)?.clone();
        self.cursor += 1;
        Some(term)
    }
}
