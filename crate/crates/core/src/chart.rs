//! Coordinate registries. Every expression and form lives on exactly one chart.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("invalid symbol name `{0}`")]
    InvalidName(String),
    #[error("duplicate symbol name `{0}`")]
    Duplicate(String),
    #[error("alias `{0}` targets coordinate {1} outside the chart")]
    BadAlias(String, usize),
}

/// A resolved name: coordinate index and the sign the alias carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symbol {
    pub index: usize,
    pub sign: f64,
}

/// Ordered coordinate names plus signed aliases.
#[derive(Clone)]
pub struct Chart {
    id: u64,
    names: Vec<String>,
    lookup: HashMap<String, Symbol>,
    aliases: Vec<(String, Symbol)>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart").field("names", &self.names).finish()
    }
}

pub fn valid_symbol(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Chart {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, ChartError> {
        let mut lookup = HashMap::new();
        let mut owned = Vec::with_capacity(names.len());
        for (index, name) in names.iter().enumerate() {
            let name = name.as_ref();
            if !valid_symbol(name) || crate::expr::is_primitive(name) {
                return Err(ChartError::InvalidName(name.to_string()));
            }
            if lookup.insert(name.to_string(), Symbol { index, sign: 1.0 }).is_some() {
                return Err(ChartError::Duplicate(name.to_string()));
            }
            owned.push(name.to_string());
        }
        Ok(Chart {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            names: owned,
            lookup,
            aliases: Vec::new(),
        })
    }

    pub fn add_alias(&mut self, name: &str, index: usize, sign: f64) -> Result<(), ChartError> {
        if !valid_symbol(name) || crate::expr::is_primitive(name) {
            return Err(ChartError::InvalidName(name.to_string()));
        }
        if index >= self.names.len() {
            return Err(ChartError::BadAlias(name.to_string(), index));
        }
        let sym = Symbol { index, sign };
        if self.lookup.insert(name.to_string(), sym).is_some() {
            return Err(ChartError::Duplicate(name.to_string()));
        }
        self.aliases.push((name.to_string(), sym));
        Ok(())
    }

    pub fn into_arc(self) -> Arc<Chart> {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn aliases(&self) -> &[(String, Symbol)] {
        &self.aliases
    }

    pub fn resolve(&self, name: &str) -> Option<Symbol> {
        self.lookup.get(name).copied()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.resolve(name).filter(|s| s.sign == 1.0 && self.names[s.index] == name).map(|s| s.index)
    }

    pub fn same(&self, other: &Chart) -> bool {
        self.id == other.id
    }
}
