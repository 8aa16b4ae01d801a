use super::decision::Decision;
use super::matrix::ScenarioMatrix;
use super::oracle::Oracle;
use crate::error::Result;
use std::collections::HashMap;
use std::sync::Arc;

type Key = ([u64; 6], u64);

fn key(x: &Decision, seed: u64) -> Key {
    (x.as_array().map(f64::to_bits), seed)
}

/// Scenario matrices keyed on `(iterate, seed)`, owned by one optimiser run.
#[derive(Debug, Default)]
pub struct CrnCache {
    entries: HashMap<Key, Arc<ScenarioMatrix>>,
    generations: usize,
}

impl CrnCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the cached matrix for the key, drawing (and charging) it on first use.
    pub fn get_or_generate(
        &mut self,
        oracle: &Oracle,
        x: &Decision,
        n: usize,
        seed: u64,
        antithetic: bool,
        line: &str,
    ) -> Result<Arc<ScenarioMatrix>> {
        let k = key(x, seed);
        if let Some(m) = self.entries.get(&k) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(oracle.sample(x, n, seed, antithetic, line)?);
        self.generations += 1;
        self.entries.insert(k, Arc::clone(&m));
        Ok(m)
    }

    pub fn get(&self, x: &Decision, seed: u64) -> Option<Arc<ScenarioMatrix>> {
        self.entries.get(&key(x, seed)).cloned()
    }

    /// Drops every entry; called when the iterate advances.
    pub fn invalidate(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of matrices drawn over the cache's lifetime.
    pub fn generations(&self) -> usize {
        self.generations
    }
}
