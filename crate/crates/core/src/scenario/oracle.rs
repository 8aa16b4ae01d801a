use super::decision::Decision;
use super::matrix::{Row, ScenarioMatrix, Simulator};
use crate::error::Result;
use crate::risk::{spectral_risk, RiskEstimate, RiskParams};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Scenario-draw counter with one named line per budget item.
#[derive(Debug, Default)]
pub struct Ledger {
    lines: Mutex<BTreeMap<String, u64>>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&self, line: &str, draws: u64) {
        let mut lines = self.lines.lock().expect("ledger lock poisoned");
        *lines.entry(line.to_string()).or_insert(0) += draws;
    }

    pub fn get(&self, line: &str) -> u64 {
        self.lines.lock().expect("ledger lock poisoned").get(line).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.lines.lock().expect("ledger lock poisoned").values().sum()
    }

    pub fn snapshot(&self) -> BTreeMap<String, u64> {
        self.lines.lock().expect("ledger lock poisoned").clone()
    }
}

/// Metered access to a simulator. Every scenario drawn or re-mapped through
/// the process is charged to a ledger line; cost evaluation on rows that are
/// already in hand is free.
#[derive(Clone)]
pub struct Oracle {
    sim: Arc<dyn Simulator>,
    ledger: Arc<Ledger>,
}

impl Oracle {
    pub fn new(sim: Arc<dyn Simulator>) -> Self {
        Oracle { sim, ledger: Arc::new(Ledger::new()) }
    }

    pub fn simulator(&self) -> &dyn Simulator {
        self.sim.as_ref()
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn sample(&self, x: &Decision, n: usize, seed: u64, antithetic: bool, line: &str) -> Result<ScenarioMatrix> {
        let m = ScenarioMatrix::generate(self.sim.as_ref(), x, n, seed, antithetic)?;
        self.ledger.charge(line, n as u64);
        Ok(m)
    }

    /// Pushes the normals behind `m` through the process at `x`.
    pub fn remap(&self, m: &ScenarioMatrix, x: &Decision, line: &str) -> Result<ScenarioMatrix> {
        let out = m.remap(self.sim.as_ref(), x)?;
        self.ledger.charge(line, m.len() as u64);
        Ok(out)
    }

    /// One scenario at `x`.
    pub fn draw(&self, x: &Decision, seed: u64, line: &str) -> Result<Row> {
        Ok(self.sample(x, 1, seed, false, line)?.rows()[0])
    }

    pub fn cost(&self, x: &Decision, w: &Row) -> f64 {
        self.sim.cost(x, w)
    }

    pub fn risk_of(&self, m: &ScenarioMatrix, params: RiskParams) -> Result<RiskEstimate> {
        spectral_risk(&m.costs(self.sim.as_ref(), m.decision())?, params)
    }

    pub fn evaluate(
        &self,
        x: &Decision,
        n: usize,
        seed: u64,
        antithetic: bool,
        params: RiskParams,
        line: &str,
    ) -> Result<RiskEstimate> {
        let m = self.sample(x, n, seed, antithetic, line)?;
        self.risk_of(&m, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Dgp, DgpKind};

    #[test]
    fn ledger_counts_every_draw() {
        let o = Oracle::new(Arc::new(Dgp::standard(DgpKind::Dgp2)));
        let x = Decision::zeros();
        let p = RiskParams::new(0.7, 0.95).unwrap();
        o.evaluate(&x, 40, 1, true, p, "a").unwrap();
        let m = o.sample(&x, 10, 2, false, "b").unwrap();
        o.remap(&m, &Decision::new([0.1, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), "b").unwrap();
        o.draw(&x, 3, "c").unwrap();
        o.cost(&x, &[1.0; 5]);
        assert_eq!(o.ledger().get("a"), 40);
        assert_eq!(o.ledger().get("b"), 20);
        assert_eq!(o.ledger().get("c"), 1);
        assert_eq!(o.ledger().total(), 61);
    }
}
