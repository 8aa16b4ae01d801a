use super::decision::{Decision, DIM_W};
use crate::error::{domain, Result};
use crate::seed::stream;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

pub type Row = [f64; DIM_W];

/// Independent standard normals; with `antithetic` the second half of the rows
/// negates the first half row by row.
pub fn standard_normals(n: usize, seed: u64, antithetic: bool) -> Result<Vec<Row>> {
    if n == 0 {
        return domain("scenario count must be positive");
    }
    if antithetic && n % 2 == 1 {
        return domain(format!("antithetic sampling needs an even count, got {n}"));
    }
    let mut rng = stream(seed);
    let fresh = if antithetic { n / 2 } else { n };
    let mut rows = Vec::with_capacity(n);
    for _ in 0..fresh {
        let mut r = [0.0; DIM_W];
        for v in &mut r {
            *v = StandardNormal.sample(&mut rng);
        }
        rows.push(r);
    }
    if antithetic {
        for i in 0..fresh {
            let r = rows[i].map(|v| -v);
            rows.push(r);
        }
    }
    Ok(rows)
}

/// A decision-dependent process for the uncertain parameter together with its cost.
///
/// Implementations map independent standard normals to correlated normals
/// and then to `W`, so that the same normals can be pushed through `P_x` at
/// nearby decisions.
pub trait Simulator: Send + Sync {
    fn label(&self) -> &str;

    /// Returns `(z, w)`: the correlated normals and the scenario rows at `x`.
    fn transform(&self, x: &Decision, iid: &[Row]) -> Result<(Vec<Row>, Vec<Row>)>;

    /// Cost of one scenario row at `x`. Defined for every real row.
    fn cost(&self, x: &Decision, w: &Row) -> f64;
}

/// An `n x 5` block of draws at one decision, with enough provenance to
/// regenerate or re-map it.
#[derive(Clone)]
pub struct ScenarioMatrix {
    iid: Arc<Vec<Row>>,
    z: Vec<Row>,
    w: Vec<Row>,
    seed: u64,
    antithetic: bool,
    decision: Decision,
}

impl ScenarioMatrix {
    pub fn generate(sim: &dyn Simulator, x: &Decision, n: usize, seed: u64, antithetic: bool) -> Result<Self> {
        let iid = Arc::new(standard_normals(n, seed, antithetic)?);
        Self::from_normals(sim, x, iid, seed, antithetic)
    }

    fn from_normals(
        sim: &dyn Simulator,
        x: &Decision,
        iid: Arc<Vec<Row>>,
        seed: u64,
        antithetic: bool,
    ) -> Result<Self> {
        let (z, w) = sim.transform(x, &iid)?;
        Ok(ScenarioMatrix { iid, z, w, seed, antithetic, decision: *x })
    }

    /// The same underlying normals pushed through the process at another decision.
    pub fn remap(&self, sim: &dyn Simulator, x: &Decision) -> Result<Self> {
        Self::from_normals(sim, x, Arc::clone(&self.iid), self.seed, self.antithetic)
    }

    /// Wraps already-drawn rows (no normals behind them), as used when the
    /// scenarios must stay fixed while the decision moves.
    pub fn with_decision(&self, x: &Decision) -> Self {
        ScenarioMatrix { decision: *x, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn rows(&self) -> &[Row] {
        &self.w
    }

    pub fn normals(&self) -> &[Row] {
        &self.z
    }

    pub fn iid_normals(&self) -> &[Row] {
        &self.iid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn antithetic(&self) -> bool {
        self.antithetic
    }

    pub fn decision(&self) -> &Decision {
        &self.decision
    }

    /// Per-scenario costs. The scenarios must have been drawn at `x`.
    pub fn costs(&self, sim: &dyn Simulator, x: &Decision) -> Result<Vec<f64>> {
        if self.decision != *x {
            return domain(format!("scenarios drawn at {:?} cannot be costed at {:?}", self.decision, x));
        }
        Ok(self.w.iter().map(|w| sim.cost(x, w)).collect())
    }
}

impl std::fmt::Debug for ScenarioMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioMatrix")
            .field("n", &self.w.len())
            .field("seed", &self.seed)
            .field("antithetic", &self.antithetic)
            .field("decision", &self.decision)
            .finish()
    }
}
