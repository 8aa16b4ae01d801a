use super::constants::CostConstants;
use super::correlation::correlation_repair;
use super::decision::{Decision, DIM_W};
use super::matrix::{Row, ScenarioMatrix, Simulator};
use super::{dgp1, dgp2};
use crate::error::{Error, Result};
use crate::special::StudentT;
use nalgebra::{Cholesky, Matrix5, Vector5};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DgpKind {
    /// Scaled Student-t marginals through a Gaussian copula.
    Dgp1,
    /// Log-normal marginals through a Gaussian copula.
    Dgp2,
}

impl DgpKind {
    pub fn label(self) -> &'static str {
        match self {
            DgpKind::Dgp1 => "dgp1",
            DgpKind::Dgp2 => "dgp2",
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DgpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dgp1" | "1" => Ok(DgpKind::Dgp1),
            "dgp2" | "2" => Ok(DgpKind::Dgp2),
            _ => Err(Error::Config(format!("unknown dgp {s:?}"))),
        }
    }
}

/// Marginal and dependence parameters at one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalParams {
    pub mu: [f64; DIM_W],
    pub sigma: [f64; DIM_W],
    /// degrees of freedom, DGP1 only
    pub nu: Option<[f64; DIM_W]>,
    /// raw correlation before repair
    pub raw_corr: Matrix5<f64>,
    /// repaired, positive-definite correlation
    pub corr: Matrix5<f64>,
}

pub(crate) fn symmetric_from_pairs(pairs: &[f64; 10]) -> Matrix5<f64> {
    let mut m = Matrix5::identity();
    for (p, &(j, k)) in super::constants::PAIRS.iter().enumerate() {
        m[(j, k)] = pairs[p];
        m[(k, j)] = pairs[p];
    }
    m
}

/// One of the two benchmark processes with its coefficient table.
#[derive(Debug, Clone)]
pub struct Dgp {
    kind: DgpKind,
    constants: CostConstants,
    dispersion: f64,
}

impl Dgp {
    pub fn new(kind: DgpKind, constants: CostConstants) -> Self {
        Dgp { kind, constants, dispersion: 1.0 }
    }

    pub fn standard(kind: DgpKind) -> Self {
        Self::new(kind, CostConstants::default())
    }

    /// Multiplies every marginal scale by `factor`; zero gives a point mass at the location.
    pub fn with_dispersion(mut self, factor: f64) -> Self {
        assert!(factor >= 0.0 && factor.is_finite());
        self.dispersion = factor;
        self
    }

    pub fn kind(&self) -> DgpKind {
        self.kind
    }

    pub fn constants(&self) -> &CostConstants {
        &self.constants
    }

    pub fn params(&self, x: &Decision) -> Result<MarginalParams> {
        let mut p = match self.kind {
            DgpKind::Dgp1 => dgp1::params(x)?,
            DgpKind::Dgp2 => dgp2::params(x, &self.constants.dgp2)?,
        };
        for s in &mut p.sigma {
            *s *= self.dispersion;
        }
        Ok(p)
    }

    pub fn sample(&self, x: &Decision, n: usize, seed: u64, antithetic: bool) -> Result<ScenarioMatrix> {
        ScenarioMatrix::generate(self, x, n, seed, antithetic)
    }
}

impl Simulator for Dgp {
    fn label(&self) -> &str {
        self.kind.label()
    }

    fn transform(&self, x: &Decision, iid: &[Row]) -> Result<(Vec<Row>, Vec<Row>)> {
        let p = self.params(x)?;
        let chol = Cholesky::new(p.corr)
            .ok_or_else(|| Error::Numerical("repaired correlation is not positive definite".into()))?;
        let l = chol.l();
        let mut z = Vec::with_capacity(iid.len());
        let mut w = Vec::with_capacity(iid.len());
        let marginals: Option<[StudentT; DIM_W]> = p.nu.map(|nu| nu.map(StudentT::new));
        for e in iid {
            let zc = l * Vector5::from_column_slice(e);
            let zr: Row = [zc[0], zc[1], zc[2], zc[3], zc[4]];
            let mut wr = [0.0; DIM_W];
            for j in 0..DIM_W {
                wr[j] = match &marginals {
                    Some(t) => p.mu[j] + p.sigma[j] * t[j].quantile_of_normal(zr[j]),
                    None => (p.mu[j] + p.sigma[j] * zr[j]).exp(),
                };
            }
            z.push(zr);
            w.push(wr);
        }
        Ok((z, w))
    }

    fn cost(&self, x: &Decision, w: &Row) -> f64 {
        match self.kind {
            DgpKind::Dgp1 => dgp1::cost(w, x, &self.constants.dgp1),
            DgpKind::Dgp2 => dgp2::cost(w, x, &self.constants.dgp2_cost),
        }
    }
}

/// Applies the clamp/clip/rescale repair to a raw correlation built from pair values.
pub(crate) fn repaired(raw_pairs: &[f64; 10]) -> Result<(Matrix5<f64>, Matrix5<f64>)> {
    let raw = symmetric_from_pairs(raw_pairs);
    let corr = correlation_repair(&raw)?;
    Ok((raw, corr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parses() {
        assert_eq!("DGP1".parse::<DgpKind>().unwrap(), DgpKind::Dgp1);
        assert_eq!("dgp2".parse::<DgpKind>().unwrap(), DgpKind::Dgp2);
        assert!("dgp3".parse::<DgpKind>().is_err());
    }

    #[test]
    fn antithetic_correlated_normals_cancel() {
        let x = Decision::new([0.1, 0.2, 0.1, 0.05, 0.1, 0.4]).unwrap();
        for kind in [DgpKind::Dgp1, DgpKind::Dgp2] {
            let m = Dgp::standard(kind).sample(&x, 40, 9, true).unwrap();
            let z = m.normals();
            for j in 0..DIM_W {
                let s: f64 = (0..20).map(|i| z[i][j] + z[i + 20][j]).sum();
                assert_eq!(s, 0.0);
            }
        }
    }

    #[test]
    fn zero_dispersion_collapses_to_location() {
        let x = Decision::new([0.2, 0.0, 0.3, 0.1, 0.0, 0.6]).unwrap();
        for kind in [DgpKind::Dgp1, DgpKind::Dgp2] {
            let dgp = Dgp::standard(kind).with_dispersion(0.0);
            let p = dgp.params(&x).unwrap();
            let m = dgp.sample(&x, 16, 1, false).unwrap();
            for r in m.rows() {
                for j in 0..DIM_W {
                    let expect = if kind == DgpKind::Dgp1 { p.mu[j] } else { p.mu[j].exp() };
                    assert_eq!(r[j], expect);
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let x = Decision::new([0.3, 0.1, 0.1, 0.1, 0.1, 0.5]).unwrap();
        let d = Dgp::standard(DgpKind::Dgp1);
        let a = d.sample(&x, 30, 5, true).unwrap();
        let b = d.sample(&x, 30, 5, true).unwrap();
        assert_eq!(a.rows(), b.rows());
        assert!(d.sample(&x, 31, 5, true).is_err());
    }

    #[test]
    fn costs_require_matching_decision() {
        let x = Decision::new([0.3, 0.1, 0.1, 0.1, 0.1, 0.5]).unwrap();
        let y = Decision::zeros();
        let d = Dgp::standard(DgpKind::Dgp2);
        let m = d.sample(&x, 10, 5, false).unwrap();
        assert!(m.costs(&d, &x).is_ok());
        assert!(m.costs(&d, &y).is_err());
    }
}
