use super::{DecisionSpace, Domain};
use crate::error::{Error, Result};
use crate::risk::RiskParams;
use crate::scenario::{Decision, Oracle, ScenarioMatrix, DIM_X};

/// Central differences on projected points. The divisor is the distance the
/// coordinate actually moved, so at a bound this falls back to a one-sided
/// difference; a coordinate that cannot move at all gets zero.
pub fn fd_gradient<D, F>(mut f: F, x: &[f64], step: f64, domain: &D) -> Vec<f64>
where
    D: Domain + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    assert!(step > 0.0, "difference step must be positive");
    let mut g = vec![0.0; x.len()];
    let mut f_here = None;
    for j in 0..x.len() {
        let mut xp = x.to_vec();
        xp[j] += step;
        domain.project(&mut xp);
        let mut xm = x.to_vec();
        xm[j] -= step;
        domain.project(&mut xm);
        let h = xp[j] - xm[j];
        if h <= 0.0 {
            continue;
        }
        let mut at = |p: &[f64]| {
            if p == x {
                *f_here.get_or_insert_with(|| f(x))
            } else {
                f(p)
            }
        };
        let fp = at(&xp);
        let fm = at(&xm);
        g[j] = (fp - fm) / h;
    }
    g
}

/// How a cached scenario block is reused at a nearby decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrnMode {
    /// Keep the underlying normals and push them through the process at the
    /// new decision. Every re-map is charged as fresh scenario draws.
    #[default]
    CommonNormals,
    /// Keep the drawn scenario rows themselves and only re-cost them.
    FixedScenarios,
}

/// Spectral risk at `x` on the scenario block `m`.
pub fn crn_risk(
    oracle: &Oracle,
    x: &Decision,
    m: &ScenarioMatrix,
    params: RiskParams,
    mode: CrnMode,
    line: &str,
) -> Result<f64> {
    let est = if m.decision() == x {
        oracle.risk_of(m, params)?
    } else {
        match mode {
            CrnMode::CommonNormals => oracle.risk_of(&oracle.remap(m, x, line)?, params)?,
            CrnMode::FixedScenarios => oracle.risk_of(&m.with_decision(x), params)?,
        }
    };
    Ok(est.total)
}

/// Finite-difference gradient of the spectral risk with every evaluation on
/// the same cached block. Repeated calls are bit-identical.
pub fn fd_gradient_crn(
    oracle: &Oracle,
    x: &Decision,
    m: &ScenarioMatrix,
    params: RiskParams,
    step: f64,
    mode: CrnMode,
    line: &str,
) -> Result<[f64; DIM_X]> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("difference step must be positive, got {step}")));
    }
    let space = DecisionSpace::new();
    let mut failure = None;
    let g = fd_gradient(
        |p| match crn_risk(oracle, &space.decision(p), m, params, mode, line) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        x.as_array(),
        step,
        &space,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(g.try_into().expect("six components"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Dgp, DgpKind, QuadraticTestbed};
    use crate::search::BoxBounds;
    use std::sync::Arc;

    #[test]
    fn smooth_functions_match_analytic_gradients() {
        let b = BoxBounds::new(vec![-5.0; 3], vec![5.0; 3]).unwrap();
        let x = [0.3, -0.7, 1.1];
        type Case = (fn(&[f64]) -> f64, fn(&[f64]) -> Vec<f64>);
        let cases: [Case; 3] = [
            (|x| x[0] * x[0] + 3.0 * x[1] * x[2], |x| vec![2.0 * x[0], 3.0 * x[2], 3.0 * x[1]]),
            (
                |x| (x[0] + 2.0 * x[1]).exp() + x[2].sin(),
                |x| {
                    let e = (x[0] + 2.0 * x[1]).exp();
                    vec![e, 2.0 * e, x[2].cos()]
                },
            ),
            (
                |x| (1.0 + x[0] * x[0] + x[1] * x[1] * x[2] * x[2]).ln(),
                |x| {
                    let d = 1.0 + x[0] * x[0] + x[1] * x[1] * x[2] * x[2];
                    vec![2.0 * x[0] / d, 2.0 * x[1] * x[2] * x[2] / d, 2.0 * x[2] * x[1] * x[1] / d]
                },
            ),
        ];
        for (f, g) in cases {
            let num = fd_gradient(f, &x, 1e-4, &b);
            for (a, e) in num.iter().zip(g(&x)) {
                assert!((a - e).abs() <= 1e-5 * e.abs().max(1.0), "{a} vs {e}");
            }
        }
    }

    #[test]
    fn one_sided_at_bounds() {
        let b = BoxBounds::unit(2);
        let g = fd_gradient(|x| 2.0 * x[0] + x[1] * x[1], &[0.0, 1.0], 1e-4, &b);
        assert!((g[0] - 2.0).abs() < 1e-9);
        assert!((g[1] - 2.0).abs() < 1e-3);
        let flat = BoxBounds::new(vec![0.5], vec![0.5]).unwrap();
        assert_eq!(fd_gradient(|x| x[0], &[0.5], 1e-4, &flat), vec![0.0]);
    }

    #[test]
    fn quadratic_oracle_gradient() {
        let q = QuadraticTestbed::default();
        let oracle = Oracle::new(Arc::new(q.clone()));
        let x = Decision::new([0.2, 0.1, 0.1, 0.1, 0.2, 0.5]).unwrap();
        let m = oracle.sample(&x, 10, 1, true, "t").unwrap();
        let p = RiskParams::new(0.7, 0.95).unwrap();
        let g = fd_gradient_crn(&oracle, &x, &m, p, 1e-4, CrnMode::CommonNormals, "t").unwrap();
        for j in 0..DIM_X {
            // with W = 0 the risk is (1 + lambda) times the quadratic
            let e = 1.7 * 2.0 * q.scale * (x[j] - q.center[j]);
            assert!((g[j] - e).abs() < 1e-6 * e.abs().max(1.0), "{j}: {} vs {e}", g[j]);
        }
    }

    #[test]
    fn repeated_calls_are_bit_identical_and_charged() {
        let oracle = Oracle::new(Arc::new(Dgp::standard(DgpKind::Dgp1)));
        let x = Decision::new([0.15, 0.1, 0.2, 0.1, 0.1, 0.4]).unwrap();
        let m = oracle.sample(&x, 200, 5, true, "fn").unwrap();
        let p = RiskParams::new(0.7, 0.95).unwrap();
        for mode in [CrnMode::CommonNormals, CrnMode::FixedScenarios] {
            let a = fd_gradient_crn(&oracle, &x, &m, p, 1e-3, mode, "grad").unwrap();
            let b = fd_gradient_crn(&oracle, &x, &m, p, 1e-3, mode, "grad").unwrap();
            assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        }
        // two common-normal calls, twelve re-maps each
        assert_eq!(oracle.ledger().get("grad"), 2 * 12 * 200);
        assert!(fd_gradient_crn(&oracle, &x, &m, p, 0.0, CrnMode::CommonNormals, "grad").is_err());
    }
}
