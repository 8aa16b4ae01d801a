//! Normal and Student-t distribution functions used by the copula samplers.
//!
//! The Student-t quantile inverts the regularised incomplete beta function
//! with a bracketed Newton iteration on the log-CDF. The lower bracket comes
//! from the power-law tail asymptote (which always over-shoots the true
//! quantile), the starting point from the Cornish-Fisher expansion around the
//! matching normal quantile.

use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let z = -SQRT_2 * erfc_inv(2.0 * p);
    // one Halley step against the accurate CDF
    let e = if z < 0.0 { normal_cdf(z) - p } else { (1.0 - p) - normal_cdf(-z) };
    let r = e / normal_pdf(z);
    z - r / (1.0 + 0.5 * z * r)
}

/// Regularised incomplete beta `I_x(a, b)`, with `y = 1 - x` supplied by the
/// caller so that it can be formed without cancellation.
pub fn inc_beta(a: f64, b: f64, x: f64, y: f64, ln_beta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * y.ln() - ln_beta).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Student-t distribution with `nu` degrees of freedom (standard location and scale).
#[derive(Debug, Clone, Copy)]
pub struct StudentT {
    nu: f64,
    half_nu: f64,
    ln_beta: f64,
    /// log of the density normaliser `1 / (sqrt(nu) B(nu/2, 1/2))`
    ln_k: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> Self {
        assert!(nu > 0.0 && nu.is_finite(), "degrees of freedom must be positive");
        let half_nu = 0.5 * nu;
        let ln_beta = ln_gamma(half_nu) + ln_gamma(0.5) - ln_gamma(half_nu + 0.5);
        StudentT { nu, half_nu, ln_beta, ln_k: -0.5 * nu.ln() - ln_beta }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn pdf(&self, t: f64) -> f64 {
        (self.ln_k - 0.5 * (self.nu + 1.0) * (t * t / self.nu).ln_1p()).exp()
    }

    /// `P(T <= -|t|)`, computed without cancellation.
    pub fn lower_tail(&self, t: f64) -> f64 {
        let t2 = t * t;
        let denom = self.nu + t2;
        0.5 * inc_beta(self.half_nu, 0.5, self.nu / denom, t2 / denom, self.ln_beta)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let tail = self.lower_tail(t);
        if t <= 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    /// Quantile function.
    pub fn quantile(&self, p: f64) -> f64 {
        if p.is_nan() {
            return f64::NAN;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        if p == 0.5 {
            return 0.0;
        }
        let q = p.min(1.0 - p);
        let t = self.lower_quantile(q, normal_quantile(q));
        if p < 0.5 {
            t
        } else {
            -t
        }
    }

    /// `T^{-1}(Phi(z))`, the copula map from a standard normal coordinate.
    /// The tail probability is formed directly so extreme `z` keeps full precision.
    pub fn quantile_of_normal(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        if !z.is_finite() {
            return z;
        }
        let q = 0.5 * erfc(z.abs() * FRAC_1_SQRT_2);
        let t = self.lower_quantile(q, -z.abs());
        if z < 0.0 {
            t
        } else {
            -t
        }
    }

    /// Solves `F(t) = q` for `t <= 0`, given `q in (0, 0.5]` and the
    /// matching normal quantile `z <= 0`.
    fn lower_quantile(&self, q: f64, z: f64) -> f64 {
        if q >= 0.5 {
            return 0.0;
        }
        let nu = self.nu;
        // Power-law asymptote F(t) ~ k nu^{(nu-1)/2} |t|^{-nu}; it dominates
        // the true CDF so its root lies at or beyond the true quantile.
        let ln_abs = (self.ln_k + 0.5 * (nu - 1.0) * nu.ln() - q.ln()) / nu;
        let mut lo = -ln_abs.exp().max(1e-300);
        let mut hi = 0.0;
        if !lo.is_finite() {
            lo = -1e300;
        }
        let mut t = cornish_fisher(z, nu).clamp(lo, hi);
        if t >= hi || t <= lo {
            t = 0.5 * (lo + hi);
        }
        let ln_q = q.ln();
        for _ in 0..200 {
            let f = self.lower_tail(t);
            if f <= 0.0 {
                lo = t;
                t = 0.5 * (lo + hi);
                continue;
            }
            let h = f.ln() - ln_q;
            if h == 0.0 {
                break;
            }
            if h > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let dens = self.pdf(t);
            let mut next = t - h * f / dens;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let step = (next - t).abs();
            t = next;
            if step <= 1e-14 * t.abs().max(1e-300) {
                break;
            }
        }
        t
    }
}

/// Cornish-Fisher expansion of the t quantile in powers of `1/nu`.
fn cornish_fisher(z: f64, nu: f64) -> f64 {
    let z2 = z * z;
    let z3 = z2 * z;
    let z5 = z3 * z2;
    let z7 = z5 * z2;
    let z9 = z7 * z2;
    let g1 = (z3 + z) / 4.0;
    let g2 = (5.0 * z5 + 16.0 * z3 + 3.0 * z) / 96.0;
    let g3 = (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / 384.0;
    let g4 = (79.0 * z9 + 776.0 * z7 + 1482.0 * z5 - 1920.0 * z3 - 945.0 * z) / 92160.0;
    z + g1 / nu + g2 / (nu * nu) + g3 / nu.powi(3) + g4 / nu.powi(4)
}
