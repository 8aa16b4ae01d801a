//! Cost-component coefficients for both processes, loaded from flat
//! dotted-key TOML. The committed table ships inside the binary; any subset of
//! keys can be overridden by an experiment config.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Embedded default table.
pub const DEFAULT_CONSTANTS: &str = include_str!("../../constants/cost_constants.toml");
/// Version of the table layout understood by this build.
pub const CONSTANTS_VERSION: i64 = 1;

/// Pair indices `(j, k)` with `j < k` in row-major order: 12, 13, 14, 15, 23, ...
pub const PAIRS: [(usize, usize); 10] =
    [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];

#[derive(Debug, Clone, PartialEq)]
pub struct Dgp1Costs {
    pub dmg_a: [f64; 5],
    pub hp_b: [f64; 5],
    pub hp_t0: [f64; 5],
    pub hp_t1: [f64; 5],
    pub ep_kappa: f64,
    pub ep_beta: f64,
    pub ep_gamma: f64,
    pub ep_cap: f64,
    /// cross-damage weights, indexed like [`PAIRS`]
    pub del_d: [f64; 10],
    pub ac_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dgp2Params {
    pub mu_base: [f64; 5],
    pub mu_own: [f64; 5],
    pub mu_x6: [f64; 5],
    pub mu_res: [f64; 5],
    pub mu_int: [f64; 5],
    pub sigma_base: [f64; 5],
    pub sigma_slope: [f64; 5],
    pub sigma_cross: [f64; 5],
    pub corr_b: [f64; 10],
    pub corr_c: [f64; 10],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dgp2Costs {
    pub cap_base: [f64; 5],
    pub cap_own: [f64; 5],
    pub cap_x6: [f64; 5],
    pub hold_h: [f64; 5],
    pub short_s: [f64; 5],
    pub proc_p: [f64; 5],
    pub proc_exponent: f64,
    pub coord_kappa: f64,
    pub setup_q: f64,
}

/// Every named coefficient of both cost decompositions and the DGP2 parameter maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CostConstants {
    pub dgp1: Dgp1Costs,
    pub dgp2: Dgp2Params,
    pub dgp2_cost: Dgp2Costs,
}

fn pair_label(p: usize) -> String {
    let (j, k) = PAIRS[p];
    format!("{}{}", j + 1, k + 1)
}

impl CostConstants {
    fn blank() -> Self {
        CostConstants {
            dgp1: Dgp1Costs {
                dmg_a: [0.0; 5],
                hp_b: [0.0; 5],
                hp_t0: [0.0; 5],
                hp_t1: [0.0; 5],
                ep_kappa: 0.0,
                ep_beta: 0.0,
                ep_gamma: 0.0,
                ep_cap: 0.0,
                del_d: [0.0; 10],
                ac_q: 0.0,
            },
            dgp2: Dgp2Params {
                mu_base: [0.0; 5],
                mu_own: [0.0; 5],
                mu_x6: [0.0; 5],
                mu_res: [0.0; 5],
                mu_int: [0.0; 5],
                sigma_base: [0.0; 5],
                sigma_slope: [0.0; 5],
                sigma_cross: [0.0; 5],
                corr_b: [0.0; 10],
                corr_c: [0.0; 10],
            },
            dgp2_cost: Dgp2Costs {
                cap_base: [0.0; 5],
                cap_own: [0.0; 5],
                cap_x6: [0.0; 5],
                hold_h: [0.0; 5],
                short_s: [0.0; 5],
                proc_p: [0.0; 5],
                proc_exponent: 0.0,
                coord_kappa: 0.0,
                setup_q: 0.0,
            },
        }
    }

    /// All `(dotted key, slot)` pairs in file order.
    fn slots(&mut self) -> Vec<(String, &mut f64)> {
        let mut out: Vec<(String, &mut f64)> = Vec::with_capacity(160);
        fn arr<'a>(out: &mut Vec<(String, &'a mut f64)>, prefix: &str, a: &'a mut [f64; 5]) {
            for (j, v) in a.iter_mut().enumerate() {
                out.push((format!("{prefix}{}", j + 1), v));
            }
        }
        fn pairs<'a>(out: &mut Vec<(String, &'a mut f64)>, prefix: &str, a: &'a mut [f64; 10]) {
            for (p, v) in a.iter_mut().enumerate() {
                out.push((format!("{prefix}{}", pair_label(p)), v));
            }
        }
        let d1 = &mut self.dgp1;
        arr(&mut out, "dgp1.c_dmg.a", &mut d1.dmg_a);
        arr(&mut out, "dgp1.c_hp.b", &mut d1.hp_b);
        arr(&mut out, "dgp1.c_hp.t0_", &mut d1.hp_t0);
        arr(&mut out, "dgp1.c_hp.t1_", &mut d1.hp_t1);
        out.push(("dgp1.c_ep.kappa".into(), &mut d1.ep_kappa));
        out.push(("dgp1.c_ep.beta".into(), &mut d1.ep_beta));
        out.push(("dgp1.c_ep.gamma".into(), &mut d1.ep_gamma));
        out.push(("dgp1.c_ep.cap".into(), &mut d1.ep_cap));
        pairs(&mut out, "dgp1.c_del.d", &mut d1.del_d);
        out.push(("dgp1.c_ac.q".into(), &mut d1.ac_q));
        let d2 = &mut self.dgp2;
        arr(&mut out, "dgp2.mu.base", &mut d2.mu_base);
        arr(&mut out, "dgp2.mu.own", &mut d2.mu_own);
        arr(&mut out, "dgp2.mu.x6_", &mut d2.mu_x6);
        arr(&mut out, "dgp2.mu.res", &mut d2.mu_res);
        arr(&mut out, "dgp2.mu.int", &mut d2.mu_int);
        arr(&mut out, "dgp2.sigma.base", &mut d2.sigma_base);
        arr(&mut out, "dgp2.sigma.slope", &mut d2.sigma_slope);
        arr(&mut out, "dgp2.sigma.cross", &mut d2.sigma_cross);
        pairs(&mut out, "dgp2.corr.b", &mut d2.corr_b);
        pairs(&mut out, "dgp2.corr.c", &mut d2.corr_c);
        let c2 = &mut self.dgp2_cost;
        arr(&mut out, "dgp2.cap.base", &mut c2.cap_base);
        arr(&mut out, "dgp2.cap.own", &mut c2.cap_own);
        arr(&mut out, "dgp2.cap.x6_", &mut c2.cap_x6);
        arr(&mut out, "dgp2.c_hold.h", &mut c2.hold_h);
        arr(&mut out, "dgp2.c_short.s", &mut c2.short_s);
        arr(&mut out, "dgp2.c_proc.p", &mut c2.proc_p);
        out.push(("dgp2.c_proc.exponent".into(), &mut c2.proc_exponent));
        out.push(("dgp2.c_coord.kappa".into(), &mut c2.coord_kappa));
        out.push(("dgp2.c_setup.q".into(), &mut c2.setup_q));
        out
    }

    /// Every key this table understands, in file order.
    pub fn keys() -> Vec<String> {
        Self::blank().slots().into_iter().map(|(k, _)| k).collect()
    }

    /// Parses a complete table. Every key must be present exactly once.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let flat = flatten_toml(text)?;
        match flat.get("version") {
            Some(v) if *v == CONSTANTS_VERSION as f64 => {}
            Some(v) => return Err(Error::Config(format!("unsupported constants version {v}"))),
            None => return Err(Error::Config("constants file has no version key".into())),
        }
        let mut out = Self::blank();
        let mut seen = 0usize;
        {
            let slots = out.slots();
            let total = slots.len();
            for (key, slot) in slots {
                match flat.get(&key) {
                    Some(v) => {
                        *slot = *v;
                        seen += 1;
                    }
                    None => return Err(Error::Config(format!("constants file is missing {key}"))),
                }
            }
            if flat.len() - 1 != total {
                let known: std::collections::BTreeSet<String> = Self::keys().into_iter().collect();
                let stray: Vec<&String> = flat.keys().filter(|k| *k != "version" && !known.contains(*k)).collect();
                return Err(Error::Config(format!("unknown constants keys: {stray:?}")));
            }
        }
        debug_assert_eq!(seen, Self::keys().len());
        out.validate()?;
        Ok(out)
    }

    /// Applies overrides keyed by the same dotted names.
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        {
            let mut slots: BTreeMap<String, &mut f64> = self.slots().into_iter().collect();
            for (k, v) in overrides {
                match slots.get_mut(k) {
                    Some(slot) => **slot = *v,
                    None => return Err(Error::Config(format!("unknown constants key {k}"))),
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        let mut copy = self.clone();
        let found = copy.slots().into_iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        found
    }

    pub fn validate(&self) -> Result<()> {
        let mut copy = self.clone();
        for (k, v) in copy.slots() {
            if !v.is_finite() {
                return Err(Error::Config(format!("constant {k} is not finite")));
            }
        }
        if self.dgp1.ep_cap <= 0.0 {
            return Err(Error::Config("dgp1.c_ep.cap must be positive".into()));
        }
        Ok(())
    }

    /// Serialises to the flat format read by [`from_toml_str`](Self::from_toml_str).
    pub fn to_toml_string(&self) -> String {
        let mut copy = self.clone();
        let mut s = format!("version = {CONSTANTS_VERSION}\n");
        for (k, v) in copy.slots() {
            s.push_str(&format!("{k} = {v:?}\n"));
        }
        s
    }
}

impl Default for CostConstants {
    fn default() -> Self {
        CostConstants::from_toml_str(DEFAULT_CONSTANTS).expect("embedded constants table is valid")
    }
}

/// Flattens nested TOML tables into dotted numeric keys. Non-numeric leaves are rejected.
pub fn flatten_toml(text: &str) -> Result<BTreeMap<String, f64>> {
    let value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = BTreeMap::new();
    flatten_into(&value, "", &mut out)?;
    Ok(out)
}

fn flatten_into(table: &toml::Table, prefix: &str, out: &mut BTreeMap<String, f64>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten_into(t, &key, out)?,
            toml::Value::Float(f) => {
                out.insert(key, *f);
            }
            toml::Value::Integer(i) => {
                out.insert(key, *i as f64);
            }
            _ => return Err(Error::Config(format!("{key}: expected a number"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_table_loads() {
        let c = CostConstants::default();
        assert_eq!(c.get("dgp1.c_dmg.a1"), Some(c.dgp1.dmg_a[0]));
        assert_eq!(c.get("dgp2.corr.c45"), Some(c.dgp2.corr_c[9]));
        assert_eq!(c.get("nope"), None);
    }

    #[test]
    fn round_trip() {
        let c = CostConstants::default();
        let back = CostConstants::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn missing_and_unknown_keys_fail() {
        let c = CostConstants::default();
        let text = c.to_toml_string();
        let without: String =
            text.lines().filter(|l| !l.starts_with("dgp1.c_ac.q")).map(|l| format!("{l}\n")).collect();
        assert!(CostConstants::from_toml_str(&without).is_err());
        let extra = format!("{text}dgp1.c_ac.zzz = 1.0\n");
        assert!(CostConstants::from_toml_str(&extra).is_err());
        assert!(CostConstants::from_toml_str(&text.replace("version = 1", "version = 2")).is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut o = BTreeMap::new();
        o.insert("dgp2.c_setup.q".to_string(), 1.5);
        let c = CostConstants::default().with_overrides(&o).unwrap();
        assert_eq!(c.dgp2_cost.setup_q, 1.5);
        o.insert("dgp2.bogus".to_string(), 1.0);
        assert!(CostConstants::default().with_overrides(&o).is_err());
    }

    #[test]
    fn dgp2_correlations_stay_in_range() {
        let c = CostConstants::default();
        for p in 0..10 {
            let lo = c.dgp2.corr_b[p];
            let hi = c.dgp2.corr_b[p] + c.dgp2.corr_c[p];
            assert!(lo.min(hi) >= 0.05 && lo.max(hi) <= 0.9, "pair {p}");
        }
    }
}
