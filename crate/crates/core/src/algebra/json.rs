//! Canonical JSON term lists.
//!
//! A polynomial serializes as `[{"coeff": [re, im], "exps": {"zeta0": 2,
//! "pi2i": -1}}, ...]` in canonical term order.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::gaussian::GaussianRational;
use super::poly::{Monomial, MultiPoly};
use super::rational::RationalFn;
use super::vars::{Family, Var};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    coeff: GaussianRational,
    exps: BTreeMap<String, i32>,
}

fn monomial_repr(m: &Monomial) -> BTreeMap<String, i32> {
    let mut exps: BTreeMap<String, i32> = m.vars().map(|(v, e)| (v.to_string(), e as i32)).collect();
    if m.pi_exp() != 0 {
        exps.insert("pi2i".into(), m.pi_exp());
    }
    exps
}

fn parse_var(name: &str) -> Option<Var> {
    let split = name.find(|c: char| c.is_ascii_digit())?;
    let fam = Family::from_prefix(&name[..split])?;
    let idx: usize = name[split..].parse().ok()?;
    (idx < 64).then(|| Var::new(fam, idx))
}

fn monomial_from_repr(exps: &BTreeMap<String, i32>) -> Result<Monomial, String> {
    let mut m = Monomial::one();
    for (name, &e) in exps {
        if name == "pi2i" {
            m = m.mul(&Monomial::pi(e));
            continue;
        }
        let v = parse_var(name).ok_or_else(|| format!("unknown variable '{name}'"))?;
        if e < 0 {
            return Err(format!("negative exponent on {name}"));
        }
        m = m.mul(&Monomial::var(v, e as u32));
    }
    Ok(m)
}

impl Serialize for MultiPoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let terms: Vec<TermRepr> = self
            .terms()
            .map(|(m, c)| TermRepr {
                coeff: c.clone(),
                exps: monomial_repr(m),
            })
            .collect();
        terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let terms = Vec::<TermRepr>::deserialize(d)?;
        let mut p = MultiPoly::zero();
        for t in terms {
            let m = monomial_from_repr(&t.exps).map_err(D::Error::custom)?;
            p.add_term(m, t.coeff);
        }
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorRepr {
    factor: MultiPoly,
    exp: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RationalRepr {
    num: MultiPoly,
    den: Vec<FactorRepr>,
}

impl Serialize for RationalFn {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RationalRepr {
            num: self.numerator().clone(),
            den: self
                .factors()
                .iter()
                .map(|(f, e)| FactorRepr {
                    factor: f.clone(),
                    exp: *e,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RationalRepr::deserialize(d)?;
        let mut out = RationalFn::from(r.num);
        for f in r.den {
            out = out
                .div_poly_pow(&f.factor, f.exp)
                .map_err(|e| D::Error::custom(e.to_string()))?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse::parse_rational;
    use crate::algebra::vars::Universe;

    #[test]
    fn json_round_trip() {
        let u = Universe::new(2);
        let e = parse_rational("(i*zeta0*Z1 + pi2i^-1)/(zeta0*Zeta0 + zeta1*Zeta1)", u).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        let back: RationalFn = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
