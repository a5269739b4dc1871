//! Canonical JSON for forms: `{"n": N, "bundle": [pζ, pz] | null, "terms":
//! [{"gens": ["dzeta0", "dZ1"], "coeff": ...}]}` in mask order.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::RationalFn;

use super::expr::FormExpr;
use super::gens::{DiffFamily, GenLayout};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    gens: Vec<String>,
    coeff: RationalFn,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormRepr {
    n: usize,
    bundle: Option<(i32, i32)>,
    terms: Vec<TermRepr>,
}

fn gen_name(f: DiffFamily, j: usize) -> String {
    format!("{}{j}", f.ascii())
}

fn parse_gen(l: GenLayout, s: &str) -> Option<u64> {
    let split = s.find(|c: char| c.is_ascii_digit())?;
    let fam = DiffFamily::from_ascii(&s[..split])?;
    let j: usize = s[split..].parse().ok()?;
    (j <= l.n).then(|| l.bit(fam, j))
}

impl Serialize for FormExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let l = self.layout();
        FormRepr {
            n: self.n(),
            bundle: self.bundle(),
            terms: self
                .terms()
                .map(|(m, c)| TermRepr {
                    gens: l.names(m).into_iter().map(|(f, j)| gen_name(f, j)).collect(),
                    coeff: c.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FormExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = FormRepr::deserialize(d)?;
        if 4 * (r.n + 1) > 64 {
            return Err(D::Error::custom("dimension too large"));
        }
        let l = GenLayout::new(r.n);
        let mut out = FormExpr::zero(r.n);
        for t in r.terms {
            let mut acc = FormExpr::scalar(r.n, t.coeff);
            for g in &t.gens {
                let bit = parse_gen(l, g).ok_or_else(|| D::Error::custom(format!("bad generator '{g}'")))?;
                acc = acc.wedge(&FormExpr::term(r.n, bit, RationalFn::one()));
            }
            out = &out + &acc;
        }
        Ok(match r.bundle {
            Some(b) => out.with_bundle(b),
            None => out,
        })
    }
}
