//! Serialization forms for exact values: rationals travel as `{num, den}` string pairs.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::laurent::{LaurentPoly, Q};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactQ {
    pub num: String,
    pub den: String,
}

impl From<&Q> for ExactQ {
    fn from(x: &Q) -> Self {
        ExactQ { num: x.numer().to_string(), den: x.denom().to_string() }
    }
}

impl TryFrom<&ExactQ> for Q {
    type Error = crate::Error;
    fn try_from(e: &ExactQ) -> crate::Result<Q> {
        let parse = |s: &str| {
            s.parse::<BigInt>().map_err(|_| crate::Error::InvalidData(format!("not an integer: {s:?}")))
        };
        let den = parse(&e.den)?;
        if den == BigInt::from(0) {
            return Err(crate::Error::InvalidData("zero denominator".into()));
        }
        Ok(Q::new(parse(&e.num)?, den))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactTerm {
    pub exp: i64,
    pub num: String,
    pub den: String,
}

/// Terms in increasing exponent order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExactPoly(pub Vec<ExactTerm>);

impl From<&LaurentPoly> for ExactPoly {
    fn from(p: &LaurentPoly) -> Self {
        ExactPoly(
            p.terms()
                .map(|(e, c)| ExactTerm { exp: e, num: c.numer().to_string(), den: c.denom().to_string() })
                .collect(),
        )
    }
}

impl TryFrom<&ExactPoly> for LaurentPoly {
    type Error = crate::Error;
    fn try_from(p: &ExactPoly) -> crate::Result<LaurentPoly> {
        let mut out = LaurentPoly::zero();
        for t in &p.0 {
            let c = Q::try_from(&ExactQ { num: t.num.clone(), den: t.den.clone() })?;
            out.add_term(t.exp, c);
        }
        Ok(out)
    }
}
