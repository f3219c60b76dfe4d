//! JSON export/import of tableaux.
//!
//! Floating coefficients are written as decimal strings with 17 significant
//! digits; the optional `rational` block mirrors them exactly as `"num/den"`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MdTableau, Rational, RationalTableau, TableauError};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableauDocument {
    pub name: String,
    pub s: usize,
    pub m: usize,
    pub q: usize,
    pub c: Vec<String>,
    #[serde(rename = "B")]
    pub coeffs: Vec<Vec<Vec<String>>>,
    pub b: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rational: Option<RationalDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalDocument {
    pub c: Vec<String>,
    #[serde(rename = "B")]
    pub coeffs: Vec<Vec<Vec<String>>>,
    pub b: Vec<Vec<String>>,
}

fn decimal<T: Scalar>(x: &T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn ratio(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn parse_decimal<T: Scalar>(s: &str) -> Result<T, TableauError> {
    f64::from_str(s.trim())
        .map(T::lit)
        .map_err(|_| TableauError::Malformed(format!("bad decimal `{s}`")))
}

fn parse_ratio(s: &str) -> Result<Rational, TableauError> {
    Rational::from_str(s.trim()).map_err(|_| TableauError::Malformed(format!("bad rational `{s}`")))
}

fn map3<A, B>(
    x: &[Vec<Vec<A>>],
    f: impl Fn(&A) -> Result<B, TableauError>,
) -> Result<Vec<Vec<Vec<B>>>, TableauError> {
    x.iter()
        .map(|m| m.iter().map(|r| r.iter().map(&f).collect()).collect())
        .collect()
}

fn map2<A, B>(
    x: &[Vec<A>],
    f: impl Fn(&A) -> Result<B, TableauError>,
) -> Result<Vec<Vec<B>>, TableauError> {
    x.iter().map(|r| r.iter().map(&f).collect()).collect()
}

impl<T: Scalar> MdTableau<T> {
    pub fn to_document(&self) -> TableauDocument {
        let ok = |x: &T| -> Result<String, TableauError> { Ok(decimal(x)) };
        TableauDocument {
            name: self.name.clone(),
            s: self.stages(),
            m: self.derivatives(),
            q: self.order,
            c: self.nodes.iter().map(decimal).collect(),
            coeffs: map3(&self.coeffs, ok).expect("infallible"),
            b: map2(&self.weights, ok).expect("infallible"),
            rational: self.exact.as_ref().map(|e| {
                let ok = |x: &Rational| -> Result<String, TableauError> { Ok(ratio(x)) };
                RationalDocument {
                    c: e.nodes.iter().map(ratio).collect(),
                    coeffs: map3(&e.coeffs, ok).expect("infallible"),
                    b: map2(&e.weights, ok).expect("infallible"),
                }
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tableau document serialises")
    }

    /// Rebuilds a tableau from its document. The exact block, when present,
    /// takes precedence over the decimal strings.
    pub fn from_document(doc: &TableauDocument) -> Result<Self, TableauError> {
        let tableau = if let Some(r) = &doc.rational {
            let exact = RationalTableau {
                name: doc.name.clone(),
                nodes: r.c.iter().map(|s| parse_ratio(s)).collect::<Result<_, _>>()?,
                coeffs: map3(&r.coeffs, |s| parse_ratio(s))?,
                weights: map2(&r.b, |s| parse_ratio(s))?,
                order: doc.q,
            };
            let t = Self::from_rational(exact);
            // Validate shapes through the float path as well.
            Self::from_parts(&doc.name, t.coeffs.clone(), t.weights.clone(), doc.q)?;
            t
        } else {
            Self::from_parts(
                &doc.name,
                map3(&doc.coeffs, |s| parse_decimal(s))?,
                map2(&doc.b, |s| parse_decimal(s))?,
                doc.q,
            )?
        };
        if tableau.stages() != doc.s || tableau.derivatives() != doc.m {
            return Err(TableauError::Malformed(format!(
                "declared s={}, m={} but coefficients give s={}, m={}",
                doc.s,
                doc.m,
                tableau.stages(),
                tableau.derivatives()
            )));
        }
        Ok(tableau)
    }

    pub fn from_json(text: &str) -> Result<Self, TableauError> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}
