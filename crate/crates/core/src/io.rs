//! JSON encoding of parameter-dependent systems.
//!
//! ```json
//! {
//!   "timeDomain": "discrete",
//!   "dims": {"n": 2, "m": 1, "o": 1, "p": 2},
//!   "matrices": {"A": [{"monomial": [1, 0], "coeff": [[0.5, 0.0], [0.0, 0.0]]}], "B": [], "C": [], "D": []},
//!   "paramSet": {"constraints": [[{"monomial": [0, 0], "coeff": 1.0}]], "box": [[-1.0, 1.0], [-1.0, 1.0]]}
//! }
//! ```
//!
//! Terms are written in canonical monomial order and zero coefficients are
//! omitted, so parse/serialize/parse is the identity. Floats use the
//! shortest representation that reads back to the same `f64`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polymat::{Monomial, PolyMatrix, Polynomial};
use crate::psys::{ParamStateSpace, SemialgebraicSet, TimeDomain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ModelFile {
    pub time_domain: TimeDomain,
    pub dims: Dims,
    pub matrices: Matrices,
    pub param_set: ParamSetFile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub o: usize,
    pub p: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrices {
    #[serde(rename = "A")]
    pub a: Vec<MatrixTerm>,
    #[serde(rename = "B")]
    pub b: Vec<MatrixTerm>,
    #[serde(rename = "C")]
    pub c: Vec<MatrixTerm>,
    #[serde(rename = "D")]
    pub d: Vec<MatrixTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTerm {
    pub monomial: Vec<u32>,
    /// Row-major.
    pub coeff: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub monomial: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSetFile {
    /// Each constraint `q_l(alpha) >= 0` as a list of terms.
    pub constraints: Vec<Vec<PolyTerm>>,
    #[serde(rename = "box")]
    pub sampling_box: Vec<[f64; 2]>,
}

fn encode_matrix(m: &PolyMatrix) -> Vec<MatrixTerm> {
    m.terms()
        .iter()
        .filter(|(_, c)| c.iter().any(|x| *x != 0.0))
        .map(|(mono, c)| MatrixTerm {
            monomial: mono.exponents().to_vec(),
            coeff: (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect(),
        })
        .collect()
}

fn encode_poly(q: &Polynomial) -> Vec<PolyTerm> {
    q.terms()
        .iter()
        .filter(|(_, c)| **c != 0.0)
        .map(|(mono, &coeff)| PolyTerm { monomial: mono.exponents().to_vec(), coeff })
        .collect()
}

fn monomial(exps: &[u32], p: usize, what: &str) -> Result<Monomial> {
    if exps.len() != p {
        return Err(Error::Parse(format!("{what}: monomial {exps:?} has {} exponents, expected p = {p}", exps.len())));
    }
    Ok(Monomial::new(exps.to_vec()))
}

fn decode_matrix(terms: &[MatrixTerm], rows: usize, cols: usize, p: usize, name: &str) -> Result<PolyMatrix> {
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        let mono = monomial(&t.monomial, p, name)?;
        if t.coeff.len() != rows || t.coeff.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse(format!("{name}: coefficient of {:?} is not {rows} x {cols}", t.monomial)));
        }
        if t.coeff.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("{name}: non-finite coefficient")));
        }
        let flat: Vec<f64> = t.coeff.iter().flatten().copied().collect();
        out.push((mono, DMatrix::from_row_slice(rows, cols, &flat)));
    }
    PolyMatrix::from_terms(rows, cols, p, out)
}

impl ModelFile {
    pub fn from_system(g: &ParamStateSpace) -> Self {
        ModelFile {
            time_domain: g.time_domain,
            dims: Dims { n: g.n(), m: g.m(), o: g.o(), p: g.nvars() },
            matrices: Matrices {
                a: encode_matrix(&g.a),
                b: encode_matrix(&g.b),
                c: encode_matrix(&g.c),
                d: encode_matrix(&g.d),
            },
            param_set: ParamSetFile {
                constraints: g.param_set.constraints().iter().map(encode_poly).collect(),
                sampling_box: g.param_set.sampling_box().iter().map(|&(lo, hi)| [lo, hi]).collect(),
            },
        }
    }

    pub fn to_system(&self) -> Result<ParamStateSpace> {
        let Dims { n, m, o, p } = self.dims;
        let mut constraints = Vec::with_capacity(self.param_set.constraints.len());
        for (l, q) in self.param_set.constraints.iter().enumerate() {
            let mut terms = Vec::with_capacity(q.len());
            for t in q {
                terms.push((monomial(&t.monomial, p, &format!("constraint {l}"))?, t.coeff));
            }
            constraints.push(Polynomial::from_terms(p, terms));
        }
        let sampling_box = self.param_set.sampling_box.iter().map(|&[lo, hi]| (lo, hi)).collect();
        let set = SemialgebraicSet::new(p, constraints, sampling_box)?;
        let mx = &self.matrices;
        ParamStateSpace::new(
            self.time_domain,
            decode_matrix(&mx.a, n, n, p, "A")?,
            decode_matrix(&mx.b, n, m, p, "B")?,
            decode_matrix(&mx.c, o, n, p, "C")?,
            decode_matrix(&mx.d, o, m, p, "D")?,
            set,
        )
    }

    /// Parse errors carry the line and column of the offending token.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files serialize")
    }
}

pub fn parse_model(text: &str) -> Result<ParamStateSpace> {
    ModelFile::parse(text)?.to_system()
}

pub fn read_model(path: &Path) -> Result<ParamStateSpace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        e => e,
    })
}

pub fn model_json(g: &ParamStateSpace) -> String {
    ModelFile::from_system(g).to_json()
}
