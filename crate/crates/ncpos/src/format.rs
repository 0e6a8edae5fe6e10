//! JSON file formats. Matrices are `re`/`im` grids of rows; `im` may be omitted.

use std::fmt;

use nalgebra::DVector;
use ncpos_core::certify::{Certificate, MomentWitness, Verification};
use ncpos_core::fejer::{FactorizationResult, GroupWitness};
use ncpos_core::groupfree::{GroupPoly, GroupWord, Signature};
use ncpos_core::linalg::CMat;
use ncpos_core::pencil::LinearPencil;
use ncpos_core::{NcPoly, Word};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Version written into every output document.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("field `{field}`: {msg}")]
    Field { field: String, msg: String },
    #[error(transparent)]
    Core(#[from] ncpos_core::Error),
}

fn field_err(field: impl fmt::Display, msg: impl Into<String>) -> FormatError {
    FormatError::Field { field: field.to_string(), msg: msg.into() }
}

pub type Result<T> = std::result::Result<T, FormatError>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let grid = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect()).collect()
        };
        let im = m.iter().any(|z| z.im != 0.0).then(|| grid(|z| z.im));
        MatrixJson { re: grid(|z| z.re), im }
    }

    /// Reads the matrix, checking it is `rows × cols`.
    pub fn to_matrix(&self, field: &str, rows: usize, cols: usize) -> Result<CMat> {
        let check = |grid: &Vec<Vec<f64>>, part: &str| -> Result<()> {
            if grid.len() != rows || grid.iter().any(|r| r.len() != cols) {
                return Err(field_err(
                    format!("{field}.{part}"),
                    format!("expected a {rows}x{cols} grid"),
                ));
            }
            Ok(())
        };
        check(&self.re, "re")?;
        if let Some(im) = &self.im {
            check(im, "im")?;
        }
        Ok(CMat::from_fn(rows, cols, |r, c| {
            Complex64::new(self.re[r][c], self.im.as_ref().map_or(0.0, |im| im[r][c]))
        }))
    }

    fn square(&self, field: &str) -> Result<CMat> {
        let n = self.re.len();
        self.to_matrix(field, n, n)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VectorJson {
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl VectorJson {
    pub fn from_vector(v: &DVector<Complex64>) -> Self {
        let im = v.iter().any(|z| z.im != 0.0).then(|| v.iter().map(|z| z.im).collect());
        VectorJson { re: v.iter().map(|z| z.re).collect(), im }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermJson {
    pub word: Vec<u32>,
    #[serde(flatten)]
    pub coeff: MatrixJson,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PolyJson {
    pub g: usize,
    pub coeff_dim: usize,
    /// Coefficient rows when they differ from `coeff_dim` (factors of a certificate).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    pub terms: Vec<TermJson>,
}

impl PolyJson {
    pub fn from_poly(p: &NcPoly) -> Self {
        PolyJson {
            g: p.g(),
            coeff_dim: p.cols(),
            rows: (p.rows() != p.cols()).then_some(p.rows()),
            terms: p
                .terms()
                .map(|(w, m)| TermJson { word: w.letters().to_vec(), coeff: MatrixJson::from_matrix(m) })
                .collect(),
        }
    }

    pub fn to_poly(&self) -> Result<NcPoly> {
        let rows = self.rows.unwrap_or(self.coeff_dim);
        let mut terms = Vec::with_capacity(self.terms.len());
        for (k, t) in self.terms.iter().enumerate() {
            if let Some(bad) = t.word.iter().find(|&&j| j == 0 || j as usize > self.g) {
                return Err(field_err(format!("terms[{k}].word"), format!("letter {bad} outside 1..={}", self.g)));
            }
            terms.push((Word::new(t.word.clone()), t.coeff.to_matrix(&format!("terms[{k}]"), rows, self.coeff_dim)?));
        }
        Ok(NcPoly::from_terms(self.g, rows, self.coeff_dim, terms)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PencilJson {
    pub g: usize,
    pub mu: usize,
    pub coeffs: Vec<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<[usize; 2]>>,
}

impl PencilJson {
    pub fn from_pencil(l: &LinearPencil) -> Self {
        PencilJson {
            g: l.g(),
            mu: l.mu(),
            coeffs: l.coeffs().iter().map(MatrixJson::from_matrix).collect(),
            blocks: Some(l.blocks().iter().map(|&(o, s)| [o, s]).collect()),
        }
    }

    pub fn to_pencil(&self) -> Result<LinearPencil> {
        if self.coeffs.len() != self.g + 1 {
            return Err(field_err("coeffs", format!("expected g + 1 = {} matrices, got {}", self.g + 1, self.coeffs.len())));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, m)| m.to_matrix(&format!("coeffs[{j}]"), self.mu, self.mu))
            .collect::<Result<Vec<_>>>()?;
        let blocks = self.blocks.as_ref().map(|b| b.iter().map(|&[o, s]| (o, s)).collect());
        Ok(LinearPencil::new(coeffs, blocks)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GroupTermJson {
    /// Syllables `[factor, exponent]`, factors 1-based.
    pub word: Vec<[i64; 2]>,
    #[serde(flatten)]
    pub coeff: MatrixJson,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GroupPolyJson {
    pub factors: Vec<usize>,
    pub coeff_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    pub terms: Vec<GroupTermJson>,
}

impl GroupPolyJson {
    pub fn from_poly(p: &GroupPoly) -> Self {
        GroupPolyJson {
            factors: p.signature().orders().to_vec(),
            coeff_dim: p.cols(),
            rows: (p.rows() != p.cols()).then_some(p.rows()),
            terms: p
                .terms()
                .map(|(w, m)| GroupTermJson {
                    word: w.syllables().iter().map(|&(i, r)| [i as i64 + 1, r as i64]).collect(),
                    coeff: MatrixJson::from_matrix(m),
                })
                .collect(),
        }
    }

    pub fn to_poly(&self) -> Result<GroupPoly> {
        let sig = Signature::new(self.factors.clone()).map_err(|e| field_err("factors", e.to_string()))?;
        let rows = self.rows.unwrap_or(self.coeff_dim);
        let mut p = GroupPoly::zero_rect(&sig, rows, self.coeff_dim);
        for (k, t) in self.terms.iter().enumerate() {
            let mut syllables = Vec::with_capacity(t.word.len());
            for &[i, r] in &t.word {
                if i < 1 || i as usize > sig.factors() {
                    return Err(field_err(format!("terms[{k}].word"), format!("factor {i} outside 1..={}", sig.factors())));
                }
                syllables.push((i as usize - 1, r));
            }
            let w = GroupWord::from_syllables(&sig, &syllables)?;
            p.add_term(w, t.coeff.to_matrix(&format!("terms[{k}]"), rows, self.coeff_dim)?);
        }
        Ok(p)
    }
}

/// A polynomial input: free (`"g"`) or group (`"factors"`).
#[derive(Clone, Debug)]
pub enum AnyPoly {
    Free(NcPoly),
    Group(GroupPoly),
}

pub fn parse_any_poly(text: &str) -> Result<AnyPoly> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("factors").is_some() {
        Ok(AnyPoly::Group(serde_json::from_str::<GroupPolyJson>(text)?.to_poly()?))
    } else {
        Ok(AnyPoly::Free(serde_json::from_str::<PolyJson>(text)?.to_poly()?))
    }
}

pub fn parse_pencil(text: &str) -> Result<LinearPencil> {
    serde_json::from_str::<PencilJson>(text)?.to_pencil()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalizingJson {
    pub block: usize,
    pub offset: usize,
    pub size: usize,
    pub factors: Vec<PolyJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateJson {
    pub format: u32,
    pub status: String,
    pub g: usize,
    pub nu: usize,
    pub degree: usize,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_eval_margin: Option<f64>,
    pub sos: Vec<PolyJson>,
    pub localizing: Vec<LocalizingJson>,
}

impl CertificateJson {
    pub fn new(cert: &Certificate, l: &LinearPencil, degree: usize, check: Option<&Verification>) -> Self {
        CertificateJson {
            format: FORMAT_VERSION,
            status: "certified".into(),
            g: cert.g,
            nu: cert.nu,
            degree,
            residual: check.map_or(cert.residual, |v| v.coeff_residual),
            min_eval_margin: check.map(|v| v.min_eval_margin),
            sos: cert.sos.iter().map(PolyJson::from_poly).collect(),
            localizing: cert
                .localizing
                .iter()
                .zip(l.blocks())
                .enumerate()
                .map(|(k, (qs, &(offset, size)))| LocalizingJson {
                    block: k,
                    offset,
                    size,
                    factors: qs.iter().map(PolyJson::from_poly).collect(),
                })
                .collect(),
        }
    }

    pub fn to_certificate(&self) -> Result<Certificate> {
        Ok(Certificate {
            g: self.g,
            nu: self.nu,
            sos: self.sos.iter().map(PolyJson::to_poly).collect::<Result<_>>()?,
            localizing: self
                .localizing
                .iter()
                .map(|b| b.factors.iter().map(PolyJson::to_poly).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?,
            residual: self.residual,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessJson {
    pub format: u32,
    pub status: String,
    pub value: f64,
    pub lambda_min_pencil: f64,
    pub y: Vec<MatrixJson>,
    pub gamma: VectorJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmented: Option<usize>,
}

impl WitnessJson {
    pub fn new(w: &MomentWitness) -> Self {
        WitnessJson {
            format: FORMAT_VERSION,
            status: "not_positive".into(),
            value: w.value,
            lambda_min_pencil: w.lambda_min_pencil,
            y: w.y.iter().map(MatrixJson::from_matrix).collect(),
            gamma: VectorJson::from_vector(&w.gamma),
            augmented: w.augmented,
        }
    }

    pub fn matrices(&self) -> Result<Vec<CMat>> {
        self.y.iter().enumerate().map(|(j, m)| m.square(&format!("y[{j}]"))).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationJson {
    pub format: u32,
    pub status: String,
    pub extent: usize,
    pub degree: usize,
    pub extent_bound: usize,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_bound: Option<usize>,
    pub compressed: bool,
    pub coeff_residual: f64,
    pub sample_margin: f64,
    pub summands: Vec<GroupPolyJson>,
}

impl FactorizationJson {
    pub fn new(r: &FactorizationResult) -> Self {
        FactorizationJson {
            format: FORMAT_VERSION,
            status: "positive".into(),
            extent: r.extent,
            degree: r.degree,
            extent_bound: r.extent_bound,
            count: r.count(),
            count_bound: r.count_bound,
            compressed: r.compressed,
            coeff_residual: r.coeff_residual,
            sample_margin: r.sample_margin,
            summands: r.summands.iter().map(GroupPolyJson::from_poly).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitaryWitnessJson {
    pub unitaries: Vec<MatrixJson>,
    pub vector: VectorJson,
    pub value: f64,
    pub lambda_min: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupWitnessJson {
    pub format: u32,
    pub status: String,
    pub value: f64,
    /// `povm[i][j-1] = E_{i,j}`.
    pub povm: Vec<Vec<MatrixJson>>,
    pub xi: VectorJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<UnitaryWitnessJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilation_note: Option<String>,
}

impl GroupWitnessJson {
    pub fn new(w: &GroupWitness) -> Self {
        GroupWitnessJson {
            format: FORMAT_VERSION,
            status: "not_positive".into(),
            value: w.value,
            povm: w.povm.iter().map(|f| f.iter().map(MatrixJson::from_matrix).collect()).collect(),
            xi: VectorJson::from_vector(&w.xi),
            unitary: w.unitary.as_ref().map(|u| UnitaryWitnessJson {
                unitaries: u.unitaries.iter().map(MatrixJson::from_matrix).collect(),
                vector: VectorJson::from_vector(&u.vector),
                value: u.value,
                lambda_min: u.lambda_min,
            }),
            dilation_note: w.dilation_note.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportJson {
    pub format: u32,
    pub status: String,
    pub message: String,
}

impl ReportJson {
    pub fn new(status: &str, message: impl Into<String>) -> Self {
        ReportJson { format: FORMAT_VERSION, status: status.into(), message: message.into() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ncpos_core::linalg::{self, c};

    #[test]
    fn poly_file_reads_and_writes() {
        let text = r#"{"g": 2, "coeff_dim": 1, "terms": [
            {"word": [], "re": [[2.0]]},
            {"word": [1, 2], "re": [[1.0]], "im": [[0.5]]},
            {"word": [2, 1], "re": [[1.0]], "im": [[-0.5]]}]}"#;
        let AnyPoly::Free(p) = parse_any_poly(text).unwrap() else { panic!("free polynomial expected") };
        assert_eq!(p.num_terms(), 3);
        assert_eq!(p.coefficient(&Word::new(vec![1, 2])).unwrap()[(0, 0)], c(1.0, 0.5));
        let back = PolyJson::from_poly(&p).to_poly().unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn group_file_reduces_words() {
        let text = r#"{"factors": [2, 3], "coeff_dim": 1, "terms": [
            {"word": [[1, 1], [2, 1], [2, 2]], "re": [[1.0]]}]}"#;
        let AnyPoly::Group(p) = parse_any_poly(text).unwrap() else { panic!("group polynomial expected") };
        assert_eq!(p.extent(), Some(1));
        assert_eq!(GroupPolyJson::from_poly(&p).terms[0].word, vec![[1, 1]]);
    }

    #[test]
    fn bad_inputs_name_the_field() {
        let err = parse_any_poly(r#"{"g": 1, "coeff_dim": 1, "terms": [{"word": [2], "re": [[1.0]]}]}"#).unwrap_err();
        assert!(err.to_string().contains("terms[0].word"), "{err}");
        let err = parse_any_poly(r#"{"g": 1, "coeff_dim": 2, "terms": [{"word": [], "re": [[1.0]]}]}"#).unwrap_err();
        assert!(err.to_string().contains("terms[0].re"), "{err}");
        let err = parse_pencil(r#"{"g": 1, "mu": 1, "coeffs": [{"re": [[1.0]]}]}"#).unwrap_err();
        assert!(err.to_string().contains("coeffs"), "{err}");
        let err = parse_any_poly("{\"g\": 1,\n \"coeff_dim\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn pencil_round_trip() {
        let l = LinearPencil::monic(vec![linalg::diag(&[1.0, -1.0])], Some(vec![(0, 1), (1, 1)])).unwrap();
        let back = PencilJson::from_pencil(&l).to_pencil().unwrap();
        assert_eq!(back.coeffs(), l.coeffs());
        assert_eq!(back.blocks(), l.blocks());
    }
}
