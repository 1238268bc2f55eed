//! JSON interchange for states and operators.
//!
//! ```text
//! {"dims":[2,2],"kind":"pure"|"density"|"hermitian","data":[[re,im],...]}
//! ```
//!
//! Matrices are flattened row-major. Numbers are written with 17 significant
//! digits so that files round-trip bit-exactly.

use std::fmt::Write as _;

use serde::Deserialize;

use super::{CMatrix, CVector, DensityOperator, HermitianOperator, PureState, SystemShape, C64};
use crate::error::{Result, SqeError};

/// Contents of a state/operator file.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorFile {
    Pure(PureState),
    Density(DensityOperator),
    Hermitian(HermitianOperator),
}

impl TensorFile {
    pub fn kind(&self) -> &'static str {
        match self {
            TensorFile::Pure(_) => "pure",
            TensorFile::Density(_) => "density",
            TensorFile::Hermitian(_) => "hermitian",
        }
    }

    pub fn shape(&self) -> &SystemShape {
        match self {
            TensorFile::Pure(s) => s.shape(),
            TensorFile::Density(r) => r.shape(),
            TensorFile::Hermitian(h) => h.shape(),
        }
    }

    /// Interprets the file as a test operator. Pure states become projectors.
    pub fn into_operator(self) -> HermitianOperator {
        match self {
            TensorFile::Pure(s) => s.projector(),
            TensorFile::Density(r) => r.into(),
            TensorFile::Hermitian(h) => h,
        }
    }

    /// Interprets the file as a mixed state.
    pub fn into_density(self) -> Result<DensityOperator> {
        match self {
            TensorFile::Pure(s) => s.to_density(),
            TensorFile::Density(r) => Ok(r),
            TensorFile::Hermitian(h) => h.to_density(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    dims: Vec<usize>,
    kind: String,
    data: Vec<[f64; 2]>,
}

fn fmt_f64(out: &mut String, x: f64) {
    if x == 0.0 {
        // normalizes -0.0 as well
        out.push('0');
    } else {
        write!(out, "{x:.16e}").unwrap();
    }
}

fn write_entries<'a>(out: &mut String, entries: impl Iterator<Item = &'a C64>) {
    out.push('[');
    for (k, z) in entries.enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push('[');
        fmt_f64(out, z.re);
        out.push(',');
        fmt_f64(out, z.im);
        out.push(']');
    }
    out.push(']');
}

fn row_major(m: &CMatrix) -> impl Iterator<Item = &C64> {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| &m[(i, j)]))
}

/// Serializes to the interchange format.
pub fn write_json(file: &TensorFile) -> String {
    let mut out = String::new();
    let dims: Vec<String> = file.shape().dims().iter().map(|d| d.to_string()).collect();
    write!(out, "{{\"dims\":[{}],\"kind\":\"{}\",\"data\":", dims.join(","), file.kind()).unwrap();
    match file {
        TensorFile::Pure(s) => write_entries(&mut out, s.amplitudes().iter()),
        TensorFile::Density(r) => write_entries(&mut out, row_major(r.matrix())),
        TensorFile::Hermitian(h) => write_entries(&mut out, row_major(h.matrix())),
    }
    out.push('}');
    out
}

/// Parses and validates the interchange format.
pub fn read_json(text: &str) -> Result<TensorFile> {
    let raw: RawFile = serde_json::from_str(text)?;
    let shape = SystemShape::new(raw.dims)?;
    let d = shape.total_dim();
    let values: Vec<C64> = raw.data.iter().map(|[re, im]| C64::new(*re, *im)).collect();
    match raw.kind.as_str() {
        "pure" => {
            if values.len() != d {
                return Err(SqeError::InvalidShape(format!("{} amplitudes for dim {d}", values.len())));
            }
            Ok(TensorFile::Pure(PureState::new(shape, CVector::from_vec(values))?))
        }
        "density" | "hermitian" => {
            if values.len() != d * d {
                return Err(SqeError::InvalidShape(format!("{} entries for {d}x{d}", values.len())));
            }
            let m = CMatrix::from_row_slice(d, d, &values);
            if raw.kind == "density" {
                Ok(TensorFile::Density(DensityOperator::new(shape, m)?))
            } else {
                Ok(TensorFile::Hermitian(HermitianOperator::new(shape, m)?))
            }
        }
        other => Err(SqeError::Parse(format!("unknown kind {other:?}"))),
    }
}
