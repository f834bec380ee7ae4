//! JSON field files.
//!
//! One document per field:
//!
//! ```text
//! {"kind": "magnetization" | "unitary" | "scalar_map",
//!  "n_level": 2 | N | null,
//!  "dims": [nx] | [nx, ny],
//!  "spacing": [hx] | [hx, hy],
//!  "boundary": "clamped" | "periodic",
//!  "meta": {...},            (optional; generator configuration)
//!  "data": [...]}
//! ```
//!
//! `data` is flat and row-major over sites. Magnetization stores `mx, my, mz`
//! per site; scalar maps one number per site; unitary fields the `N × N`
//! matrix of each site row-major, every entry as an `[re, im]` pair. Numbers
//! are written with 17 significant digits so that reloading is bit-exact.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;

use super::{
    validate_unit_field, Boundary, GridSpec, ScalarMap, SiteField, UnitaryField, VectorField3,
};
use crate::error::{Error, Result};
use crate::liealg::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Magnetization,
    Unitary,
    ScalarMap,
}

impl FieldKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldKind::Magnetization => "magnetization",
            FieldKind::Unitary => "unitary",
            FieldKind::ScalarMap => "scalar_map",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
#[serde(untagged)]
enum DataEntry {
    Real(f64),
    Complex([f64; 2]),
}

/// The on-disk document.
#[derive(Debug, Clone, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub kind: FieldKind,
    pub n_level: Option<usize>,
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    pub boundary: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
    data: Vec<DataEntry>,
}

/// A validated, typed field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Magnetization(VectorField3),
    Unitary(UnitaryField),
    ScalarMap(ScalarMap),
}

impl FieldData {
    pub fn kind(&self) -> FieldKind {
        match self {
            FieldData::Magnetization(_) => FieldKind::Magnetization,
            FieldData::Unitary(_) => FieldKind::Unitary,
            FieldData::ScalarMap(_) => FieldKind::ScalarMap,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        match self {
            FieldData::Magnetization(m) => m.spec(),
            FieldData::Unitary(u) => u.spec(),
            FieldData::ScalarMap(s) => s.spec(),
        }
    }

    fn mismatch(&self, expected: FieldKind) -> Error {
        Error::KindMismatch {
            expected: expected.as_str().into(),
            found: self.kind().as_str().into(),
        }
    }

    pub fn into_magnetization(self) -> Result<VectorField3> {
        match self {
            FieldData::Magnetization(m) => Ok(m),
            other => Err(other.mismatch(FieldKind::Magnetization)),
        }
    }

    pub fn into_unitary(self) -> Result<UnitaryField> {
        match self {
            FieldData::Unitary(u) => Ok(u),
            other => Err(other.mismatch(FieldKind::Unitary)),
        }
    }

    pub fn into_scalar_map(self) -> Result<ScalarMap> {
        match self {
            FieldData::ScalarMap(s) => Ok(s),
            other => Err(other.mismatch(FieldKind::ScalarMap)),
        }
    }
}

impl FieldFile {
    pub fn from_field(field: &FieldData, meta: Option<Value>) -> Self {
        let spec = field.spec();
        let (n_level, data) = match field {
            FieldData::Magnetization(m) => (
                Some(2),
                m.data()
                    .iter()
                    .flat_map(|v| [v.x, v.y, v.z])
                    .map(DataEntry::Real)
                    .collect(),
            ),
            FieldData::ScalarMap(s) => (
                None,
                s.data().iter().copied().map(DataEntry::Real).collect(),
            ),
            FieldData::Unitary(u) => {
                let n = u.n_level();
                let mut data = Vec::with_capacity(spec.len() * n * n);
                for m in u.field().data() {
                    for r in 0..n {
                        for c in 0..n {
                            let z = m[(r, c)];
                            data.push(DataEntry::Complex([z.re, z.im]));
                        }
                    }
                }
                (Some(n), data)
            }
        };
        FieldFile {
            kind: field.kind(),
            n_level,
            dims: spec.extents().to_vec(),
            spacing: spec.spacing().to_vec(),
            boundary: spec.boundary(),
            meta,
            data,
        }
    }

    /// Validates the document and builds the typed field.
    pub fn into_field(self) -> Result<FieldData> {
        let spec = GridSpec::new(&self.dims, &self.spacing, self.boundary)?;
        let sites = spec.len();
        let reals = |data: &[DataEntry]| -> Result<Vec<f64>> {
            data.iter()
                .enumerate()
                .map(|(i, e)| match e {
                    DataEntry::Real(v) => Ok(*v),
                    DataEntry::Complex(_) => Err(Error::Schema(format!(
                        "data entry {i} is a complex pair in a real-valued field"
                    ))),
                })
                .collect()
        };
        let expect_len = |want: usize, got: usize| -> Result<()> {
            if want != got {
                return Err(Error::Schema(format!(
                    "expected {want} data entries for dims {:?}, found {got}",
                    self.dims
                )));
            }
            Ok(())
        };
        match self.kind {
            FieldKind::Magnetization => {
                if let Some(n) = self.n_level.filter(|&n| n != 2) {
                    return Err(Error::Schema(format!(
                        "magnetization requires n_level 2, found {n}"
                    )));
                }
                expect_len(3 * sites, self.data.len())?;
                let vals = reals(&self.data)?;
                let m = SiteField::from_vec(
                    spec,
                    vals.chunks_exact(3)
                        .map(|c| Vector3::new(c[0], c[1], c[2]))
                        .collect(),
                )?;
                validate_unit_field(&m)?;
                Ok(FieldData::Magnetization(m))
            }
            FieldKind::ScalarMap => {
                expect_len(sites, self.data.len())?;
                Ok(FieldData::ScalarMap(SiteField::from_vec(
                    spec,
                    reals(&self.data)?,
                )?))
            }
            FieldKind::Unitary => {
                let n = self
                    .n_level
                    .ok_or_else(|| Error::Schema("unitary field requires n_level".into()))?;
                if !(2..=crate::liealg::MAX_LEVEL).contains(&n) {
                    return Err(Error::Schema(format!("n_level {n} out of range")));
                }
                expect_len(sites * n * n, self.data.len())?;
                let mut mats = Vec::with_capacity(sites);
                for (s, chunk) in self.data.chunks_exact(n * n).enumerate() {
                    let mut entries = Vec::with_capacity(n * n);
                    for e in chunk {
                        match e {
                            DataEntry::Complex([re, im]) => entries.push(Complex64::new(*re, *im)),
                            DataEntry::Real(_) => {
                                return Err(Error::Schema(format!(
                                    "site {} has a real entry; unitary data must be [re, im] pairs",
                                    spec.site(s)
                                )))
                            }
                        }
                    }
                    mats.push(CMatrix::from_row_slice(n, n, &entries));
                }
                let field = SiteField::from_vec(spec, mats)?;
                Ok(FieldData::Unitary(UnitaryField::new(n, field)?))
            }
        }
    }
}

/// Writes every `f64` with 17 significant digits; non-finite values as `null`.
pub struct Sig17<F>(pub F);

impl<F: Formatter> Formatter for Sig17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes compactly with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(CompactFormatter));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Pretty-printed report form, newline-terminated.
pub fn write_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn save_field(field: &FieldData, meta: Option<Value>, path: impl AsRef<Path>) -> Result<()> {
    let mut text = to_json_string(&FieldFile::from_field(field, meta))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_field_str(text: &str) -> Result<FieldData> {
    let file: FieldFile = serde_json::from_str(text)
        .map_err(|e| Error::Schema(format!("invalid field document: {e}")))?;
    file.into_field()
}

pub fn load_field(path: impl AsRef<Path>) -> Result<FieldData> {
    let text = fs::read_to_string(path)?;
    load_field_str(&text)
}
