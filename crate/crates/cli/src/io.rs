//! JSON file formats: matrices, set specs, barycenter problems and balls.
//!
//! Anywhere a matrix is expected a file may give either a path (relative to
//! the file that mentions it) or an inline matrix object.

use std::fs;
use std::path::{Path, PathBuf};

use bwkit_core::sets::{FrobeniusBall, LinearConstraint};
use bwkit_core::{symmetrize, BarycenterProblem, BwBall, ConvexSetSpec, PdMatrix, SymmetricMatrix};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_symmetric(m: &SymmetricMatrix, name: Option<&str>) -> Self {
        Self {
            name: name.map(str::to_owned),
            rows: m.dim(),
            cols: m.dim(),
            entries: m.to_rows(),
        }
    }

    pub fn to_symmetric(&self) -> Result<SymmetricMatrix, CliError> {
        if self.rows != self.cols {
            return Err(CliError::Input(format!(
                "matrix is {}x{}, expected square",
                self.rows, self.cols
            )));
        }
        if self.entries.len() != self.rows || self.entries.iter().any(|r| r.len() != self.cols) {
            return Err(CliError::Input(format!(
                "entries do not match the declared {}x{} shape",
                self.rows, self.cols
            )));
        }
        let flat: Vec<f64> = self.entries.concat();
        Ok(symmetrize(&DMatrix::from_row_slice(self.rows, self.cols, &flat))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRef {
    Path(String),
    Inline(MatrixFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraintFile {
    pub coef: MatrixRef,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusBallFile {
    pub center: MatrixRef,
    pub radius: f64,
}

/// Mirrors [`ConvexSetSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpecFile {
    pub dimension: usize,
    #[serde(default)]
    pub trace_eq: Option<f64>,
    #[serde(default)]
    pub linear_eqs: Vec<LinearConstraintFile>,
    #[serde(default)]
    pub linear_ineqs: Vec<LinearConstraintFile>,
    #[serde(default)]
    pub frobenius_ball: Option<FrobeniusBallFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarycenterFile {
    pub weights: Vec<f64>,
    pub matrices: Vec<MatrixRef>,
    #[serde(default)]
    pub constraints: Option<SetSpecFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFile {
    pub center: MatrixRef,
    pub radius_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallsFile {
    pub balls: Vec<BallFile>,
}

/// A file that was read, with its SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Reads input files and remembers what was read.
#[derive(Debug, Default)]
pub struct Loader {
    pub inputs: Vec<InputRecord>,
}

impl Loader {
    fn read(&mut self, role: &str, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputRecord {
            role: role.to_owned(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))
    }

    fn parse<T: for<'de> Deserialize<'de>>(&mut self, role: &str, path: &Path) -> Result<T, CliError> {
        let text = self.read(role, path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn matrix(&mut self, role: &str, path: &Path) -> Result<SymmetricMatrix, CliError> {
        self.parse::<MatrixFile>(role, path)?.to_symmetric()
    }

    pub fn pd_matrix(&mut self, role: &str, path: &Path) -> Result<PdMatrix, CliError> {
        Ok(PdMatrix::new(self.matrix(role, path)?)?)
    }

    fn matrix_ref(&mut self, role: &str, r: &MatrixRef, base: &Path) -> Result<SymmetricMatrix, CliError> {
        match r {
            MatrixRef::Path(p) => self.matrix(role, &resolve(base, p)),
            MatrixRef::Inline(m) => m.to_symmetric(),
        }
    }

    pub fn set_spec(&mut self, role: &str, path: &Path) -> Result<ConvexSetSpec, CliError> {
        let file: SetSpecFile = self.parse(role, path)?;
        self.set_spec_from(role, &file, parent(path))
    }

    fn set_spec_from(&mut self, role: &str, f: &SetSpecFile, base: &Path) -> Result<ConvexSetSpec, CliError> {
        let mut constraints = |list: &[LinearConstraintFile]| -> Result<Vec<LinearConstraint>, CliError> {
            list.iter()
                .map(|c| {
                    Ok(LinearConstraint {
                        coef: self.matrix_ref(role, &c.coef, base)?,
                        rhs: c.rhs,
                    })
                })
                .collect()
        };
        let linear_eqs = constraints(&f.linear_eqs)?;
        let linear_ineqs = constraints(&f.linear_ineqs)?;
        let frobenius_ball = match &f.frobenius_ball {
            Some(b) => Some(FrobeniusBall {
                center: self.matrix_ref(role, &b.center, base)?,
                radius: b.radius,
            }),
            None => None,
        };
        let spec = ConvexSetSpec {
            dimension: f.dimension,
            trace_eq: f.trace_eq,
            linear_eqs,
            linear_ineqs,
            frobenius_ball,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn barycenter(&mut self, path: &Path) -> Result<BarycenterProblem, CliError> {
        let file: BarycenterFile = self.parse("problem", path)?;
        let base = parent(path);
        let mut mats = Vec::with_capacity(file.matrices.len());
        for (i, r) in file.matrices.iter().enumerate() {
            mats.push(PdMatrix::new(self.matrix_ref(
                &format!("matrix {}", i + 1),
                r,
                base,
            )?)?);
        }
        let mut p = BarycenterProblem::new(file.weights, mats)?;
        if let Some(c) = &file.constraints {
            p = p.with_constraints(self.set_spec_from("constraints", c, base)?)?;
        }
        Ok(p)
    }

    pub fn balls(&mut self, path: &Path) -> Result<Vec<BwBall>, CliError> {
        let file: BallsFile = self.parse("balls", path)?;
        let base = parent(path);
        if file.balls.is_empty() {
            return Err(CliError::Input("balls file lists no balls".into()));
        }
        file.balls
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let center = PdMatrix::new(self.matrix_ref(&format!("ball {} center", i + 1), &b.center, base)?)?;
                Ok(BwBall::new(center, b.radius_squared)?)
            })
            .collect()
    }
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new(""))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = parent(path);
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
