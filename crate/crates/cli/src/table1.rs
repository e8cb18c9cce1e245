//! The reference instance, bundled from `fixtures/table1`.

use bwkit_core::{BarycenterProblem, BwBall, PdMatrix, SymmetricMatrix};

use crate::error::CliError;
use crate::io::{BallsFile, BarycenterFile, MatrixFile};

macro_rules! fixture {
    ($name:literal) => {
        include_str!(concat!("../../../fixtures/table1/", $name, ".json"))
    };
}

/// Barycenter inputs and the two reference answers.
#[derive(Debug, Clone)]
pub struct BarycenterCase {
    pub weights: Vec<f64>,
    pub matrices: Vec<PdMatrix>,
    pub x_opt: SymmetricMatrix,
    pub x_fp: SymmetricMatrix,
}

impl BarycenterCase {
    pub fn problem(&self) -> Result<BarycenterProblem, CliError> {
        Ok(BarycenterProblem::new(self.weights.clone(), self.matrices.clone())?)
    }
}

#[derive(Debug, Clone)]
pub struct SetCase {
    pub dimension: usize,
    pub trace_a: f64,
    pub trace_b: f64,
    /// Reference witness in the trace-1 set.
    pub witness_a: SymmetricMatrix,
    /// Reference witness in the trace-2 set.
    pub witness_b: SymmetricMatrix,
}

#[derive(Debug, Clone)]
pub struct BallCase {
    pub ball: BwBall,
    pub x: SymmetricMatrix,
}

#[derive(Debug, Clone)]
pub struct Table1 {
    pub barycenter: BarycenterCase,
    pub sets: SetCase,
    pub ball: BallCase,
}

fn parse(text: &str) -> Result<SymmetricMatrix, CliError> {
    serde_json::from_str::<MatrixFile>(text)
        .map_err(|e| CliError::Input(e.to_string()))?
        .to_symmetric()
}

/// Builds the instance from the text of each fixture file.
pub fn from_texts(get: impl Fn(&str) -> Result<String, CliError>) -> Result<Table1, CliError> {
    let m = |name: &str| parse(&get(name)?);
    let problem: BarycenterFile =
        serde_json::from_str(&get("barycenter")?).map_err(|e| CliError::Input(e.to_string()))?;
    let balls: BallsFile = serde_json::from_str(&get("balls")?).map_err(|e| CliError::Input(e.to_string()))?;
    let radius_squared = balls
        .balls
        .first()
        .ok_or_else(|| CliError::Input("balls fixture is empty".into()))?
        .radius_squared;
    let matrices = (1..=5)
        .map(|i| Ok(PdMatrix::new(m(&format!("A{i}"))?)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Table1 {
        barycenter: BarycenterCase {
            weights: problem.weights,
            matrices,
            x_opt: m("X_opt")?,
            x_fp: m("X_fp")?,
        },
        sets: SetCase {
            dimension: 5,
            trace_a: 1.0,
            trace_b: 2.0,
            witness_a: m("trace1_witness")?,
            witness_b: m("trace2_witness")?,
        },
        ball: BallCase {
            ball: BwBall::new(PdMatrix::new(m("ball_center")?)?, radius_squared)?,
            x: m("ball_solution")?,
        },
    })
}

/// The copy compiled into the binary.
pub fn bundled() -> Table1 {
    from_texts(|name| {
        Ok(match name {
            "A1" => fixture!("A1"),
            "A2" => fixture!("A2"),
            "A3" => fixture!("A3"),
            "A4" => fixture!("A4"),
            "A5" => fixture!("A5"),
            "X_opt" => fixture!("X_opt"),
            "X_fp" => fixture!("X_fp"),
            "trace1_witness" => fixture!("trace1_witness"),
            "trace2_witness" => fixture!("trace2_witness"),
            "ball_center" => fixture!("ball_center"),
            "ball_solution" => fixture!("ball_solution"),
            "barycenter" => fixture!("barycenter"),
            "balls" => fixture!("balls"),
            other => return Err(CliError::Input(format!("no bundled fixture {other}"))),
        }
        .to_owned())
    })
    .expect("bundled fixtures are valid")
}
