//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bwkit_cli::checks::{
    ball_soundness_checks, lemma_checks, metric_checks, sdp_equivalence_checks, table1_ball_checks,
    table1_barycenter_checks, table1_set_checks,
};
use bwkit_cli::table1::{self, Table1};
use bwkit_cli::{Check, CliError};
use bwkit_core::SolverSettings;

const SEED: u64 = 20240611;

struct Criterion {
    id: u32,
    title: &'static str,
    time_limit: Option<f64>,
    run: fn(&SolverSettings) -> Result<Vec<Check>, CliError>,
}

fn fixtures() -> Result<Table1, CliError> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/table1");
    table1::from_texts(|name| {
        let path = dir.join(format!("{name}.json"));
        std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    })
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            title: "SDP distance matches the closed form on 50 random pairs",
            time_limit: Some(60.0),
            run: |s| sdp_equivalence_checks(50, SEED, s),
        },
        Criterion {
            id: 2,
            title: "orthogonal relaxation attains the nuclear norm on 20 instances",
            time_limit: None,
            run: |s| lemma_checks(20, SEED, s),
        },
        Criterion {
            id: 3,
            title: "five-matrix barycenter reproduces the reference solutions",
            time_limit: Some(120.0),
            run: |s| table1_barycenter_checks(&fixtures()?, s),
        },
        Criterion {
            id: 4,
            title: "distance between trace-1 and trace-2 sets",
            time_limit: None,
            run: |s| table1_set_checks(&fixtures()?, s),
        },
        Criterion {
            id: 5,
            title: "minimum Frobenius norm inside a BW ball",
            time_limit: None,
            run: |s| table1_ball_checks(&fixtures()?, s),
        },
        Criterion {
            id: 6,
            title: "metric axioms on 200 random instances",
            time_limit: Some(30.0),
            run: |_| metric_checks(200, SEED),
        },
        Criterion {
            id: 7,
            title: "lifted ball constraint implies the BW ball on 20 solves",
            time_limit: None,
            run: |s| ball_soundness_checks(20, SEED, s),
        },
    ]
}

fn main() -> ExitCode {
    let settings = SolverSettings::default();
    let mut failures = 0;
    for c in criteria() {
        let start = Instant::now();
        let outcome = (c.run)(&settings);
        let seconds = start.elapsed().as_secs_f64();
        let (passed, detail) = match outcome {
            Ok(checks) => {
                let mut passed = checks.iter().all(|k| k.passed);
                let mut parts: Vec<String> = checks
                    .iter()
                    .map(|k| format!("{} {:.2e} <= {:.0e}", k.name, k.value, k.tolerance))
                    .collect();
                if let Some(limit) = c.time_limit {
                    passed &= seconds <= limit;
                    parts.push(format!("runtime {seconds:.1}s <= {limit}s"));
                }
                (passed, parts.join("; "))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {} [{detail}] ({seconds:.2}s)", c.id, c.title);
    }
    println!("{} of 7 criteria passed", 7 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
