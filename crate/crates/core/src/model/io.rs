//! Versioned JSON formats for instances and solutions.
//!
//! Instance:
//!
//! ```json
//! {
//!   "format": "localbranch-instance",
//!   "version": 1,
//!   "variables": [
//!     {"name": "y0", "kind": "binary"},
//!     {"name": "x", "kind": "continuous", "lb": 0, "ub": 4}
//!   ],
//!   "objective": "(- (* -1 x1) (* 2 x0))",
//!   "constraints": [
//!     {"name": "cap", "expr": "(* x1 x0)", "relation": "<=", "rhs": 2}
//!   ]
//! }
//! ```
//!
//! A missing or `null` bound is infinite; binaries default to `[0, 1]`.
//! Equality constraints are split into `name[<=]` and `name[>=]`.
//!
//! Solution files list variable values by name, in problem order, together
//! with the objective and the feasibility verdict.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize, Constraint, ModelError, Point, Problem, Solution, VarKind, Variable};
use crate::expr::{parse, ParseError};
use crate::lp::Relation;

pub const INSTANCE_FORMAT: &str = "localbranch-instance";
pub const SOLUTION_FORMAT: &str = "localbranch-solution";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected format `{expected}` version {FORMAT_VERSION}, found `{found}` version {version}")]
    Format {
        expected: &'static str,
        found: String,
        version: u32,
    },
    #[error("{location}: {source}")]
    Expr { location: String, source: ParseError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solution file has no value for variable `{0}`")]
    MissingValue(String),
    #[error("solution file names unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("non-finite value for variable `{0}`")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ub: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub expr: String,
    pub relation: Relation,
    #[serde(default)]
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub version: u32,
    pub variables: Vec<VariableSpec>,
    pub objective: String,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
}

impl InstanceFile {
    pub fn to_problem(&self) -> Result<Problem, IoError> {
        if self.format != INSTANCE_FORMAT || self.version != FORMAT_VERSION {
            return Err(IoError::Format {
                expected: INSTANCE_FORMAT,
                found: self.format.clone(),
                version: self.version,
            });
        }
        let variables = self
            .variables
            .iter()
            .map(|v| {
                let (dlb, dub) = match v.kind {
                    VarKind::Binary => (0.0, 1.0),
                    _ => (f64::NEG_INFINITY, f64::INFINITY),
                };
                Variable {
                    name: v.name.clone(),
                    lb: v.lb.unwrap_or(dlb),
                    ub: v.ub.unwrap_or(dub),
                    kind: v.kind,
                }
            })
            .collect();
        let objective = parse(&self.objective).map_err(|source| IoError::Expr {
            location: "objective".into(),
            source,
        })?;
        let mut constraints = Vec::new();
        for (j, c) in self.constraints.iter().enumerate() {
            let name = c.name.clone().unwrap_or_else(|| format!("c{j}"));
            let e = parse(&c.expr).map_err(|source| IoError::Expr {
                location: format!("constraint `{name}`"),
                source,
            })?;
            let parts = normalize(e, c.relation, c.rhs);
            if parts.len() == 1 {
                constraints.extend(parts.into_iter().map(|body| Constraint {
                    name: name.clone(),
                    body,
                }));
            } else {
                for (body, tag) in parts.into_iter().zip(["[<=]", "[>=]"]) {
                    constraints.push(Constraint {
                        name: format!("{name}{tag}"),
                        body,
                    });
                }
            }
        }
        Ok(Problem::new(variables, objective, constraints)?)
    }

    /// Serializes a problem; constraints are written in normalized `<= 0` form.
    pub fn from_problem(pr: &Problem) -> InstanceFile {
        let finite = |v: f64| v.is_finite().then_some(v);
        InstanceFile {
            format: INSTANCE_FORMAT.into(),
            version: FORMAT_VERSION,
            variables: pr
                .variables
                .iter()
                .map(|v| VariableSpec {
                    name: v.name.clone(),
                    kind: v.kind,
                    lb: finite(v.lb),
                    ub: finite(v.ub),
                })
                .collect(),
            objective: pr.objective().to_string(),
            constraints: pr
                .constraints()
                .iter()
                .map(|c| ConstraintSpec {
                    name: Some(c.name.clone()),
                    expr: c.body.to_string(),
                    relation: Relation::Le,
                    rhs: 0.0,
                })
                .collect(),
        }
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Problem, IoError> {
    let text = read(path.as_ref())?;
    parse_instance(&text)
}

pub fn parse_instance(text: &str) -> Result<Problem, IoError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.to_problem()
}

pub fn write_instance(path: impl AsRef<Path>, pr: &Problem) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(&InstanceFile::from_problem(pr))?;
    text.push('\n');
    write(path.as_ref(), &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_violation: Option<f64>,
    pub values: Vec<NamedValue>,
}

impl SolutionFile {
    pub fn from_solution(pr: &Problem, sol: &Solution, feasible: bool) -> SolutionFile {
        SolutionFile {
            format: SOLUTION_FORMAT.into(),
            version: FORMAT_VERSION,
            objective: Some(sol.objective),
            feasible: Some(feasible),
            max_violation: Some(sol.max_violation),
            values: pr
                .variables
                .iter()
                .zip(sol.point.iter())
                .map(|(v, &value)| NamedValue {
                    name: v.name.clone(),
                    value,
                })
                .collect(),
        }
    }

    /// Values in problem variable order, matched by name.
    pub fn to_point(&self, pr: &Problem) -> Result<Point, IoError> {
        if self.format != SOLUTION_FORMAT || self.version != FORMAT_VERSION {
            return Err(IoError::Format {
                expected: SOLUTION_FORMAT,
                found: self.format.clone(),
                version: self.version,
            });
        }
        let mut values = vec![None; pr.num_vars()];
        for nv in &self.values {
            let i = pr
                .variable_index(&nv.name)
                .ok_or_else(|| IoError::UnknownVariable(nv.name.clone()))?;
            if !nv.value.is_finite() {
                return Err(IoError::NonFinite(nv.name.clone()));
            }
            values[i] = Some(nv.value);
        }
        values
            .into_iter()
            .zip(&pr.variables)
            .map(|(v, var)| v.ok_or_else(|| IoError::MissingValue(var.name.clone())))
            .collect::<Result<Vec<_>, _>>()
            .map(Point::from)
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

pub fn read_point(path: impl AsRef<Path>, pr: &Problem) -> Result<Point, IoError> {
    let text = read(path.as_ref())?;
    let file: SolutionFile = serde_json::from_str(&text)?;
    file.to_point(pr)
}

pub fn write_solution(path: impl AsRef<Path>, pr: &Problem, sol: &Solution, feasible: bool) -> Result<(), IoError> {
    write(
        path.as_ref(),
        &SolutionFile::from_solution(pr, sol, feasible).to_json()?,
    )
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}
