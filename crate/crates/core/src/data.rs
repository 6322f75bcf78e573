//! Data containers, validation and CSV ingestion.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScslError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Binary,
    Continuous,
}

/// Value coding of a binary matrix. Ingestion always yields `ZeroOne`;
/// models consume `PlusMinus` so that a masked input (0) is distinct from
/// every observed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    ZeroOne,
    PlusMinus,
}

/// Paired observations of the source set (`x`, n × p) and target set (`y`, n × m).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    x: Array2<f64>,
    y: Array2<f64>,
    domain: Domain,
    coding: Coding,
    x_names: Vec<String>,
    y_names: Vec<String>,
}

impl DataMatrix {
    /// Builds a validated matrix. Binary data must be supplied on the {0,1} scale.
    pub fn new(
        x: Array2<f64>,
        y: Array2<f64>,
        domain: Domain,
        x_names: Vec<String>,
        y_names: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(ScslError::MismatchedRows {
                x_rows: x.nrows(),
                y_rows: y.nrows(),
            });
        }
        if x.nrows() == 0 {
            return Err(ScslError::ShapeMismatch("data must have at least one row".into()));
        }
        if x_names.len() != x.ncols() {
            return Err(ScslError::LengthMismatch {
                expected: x.ncols(),
                got: x_names.len(),
            });
        }
        if y_names.len() != y.ncols() {
            return Err(ScslError::LengthMismatch {
                expected: y.ncols(),
                got: y_names.len(),
            });
        }
        check_unique(&x_names)?;
        check_unique(&y_names)?;
        for (label, m) in [("X", &x), ("Y", &y)] {
            if let Some(v) = m.iter().find(|v| !v.is_finite()) {
                return Err(ScslError::DomainViolation(format!("non-finite value {v} in {label}")));
            }
            if domain == Domain::Binary {
                if let Some(v) = m.iter().find(|&&v| v != 0.0 && v != 1.0) {
                    return Err(ScslError::DomainViolation(format!(
                        "binary {label} data contains value {v}"
                    )));
                }
            }
        }
        Ok(Self {
            x,
            y,
            domain,
            coding: Coding::ZeroOne,
            x_names,
            y_names,
        })
    }

    /// Builds a matrix with generated labels `x1..xp`, `y1..ym`.
    pub fn with_default_names(x: Array2<f64>, y: Array2<f64>, domain: Domain) -> Result<Self> {
        let xn = (1..=x.ncols()).map(|i| format!("x{i}")).collect();
        let yn = (1..=y.ncols()).map(|i| format!("y{i}")).collect();
        Self::new(x, y, domain, xn, yn)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn coding(&self) -> Coding {
        self.coding
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn y_names(&self) -> &[String] {
        &self.y_names
    }

    pub fn x_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn y_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.y.row(i)
    }

    /// True when the matrix is in the coding the predictive models expect.
    pub fn is_model_ready(&self) -> bool {
        self.domain == Domain::Continuous || self.coding == Coding::PlusMinus
    }

    /// Copy suitable as model input: binary data recoded to ±1, continuous untouched.
    pub fn model_view(&self) -> Result<DataMatrix> {
        if self.is_model_ready() {
            Ok(self.clone())
        } else {
            recode_binary(self)
        }
    }

    /// Column `j` of X on the response scale ({0,1} for binary data).
    pub fn x_response(&self, j: usize) -> Vec<f64> {
        self.response(self.x.column(j))
    }

    /// Column `k` of Y on the response scale ({0,1} for binary data).
    pub fn y_response(&self, k: usize) -> Vec<f64> {
        self.response(self.y.column(k))
    }

    fn response(&self, col: ArrayView1<'_, f64>) -> Vec<f64> {
        match (self.domain, self.coding) {
            (Domain::Binary, Coding::PlusMinus) => col.iter().map(|v| (v + 1.0) / 2.0).collect(),
            _ => col.to_vec(),
        }
    }
}

fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(ScslError::DuplicateColumn(n.clone()));
        }
    }
    Ok(())
}

/// Maps binary {0,1} entries to {-1,+1}.
pub fn recode_binary(matrix: &DataMatrix) -> Result<DataMatrix> {
    if matrix.domain != Domain::Binary {
        return Err(ScslError::DomainViolation(
            "recode_binary called on continuous data".into(),
        ));
    }
    if matrix.coding != Coding::ZeroOne {
        return Err(ScslError::DomainViolation("data is already recoded to ±1".into()));
    }
    let map = |v: &f64| 2.0 * v - 1.0;
    Ok(DataMatrix {
        x: matrix.x.map(map),
        y: matrix.y.map(map),
        coding: Coding::PlusMinus,
        ..matrix.clone()
    })
}

/// Inverse of [`recode_binary`].
pub fn decode_binary(matrix: &DataMatrix) -> Result<DataMatrix> {
    if matrix.domain != Domain::Binary || matrix.coding != Coding::PlusMinus {
        return Err(ScslError::DomainViolation("decode_binary needs ±1 binary data".into()));
    }
    let map = |v: &f64| (v + 1.0) / 2.0;
    Ok(DataMatrix {
        x: matrix.x.map(map),
        y: matrix.y.map(map),
        coding: Coding::ZeroOne,
        ..matrix.clone()
    })
}

/// Bipartite adjacency: entry (j, k) is true iff X_j → Y_k.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthGraph {
    pub adjacency: Vec<Vec<bool>>,
}

impl GroundTruthGraph {
    pub fn empty(p: usize, m: usize) -> Self {
        Self {
            adjacency: vec![vec![false; m]; p],
        }
    }

    pub fn p(&self) -> usize {
        self.adjacency.len()
    }

    pub fn m(&self) -> usize {
        self.adjacency.first().map_or(0, Vec::len)
    }

    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        self.adjacency[j][k]
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.m())
            .map(|k| self.adjacency.iter().filter(|row| row[k]).count())
            .collect()
    }

    pub fn matches(&self, data: &DataMatrix) -> bool {
        self.p() == data.p() && self.m() == data.m() && self.adjacency.iter().all(|r| r.len() == data.m())
    }
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn read_table(path: &Path, domain: Domain) -> Result<(Vec<String>, Vec<f64>, usize)> {
    let text = fs::read_to_string(path).map_err(|e| ScslError::io(path, e))?;
    let file = path.display().to_string();
    let perr = |line: usize, msg: String| ScslError::Parse {
        file: file.clone(),
        line,
        msg,
    };
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines
        .next()
        .filter(|h| !h.is_empty())
        .ok_or_else(|| perr(1, "missing header row".into()))?;
    let names: Vec<String> = header.split(',').map(str::to_string).collect();
    if let Some(bad) = names.iter().find(|n| !valid_label(n)) {
        return Err(perr(1, format!("invalid column label `{bad}`")));
    }
    check_unique(&names)?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.is_empty() {
            // trailing newline at EOF is fine; blank lines elsewhere are not
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != names.len() {
            return Err(perr(
                lineno,
                format!("expected {} cells, found {}", names.len(), cells.len()),
            ));
        }
        for (c, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(perr(lineno, format!("empty cell in column `{}`", names[c])));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| perr(lineno, format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(perr(lineno, format!("non-finite cell `{cell}`")));
            }
            if domain == Domain::Binary && v != 0.0 && v != 1.0 {
                return Err(ScslError::DomainViolation(format!(
                    "{file} line {lineno}: value `{cell}` is not 0 or 1"
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok((names, values, rows))
}

/// Reads X and Y from two CSV files with one header row each.
pub fn load_csv(x_path: &Path, y_path: &Path, domain: Domain) -> Result<DataMatrix> {
    let (xn, xv, xr) = read_table(x_path, domain)?;
    let (yn, yv, yr) = read_table(y_path, domain)?;
    if xr != yr {
        return Err(ScslError::MismatchedRows { x_rows: xr, y_rows: yr });
    }
    let x = Array2::from_shape_vec((xr, xn.len()), xv)
        .map_err(|e| ScslError::ShapeMismatch(e.to_string()))?;
    let y = Array2::from_shape_vec((yr, yn.len()), yv)
        .map_err(|e| ScslError::ShapeMismatch(e.to_string()))?;
    DataMatrix::new(x, y, domain, xn, yn)
}

/// Reads a single table, e.g. X without a paired Y.
pub fn load_table(path: &Path, domain: Domain) -> Result<(Vec<String>, Array2<f64>)> {
    let (names, values, rows) = read_table(path, domain)?;
    let m = Array2::from_shape_vec((rows, names.len()), values)
        .map_err(|e| ScslError::ShapeMismatch(e.to_string()))?;
    Ok((names, m))
}

/// Renders one matrix as CSV text. Binary values are written as `0`/`1`,
/// continuous values with 17 significant digits.
pub fn matrix_to_csv(names: &[String], m: ArrayView2<'_, f64>, domain: Domain) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for row in m.rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            match domain {
                Domain::Binary => out.push(if *v == 0.0 { '0' } else { '1' }),
                Domain::Continuous => {
                    let _ = write!(out, "{v:.16e}");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `X.csv`-style and `Y.csv`-style files for a {0,1}-coded matrix.
pub fn write_csv(data: &DataMatrix, x_path: &Path, y_path: &Path) -> Result<()> {
    let data = match (data.domain, data.coding) {
        (Domain::Binary, Coding::PlusMinus) => decode_binary(data)?,
        _ => data.clone(),
    };
    crate::io::write_atomic(x_path, matrix_to_csv(&data.x_names, data.x(), data.domain).as_bytes())?;
    crate::io::write_atomic(y_path, matrix_to_csv(&data.y_names, data.y(), data.domain).as_bytes())?;
    Ok(())
}
