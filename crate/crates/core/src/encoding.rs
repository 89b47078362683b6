//! Numeric features from the constant space.
//!
//! A constant is encoded by counting its bindings per `(predicate, argument
//! position)` column. An atom is the concatenation of its arguments'
//! encodings. Datasets are min-max normalized per column.

use serde::{Deserialize, Serialize};

use crate::kb::GroundAtom;
use crate::space::{SharedNemus, SpaceId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    Constants,
    #[default]
    Atoms,
}

impl std::str::FromStr for DatasetMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constants" => Ok(DatasetMode::Constants),
            "atoms" => Ok(DatasetMode::Atoms),
            other => Err(format!("unknown dataset mode `{other}` (expected constants|atoms)")),
        }
    }
}

impl std::fmt::Display for DatasetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DatasetMode::Constants => "constants",
            DatasetMode::Atoms => "atoms",
        })
    }
}

/// Feature column: occurrences at `(predicate, position)` of the row's
/// `argument`-th constant (always 1 in constants mode).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub argument: usize,
    pub predicate: usize,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RowOrigin {
    Fact {
        predicate: usize,
        occurrence: usize,
        atom: GroundAtom,
    },
    Constant {
        code: usize,
        name: String,
    },
}

impl RowOrigin {
    pub fn atom(&self) -> Option<&GroundAtom> {
        match self {
            RowOrigin::Fact { atom, .. } => Some(atom),
            RowOrigin::Constant { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub mode: DatasetMode,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub origins: Vec<RowOrigin>,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodingError {
    #[error("unknown constant code {0}")]
    UnknownCode(usize),
    #[error("knowledge base has no facts to encode")]
    EmptyKb,
    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteInput { row: usize, column: usize },
}

/// `(predicate, position)` pairs in predicate-code order, positions ascending.
pub fn constant_columns(nemus: &SharedNemus) -> Vec<(usize, usize)> {
    (0..nemus.predicate_count())
        .flat_map(|p| (1..=nemus.arity(p)).map(move |a| (p, a)))
        .collect()
}

pub fn encode_constant(nemus: &SharedNemus, constant: usize) -> Result<Vec<f64>, EncodingError> {
    let bindings = nemus
        .bindings_of(constant)
        .map_err(|_| EncodingError::UnknownCode(constant))?;
    let columns = constant_columns(nemus);
    let mut v = vec![0.0; columns.len()];
    for b in bindings.iter().filter(|b| b.target.h == SpaceId::Predicate) {
        if let Some(j) = columns.iter().position(|&c| c == (b.target.c, b.target.a)) {
            v[j] += 1.0;
        }
    }
    Ok(v)
}

/// Concatenated constant encodings of the atom's arguments. Constants that
/// are not part of the KB contribute zeros.
pub fn encode_atom(nemus: &SharedNemus, atom: &GroundAtom) -> Vec<f64> {
    let width = constant_columns(nemus).len();
    let mut out = Vec::with_capacity(width * atom.arity());
    for arg in &atom.args {
        match nemus.constant_code(arg) {
            Some(x) => out.extend(encode_constant(nemus, x).expect("code from table")),
            None => out.extend(std::iter::repeat_n(0.0, width)),
        }
    }
    out
}

/// Per-column min-max rescaling to `[0, 1]`; zero-range columns become 0.
pub fn normalize(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, EncodingError> {
    let cols = matrix.first().map_or(0, Vec::len);
    let mut lo = vec![f64::INFINITY; cols];
    let mut hi = vec![f64::NEG_INFINITY; cols];
    for (r, row) in matrix.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(EncodingError::NonFiniteInput { row: r, column: c });
            }
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    Ok(matrix
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(c, &v)| {
                    let range = hi[c] - lo[c];
                    if range > 0.0 {
                        (v - lo[c]) / range
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}

/// Builds the normalized training matrix. Atoms mode has one row per ground
/// fact (predicate-major, then occurrence); constants mode one row per
/// constant, labelled with the predicate it occurs in most (ties to the
/// lower code).
pub fn build_dataset(nemus: &SharedNemus, mode: DatasetMode) -> Result<Dataset, EncodingError> {
    if nemus.fact_count() == 0 {
        return Err(EncodingError::EmptyKb);
    }
    let base = constant_columns(nemus);
    let (raw, labels, origins, columns) = match mode {
        DatasetMode::Atoms => {
            let width = nemus
                .facts()
                .map(|(_, _, a)| a.arity())
                .max()
                .unwrap_or(0);
            let columns = (1..=width)
                .flat_map(|argument| {
                    base.iter().map(move |&(predicate, position)| Column {
                        argument,
                        predicate,
                        position,
                    })
                })
                .collect::<Vec<_>>();
            let mut raw = Vec::new();
            let mut labels = Vec::new();
            let mut origins = Vec::new();
            for (predicate, occurrence, atom) in nemus.facts() {
                let mut row = encode_atom(nemus, &atom);
                row.resize(columns.len(), 0.0);
                raw.push(row);
                labels.push(predicate);
                origins.push(RowOrigin::Fact {
                    predicate,
                    occurrence,
                    atom,
                });
            }
            (raw, labels, origins, columns)
        }
        DatasetMode::Constants => {
            let columns = base
                .iter()
                .map(|&(predicate, position)| Column {
                    argument: 1,
                    predicate,
                    position,
                })
                .collect::<Vec<_>>();
            let mut raw = Vec::new();
            let mut labels = Vec::new();
            let mut origins = Vec::new();
            for (code, name) in nemus.symbols.constants.iter() {
                let row = encode_constant(nemus, code)?;
                let mut per_pred = vec![0.0; nemus.predicate_count()];
                for (c, v) in base.iter().zip(&row) {
                    per_pred[c.0] += v;
                }
                let label = per_pred
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (p, &n)| {
                        if n > best.1 {
                            (p, n)
                        } else {
                            best
                        }
                    })
                    .0;
                raw.push(row);
                labels.push(label);
                origins.push(RowOrigin::Constant {
                    code,
                    name: name.to_string(),
                });
            }
            (raw, labels, origins, columns)
        }
    };
    Ok(Dataset {
        mode,
        rows: normalize(&raw)?,
        labels,
        origins,
        columns,
    })
}

/// One-hot rows over the dataset's rows, one column per predicate-space
/// instance, used as ancillary input aligned with an atoms dataset.
pub fn instance_one_hot(dataset: &Dataset) -> Vec<Vec<f64>> {
    let n = dataset.rows.len();
    (0..n)
        .map(|r| {
            let mut row = vec![0.0; n];
            row[r] = 1.0;
            row
        })
        .collect()
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self, nemus: &SharedNemus) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| {
                let p = nemus.predicate_name(c.predicate).unwrap_or("?");
                match self.mode {
                    DatasetMode::Atoms => format!("arg{}:{}/{}", c.argument, p, c.position),
                    DatasetMode::Constants => format!("{}/{}", p, c.position),
                }
            })
            .collect()
    }

    /// CSV with the column key as header and trailing `label`, `atom` columns.
    /// `preamble` lines are written first, each prefixed with `# `.
    pub fn to_csv(&self, nemus: &SharedNemus, preamble: &[String]) -> String {
        let mut out = Vec::new();
        for line in preamble {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header = self.column_names(nemus);
            header.push("label".into());
            header.push("atom".into());
            w.write_record(&header).expect("in-memory csv");
            for ((row, &label), origin) in self.rows.iter().zip(&self.labels).zip(&self.origins) {
                let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                rec.push(nemus.predicate_name(label).unwrap_or("?").to_string());
                rec.push(match origin {
                    RowOrigin::Fact { atom, .. } => atom.to_string(),
                    RowOrigin::Constant { name, .. } => name.clone(),
                });
                w.write_record(&rec).expect("in-memory csv");
            }
            w.flush().expect("in-memory csv");
        }
        String::from_utf8(out).expect("utf-8 csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{build_corpus, parse_kb};
    use crate::space::compile_nemus;

    fn nemus(src: &str) -> SharedNemus {
        compile_nemus(&build_corpus(&parse_kb(src).unwrap())).unwrap()
    }

    #[test]
    fn normalize_cases() {
        let m = vec![vec![0.0, 3.0], vec![2.0, 3.0], vec![4.0, 3.0]];
        let n = normalize(&m).unwrap();
        assert_eq!(n, vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]]);
        assert_eq!(normalize(&n).unwrap(), n);
        assert!(normalize(&[]).unwrap().is_empty());
    }

    #[test]
    fn normalize_rejects_non_finite() {
        assert_eq!(
            normalize(&[vec![1.0], vec![f64::NAN]]),
            Err(EncodingError::NonFiniteInput { row: 1, column: 0 })
        );
    }

    #[test]
    fn single_fact_dataset_is_all_zero() {
        let d = build_dataset(&nemus("p(a, b)."), DatasetMode::Atoms).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.rows[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_kb() {
        let n = compile_nemus(&Default::default()).unwrap();
        assert_eq!(build_dataset(&n, DatasetMode::Atoms), Err(EncodingError::EmptyKb));
    }

    #[test]
    fn unknown_constant() {
        let n = nemus("p(a).");
        assert_eq!(encode_constant(&n, 3), Err(EncodingError::UnknownCode(3)));
    }

    #[test]
    fn unused_constant_encodes_to_zero() {
        // `c` only appears in a rule, so it has no predicate-space bindings.
        let n = nemus("p(a, b). q(?X) :- p(?X, c).");
        let c = n.constant_code("c").unwrap();
        assert_eq!(encode_constant(&n, c).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn mixed_arity_rows_are_padded() {
        let d = build_dataset(&nemus("p(a, b). q(a)."), DatasetMode::Atoms).unwrap();
        assert_eq!(d.dim(), 6);
        assert!(d.rows.iter().all(|r| r.len() == 6));
    }

    #[test]
    fn one_hot_alignment() {
        let d = build_dataset(&nemus("p(a). p(b). q(c)."), DatasetMode::Atoms).unwrap();
        let oh = instance_one_hot(&d);
        assert_eq!(oh.len(), 3);
        assert_eq!(oh[1], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn csv_layout() {
        let n = nemus("p(a, b).");
        let d = build_dataset(&n, DatasetMode::Atoms).unwrap();
        let csv = d.to_csv(&n, &["seed=1".into()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# seed=1"));
        assert_eq!(
            lines.next(),
            Some("arg1:p/1,arg1:p/2,arg2:p/1,arg2:p/2,label,atom")
        );
        assert_eq!(lines.next(), Some("0,0,0,0,p,\"p(a, b)\""));
    }
}
