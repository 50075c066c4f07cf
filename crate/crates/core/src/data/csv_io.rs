use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Which column of a CSV holds integer class labels. In config files this is
/// either a zero-based index or the string `"last"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelColumnRepr", into = "LabelColumnRepr")]
pub enum LabelColumn {
    Index(usize),
    Last,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelColumnRepr {
    Index(usize),
    Name(String),
}

impl TryFrom<LabelColumnRepr> for LabelColumn {
    type Error = String;

    fn try_from(r: LabelColumnRepr) -> std::result::Result<Self, String> {
        match r {
            LabelColumnRepr::Index(i) => Ok(LabelColumn::Index(i)),
            LabelColumnRepr::Name(s) if s == "last" => Ok(LabelColumn::Last),
            LabelColumnRepr::Name(s) => Err(format!("expected \"last\" or a column index, got {s:?}")),
        }
    }
}

impl From<LabelColumn> for LabelColumnRepr {
    fn from(c: LabelColumn) -> Self {
        match c {
            LabelColumn::Index(i) => LabelColumnRepr::Index(i),
            LabelColumn::Last => LabelColumnRepr::Name("last".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub features: Array2<f64>,
    pub labels: Option<Vec<usize>>,
}

/// Parse a rectangular numeric CSV. Line numbers in errors are 1-based file lines.
pub fn load_csv(path: &Path, has_header: bool, label_column: Option<LabelColumn>) -> Result<RawTable> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);

    let mut width = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                line,
                expected,
                found: record.len(),
            });
        }
        let label_idx = match label_column {
            Some(LabelColumn::Index(i)) if i >= expected => {
                return Err(Error::InvalidArgument(format!(
                    "label column {i} out of range for {expected} columns"
                )))
            }
            Some(LabelColumn::Index(i)) => Some(i),
            Some(LabelColumn::Last) => Some(expected - 1),
            None => None,
        };
        for (column, cell) in record.iter().enumerate() {
            let bad = || Error::NonNumericCell {
                path: path.to_path_buf(),
                line,
                column,
                value: cell.to_string(),
            };
            let v: f64 = cell.parse().map_err(|_| bad())?;
            if Some(column) == label_idx {
                if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
                    return Err(bad());
                }
                labels.push(v as usize);
            } else {
                values.push(v);
            }
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    let n_features = width - usize::from(label_column.is_some() && width > 0);
    if rows == 0 || n_features == 0 {
        return Err(Error::InvalidDataset(format!(
            "{} contains no feature data",
            path.display()
        )));
    }
    let features = Array2::from_shape_vec((rows, n_features), values)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    Ok(RawTable {
        features,
        labels: label_column.map(|_| labels),
    })
}

/// Write features with the label as the final column, under a `f0,..,label` header.
pub fn write_dataset_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..ds.n_features()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in ds.features().rows().into_iter().zip(ds.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Rating-matrix preprocessing for `(user, item, rating)` triples:
/// keep the `top_m` items with the most ratings (ties to the lower item id),
/// one row per user with unrated items zero-filled, and drop users with no
/// rating among the kept items. Rows are ordered by user id.
///
/// The result is meant for [`minmax_normalize`](crate::dataset::minmax_normalize)
/// followed by [`relabel_transactions`](super::relabel_transactions).
pub fn ratings_to_matrix(ratings: &[(u64, u64, f64)], top_m: usize) -> Result<Array2<f64>> {
    let mut popularity: HashMap<u64, usize> = HashMap::new();
    for &(_, item, _) in ratings {
        *popularity.entry(item).or_default() += 1;
    }
    let mut items: Vec<(u64, usize)> = popularity.into_iter().collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    items.truncate(top_m);
    let column: HashMap<u64, usize> = items.iter().enumerate().map(|(j, &(item, _))| (item, j)).collect();

    let mut users: Vec<u64> = ratings
        .iter()
        .filter(|r| column.contains_key(&r.1))
        .map(|r| r.0)
        .collect();
    users.sort_unstable();
    users.dedup();
    if users.is_empty() {
        return Err(Error::InvalidDataset("no user rated any of the kept items".into()));
    }
    let row: HashMap<u64, usize> = users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut m = Array2::zeros((users.len(), items.len()));
    for &(user, item, rating) in ratings {
        if let (Some(&i), Some(&j)) = (row.get(&user), column.get(&item)) {
            m[[i, j]] = rating;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_matrix() {
        let f = write_tmp("1,2\n3,4\n5,6\n");
        let t = load_csv(f.path(), false, None).unwrap();
        assert_eq!(t.features, array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert!(t.labels.is_none());
    }

    #[test]
    fn last_column_labels() {
        let f = write_tmp("a,b,y\n0.1,0.2,1\n");
        let t = load_csv(f.path(), true, Some(LabelColumn::Last)).unwrap();
        assert_eq!(t.features, array![[0.1, 0.2]]);
        assert_eq!(t.labels, Some(vec![1]));
    }

    #[test]
    fn ragged_row_names_line() {
        let f = write_tmp("1,2\n3,4\n5\n");
        match load_csv(f.path(), false, None).unwrap_err() {
            Error::RaggedRow { line, expected, found, .. } => {
                assert_eq!((line, expected, found), (3, 2, 1));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_numeric_and_missing_are_distinct() {
        let f = write_tmp("1,x\n");
        assert!(matches!(
            load_csv(f.path(), false, None).unwrap_err(),
            Error::NonNumericCell { line: 1, column: 1, .. }
        ));
        assert!(matches!(
            load_csv(Path::new("/nonexistent/data.csv"), false, None).unwrap_err(),
            Error::MissingFile(_)
        ));
    }

    #[test]
    fn dataset_round_trip() {
        let ds = LabeledDataset::with_unit_ranges(array![[0.1, 0.7], [0.3, 0.2]], vec![1, 0], 2).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset_csv(&ds, f.path()).unwrap();
        let t = load_csv(f.path(), true, Some(LabelColumn::Last)).unwrap();
        assert_eq!(&t.features, ds.features());
        assert_eq!(t.labels.unwrap(), ds.labels());
    }

    #[test]
    fn ratings_recipe() {
        // item 10 rated 3x, item 20 2x, item 30 1x; user 4 only rated item 30
        let r = [
            (1, 10, 5.0),
            (1, 20, 3.0),
            (2, 10, 4.0),
            (3, 10, 1.0),
            (3, 20, 2.0),
            (4, 30, 5.0),
        ];
        let m = ratings_to_matrix(&r, 2).unwrap();
        assert_eq!(m, array![[5.0, 3.0], [4.0, 0.0], [1.0, 2.0]]);
    }
}
