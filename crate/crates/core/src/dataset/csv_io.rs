use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Dataset, Example, Label, Standardization, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Classification,
    Regression,
}

/// How to interpret the columns of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub label: String,
    /// Columns to one-hot encode (first level dropped).
    pub categorical: Vec<String>,
    pub task: TaskKind,
    /// Fixed label id order. When absent, ids follow first appearance.
    pub label_levels: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn new(label: impl Into<String>, task: TaskKind) -> Self {
        Self {
            label: label.into(),
            categorical: Vec::new(),
            task,
            label_levels: None,
        }
    }

    pub fn with_categorical(mut self, cols: &[&str]) -> Self {
        self.categorical = cols.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Levels of a column in first-appearance order.
fn levels<'a>(cells: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in cells {
        if !out.iter().any(|l| l == c) {
            out.push(c.to_string());
        }
    }
    out
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyInput(format!("{} has no header", path.as_ref().display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no data rows",
            path.as_ref().display()
        )));
    }

    let col_index = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let label_idx = col_index(&schema.label)?;
    for c in &schema.categorical {
        col_index(c)?;
    }

    // Build the encoded feature layout in header order.
    enum Col {
        Numeric(usize),
        OneHot { idx: usize, levels: Vec<String> },
    }
    let mut layout = Vec::new();
    let mut feature_names = Vec::new();
    for (idx, name) in header.iter().enumerate() {
        if idx == label_idx {
            continue;
        }
        if schema.categorical.iter().any(|c| c == name) {
            let lv = levels(rows.iter().map(|r| &r[idx]));
            for l in lv.iter().skip(1) {
                feature_names.push(format!("{name}={l}"));
            }
            layout.push(Col::OneHot { idx, levels: lv });
        } else {
            feature_names.push(name.clone());
            layout.push(Col::Numeric(idx));
        }
    }

    let label_levels = match (schema.task, &schema.label_levels) {
        (TaskKind::Classification, Some(l)) => l.clone(),
        (TaskKind::Classification, None) => levels(rows.iter().map(|r| &r[label_idx])),
        (TaskKind::Regression, _) => Vec::new(),
    };
    let label_ids: HashMap<&str, usize> = label_levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let mut examples = Vec::with_capacity(rows.len());
    for (r, rec) in rows.iter().enumerate() {
        let parse_err = |idx: usize, message: String| Error::Parse {
            row: r + 1,
            column: header[idx].clone(),
            message,
        };
        let mut object = Vec::with_capacity(feature_names.len());
        for col in &layout {
            match col {
                Col::Numeric(idx) => {
                    let v: f64 = rec[*idx]
                        .parse()
                        .map_err(|_| parse_err(*idx, format!("'{}' is not a number", &rec[*idx])))?;
                    object.push(v);
                }
                Col::OneHot { idx, levels } => {
                    for l in levels.iter().skip(1) {
                        object.push(if rec[*idx] == *l { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        let cell = &rec[label_idx];
        let label = match schema.task {
            TaskKind::Classification => Label::Class(
                *label_ids
                    .get(cell)
                    .ok_or_else(|| parse_err(label_idx, format!("unknown label '{cell}'")))?,
            ),
            TaskKind::Regression => Label::Real(
                cell.parse()
                    .map_err(|_| parse_err(label_idx, format!("'{cell}' is not a number")))?,
            ),
        };
        examples.push(Example::new(object, label));
    }

    let task = match schema.task {
        TaskKind::Classification => Task::Classification(label_levels.len()),
        TaskKind::Regression => Task::Regression,
    };
    let mut data = Dataset::new(examples, task, feature_names)?.with_label_column(&schema.label);
    if task.is_classification() {
        data = data.with_label_names(label_levels)?;
    }
    Ok(data)
}

/// Writes encoded features followed by the label column. Classification
/// labels are written by name.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(data.label_column());
    w.write_record(&header)?;
    for ex in data.examples() {
        let mut rec: Vec<String> = ex.object.iter().map(|v| v.to_string()).collect();
        rec.push(match ex.label {
            Label::Class(c) => data.label_names()[c].clone(),
            Label::Real(y) => y.to_string(),
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar metadata: label mapping, feature names and standardization.
///
/// Stored as `key=value` lines; `#` starts a comment. Keys: `task`
/// (`classification`|`regression`), `label_column`, `labels`, `label.<id>`,
/// `features`, `feature.<j>`, and optionally `mean.<j>` / `sd.<j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub task: Task,
    pub label_column: String,
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub standardization: Option<Standardization>,
}

impl DatasetMeta {
    pub fn of(data: &Dataset) -> Self {
        Self {
            task: data.task(),
            label_column: data.label_column().to_string(),
            label_names: data.label_names().to_vec(),
            feature_names: data.feature_names().to_vec(),
            standardization: data.standardization().cloned(),
        }
    }

    /// Schema that reloads a CSV written by [`write_csv`] with the same ids.
    pub fn schema(&self) -> CsvSchema {
        match self.task {
            Task::Classification(_) => CsvSchema {
                label: self.label_column.clone(),
                categorical: Vec::new(),
                task: TaskKind::Classification,
                label_levels: Some(self.label_names.clone()),
            },
            Task::Regression => CsvSchema::new(self.label_column.clone(), TaskKind::Regression),
        }
    }

    /// Loads `path` with [`Self::schema`] and reattaches the standardization.
    pub fn load(&self, path: impl AsRef<Path>) -> Result<Dataset> {
        let data = load_csv(path, &self.schema())?;
        if data.feature_names() != self.feature_names.as_slice() {
            return Err(Error::Schema("feature columns differ from metadata".into()));
        }
        match &self.standardization {
            Some(s) => data.with_standardization(s.clone()),
            None => Ok(data),
        }
    }
}

pub fn write_meta(meta: &DatasetMeta, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("# dataset metadata\n");
    let task = match meta.task {
        Task::Classification(_) => "classification",
        Task::Regression => "regression",
    };
    let _ = writeln!(s, "task={task}");
    let _ = writeln!(s, "label_column={}", meta.label_column);
    let _ = writeln!(s, "labels={}", meta.label_names.len());
    for (i, l) in meta.label_names.iter().enumerate() {
        let _ = writeln!(s, "label.{i}={l}");
    }
    let _ = writeln!(s, "features={}", meta.feature_names.len());
    for (j, f) in meta.feature_names.iter().enumerate() {
        let _ = writeln!(s, "feature.{j}={f}");
    }
    if let Some(st) = &meta.standardization {
        for (j, (mean, sd)) in st.stats.iter().enumerate() {
            let _ = writeln!(s, "mean.{j}={mean}");
            let _ = writeln!(s, "sd.{j}={sd}");
        }
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_meta(path: impl AsRef<Path>) -> Result<DatasetMeta> {
    let text = fs::read_to_string(path)?;
    let mut kv: HashMap<String, String> = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("metadata line without '=': {line}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        kv.get(k)
            .cloned()
            .ok_or_else(|| Error::Format(format!("metadata key '{k}' missing")))
    };
    let count = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("metadata key '{k}' is not a count")))
    };
    let real = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("metadata key '{k}' is not a number")))
    };
    let n_labels = count("labels")?;
    let label_names = (0..n_labels)
        .map(|i| get(&format!("label.{i}")))
        .collect::<Result<Vec<_>>>()?;
    let task = match get("task")?.as_str() {
        "classification" => Task::Classification(n_labels),
        "regression" => Task::Regression,
        other => return Err(Error::Format(format!("unknown task '{other}'"))),
    };
    let m = count("features")?;
    let feature_names = (0..m)
        .map(|j| get(&format!("feature.{j}")))
        .collect::<Result<Vec<_>>>()?;
    let standardization = if kv.contains_key("mean.0") {
        let stats = (0..m)
            .map(|j| Ok((real(&format!("mean.{j}"))?, real(&format!("sd.{j}"))?)))
            .collect::<Result<Vec<_>>>()?;
        Some(Standardization { stats })
    } else {
        None
    };
    Ok(DatasetMeta {
        task,
        label_column: get("label_column")?,
        label_names,
        feature_names,
        standardization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn labels_in_first_appearance_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "x,y\n1,a\n2,b\n3,a\n4,b\n");
        let d = load_csv(&p, &CsvSchema::new("y", TaskKind::Classification)).unwrap();
        assert_eq!(d.task(), Task::Classification(2));
        assert_eq!(d.label_names(), ["a", "b"]);
        let ids: Vec<_> = d.examples().iter().map(|e| e.label).collect();
        assert_eq!(
            ids,
            vec![Label::Class(0), Label::Class(1), Label::Class(0), Label::Class(1)]
        );
    }

    #[test]
    fn categorical_drop_first() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "c,x,y\nr,1,0.5\ng,2,1.5\nb,3,2.5\nr,4,3.5\n");
        let schema = CsvSchema::new("y", TaskKind::Regression).with_categorical(&["c"]);
        let d = load_csv(&p, &schema).unwrap();
        assert_eq!(d.feature_names(), ["c=g", "c=b", "x"]);
        assert_eq!(d.examples()[0].object, vec![0.0, 0.0, 1.0]);
        assert_eq!(d.examples()[1].object, vec![1.0, 0.0, 2.0]);
        assert_eq!(d.examples()[2].object, vec![0.0, 1.0, 3.0]);
    }

    #[test]
    fn malformed_cell_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "x,y\n1,1\n2,2\nfoo,3\n4,4\n5,5\n");
        match load_csv(&p, &CsvSchema::new("y", TaskKind::Regression)) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "n.csv", "x,z\n1,2\n");
        match load_csv(&p, &CsvSchema::new("y", TaskKind::Regression)) {
            Err(Error::Schema(msg)) => assert!(msg.contains("'y'")),
            other => panic!("expected schema error, got {other:?}"),
        }
        let e = write(&dir, "e.csv", "");
        assert!(matches!(
            load_csv(&e, &CsvSchema::new("y", TaskKind::Regression)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "x,y\n1,2\n3\n");
        assert!(matches!(
            load_csv(&p, &CsvSchema::new("y", TaskKind::Regression)),
            Err(Error::Parse { row: 2, .. })
        ));
    }
}
