use std::io::Write;
use std::path::Path;

use super::{DataError, Dataset, Features};

#[derive(Debug, Clone, Copy, Default)]
pub struct LibsvmOptions {
    /// Sort out-of-order indices instead of failing.
    pub tolerate_unsorted: bool,
}

pub fn read_libsvm(path: &Path, opts: LibsvmOptions) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_libsvm(&text, &name, opts)
}

/// Parses `label idx:val idx:val ...` lines with 1-based indices. Blank lines
/// and `#` comments are skipped.
pub fn parse_libsvm(text: &str, name: &str, opts: LibsvmOptions) -> Result<Dataset, DataError> {
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut n_features = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| DataError::Parse { line: line_no, msg: format!("bad label {label_tok:?}") })?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| DataError::Parse { line: line_no, msg: format!("expected idx:val, got {tok:?}") })?;
            let idx: usize = i.parse().map_err(|_| DataError::Parse { line: line_no, msg: format!("bad index {i:?}") })?;
            if idx == 0 {
                return Err(DataError::Parse { line: line_no, msg: "indices are 1-based".into() });
            }
            let val: f64 = v.parse().map_err(|_| DataError::Parse { line: line_no, msg: format!("bad value {v:?}") })?;
            if !val.is_finite() {
                return Err(DataError::Parse { line: line_no, msg: "non-finite value".into() });
            }
            row.push((idx - 1, val));
        }
        if row.windows(2).any(|w| w[0].0 >= w[1].0) {
            if !opts.tolerate_unsorted {
                return Err(DataError::IndexOrder { line: line_no });
            }
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(DataError::IndexOrder { line: line_no });
            }
        }
        if let Some(&(j, _)) = row.last() {
            n_features = n_features.max(j + 1);
        }
        rows.push(row);
        raw_labels.push(label);
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let labels = map_binary_labels(&raw_labels)?;
    Ok(Dataset { name: name.to_string(), features: Features::Sparse(rows), labels, n_features, normalization: None })
}

/// Maps `{0, 1}` or `{−1, +1}` label sets onto `{−1, +1}`.
fn map_binary_labels(raw: &[f64]) -> Result<Vec<f64>, DataError> {
    let mut set: Vec<f64> = raw.to_vec();
    set.sort_by(f64::total_cmp);
    set.dedup();
    let zero_one = set.iter().all(|&l| l == 0.0 || l == 1.0);
    let pm_one = set.iter().all(|&l| l == -1.0 || l == 1.0);
    if pm_one {
        Ok(raw.to_vec())
    } else if zero_one {
        Ok(raw.iter().map(|&l| if l == 0.0 { -1.0 } else { 1.0 }).collect())
    } else {
        Err(DataError::AmbiguousLabels(format!("{set:?}")))
    }
}

/// Writes labels as `1`/`-1` and values with their shortest exact decimal
/// representation, so a read-back reproduces every bit.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<(), DataError> {
    for i in 0..data.len() {
        let label = data.labels.get(i).copied().unwrap_or(1.0);
        write!(out, "{}", if label > 0.0 { "1" } else { "-1" })?;
        match &data.features {
            Features::Sparse(r) => {
                for &(j, v) in &r[i] {
                    write!(out, " {}:{}", j + 1, v)?;
                }
            }
            Features::Dense(m) => {
                for (j, v) in m.row(i).iter().enumerate() {
                    if *v != 0.0 {
                        write!(out, " {}:{}", j + 1, v)?;
                    }
                }
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_examples() {
        let d = parse_libsvm("1 1:0.5 3:-2\n", "x", LibsvmOptions::default()).unwrap();
        assert_eq!(d.labels, vec![1.0]);
        assert_eq!(d.features, Features::Sparse(vec![vec![(0, 0.5), (2, -2.0)]]));
        let d = parse_libsvm("0 2:1\n1 1:1\n", "x", LibsvmOptions::default()).unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_libsvm("1 1:1\n1 2:x\n", "x", LibsvmOptions::default()).unwrap_err();
        assert!(matches!(e, DataError::Parse { line: 2, .. }));
        let e = parse_libsvm("1 3:1 2:1\n", "x", LibsvmOptions::default()).unwrap_err();
        assert!(matches!(e, DataError::IndexOrder { line: 1 }));
        let d = parse_libsvm("1 3:1 2:1\n", "x", LibsvmOptions { tolerate_unsorted: true }).unwrap();
        assert_eq!(d.features, Features::Sparse(vec![vec![(1, 1.0), (2, 1.0)]]));
        let e = parse_libsvm("2 1:1\n0 1:1\n", "x", LibsvmOptions::default()).unwrap_err();
        assert!(matches!(e, DataError::AmbiguousLabels(_)));
    }

    #[test]
    fn round_trip_is_exact() {
        let text = "1 1:0.1 4:3.0000000000000004e-7\n-1 2:-123456.789\n";
        let d = parse_libsvm(text, "x", LibsvmOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&d, &mut buf).unwrap();
        let d2 = parse_libsvm(std::str::from_utf8(&buf).unwrap(), "x", LibsvmOptions::default()).unwrap();
        assert_eq!(d, d2);
    }
}
