//! Merges per-run metrics files into one CSV with a run-id column.

use std::fs;
use std::path::{Path, PathBuf};

use super::common::METRICS_FILE;
use crate::error::{CliError, Result};
use crate::output::METRICS_HEADER;

/// Every `metrics.csv` below `dir`, sorted by path.
pub fn find_runs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == METRICS_FILE) {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Writes `epoch,split,metric,value,run-id` rows to `out`; the run id is the
/// run directory relative to `dir` (`.` for `dir` itself). Returns the row count.
pub fn merge(dir: &Path, out: &Path) -> Result<usize> {
    let runs = find_runs(dir)?;
    if runs.is_empty() {
        return Err(CliError::Usage(format!(
            "no {METRICS_FILE} files under {}",
            dir.display()
        )));
    }
    let mut text = format!("{METRICS_HEADER},run-id\n");
    let mut rows = 0;
    for path in runs {
        let run_dir = path.parent().expect("file has a parent");
        let id = run_dir
            .strip_prefix(dir)
            .unwrap_or(run_dir)
            .to_string_lossy()
            .into_owned();
        let id = if id.is_empty() { ".".to_string() } else { id };
        let content = fs::read_to_string(&path)?;
        let mut lines = content.lines();
        if lines.next() != Some(METRICS_HEADER) {
            return Err(CliError::Usage(format!(
                "{} does not start with {METRICS_HEADER:?}",
                path.display()
            )));
        }
        for line in lines.filter(|l| !l.is_empty()) {
            text.push_str(&format!("{line},{id}\n"));
            rows += 1;
        }
    }
    fs::write(out, text)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_runs_in_path_order() {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in [
            ("b", "1,train,loss,0.5\n"),
            ("a/x", "2,val,auc,0.9\n3,val,auc,0.95\n"),
        ] {
            let d = dir.path().join(name);
            fs::create_dir_all(&d).unwrap();
            fs::write(d.join(METRICS_FILE), format!("{METRICS_HEADER}\n{body}")).unwrap();
        }
        let out = dir.path().join("report.csv");
        assert_eq!(merge(dir.path(), &out).unwrap(), 3);
        let text = fs::read_to_string(&out).unwrap();
        assert_eq!(
            text,
            "epoch,split,metric,value,run-id\n2,val,auc,0.9,a/x\n3,val,auc,0.95,a/x\n1,train,loss,0.5,b\n"
        );
        assert!(merge(&dir.path().join("b"), &out).is_ok());
        let empty = tempfile::tempdir().unwrap();
        assert!(merge(empty.path(), &empty.path().join("r.csv")).is_err());
    }
}
