//! CSV tables tagged with the config hash, JSON summaries and plot scripts.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const HASH_COLUMN: &str = "config_hash";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Fails if `path` holds rows written under a different config hash.
fn check_existing(path: &Path, hash: &str) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path)?;
    let found = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v.get(HASH_COLUMN).and_then(|h| h.as_str()).map(str::to_string))
    } else {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        header.iter().position(|c| *c == HASH_COLUMN).and_then(|idx| {
            lines
                .filter(|l| !l.is_empty())
                .map(|l| l.split(',').nth(idx).unwrap_or_default().to_string())
                .find(|h| h != hash)
                .or_else(|| Some(hash.to_string()))
        })
    };
    match found {
        Some(h) if h == hash => Ok(()),
        other => Err(Error::ConfigMismatch {
            path: path.display().to_string(),
            found: other.unwrap_or_else(|| "<untagged>".into()),
            expected: hash.to_string(),
        }),
    }
}

/// Writes `table` with a trailing hash column, replacing an earlier run of the same config.
pub fn write_table(path: &Path, table: &Table, hash: &str) -> Result<()> {
    check_existing(path, hash)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = String::new();
    out.push_str(&table.columns.join(","));
    out.push(',');
    out.push_str(HASH_COLUMN);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push(',');
        out.push_str(hash);
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let columns = lines.next().unwrap_or_default().split(',').map(str::to_string).collect();
    let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok(Table { columns, rows })
}

/// Pretty JSON with a top-level `config_hash` field.
pub fn write_summary<T: Serialize>(path: &Path, summary: &T, hash: &str) -> Result<()> {
    check_existing(path, hash)?;
    let mut value = serde_json::to_value(summary)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert(HASH_COLUMN.into(), hash.into());
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(&value)? + "\n")?;
    Ok(())
}

/// Script plotting the empirical CDF of `value` for each `group`.
pub fn cdf_script(csv: &str, group: &str, value: &str, xlabel: &str) -> String {
    format!(
        r#"import csv
import matplotlib.pyplot as plt

groups = {{}}
with open("{csv}") as f:
    for row in csv.DictReader(f):
        groups.setdefault(row["{group}"], []).append(float(row["{value}"]))
for name, vals in sorted(groups.items()):
    vals.sort()
    n = len(vals)
    plt.plot(vals, [(i + 1) / n for i in range(n)], label=name)
plt.xlabel("{xlabel}")
plt.ylabel("CDF")
plt.grid(True)
plt.legend()
plt.savefig("{csv}".replace(".csv", ".png"), dpi=150)
"#
    )
}

/// Script drawing `y` against `x` for each `group`, optionally on a log axis.
pub fn line_script(csv: &str, group: &str, x: &str, y: &str, ylabel: &str, log_y: bool) -> String {
    let scale = if log_y { "plt.yscale(\"log\")\n" } else { "" };
    format!(
        r#"import csv
import matplotlib.pyplot as plt

groups = {{}}
with open("{csv}") as f:
    for row in csv.DictReader(f):
        groups.setdefault(row["{group}"], []).append((float(row["{x}"]), float(row["{y}"])))
for name, pts in sorted(groups.items()):
    pts.sort()
    plt.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
{scale}plt.xlabel("{x}")
plt.ylabel("{ylabel}")
plt.grid(True)
plt.legend()
plt.savefig("{csv}".replace(".csv", ".png"), dpi=150)
"#
    )
}

pub fn write_script(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), num(0.5)]);
        t.push(vec!["2".into(), num(-1e-7)]);
        t
    }

    #[test]
    fn rows_carry_hash_and_rewrite_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&path, &table(), "h1").unwrap();
        let first = fs::read(&path).unwrap();
        write_table(&path, &table(), "h1").unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        let back = read_table(&path).unwrap();
        assert_eq!(back.columns, vec!["a", "b", HASH_COLUMN]);
        assert!(back.rows.iter().all(|r| r[2] == "h1"));
        assert_eq!(back.rows[1][1], "-0.0000001");
    }

    #[test]
    fn mismatched_hash_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&path, &table(), "h1").unwrap();
        let err = write_table(&path, &table(), "h2").unwrap_err();
        assert!(matches!(err, Error::ConfigMismatch { ref found, .. } if found == "h1"));
        fs::write(dir.path().join("u.csv"), "a,b\n1,2\n").unwrap();
        assert!(write_table(&dir.path().join("u.csv"), &table(), "h1").is_err());
        let js = dir.path().join("s.json");
        write_summary(&js, &serde_json::json!({"x": 1}), "h1").unwrap();
        assert!(write_summary(&js, &serde_json::json!({"x": 1}), "h3").is_err());
    }
}
