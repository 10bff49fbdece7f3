//! Plain-text tables: a title comment, one header row, numeric rows and a
//! comment footer with the config hash, the seed and the effective config.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footer {
    pub config_hash: String,
    pub seed: u64,
    pub config_toml: String,
}

impl Footer {
    pub fn new(config_toml: String, seed: u64) -> Self {
        Self {
            config_hash: sha256_hex(&config_toml),
            seed,
            config_toml,
        }
    }

    /// Appends the footer comment lines to `out`.
    pub fn render(&self, out: &mut String) {
        out.push_str(&format!("# config_sha256: {}\n", self.config_hash));
        out.push_str(&format!("# seed: {}\n", self.seed));
        out.push_str("# effective config:\n");
        for line in self.config_toml.lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str(&format!("# {line}\n"));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTable {
    title: String,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    notes: Vec<String>,
}

impl OutputTable {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Self {
            title: title.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// A comment line placed between the rows and the footer.
    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn render(&self, footer: &Footer) -> String {
        let mut out = format!("# {}\n{}\n", self.title, self.columns.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        for n in &self.notes {
            out.push_str(&format!("# {n}\n"));
        }
        footer.render(&mut out);
        out
    }
}

/// A file produced by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: PathBuf,
    pub content: String,
}

/// `dir/stem_suffix.ext` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

/// Parses the numeric rows and header of a rendered table.
pub fn parse_table(text: &str) -> Option<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines.next()?.split_whitespace().map(str::to_string).collect();
    let mut rows = Vec::new();
    for l in lines {
        let row: Option<Vec<f64>> = l.split_whitespace().map(|c| c.parse().ok()).collect();
        let row = row?;
        if row.len() != header.len() {
            return None;
        }
        rows.push(row);
    }
    Some((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(1.0), "1.00000000000e0");
        assert_eq!(fmt_num(-0.000123456789012345), "-1.23456789012e-4");
    }

    #[test]
    fn render_and_parse() {
        let mut t = OutputTable::new("demo", &["a_rad", "b"]);
        t.push(vec![1.0, 2.5]);
        t.push(vec![f64::NAN, -3.0]);
        t.note("fit contrast=1");
        let text = t.render(&Footer::new("x = 1\n".into(), 7));
        assert!(text.starts_with("# demo\na_rad b\n"));
        assert!(text.contains("# seed: 7\n# effective config:\n# x = 1\n"));
        let (h, rows) = parse_table(&text).unwrap();
        assert_eq!(h, vec!["a_rad", "b"]);
        assert_eq!(rows.len(), 2);
        assert!(rows[1][0].is_nan());
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("out/s4.dat"), "backaction"), PathBuf::from("out/s4_backaction.dat"));
        assert_eq!(sibling(Path::new("s4"), "trace0"), PathBuf::from("s4_trace0"));
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
