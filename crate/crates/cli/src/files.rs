//! Plain-text matrix and selection files.
//!
//! Matrix format: first line `rows,cols`, then `rows` lines of
//! comma-separated decimals. Values are written with 17 significant
//! digits, so write-then-read round-trips every finite f64 exactly.
//! Selection format: one `index,scale` line per retained row.

use crate::config::ConfigError;
use stablesketch::bss::RowSelection;
use stablesketch::Matrix;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn io_err(path: &Path, what: &str, detail: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{what} '{}': {detail}", path.display()))
}

/// One f64 with 17 significant digits: exact round-trip.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<(), ConfigError> {
    let mut text = format!("{},{}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let mut line = String::new();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            let _ = write!(line, "{}", format_value(*v));
        }
        text.push_str(&line);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, "cannot write", e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, "cannot read", e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| io_err(path, "empty matrix file", ""))?;
    let (r, c) = header
        .split_once(',')
        .ok_or_else(|| io_err(path, "bad matrix header in", header))?;
    let rows: usize =
        r.trim().parse().map_err(|e| io_err(path, "bad row count in", e))?;
    let cols: usize =
        c.trim().parse().map_err(|e| io_err(path, "bad column count in", e))?;
    let mut data = Vec::with_capacity(rows * cols);
    for (lineno, line) in lines.enumerate() {
        if lineno >= rows {
            if !line.trim().is_empty() {
                return Err(io_err(path, "trailing data in", format!("line {}", lineno + 2)));
            }
            continue;
        }
        let mut count = 0;
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| io_err(path, "bad value in", format!("line {}: {e}", lineno + 2)))?;
            data.push(v);
            count += 1;
        }
        if count != cols {
            return Err(io_err(
                path,
                "wrong entry count in",
                format!("line {}: got {count}, want {cols}", lineno + 2),
            ));
        }
    }
    if data.len() != rows * cols {
        return Err(io_err(
            path,
            "wrong row count in",
            format!("got {}, want {rows}", data.len() / cols.max(1)),
        ));
    }
    Matrix::from_vec(rows, cols, data).map_err(|e| io_err(path, "invalid matrix in", e))
}

pub fn write_selection(path: &Path, sel: &RowSelection) -> Result<(), ConfigError> {
    let mut text = String::new();
    for (i, s) in sel.indices.iter().zip(&sel.scales) {
        let _ = writeln!(text, "{i},{}", format_value(*s));
    }
    fs::write(path, text).map_err(|e| io_err(path, "cannot write", e))
}

pub fn read_selection(path: &Path) -> Result<RowSelection, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, "cannot read", e))?;
    let mut indices = Vec::new();
    let mut scales = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (i, s) = line
            .split_once(',')
            .ok_or_else(|| io_err(path, "bad selection line in", format!("line {}", lineno + 1)))?;
        indices.push(
            i.trim()
                .parse()
                .map_err(|e| io_err(path, "bad index in", format!("line {}: {e}", lineno + 1)))?,
        );
        scales.push(
            s.trim()
                .parse()
                .map_err(|e| io_err(path, "bad scale in", format!("line {}: {e}", lineno + 1)))?,
        );
    }
    let nnz = indices.len();
    Ok(RowSelection { indices, scales, nnz })
}

/// A CSV report: fixed column count, header row, data rows, one trailing
/// summary row.
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv { columns: header.len(), text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    /// Write to `path`, or to stdout when no path is given.
    pub fn finish(self, path: Option<&Path>) -> Result<(), ConfigError> {
        match path {
            Some(p) => fs::write(p, self.text).map_err(|e| io_err(p, "cannot write", e)),
            None => {
                print!("{}", self.text);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stablesketch::rng;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("ssfiles{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn matrix_roundtrip_is_exact() {
        let mut r = rng::rng_from(1);
        let mut buf = vec![0.0; 5 * 3];
        rng::fill_normal(&mut r, &mut buf);
        buf[0] = 1.0 / 3.0;
        buf[1] = -0.0;
        buf[2] = 1e-300;
        let m = Matrix::from_vec(5, 3, buf).unwrap();
        let path = tmp("roundtrip.txt");
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(
            m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            back.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        );
    }

    #[test]
    fn malformed_matrices_are_rejected() {
        let path = tmp("bad.txt");
        fs::write(&path, "2,2\n1.0,2.0\n3.0\n").unwrap();
        assert!(read_matrix(&path).is_err());
        fs::write(&path, "2,x\n").unwrap();
        assert!(read_matrix(&path).is_err());
        fs::write(&path, "1,2\n1.0,oops\n").unwrap();
        assert!(read_matrix(&path).is_err());
    }

    #[test]
    fn selection_roundtrip() {
        let sel = RowSelection {
            indices: vec![0, 3, 17],
            scales: vec![0.5, 1.25, 2.0f64.sqrt()],
            nnz: 3,
        };
        let path = tmp("sel.txt");
        write_selection(&path, &sel).unwrap();
        assert_eq!(read_selection(&path).unwrap(), sel);
    }
}
