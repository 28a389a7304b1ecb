//! Report emission: JSON documents and LF-terminated CSV tables.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Serialises `rows` as CSV with a header row taken from the field names.
pub fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Writes to `path`, or to standard output when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: f64,
        b: bool,
    }

    #[test]
    fn csv_uses_lf_and_shortest_floats() {
        let bytes = csv_rows(&[Row { a: 0.1, b: true }, Row { a: 1.0 / 3.0, b: false }]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "a,b\n0.1,true\n0.3333333333333333,false\n");
        let back: f64 = text.lines().nth(2).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn json_ends_with_newline() {
        assert!(json(&[1.5, 2.0]).unwrap().ends_with(b"]\n"));
    }
}
