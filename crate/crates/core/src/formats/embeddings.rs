//! Embedding tables: one `id v1 v2 ... vD` line per vector. Every line must
//! carry the same dimension.

use std::io::BufRead;

use crate::model::Embedding;

use super::{FormatError, Result};

/// Parse an embedding table, keeping line order.
pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<Vec<(String, Embedding)>> {
    let mut out: Vec<(String, Embedding)> = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields
            .next()
            .ok_or_else(|| FormatError::Malformed { line: lineno, message: "empty line".into() })?
            .to_string();
        let mut values = Vec::new();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| {
                FormatError::invalid("component", lineno, format!("not a number: {f}"))
            })?;
            values.push(v);
        }
        if values.is_empty() {
            return Err(FormatError::Malformed {
                line: lineno,
                message: "embedding must have at least one component".into(),
            });
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(FormatError::invalid(
                    "dimension",
                    lineno,
                    format!("expected {d} components, got {}", values.len()),
                ))
            }
            _ => {}
        }
        out.push((id, Embedding::new(values)));
    }
    Ok(out)
}

/// Serialize an embedding table.
pub fn write_embeddings(rows: &[(String, Embedding)]) -> String {
    let mut out = String::new();
    for (id, emb) in rows {
        out.push_str(id);
        for v in &emb.values {
            out.push(' ');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_two_rows() {
        let rows = parse_embeddings("u1 0.5 -0.25 1\nu2 0 1 2\n".as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, "u1");
        assert_eq!(rows[0].1.values, vec![0.5, -0.25, 1.0]);
        assert_eq!(rows[0].1.dim, 3);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = parse_embeddings("u1 1 2 3\nu2 1 2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("dimension"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn non_numeric_component_is_rejected() {
        let err = parse_embeddings("u1 1 x\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("component"), "{err}");
    }

    #[test]
    fn id_without_components_is_rejected() {
        assert!(parse_embeddings("u1\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![
            ("a".to_string(), Embedding::new(vec![0.1, -2.5e-3, 7.0])),
            ("b".to_string(), Embedding::new(vec![1.0, 2.0, 3.0])),
        ];
        let text = write_embeddings(&rows);
        let back = parse_embeddings(text.as_bytes()).unwrap();
        assert_eq!(back, rows);
    }
}
