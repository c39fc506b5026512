//! Text embedding format.
//!
//! ```text
//! <count> <dim>[ context]
//! <token> <f64> ... <f64>
//! ```
//!
//! One row per token, space separated, UTF-8. When the header carries the
//! `context` marker each row holds `2 * dim` floats: the target vector
//! followed by the context vector. Floats use the shortest representation
//! that parses back to the same bits, so a save/load round trip is exact.

use std::io::{BufRead, Write};

use super::EmbeddingTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct SaveOptions {
    pub include_context: bool,
}

pub fn save_embeddings<W: Write>(
    table: &EmbeddingTable,
    mut out: W,
    options: SaveOptions,
) -> Result<()> {
    let ctx = if options.include_context {
        table.context_vectors()
    } else {
        None
    };
    let dim = table.dim();
    if ctx.is_some() {
        writeln!(out, "{} {} context", table.len(), dim)?;
    } else {
        writeln!(out, "{} {}", table.len(), dim)?;
    }
    let mut line = String::new();
    for (i, token) in table.tokens().iter().enumerate() {
        line.clear();
        line.push_str(token);
        let rows = std::iter::once(table.row(i))
            .chain(ctx.map(|c| &c[i * dim..(i + 1) * dim]));
        for row in rows {
            for x in row {
                line.push(' ');
                line.push_str(&x.to_string());
            }
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::EmbeddingFormat {
        line,
        message: message.into(),
    }
}

pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(1, "missing header"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim, with_context) = match fields.as_slice() {
        [c, d] => (c, d, false),
        [c, d, "context"] => (c, d, true),
        _ => return Err(format_err(1, "header must be '<count> <dim>[ context]'")),
    };
    let count: usize = count
        .parse()
        .map_err(|_| format_err(1, "bad row count"))?;
    let dim: usize = dim.parse().map_err(|_| format_err(1, "bad dim"))?;
    if dim == 0 {
        return Err(format_err(1, "dim must be positive"));
    }
    let width = if with_context { 2 * dim } else { dim };

    let mut tokens = Vec::with_capacity(count);
    let mut target = Vec::with_capacity(count * dim);
    let mut context = Vec::with_capacity(if with_context { count * dim } else { 0 });
    let mut rows = 0usize;
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        if rows > count {
            return Err(format_err(line_no, "row count mismatch"));
        }
        let mut parts = line.split(' ');
        let token = parts.next().unwrap_or_default();
        if token.is_empty() {
            return Err(format_err(line_no, "empty token"));
        }
        let values: Vec<f64> = parts
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| format_err(line_no, format!("bad float '{p}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != width {
            return Err(format_err(
                line_no,
                format!("expected {width} values, found {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(line_no, "non-finite value"));
        }
        tokens.push(token.to_string());
        target.extend_from_slice(&values[..dim]);
        if with_context {
            context.extend_from_slice(&values[dim..]);
        }
    }
    if rows != count {
        return Err(format_err(
            rows + 2,
            format!("row count mismatch: header says {count}, found {rows}"),
        ));
    }
    EmbeddingTable::new(dim, tokens, target, with_context.then_some(context))
}
