//! Matrix Market coordinate I/O for symmetric real operators.
//!
//! Files are written in `symmetric` form (lower triangle only, column-major,
//! 1-based) with a `% backend:` comment so the discretization survives a round
//! trip. Values use the shortest representation that parses back to the same
//! bits, so rewriting an operator is byte-identical.
//!
//! The reader also accepts `general` files. Either way the assembled matrix
//! must be exactly symmetric. In a `symmetric` file only lower entries are
//! mirrored, so a stray upper-triangle entry unbalances its pair and is
//! reported as an asymmetry.

use std::fmt::Write as _;
use std::path::Path;

use super::{Backend, SymmetricOperator};
use crate::error::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

pub fn to_string(op: &SymmetricOperator) -> String {
    let mut lower: Vec<(usize, usize, f64)> = op
        .matrix()
        .triplets()
        .filter(|&(i, j, _)| i >= j)
        .collect();
    lower.sort_by_key(|&(i, j, _)| (j, i));
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "% backend: {}", op.backend());
    let _ = writeln!(out, "{} {} {}", op.dim(), op.dim(), lower.len());
    for (i, j, v) in lower {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_file(op: &SymmetricOperator, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(op)).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: impl AsRef<Path>) -> Result<SymmetricOperator> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

fn parse_backend(s: &str) -> Option<Backend> {
    let s = s.trim();
    match s {
        "circle" => Some(Backend::Circle),
        "graph" => Some(Backend::Graph),
        _ => s
            .strip_prefix("heisenberg m=")
            .and_then(|m| m.trim().parse().ok())
            .map(|m| Backend::Heisenberg { m }),
    }
}

pub fn parse(text: &str) -> Result<SymmetricOperator> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("not a Matrix Market header: {header:?}"),
        });
    }
    if words[2] != "coordinate" || words[3] != "real" {
        return Err(Error::Parse {
            line: 1,
            msg: "only coordinate real matrices are supported".into(),
        });
    }
    let symmetric = match words[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported symmetry {other:?}"),
            })
        }
    };

    let mut backend = Backend::Graph;
    let mut size: Option<(usize, usize)> = None;
    let mut entries = Vec::new();
    let mut stored = 0usize;
    for (line_no, line) in lines {
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('%') {
            if let Some(b) = comment.trim().strip_prefix("backend:") {
                backend = parse_backend(b).ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("unknown backend {:?}", b.trim()),
                })?;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let bad = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(bad("size line needs rows, cols, nnz"));
                }
                let nums: Vec<usize> = fields
                    .iter()
                    .map(|f| f.parse().map_err(|_| bad("size line must be integers")))
                    .collect::<Result<_>>()?;
                if nums[0] != nums[1] {
                    return Err(bad("operator must be square"));
                }
                size = Some((nums[0], nums[2]));
                entries.reserve(nums[2] * 2);
            }
            Some((n, _)) => {
                if fields.len() != 3 {
                    return Err(bad("entry line needs row, col, value"));
                }
                let i: usize = fields[0].parse().map_err(|_| bad("bad row index"))?;
                let j: usize = fields[1].parse().map_err(|_| bad("bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| bad("bad value"))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(bad("index out of range"));
                }
                let (i, j) = (i - 1, j - 1);
                entries.push((i, j, v));
                stored += 1;
                if symmetric && i > j {
                    entries.push((j, i, v));
                }
            }
        }
    }
    let (n, nnz) = size.ok_or(Error::Parse {
        line: 0,
        msg: "missing size line".into(),
    })?;
    if stored != nnz {
        return Err(Error::Parse {
            line: 0,
            msg: format!("header promises {nnz} entries, found {stored}"),
        });
    }
    SymmetricOperator::from_entries(n, entries, backend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_circle_laplacian, build_graph_laplacian, build_grid, heisenberg_sublaplacian};

    #[test]
    fn circle_8_file_shape() {
        let op = build_circle_laplacian(8, 1.0).unwrap();
        let text = to_string(&op);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines[1], "% backend: circle");
        // 8 diagonal + 7 sub-diagonal + 1 wrap entry stored; 24 nonzeros in full.
        assert_eq!(lines[2], "8 8 16");
        assert_eq!(lines.len(), 3 + 16);
        assert_eq!(op.nnz(), 24);
        assert_eq!(lines[3], "1 1 2e0");
        assert_eq!(parse(&text).unwrap(), op);
    }

    #[test]
    fn round_trip_is_exact() {
        let h = 0.3;
        let grid = build_grid(1, 2.0 * h * h, 2.0 * h, h, 1000).unwrap();
        for op in [
            heisenberg_sublaplacian(&grid),
            build_graph_laplacian(4, &[(0, 1, 0.1), (1, 2, 1.0 / 3.0), (2, 3, 7.25)]).unwrap(),
        ] {
            let text = to_string(&op);
            let back = parse(&text).unwrap();
            assert_eq!(back, op);
            assert_eq!(to_string(&back), text);
        }
    }

    #[test]
    fn general_files_are_accepted_when_symmetric() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 1\n2 1 -1\n1 2 -1\n2 2 1\n";
        let op = parse(text).unwrap();
        assert_eq!(op.entry(0, 1), -1.0);
        assert_eq!(op.backend(), Backend::Graph);
    }

    #[test]
    fn asymmetric_entry_is_reported() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 1\n2 1 -1\n1 2 -0.5\n2 2 1\n";
        assert!(matches!(parse(text), Err(Error::Asymmetric { i: 0, j: 1, .. })));
        // explicit upper entry disagreeing with the mirrored lower one
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 4\n1 1 1\n2 1 -1\n1 2 -0.5\n2 2 1\n";
        assert!(matches!(parse(text), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
        assert!(matches!(
            parse("%%MatrixMarket matrix array real general\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
