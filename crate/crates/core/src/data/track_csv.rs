use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sequence::{ExpressionTrack, EXPR_DIM};

fn header() -> String {
    let mut h = String::from("jaw");
    for k in 1..EXPR_DIM {
        h.push_str(&format!(",exp_{k}"));
    }
    h
}

/// CSV text for a track: a header line then one row of 51 values per frame.
///
/// Values use the shortest representation that parses back to the same `f32`
/// (at most 9 significant digits).
pub fn track_to_csv(track: &ExpressionTrack) -> String {
    let mut out = header();
    out.push('\n');
    for f in track.frames() {
        let row: Vec<String> = f.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_track(path: &Path, track: &ExpressionTrack) -> Result<()> {
    fs::write(path, track_to_csv(track))?;
    Ok(())
}

/// Parses CSV text; `path` only labels errors. Row numbers are 1-based file lines.
pub fn parse_track(text: &str, path: &Path) -> Result<ExpressionTrack> {
    let err = |row: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        msg,
    };
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if data.is_empty() && row == 1 && fields.first().is_some_and(|f| f.parse::<f32>().is_err()) {
            continue;
        }
        if fields.len() != EXPR_DIM {
            return Err(err(row, format!("expected {EXPR_DIM} columns, found {}", fields.len())));
        }
        for (c, f) in fields.iter().enumerate() {
            let v: f32 = f
                .parse()
                .map_err(|_| err(row, format!("column {}: {f:?} is not a number", c + 1)))?;
            if !v.is_finite() {
                return Err(err(row, format!("column {}: non-finite value", c + 1)));
            }
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(err(0, "no frames".into()));
    }
    ExpressionTrack::new(data)
}

pub fn read_track(path: &Path) -> Result<ExpressionTrack> {
    parse_track(&fs::read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let data: Vec<f32> = (0..3 * EXPR_DIM).map(|i| (i as f32 * 0.37).sin() * 1e-3 + 1.0 / 3.0).collect();
        let t = ExpressionTrack::new(data).unwrap();
        let back = parse_track(&track_to_csv(&t), Path::new("t.csv")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn headerless_accepted() {
        let row = vec!["0.5"; EXPR_DIM].join(",");
        let t = parse_track(&format!("{row}\n{row}\n"), Path::new("t.csv")).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn empty_rejected() {
        assert!(parse_track("", Path::new("e.csv")).is_err());
        assert!(parse_track(&(header() + "\n"), Path::new("e.csv")).is_err());
    }

    #[test]
    fn short_row_named() {
        let good = vec!["0"; EXPR_DIM].join(",");
        let bad = vec!["0"; 50].join(",");
        let text = format!("{}\n{good}\n{bad}\n", header());
        let e = parse_track(&text, Path::new("x.csv")).unwrap_err();
        match e {
            Error::Parse { row, ref msg, .. } => {
                assert_eq!(row, 3);
                assert!(msg.contains("50"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_rejected() {
        let mut fields = vec!["0"; EXPR_DIM];
        fields[4] = "abc";
        let e = parse_track(&format!("{}\n", fields.join(",")), Path::new("x.csv")).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 1, .. }));
    }
}
