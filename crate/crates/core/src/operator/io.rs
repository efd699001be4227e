//! Plain-text matrix blocks.
//!
//! ```text
//! cmat <label> <rows> <cols>
//! re im re im ...        one line per matrix row
//! ```
//!
//! Numbers use the shortest representation that round-trips exactly, so a
//! write/read cycle reproduces every bit.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;

use super::{CMat, C64};
use crate::error::{Error, Result};

pub fn write_matrices<W: Write>(mut out: W, blocks: &[(&str, &CMat)]) -> Result<()> {
    for (label, m) in blocks {
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(Error::Format(format!("label {label:?} must be one nonempty word")));
        }
        let (r, c) = m.dim();
        writeln!(out, "cmat {label} {r} {c}")?;
        let mut line = String::new();
        for row in m.rows() {
            line.clear();
            for (j, z) in row.iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:?} {:?}", z.re, z.im));
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

pub fn read_matrices<R: BufRead>(input: R) -> Result<Vec<(String, CMat)>> {
    let mut lines = input.lines().enumerate();
    let mut out = Vec::new();
    while let Some((no, line)) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let head: Vec<&str> = line.split_whitespace().collect();
        if head.len() != 4 || head[0] != "cmat" {
            return Err(Error::Format(format!("line {}: expected `cmat <label> <rows> <cols>`", no + 1)));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("line {}: bad dimension {s:?}", no + 1)))
        };
        let (r, c) = (parse_dim(head[2])?, parse_dim(head[3])?);
        let mut m = Array2::zeros((r, c));
        for i in 0..r {
            let (rno, row) = lines
                .next()
                .ok_or_else(|| Error::Format(format!("block {}: missing row {i}", head[1])))?;
            let row = row?;
            let nums: Vec<f64> = row
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", rno + 1)))?;
            if nums.len() != 2 * c {
                return Err(Error::Format(format!(
                    "line {}: expected {} numbers, found {}",
                    rno + 1,
                    2 * c,
                    nums.len()
                )));
            }
            for j in 0..c {
                m[[i, j]] = C64::new(nums[2 * j], nums[2 * j + 1]);
            }
        }
        out.push((head[1].to_string(), m));
    }
    Ok(out)
}

pub fn write_file(path: &Path, blocks: &[(&str, &CMat)]) -> Result<()> {
    let mut buf = Vec::new();
    write_matrices(&mut buf, blocks)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<(String, CMat)>> {
    let f = std::fs::File::open(path)?;
    read_matrices(std::io::BufReader::new(f))
}

/// The block called `label`, or a format error naming it.
pub fn take_block(blocks: &[(String, CMat)], label: &str) -> Result<CMat> {
    blocks
        .iter()
        .find(|(l, _)| l == label)
        .map(|(_, m)| m.clone())
        .ok_or_else(|| Error::Format(format!("missing block {label:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::c;
    use ndarray::array;

    #[test]
    fn round_trip_is_exact() {
        let a = array![[c(0.1, -1.0 / 3.0), c(1e-300, 2.5e10)], [c(-0.0, f64::MIN_POSITIVE), c(1.0, 0.0)]];
        let b = array![[c(std::f64::consts::PI, 0.0)]];
        let mut buf = Vec::new();
        write_matrices(&mut buf, &[("A", &a), ("B", &b)]).unwrap();
        let back = read_matrices(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "A");
        assert_eq!(back[0].1, a);
        assert_eq!(back[1].1, b);
        assert_eq!(take_block(&back, "B").unwrap(), b);
        assert!(take_block(&back, "C").is_err());
    }

    #[test]
    fn header_layout() {
        let a = array![[c(1.0, 2.0)]];
        let mut buf = Vec::new();
        write_matrices(&mut buf, &[("U", &a)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "cmat U 1 1\n1.0 2.0\n");
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(read_matrices("cmat A 1 2\n1 2 3\n".as_bytes()).is_err());
        assert!(read_matrices("mat A 1 1\n1 2\n".as_bytes()).is_err());
        assert!(read_matrices("cmat A 2 1\n1 2\n".as_bytes()).is_err());
        assert!(read_matrices("cmat A 1 1\n1 x\n".as_bytes()).is_err());
    }
}
