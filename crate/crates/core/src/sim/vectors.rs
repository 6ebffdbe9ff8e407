// SPDX-License-Identifier: Apache-2.0

//! Stimulus/response text files: one `M`-bit hex vector per line with lane
//! `M-1` as the most significant bit, `#` starting a comment, and a blank
//! line closing a frame.

use std::fmt::Write;

use thiserror::Error;

use crate::polar::BitVector;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct VectorFileError {
    pub line: usize,
    pub message: String,
}

/// Hex text for one slice, `M/4` digits (at least one).
pub fn slice_to_hex(slice: &BitVector) -> String {
    let digits = slice.len().div_ceil(4).max(1);
    (0..digits)
        .rev()
        .map(|d| {
            let nibble = (0..4)
                .filter(|&b| {
                    let lane = 4 * d + b;
                    lane < slice.len() && slice.get(lane)
                })
                .fold(0u32, |acc, b| acc | 1 << b);
            char::from_digit(nibble, 16).expect("nibble < 16")
        })
        .collect()
}

/// Parses `M/4` hex digits into an `M`-lane slice.
pub fn slice_from_hex(text: &str, lanes: usize) -> Result<BitVector, String> {
    let digits = lanes.div_ceil(4).max(1);
    if text.len() != digits {
        return Err(format!(
            "expected {digits} hex digits for {lanes} lanes, found {}",
            text.len()
        ));
    }
    let mut slice = BitVector::zeros(lanes);
    for (pos, ch) in text.chars().rev().enumerate() {
        let nibble = ch
            .to_digit(16)
            .ok_or_else(|| format!("'{ch}' is not a hex digit"))?;
        for b in 0..4 {
            if nibble >> b & 1 == 1 {
                let lane = 4 * pos + b;
                if lane >= lanes {
                    return Err(format!("value does not fit in {lanes} lanes"));
                }
                slice.set(lane, true);
            }
        }
    }
    Ok(slice)
}

/// Serializes frames of slices, each frame followed by a blank line.
pub fn format_vectors(header: &str, frames: &[Vec<BitVector>]) -> String {
    let mut out = String::new();
    for line in header.lines() {
        writeln!(out, "# {line}").unwrap();
    }
    for (i, frame) in frames.iter().enumerate() {
        writeln!(out, "# frame {i}").unwrap();
        for slice in frame {
            writeln!(out, "{}", slice_to_hex(slice)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a vector file into frames. Consecutive blank lines collapse;
/// comment-only lines neither add a vector nor close a frame.
pub fn parse_vectors(text: &str, lanes: usize) -> Result<Vec<Vec<BitVector>>, VectorFileError> {
    let mut frames = Vec::new();
    let mut current = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let (body, has_comment) = match raw.find('#') {
            Some(pos) => (&raw[..pos], true),
            None => (raw, false),
        };
        let body = body.trim();
        if body.is_empty() {
            if !has_comment && !current.is_empty() {
                frames.push(std::mem::take(&mut current));
            }
            continue;
        }
        let slice = slice_from_hex(body, lanes).map_err(|message| VectorFileError {
            line: idx + 1,
            message,
        })?;
        current.push(slice);
    }
    if !current.is_empty() {
        frames.push(current);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_msb_is_last_lane() {
        let mut s = BitVector::zeros(8);
        s.set(7, true);
        s.set(0, true);
        assert_eq!(slice_to_hex(&s), "81");
        assert_eq!(slice_from_hex("81", 8).unwrap(), s);
        assert_eq!(slice_to_hex(&BitVector::unit(4, 1)), "2");
    }

    #[test]
    fn parse_frames_and_comments() {
        let text = "# header\n1\n2 # trailing\n\n\n# frame 1\n3\n4\n";
        let frames = parse_vectors(text, 4).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0][1], BitVector::unit(4, 1));
        assert_eq!(frames[1].len(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_vectors("# ok\n0f\nzz\n", 8).unwrap_err();
        assert_eq!(err.line, 3);
        let err = parse_vectors("0\n123\n", 4).unwrap_err();
        assert_eq!(err.line, 2);
        assert!(parse_vectors("", 4).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn round_trip(frames in proptest::collection::vec(
            proptest::collection::vec(
                proptest::collection::vec(any::<bool>(), 16).prop_map(BitVector::from), 1..5),
            0..4)) {
            let text = format_vectors("polar stimulus\nN=? M=16", &frames);
            prop_assert_eq!(parse_vectors(&text, 16).unwrap(), frames);
        }
    }
}
