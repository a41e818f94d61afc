//! Netpbm bitmap/graymap reader and writer (P1, P2, P4, P5).

use super::PlumeMask;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PnmError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} samples, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("unsupported maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
}

type Result<T> = std::result::Result<T, PnmError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    BitmapAscii,
    GraymapAscii,
    BitmapBinary,
    GraymapBinary,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments, which may appear between any header tokens.
    fn skip_ws_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn header_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Parses a netpbm bitmap or graymap into a plume mask.
///
/// Graymap samples at or above half scale (128 of 255) are plume; bitmap
/// set bits (netpbm "black") are plume.
pub fn parse_pnm(bytes: &[u8]) -> Result<PlumeMask> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(PnmError::MalformedHeader("missing magic number".into()));
    }
    let kind = match bytes[1] {
        b'1' => Kind::BitmapAscii,
        b'2' => Kind::GraymapAscii,
        b'4' => Kind::BitmapBinary,
        b'5' => Kind::GraymapBinary,
        other => {
            return Err(PnmError::MalformedHeader(format!(
                "unsupported magic P{}",
                char::from(other)
            )))
        }
    };
    let mut cur = Cursor { data: bytes, pos: 2 };
    if !cur.data.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(PnmError::MalformedHeader("magic number must be followed by whitespace".into()));
    }
    let width = cur.header_uint("width")?;
    let height = cur.header_uint("height")?;
    if width == 0 || height == 0 {
        return Err(PnmError::MalformedHeader("zero dimension".into()));
    }
    let maxval = match kind {
        Kind::GraymapAscii | Kind::GraymapBinary => {
            let m = cur.header_uint("maxval")?;
            if m == 0 || m > 65535 {
                return Err(PnmError::UnsupportedMaxval(m));
            }
            m
        }
        _ => 1,
    };
    let n = width as usize * height as usize;
    let is_plume = |v: u32| u64::from(v) * 255 >= 128 * u64::from(maxval);
    let pixels = match kind {
        Kind::BitmapAscii => {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                cur.skip_ws_and_comments();
                match cur.data.get(cur.pos) {
                    Some(b'0') => out.push(false),
                    Some(b'1') => out.push(true),
                    Some(&b) => {
                        return Err(PnmError::InvalidSample(format!("unexpected byte {b:#04x} in bitmap")))
                    }
                    None => return Err(PnmError::TruncatedPayload { expected: n, got: out.len() }),
                }
                cur.pos += 1;
            }
            out
        }
        Kind::GraymapAscii => {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                cur.skip_ws_and_comments();
                if cur.pos >= cur.data.len() {
                    return Err(PnmError::TruncatedPayload { expected: n, got: out.len() });
                }
                let v = cur
                    .header_uint("sample")
                    .map_err(|_| PnmError::InvalidSample(format!("bad sample at byte {}", cur.pos)))?;
                if v > maxval {
                    return Err(PnmError::InvalidSample(format!("sample {v} exceeds maxval {maxval}")));
                }
                out.push(is_plume(v));
            }
            out
        }
        Kind::BitmapBinary | Kind::GraymapBinary => {
            // exactly one whitespace byte separates the header from the raster
            match cur.data.get(cur.pos) {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                _ => return Err(PnmError::MalformedHeader("missing separator before raster".into())),
            }
            let raster = &cur.data[cur.pos..];
            if kind == Kind::BitmapBinary {
                let row_bytes = (width as usize).div_ceil(8);
                let need = row_bytes * height as usize;
                if raster.len() < need {
                    let got = raster.len() / row_bytes * width as usize;
                    return Err(PnmError::TruncatedPayload { expected: n, got });
                }
                let mut out = Vec::with_capacity(n);
                for row in raster[..need].chunks_exact(row_bytes) {
                    out.extend((0..width as usize).map(|c| row[c / 8] & (0x80 >> (c % 8)) != 0));
                }
                out
            } else if maxval < 256 {
                if raster.len() < n {
                    return Err(PnmError::TruncatedPayload { expected: n, got: raster.len() });
                }
                raster[..n].iter().map(|&v| is_plume(u32::from(v))).collect()
            } else {
                if raster.len() < 2 * n {
                    return Err(PnmError::TruncatedPayload { expected: n, got: raster.len() / 2 });
                }
                raster[..2 * n]
                    .chunks_exact(2)
                    .map(|b| is_plume(u32::from(u16::from_be_bytes([b[0], b[1]]))))
                    .collect()
            }
        }
    };
    Ok(PlumeMask::from_pixels(width, height, pixels))
}

/// Binary graymap, plume = 255.
pub fn encode_pgm_binary(mask: &PlumeMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.pixels().iter().map(|&p| if p { 255u8 } else { 0 }));
    out
}

/// ASCII graymap, plume = 255, one raster row per line.
pub fn encode_pgm_ascii(mask: &PlumeMask) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", mask.width(), mask.height());
    for row in mask.pixels().chunks(mask.width() as usize) {
        let line: Vec<&str> = row.iter().map(|&p| if p { "255" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

/// Packed bitmap, plume = set bit.
pub fn encode_pbm(mask: &PlumeMask) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width(), mask.height()).into_bytes();
    let w = mask.width() as usize;
    for row in mask.pixels().chunks(w) {
        let mut bytes = vec![0u8; w.div_ceil(8)];
        for (c, _) in row.iter().enumerate().filter(|(_, &p)| p) {
            bytes[c / 8] |= 0x80 >> (c % 8);
        }
        out.extend(bytes);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_ascii_graymap() {
        let m = parse_pnm(b"P2 2 1 255\n255 0").unwrap();
        assert_eq!((m.width(), m.height()), (2, 1));
        assert_eq!(m.pixels(), &[true, false]);
    }

    #[test]
    fn binary_graymap_all_plume() {
        let mut bytes = b"P5\n4 3\n255\n".to_vec();
        bytes.extend([255u8; 12]);
        let m = parse_pnm(&bytes).unwrap();
        assert_eq!(m.count(), 12);
    }

    #[test]
    fn comments_are_skipped_anywhere_in_header() {
        let src = b"P2\n# made by hand\n3 # width\n# height next\n1\n# maxval\n255\n0 128 127\n";
        let m = parse_pnm(src).unwrap();
        assert_eq!(m.pixels(), &[false, true, false]);
    }

    #[test]
    fn binary_data_after_comment_in_header() {
        let mut bytes = b"P5\n#c\n2 2\n#c2\n255\n".to_vec();
        bytes.extend([0u8, 200, 35, 128]);
        let m = parse_pnm(&bytes).unwrap();
        assert_eq!(m.pixels(), &[false, true, false, true]);
    }

    #[test]
    fn sixteen_bit_graymap() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend([0x80, 0x80, 0x80, 0x7f]);
        let m = parse_pnm(&bytes).unwrap();
        assert_eq!(m.pixels(), &[true, false]);
    }

    #[test]
    fn maxval_one_graymap() {
        let m = parse_pnm(b"P2 3 1 1\n1 0 1").unwrap();
        assert_eq!(m.pixels(), &[true, false, true]);
    }

    #[test]
    fn ascii_bitmap_without_separators() {
        let m = parse_pnm(b"P1\n5 2\n10100\n0 0 0 1 1\n").unwrap();
        assert_eq!(
            m.pixels(),
            &[true, false, true, false, false, false, false, false, true, true]
        );
    }

    #[test]
    fn packed_bitmap_rows_are_byte_padded() {
        // width 10 -> 2 bytes per row
        let mut bytes = b"P4\n10 2\n".to_vec();
        bytes.extend([0b1000_0000, 0b0100_0000, 0b0000_0001, 0b1100_0000]);
        let m = parse_pnm(&bytes).unwrap();
        let row0: Vec<bool> = (0..10).map(|c| m.get(c, 0)).collect();
        let row1: Vec<bool> = (0..10).map(|c| m.get(c, 1)).collect();
        assert_eq!(row0, [true, false, false, false, false, false, false, false, false, true]);
        assert_eq!(row1, [false, false, false, false, false, false, false, true, true, true]);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(parse_pnm(b"P6 1 1 255\n\0\0\0"), Err(PnmError::MalformedHeader(_))));
        assert!(matches!(parse_pnm(b"hello"), Err(PnmError::MalformedHeader(_))));
        assert!(matches!(parse_pnm(b"P2 2"), Err(PnmError::MalformedHeader(_))));
        assert!(matches!(parse_pnm(b"P2 1 1 70000 5"), Err(PnmError::UnsupportedMaxval(70000))));
        assert!(matches!(parse_pnm(b"P2 1 1 0 0"), Err(PnmError::UnsupportedMaxval(0))));
        assert!(matches!(
            parse_pnm(b"P5 2 2 255\n\x01\x02"),
            Err(PnmError::TruncatedPayload { expected: 4, got: 2 })
        ));
        assert!(matches!(parse_pnm(b"P2 2 1 255 3"), Err(PnmError::TruncatedPayload { .. })));
        assert!(matches!(parse_pnm(b"P2 1 1 100 101"), Err(PnmError::InvalidSample(_))));
        assert!(matches!(parse_pnm(b"P1 1 1 2"), Err(PnmError::InvalidSample(_))));
        assert!(matches!(parse_pnm(b"P4 9 1\n\xff"), Err(PnmError::TruncatedPayload { .. })));
    }

    fn arb_mask() -> impl Strategy<Value = PlumeMask> {
        (1u32..20, 1u32..20).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), (w * h) as usize)
                .prop_map(move |px| PlumeMask::from_pixels(w, h, px))
        })
    }

    proptest! {
        #[test]
        fn encoders_round_trip(mask in arb_mask()) {
            for bytes in [encode_pgm_binary(&mask), encode_pgm_ascii(&mask), encode_pbm(&mask)] {
                let back = parse_pnm(&bytes).unwrap();
                prop_assert_eq!(back.pixels(), mask.pixels());
                prop_assert_eq!(back.width(), mask.width());
            }
        }
    }
}
