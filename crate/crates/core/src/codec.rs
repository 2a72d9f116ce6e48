//! Little-endian byte helpers shared by the dataset and model file formats,
//! plus `%g`-style number formatting for text exports.

use crate::error::{Error, Result};

pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 8);
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8], what: &'static str) -> Self {
        Self { data, pos: 0, what }
    }

    pub fn error(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            what: self.what,
            reason: reason.into(),
        }
    }

    pub fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| self.error("length overflow"))?;
        if end > self.data.len() {
            return Err(self.error(format!(
                "truncated: {field} needs bytes [{}, {end}) but input ends at byte {}",
                self.pos,
                self.data.len()
            )));
        }
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self, field: &str) -> Result<u8> {
        Ok(self.take(1, field)?[0])
    }

    pub fn u16(&mut self, field: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, field)?.try_into().unwrap()))
    }

    pub fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    pub fn f64(&mut self, field: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, count: usize, field: &str) -> Result<Vec<f64>> {
        let raw = self.take(
            count.checked_mul(8).ok_or_else(|| self.error("length overflow"))?,
            field,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(self.error(format!(
                "{} trailing bytes after byte {}",
                self.data.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }
}

/// Formats `v` with `digits` significant digits the way C's `%.{digits}g` does:
/// fixed notation for moderate exponents, scientific otherwise, trailing zeros
/// removed.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_sig_matches_printf_g() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(0.13, 9), "0.13");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(998.0, 9), "998");
        assert_eq!(format_sig(49.9, 9), "49.9");
        assert_eq!(format_sig(-0.075, 9), "-0.075");
        assert_eq!(format_sig(1.5e-7, 9), "1.5e-07");
        assert_eq!(format_sig(123456789012.0, 9), "1.23456789e+11");
        assert_eq!(format_sig(0.0001234, 3), "0.000123");
        assert_eq!(format_sig(99999.99999, 3), "1e+05");
    }

    #[test]
    fn reader_reports_missing_range() {
        let data = [1u8, 2, 3];
        let mut r = ByteReader::new(&data, "test");
        assert_eq!(r.u16("a").unwrap(), 0x0201);
        let err = r.u32("b").unwrap_err().to_string();
        assert!(err.contains("[2, 6)"), "{err}");
        assert!(err.contains("ends at byte 3"), "{err}");
    }
}
