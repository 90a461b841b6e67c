//! Binary PGM (`P5`) and PPM (`P6`) images with maxval 255 or 65535.
//!
//! Samples are linear values in `[0, 1]`, quantized by rounding. 16-bit
//! samples are big-endian as the format requires.

use crate::error::{Error, Result};

/// Decoded image, samples in `[0, 1]`, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 for PGM, 3 for PPM.
    pub channels: usize,
    pub samples: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Image(format!("{channels} channels")));
        }
        if samples.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for {width}x{height}x{channels}",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn gray(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, samples)
    }

    pub fn encode(&self, maxval: u16) -> Result<Vec<u8>> {
        if maxval != 255 && maxval != 65535 {
            return Err(Error::Image(format!("maxval {maxval}, expected 255 or 65535")));
        }
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n{maxval}\n", self.width, self.height).into_bytes();
        for &v in &self.samples {
            let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
            if maxval == 255 {
                out.push(q as u8);
            } else {
                out.extend_from_slice(&q.to_be_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Image("truncated header".into()));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Image("non-ASCII header".into()))?);
        }
        pos += 1;
        let channels = match fields[0] {
            "P5" => 1,
            "P6" => 3,
            other => return Err(Error::Image(format!("unsupported magic {other:?}"))),
        };
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Image(format!("bad header field {s:?}")));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Image(format!("maxval {maxval}")));
        }
        let wide = maxval > 255;
        let count = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::Image("dimensions overflow".into()))?;
        let need = count * if wide { 2 } else { 1 };
        let body = bytes.get(pos..).unwrap_or_default();
        if body.len() < need {
            return Err(Error::Image(format!("{} sample bytes, expected {need}", body.len())));
        }
        let samples = if wide {
            body[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval as f64)
                .collect()
        } else {
            body[..need].iter().map(|&b| b as f64 / maxval as f64).collect()
        };
        Self::new(width, height, channels, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let img = Image::gray(3, 2, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
        for maxval in [255, 65535] {
            let back = Image::decode(&img.encode(maxval).unwrap()).unwrap();
            assert_eq!(back.width, 3);
            for (a, b) in img.samples.iter().zip(&back.samples) {
                assert!((a - b).abs() <= 0.5 / maxval as f64);
            }
        }
        let rgb = Image::new(1, 1, 3, vec![1.0, 0.0, 0.5]).unwrap();
        let bytes = rgb.encode(255).unwrap();
        assert_eq!(bytes, b"P6\n1 1\n255\n\xff\x00\x80");
    }

    #[test]
    fn header_errors() {
        assert!(Image::decode(b"P5\n2 2\n255\n\x00").is_err());
        assert!(Image::decode(b"P3\n1 1\n255\n0").is_err());
        assert!(Image::decode(b"P5 # c\n1").is_err());
        let ok = Image::decode(b"P5\n# comment\n1 1\n255\n\x80").unwrap();
        assert_eq!(ok.samples, vec![128.0 / 255.0]);
        assert!(Image::gray(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::gray(1, 1, vec![0.0]).unwrap().encode(100).is_err());
    }
}
