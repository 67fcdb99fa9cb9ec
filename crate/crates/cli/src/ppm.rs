//! Binary PPM (`P6`, maxval 255).

use discomp_core::vq::ImageBuffer;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PpmError {
    #[error("not a binary PPM")]
    Magic,
    #[error("bad header: {0}")]
    Header(String),
    #[error("only maxval 255 is supported, got {0}")]
    Maxval(u32),
    #[error("expected {expected} pixel bytes, got {actual}")]
    Size { expected: usize, actual: usize },
    #[error("PPM needs a 3-channel image, got {0}")]
    Channels(usize),
}

/// 8-bit RGB image as stored in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Rgb8 {
    pub fn from_image(img: &ImageBuffer) -> Result<Self, PpmError> {
        if img.channels() != 3 {
            return Err(PpmError::Channels(img.channels()));
        }
        let data = img.pixels().iter().map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        Ok(Self { width: img.width(), height: img.height(), data })
    }

    pub fn to_image(&self) -> ImageBuffer {
        let px = self.data.iter().map(|&b| b as f64 / 255.0).collect();
        ImageBuffer::new(self.height, self.width, 3, px).expect("consistent dimensions")
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PpmError> {
        if bytes.len() < 2 || &bytes[..2] != b"P6" {
            return Err(PpmError::Magic);
        }
        let mut pos = 2;
        let mut fields = [0u32; 3];
        for f in &mut fields {
            // whitespace and `#` comments between header fields
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    _ => break,
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
            *f = text.parse().map_err(|_| PpmError::Header(format!("expected a number at byte {start}")))?;
        }
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(PpmError::Header("missing separator before pixel data".into()));
        }
        pos += 1;
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(PpmError::Maxval(maxval));
        }
        let (width, height) = (width as usize, height as usize);
        let expected = width * height * 3;
        let data = &bytes[pos..];
        if data.len() != expected {
            return Err(PpmError::Size { expected, actual: data.len() });
        }
        Ok(Self { width, height, data: data.to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P6 # made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 2, 3, 4, 5]);
        let img = Rgb8::decode(&bytes).unwrap();
        assert_eq!((img.width, img.height), (2, 1));
        assert_eq!(img.data, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn rejects_other_formats() {
        assert_eq!(Rgb8::decode(b"P3\n1 1\n255\n"), Err(PpmError::Magic));
        assert_eq!(Rgb8::decode(b"P6\n1 1\n65535\n\0\0\0\0\0\0"), Err(PpmError::Maxval(65535)));
        assert!(matches!(Rgb8::decode(b"P6\n2 2\n255\n\0"), Err(PpmError::Size { .. })));
    }
}
