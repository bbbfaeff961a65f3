//! Netpbm (PGM/PPM) and PNG readers, plus PGM/PPM writers.
//!
//! Images are row-major with the origin at the top-left. Samples with a
//! `maxval` below 255 are linearly rescaled to the 8-bit range using
//! round-half-up, so `v * 255 / maxval` lands on the nearest integer.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("truncated pixel data: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported bit depth: maxval {0} exceeds 255")]
    UnsupportedDepth(u32),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid dimensions {width}x{height}")]
    Dimensions { width: usize, height: usize },
}

fn parse_err(offset: usize, reason: impl Into<String>) -> ImageError {
    ImageError::Parse {
        offset,
        reason: reason.into(),
    }
}

/// An 8-bit grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(ImageError::Dimensions { width, height });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    /// Photographic negative, used for superlevel-set analysis.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| 255 - v).collect(),
        }
    }
}

/// An 8-bit-per-channel RGB raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ImageError::Dimensions { width, height });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }
}

/// Netpbm sample encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PnmMode {
    Ascii,
    #[default]
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgbFormat {
    Ppm,
    Png,
}

impl RgbFormat {
    /// Guess the format from the leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(Self::Png)
        } else if bytes.starts_with(b"P3") || bytes.starts_with(b"P6") {
            Some(Self::Ppm)
        } else {
            None
        }
    }
}

struct PnmHeader {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    /// Offset of the first payload byte (after the single whitespace that
    /// terminates `maxval`).
    data_start: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                parse_err(start, format!("unexpected end of input reading {what}"))
            } else {
                parse_err(start, format!("expected {what}"))
            });
        }
        // Only ASCII digits were consumed.
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse()
            .map_err(|_| parse_err(start, format!("{what} out of range")))
    }
}

fn read_header(bytes: &[u8], accepted: &[&[u8; 2]]) -> Result<PnmHeader, ImageError> {
    if bytes.len() < 2 {
        return Err(parse_err(0, "missing magic number"));
    }
    let magic = [bytes[0], bytes[1]];
    if !accepted.iter().any(|m| **m == magic) {
        return Err(parse_err(
            0,
            format!("unexpected magic {:?}", String::from_utf8_lossy(&magic)),
        ));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(parse_err(2, "expected whitespace after magic"));
    }
    let width = cur.read_uint("width")? as usize;
    let height = cur.read_uint("height")? as usize;
    let maxval_offset = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(maxval_offset, "zero image dimension"));
    }
    if maxval == 0 {
        return Err(parse_err(maxval_offset, "maxval must be positive"));
    }
    if maxval > 255 {
        return Err(ImageError::UnsupportedDepth(maxval));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(parse_err(cur.pos, "expected whitespace after maxval")),
        // An empty payload is reported as truncation by the caller.
        None => {}
    }
    Ok(PnmHeader {
        magic,
        width,
        height,
        maxval,
        data_start: cur.pos,
    })
}

/// Rescale a sample from `[0, maxval]` to `[0, 255]`, rounding half up.
fn rescale(v: u32, maxval: u32) -> u8 {
    if maxval == 255 {
        v as u8
    } else {
        ((2 * v * 255 + maxval) / (2 * maxval)) as u8
    }
}

fn read_samples(bytes: &[u8], header: &PnmHeader, count: usize) -> Result<Vec<u8>, ImageError> {
    let ascii = matches!(&header.magic, b"P2" | b"P3");
    let mut out = Vec::with_capacity(count);
    if ascii {
        let mut cur = Cursor {
            bytes,
            pos: header.data_start,
        };
        for found in 0..count {
            cur.skip_whitespace_and_comments();
            if cur.pos >= bytes.len() {
                return Err(ImageError::Truncated {
                    expected: count,
                    found,
                });
            }
            let offset = cur.pos;
            let v = cur.read_uint("sample")?;
            if v > header.maxval {
                return Err(parse_err(offset, format!("sample {v} exceeds maxval")));
            }
            out.push(rescale(v, header.maxval));
        }
    } else {
        let payload = &bytes[header.data_start.min(bytes.len())..];
        if payload.len() < count {
            return Err(ImageError::Truncated {
                expected: count,
                found: payload.len(),
            });
        }
        for (i, &v) in payload[..count].iter().enumerate() {
            if u32::from(v) > header.maxval {
                return Err(parse_err(
                    header.data_start + i,
                    format!("sample {v} exceeds maxval"),
                ));
            }
            out.push(rescale(u32::from(v), header.maxval));
        }
    }
    Ok(out)
}

/// Parse a P2 or P5 graymap.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let header = read_header(bytes, &[b"P2", b"P5"])?;
    let count = header.width * header.height;
    let values = read_samples(bytes, &header, count)?;
    GrayImage::new(header.width, header.height, values)
}

/// Serialize with `maxval` 255.
pub fn write_pgm(img: &GrayImage, mode: PnmMode) -> Vec<u8> {
    let magic = match mode {
        PnmMode::Ascii => "P2",
        PnmMode::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    match mode {
        PnmMode::Binary => out.extend_from_slice(&img.values),
        PnmMode::Ascii => write_ascii_rows(&mut out, &img.values, img.width),
    }
    out
}

pub fn write_ppm(img: &RgbImage, mode: PnmMode) -> Vec<u8> {
    let magic = match mode {
        PnmMode::Ascii => "P3",
        PnmMode::Binary => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    let flat: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    match mode {
        PnmMode::Binary => out.extend_from_slice(&flat),
        PnmMode::Ascii => write_ascii_rows(&mut out, &flat, img.width * 3),
    }
    out
}

fn write_ascii_rows(out: &mut Vec<u8>, samples: &[u8], row_len: usize) {
    for row in samples.chunks(row_len) {
        let line = row
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
}

pub fn read_ppm(bytes: &[u8]) -> Result<RgbImage, ImageError> {
    let header = read_header(bytes, &[b"P3", b"P6"])?;
    let count = header.width * header.height;
    let samples = read_samples(bytes, &header, count * 3)?;
    let pixels = samples
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    RgbImage::new(header.width, header.height, pixels)
}

fn read_png(bytes: &[u8]) -> Result<RgbImage, ImageError> {
    use png::{BitDepth, ColorType, Transformations};

    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    // Palette and sub-byte grayscale images are widened to 8 bits.
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| parse_err(0, format!("png: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| parse_err(0, format!("png: {e}")))?;
    if info.bit_depth != BitDepth::Eight {
        return Err(ImageError::UnsupportedFormat(format!(
            "png bit depth {:?}",
            info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let pixels: Vec<[u8; 3]> = match info.color_type {
        ColorType::Rgb => data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        ColorType::Grayscale => data.iter().map(|&v| [v, v, v]).collect(),
        other => {
            return Err(ImageError::UnsupportedFormat(format!(
                "png color type {other:?}"
            )))
        }
    };
    RgbImage::new(width, height, pixels)
}

/// Read an RGB image in the declared format.
pub fn read_rgb(bytes: &[u8], format: RgbFormat) -> Result<RgbImage, ImageError> {
    match format {
        RgbFormat::Ppm => read_ppm(bytes),
        RgbFormat::Png => read_png(bytes),
    }
}
