//! Netpbm grey (P2/P5) and colour (P3/P6) images, plus binary masks stored
//! as 8-bit PGM with samples 0 and 255.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Dims, Image, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Magic {
    PgmAscii,
    PpmAscii,
    PgmBinary,
    PpmBinary,
}

impl Magic {
    fn channels(self) -> usize {
        match self {
            Magic::PgmAscii | Magic::PgmBinary => 1,
            Magic::PpmAscii | Magic::PpmBinary => 3,
        }
    }

    fn is_ascii(self) -> bool {
        matches!(self, Magic::PgmAscii | Magic::PpmAscii)
    }
}

/// Raw decoded samples before scaling.
struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    maxval: u32,
    samples: Vec<u32>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn header_number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader {
                offset: start,
                reason: if start >= self.buf.len() {
                    format!("unexpected end of file while reading {what}")
                } else {
                    format!("expected {what}")
                },
            });
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }
}

fn decode(buf: &[u8]) -> Result<Raster> {
    if buf.len() < 2 {
        return Err(Error::UnsupportedFormat {
            offset: 0,
            found: "file shorter than a magic number".into(),
        });
    }
    let magic = match &buf[..2] {
        b"P2" => Magic::PgmAscii,
        b"P3" => Magic::PpmAscii,
        b"P5" => Magic::PgmBinary,
        b"P6" => Magic::PpmBinary,
        other => {
            return Err(Error::UnsupportedFormat {
                offset: 0,
                found: format!("magic {:?}", String::from_utf8_lossy(other)),
            })
        }
    };
    let mut cur = Cursor { buf, pos: 2 };
    if cur.pos < buf.len() && !buf[cur.pos].is_ascii_whitespace() && buf[cur.pos] != b'#' {
        return Err(Error::MalformedHeader {
            offset: cur.pos,
            reason: "expected whitespace after magic".into(),
        });
    }
    let width_at = cur.pos;
    let width = cur.header_number("width")? as usize;
    let height = cur.header_number("height")? as usize;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader {
            offset: width_at,
            reason: format!("zero-sized image {width}x{height}"),
        });
    }
    let maxval_at = cur.pos;
    let maxval = cur.header_number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader {
            offset: maxval_at,
            reason: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let channels = magic.channels();
    let count = width * height * channels;

    let samples = if magic.is_ascii() {
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            cur.skip_space_and_comments();
            if cur.pos >= buf.len() {
                return Err(Error::TruncatedPayload {
                    offset: cur.pos,
                    expected: count - samples.len(),
                });
            }
            let at = cur.pos;
            let v = cur.header_number("sample").map_err(|_| Error::InvalidSample {
                offset: at,
                reason: "not a decimal sample".into(),
            })?;
            if v > maxval {
                return Err(Error::InvalidSample {
                    offset: at,
                    reason: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            samples.push(v);
        }
        samples
    } else {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= buf.len() || !buf[cur.pos].is_ascii_whitespace() {
            return Err(Error::MalformedHeader {
                offset: cur.pos,
                reason: "expected single whitespace before raster".into(),
            });
        }
        cur.pos += 1;
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        let payload = &buf[cur.pos..];
        if payload.len() < count * bytes_per {
            return Err(Error::TruncatedPayload {
                offset: buf.len(),
                expected: count * bytes_per - payload.len(),
            });
        }
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            let v = if bytes_per == 2 {
                u32::from(u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]))
            } else {
                u32::from(payload[i])
            };
            if v > maxval {
                return Err(Error::InvalidSample {
                    offset: cur.pos + i * bytes_per,
                    reason: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            samples.push(v);
        }
        samples
    };

    Ok(Raster {
        width,
        height,
        channels,
        maxval,
        samples,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Decodes an in-memory PGM/PPM, scaling samples by `1 / maxval`.
pub fn decode_image(buf: &[u8]) -> Result<Image> {
    let r = decode(buf)?;
    let scale = f64::from(r.maxval);
    let data = r.samples.iter().map(|&s| f64::from(s) / scale).collect();
    Image::new(r.width, r.height, r.channels, data)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&read_file(path.as_ref())?)
}

#[inline]
fn quantise(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes as 8-bit binary PGM (1 channel) or PPM (3 channels).
pub fn encode_image(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantise(v)));
    out
}

/// Plain-text variant (P2/P3) of [`encode_image`].
pub fn encode_image_ascii(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P2" } else { "P3" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let row = img.width() * img.channels();
    for line in img.data().chunks(row) {
        let line: Vec<String> = line.iter().map(|&v| quantise(v).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_image(img))
}

pub fn decode_mask(buf: &[u8]) -> Result<Mask> {
    let r = decode(buf)?;
    if r.channels != 1 {
        return Err(Error::UnsupportedFormat {
            offset: 0,
            found: "masks must be PGM, got PPM".into(),
        });
    }
    let dims = Dims::new(r.width, r.height);
    let mut bits = Vec::with_capacity(dims.len());
    for (i, &s) in r.samples.iter().enumerate() {
        match s {
            0 => bits.push(false),
            255 => bits.push(true),
            value => {
                let (x, y) = dims.coords(i);
                return Err(Error::InvalidMask { x, y, value });
            }
        }
    }
    Mask::from_bools(dims, &bits)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn encode_mask(mask: &Mask) -> Result<Vec<u8>> {
    mask.require_binary()?;
    let d = mask.dims();
    let mut out = format!("P5\n{} {}\n255\n", d.width, d.height).into_bytes();
    out.extend(mask.values().iter().map(|&v| if v == 1.0 { 255u8 } else { 0 }));
    Ok(out)
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_mask(mask)?)
}
