//! PNG and binary PGM/PPM reading, 8-bit PNG writing.

use std::io::Cursor;
use std::path::Path;

use super::{to_byte, ImageTensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Load an 8-bit gray/RGB PNG or a binary PGM (P5) / PPM (P6).
pub fn load_image<T: Real>(path: impl AsRef<Path>) -> Result<ImageTensor<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    let (h, w, c, raw) = if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes).map_err(fmt)?
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes).map_err(fmt)?
    } else {
        return Err(fmt("not a PNG or binary PGM/PPM file".into()));
    };
    let data = raw.iter().map(|&b| T::of(b as f64 / 255.0)).collect();
    ImageTensor::new(h, w, c, data)
}

fn decode_png(bytes: &[u8]) -> std::result::Result<(usize, usize, usize, Vec<u8>), String> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let info = reader.info();
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        png::ColorType::GrayscaleAlpha | png::ColorType::Rgba => {
            return Err("alpha channel is not supported".into())
        }
        png::ColorType::Indexed => return Err("palette color type is not supported".into()),
    };
    if info.bit_depth != png::BitDepth::Eight {
        return Err(format!("bit depth {} is not supported (need 8)", info.bit_depth as u8));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let size = reader.output_buffer_size().ok_or("image too large")?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    buf.truncate(frame.buffer_size());
    let stride = frame.line_size;
    if stride == w * channels {
        return Ok((h, w, channels, buf));
    }
    let mut packed = Vec::with_capacity(h * w * channels);
    for row in buf.chunks(stride).take(h) {
        packed.extend_from_slice(&row[..w * channels]);
    }
    Ok((h, w, channels, packed))
}

fn decode_pnm(bytes: &[u8]) -> std::result::Result<(usize, usize, usize, Vec<u8>), String> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("malformed header")?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(format!("maxval {maxval} is not supported (need 255, 8-bit)"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed header".into());
    }
    pos += 1;
    let n = w * h * channels;
    let body = bytes.get(pos..pos + n).ok_or("truncated pixel data")?;
    Ok((h, w, channels, body.to_vec()))
}

/// Encode as 8-bit PNG bytes (gray or RGB).
pub fn save_image_bytes<T: Real>(img: &ImageTensor<T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        encoder.set_color(if img.channels() == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
        encoder.set_depth(png::BitDepth::Eight);
        let encode_err = |e: png::EncodingError| Error::Format { path: "<memory>".into(), reason: e.to_string() };
        let mut writer = encoder.write_header().map_err(encode_err)?;
        let bytes: Vec<u8> = img.data().iter().map(|&v| to_byte(v)).collect();
        writer.write_image_data(&bytes).map_err(encode_err)?;
    }
    Ok(out)
}

/// Write an 8-bit PNG; each intensity is stored as `round(v * 255)`.
pub fn save_image<T: Real>(img: &ImageTensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = save_image_bytes(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
