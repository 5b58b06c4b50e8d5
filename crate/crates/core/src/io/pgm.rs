//! Binary netpbm images: P5 (grayscale) and P6 (RGB), 8-bit only. Pixels
//! map to f64 in [0,1] on read and are quantized back with rounding on
//! write, so a write→read round trip of quantized data is exact.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

/// Reads a P5 image into a [1, h, w] tensor or a P6 image into [3, h, w].
pub fn read_image(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    decode(&bytes).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

/// Writes a [1, h, w] (or [h, w]) tensor as P5. Values are clamped to [0,1]
/// and rounded to 8 bits.
pub fn write_pgm(path: &Path, t: &Tensor) -> Result<()> {
    let (c, h, w) = plane_dims(t)?;
    if c != 1 {
        return Err(Error::shape(format!("grayscale output needs 1 channel, got {c}")));
    }
    write_netpbm(path, b"P5", h, w, t)
}

/// Writes a [3, h, w] tensor as P6.
pub fn write_ppm(path: &Path, t: &Tensor) -> Result<()> {
    let (c, h, w) = plane_dims(t)?;
    if c != 3 {
        return Err(Error::shape(format!("color output needs 3 channels, got {c}")));
    }
    write_netpbm(path, b"P6", h, w, t)
}

/// 8-bit quantization used for every image write.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn plane_dims(t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [h, w] => Ok((1, *h, *w)),
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(Error::shape(format!("image tensor must be rank 2 or 3, got {other:?}"))),
    }
}

fn write_netpbm(path: &Path, magic: &[u8], h: usize, w: usize, t: &Tensor) -> Result<()> {
    let channels = t.numel() / (h * w);
    let mut out = Vec::with_capacity(t.numel() + 32);
    out.extend_from_slice(magic);
    write!(out, "\n{w} {h}\n255\n")?;
    // Interleave channel-first data into per-pixel samples.
    for p in 0..h * w {
        for ch in 0..channels {
            out.push(quantize(t.data()[ch * h * w + p]));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn decode(bytes: &[u8]) -> Result<Tensor> {
    let mut cur = bytes;
    let magic = token(&mut cur)?;
    let channels = match magic.as_slice() {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::format(format!(
                "unsupported magic {:?}; only binary P5/P6 are accepted",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let w: usize = ascii_usize(&token(&mut cur)?)?;
    let h: usize = ascii_usize(&token(&mut cur)?)?;
    let maxval: usize = ascii_usize(&token(&mut cur)?)?;
    if maxval != 255 {
        return Err(Error::format(format!("only 8-bit images supported, maxval {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(Error::format("zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let mut raster = vec![0u8; h * w * channels];
    let mut rd = cur;
    rd.read_exact(&mut raster)
        .map_err(|_| Error::format("truncated pixel data"))?;
    let plane = h * w;
    Ok(Tensor::from_fn(&[channels, h, w], |i| {
        let (ch, p) = (i / plane, i % plane);
        raster[p * channels + ch] as f64 / 255.0
    }))
}

/// Next whitespace-delimited header token, skipping `#` comments, then the
/// single whitespace byte that follows it.
fn token(cur: &mut &[u8]) -> Result<Vec<u8>> {
    loop {
        while let Some((&b, rest)) = cur.split_first() {
            if b.is_ascii_whitespace() {
                *cur = rest;
            } else {
                break;
            }
        }
        if cur.first() == Some(&b'#') {
            while let Some((&b, rest)) = cur.split_first() {
                *cur = rest;
                if b == b'\n' {
                    break;
                }
            }
            continue;
        }
        break;
    }
    let mut tok = Vec::new();
    while let Some((&b, rest)) = cur.split_first() {
        if b.is_ascii_whitespace() {
            *cur = rest;
            return Ok(tok);
        }
        tok.push(b);
        *cur = rest;
    }
    if tok.is_empty() {
        Err(Error::format("truncated header"))
    } else {
        Ok(tok)
    }
}

fn ascii_usize(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(format!("bad header number {:?}", String::from_utf8_lossy(tok))))
}
