//! File formats: binary PGM/PPM, raw little-endian `f32` images, and the
//! `BMIM` measurement and `BMIK` mask containers.
//!
//! The container layouts are frozen; see `docs/FORMATS.md` in the
//! repository root. All multi-byte fields are little-endian.
//!
//! `BMIM` (version 1), 40-byte header:
//!
//! | off | size | field                                   |
//! |----:|-----:|-----------------------------------------|
//! |   0 |    4 | magic `BMIM`                            |
//! |   4 |    2 | version (1)                             |
//! |   6 |    2 | flags: bit0 mask embedded, bit1 padded  |
//! |   8 |    4 | original height                         |
//! |  12 |    4 | original width                          |
//! |  16 |    2 | grid rows                               |
//! |  18 |    2 | grid cols                               |
//! |  20 |    4 | block height                            |
//! |  24 |    4 | block width                             |
//! |  28 |    8 | mask seed (0 when embedded)             |
//! |  36 |    4 | mask density, f32 (0 when embedded)     |
//!
//! followed by `block_h × block_w` f32 values and, when embedded, the mask
//! at the original image size packed 1 bit per pixel, most significant bit
//! first, each row padded to a whole byte with zero bits.
//!
//! `BMIK` (version 1), 28-byte header: magic, version u16, height u32,
//! width u32, PRNG id u16, seed u64, density f32, then packed bits as above.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{BmiError, Result};
use crate::mask::{self, MaskSpec, PRNG_EXTERNAL, PRNG_XOSHIRO256PP};
use crate::types::{BlockGrid, Image, Mask, MaskProvenance, Measurement};

pub const MEASUREMENT_MAGIC: [u8; 4] = *b"BMIM";
pub const MASK_MAGIC: [u8; 4] = *b"BMIK";
pub const MEASUREMENT_VERSION: u16 = 1;
pub const MASK_VERSION: u16 = 1;
pub const MEASUREMENT_HEADER_LEN: usize = 40;
pub const MASK_HEADER_LEN: usize = 28;

const FLAG_EMBEDDED: u16 = 1;
const FLAG_PADDED: u16 = 1 << 1;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(malformed(
                self.buf.len(),
                format!("truncated: need {n} bytes for {what}"),
            )),
        }
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().unwrap())
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array(what)?))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(malformed(
                self.pos,
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn malformed(offset: usize, reason: impl Into<String>) -> BmiError {
    BmiError::Malformed {
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn violation(field: &'static str, reason: impl Into<String>) -> BmiError {
    BmiError::InvariantViolation {
        field,
        reason: reason.into(),
    }
}

fn to_u32(v: usize, field: &'static str) -> Result<u32> {
    u32::try_from(v).map_err(|_| violation(field, format!("{v} does not fit in 32 bits")))
}

fn packed_row_len(width: usize) -> usize {
    width.div_ceil(8)
}

fn pack_bits(mask: &Mask, out: &mut Vec<u8>) {
    let row_len = packed_row_len(mask.width());
    for r in 0..mask.height() {
        let start = out.len();
        out.resize(start + row_len, 0);
        for (c, &bit) in mask.row(r).iter().enumerate() {
            out[start + c / 8] |= bit << (7 - c % 8);
        }
    }
}

fn unpack_bits(cur: &mut Cursor<'_>, height: usize, width: usize) -> Result<Mask> {
    let row_len = packed_row_len(width);
    let total = height
        .checked_mul(row_len)
        .ok_or_else(|| malformed(cur.pos, "mask size overflows"))?;
    let base = cur.pos;
    let packed = cur.take(total, "mask bits")?;
    let mut bits = Vec::with_capacity(height * width);
    for r in 0..height {
        let row = &packed[r * row_len..(r + 1) * row_len];
        for c in 0..width {
            bits.push((row[c / 8] >> (7 - c % 8)) & 1);
        }
        let used = width % 8;
        if used != 0 && row[row_len - 1] & (0xFF >> used) != 0 {
            return Err(malformed(
                base + (r + 1) * row_len - 1,
                "non-zero row padding bits",
            ));
        }
    }
    Mask::new(height, width, bits)
}

/// Serializes a measurement into the `BMIM` layout.
pub fn measurement_to_bytes(m: &Measurement) -> Result<Vec<u8>> {
    let (oh, ow) = m.original_shape();
    let (bh, bw) = m.block_shape();
    let grid = m.grid();
    let (flags, seed, density, embedded) = match m.mask_provenance() {
        MaskProvenance::Seeded { seed, density } => (0u16, *seed, *density, None),
        MaskProvenance::Embedded(mask) => (FLAG_EMBEDDED, 0, 0.0, Some(mask)),
    };
    let flags = flags | if m.is_padded() { FLAG_PADDED } else { 0 };
    let mut out = Vec::with_capacity(MEASUREMENT_HEADER_LEN + m.data().len() * 4);
    out.extend_from_slice(&MEASUREMENT_MAGIC);
    out.extend_from_slice(&MEASUREMENT_VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&to_u32(oh, "original_height")?.to_le_bytes());
    out.extend_from_slice(&to_u32(ow, "original_width")?.to_le_bytes());
    out.extend_from_slice(&(grid.rows() as u16).to_le_bytes());
    out.extend_from_slice(&(grid.cols() as u16).to_le_bytes());
    out.extend_from_slice(&to_u32(bh, "block_height")?.to_le_bytes());
    out.extend_from_slice(&to_u32(bw, "block_width")?.to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    out.extend_from_slice(&density.to_le_bytes());
    debug_assert_eq!(out.len(), MEASUREMENT_HEADER_LEN);
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(mask) = embedded {
        pack_bits(mask, &mut out);
    }
    Ok(out)
}

/// Parses and validates a `BMIM` buffer.
pub fn measurement_from_bytes(buf: &[u8]) -> Result<Measurement> {
    let mut cur = Cursor::new(buf);
    let magic: [u8; 4] = cur.array("magic")?;
    if magic != MEASUREMENT_MAGIC {
        return Err(BmiError::BadMagic {
            expected: MEASUREMENT_MAGIC,
            found: magic,
        });
    }
    let version = cur.u16("version")?;
    if version != MEASUREMENT_VERSION {
        return Err(BmiError::UnsupportedVersion(version));
    }
    let flags = cur.u16("flags")?;
    if flags & !(FLAG_EMBEDDED | FLAG_PADDED) != 0 {
        return Err(violation("flags", format!("unknown bits in {flags:#06x}")));
    }
    let oh = cur.u32("original_height")? as usize;
    let ow = cur.u32("original_width")? as usize;
    let rows = cur.u16("grid_rows")? as usize;
    let cols = cur.u16("grid_cols")? as usize;
    let bh = cur.u32("block_height")? as usize;
    let bw = cur.u32("block_width")? as usize;
    let seed = cur.u64("mask_seed")?;
    let density = cur.f32("mask_density")?;

    let grid = BlockGrid::new(rows, cols).map_err(|e| violation("grid", e.to_string()))?;
    if oh == 0 || ow == 0 {
        return Err(violation("original_shape", format!("{oh}x{ow} has zero area")));
    }
    if (bh, bw) != grid.padded_block_shape(oh, ow) {
        return Err(violation(
            "block_shape",
            format!("block {bh}x{bw} does not tile {oh}x{ow} with grid {grid}"),
        ));
    }
    let padded = flags & FLAG_PADDED != 0;
    if padded != ((bh * rows, bw * cols) != (oh, ow)) {
        return Err(violation("flags", "padded flag disagrees with shapes"));
    }
    let len = bh * bw;
    let payload = cur.take(len * 4, "payload")?;
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let provenance = if flags & FLAG_EMBEDDED != 0 {
        if seed != 0 || density.to_bits() != 0 {
            return Err(violation("mask_seed", "seed/density must be 0 for embedded masks"));
        }
        MaskProvenance::Embedded(unpack_bits(&mut cur, oh, ow)?)
    } else {
        mask::validate_density(density).map_err(|e| violation("mask_density", e.to_string()))?;
        MaskProvenance::Seeded { seed, density }
    };
    cur.finish()?;
    let m = Measurement::new(grid, oh, ow, bh, bw, provenance, data)?;
    m.check_range()?;
    Ok(m)
}

pub fn write_measurement(m: &Measurement, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, measurement_to_bytes(m)?)?;
    Ok(())
}

pub fn read_measurement(path: impl AsRef<Path>) -> Result<Measurement> {
    measurement_from_bytes(&fs::read(path)?)
}

/// A mask together with the generator that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFile {
    pub mask: Mask,
    /// [`PRNG_EXTERNAL`] for imported masks.
    pub prng_id: u16,
    pub seed: u64,
    pub density: f32,
}

impl MaskFile {
    pub fn generated(spec: &MaskSpec) -> Result<Self> {
        Ok(Self {
            mask: mask::generate(spec)?,
            prng_id: PRNG_XOSHIRO256PP,
            seed: spec.seed,
            density: spec.density,
        })
    }

    pub fn external(mask: Mask) -> Self {
        let density = mask.popcount() as f32 / (mask.height() * mask.width()) as f32;
        Self {
            mask,
            prng_id: PRNG_EXTERNAL,
            seed: 0,
            density,
        }
    }

    /// How a measurement made with this mask should refer to it.
    pub fn provenance(&self) -> MaskProvenance {
        if self.prng_id == PRNG_EXTERNAL {
            MaskProvenance::Embedded(self.mask.clone())
        } else {
            MaskProvenance::Seeded {
                seed: self.seed,
                density: self.density,
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self.prng_id {
            PRNG_EXTERNAL => Ok(()),
            PRNG_XOSHIRO256PP => {
                mask::validate_density(self.density)
                    .map_err(|e| violation("density", e.to_string()))?;
                let spec = MaskSpec::new(
                    self.mask.height(),
                    self.mask.width(),
                    self.density,
                    self.seed,
                );
                if mask::generate(&spec)? != self.mask {
                    return Err(violation(
                        "bits",
                        "bits do not match the recorded generator, seed and density",
                    ));
                }
                Ok(())
            }
            id => Err(violation("prng_id", format!("unknown generator id {id}"))),
        }
    }
}

pub fn mask_to_bytes(mf: &MaskFile) -> Result<Vec<u8>> {
    let m = &mf.mask;
    let mut out = Vec::with_capacity(MASK_HEADER_LEN + m.height() * packed_row_len(m.width()));
    out.extend_from_slice(&MASK_MAGIC);
    out.extend_from_slice(&MASK_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(m.height(), "height")?.to_le_bytes());
    out.extend_from_slice(&to_u32(m.width(), "width")?.to_le_bytes());
    out.extend_from_slice(&mf.prng_id.to_le_bytes());
    out.extend_from_slice(&mf.seed.to_le_bytes());
    out.extend_from_slice(&mf.density.to_le_bytes());
    debug_assert_eq!(out.len(), MASK_HEADER_LEN);
    pack_bits(m, &mut out);
    Ok(out)
}

pub fn mask_from_bytes(buf: &[u8]) -> Result<MaskFile> {
    let mut cur = Cursor::new(buf);
    let magic: [u8; 4] = cur.array("magic")?;
    if magic != MASK_MAGIC {
        return Err(BmiError::BadMagic {
            expected: MASK_MAGIC,
            found: magic,
        });
    }
    let version = cur.u16("version")?;
    if version != MASK_VERSION {
        return Err(BmiError::UnsupportedVersion(version));
    }
    let h = cur.u32("height")? as usize;
    let w = cur.u32("width")? as usize;
    let prng_id = cur.u16("prng_id")?;
    let seed = cur.u64("seed")?;
    let density = cur.f32("density")?;
    if h == 0 || w == 0 {
        return Err(violation("shape", format!("{h}x{w} has zero area")));
    }
    if prng_id != PRNG_EXTERNAL {
        mask::validate_density(density).map_err(|e| violation("density", e.to_string()))?;
    }
    let mask = unpack_bits(&mut cur, h, w)?;
    cur.finish()?;
    let mf = MaskFile {
        mask,
        prng_id,
        seed,
        density,
    };
    mf.validate()?;
    Ok(mf)
}

pub fn write_mask(mf: &MaskFile, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mask_to_bytes(mf)?)?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskFile> {
    mask_from_bytes(&fs::read(path)?)
}

/// Sample depth for PGM/PPM output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PnmDepth {
    #[default]
    Eight,
    Sixteen,
}

impl PnmDepth {
    fn maxval(self) -> u32 {
        match self {
            PnmDepth::Eight => 255,
            PnmDepth::Sixteen => 65535,
        }
    }
}

fn is_pnm_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

/// Reads one unsigned decimal header token, skipping whitespace and comments.
fn pnm_token(buf: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    loop {
        match buf.get(*pos) {
            Some(&b) if is_pnm_space(b) => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = buf.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(malformed(*pos, format!("truncated header before {what}"))),
        }
    }
    let start = *pos;
    while buf.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(malformed(start, format!("expected {what}")));
    }
    std::str::from_utf8(&buf[start..*pos])
        .unwrap()
        .parse()
        .map_err(|_| malformed(start, format!("{what} out of range")))
}

/// Decodes a binary PGM (`P5`, one image) or PPM (`P6`, three channel
/// images). Samples are divided by maxval.
pub fn decode_pnm(buf: &[u8]) -> Result<Vec<Image>> {
    let channels = match buf.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(_) => return Err(malformed(0, "not a binary PGM/PPM (expected P5 or P6)")),
        None => return Err(malformed(buf.len(), "truncated header before magic")),
    };
    let mut pos = 2;
    let width = pnm_token(buf, &mut pos, "width")? as usize;
    let height = pnm_token(buf, &mut pos, "height")? as usize;
    let maxval_at = pos;
    let maxval = pnm_token(buf, &mut pos, "maxval")?;
    match buf.get(pos) {
        Some(&b) if is_pnm_space(b) => pos += 1,
        _ => return Err(malformed(pos, "expected single whitespace after maxval")),
    }
    if width == 0 || height == 0 {
        return Err(malformed(maxval_at, format!("zero-area image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(BmiError::UnsupportedDepth(maxval));
    }
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let need = width * height * channels * bytes_per;
    let avail = buf.len() - pos;
    if avail < need {
        return Err(malformed(
            buf.len(),
            format!("truncated raster: {avail} of {need} bytes"),
        ));
    }
    if avail > need {
        return Err(malformed(pos + need, "trailing bytes after raster"));
    }
    let raster = &buf[pos..];
    let mut planes = vec![Vec::with_capacity(width * height); channels];
    for (k, s) in raster.chunks_exact(bytes_per).enumerate() {
        let v = if bytes_per == 1 {
            u32::from(s[0])
        } else {
            u32::from(u16::from_be_bytes([s[0], s[1]]))
        };
        if v > maxval {
            return Err(malformed(pos + k * bytes_per, format!("sample {v} exceeds maxval {maxval}")));
        }
        planes[k % channels].push(v as f32 / maxval as f32);
    }
    planes
        .into_iter()
        .map(|p| Image::new(height, width, p))
        .collect()
}

/// Encodes one (PGM) or three (PPM) channel images, clamping to `[0, 1]`
/// and rounding to the nearest level.
pub fn encode_pnm(channels: &[Image], depth: PnmDepth) -> Result<Vec<u8>> {
    let magic = match channels.len() {
        1 => "P5",
        3 => "P6",
        n => {
            return Err(BmiError::InvalidParameter {
                field: "channels",
                reason: format!("{n} channels; PNM output needs 1 or 3"),
            })
        }
    };
    let (h, w) = channels[0].shape();
    if let Some(c) = channels.iter().find(|c| c.shape() != (h, w)) {
        return Err(BmiError::DimensionMismatch {
            what: "channel",
            got_h: c.height(),
            got_w: c.width(),
            want_h: h,
            want_w: w,
        });
    }
    let maxval = depth.maxval();
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    for k in 0..h * w {
        for ch in channels {
            let q = (ch.data()[k].clamp(0.0, 1.0) * maxval as f32).round() as u32;
            match depth {
                PnmDepth::Eight => out.push(q as u8),
                PnmDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
            }
        }
    }
    Ok(out)
}

/// Sidecar holding `"<height> <width>\n"` for a raw float image.
pub fn raw_sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".dims");
    PathBuf::from(s)
}

pub fn write_raw(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(image.data().len() * 4);
    for v in image.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(
        raw_sidecar_path(path),
        format!("{} {}\n", image.height(), image.width()),
    )?;
    Ok(())
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let dims = fs::read_to_string(raw_sidecar_path(path))?;
    let bad = || malformed(0, format!("sidecar {dims:?} is not \"<height> <width>\""));
    let mut it = dims.split_whitespace();
    let h: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let w: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    if it.next().is_some() {
        return Err(bad());
    }
    let bytes = fs::read(path)?;
    let need = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(bad)?;
    if bytes.len() != need {
        return Err(malformed(
            bytes.len().min(need),
            format!("raw file has {} bytes, {h}x{w} needs {need}", bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Image::new(h, w, data)
}

fn is_raw(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("f32" | "raw")
    )
}

fn check_normalized(image: &Image) -> Result<()> {
    if let Some(pos) = image.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(violation(
            "pixel",
            format!("value {} at index {pos} outside [0, 1]", image.data()[pos]),
        ));
    }
    Ok(())
}

/// Reads every channel of an image file: `.f32`/`.raw` as raw floats,
/// anything else as binary PGM/PPM.
pub fn read_channels(path: impl AsRef<Path>) -> Result<Vec<Image>> {
    let path = path.as_ref();
    let channels = if is_raw(path) {
        vec![read_raw(path)?]
    } else {
        decode_pnm(&fs::read(path)?)?
    };
    channels.iter().try_for_each(check_normalized)?;
    Ok(channels)
}

/// Reads a single-channel image.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let mut ch = read_channels(path)?;
    if ch.len() != 1 {
        return Err(BmiError::InvalidParameter {
            field: "image",
            reason: format!("{} channels where one was expected", ch.len()),
        });
    }
    Ok(ch.remove(0))
}

/// Writes by extension: `.f32`/`.raw` raw floats, otherwise 8-bit PNM.
pub fn write_channels(channels: &[Image], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_raw(path) {
        match channels {
            [one] => write_raw(one, path),
            _ => Err(BmiError::InvalidParameter {
                field: "channels",
                reason: "raw float files hold a single channel".into(),
            }),
        }
    } else {
        fs::write(path, encode_pnm(channels, PnmDepth::Eight)?)?;
        Ok(())
    }
}

pub fn write_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    write_channels(std::slice::from_ref(image), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_full_scale_is_one() {
        let img = decode_pnm(b"P5\n1 1\n255\n\xff").unwrap();
        assert_eq!(img[0].data(), &[1.0]);
        let img16 = decode_pnm(b"P5 2 1 65535 \xff\xff\x80\x00").unwrap();
        assert_eq!(img16[0].data(), &[1.0, 32768.0 / 65535.0]);
    }

    #[test]
    fn pgm_comments_skipped() {
        let img = decode_pnm(b"P5\n# made by hand\n2 1 # trailing\n255\n\x00\x33").unwrap();
        assert_eq!(img[0].shape(), (1, 2));
        assert_eq!(img[0].data()[1], 0.2);
    }

    #[test]
    fn truncated_header_reports_offset() {
        match decode_pnm(b"P5\n12 ") {
            Err(BmiError::Malformed { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            decode_pnm(b"P5\n2 2\n255\n\x00"),
            Err(BmiError::Malformed { offset: 12, .. })
        ));
        assert!(matches!(decode_pnm(b"P"), Err(BmiError::Malformed { .. })));
        assert!(matches!(decode_pnm(b"P2\n1 1\n255\n0"), Err(BmiError::Malformed { offset: 0, .. })));
    }

    #[test]
    fn unsupported_depth() {
        assert!(matches!(
            decode_pnm(b"P5\n1 1\n70000\n\x00\x00"),
            Err(BmiError::UnsupportedDepth(70000))
        ));
        assert!(matches!(
            decode_pnm(b"P5\n1 1\n0\n\x00"),
            Err(BmiError::UnsupportedDepth(0))
        ));
    }

    #[test]
    fn pgm_write_read_is_quantized() {
        let img = Image::new(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        let bytes = encode_pnm(std::slice::from_ref(&img), PnmDepth::Eight).unwrap();
        let back = decode_pnm(&bytes).unwrap().remove(0);
        assert_eq!(back.data(), &[0.0, 128.0 / 255.0, 1.0]);
        let again = encode_pnm(std::slice::from_ref(&back), PnmDepth::Eight).unwrap();
        assert_eq!(bytes, again);
        let b16 = encode_pnm(std::slice::from_ref(&img), PnmDepth::Sixteen).unwrap();
        let back16 = decode_pnm(&b16).unwrap().remove(0);
        assert_eq!(back16.data()[1], 32768.0 / 65535.0);
    }

    #[test]
    fn ppm_splits_channels() {
        let ch = decode_pnm(b"P6\n2 1\n255\n\x00\x33\xff\xff\x00\x33").unwrap();
        assert_eq!(ch.len(), 3);
        assert_eq!(ch[0].data(), &[0.0, 1.0]);
        assert_eq!(ch[1].data(), &[0.2, 0.0]);
        let bytes = encode_pnm(&ch, PnmDepth::Eight).unwrap();
        assert_eq!(decode_pnm(&bytes).unwrap(), ch);
    }

    #[test]
    fn raw_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.f32");
        let img = Image::from_fn(3, 5, |r, c| (r as f32 * 0.1 + c as f32 * 0.013).fract()).unwrap();
        write_image(&img, &path).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("x.f32.dims")).unwrap(), "3 5\n");
        assert_eq!(read_image(&path).unwrap(), img);
    }

    #[test]
    fn raw_rejects_short_file_and_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.raw");
        fs::write(&path, [0u8; 10]).unwrap();
        fs::write(raw_sidecar_path(&path), "2 2\n").unwrap();
        assert!(matches!(read_image(&path), Err(BmiError::Malformed { .. })));
        write_raw(&Image::new(1, 1, vec![1.5]).unwrap(), &path).unwrap();
        assert!(matches!(read_image(&path), Err(BmiError::InvariantViolation { .. })));
    }

    #[test]
    fn mask_padding_bits_checked() {
        let mf = MaskFile::external(Mask::new(1, 3, vec![1, 0, 1]).unwrap());
        let mut bytes = mask_to_bytes(&mf).unwrap();
        assert_eq!(bytes.len(), MASK_HEADER_LEN + 1);
        assert_eq!(bytes[MASK_HEADER_LEN], 0b1010_0000);
        bytes[MASK_HEADER_LEN] |= 1;
        assert!(matches!(mask_from_bytes(&bytes), Err(BmiError::Malformed { .. })));
    }
}
