//! Persistence: binary PGM images, the learned-reference file format,
//! dataset manifests and image resizing.
//!
//! Every parser is total: malformed input yields a typed error, never a
//! panic. PGM follows the Netpbm `P5` binary format with maxval 255 or 65535
//! (two bytes big-endian). The reference format is a little-endian container:
//!
//! ```text
//! magic "RFU1" | height u32 | width u32 | lo f64 | hi f64 | mask_present u8
//! | payload height*width f64 row-major | [mask height*width u8]
//! ```

use crate::error::{Error, Result};
use crate::grid::RealGrid;
use crate::scalar::Scalar;
use crate::trainer::ReferenceSignal;
use std::io::Write;
use std::path::{Path, PathBuf};

const REFERENCE_MAGIC: &[u8; 4] = b"RFU1";

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::PgmParse { offset: self.pos, message: message.into() }
    }

    /// Skip whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
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

    fn read_uint(&mut self, what: &str) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err(format!("invalid {what}")))
    }
}

/// Parse a binary PGM from memory, scaling samples into [0, 1].
pub fn parse_pgm<T: Scalar>(bytes: &[u8]) -> Result<RealGrid<T>> {
    let mut cur = PgmCursor { bytes, pos: 0 };
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(cur.err("bad magic, expected P5"));
    }
    cur.pos = 2;
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    let maxval = cur.read_uint("maxval")?;
    if height == 0 || width == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(Error::PgmFormat(format!("unsupported maxval {maxval} (need 255 or 65535)")));
    }
    // exactly one whitespace byte separates header and payload
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(cur.err("missing separator before payload"));
    }
    cur.pos += 1;

    let n = height * width;
    let bytes_per = if maxval == 255 { 1 } else { 2 };
    let need = n * bytes_per;
    let avail = bytes.len() - cur.pos;
    if avail < need {
        return Err(cur.err(format!("truncated payload: need {need} bytes, found {avail}")));
    }
    let payload = &bytes[cur.pos..cur.pos + need];
    let scale = 1.0 / maxval as f64;
    let data: Vec<T> = if maxval == 255 {
        payload.iter().map(|&b| T::of_f64(b as f64 * scale)).collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|p| T::of_f64(u16::from_be_bytes([p[0], p[1]]) as f64 * scale))
            .collect()
    };
    RealGrid::new(height, width, data)
}

/// Load a binary PGM file.
pub fn load_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<RealGrid<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

/// Encode a grid as binary PGM bytes: clamp to [0, 1], then quantize with
/// round-half-up.
pub fn encode_pgm<T: Scalar>(grid: &RealGrid<T>, maxval: u32) -> Result<Vec<u8>> {
    if maxval != 255 && maxval != 65535 {
        return Err(Error::PgmFormat(format!("unsupported maxval {maxval} (need 255 or 65535)")));
    }
    let mut out = Vec::with_capacity(32 + grid.data().len() * if maxval == 255 { 1 } else { 2 });
    out.extend_from_slice(format!("P5\n{} {}\n{}\n", grid.width(), grid.height(), maxval).as_bytes());
    for &v in grid.data() {
        let clamped = v.as_f64().clamp(0.0, 1.0);
        let q = (clamped * maxval as f64 + 0.5).floor() as u32;
        let q = q.min(maxval);
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    Ok(out)
}

/// Write a grid to a binary PGM file.
pub fn write_pgm<T: Scalar>(grid: &RealGrid<T>, path: impl AsRef<Path>, maxval: u32) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(grid, maxval)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// reference file
// ---------------------------------------------------------------------------

/// Serialize a reference to its binary container; bit-exact round trip.
pub fn save_reference<T: Scalar>(reference: &ReferenceSignal<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let grid = reference.grid();
    let (lo, hi) = reference.bounds();
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(REFERENCE_MAGIC);
    out.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    out.extend_from_slice(&lo.as_f64().to_le_bytes());
    out.extend_from_slice(&hi.as_f64().to_le_bytes());
    out.push(reference.support_mask().is_some() as u8);
    for &v in grid.data() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    if let Some(mask) = reference.support_mask() {
        out.extend(mask.iter().map(|&b| b as u8));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Read a reference container back. Payloads are stored as f64 and converted
/// to the requested scalar.
pub fn load_reference<T: Scalar>(path: impl AsRef<Path>) -> Result<ReferenceSignal<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |m: &str| Error::ReferenceFormat(format!("{}: {m}", path.display()));

    if bytes.len() < 25 {
        return Err(fail("file too short for header"));
    }
    if &bytes[0..4] != REFERENCE_MAGIC {
        return Err(fail("bad magic, expected RFU1"));
    }
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let lo = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let hi = f64::from_le_bytes(bytes[20..28].try_into().map_err(|_| fail("truncated header"))?);
    if bytes.len() < 29 {
        return Err(fail("truncated header"));
    }
    let mask_present = match bytes[28] {
        0 => false,
        1 => true,
        other => return Err(fail(&format!("invalid mask_present byte {other}"))),
    };
    let n = height
        .checked_mul(width)
        .ok_or_else(|| fail("dimension overflow"))?;
    let payload_start = 29;
    let payload_len = n * 8;
    let mask_len = if mask_present { n } else { 0 };
    if bytes.len() != payload_start + payload_len + mask_len {
        return Err(fail(&format!(
            "length mismatch: expected {} bytes, found {}",
            payload_start + payload_len + mask_len,
            bytes.len()
        )));
    }
    if !(lo <= hi) {
        return Err(fail("invalid bounds lo > hi"));
    }
    let mut data = Vec::with_capacity(n);
    for chunk in bytes[payload_start..payload_start + payload_len].chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !(lo..=hi).contains(&v) {
            return Err(fail(&format!("payload value {v} outside [{lo}, {hi}]")));
        }
        data.push(T::of_f64(v));
    }
    let mask = if mask_present {
        let mut mask = Vec::with_capacity(n);
        for &b in &bytes[payload_start + payload_len..] {
            match b {
                0 => mask.push(false),
                1 => mask.push(true),
                other => return Err(fail(&format!("invalid mask byte {other}"))),
            }
        }
        Some(mask)
    } else {
        None
    };
    let grid = RealGrid::new(height, width, data)?;
    ReferenceSignal::new(grid, T::of_f64(lo), T::of_f64(hi), mask)
}

// ---------------------------------------------------------------------------
// manifests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path as written in the manifest (resolved relative to the manifest's
    /// directory when loading).
    pub path: PathBuf,
    pub label: Option<String>,
}

/// Ordered list of image paths. UTF-8 text, one path per line, `#` comments;
/// an optional whitespace-separated second token is kept as a label.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub split: Split,
    pub image_dims: (usize, usize),
}

/// Load a manifest and every image it references, failing fast on the first
/// missing or malformed file. All images must share one size; when
/// `expected_dims` is given that size is enforced.
pub fn load_dataset<T: Scalar>(
    manifest_path: impl AsRef<Path>,
    split: Split,
    expected_dims: Option<(usize, usize)>,
) -> Result<(DatasetManifest, Vec<RealGrid<T>>)> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let path = PathBuf::from(parts.next().expect("non-empty line"));
        let label = parts.next().map(str::to_owned);
        entries.push(ManifestEntry { path, label });
    }
    if entries.is_empty() {
        return Err(Error::Manifest {
            path: manifest_path.to_owned(),
            message: "manifest lists no images".into(),
        });
    }

    let mut images = Vec::with_capacity(entries.len());
    let mut dims: Option<(usize, usize)> = expected_dims;
    for entry in &entries {
        let full = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base.join(&entry.path)
        };
        let img = load_pgm::<T>(&full)?;
        match dims {
            None => dims = Some(img.dims()),
            Some(d) if d != img.dims() => {
                return Err(Error::Manifest {
                    path: manifest_path.to_owned(),
                    message: format!(
                        "{} is {}x{}, expected {}x{}",
                        full.display(),
                        img.dims().0,
                        img.dims().1,
                        d.0,
                        d.1
                    ),
                });
            }
            _ => {}
        }
        images.push(img);
    }

    Ok((
        DatasetManifest { entries, split, image_dims: dims.expect("at least one image") },
        images,
    ))
}

/// Write a manifest listing the given relative paths.
pub fn write_manifest(
    path: impl AsRef<Path>,
    image_paths: &[impl AsRef<Path>],
) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for p in image_paths {
        text.push_str(&p.as_ref().to_string_lossy());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// resizing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMethod {
    Nearest,
    Bilinear,
}

/// Resize with the align-corners convention: corner pixel centers map onto
/// corner pixel centers.
pub fn resize_image<T: Scalar>(
    grid: &RealGrid<T>,
    new_h: usize,
    new_w: usize,
    method: ResizeMethod,
) -> Result<RealGrid<T>> {
    if new_h == 0 || new_w == 0 {
        return Err(Error::dimension("resize_image", (1, 1), (new_h, new_w)));
    }
    let (h, w) = grid.dims();
    let scale = |out: usize, src: usize, i: usize| -> f64 {
        if out <= 1 {
            0.0
        } else {
            i as f64 * (src - 1) as f64 / (out - 1) as f64
        }
    };
    Ok(RealGrid::from_fn(new_h, new_w, |r, c| {
        let fr = scale(new_h, h, r);
        let fc = scale(new_w, w, c);
        match method {
            ResizeMethod::Nearest => grid.at(fr.round() as usize, fc.round() as usize),
            ResizeMethod::Bilinear => {
                let r0 = fr.floor() as usize;
                let c0 = fc.floor() as usize;
                let r1 = (r0 + 1).min(h - 1);
                let c1 = (c0 + 1).min(w - 1);
                let tr = T::of_f64(fr - r0 as f64);
                let tc = T::of_f64(fc - c0 as f64);
                let one = T::one();
                grid.at(r0, c0) * (one - tr) * (one - tc)
                    + grid.at(r0, c1) * (one - tr) * tc
                    + grid.at(r1, c0) * tr * (one - tc)
                    + grid.at(r1, c1) * tr * tc
            }
        }
    }))
}
