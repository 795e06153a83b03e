//! Binary containers: the `EORC1` raster format (with a JSON band manifest
//! sidecar) and the `EOCK1` checkpoint format used for models, heads and
//! fitted transforms.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

pub const RASTER_MAGIC: &[u8; 5] = b"EORC1";
pub const CHECKPOINT_MAGIC: &[u8; 5] = b"EOCK1";

/// Sidecar manifest stored next to every raster file as `<file>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterManifest {
    pub bands: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crs: Option<String>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.buf.len() {
            return Err(format!("truncated at byte {} (wanted {n} more)", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> std::result::Result<Vec<f32>, String> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn encode_raster(grid: &RasterGrid) -> Vec<u8> {
    let has_mask = grid.valid_mask().iter().any(|v| !v);
    let mut out = Vec::with_capacity(46 + grid.pixels().len() * 4 + grid.len());
    out.extend_from_slice(RASTER_MAGIC);
    out.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.band_count() as u32).to_le_bytes());
    out.extend_from_slice(&grid.pixel_size().to_le_bytes());
    out.extend_from_slice(&grid.origin().0.to_le_bytes());
    out.extend_from_slice(&grid.origin().1.to_le_bytes());
    out.push(has_mask as u8);
    for v in grid.pixels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if has_mask {
        out.extend(grid.valid_mask().iter().map(|v| *v as u8));
    }
    out
}

/// Decodes a raster body. `bands` supplies names; when `None` the bands are
/// named `b0`, `b1`, ...
pub fn decode_raster(bytes: &[u8], bands: Option<Vec<String>>) -> std::result::Result<RasterGrid, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(5)? != RASTER_MAGIC {
        return Err("bad magic, expected EORC1".into());
    }
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let band_count = r.u32()? as usize;
    let pixel_size = r.f64()?;
    let origin = (r.f64()?, r.f64()?);
    let has_mask = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(format!("mask flag must be 0 or 1, got {other}")),
    };
    let pixels = r.f32s(width * height * band_count)?;
    let mask = if has_mask {
        r.take(width * height)?.iter().map(|b| *b != 0).collect()
    } else {
        vec![true; width * height]
    };
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let bands = match bands {
        Some(b) if b.len() == band_count => b,
        Some(b) => return Err(format!("manifest names {} bands, body has {band_count}", b.len())),
        None => (0..band_count).map(|i| format!("b{i}")).collect(),
    };
    RasterGrid::from_parts(width, height, bands, pixels, mask, pixel_size, origin).map_err(|e| e.to_string())
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_raster(path: &Path, grid: &RasterGrid, crs: Option<&str>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_raster(grid)).map_err(|e| Error::io(path, e))?;
    let manifest = RasterManifest {
        bands: grid.band_names().to_vec(),
        crs: crs.map(str::to_string),
    };
    let mpath = manifest_path(path);
    let json = serde_json::to_vec_pretty(&manifest)?;
    fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))
}

pub fn read_raster(path: &Path) -> Result<RasterGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mpath = manifest_path(path);
    let bands = match fs::read(&mpath) {
        Ok(raw) => Some(serde_json::from_slice::<RasterManifest>(&raw)?.bands),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&mpath, e)),
    };
    decode_raster(&bytes, bands).map_err(|msg| Error::format(path, msg))
}

/// A named little-endian f32 array inside a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        NamedArray {
            name: name.into(),
            shape,
            data,
        }
    }
}

/// `EOCK1` container: magic, a UTF-8 header block, a manifest of
/// (name, shape, byte offset) entries, then the concatenated arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: String,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&NamedArray> {
        self.get(name)
            .ok_or_else(|| Error::schema(format!("checkpoint has no array '{name}'")))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.header.len() as u32).to_le_bytes());
        out.extend_from_slice(self.header.as_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        let mut offset = 0u64;
        for a in &self.arrays {
            out.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for d in &a.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            out.extend_from_slice(&offset.to_le_bytes());
            offset += a.data.len() as u64 * 4;
        }
        for a in &self.arrays {
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(5)? != CHECKPOINT_MAGIC {
            return Err("bad magic, expected EOCK1".into());
        }
        let hlen = r.u32()? as usize;
        let header = String::from_utf8(r.take(hlen)?.to_vec()).map_err(|e| e.to_string())?;
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec()).map_err(|e| e.to_string())?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let offset = r.u64()? as usize;
            entries.push((name, shape, offset));
        }
        let data_start = r.pos;
        let mut arrays = Vec::with_capacity(count);
        for (name, shape, offset) in entries {
            let len: usize = shape.iter().product();
            let mut sub = Reader {
                buf: bytes,
                pos: data_start + offset,
            };
            let data = sub.f32s(len).map_err(|e| format!("array '{name}': {e}"))?;
            arrays.push(NamedArray { name, shape, data });
        }
        Ok(Checkpoint { header, arrays })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&bytes).map_err(|msg| Error::format(path, msg))
    }
}
