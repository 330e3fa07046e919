//! SHLB checkpoint files.
//!
//! Layout (all integers u32 little-endian):
//!
//! ```text
//! "SHLB" | version = 1 | config digest (32 bytes)
//! repeated until EOF:
//!   name length | name (UTF-8) | ndim | dims... | f32 LE values, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::config::HeadConfig;
use crate::diffmath::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SHLB";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub digest: [u8; 32],
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn from_params(config: &HeadConfig, params: &ParamStore<f32>) -> Self {
        Self::from_named(config.digest(), params.iter())
    }

    pub fn from_named<'a>(digest: [u8; 32], tensors: impl Iterator<Item = (&'a str, &'a Tensor<f32>)>) -> Self {
        Self {
            digest,
            tensors: tensors.map(|(n, t)| (n.to_owned(), t.clone())).collect(),
        }
    }

    /// Rebuild a parameter store, refusing checkpoints written for another config.
    pub fn into_params(self, config: &HeadConfig) -> Result<ParamStore<f32>> {
        if self.digest != config.digest() {
            return Err(Error::DigestMismatch);
        }
        let mut ps = ParamStore::new();
        for (name, t) in self.tensors {
            ps.insert(name, t)?;
        }
        Ok(ps)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&self.digest).map_err(io)?;
        for (name, t) in &self.tensors {
            w.write_all(&len_u32(name.len())?.to_le_bytes()).map_err(io)?;
            w.write_all(name.as_bytes()).map_err(io)?;
            w.write_all(&len_u32(t.shape().len())?.to_le_bytes()).map_err(io)?;
            for &d in t.shape() {
                w.write_all(&len_u32(d)?.to_le_bytes()).map_err(io)?;
            }
            let mut buf = Vec::with_capacity(t.len() * 4);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
        }
        let version = read_u32(&mut r, "version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut digest = [0u8; 32];
        read_exact(&mut r, &mut digest, "config digest")?;

        let mut tensors = Vec::new();
        loop {
            let mut first = [0u8; 4];
            if !read_or_eof(&mut r, &mut first)? {
                break;
            }
            let name_len = u32::from_le_bytes(first) as usize;
            let mut name = vec![0u8; name_len];
            read_exact(&mut r, &mut name, "record name")?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Format("record name is not UTF-8".into()))?;
            let ndim = read_u32(&mut r, "ndim")? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u32(&mut r, "dim")? as usize);
            }
            let n: usize = shape.iter().product();
            let mut raw = vec![0u8; n * 4];
            read_exact(&mut r, &mut raw, "record values")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push((name, Tensor::from_vec(&shape, data)?));
        }
        Ok(Self { digest, tensors })
    }

    /// Write via a temporary sibling file and rename, so a crash never
    /// leaves a half-written checkpoint at `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        self.write_to(BufWriter::new(file))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

pub fn save_checkpoint(path: &Path, config: &HeadConfig, params: &ParamStore<f32>) -> Result<()> {
    Checkpoint::from_params(config, params).save(path)
}

pub fn load_checkpoint(path: &Path, config: &HeadConfig) -> Result<ParamStore<f32>> {
    Checkpoint::load(path)?.into_params(config)
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("length {n} exceeds u32")))
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Format(format!("truncated record: missing {what}")),
        _ => Error::io("<stream>", e),
    })
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

/// Fill `buf`, returning `false` on a clean EOF before the first byte.
pub(crate) fn read_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(Error::Format("truncated record header".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io("<stream>", e)),
        }
    }
    Ok(true)
}
