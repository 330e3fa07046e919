//! BEMB embedding files.
//!
//! ```text
//! "BEMB" | u32 version = 1 | u32 H
//! repeated until EOF:
//!   u32 qid byte length | qid UTF-8 | u32 L | L*H f32, row-major
//! ```
//! All integers and floats little-endian.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddedSequence, Feature};
use crate::diffmath::Tensor;
use crate::error::{Error, Result};
use crate::heads::checkpoint::{read_exact, read_or_eof, read_u32};

pub const MAGIC: &[u8; 4] = b"BEMB";
pub const VERSION: u32 = 1;

pub struct BembWriter<W: Write> {
    inner: W,
    hidden: usize,
}

impl<W: Write> BembWriter<W> {
    pub fn new(mut inner: W, hidden: usize) -> Result<Self> {
        let io = |e| Error::io("<bemb>", e);
        inner.write_all(MAGIC).map_err(io)?;
        inner.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        inner.write_all(&(hidden as u32).to_le_bytes()).map_err(io)?;
        Ok(Self { inner, hidden })
    }

    pub fn write_record(&mut self, qid: &str, embeddings: &Tensor<f32>) -> Result<()> {
        let (len, hidden) = embeddings.dims2("bemb record")?;
        if hidden != self.hidden {
            return Err(Error::ShapeMismatch {
                op: "bemb record width",
                left: vec![self.hidden],
                right: embeddings.shape().to_vec(),
            });
        }
        let io = |e| Error::io("<bemb>", e);
        self.inner.write_all(&(qid.len() as u32).to_le_bytes()).map_err(io)?;
        self.inner.write_all(qid.as_bytes()).map_err(io)?;
        self.inner.write_all(&(len as u32).to_le_bytes()).map_err(io)?;
        let mut buf = Vec::with_capacity(embeddings.len() * 4);
        for v in embeddings.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf).map_err(io)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("<bemb>", e))?;
        Ok(self.inner)
    }
}

/// Streams `(qid, L x H embeddings)` records.
pub struct BembReader<R: Read> {
    inner: R,
    hidden: usize,
    done: bool,
}

impl<R: Read> BembReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut inner, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad BEMB magic {magic:?}")));
        }
        let version = read_u32(&mut inner, "version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported BEMB version {version}")));
        }
        let hidden = read_u32(&mut inner, "hidden size")? as usize;
        Ok(Self {
            inner,
            hidden,
            done: false,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn next_record(&mut self) -> Result<Option<(String, Tensor<f32>)>> {
        let mut head = [0u8; 4];
        if !read_or_eof(&mut self.inner, &mut head)? {
            return Ok(None);
        }
        let mut qid = vec![0u8; u32::from_le_bytes(head) as usize];
        read_exact(&mut self.inner, &mut qid, "qid")?;
        let qid = String::from_utf8(qid).map_err(|_| Error::Format("qid is not UTF-8".into()))?;
        let len = read_u32(&mut self.inner, "sequence length")? as usize;
        let mut raw = vec![0u8; len * self.hidden * 4];
        read_exact(&mut self.inner, &mut raw, "embedding values")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Some((qid, Tensor::from_vec(&[len, self.hidden], data)?)))
    }
}

impl<R: Read> Iterator for BembReader<R> {
    type Item = Result<(String, Tensor<f32>)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let r = self.next_record().transpose();
        if !matches!(r, Some(Ok(_))) {
            self.done = true;
        }
        r
    }
}

pub fn open_bemb(path: &Path) -> Result<BembReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BembReader::new(BufReader::new(file))
}

pub fn write_bemb<'a>(
    path: &Path,
    hidden: usize,
    records: impl IntoIterator<Item = (&'a str, &'a Tensor<f32>)>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BembWriter::new(BufWriter::new(file), hidden)?;
    for (qid, t) in records {
        w.write_record(qid, t)?;
    }
    w.finish().map(drop)
}

/// Pair each record with its feature by qid.
///
/// A record must hold either exactly `valid_len` rows or a full padded
/// window of `max_seq_len` rows; rows from `valid_len` on are zeroed.
pub fn attach_embeddings<'f, R: Read + 'f>(
    reader: BembReader<R>,
    features: &'f [Feature],
    expected_hidden: usize,
) -> Result<impl Iterator<Item = Result<EmbeddedSequence>> + 'f> {
    if reader.hidden() != expected_hidden {
        return Err(Error::ShapeMismatch {
            op: "BEMB hidden size",
            left: vec![expected_hidden],
            right: vec![reader.hidden()],
        });
    }
    let by_qid: HashMap<&str, &Feature> = features.iter().map(|f| (f.qid.as_str(), f)).collect();
    Ok(reader.map(move |rec| {
        let (qid, emb) = rec?;
        let feature = *by_qid.get(qid.as_str()).ok_or_else(|| Error::UnknownQid(qid.clone()))?;
        pad_record(feature, &emb, expected_hidden)
    }))
}

/// Check a record's row count against `feature` and pad it to `max_seq_len`.
pub fn pad_record(feature: &Feature, emb: &Tensor<f32>, hidden: usize) -> Result<EmbeddedSequence> {
    let rows = emb.dim(0);
    if rows != feature.valid_len && rows != feature.max_seq_len() {
        return Err(Error::Format(format!(
            "record `{}` has {rows} rows; feature expects {} (valid) or {} (padded)",
            feature.qid,
            feature.valid_len,
            feature.max_seq_len()
        )));
    }
    let mut padded = Tensor::zeros(&[feature.max_seq_len(), hidden]);
    for l in 0..feature.valid_len {
        padded.row_mut(l).copy_from_slice(emb.row(l));
    }
    Ok(EmbeddedSequence {
        feature: feature.clone(),
        embeddings: padded,
    })
}

/// Open a BEMB file and stream sequences matched to `features`.
pub fn load_embeddings<'f>(
    path: &Path,
    features: &'f [Feature],
    expected_hidden: usize,
) -> Result<impl Iterator<Item = Result<EmbeddedSequence>> + 'f> {
    attach_embeddings(open_bemb(path)?, features, expected_hidden)
}
