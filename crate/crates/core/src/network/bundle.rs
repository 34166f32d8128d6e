//! Versioned binary model file.
//!
//! Layout: `"PSAN"`, `u16` version, `u16` section count, then per section a
//! 4-byte tag, `u64` payload length, payload, and the payload's CRC32. All
//! integers and floats are little-endian. Sections, in order:
//!
//! * `CONF` JSON header: network geometry, similarity kind, counts.
//! * `CONV` every layer's parameters as `f64`, in layer order.
//! * `PROT` prototype table: per prototype index, source, class, vector.
//! * `HEAD` decision head weights, `classes × prototypes`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{Conv2d, Layer, LayerKind};
use super::net::{Network, NetworkHeader};
use crate::error::{Error, Result};
use crate::model::{DecisionHead, Prototype, PrototypeModel, PrototypeSource, SimilarityKind};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 4] = b"PSAN";
pub const FORMAT_VERSION: u16 = 1;

pub type ModelBundle = PrototypeModel;

#[derive(Debug, Serialize, Deserialize)]
struct ConfigSection {
    network: NetworkHeader,
    similarity: SimilarityKind,
    classes: usize,
    prototypes: usize,
    dim: usize,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "{}: wanted {} bytes at offset {}, {} left",
                self.what,
                n,
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
}

pub fn encode_model(model: &PrototypeModel) -> Result<Vec<u8>> {
    let (dim, _, _) = model.network.output_dims();
    let conf = ConfigSection {
        network: model.network.header(),
        similarity: model.kind,
        classes: model.num_classes(),
        prototypes: model.prototypes.len(),
        dim,
    };
    let conf = serde_json::to_vec(&conf)?;

    let mut conv = Writer(Vec::new());
    for layer in model.network.layers() {
        if let Some(p) = layer.params() {
            conv.f64s(p);
        }
    }

    let mut prot = Writer(Vec::new());
    prot.u32(model.prototypes.len() as u32);
    for p in &model.prototypes {
        prot.u32(p.index as u32);
        match p.source {
            Some(s) => {
                prot.0.push(1);
                prot.u64(s.image_id);
                prot.u32(s.row as u32);
                prot.u32(s.col as u32);
            }
            None => {
                prot.0.push(0);
                prot.u64(0);
                prot.u32(0);
                prot.u32(0);
            }
        }
        prot.u32(p.class.map_or(u32::MAX, |c| c as u32));
        prot.u32(p.vector.len() as u32);
        prot.f64s(&p.vector);
    }

    let mut head = Writer(Vec::new());
    head.u32(model.head.weights.shape()[0] as u32);
    head.u32(model.head.weights.shape()[1] as u32);
    head.f64s(model.head.weights.data());

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    section(&mut out, b"CONF", &conf);
    section(&mut out, b"CONV", &conv.0);
    section(&mut out, b"PROT", &prot.0);
    section(&mut out, b"HEAD", &head.0);
    Ok(out)
}

fn read_section<'a>(r: &mut Reader<'a>, tag: &[u8; 4]) -> Result<&'a [u8]> {
    let found = r.take(4)?;
    if found != tag {
        return Err(Error::Format(format!(
            "expected section {:?}, found {:?}",
            String::from_utf8_lossy(tag),
            String::from_utf8_lossy(found)
        )));
    }
    let len = r.u64()? as usize;
    let payload = r.take(len)?;
    let crc = r.u32()?;
    if crc32fast::hash(payload) != crc {
        return Err(Error::Checksum {
            section: String::from_utf8_lossy(tag).into_owned(),
        });
    }
    Ok(payload)
}

pub fn decode_model(bytes: &[u8]) -> Result<PrototypeModel> {
    let mut r = Reader::new(bytes, "model file");
    if r.take(4).map_err(|_| Error::Format("missing magic bytes".into()))? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = r.u16()?;
    if count != 4 {
        return Err(Error::Format(format!("expected 4 sections, found {count}")));
    }
    let conf = read_section(&mut r, b"CONF")?;
    let conv = read_section(&mut r, b"CONV")?;
    let prot = read_section(&mut r, b"PROT")?;
    let head = read_section(&mut r, b"HEAD")?;
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last section".into()));
    }

    let conf: ConfigSection = serde_json::from_slice(conf)?;

    let mut cr = Reader::new(conv, "CONV section");
    let mut layers = Vec::with_capacity(conf.network.layers.len());
    for kind in &conf.network.layers {
        layers.push(match *kind {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let n = out_channels * in_channels * kernel * kernel;
                Layer::Conv2d(Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    weight: Tensor::new(vec![out_channels, in_channels, kernel, kernel], cr.f64s(n)?)?,
                })
            }
            LayerKind::Relu => Layer::Relu,
            LayerKind::MaxPool2d { kernel, stride } => Layer::MaxPool2d { kernel, stride },
            LayerKind::AddBias { channels } => Layer::AddBias {
                bias: cr.f64s(channels)?,
            },
        });
    }
    if cr.pos != conv.len() {
        return Err(Error::Format("CONV section has unused bytes".into()));
    }
    let network = Network::new(conf.network.input, conf.network.normalization, layers)
        .map_err(|e| Error::Format(format!("network header: {e}")))?;

    let mut pr = Reader::new(prot, "PROT section");
    let n = pr.u32()? as usize;
    if n != conf.prototypes {
        return Err(Error::Format("prototype count disagrees with header".into()));
    }
    let mut prototypes = Vec::with_capacity(n);
    for _ in 0..n {
        let index = pr.u32()? as usize;
        let has_source = pr.take(1)?[0] == 1;
        let image_id = pr.u64()?;
        let row = pr.u32()? as usize;
        let col = pr.u32()? as usize;
        let class = pr.u32()?;
        let dim = pr.u32()? as usize;
        if dim != conf.dim {
            return Err(Error::Format("prototype dimension disagrees with header".into()));
        }
        prototypes.push(Prototype {
            index,
            vector: pr.f64s(dim)?,
            source: has_source.then_some(PrototypeSource { image_id, row, col }),
            class: (class != u32::MAX).then_some(class as usize),
        });
    }

    let mut hr = Reader::new(head, "HEAD section");
    let classes = hr.u32()? as usize;
    let protos = hr.u32()? as usize;
    if classes != conf.classes || protos != n {
        return Err(Error::Format("head shape disagrees with header".into()));
    }
    let weights = Tensor::new(vec![classes, protos], hr.f64s(classes * protos)?)?;

    Ok(PrototypeModel {
        network,
        kind: conf.similarity,
        prototypes,
        head: DecisionHead { weights },
    })
}

pub fn save_model(model: &PrototypeModel, path: &Path) -> Result<()> {
    let bytes = encode_model(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<PrototypeModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
