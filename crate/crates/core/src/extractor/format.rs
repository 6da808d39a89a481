//! Binary model file.
//!
//! ```text
//! magic        4 bytes  "ROIX"
//! version      u32      1
//! descriptor   u32s     template_input,
//!                       n_template_stages, channels...,
//!                       3 x (input_size, n_stages, channels...)  B224, B112, B56
//!                       n_head_layers, channels...
//! tensor_count u32
//! tensors      u32 rank, u32 dims[rank], f64 values (row-major)
//! ```
//!
//! All integers and floats are little-endian. Tensors follow the
//! [`ParamSet`](crate::nn::ParamSet) order of [`ModelParams`]: each branch
//! B224, B112, B56 stage by stage (kernels, then bias), the template stages,
//! then the head layers.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::model::{build_model_with, ArchSpec, BranchId, ModelParams};
use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"ROIX";
pub const VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_list(buf: &mut Vec<u8>, values: &[usize]) {
    put_u32(buf, values.len());
    for &v in values {
        put_u32(buf, v);
    }
}

/// Serialises a model to bytes.
pub fn write_model(params: &ModelParams) -> Vec<u8> {
    let arch = params.arch();
    let mut buf = Vec::with_capacity(16 + params.parameter_count() * 8);
    buf.extend_from_slice(&MAGIC);
    put_u32(&mut buf, VERSION as usize);
    put_u32(&mut buf, arch.template_input);
    put_list(&mut buf, &arch.template_channels);
    for b in BranchId::ALL {
        put_u32(&mut buf, b.input_size());
        put_list(&mut buf, &arch.branch_channels[b.index()]);
    }
    put_list(&mut buf, &arch.head_channels);

    let tensors = params.tensors();
    put_u32(&mut buf, tensors.len());
    for t in tensors {
        put_u32(&mut buf, t.shape().len());
        for &d in t.shape() {
            put_u32(&mut buf, d);
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    let bytes = write_model(params);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                field,
                format!("truncated: needed {n} bytes at offset {}", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<usize> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn list(&mut self, field: &str) -> Result<Vec<usize>> {
        let n = self.u32(&format!("{field} count"))?;
        if n > 64 {
            return Err(Error::format(field, format!("implausible layer count {n}")));
        }
        (0..n).map(|i| self.u32(&format!("{field}[{i}]"))).collect()
    }
}

/// Names of the tensors in serialisation order, for error messages.
fn tensor_names(arch: &ArchSpec) -> Vec<String> {
    let mut names = Vec::new();
    for b in BranchId::ALL {
        for i in 0..arch.branch_channels[b.index()].len() {
            names.push(format!("branch {b} stage {i} kernels"));
            names.push(format!("branch {b} stage {i} bias"));
        }
    }
    for i in 0..arch.template_channels.len() {
        names.push(format!("template stage {i} kernels"));
        names.push(format!("template stage {i} bias"));
    }
    for i in 0..arch.head_channels.len() {
        names.push(format!("head layer {i} kernels"));
        names.push(format!("head layer {i} bias"));
    }
    names
}

/// Parses a model; never returns a partially filled model.
pub fn read_model(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format("magic", "expected \"ROIX\""));
    }
    let version = r.u32("version")?;
    if version != VERSION as usize {
        return Err(Error::format("version", format!("unsupported version {version}")));
    }
    let template_input = r.u32("template input")?;
    let template_channels = r.list("template channels")?;
    let mut branch_channels: [Vec<usize>; 3] = Default::default();
    for b in BranchId::ALL {
        let size = r.u32(&format!("branch {b} input size"))?;
        if size != b.input_size() {
            return Err(Error::format(
                format!("branch {b} input size"),
                format!("expected {}, found {size}", b.input_size()),
            ));
        }
        branch_channels[b.index()] = r.list(&format!("branch {b} channels"))?;
    }
    let head_channels = r.list("head channels")?;
    let arch = ArchSpec {
        template_input,
        branch_channels,
        template_channels,
        head_channels,
    };
    let mut params = build_model_with(arch.clone(), 0)
        .map_err(|e| Error::format("architecture descriptor", e.to_string()))?;

    let names = tensor_names(&arch);
    let count = r.u32("tensor count")?;
    if count != names.len() {
        return Err(Error::format(
            "tensor count",
            format!("descriptor implies {}, file has {count}", names.len()),
        ));
    }
    let mut loaded = Vec::with_capacity(count);
    for (name, expected) in names.iter().zip(params.tensors()) {
        let rank = r.u32(&format!("{name} rank"))?;
        let shape = (0..rank.min(8))
            .map(|_| r.u32(&format!("{name} shape")))
            .collect::<Result<Vec<_>>>()?;
        if shape != expected.shape() {
            return Err(Error::format(
                name.as_str(),
                format!("shape {shape:?} does not match expected {:?}", expected.shape()),
            ));
        }
        let n = expected.len();
        let raw = r.take(n * 8, name)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(&shape, data).map_err(|e| Error::format(name.as_str(), e.to_string()))?;
        loaded.push(t);
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            "trailer",
            format!("{} unexpected bytes after the last tensor", bytes.len() - r.pos),
        ));
    }
    for (dst, src) in params.tensors_mut().into_iter().zip(loaded) {
        *dst = src;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::build_model;

    #[test]
    fn round_trip_is_bitwise() {
        let p = build_model(11);
        let back = read_model(&write_model(&p)).unwrap();
        assert_eq!(p, back);
        for (a, b) in p.tensors().iter().zip(back.tensors()) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn truncation_is_a_format_error() {
        let bytes = write_model(&build_model(1));
        for cut in [2, 10, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(read_model(&bytes[..cut]), Err(Error::Format { .. })), "cut {cut}");
        }
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = write_model(&build_model(1));
        bytes[0] = b'X';
        match read_model(&bytes) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "magic"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_names_the_tensor() {
        let mut bytes = write_model(&build_model(1));
        // first tensor rank sits right after the descriptor and count
        let arch = ArchSpec::default();
        let descriptor_len = 4 * (1 + 1 + arch.template_channels.len())
            + arch.branch_channels.iter().map(|c| 4 * (2 + c.len())).sum::<usize>()
            + 4 * (1 + arch.head_channels.len());
        let first_dim = 4 + 4 + descriptor_len + 4 + 4;
        bytes[first_dim] = 17;
        match read_model(&bytes) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "branch B224 stage 0 kernels"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
