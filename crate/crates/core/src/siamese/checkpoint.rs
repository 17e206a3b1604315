//! SIAM checkpoint files.
//!
//! ```text
//! "SIAM" | u32 version
//! u32 input_dim | u32 hidden | u32 max_seq_len | u64 dropout (f64 bits)
//! u8 shared_weights | u64 seed | u32 n_hidden_layers | u32 width × n
//! f32 tensors in SiameseParams::tensors order, row-major
//! ```
//! All integers and floats little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ModelConfig, SiameseModel};
use crate::binio::{write_f32s, LeReader};
use crate::error::{Error, Result};

pub const SIAM_MAGIC: &[u8; 4] = b"SIAM";
pub const SIAM_VERSION: u32 = 1;

fn narrow(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v)
        .map_err(|_| Error::Format(format!("{what} {v} does not fit the checkpoint header")))
}

pub fn write_model<W: Write>(mut w: W, model: &SiameseModel) -> Result<()> {
    model.validate()?;
    let c = &model.config;
    let mut head = Vec::new();
    head.extend_from_slice(SIAM_MAGIC);
    head.extend_from_slice(&SIAM_VERSION.to_le_bytes());
    head.extend_from_slice(&narrow(c.input_dim, "input_dim")?.to_le_bytes());
    head.extend_from_slice(&narrow(c.hidden, "hidden")?.to_le_bytes());
    head.extend_from_slice(&narrow(c.max_seq_len, "max_seq_len")?.to_le_bytes());
    head.extend_from_slice(&c.dropout.to_bits().to_le_bytes());
    head.push(u8::from(c.shared_weights));
    head.extend_from_slice(&c.seed.to_le_bytes());
    head.extend_from_slice(&narrow(c.head_hidden.len(), "head depth")?.to_le_bytes());
    for &width in &c.head_hidden {
        head.extend_from_slice(&narrow(width, "head width")?.to_le_bytes());
    }
    w.write_all(&head)?;
    for t in model.params.tensors() {
        write_f32s(&mut w, t.iter().map(|&x| x as f32))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<SiameseModel> {
    let mut r = LeReader::new(r);
    r.magic(SIAM_MAGIC)?;
    let version = r.u32("version")?;
    if version != SIAM_VERSION {
        return Err(Error::Format(format!("unsupported SIAM version {version}")));
    }
    let input_dim = r.u32("input_dim")? as usize;
    let hidden = r.u32("hidden")? as usize;
    let max_seq_len = r.u32("max_seq_len")? as usize;
    let dropout = f64::from_bits(r.u64("dropout")?);
    let shared_weights = match r.u8("shared flag")? {
        0 => false,
        1 => true,
        other => {
            return Err(Error::Corrupt {
                offset: r.offset() - 1,
                message: format!("shared flag must be 0 or 1, found {other}"),
            })
        }
    };
    let seed = r.u64("seed")?;
    let depth = r.u32("head depth")? as usize;
    if depth > 64 {
        return Err(Error::Corrupt {
            offset: r.offset() - 4,
            message: format!("implausible head depth {depth}"),
        });
    }
    let head_hidden = (0..depth)
        .map(|_| r.u32("head width").map(|w| w as usize))
        .collect::<Result<Vec<_>>>()?;
    let config = ModelConfig {
        input_dim,
        hidden,
        head_hidden,
        dropout,
        shared_weights,
        max_seq_len,
        seed,
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("invalid checkpoint hyperparameters: {e}")))?;
    let mut model = SiameseModel::zeros(config)?;
    let mut buf = Vec::new();
    for t in model.params.tensors_mut() {
        buf.resize(t.len(), 0.0f32);
        let start = r.offset();
        r.f32_into(&mut buf, "parameter tensor")?;
        if let Some(pos) = buf.iter().position(|x| !x.is_finite()) {
            return Err(Error::Corrupt {
                offset: start + 4 * pos as u64,
                message: "non-finite parameter".into(),
            });
        }
        for (dst, &src) in t.iter_mut().zip(&buf) {
            *dst = f64::from(src);
        }
    }
    if !r.at_end()? {
        return Err(Error::Corrupt {
            offset: r.offset(),
            message: "trailing bytes after parameters".into(),
        });
    }
    Ok(model)
}

pub fn save_model(model: &SiameseModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(BufWriter::new(f), model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SiameseModel> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(f))
}
