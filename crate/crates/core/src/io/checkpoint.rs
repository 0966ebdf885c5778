//! Model checkpoint persistence.
//!
//! Layout: magic `FDDNN001`, u32 version, the layer table (kind, channel
//! dims, dilation, bias flag), the 32-bit little-endian parameter payload
//! in enumeration order (convolutions: weight then bias; batch norms:
//! gamma, beta, running mean, running variance), the mask block, and the
//! training metadata (best epoch plus the loss history). A trained model
//! carries its feedback format: the mask travels inside the checkpoint.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::masking::Mask;
use crate::nn::{Architecture, BatchNormLayer, ConvLayer, Layer, ModelParams};
use crate::training::EpochLoss;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FDDNN001";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model bundled with its mask and training history.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelParams<f32>,
    pub mask: Mask,
    pub best_epoch: u32,
    pub curve: Vec<EpochLoss>,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;

    // Layer table.
    let layers = &ckpt.model.layers;
    w.write_all(&(layers.len() as u32).to_le_bytes())?;
    for layer in layers {
        match layer {
            Layer::Conv(c) => {
                w.write_all(&[0u8, 1u8])?;
                w.write_all(&(c.in_channels as u32).to_le_bytes())?;
                w.write_all(&(c.out_channels as u32).to_le_bytes())?;
                w.write_all(&(c.dilation as u32).to_le_bytes())?;
            }
            Layer::Norm(n) => {
                w.write_all(&[1u8, 0u8])?;
                w.write_all(&(n.channels() as u32).to_le_bytes())?;
                w.write_all(&(n.channels() as u32).to_le_bytes())?;
                w.write_all(&0u32.to_le_bytes())?;
            }
            Layer::Relu => {
                w.write_all(&[2u8, 0u8])?;
                w.write_all(&0u32.to_le_bytes())?;
                w.write_all(&0u32.to_le_bytes())?;
                w.write_all(&0u32.to_le_bytes())?;
            }
        }
    }

    // Parameter payload.
    let mut payload: Vec<f32> = Vec::new();
    for layer in layers {
        match layer {
            Layer::Conv(c) => {
                payload.extend_from_slice(c.weight.data());
                payload.extend_from_slice(&c.bias);
            }
            Layer::Norm(n) => {
                payload.extend_from_slice(&n.gamma);
                payload.extend_from_slice(&n.beta);
                payload.extend_from_slice(&n.running_mean);
                payload.extend_from_slice(&n.running_var);
            }
            Layer::Relu => {}
        }
    }
    w.write_all(&(payload.len() as u64).to_le_bytes())?;
    for v in &payload {
        w.write_all(&v.to_le_bytes())?;
    }

    // Mask block: dims, ones count, kept positions in canonical order.
    w.write_all(&(ckpt.mask.na() as u32).to_le_bytes())?;
    w.write_all(&(ckpt.mask.nc() as u32).to_le_bytes())?;
    let kept = ckpt.mask.kept_positions();
    w.write_all(&(kept.len() as u32).to_le_bytes())?;
    for (a, c) in kept {
        w.write_all(&((a * ckpt.mask.nc() + c) as u32).to_le_bytes())?;
    }

    // Training metadata.
    w.write_all(&ckpt.best_epoch.to_le_bytes())?;
    w.write_all(&(ckpt.curve.len() as u32).to_le_bytes())?;
    for row in &ckpt.curve {
        w.write_all(&(row.epoch as u32).to_le_bytes())?;
        w.write_all(&(row.train_loss as f32).to_le_bytes())?;
        w.write_all(&(row.val_loss as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Corruption("file shorter than checkpoint header".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unknown checkpoint version {version}")));
    }

    let n_layers = read_u32(&mut r)? as usize;
    #[derive(Clone, Copy)]
    struct Row {
        kind: u8,
        in_ch: usize,
        out_ch: usize,
        dilation: usize,
    }
    let mut rows = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let mut kb = [0u8; 2];
        r.read_exact(&mut kb)
            .map_err(|_| Error::Corruption("truncated layer table".into()))?;
        rows.push(Row {
            kind: kb[0],
            in_ch: read_u32(&mut r)? as usize,
            out_ch: read_u32(&mut r)? as usize,
            dilation: read_u32(&mut r)? as usize,
        });
    }

    let payload_len = {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Corruption("truncated payload length".into()))?;
        u64::from_le_bytes(buf) as usize
    };
    let mut payload = vec![0f32; payload_len];
    for v in &mut payload {
        *v = read_f32(&mut r)?;
    }

    // Rebuild layers from the table and payload.
    let mut layers: Vec<Layer<f32>> = Vec::with_capacity(n_layers);
    let mut hidden_channels = Vec::new();
    let mut dilations = Vec::new();
    let mut offset = 0usize;
    let take = |payload: &[f32], offset: &mut usize, len: usize| -> Result<Vec<f32>> {
        if *offset + len > payload.len() {
            return Err(Error::Corruption("payload shorter than layer table".into()));
        }
        let out = payload[*offset..*offset + len].to_vec();
        *offset += len;
        Ok(out)
    };
    for row in &rows {
        match row.kind {
            0 => {
                let mut conv = ConvLayer::<f32>::zeros(row.in_ch, row.out_ch, row.dilation);
                let wlen = 9 * row.in_ch * row.out_ch;
                conv.weight
                    .data_mut()
                    .copy_from_slice(&take(&payload, &mut offset, wlen)?);
                conv.bias = take(&payload, &mut offset, row.out_ch)?;
                if row.out_ch != 2 {
                    hidden_channels.push(row.out_ch);
                    dilations.push(row.dilation);
                }
                layers.push(Layer::Conv(conv));
            }
            1 => {
                let c = row.in_ch;
                let mut bn = BatchNormLayer::<f32>::new(c);
                bn.gamma = take(&payload, &mut offset, c)?;
                bn.beta = take(&payload, &mut offset, c)?;
                bn.running_mean = take(&payload, &mut offset, c)?;
                bn.running_var = take(&payload, &mut offset, c)?;
                layers.push(Layer::Norm(bn));
            }
            2 => layers.push(Layer::Relu),
            other => {
                return Err(Error::Format(format!("unknown layer kind {other}")));
            }
        }
    }
    if offset != payload.len() {
        return Err(Error::Corruption(format!(
            "payload has {} unread values",
            payload.len() - offset
        )));
    }

    // Mask block.
    let na = read_u32(&mut r)? as usize;
    let nc = read_u32(&mut r)? as usize;
    let ones = read_u32(&mut r)? as usize;
    let mut pattern = vec![false; na * nc];
    for _ in 0..ones {
        let flat = read_u32(&mut r)? as usize;
        if flat >= na * nc {
            return Err(Error::Corruption(format!("mask index {flat} out of range")));
        }
        pattern[flat] = true;
    }
    let mask = Mask::from_pattern(na, nc, pattern)?;

    let best_epoch = read_u32(&mut r)?;
    let n_curve = read_u32(&mut r)? as usize;
    let mut curve = Vec::with_capacity(n_curve);
    for _ in 0..n_curve {
        curve.push(EpochLoss {
            epoch: read_u32(&mut r)? as usize,
            train_loss: read_f32(&mut r)? as f64,
            val_loss: read_f32(&mut r)? as f64,
        });
    }

    Ok(Checkpoint {
        model: ModelParams {
            layers,
            architecture: Architecture {
                hidden_channels,
                dilations,
            },
        },
        mask,
        best_epoch,
        curve,
    })
}

/// Standalone mask persistence, used by the mask optimizer export.
pub const MASK_MAGIC: &[u8; 8] = b"FDDMSK01";

pub fn save_mask(path: &Path, mask: &Mask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MASK_MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&(mask.na() as u32).to_le_bytes())?;
    w.write_all(&(mask.nc() as u32).to_le_bytes())?;
    let kept = mask.kept_positions();
    w.write_all(&(kept.len() as u32).to_le_bytes())?;
    for (a, c) in kept {
        w.write_all(&((a * mask.nc() + c) as u32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Corruption("file shorter than mask header".into()))?;
    if &magic != MASK_MAGIC {
        return Err(Error::Format("bad mask magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != 1 {
        return Err(Error::Format(format!("unknown mask version {version}")));
    }
    let na = read_u32(&mut r)? as usize;
    let nc = read_u32(&mut r)? as usize;
    let ones = read_u32(&mut r)? as usize;
    let mut pattern = vec![false; na * nc];
    for _ in 0..ones {
        let flat = read_u32(&mut r)? as usize;
        if flat >= na * nc {
            return Err(Error::Corruption(format!("mask index {flat} out of range")));
        }
        pattern[flat] = true;
    }
    Mask::from_pattern(na, nc, pattern)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Corruption("truncated checkpoint file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Corruption("truncated checkpoint file".into()))?;
    Ok(f32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::uniform_mask;
    use crate::nn::Architecture;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("fddcsi-ck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn checkpoint_roundtrip_bit_identical() {
        let arch = Architecture {
            hidden_channels: vec![4, 8],
            dilations: vec![2, 1],
        };
        let model = ModelParams::<f32>::new(&arch, 9).unwrap();
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        let ckpt = Checkpoint {
            model,
            mask,
            best_epoch: 3,
            curve: vec![
                EpochLoss {
                    epoch: 0,
                    train_loss: 0.5,
                    val_loss: 0.6,
                },
                EpochLoss {
                    epoch: 1,
                    train_loss: 0.25,
                    val_loss: 0.3,
                },
            ],
        };
        let path = tmpdir().join("model.bin");
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.model, ckpt.model);
        assert_eq!(back.mask, ckpt.mask);
        assert_eq!(back.best_epoch, 3);
        assert_eq!(back.curve.len(), 2);
        // Second save is byte-identical.
        let path2 = tmpdir().join("model2.bin");
        save_checkpoint(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn unknown_version_rejected() {
        let path = tmpdir().join("badver.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&99u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    }

    #[test]
    fn mask_file_roundtrip() {
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        let path = tmpdir().join("mask.bin");
        save_mask(&path, &mask).unwrap();
        let back = load_mask(&path).unwrap();
        assert_eq!(back, mask);
    }
}
