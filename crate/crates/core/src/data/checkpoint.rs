//! `SAEC` network checkpoints.
//!
//! Layout (little-endian): magic `SAEC`, `u16` version, `u32` layer count;
//! per layer `u32 n_out, u32 n_in, f32 alpha, f32 v_th`; then each layer's
//! weights as row-major `f32`; then the training configuration block.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::lif::{LifLayer, NeuronConfig};
use crate::network::{SpikingNetwork, TrainConfig};
use crate::tensor::Matrix;

const MAGIC: &[u8; 4] = b"SAEC";
pub const CHECKPOINT_VERSION: u16 = 1;
const CONFIG_BYTES: usize = 4 * 2 + 4 + 4 * 2 + 4 * 2 + 8 + 4 + 4 + 1;

pub fn encode_checkpoint(net: &SpikingNetwork, cfg: &TrainConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(CHECKPOINT_VERSION).unwrap();
    out.write_u32::<LittleEndian>(net.layers().len() as u32)
        .unwrap();
    for l in net.layers() {
        out.write_u32::<LittleEndian>(l.n_out() as u32).unwrap();
        out.write_u32::<LittleEndian>(l.n_in() as u32).unwrap();
        out.write_f32::<LittleEndian>(l.neuron.alpha).unwrap();
        out.write_f32::<LittleEndian>(l.neuron.v_th).unwrap();
    }
    for l in net.layers() {
        for &w in l.weights.as_slice() {
            out.write_f32::<LittleEndian>(w).unwrap();
        }
    }
    out.write_f32::<LittleEndian>(cfg.alpha).unwrap();
    out.write_f32::<LittleEndian>(cfg.v_th).unwrap();
    out.write_u32::<LittleEndian>(cfg.steps as u32).unwrap();
    out.write_f32::<LittleEndian>(cfg.lr).unwrap();
    out.write_f32::<LittleEndian>(cfg.weight_decay).unwrap();
    out.write_u32::<LittleEndian>(cfg.batch_size as u32)
        .unwrap();
    out.write_u32::<LittleEndian>(cfg.epochs as u32).unwrap();
    out.write_u64::<LittleEndian>(cfg.seed).unwrap();
    out.write_u32::<LittleEndian>(cfg.hidden_steps as u32)
        .unwrap();
    out.write_f32::<LittleEndian>(cfg.max_rate).unwrap();
    out.write_u8(cfg.use_mask as u8).unwrap();
    out
}

fn short(what: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |_| Error::Consistency(format!("checkpoint truncated in {what}"))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(SpikingNetwork, TrainConfig)> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(short("header"))?;
    if &magic != MAGIC {
        return Err(Error::Format {
            what: "SAEC checkpoint",
            detail: format!("magic {:?}", String::from_utf8_lossy(&magic)),
        });
    }
    let version = cur.read_u16::<LittleEndian>().map_err(short("header"))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            what: "SAEC checkpoint",
            detail: format!("version {version}, expected {CHECKPOINT_VERSION}"),
        });
    }
    let n_layers = cur.read_u32::<LittleEndian>().map_err(short("header"))? as usize;
    let mut shapes = Vec::with_capacity(n_layers.min(64));
    let mut total = 0usize;
    for _ in 0..n_layers {
        let n_out = cur
            .read_u32::<LittleEndian>()
            .map_err(short("layer table"))? as usize;
        let n_in = cur
            .read_u32::<LittleEndian>()
            .map_err(short("layer table"))? as usize;
        let alpha = cur
            .read_f32::<LittleEndian>()
            .map_err(short("layer table"))?;
        let v_th = cur
            .read_f32::<LittleEndian>()
            .map_err(short("layer table"))?;
        total = total.saturating_add(n_out.saturating_mul(n_in));
        shapes.push((n_out, n_in, alpha, v_th));
    }
    let remaining = bytes.len() - cur.position() as usize;
    let expected = total.saturating_mul(4).saturating_add(CONFIG_BYTES);
    if remaining != expected {
        return Err(Error::Consistency(format!(
            "checkpoint body is {remaining} bytes, layer table implies {expected}"
        )));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (n_out, n_in, alpha, v_th) in shapes {
        let mut data = vec![0f32; n_out * n_in];
        cur.read_f32_into::<LittleEndian>(&mut data)
            .map_err(short("weights"))?;
        let neuron = NeuronConfig::new(alpha, v_th)
            .map_err(|e| Error::Consistency(format!("checkpoint layer neuron: {e}")))?;
        layers.push(LifLayer::new(Matrix::from_vec(n_out, n_in, data)?, neuron)?);
    }
    let net = SpikingNetwork::new(layers)?;
    let c = short("config block");
    let cfg = TrainConfig {
        alpha: cur.read_f32::<LittleEndian>().map_err(&c)?,
        v_th: cur.read_f32::<LittleEndian>().map_err(&c)?,
        steps: cur.read_u32::<LittleEndian>().map_err(&c)? as usize,
        lr: cur.read_f32::<LittleEndian>().map_err(&c)?,
        weight_decay: cur.read_f32::<LittleEndian>().map_err(&c)?,
        batch_size: cur.read_u32::<LittleEndian>().map_err(&c)? as usize,
        epochs: cur.read_u32::<LittleEndian>().map_err(&c)? as usize,
        seed: cur.read_u64::<LittleEndian>().map_err(&c)?,
        hidden_steps: cur.read_u32::<LittleEndian>().map_err(&c)? as usize,
        max_rate: cur.read_f32::<LittleEndian>().map_err(&c)?,
        use_mask: cur.read_u8().map_err(&c)? != 0,
    };
    Ok((net, cfg))
}

pub fn save_checkpoint(
    net: &SpikingNetwork,
    cfg: &TrainConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_file(path.as_ref(), &encode_checkpoint(net, cfg))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(SpikingNetwork, TrainConfig)> {
    decode_checkpoint(&read_file(path.as_ref())?)
}
