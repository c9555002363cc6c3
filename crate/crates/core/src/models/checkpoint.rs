//! Binary model checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "FGCK" | version u32 | kind u8 | d u32 | layers u32 | svd_rank u32 | seed u64
//! n_users u64 | n_items u64 | best_epoch u64
//! config_len u64 | config JSON | curve_len u64 | curve f64*
//! payload tag u8 (0 none, 1 embeddings, 2 projection)
//! per matrix: rows u64 | cols u64 | row-major f64*
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{EmbeddingTable, ModelConfig, ModelKind, Params, TrainedModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FGCK";
const VERSION: u32 = 1;

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_matrix(w: &mut impl Write, m: &Array2<f64>) -> Result<()> {
    put_u64(w, m.nrows() as u64)?;
    put_u64(w, m.ncols() as u64)?;
    for x in m.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(get::<8>(r)?))
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get::<4>(r)?))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(get::<8>(r)?))
}

fn get_matrix(r: &mut impl Read) -> Result<Array2<f64>> {
    let rows = get_u64(r)? as usize;
    let cols = get_u64(r)? as usize;
    let data = (0..rows * cols).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn write_checkpoint(model: &TrainedModel, w: &mut impl Write) -> Result<()> {
    let c = &model.config;
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(w, VERSION)?;
    w.write_all(&[c.kind.code()])?;
    put_u32(w, c.embedding_size as u32)?;
    put_u32(w, c.layers as u32)?;
    put_u32(w, c.svd_rank as u32)?;
    put_u64(w, c.seed)?;
    put_u64(w, model.n_users as u64)?;
    put_u64(w, model.n_items as u64)?;
    put_u64(w, model.best_epoch as u64)?;
    let json = serde_json::to_vec(c)?;
    put_u64(w, json.len() as u64)?;
    w.write_all(&json)?;
    put_u64(w, model.validation_curve.len() as u64)?;
    for v in &model.validation_curve {
        w.write_all(&v.to_le_bytes())?;
    }
    match &model.params {
        Params::None => w.write_all(&[0])?,
        Params::Embeddings(t) => {
            w.write_all(&[1])?;
            put_matrix(w, &t.users)?;
            put_matrix(w, &t.items)?;
        }
        Params::Projection(m) => {
            w.write_all(&[2])?;
            put_matrix(w, m)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<TrainedModel> {
    if &get::<4>(r)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic number".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = ModelKind::from_code(get::<1>(r)?[0])
        .ok_or_else(|| Error::Checkpoint("unknown model kind".into()))?;
    let d = get_u32(r)? as usize;
    let layers = get_u32(r)? as usize;
    let rank = get_u32(r)? as usize;
    let seed = get_u64(r)?;
    let n_users = get_u64(r)? as usize;
    let n_items = get_u64(r)? as usize;
    let best_epoch = get_u64(r)? as usize;
    let len = get_u64(r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|e| Error::Checkpoint(format!("truncated config: {e}")))?;
    let config: ModelConfig = serde_json::from_slice(&json)?;
    if config.kind != kind || config.embedding_size != d || config.layers != layers || config.svd_rank != rank || config.seed != seed {
        return Err(Error::Checkpoint("header disagrees with stored config".into()));
    }
    let n_curve = get_u64(r)? as usize;
    let validation_curve = (0..n_curve).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
    let params = match get::<1>(r)?[0] {
        0 => Params::None,
        1 => Params::Embeddings(EmbeddingTable {
            users: get_matrix(r)?,
            items: get_matrix(r)?,
        }),
        2 => Params::Projection(get_matrix(r)?),
        t => return Err(Error::Checkpoint(format!("unknown payload tag {t}"))),
    };
    Ok(TrainedModel {
        config,
        n_users,
        n_items,
        params,
        best_epoch,
        validation_curve,
        warnings: Vec::new(),
    })
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_checkpoint(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    read_checkpoint(&mut BufReader::new(fs::File::open(path)?))
}
