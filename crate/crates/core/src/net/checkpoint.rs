//! Binary model checkpoint.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//!
//! ```text
//! magic   8 bytes  "STLSTM01"
//! header  p, h, direction (0 = uni, 1 = bi), num_layers, V
//! tensors embedding (V x p)
//!         for each layer: forward W, forward b, [backward W, backward b]
//!         dense w, dense b
//! ```
//!
//! Matrices are row-major in the shapes documented on [`LstmParams`]. Run
//! configuration and seed live in a JSON sidecar written by the caller.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DenseParams, Direction, LstmLayer, LstmParams, NetConfig, Network};
use crate::embed::{read_f64, read_u64, EmbeddingMatrix};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"STLSTM01";

fn write_all(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_vec(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

fn write_net(net: &Network, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    let dir = match net.config.direction {
        Direction::Uni => 0u64,
        Direction::Bi => 1,
    };
    for v in [
        net.embedding.dim() as u64,
        net.config.hidden_units as u64,
        dir,
        net.layers.len() as u64,
        net.embedding.vocab_size() as u64,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    write_all(w, net.embedding.values())?;
    for layer in &net.layers {
        for p in layer.params() {
            write_all(w, &p.w)?;
            write_all(w, &p.b)?;
        }
    }
    write_all(w, &net.dense.w)?;
    write_all(w, &[net.dense.b])
}

pub fn write_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_net(net, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Rebuilds a network. `config` supplies the fields the binary header does
/// not carry (dropout, seed); its shape fields must agree with the header.
pub fn read_checkpoint(path: impl AsRef<Path>, config: &NetConfig) -> Result<Network> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::parse(path, 0, "not a model checkpoint"));
    }
    let p = read_u64(&mut r).map_err(io)? as usize;
    let h = read_u64(&mut r).map_err(io)? as usize;
    let direction = match read_u64(&mut r).map_err(io)? {
        0 => Direction::Uni,
        1 => Direction::Bi,
        other => return Err(Error::parse(path, 0, format!("bad direction code {other}"))),
    };
    let num_layers = read_u64(&mut r).map_err(io)? as usize;
    let vocab = read_u64(&mut r).map_err(io)? as usize;
    if h != config.hidden_units || direction != config.direction || num_layers != config.num_layers
    {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint is h={h} {direction} x{num_layers}, sidecar says h={} {} x{}",
            config.hidden_units, config.direction, config.num_layers
        )));
    }

    let rows = read_vec(&mut r, vocab * p).map_err(io)?;
    let embedding =
        EmbeddingMatrix::from_rows(rows.chunks(p.max(1)).map(<[f64]>::to_vec).collect())?;

    let mut layers = Vec::with_capacity(num_layers);
    let mut input_dim = p;
    for _ in 0..num_layers {
        let mut read_params = || -> std::io::Result<LstmParams> {
            let w = read_vec(&mut r, 4 * h * (input_dim + h))?;
            let b = read_vec(&mut r, 4 * h)?;
            Ok(LstmParams {
                input_dim,
                hidden: h,
                w,
                b,
            })
        };
        let forward = read_params().map_err(io)?;
        let backward = match direction {
            Direction::Bi => Some(read_params().map_err(io)?),
            Direction::Uni => None,
        };
        let layer = LstmLayer { forward, backward };
        input_dim = layer.output_dim();
        layers.push(layer);
    }
    let w = read_vec(&mut r, h * direction.multiplier()).map_err(io)?;
    let b = read_f64(&mut r).map_err(io)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(io)?;
    if !rest.is_empty() {
        return Err(Error::parse(
            path,
            0,
            format!("{} trailing bytes", rest.len()),
        ));
    }
    Ok(Network {
        config: config.clone(),
        embedding,
        layers,
        dense: DenseParams { w, b },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_shapes() {
        let dir = tempfile::tempdir().unwrap();
        for direction in [Direction::Uni, Direction::Bi] {
            for num_layers in 1..=2 {
                let cfg = NetConfig {
                    hidden_units: 3,
                    dropout: 0.3,
                    direction,
                    num_layers,
                    seed: 4,
                    forget_bias_one: true,
                };
                let net =
                    Network::new(cfg.clone(), EmbeddingMatrix::random(7, 5, 1).unwrap()).unwrap();
                let path = dir.path().join(format!("{direction}{num_layers}.ckpt"));
                write_checkpoint(&net, &path).unwrap();
                let back = read_checkpoint(&path, &cfg).unwrap();
                assert_eq!(back, net);

                let wrong = NetConfig {
                    hidden_units: 4,
                    ..cfg
                };
                assert!(matches!(
                    read_checkpoint(&path, &wrong),
                    Err(Error::ConfigMismatch(_))
                ));
            }
        }
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(read_checkpoint(&path, &NetConfig::default()).is_err());
    }
}
