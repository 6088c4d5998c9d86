//! JSON checkpoints.
//!
//! Layout: `{"format": "bandsleep-lstm", "version": 1, "hyperparams": {...},
//! "model": {"window_k", "norm": {"offset", "scale", "num_bands"},
//! "layers": [{"input_size", "hidden_size", "weights", "bias"}, ...],
//! "head": {"weights", "bias"}}}`. Layer weights are row-major
//! `4H x (I + H)` matrices with gate row blocks ordered input, forget,
//! candidate, output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Hyperparams, LstmModel};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "bandsleep-lstm";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub hyperparams: Hyperparams,
    pub model: LstmModel,
}

impl Checkpoint {
    pub fn new(hyperparams: Hyperparams, model: LstmModel) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            hyperparams,
            model,
        }
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    serde_json::to_writer(&mut w, ckpt)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Checkpoint> {
    let ckpt: Checkpoint = serde_json::from_reader(r)?;
    if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported checkpoint {} v{}",
            ckpt.format, ckpt.version
        )));
    }
    ckpt.model.check_shapes()?;
    Ok(ckpt)
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), ckpt)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::Normalization;

    #[test]
    fn round_trip_is_exact() {
        let hp = Hyperparams {
            hidden_size: 3,
            num_layers: 2,
            window_k: 4,
            seed: 8,
            ..Hyperparams::default()
        };
        let ckpt = Checkpoint::new(hp.clone(), LstmModel::seeded(&hp, Normalization::for_bands(4)));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ckpt).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, ckpt);

        let mut again = Vec::new();
        write_checkpoint(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_foreign_files() {
        let hp = Hyperparams {
            hidden_size: 2,
            num_layers: 1,
            window_k: 2,
            ..Hyperparams::default()
        };
        let mut ckpt = Checkpoint::new(hp.clone(), LstmModel::seeded(&hp, Normalization::for_bands(4)));
        ckpt.version = 9;
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ckpt).unwrap();
        assert!(read_checkpoint(buf.as_slice()).is_err());
        assert!(read_checkpoint("{}".as_bytes()).is_err());
    }
}
