//! `CDL1` binary dictionary files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes      | field                                               |
//! |------------|-----------------------------------------------------|
//! | 4          | magic `CDL1`                                        |
//! | 4          | `u32` atom dimension                                |
//! | 4          | `u32` atoms per sub-dictionary `M`                  |
//! | 1          | mode: 0 coupled, 1 separate pair, 2 single          |
//! | 3          | reserved, zero                                      |
//! | 8·dim·M    | focused (or single) atoms, `f64`, column-major      |
//! | 8·dim·M    | blurred atoms, omitted for mode 2                   |
//! | 4          | CRC-32 (IEEE) of every preceding byte               |

use std::path::Path;

use nalgebra::DMatrix;

use crate::dictionary_learning::{CoupledDictionary, LearningMode};
use crate::error::{Error, Result};
use crate::imaging::write_atomic;
use crate::sparse_coding::{Dictionary, DictionaryLabel};

pub const MAGIC: &[u8; 4] = b"CDL1";
const HEADER_LEN: usize = 16;
/// Column-norm tolerance applied on load.
pub const LOAD_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DictionaryMode {
    Coupled = 0,
    SeparatePair = 1,
    Single = 2,
}

impl DictionaryMode {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Coupled),
            1 => Some(Self::SeparatePair),
            2 => Some(Self::Single),
            _ => None,
        }
    }
}

/// Contents of a dictionary file.
#[derive(Debug, Clone, PartialEq)]
pub enum DictionaryFile {
    Pair(CoupledDictionary),
    Single(Dictionary),
}

impl DictionaryFile {
    pub fn mode(&self) -> DictionaryMode {
        match self {
            DictionaryFile::Pair(cd) => match cd.mode {
                LearningMode::Coupled => DictionaryMode::Coupled,
                LearningMode::Separate => DictionaryMode::SeparatePair,
            },
            DictionaryFile::Single(_) => DictionaryMode::Single,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DictionaryFile::Pair(cd) => cd.dim(),
            DictionaryFile::Single(d) => d.dim(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (dim, m, mats): (usize, usize, Vec<&DMatrix<f64>>) = match self {
            DictionaryFile::Pair(cd) => (cd.dim(), cd.atoms(), vec![cd.focused.matrix(), cd.blurred.matrix()]),
            DictionaryFile::Single(d) => (d.dim(), d.len(), vec![d.matrix()]),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * dim * m * mats.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(m as u32).to_le_bytes());
        out.push(self.mode() as u8);
        out.extend_from_slice(&[0, 0, 0]);
        for mat in mats {
            // nalgebra storage is column-major already
            for v in mat.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN + 4 {
            return Err(Error::format(origin, "file too short for a CDL1 header"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        if &body[..4] != MAGIC {
            return Err(Error::format(origin, "bad magic, expected CDL1"));
        }
        let dim = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes")) as usize;
        let m = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
        let mode = DictionaryMode::from_byte(body[12])
            .ok_or_else(|| Error::format(origin, format!("unknown mode byte {}", body[12])))?;
        if body[13..16] != [0, 0, 0] {
            return Err(Error::format(origin, "reserved header bytes are not zero"));
        }
        if dim == 0 || m == 0 {
            return Err(Error::format(origin, "empty dictionary"));
        }
        let halves = if mode == DictionaryMode::Single { 1 } else { 2 };
        let expected = HEADER_LEN + 8 * dim * m * halves;
        if body.len() != expected {
            return Err(Error::format(
                origin,
                format!("payload is {} bytes, expected {expected}", body.len()),
            ));
        }
        let read = |k: usize, label: DictionaryLabel| -> Result<Dictionary> {
            let start = HEADER_LEN + 8 * dim * m * k;
            let values: Vec<f64> = body[start..start + 8 * dim * m]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            Dictionary::with_tolerance(DMatrix::from_vec(dim, m, values), label, LOAD_NORM_TOL)
                .map_err(|e| Error::format(origin, e.to_string()))
        };
        Ok(match mode {
            DictionaryMode::Single => DictionaryFile::Single(read(0, DictionaryLabel::Single)?),
            DictionaryMode::Coupled | DictionaryMode::SeparatePair => {
                let learning = if mode == DictionaryMode::Coupled {
                    LearningMode::Coupled
                } else {
                    LearningMode::Separate
                };
                DictionaryFile::Pair(CoupledDictionary::new(
                    read(0, DictionaryLabel::Focused)?,
                    read(1, DictionaryLabel::Blurred)?,
                    learning,
                )?)
            }
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
