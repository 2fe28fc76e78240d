//! Versioned binary snapshots of trained or precomputed backends.
//!
//! Layout: the 8-byte magic `COPRLBK\0`, a little-endian `u32` format
//! version, then a bincode body holding the header (kind, grid resolution,
//! eta, support templates, map) and the per-pair tables.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::CategoricalDist;
use crate::env::MazeMap;
use crate::geometry::Point;
use crate::grid::GridModel;

use super::{OracleBackend, QueryError, TabularBackend, ValueBackend};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"COPRLBK\0";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a backend snapshot")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("corrupt snapshot body: {0}")]
    Decode(#[from] bincode::Error),
}

/// Either backend, as stored in snapshot files.
#[derive(Debug)]
pub enum Backend {
    Oracle(OracleBackend),
    Tabular(TabularBackend),
}

impl Backend {
    pub fn kind(&self) -> &'static str {
        match self {
            Backend::Oracle(_) => "oracle",
            Backend::Tabular(_) => "tabular",
        }
    }

    fn inner(&self) -> &dyn ValueBackend {
        match self {
            Backend::Oracle(b) => b,
            Backend::Tabular(b) => b,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
        let file = std::fs::File::create(path)?;
        save_backend(self, std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SnapshotError> {
        let file = std::fs::File::open(path)?;
        load_backend(std::io::BufReader::new(file))
    }
}

impl ValueBackend for Backend {
    fn map(&self) -> &MazeMap {
        self.inner().map()
    }

    fn grid(&self) -> &GridModel {
        self.inner().grid()
    }

    fn eta(&self) -> f64 {
        self.inner().eta()
    }

    fn center_slack(&self) -> f64 {
        self.inner().center_slack()
    }

    fn distance(&self, s: Point, t: Point) -> Result<f64, QueryError> {
        self.inner().distance(s, t)
    }

    fn cost_dist(&self, s: Point, t: Point) -> Result<CategoricalDist, QueryError> {
        self.inner().cost_dist(s, t)
    }

    fn local_policy(&self, s: Point, goal: Point) -> Result<Point, QueryError> {
        self.inner().local_policy(s, goal)
    }
}

#[derive(Serialize, Deserialize)]
enum Body {
    Oracle {
        #[serde(with = "crate::env::map_as_json")]
        map: MazeMap,
        grid: GridModel,
        eta: f64,
        fields: Vec<Option<Box<[f32]>>>,
    },
    Tabular(TabularBackend),
}

pub fn save_backend<W: Write>(backend: &Backend, mut out: W) -> Result<(), SnapshotError> {
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    match backend {
        Backend::Oracle(b) => {
            let body = Body::Oracle {
                map: b.map().clone(),
                grid: b.grid().clone(),
                eta: b.eta(),
                fields: b.all_fields(),
            };
            bincode::serialize_into(&mut out, &body)?;
        }
        Backend::Tabular(b) => {
            // serialize through a borrowed wrapper to avoid cloning the tables
            #[derive(Serialize)]
            enum BodyRef<'a> {
                #[allow(dead_code)]
                Oracle,
                Tabular(&'a TabularBackend),
            }
            bincode::serialize_into(&mut out, &BodyRef::Tabular(b))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_backend<R: Read>(mut input: R) -> Result<Backend, SnapshotError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let mut version = [0u8; 4];
    input.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::Version(version));
    }
    let body: Body = bincode::deserialize_from(input)?;
    Ok(match body {
        Body::Oracle { map, grid, eta, fields } => Backend::Oracle(OracleBackend::from_parts(map, grid, eta, fields)),
        Body::Tabular(t) => Backend::Tabular(t),
    })
}
