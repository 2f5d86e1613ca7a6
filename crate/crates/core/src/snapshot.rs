//! Flat binary parameter snapshots.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic[4]            "SNCN" or "SMLP"
//! version             1
//! layer count L       hidden layers
//! widths[L]
//! task count T
//! input dim           x features (the MLP's task inputs are counted by T)
//! output dim          label slots
//! classes[T]          class count per task
//! matrices            row-major little-endian f32, shapes implied by the header
//! ```
//!
//! S-NCN matrices: `W_x, W_y, W_2.., E_x, E_y, E_2.., M_1..M_L` where `M_l`
//! holds layer `l`'s context codes as columns. MLP matrices: the `L + 1`
//! weight matrices followed by the bias vectors (stored as one-column
//! matrices).

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::mlp::MlpParams;
use crate::ncn::{ContextStore, ModelParams};

pub const SNCN_MAGIC: &[u8; 4] = b"SNCN";
pub const MLP_MAGIC: &[u8; 4] = b"SMLP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Sncn,
    Mlp,
}

impl SnapshotKind {
    fn magic(self) -> &'static [u8; 4] {
        match self {
            SnapshotKind::Sncn => SNCN_MAGIC,
            SnapshotKind::Mlp => MLP_MAGIC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotHeader {
    pub kind: SnapshotKind,
    pub version: u32,
    pub widths: Vec<usize>,
    pub input_dim: usize,
    pub output_dim: usize,
    pub task_classes: Vec<usize>,
}

impl SnapshotHeader {
    pub fn num_tasks(&self) -> usize {
        self.task_classes.len()
    }

    /// Names and shapes of the matrices that follow the header.
    pub fn layout(&self) -> Vec<(String, (usize, usize))> {
        let w = &self.widths;
        let (dx, dy, t) = (self.input_dim, self.output_dim, self.num_tasks());
        let mut out = Vec::new();
        match self.kind {
            SnapshotKind::Sncn => {
                out.push(("W_x".into(), (dx, w[0])));
                out.push(("W_y".into(), (dy, w[0])));
                for i in 0..w.len() - 1 {
                    out.push((format!("W_{}", i + 2), (w[i], w[i + 1])));
                }
                out.push(("E_x".into(), (w[0], dx)));
                out.push(("E_y".into(), (w[0], dy)));
                for i in 0..w.len() - 1 {
                    out.push((format!("E_{}", i + 2), (w[i + 1], w[i])));
                }
                for (i, &width) in w.iter().enumerate() {
                    out.push((format!("M_{}", i + 1), (width, t)));
                }
            }
            SnapshotKind::Mlp => {
                let mut sizes = vec![dx + t];
                sizes.extend_from_slice(w);
                sizes.push(dy);
                for i in 0..sizes.len() - 1 {
                    out.push((format!("W_{}", i + 1), (sizes[i + 1], sizes[i])));
                }
                for i in 0..sizes.len() - 1 {
                    out.push((format!("b_{}", i + 1), (sizes[i + 1], 1)));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub matrices: Vec<(String, Array2<f64>)>,
}

impl Snapshot {
    pub fn from_sncn(params: &ModelParams, task_classes: &[usize]) -> Self {
        let header = SnapshotHeader {
            kind: SnapshotKind::Sncn,
            version: FORMAT_VERSION,
            widths: params.widths(),
            input_dim: params.input_dim(),
            output_dim: params.output_dim(),
            task_classes: task_classes.to_vec(),
        };
        let mut matrices: Vec<(String, Array2<f64>)> =
            params.matrices().into_iter().map(|(n, m)| (n, m.clone())).collect();
        for (i, store) in params.contexts.iter().enumerate() {
            matrices.push((format!("M_{}", i + 1), store.codes().clone()));
        }
        Snapshot { header, matrices }
    }

    pub fn from_mlp(params: &MlpParams, features: usize, task_classes: &[usize]) -> Self {
        let sizes = params.sizes();
        let header = SnapshotHeader {
            kind: SnapshotKind::Mlp,
            version: FORMAT_VERSION,
            widths: sizes[1..sizes.len() - 1].to_vec(),
            input_dim: features,
            output_dim: params.output_dim(),
            task_classes: task_classes.to_vec(),
        };
        let mut matrices: Vec<(String, Array2<f64>)> = params
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("W_{}", i + 1), w.clone()))
            .collect();
        for (i, b) in params.biases.iter().enumerate() {
            matrices.push((format!("b_{}", i + 1), b.clone().insert_axis(ndarray::Axis(1))));
        }
        Snapshot { header, matrices }
    }

    /// Rebuilds S-NCN parameters. Fails for MLP snapshots.
    pub fn to_sncn_params(&self) -> Result<ModelParams> {
        if self.header.kind != SnapshotKind::Sncn {
            return Err(Error::Config("snapshot does not hold S-NCN parameters".into()));
        }
        let layers = self.header.widths.len();
        let mut it = self.matrices.iter().map(|(_, m)| m.clone());
        let mut next = || it.next().expect("layout checked on decode");
        let w_x = next();
        let w_y = next();
        let w_hidden = (1..layers).map(|_| next()).collect();
        let e_x = next();
        let e_y = next();
        let e_hidden = (1..layers).map(|_| next()).collect();
        let contexts = (0..layers).map(|_| ContextStore::from_parts(next())).collect();
        Ok(ModelParams {
            w_x,
            w_y,
            w_hidden,
            e_x,
            e_y,
            e_hidden,
            contexts,
        })
    }

    /// Rebuilds MLP parameters. Fails for S-NCN snapshots.
    pub fn to_mlp_params(&self, dropout: f64) -> Result<MlpParams> {
        if self.header.kind != SnapshotKind::Mlp {
            return Err(Error::Config("snapshot does not hold MLP parameters".into()));
        }
        let n = self.header.widths.len() + 1;
        let weights = self.matrices[..n].iter().map(|(_, m)| m.clone()).collect();
        let biases = self.matrices[n..].iter().map(|(_, m)| m.column(0).to_owned()).collect();
        Ok(MlpParams {
            weights,
            biases,
            dropout,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::new();
        out.extend_from_slice(h.kind.magic());
        let put = |v: usize, out: &mut Vec<u8>| out.extend_from_slice(&(v as u32).to_le_bytes());
        put(h.version as usize, &mut out);
        put(h.widths.len(), &mut out);
        for &w in &h.widths {
            put(w, &mut out);
        }
        put(h.num_tasks(), &mut out);
        put(h.input_dim, &mut out);
        put(h.output_dim, &mut out);
        for &c in &h.task_classes {
            put(c, &mut out);
        }
        for (_, m) in &self.matrices {
            for &v in m.iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    /// `origin` only labels errors.
    pub fn decode(bytes: &[u8], origin: &Path) -> Result<Snapshot> {
        let fail = |reason: String| Error::Parse {
            kind: "snapshot",
            path: origin.to_path_buf(),
            reason,
        };
        let mut cursor = Cursor { bytes, pos: 0 };
        let magic = cursor.take(4).ok_or_else(|| fail("missing magic".into()))?;
        let kind = match magic {
            m if m == SNCN_MAGIC => SnapshotKind::Sncn,
            m if m == MLP_MAGIC => SnapshotKind::Mlp,
            m => return Err(fail(format!("unknown magic {m:?}"))),
        };
        let mut word = |what: &str| cursor.u32().ok_or_else(|| fail(format!("truncated header at {what}")));
        let version = word("version")?;
        if version != FORMAT_VERSION {
            return Err(fail(format!("unsupported version {version}")));
        }
        let layers = word("layer count")? as usize;
        if layers == 0 {
            return Err(fail("zero hidden layers".into()));
        }
        let widths = (0..layers).map(|_| word("widths").map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let tasks = word("task count")? as usize;
        let input_dim = word("input dim")? as usize;
        let output_dim = word("output dim")? as usize;
        let task_classes = (0..tasks).map(|_| word("classes").map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let header = SnapshotHeader {
            kind,
            version,
            widths,
            input_dim,
            output_dim,
            task_classes,
        };
        let mut matrices = Vec::new();
        for (name, shape) in header.layout() {
            let n = shape.0 * shape.1;
            let raw = cursor
                .take(n * 4)
                .ok_or_else(|| fail(format!("truncated data in {name}")))?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let m = Array2::from_shape_vec(shape, values).expect("length matches shape");
            matrices.push((name, m));
        }
        if cursor.pos != bytes.len() {
            return Err(fail(format!("{} trailing bytes", bytes.len() - cursor.pos)));
        }
        Ok(Snapshot { header, matrices })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Snapshot> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Snapshot::decode(&bytes, path)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
