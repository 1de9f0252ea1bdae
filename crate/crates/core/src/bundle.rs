//! Binary model bundle.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//!
//! ```text
//! magic "PCHX1"
//! network spec   input_channels input_length class_count seed
//!                block_count, then per block: filters kernel activation(u8)
//! patch configs  count, then per config: stride length zero(u8) attach(u8) notemp(u8)
//! normalization  channels, means, stds
//! parameters     count, values
//! metadata       collapse(u8) normalize(u8)
//! shallow model  class_count dim, standardizer flag(u8) [+ dim means, dim stds],
//!                kind tag(u8) and the kind's payload
//! ```
//!
//! Reals are stored by bit pattern, so a round trip is exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::NormStats;
use crate::metadata::MetadataOptions;
use crate::neuralnet::{Activation, ConvBlock, Network, NetworkSpec};
use crate::patching::PatchConfig;
use crate::pipeline::{PatchStage, PatchX};
use crate::shallow::forest::{Node, RandomForest, Tree};
use crate::shallow::svm::{BinaryMachine, LinearSvm};
use crate::shallow::{Classifier, ShallowModel, Standardizer, TrivialMode};
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"PCHX1";

/// Upper bound on any stored count, to fail fast on corrupt files instead of
/// attempting huge allocations.
const MAX_COUNT: u64 = 1 << 32;

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.out.write_all(&[v])?)
    }

    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }

    fn usize(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }

    fn bool(&mut self, v: bool) -> Result<()> {
        self.u8(v as u8)
    }

    fn reals(&mut self, values: &[f64]) -> Result<()> {
        self.usize(values.len())?;
        values.iter().try_for_each(|&v| self.f64(v))
    }
}

struct Reader<R: Read> {
    input: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.input.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Bundle("truncated bundle".into()),
            _ => Error::Io(e),
        })?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        if v > MAX_COUNT {
            return Err(Error::Bundle(format!("implausible count {v}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Bundle(format!("invalid flag byte {b}"))),
        }
    }

    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn write_bundle(model: &PatchX, out: impl Write) -> Result<()> {
    let mut w = Writer { out };
    w.out.write_all(MAGIC)?;

    let spec = &model.stage.network.spec;
    w.usize(spec.input_channels)?;
    w.usize(spec.input_length)?;
    w.usize(spec.class_count)?;
    w.u64(spec.seed)?;
    w.usize(spec.blocks.len())?;
    for b in &spec.blocks {
        w.usize(b.filters)?;
        w.usize(b.kernel)?;
        w.u8(b.activation.code())?;
    }

    w.usize(model.stage.configs.len())?;
    for c in &model.stage.configs {
        w.usize(c.stride())?;
        w.usize(c.length())?;
        w.bool(c.zero())?;
        w.bool(c.attach())?;
        w.bool(c.notemp())?;
    }

    w.usize(model.stage.norm.channels())?;
    model.stage.norm.mean.iter().try_for_each(|&v| w.f64(v))?;
    model.stage.norm.std.iter().try_for_each(|&v| w.f64(v))?;

    w.reals(&model.stage.network.flat_params())?;

    w.bool(model.metadata.collapse)?;
    w.bool(model.metadata.normalize)?;

    write_shallow(&mut w, &model.shallow)?;
    w.out.flush()?;
    Ok(())
}

fn write_shallow<W: Write>(w: &mut Writer<W>, model: &ShallowModel) -> Result<()> {
    w.usize(model.class_count)?;
    w.usize(model.dim)?;
    match &model.standardizer {
        Some(s) => {
            w.bool(true)?;
            s.mean.iter().try_for_each(|&v| w.f64(v))?;
            s.std.iter().try_for_each(|&v| w.f64(v))?;
        }
        None => w.bool(false)?,
    }
    match &model.classifier {
        Classifier::Svm(svm) => {
            w.u8(0)?;
            w.usize(svm.machines.len())?;
            for m in &svm.machines {
                w.reals(&m.weights)?;
                w.f64(m.bias)?;
            }
        }
        Classifier::Forest(forest) => {
            w.u8(1)?;
            w.usize(forest.trees.len())?;
            for t in &forest.trees {
                w.usize(t.nodes.len())?;
                for n in &t.nodes {
                    match n {
                        Node::Leaf { class } => {
                            w.u8(0)?;
                            w.usize(*class)?;
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            w.u8(1)?;
                            w.usize(*feature)?;
                            w.f64(*threshold)?;
                            w.usize(*left)?;
                            w.usize(*right)?;
                        }
                    }
                }
            }
        }
        Classifier::Trivial(mode) => {
            w.u8(2)?;
            w.u8(match mode {
                TrivialMode::Occurrence => 0,
                TrivialMode::ConfidenceSum => 1,
                TrivialMode::ClassSpecific => 2,
            })?;
        }
    }
    Ok(())
}

pub fn read_bundle(input: impl Read) -> Result<PatchX> {
    let mut r = Reader { input };
    let magic: [u8; 5] = r.bytes()?;
    if &magic != MAGIC {
        return Err(Error::Bundle("not a PCHX1 bundle".into()));
    }

    let input_channels = r.usize()?;
    let input_length = r.usize()?;
    let class_count = r.usize()?;
    let seed = r.u64()?;
    let blocks = (0..r.usize()?)
        .map(|_| {
            let filters = r.usize()?;
            let kernel = r.usize()?;
            let code = r.u8()?;
            let activation =
                Activation::from_code(code).ok_or_else(|| Error::Bundle(format!("unknown activation code {code}")))?;
            Ok(ConvBlock {
                filters,
                kernel,
                activation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = NetworkSpec {
        input_channels,
        input_length,
        blocks,
        class_count,
        seed,
    };

    let configs = (0..r.usize()?)
        .map(|_| {
            let stride = r.usize()?;
            let length = r.usize()?;
            let zero = r.bool()?;
            let attach = r.bool()?;
            let notemp = r.bool()?;
            PatchConfig::new(stride, length, zero, attach, notemp)
        })
        .collect::<Result<Vec<_>>>()?;

    let channels = r.usize()?;
    let mean = (0..channels).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let std = (0..channels).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let norm = NormStats { mean, std };

    let params = r.reals()?;
    let mut network = Network::new(spec)?;
    network
        .set_flat_params(&params)
        .map_err(|_| Error::Bundle("parameter count does not match the network spec".into()))?;

    let metadata = MetadataOptions {
        collapse: r.bool()?,
        normalize: r.bool()?,
    };
    let shallow = read_shallow(&mut r)?;

    let mut trailing = [0u8; 1];
    if r.input.read(&mut trailing)? != 0 {
        return Err(Error::Bundle("trailing bytes after bundle".into()));
    }
    Ok(PatchX {
        stage: PatchStage { configs, norm, network },
        metadata,
        shallow,
    })
}

fn read_shallow<R: Read>(r: &mut Reader<R>) -> Result<ShallowModel> {
    let class_count = r.usize()?;
    let dim = r.usize()?;
    let standardizer = if r.bool()? {
        let mean = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let std = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Some(Standardizer { mean, std })
    } else {
        None
    };
    let classifier = match r.u8()? {
        0 => {
            let machines = (0..r.usize()?)
                .map(|_| {
                    let weights = r.reals()?;
                    let bias = r.f64()?;
                    Ok(BinaryMachine { weights, bias })
                })
                .collect::<Result<Vec<_>>>()?;
            Classifier::Svm(LinearSvm { class_count, machines })
        }
        1 => {
            let trees = (0..r.usize()?)
                .map(|_| {
                    let nodes = (0..r.usize()?)
                        .map(|_| match r.u8()? {
                            0 => Ok(Node::Leaf { class: r.usize()? }),
                            1 => Ok(Node::Split {
                                feature: r.usize()?,
                                threshold: r.f64()?,
                                left: r.usize()?,
                                right: r.usize()?,
                            }),
                            t => Err(Error::Bundle(format!("unknown tree node tag {t}"))),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    check_tree(&nodes, class_count, dim)?;
                    Ok(Tree { nodes })
                })
                .collect::<Result<Vec<_>>>()?;
            Classifier::Forest(RandomForest { class_count, trees })
        }
        2 => Classifier::Trivial(match r.u8()? {
            0 => TrivialMode::Occurrence,
            1 => TrivialMode::ConfidenceSum,
            2 => TrivialMode::ClassSpecific,
            m => return Err(Error::Bundle(format!("unknown voting mode {m}"))),
        }),
        t => return Err(Error::Bundle(format!("unknown shallow classifier tag {t}"))),
    };
    Ok(ShallowModel {
        classifier,
        class_count,
        dim,
        standardizer,
    })
}

/// Children must point forward so that prediction always terminates.
fn check_tree(nodes: &[Node], class_count: usize, dim: usize) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::Bundle("empty tree".into()));
    }
    for (i, n) in nodes.iter().enumerate() {
        let ok = match n {
            Node::Leaf { class } => *class < class_count,
            Node::Split {
                feature, left, right, ..
            } => *feature < dim && *left > i && *right > i && *left < nodes.len() && *right < nodes.len(),
        };
        if !ok {
            return Err(Error::Bundle(format!("malformed tree node {i}")));
        }
    }
    Ok(())
}

pub fn save_bundle(model: &PatchX, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_bundle(model, std::io::BufWriter::new(file))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<PatchX> {
    let file = std::fs::File::open(path)?;
    read_bundle(std::io::BufReader::new(file))
}

pub fn to_bytes(model: &PatchX) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_bundle(model, &mut buf)?;
    Ok(buf)
}
