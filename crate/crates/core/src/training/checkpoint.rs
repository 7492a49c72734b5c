//! Binary checkpoint ("DCLK"): architecture, class table, training
//! hyperparameters, parameters, centers, optimizer moments and the epoch log.
//! Little-endian throughout; floats are stored as raw `f64` bits so a round
//! trip is exact.

use std::path::Path;

use super::centers::ClassCenters;
use super::trainer::{EpochRecord, LossMode, TrainLog, TrainState};
use crate::error::{Error, Result};
use crate::network::{Architecture, ChannelSet, DcLstmModel};
use crate::numcore::{AdamState, Matrix};
use crate::represent::RepresentOptions;
use crate::siggen::ModulationType;

const MAGIC: &[u8; 4] = b"DCLK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub state: TrainState,
    pub lambda: f64,
    pub seed: u64,
    pub represent: RepresentOptions,
}

struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn floats(&mut self, v: &[f64]) {
        self.u32(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn matrix(&mut self, m: &Matrix) {
        self.u32(m.rows());
        self.u32(m.cols());
        m.as_slice().iter().for_each(|&x| self.f64(x));
    }
}

struct In<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                format!("checkpoint truncated while reading {what}"),
                Some(self.pos as u64),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn floats(&mut self, what: &str) -> Result<Vec<f64>> {
        let n = self.u32(what)?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::format("length overflow", None))?, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn matrix(&mut self, what: &str) -> Result<Matrix> {
        let r = self.u32(what)?;
        let c = self.u32(what)?;
        let n = r.checked_mul(c).and_then(|n| n.checked_mul(8)).ok_or_else(|| Error::format("length overflow", None))?;
        let raw = self.take(n, what)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Matrix::from_raw(r, c, data))
    }
}

fn channel_code(c: ChannelSet) -> u8 {
    match c {
        ChannelSet::Iq => 0,
        ChannelSet::Ap => 1,
        ChannelSet::Dual => 2,
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let s = &ck.state;
    let a = &s.model.arch;
    let mut o = Out(Vec::new());
    o.0.extend_from_slice(MAGIC);
    o.u16(CHECKPOINT_VERSION);
    o.u8(channel_code(a.channels));
    o.u8(a.bidirectional as u8);
    o.u32(a.cells[0]);
    o.u32(a.cells[1]);
    o.u32(a.input_dim);
    o.u32(a.classes);
    o.u8(a.visualization as u8);
    o.u16(s.classes.len() as u16);
    for c in &s.classes {
        let name = c.name().as_bytes();
        o.u16(name.len() as u16);
        o.0.extend_from_slice(name);
    }
    o.u8(match s.loss_mode {
        LossMode::SoftmaxOnly => 0,
        LossMode::SoftmaxCenter => 1,
    });
    o.f64(ck.lambda);
    o.f64(s.centers.alpha);
    o.u64(ck.seed);
    o.u8(ck.represent.literal_eq5 as u8);
    o.u32(s.epochs_done);
    let tensors = s.model.tensors();
    o.u32(tensors.len());
    tensors.iter().for_each(|t| o.matrix(t));
    o.matrix(&s.centers.centers);
    o.u32(s.adam.len());
    for st in &s.adam {
        o.u64(st.t);
        o.floats(&st.m);
        o.floats(&st.v);
    }
    o.u32(s.log.records.len());
    for r in &s.log.records {
        o.u32(r.epoch);
        o.f64(r.softmax_loss);
        o.f64(r.center_loss);
        o.f64(r.center_distance);
        o.f64(r.accuracy);
        o.f64(r.seconds);
    }
    o.0
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Checkpoint> {
    let mut i = In { buf, pos: 0 };
    if i.take(4, "magic")? != MAGIC {
        return Err(Error::format("not a checkpoint (bad magic)", Some(0)));
    }
    let version = i.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}"),
            Some(4),
        ));
    }
    let channels = match i.u8("channels")? {
        0 => ChannelSet::Iq,
        1 => ChannelSet::Ap,
        2 => ChannelSet::Dual,
        c => return Err(Error::format(format!("unknown channel code {c}"), Some(i.pos as u64 - 1))),
    };
    let bidirectional = i.u8("bidirectional")? != 0;
    let cells = [i.u32("cells")?, i.u32("cells")?];
    let input_dim = i.u32("input dim")?;
    let classes_n = i.u32("classes")?;
    let visualization = i.u8("visualization")? != 0;
    let arch = Architecture {
        channels,
        bidirectional,
        cells,
        input_dim,
        classes: classes_n,
        visualization,
    };
    let n_names = i.u16("class count")? as usize;
    let mut classes = Vec::with_capacity(n_names);
    for _ in 0..n_names {
        let at = i.pos as u64;
        let len = i.u16("class name length")? as usize;
        let raw = i.take(len, "class name")?;
        let name = std::str::from_utf8(raw).map_err(|_| Error::format("class name is not UTF-8", Some(at)))?;
        classes.push(name.parse::<ModulationType>().map_err(|_| Error::format(format!("unknown class `{name}`"), Some(at)))?);
    }
    let loss_mode = match i.u8("loss mode")? {
        0 => LossMode::SoftmaxOnly,
        1 => LossMode::SoftmaxCenter,
        c => return Err(Error::format(format!("unknown loss mode code {c}"), Some(i.pos as u64 - 1))),
    };
    let lambda = i.f64("lambda")?;
    let alpha = i.f64("alpha")?;
    let seed = i.u64("seed")?;
    let represent = RepresentOptions {
        literal_eq5: i.u8("representation flag")? != 0,
    };
    let epochs_done = i.u32("epochs")?;

    let mut model = DcLstmModel::zeros(&arch).map_err(|e| Error::format(e.to_string(), None))?;
    let n_tensors = i.u32("tensor count")?;
    if n_tensors != model.tensors().len() {
        return Err(Error::format("tensor count does not match architecture", Some(i.pos as u64 - 4)));
    }
    for t in model.tensors_mut() {
        let at = i.pos as u64;
        let m = i.matrix("tensor")?;
        if m.shape() != t.shape() {
            return Err(Error::format("tensor shape does not match architecture", Some(at)));
        }
        *t = m;
    }
    let centers = i.matrix("centers")?;
    if centers.shape() != (arch.classes, arch.feature_dim()) {
        return Err(Error::format("center matrix has wrong shape", None));
    }
    let n_adam = i.u32("optimizer state count")?;
    let mut adam = Vec::with_capacity(n_adam);
    for _ in 0..n_adam {
        let t = i.u64("optimizer step")?;
        let m = i.floats("first moment")?;
        let v = i.floats("second moment")?;
        adam.push(AdamState { m, v, t });
    }
    let n_log = i.u32("log length")?;
    let mut records = Vec::with_capacity(n_log);
    for _ in 0..n_log {
        records.push(EpochRecord {
            epoch: i.u32("log epoch")?,
            softmax_loss: i.f64("log")?,
            center_loss: i.f64("log")?,
            center_distance: i.f64("log")?,
            accuracy: i.f64("log")?,
            seconds: i.f64("log")?,
        });
    }
    if i.pos != buf.len() {
        return Err(Error::format("trailing bytes after checkpoint", Some(i.pos as u64)));
    }
    Ok(Checkpoint {
        state: TrainState {
            model,
            centers: ClassCenters { centers, alpha },
            classes,
            loss_mode,
            adam,
            epochs_done,
            log: TrainLog { records },
        },
        lambda,
        seed,
        represent,
    })
}

/// Writes atomically (temporary file, then rename).
pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode_checkpoint(ck)).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainConfig;

    fn sample() -> Checkpoint {
        let arch = Architecture::new(ChannelSet::Dual, 3, 2);
        let model = DcLstmModel::init(&arch, 5).unwrap();
        let cfg = TrainConfig::default();
        let mut state = TrainState::fresh(model, vec![ModulationType::Bpsk, ModulationType::Qpsk], &cfg).unwrap();
        state.centers.centers.set(1, 2, -0.125);
        state.adam[0].t = 7;
        state.adam[0].m[0] = 1.0 / 3.0;
        state.epochs_done = 1;
        state.log.records.push(EpochRecord {
            epoch: 1,
            softmax_loss: 0.7,
            center_loss: 0.01,
            center_distance: 0.02,
            accuracy: 0.5,
            seconds: 1.25,
        });
        Checkpoint {
            state,
            lambda: 0.1,
            seed: 42,
            represent: RepresentOptions::default(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let back = decode_checkpoint(&encode_checkpoint(&ck)).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn version_mismatch_is_format_error() {
        let mut buf = encode_checkpoint(&sample());
        buf[4] = 9;
        assert!(matches!(decode_checkpoint(&buf), Err(Error::Format { offset: Some(4), .. })));
    }

    #[test]
    fn truncation_is_reported() {
        let buf = encode_checkpoint(&sample());
        let err = decode_checkpoint(&buf[..buf.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        let ck = sample();
        save_checkpoint(&ck, &p).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), ck);
    }
}
