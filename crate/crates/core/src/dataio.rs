//! The SIGF frame-file format and open-set dataset splitting.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "SIGF"            4 bytes
//! version           u16 = 1
//! frame_count       u32
//! t_len             u32
//! class_count       u16
//! class names       class_count × (u16 byte length, UTF-8 bytes)
//! records           frame_count × (u16 class index, f32 snr_db,
//!                                  2·t_len × f32 interleaved I, Q)
//! ```
//!
//! Samples are the raw pre-normalization values. Frame ids are not stored;
//! a frame's id on read is its position in the file.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numcore::Rng;
use crate::siggen::{ModulationType, SignalFrame};

pub const MAGIC: &[u8; 4] = b"SIGF";
pub const VERSION: u16 = 1;

/// Bytes per frame record for a given frame length.
pub fn record_size(t_len: usize) -> usize {
    2 + 4 + 8 * t_len
}

/// Header size for a class table.
pub fn header_size(classes: &[ModulationType]) -> usize {
    4 + 2 + 4 + 4 + 2 + classes.iter().map(|c| 2 + c.name().len()).sum::<usize>()
}

/// An in-memory SIGF file.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFile {
    pub classes: Vec<ModulationType>,
    pub t_len: usize,
    pub frames: Vec<SignalFrame>,
}

impl FrameFile {
    pub fn new(classes: Vec<ModulationType>, t_len: usize, frames: Vec<SignalFrame>) -> Self {
        FrameFile {
            classes,
            t_len,
            frames,
        }
    }

    pub fn class_index(&self, m: ModulationType) -> Option<usize> {
        self.classes.iter().position(|&c| c == m)
    }

    pub fn count_of(&self, m: ModulationType) -> usize {
        self.frames.iter().filter(|f| f.label == m).count()
    }
}

fn encode_header(classes: &[ModulationType], t_len: usize, frame_count: u32) -> Result<Vec<u8>> {
    if classes.len() > u16::MAX as usize {
        return Err(Error::invalid("class table too large"));
    }
    let t = u32::try_from(t_len).map_err(|_| Error::invalid("t_len exceeds u32"))?;
    for (i, c) in classes.iter().enumerate() {
        if classes[..i].contains(c) {
            return Err(Error::invalid(format!("class `{c}` appears twice in class table")));
        }
    }
    let mut out = Vec::with_capacity(header_size(classes));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&frame_count.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&(classes.len() as u16).to_le_bytes());
    for c in classes {
        let name = c.name().as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
    }
    Ok(out)
}

fn encode_record(out: &mut Vec<u8>, classes: &[ModulationType], t_len: usize, frame: &SignalFrame) -> Result<()> {
    if frame.samples.len() != t_len {
        return Err(Error::invalid(format!(
            "frame {} has {} samples, file t_len is {t_len}",
            frame.id,
            frame.samples.len()
        )));
    }
    let idx = classes
        .iter()
        .position(|&c| c == frame.label)
        .ok_or_else(|| Error::invalid(format!("frame label {} not in class table", frame.label)))?;
    out.extend_from_slice(&(idx as u16).to_le_bytes());
    out.extend_from_slice(&frame.snr_db.to_le_bytes());
    for z in &frame.samples {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    Ok(())
}

/// Serializes a whole file to bytes.
pub fn encode(file: &FrameFile) -> Result<Vec<u8>> {
    let count = u32::try_from(file.frames.len()).map_err(|_| Error::invalid("too many frames"))?;
    let mut out = encode_header(&file.classes, file.t_len, count)?;
    out.reserve(file.frames.len() * record_size(file.t_len));
    for f in &file.frames {
        encode_record(&mut out, &file.classes, file.t_len, f)?;
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                format!("truncated while reading {what}"),
                Some(self.pos as u64),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses SIGF bytes.
pub fn decode(buf: &[u8]) -> Result<FrameFile> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(format!("bad magic {magic:?}"), Some(0)));
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported version {version}"), Some(4)));
    }
    let frame_count = cur.u32("frame count")? as usize;
    let t_len = cur.u32("t_len")? as usize;
    let n_classes = cur.u16("class count")? as usize;
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let at = cur.pos as u64;
        let len = cur.u16("class name length")? as usize;
        let raw = cur.take(len, "class name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::format("class name is not UTF-8", Some(at)))?;
        let m: ModulationType = name
            .parse()
            .map_err(|_| Error::format(format!("unknown class name `{name}`"), Some(at)))?;
        if classes.contains(&m) {
            return Err(Error::format(format!("duplicate class `{name}`"), Some(at)));
        }
        classes.push(m);
    }

    let header = cur.pos;
    let rec = record_size(t_len);
    let body = buf.len() - header;
    let expected = frame_count
        .checked_mul(rec)
        .ok_or_else(|| Error::format("frame count overflows", Some(6)))?;
    if body < expected {
        let complete = body / rec;
        return Err(Error::format(
            format!("truncated body: record {complete} of {frame_count} incomplete"),
            Some((header + complete * rec) as u64),
        ));
    }
    if body > expected {
        return Err(Error::format(
            format!("{} trailing bytes after last record", body - expected),
            Some((header + expected) as u64),
        ));
    }

    let mut frames = Vec::with_capacity(frame_count);
    for k in 0..frame_count {
        let at = cur.pos as u64;
        let idx = cur.u16("class index")? as usize;
        let label = *classes.get(idx).ok_or_else(|| {
            Error::format(format!("class index {idx} outside table of {n_classes}"), Some(at))
        })?;
        let snr = f32::from_le_bytes(cur.take(4, "snr")?.try_into().unwrap());
        let raw = cur.take(8 * t_len, "samples")?;
        let samples = raw
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        frames.push(SignalFrame {
            id: k as u64,
            label,
            snr_db: snr,
            samples,
        });
    }
    Ok(FrameFile {
        classes,
        t_len,
        frames,
    })
}

/// Writes a SIGF file and returns the number of bytes written.
pub fn write_frames(file: &FrameFile, path: &Path) -> Result<u64> {
    let bytes = encode(file)?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn read_frames(path: &Path) -> Result<FrameFile> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

/// Streaming writer for files whose frame count is known up front.
pub struct FrameWriter {
    path: PathBuf,
    out: BufWriter<File>,
    classes: Vec<ModulationType>,
    t_len: usize,
    declared: u32,
    written: u32,
    bytes: u64,
    scratch: Vec<u8>,
}

impl FrameWriter {
    pub fn create(path: &Path, classes: &[ModulationType], t_len: usize, frame_count: u32) -> Result<Self> {
        let header = encode_header(classes, t_len, frame_count)?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(&header).map_err(|e| Error::io(path, e))?;
        Ok(FrameWriter {
            path: path.to_path_buf(),
            out,
            classes: classes.to_vec(),
            t_len,
            declared: frame_count,
            written: 0,
            bytes: header.len() as u64,
            scratch: Vec::with_capacity(record_size(t_len)),
        })
    }

    pub fn write(&mut self, frame: &SignalFrame) -> Result<()> {
        if self.written == self.declared {
            return Err(Error::invalid("more frames than declared in header"));
        }
        self.scratch.clear();
        encode_record(&mut self.scratch, &self.classes, self.t_len, frame)?;
        self.out
            .write_all(&self.scratch)
            .map_err(|e| Error::io(&self.path, e))?;
        self.written += 1;
        self.bytes += self.scratch.len() as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64> {
        if self.written != self.declared {
            return Err(Error::invalid(format!(
                "declared {} frames but wrote {}",
                self.declared, self.written
            )));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.bytes)
    }
}

/// Which classes are seen in training and how each class is divided.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    /// Classes of the training set.
    pub known: Vec<ModulationType>,
    /// Classes of the testing set.
    pub full: Vec<ModulationType>,
    /// Fraction of each class's frames assigned to training (discarded for
    /// classes outside `known`).
    pub train_fraction: f64,
    /// Fraction of each class's frames assigned to testing.
    pub test_fraction: f64,
}

impl SplitSpec {
    /// Complementary fractions: every frame of a known class lands in
    /// exactly one of the two outputs.
    pub fn complementary(known: Vec<ModulationType>, full: Vec<ModulationType>, train_fraction: f64) -> Self {
        SplitSpec {
            known,
            full,
            train_fraction,
            test_fraction: 1.0 - train_fraction,
        }
    }

    fn validate(&self, source: &FrameFile) -> Result<()> {
        let in_unit = |f: f64| (0.0..=1.0).contains(&f);
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) || !in_unit(self.test_fraction) {
            return Err(Error::invalid("split fractions must lie in (0, 1]"));
        }
        if self.train_fraction + self.test_fraction > 1.0 + 1e-12 {
            return Err(Error::invalid("train and test fractions exceed 1"));
        }
        if self.known.is_empty() {
            return Err(Error::invalid("no known classes"));
        }
        for k in &self.known {
            if !self.full.contains(k) {
                return Err(Error::invalid(format!("known class {k} missing from full class list")));
            }
        }
        for c in &self.full {
            if source.class_index(*c).is_none() {
                return Err(Error::invalid(format!("class {c} not present in source file")));
            }
        }
        Ok(())
    }
}

/// Splits `source` into a training file holding only `spec.known` and a
/// testing file holding every class of `spec.full`.
///
/// Each class is permuted independently; the first `train_fraction`
/// share goes to training and the next `test_fraction` share to testing.
/// The test file therefore does not depend on which classes are known.
/// Frames keep their source ids.
pub fn split_open_set(source: &FrameFile, spec: &SplitSpec, rng: &mut Rng) -> Result<(FrameFile, FrameFile)> {
    spec.validate(source)?;
    let mut full = spec.full.clone();
    full.sort();
    full.dedup();
    let mut known = spec.known.clone();
    known.sort();
    known.dedup();

    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for &class in &full {
        let members: Vec<usize> = source
            .frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.label == class)
            .map(|(i, _)| i)
            .collect();
        let n = members.len();
        let perm = rng.permutation(n);
        let n_train = ((spec.train_fraction * n as f64).round() as usize).min(n);
        let n_test = ((spec.test_fraction * n as f64).round() as usize).min(n - n_train);
        if known.contains(&class) {
            train_idx.extend(perm[..n_train].iter().map(|&p| members[p]));
        }
        test_idx.extend(perm[n_train..n_train + n_test].iter().map(|&p| members[p]));
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let pick = |idx: &[usize]| -> Vec<SignalFrame> {
        idx.iter().map(|&i| source.frames[i].clone()).collect()
    };
    Ok((
        FrameFile::new(known, source.t_len, pick(&train_idx)),
        FrameFile::new(full, source.t_len, pick(&test_idx)),
    ))
}
