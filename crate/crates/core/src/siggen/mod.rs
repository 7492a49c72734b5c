//! Labeled complex baseband frames for the eleven modulation classes,
//! passed through a phase/frequency-offset + AWGN channel at a set SNR.

mod modulation;
mod shaping;
mod sources;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dataio::{FrameFile, FrameWriter};
use crate::error::{Error, Result};
use crate::numcore::Rng;

pub use modulation::{parse_class_list, ModulationType};
pub use shaping::{gaussian, hilbert, lowpass, root_raised_cosine};

/// One captured baseband frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalFrame {
    pub id: u64,
    pub label: ModulationType,
    pub snr_db: f32,
    pub samples: Vec<Complex64>,
}

impl SignalFrame {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub classes: Vec<ModulationType>,
    pub samples_per_symbol: usize,
    pub frame_length: usize,
    /// SNR tags in dB; `f64::INFINITY` disables noise.
    pub snrs_db: Vec<f64>,
    pub frames_per_pair: usize,
    pub seed: u64,
    pub random_phase: bool,
    /// Carrier offsets are drawn uniformly from `[-cfo_max, cfo_max]`
    /// cycles per sample.
    pub cfo_max: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            classes: ModulationType::ALL.to_vec(),
            samples_per_symbol: 4,
            frame_length: 128,
            snrs_db: (-20..=18).step_by(2).map(f64::from).collect(),
            frames_per_pair: 1000,
            seed: 0,
            random_phase: true,
            cfo_max: 0.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol == 0 {
            return Err(Error::invalid("samples_per_symbol must be at least 1"));
        }
        if self.frame_length == 0 {
            return Err(Error::invalid("frame_length must be at least 1"));
        }
        if self.snrs_db.is_empty() {
            return Err(Error::invalid("snr list is empty"));
        }
        if self.snrs_db.iter().any(|s| s.is_nan()) {
            return Err(Error::invalid("snr list contains NaN"));
        }
        if self.classes.is_empty() {
            return Err(Error::invalid("class list is empty"));
        }
        if !(self.cfo_max >= 0.0 && self.cfo_max < 0.5) {
            return Err(Error::invalid("cfo_max must lie in [0, 0.5)"));
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        self.classes.len() * self.snrs_db.len() * self.frames_per_pair
    }
}

/// A frame together with its separated clean and noise parts.
#[derive(Clone, Debug)]
pub struct FrameComponents {
    pub frame: SignalFrame,
    /// `s(n)·c(n)`, unit mean power.
    pub signal: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

/// Generates one frame; the frame id is the generator's stream id.
pub fn gen_frame(
    modulation: ModulationType,
    snr_db: f64,
    rng: &mut Rng,
    cfg: &GenConfig,
) -> Result<SignalFrame> {
    gen_frame_components(modulation, snr_db, rng, cfg).map(|c| c.frame)
}

pub fn gen_frame_components(
    modulation: ModulationType,
    snr_db: f64,
    rng: &mut Rng,
    cfg: &GenConfig,
) -> Result<FrameComponents> {
    cfg.validate()?;
    if snr_db.is_nan() {
        return Err(Error::invalid("snr is NaN"));
    }
    let t = cfg.frame_length;
    let mut signal = sources::baseband(modulation, t, cfg.samples_per_symbol, rng);
    let power = signal.iter().map(|z| z.norm_sqr()).sum::<f64>() / t as f64;
    if power > 0.0 {
        let scale = power.sqrt().recip();
        signal.iter_mut().for_each(|z| *z *= scale);
    }

    let phase = if cfg.random_phase {
        rng.uniform_range(0.0, 2.0 * PI)
    } else {
        0.0
    };
    let cfo = if cfg.cfo_max > 0.0 {
        rng.uniform_range(-cfg.cfo_max, cfg.cfo_max)
    } else {
        0.0
    };
    if phase != 0.0 || cfo != 0.0 {
        for (n, z) in signal.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, 2.0 * PI * cfo * n as f64 + phase);
        }
    }

    let noise: Vec<Complex64> = if snr_db == f64::INFINITY {
        vec![Complex64::new(0.0, 0.0); t]
    } else {
        let sigma = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        (0..t)
            .map(|_| Complex64::new(sigma * rng.normal(), sigma * rng.normal()))
            .collect()
    };

    // Stored precision is 32-bit; quantize here so persistence is lossless.
    let samples = signal
        .iter()
        .zip(&noise)
        .map(|(s, n)| {
            let r = s + n;
            Complex64::new(r.re as f32 as f64, r.im as f32 as f64)
        })
        .collect();

    Ok(FrameComponents {
        frame: SignalFrame {
            id: rng.stream(),
            label: modulation,
            snr_db: snr_db as f32,
            samples,
        },
        signal,
        noise,
    })
}

/// `10·log10(mean|signal|² / mean|noise|²)`.
pub fn measure_snr(signal: &[Complex64], noise: &[Complex64]) -> Result<f64> {
    if signal.len() != noise.len() {
        return Err(Error::invalid(format!(
            "signal has {} samples, noise {}",
            signal.len(),
            noise.len()
        )));
    }
    if signal.is_empty() {
        return Err(Error::invalid("empty sequences"));
    }
    let ps = signal.iter().map(|z| z.norm_sqr()).sum::<f64>() / signal.len() as f64;
    let pn = noise.iter().map(|z| z.norm_sqr()).sum::<f64>() / noise.len() as f64;
    if pn == 0.0 {
        return Err(Error::invalid("noise power is zero"));
    }
    Ok(10.0 * (ps / pn).log10())
}

/// Per-(class, SNR) frame counts of a generated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GenSummary {
    pub counts: BTreeMap<(ModulationType, i64), usize>,
    pub total: usize,
    pub bytes: u64,
}

impl GenSummary {
    pub fn per_class(&self) -> BTreeMap<ModulationType, usize> {
        let mut out = BTreeMap::new();
        for (&(m, _), &c) in &self.counts {
            *out.entry(m).or_default() += c;
        }
        out
    }
}

/// Key used for SNR bookkeeping: the tag in milli-dB.
pub(crate) fn snr_key(snr_db: f64) -> i64 {
    if snr_db.is_infinite() {
        if snr_db > 0.0 {
            i64::MAX
        } else {
            i64::MIN
        }
    } else {
        (snr_db * 1000.0).round() as i64
    }
}

/// The frame generated for `id` under `cfg` (ids enumerate class-major,
/// then SNR, then repetition).
pub fn frame_for_id(cfg: &GenConfig, id: u64) -> Result<SignalFrame> {
    let per_class = cfg.snrs_db.len() * cfg.frames_per_pair;
    let idx = id as usize;
    if per_class == 0 || idx >= cfg.total_frames() {
        return Err(Error::invalid(format!("frame id {id} outside dataset")));
    }
    let class = cfg.classes[idx / per_class];
    let snr = cfg.snrs_db[(idx % per_class) / cfg.frames_per_pair];
    let mut rng = Rng::new(cfg.seed, id);
    gen_frame(class, snr, &mut rng, cfg)
}

const GEN_CHUNK: usize = 2048;

/// Generates the whole dataset in memory.
pub fn gen_frames(cfg: &GenConfig) -> Result<FrameFile> {
    cfg.validate()?;
    let frames = (0..cfg.total_frames() as u64)
        .into_par_iter()
        .map(|id| frame_for_id(cfg, id))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameFile::new(cfg.classes.clone(), cfg.frame_length, frames))
}

/// Generates every (class, SNR) pair and writes a SIGF file.
pub fn gen_dataset(cfg: &GenConfig, out: &Path) -> Result<GenSummary> {
    cfg.validate()?;
    let total = cfg.total_frames();
    let mut writer = FrameWriter::create(out, &cfg.classes, cfg.frame_length, total as u32)?;
    let mut counts = BTreeMap::new();
    for &m in &cfg.classes {
        for &s in &cfg.snrs_db {
            *counts.entry((m, snr_key(s))).or_insert(0) += cfg.frames_per_pair;
        }
    }
    let mut start = 0usize;
    while start < total {
        let end = (start + GEN_CHUNK).min(total);
        let frames: Vec<SignalFrame> = (start..end)
            .into_par_iter()
            .map(|id| frame_for_id(cfg, id as u64))
            .collect::<Result<_>>()?;
        for f in &frames {
            writer.write(f)?;
        }
        start = end;
    }
    let bytes = writer.finish()?;
    Ok(GenSummary {
        counts,
        total,
        bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GenConfig {
        GenConfig {
            snrs_db: vec![10.0],
            frames_per_pair: 1,
            ..GenConfig::default()
        }
    }

    #[test]
    fn noise_free_frame() {
        let mut rng = Rng::new(3, 0);
        let c = gen_frame_components(ModulationType::Bpsk, f64::INFINITY, &mut rng, &cfg()).unwrap();
        assert_eq!(c.frame.len(), 128);
        assert!(c.noise.iter().all(|z| z.norm_sqr() == 0.0));
        assert!(measure_snr(&c.signal, &c.noise).is_err());
    }

    #[test]
    fn deterministic_given_rng() {
        for m in ModulationType::ALL {
            let a = gen_frame(m, 4.0, &mut Rng::new(1, 5), &cfg()).unwrap();
            let b = gen_frame(m, 4.0, &mut Rng::new(1, 5), &cfg()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.id, 5);
            assert!(a.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        }
    }

    #[test]
    fn measure_snr_identities() {
        let a = vec![Complex64::new(1.0, 0.0); 8];
        let b = vec![Complex64::new(0.0, 1.0); 8];
        assert!(measure_snr(&a, &b).unwrap().abs() < 1e-12);
        let s: Vec<Complex64> = a.iter().map(|z| z * 10f64.sqrt()).collect();
        assert!((measure_snr(&s, &b).unwrap() - 10.0).abs() < 1e-12);
        assert!(measure_snr(&a, &b[..4]).is_err());
    }

    #[test]
    fn mean_measured_snr_tracks_nominal() {
        for m in ModulationType::ALL {
            let mut acc = 0.0;
            for id in 0..1000 {
                let c = gen_frame_components(m, 10.0, &mut Rng::new(77, id), &cfg()).unwrap();
                acc += measure_snr(&c.signal, &c.noise).unwrap();
            }
            let mean = acc / 1000.0;
            assert!((mean - 10.0).abs() < 0.5, "{m}: {mean}");
        }
    }

    #[test]
    fn qpsk_six_db_average() {
        let mut acc = 0.0;
        for id in 0..1000 {
            let c = gen_frame_components(ModulationType::Qpsk, 6.0, &mut Rng::new(8, id), &cfg()).unwrap();
            acc += measure_snr(&c.signal, &c.noise).unwrap();
        }
        assert!((acc / 1000.0 - 6.0).abs() < 0.5);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = cfg();
        c.samples_per_symbol = 0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.snrs_db.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn frame_ids_enumerate_class_then_snr() {
        let c = GenConfig {
            classes: vec![ModulationType::Bpsk, ModulationType::Gfsk],
            snrs_db: vec![0.0, 10.0],
            frames_per_pair: 3,
            ..GenConfig::default()
        };
        let f = frame_for_id(&c, 7).unwrap();
        assert_eq!(f.label, ModulationType::Gfsk);
        assert_eq!(f.snr_db, 0.0);
        assert!(frame_for_id(&c, 12).is_err());
    }
}
