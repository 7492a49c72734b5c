//! The two real matrices fed to the network: `V1 = [I, Q]` and
//! `V2 = [A, P]`, both derived from the RMS-normalized frame.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::siggen::SignalFrame;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RepresentOptions {
    /// Divide the amplitude by the frame RMS a second time.
    pub literal_eq5: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationPair {
    /// `T × 2`, columns I and Q.
    pub v1: Matrix,
    /// `T × 2`, columns amplitude and phase/π.
    pub v2: Matrix,
    /// Frame RMS `R`.
    pub r_norm: f64,
}

impl RepresentationPair {
    pub fn len(&self) -> usize {
        self.v1.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.v1.rows() == 0
    }
}

pub fn normalize_frame(frame: &SignalFrame, opts: RepresentOptions) -> Result<RepresentationPair> {
    let t = frame.samples.len();
    if t == 0 {
        return Err(Error::invalid("frame has no samples"));
    }
    if let Some(i) = frame
        .samples
        .iter()
        .position(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::numeric("non-finite frame sample", Some(i)));
    }
    let energy = frame.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / t as f64;
    let r = energy.sqrt();
    if r == 0.0 {
        return Err(Error::invalid("all-zero frame (R = 0)"));
    }

    let mut v1 = Vec::with_capacity(2 * t);
    let mut v2 = Vec::with_capacity(2 * t);
    for z in &frame.samples {
        let i = z.re / r;
        let q = z.im / r;
        let mut a = i.hypot(q);
        if opts.literal_eq5 {
            a /= r;
        }
        // atan2(0, 0) = 0 gives the P = 0 convention at the origin.
        let p = q.atan2(i) / PI;
        v1.extend_from_slice(&[i, q]);
        v2.extend_from_slice(&[a, p]);
    }
    Ok(RepresentationPair {
        v1: Matrix::from_vec(t, 2, v1)?,
        v2: Matrix::from_vec(t, 2, v2)?,
        r_norm: r,
    })
}
