use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::Error;

/// The eleven modulation classes, in the canonical (alphabetical) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModulationType {
    Psk8,
    AmDsb,
    AmSsb,
    Bpsk,
    Cpfsk,
    Gfsk,
    Pam4,
    Qam16,
    Qam64,
    Qpsk,
    Wbfm,
}

impl ModulationType {
    pub const ALL: [ModulationType; 11] = [
        ModulationType::Psk8,
        ModulationType::AmDsb,
        ModulationType::AmSsb,
        ModulationType::Bpsk,
        ModulationType::Cpfsk,
        ModulationType::Gfsk,
        ModulationType::Pam4,
        ModulationType::Qam16,
        ModulationType::Qam64,
        ModulationType::Qpsk,
        ModulationType::Wbfm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModulationType::Psk8 => "8PSK",
            ModulationType::AmDsb => "AM-DSB",
            ModulationType::AmSsb => "AM-SSB",
            ModulationType::Bpsk => "BPSK",
            ModulationType::Cpfsk => "CPFSK",
            ModulationType::Gfsk => "GFSK",
            ModulationType::Pam4 => "PAM4",
            ModulationType::Qam16 => "QAM16",
            ModulationType::Qam64 => "QAM64",
            ModulationType::Qpsk => "QPSK",
            ModulationType::Wbfm => "WBFM",
        }
    }

    pub fn is_analog(self) -> bool {
        matches!(
            self,
            ModulationType::AmDsb | ModulationType::AmSsb | ModulationType::Wbfm
        )
    }

    /// Unit-average-power constellation for the linearly modulated classes.
    pub fn constellation(self) -> Option<Vec<Complex64>> {
        use std::f64::consts::PI;
        let pts = match self {
            ModulationType::Bpsk => vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)],
            ModulationType::Qpsk => (0..4)
                .map(|k| Complex64::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0))
                .collect(),
            ModulationType::Psk8 => (0..8)
                .map(|k| Complex64::from_polar(1.0, k as f64 * PI / 4.0))
                .collect(),
            ModulationType::Pam4 => [-3.0, -1.0, 1.0, 3.0]
                .iter()
                .map(|&a| Complex64::new(a / 5f64.sqrt(), 0.0))
                .collect(),
            ModulationType::Qam16 => square_qam(4),
            ModulationType::Qam64 => square_qam(8),
            _ => return None,
        };
        Some(pts)
    }
}

fn square_qam(side: usize) -> Vec<Complex64> {
    let levels: Vec<f64> = (0..side).map(|i| 2.0 * i as f64 - (side as f64 - 1.0)).collect();
    let mut pts = Vec::with_capacity(side * side);
    for &re in &levels {
        for &im in &levels {
            pts.push(Complex64::new(re, im));
        }
    }
    let power = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
    let scale = power.sqrt().recip();
    pts.iter().map(|p| p * scale).collect()
}

impl fmt::Display for ModulationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        ModulationType::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| Error::invalid(format!("unknown modulation `{wanted}`")))
    }
}

/// Parses a comma-separated class list; `all` expands to every class.
pub fn parse_class_list(s: &str) -> Result<Vec<ModulationType>, Error> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(ModulationType::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let m: ModulationType = part.parse()?;
        if out.contains(&m) {
            return Err(Error::invalid(format!("class `{m}` listed twice")));
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(Error::invalid("empty class list"));
    }
    Ok(out)
}
