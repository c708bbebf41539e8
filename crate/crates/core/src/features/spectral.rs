//! Periodogram band powers and the per-window feature vector.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{RealFftPlanner, RealToComplex};

use super::BandDefinition;
use crate::error::{err, Result};

const MODULE: &str = "features";

/// Absolute and relative power per band for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPowers {
    pub absolute: Vec<f64>,
    pub relative: Vec<f64>,
    /// Set when the bands hold no power; relative powers are then all 0.
    pub zero_total: bool,
}

/// Mean of absolute sample values.
pub fn mean_amplitude(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64
}

/// Sum of absolute first differences divided by the window length.
pub fn line_length(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(err!(
            Domain,
            MODULE,
            "line length needs at least 2 samples, got {}",
            x.len()
        ));
    }
    let s: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(s / x.len() as f64)
}

/// One-sided periodogram with a rectangular window, scaled so that
/// `sum(psd) * fs / n` equals the mean square of `x`.
pub struct Periodogram {
    n: usize,
    fs: f64,
    fft: Arc<dyn RealToComplex<f64>>,
    input: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    psd: Vec<f64>,
}

impl Periodogram {
    pub fn new(n: usize, fs: f64) -> Self {
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(n);
        Self {
            n,
            fs,
            input: fft.make_input_vec(),
            spectrum: fft.make_output_vec(),
            scratch: fft.make_scratch_vec(),
            psd: vec![0.0; n / 2 + 1],
            fft,
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.fs / self.n as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.psd.len())
            .map(|k| k as f64 * self.bin_width())
            .collect()
    }

    pub fn compute(&mut self, x: &[f64]) -> &[f64] {
        assert_eq!(x.len(), self.n, "periodogram length mismatch");
        self.input.copy_from_slice(x);
        self.fft
            .process_with_scratch(&mut self.input, &mut self.spectrum, &mut self.scratch)
            .expect("buffer sizes come from the planner");
        let scale = 1.0 / (self.fs * self.n as f64);
        let nyquist = if self.n.is_multiple_of(2) {
            Some(self.n / 2)
        } else {
            None
        };
        for (k, (p, c)) in self.psd.iter_mut().zip(&self.spectrum).enumerate() {
            let one_sided = if k == 0 || Some(k) == nyquist {
                1.0
            } else {
                2.0
            };
            *p = c.norm_sqr() * scale * one_sided;
        }
        &self.psd
    }
}

/// Band membership per frequency bin, `lo <= f < hi`.
pub(crate) fn band_bins(freqs: &[f64], bands: &[BandDefinition]) -> Vec<Vec<usize>> {
    bands
        .iter()
        .map(|b| {
            (0..freqs.len())
                .filter(|&k| freqs[k] >= b.lo_hz && freqs[k] < b.hi_hz)
                .collect()
        })
        .collect()
}

pub(crate) fn powers_from_psd(psd: &[f64], df: f64, bins: &[Vec<usize>]) -> BandPowers {
    let absolute: Vec<f64> = bins
        .iter()
        .map(|ks| ks.iter().map(|&k| psd[k]).sum::<f64>() * df)
        .collect();
    let total: f64 = absolute.iter().sum();
    let zero_total = !(total > 0.0);
    let relative = if zero_total {
        vec![0.0; absolute.len()]
    } else {
        absolute.iter().map(|a| a / total).collect()
    };
    BandPowers {
        absolute,
        relative,
        zero_total,
    }
}

/// Periodogram band powers of one window. Relative powers are fractions of
/// the summed absolute power of all listed bands.
pub fn band_powers(window: &[f64], fs: f64, bands: &[BandDefinition]) -> Result<BandPowers> {
    if (window.len() as f64) < fs {
        return Err(err!(
            Domain,
            MODULE,
            "band powers need at least 1 s of data ({} samples at {fs} Hz), got {}",
            fs.ceil(),
            window.len()
        ));
    }
    for b in bands {
        b.validate(fs)?;
    }
    let mut p = Periodogram::new(window.len(), fs);
    let freqs = p.frequencies();
    let df = p.bin_width();
    let bins = band_bins(&freqs, bands);
    Ok(powers_from_psd(p.compute(window), df, &bins))
}

/// Normalized Shannon entropy of relative band powers, in [0, 1].
pub(crate) fn spectral_entropy(relative: &[f64]) -> f64 {
    if relative.len() < 2 {
        return 0.0;
    }
    let h: f64 = relative
        .iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| -r * r.ln())
        .sum();
    h / (relative.len() as f64).ln()
}
