//! Butterworth band-pass design as second-order sections and zero-phase
//! (forward-backward) filtering.
//!
//! `order` is the order of the low-pass prototype, so an order-`n`
//! band-pass has `2n` poles and `n` biquads. Each biquad has numerator
//! `[1, 0, -1]` up to gain.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{err, Result};

const MODULE: &str = "features";

/// One biquad `[b0, b1, b2, a0, a1, a2]` with `a0 == 1`.
pub type Section = [f64; 6];

#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Section>,
}

fn check_band(lo: f64, hi: f64, fs: f64, order: usize) -> Result<()> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(err!(
            Domain,
            MODULE,
            "sampling rate must be positive, got {fs}"
        ));
    }
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(err!(
            Domain,
            MODULE,
            "band edges must satisfy 0 < lo < hi < fs/2, got lo={lo}, hi={hi}, fs={fs}"
        ));
    }
    if order == 0 {
        return Err(err!(Domain, MODULE, "filter order must be >= 1"));
    }
    Ok(())
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

/// Digital centre frequency (Hz) where the band-pass gain is exactly 1.
pub fn center_frequency(lo: f64, hi: f64, fs: f64) -> f64 {
    let w0 = (prewarp(lo, fs) * prewarp(hi, fs)).sqrt();
    fs / PI * (w0 / (2.0 * fs)).atan()
}

/// Designs the band-pass `[lo, hi]` Hz.
pub fn butter_bandpass(order: usize, lo: f64, hi: f64, fs: f64) -> Result<Sos> {
    check_band(lo, hi, fs, order)?;
    let w1 = prewarp(lo, fs);
    let w2 = prewarp(hi, fs);
    let bw = w2 - w1;
    let w0sq = w1 * w2;
    let fs2 = Complex64::new(2.0 * fs, 0.0);

    // Analog prototype poles on the left half of the unit circle.
    let n = order as i64;
    let mut poles = Vec::with_capacity(2 * order);
    for m in (-(n - 1)..n).step_by(2) {
        let p = -Complex64::from_polar(1.0, PI * m as f64 / (2.0 * n as f64));
        // Low-pass to band-pass, then bilinear.
        let half = p * (bw / 2.0);
        let root = (half * half - w0sq).sqrt();
        for pa in [half + root, half - root] {
            poles.push((fs2 + pa) / (fs2 - pa));
        }
    }

    let tol = 1e-12;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= tol)
        .map(|p| p.re)
        .collect();
    complex.sort_by(|a, b| {
        a.norm()
            .total_cmp(&b.norm())
            .then(a.arg().total_cmp(&b.arg()))
    });
    real.sort_by(f64::total_cmp);
    let mut sections: Vec<Section> = complex
        .iter()
        .map(|p| [1.0, 0.0, -1.0, 1.0, -2.0 * p.re, p.norm_sqr()])
        .collect();
    for pair in real.chunks(2) {
        let (r1, r2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
        sections.push([1.0, 0.0, -1.0, 1.0, -(r1 + r2), r1 * r2]);
    }
    if sections.len() != order {
        return Err(err!(
            Domain,
            MODULE,
            "pole pairing failed for order {order}"
        ));
    }

    // Unit gain per section at the centre frequency.
    let fc = center_frequency(lo, hi, fs);
    for s in &mut sections {
        let g = section_response(s, fc, fs).norm();
        for b in &mut s[..3] {
            *b /= g;
        }
    }
    Ok(Sos { sections })
}

fn section_response(s: &Section, f: f64, fs: f64) -> Complex64 {
    let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
    let z2 = z1 * z1;
    (s[0] + s[1] * z1 + s[2] * z2) / (s[3] + s[4] * z1 + s[5] * z2)
}

impl Sos {
    /// |H(f)| of a single (one-directional) pass.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| section_response(s, f, fs).norm())
            .product()
    }

    /// Initial state giving the steady-state response to a unit step.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [b0, b1, b2, _, a1, a2] = *s;
                let g = (b0 + b1 + b2) / (1.0 + a1 + a2);
                let z2 = b2 - a2 * g;
                let z1 = b1 - a1 * g + z2;
                let out = [z1 * scale, z2 * scale];
                scale *= g;
                out
            })
            .collect()
    }

    /// Cascaded transposed direct form II, in place.
    fn run(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2, _, a1, a2] = *s;
            let [mut z1, mut z2] = *z;
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z1;
                z1 = b1 * xin - a1 * y + z2;
                z2 = b2 * xin - a2 * y;
                *v = y;
            }
            *z = [z1, z2];
        }
    }

    /// Single forward pass from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut state = vec![[0.0; 2]; self.sections.len()];
        self.run(&mut y, &mut state);
        y
    }

    /// Zero-phase filtering with odd-extension padding and steady-state
    /// initial conditions on both passes. Output length equals input length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
        let mut state = scaled(ext[0]);
        self.run(&mut ext, &mut state);
        ext.reverse();
        let mut state = scaled(ext[0]);
        self.run(&mut ext, &mut state);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase Butterworth band-pass of `signal`.
pub fn bandpass_filter(
    signal: &[f64],
    fs: f64,
    lo: f64,
    hi: f64,
    order: usize,
) -> Result<Vec<f64>> {
    Ok(butter_bandpass(order, lo, hi, fs)?.filtfilt(signal))
}
