//! IIR filter design as cascades of second-order sections, and zero-phase
//! forward-backward application.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad `b0 + b1 z⁻¹ + b2 z⁻² / 1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }

    /// Steady-state transposed direct-form state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        [self.b[1] - self.a[1] * g + z2, z2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Complex response at `freq` Hz.
    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq / fs;
        self.sections.iter().map(|s| s.response(w)).product()
    }

    pub fn gain_db(&self, freq: f64, fs: f64) -> f64 {
        20.0 * self.response(freq, fs).norm().log10()
    }

    /// Causal filtering with initial section states `zi`.
    fn run(&self, x: &mut [f64], zi: &[[f64; 2]], scale: f64) {
        for (s, z0) in self.sections.iter().zip(zi) {
            let (mut z1, mut z2) = (z0[0] * scale, z0[1] * scale);
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[1] * y + z2;
                z2 = s.b[2] * xin - s.a[2] * y;
                *v = y;
            }
        }
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &mut [f64]) {
        let zi = vec![[0.0; 2]; self.sections.len()];
        self.run(x, &zi, 0.0);
    }

    /// Initial states putting every section in steady state for a unit step.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [a, b] = s.step_state();
                let zi = [a * scale, b * scale];
                scale *= s.dc_gain();
                zi
            })
            .collect()
    }

    pub fn default_padlen(&self, fs: f64) -> usize {
        (3 * (2 * self.sections.len() + 1)).max((2.0 * fs) as usize)
    }

    /// Zero-phase filtering: odd extension at both ends, forward pass, reverse
    /// pass, each started from the steady state of its first sample.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Result<Vec<f64>> {
        let n = x.len();
        if n == 0 {
            return Err(Error::Data("cannot filter an empty signal".into()));
        }
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        let zi = self.step_states();
        let first = ext[0];
        self.run(&mut ext, &zi, first);
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, &zi, first);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

fn check_edge(name: &str, f: f64, fs: f64) -> Result<()> {
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(Error::Config(format!(
            "{name} {f} Hz must lie strictly inside (0, {}) Hz for fs = {fs} Hz",
            fs / 2.0
        )));
    }
    Ok(())
}

/// Butterworth bandpass of prototype order `order` (even), designed by the
/// bilinear transform with prewarped edges and normalized to unit gain at
/// the geometric band centre.
pub fn butter_bandpass(order: usize, low: f64, high: f64, fs: f64) -> Result<Sos> {
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::Config(format!("filter order {order} must be even and positive")));
    }
    if fs.is_nan() || fs <= 0.0 {
        return Err(Error::Config(format!("sampling rate {fs} must be positive")));
    }
    check_edge("low band edge", low, fs)?;
    check_edge("high band edge", high, fs)?;
    if low >= high {
        return Err(Error::Config(format!("low band edge {low} Hz must be below high edge {high} Hz")));
    }
    let pi = std::f64::consts::PI;
    let fs2 = 2.0 * fs;
    let (wl, wh) = (fs2 * (pi * low / fs).tan(), fs2 * (pi * high / fs).tan());
    let (bw, wo) = (wh - wl, (wl * wh).sqrt());

    let n = order as f64;
    let mut sections = Vec::with_capacity(order);
    for m in (0..order).map(|i| -(order as isize) + 1 + 2 * i as isize) {
        let p = -Complex64::from_polar(1.0, pi * m as f64 / (2.0 * n));
        let p_lp = p * bw / 2.0;
        let disc = (p_lp * p_lp - wo * wo).sqrt();
        for p_bp in [p_lp + disc, p_lp - disc] {
            if p_bp.im <= 0.0 {
                continue;
            }
            let pz = (fs2 + p_bp) / (fs2 - p_bp);
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -2.0 * pz.re, pz.norm_sqr()],
            });
        }
    }
    debug_assert_eq!(sections.len(), order);
    sections.sort_by(|x, y| x.a[2].total_cmp(&y.a[2]));

    let mut sos = Sos { sections };
    let centre = 2.0 * (wo / fs2).atan() * fs / (2.0 * pi);
    let g = sos.response(centre, fs).norm().powf(-1.0 / order as f64);
    for s in &mut sos.sections {
        s.b.iter_mut().for_each(|b| *b *= g);
    }
    Ok(sos)
}

/// Second-order notch at `f0` with quality factor `q` (bandwidth `f0/q` at −3 dB).
pub fn notch_filter(f0: f64, q: f64, fs: f64) -> Result<Sos> {
    check_edge("notch frequency", f0, fs)?;
    if q.is_nan() || q <= 0.0 {
        return Err(Error::Config(format!("notch quality factor {q} must be positive")));
    }
    let pi = std::f64::consts::PI;
    let w0 = 2.0 * pi * f0 / fs;
    let bw = w0 / q;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let c = w0.cos();
    Ok(Sos {
        sections: vec![Biquad {
            b: [gain, -2.0 * gain * c, gain],
            a: [1.0, -2.0 * gain * c, 2.0 * gain - 1.0],
        }],
    })
}
