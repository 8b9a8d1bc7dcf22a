//! Butterworth bandpass design and zero-phase IIR filtering.
//!
//! The design path is the classic chain: analog lowpass prototype, lowpass to
//! bandpass transform, bilinear transform with frequency pre-warping, then
//! factorization into second-order sections. Application is forward-backward
//! (`filtfilt`) with odd-reflection padding, so the effective magnitude
//! response is |H|^2 and the phase is zero.

use ndarray::Array1;
use num_complex::Complex64;
use thiserror::Error;

use crate::trialio::{Trial, TrialSet};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("invalid band: need 0 < low < high < fs/2, got low={low}, high={high}, fs={fs}")]
    InvalidBand { low: f64, high: f64, fs: f64 },
    #[error("unstable design: pole magnitude {0} not inside the unit circle")]
    UnstableDesign(f64),
    #[error("sample-rate mismatch: filter designed for {filter} Hz, trial is {trial} Hz")]
    RateMismatch { filter: f64, trial: f64 },
}

/// One biquad, coefficients normalized so a0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignMeta {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate_hz: f64,
}

/// A cascade of second-order sections plus the parameters it was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    pub sections: Vec<Sos>,
    pub design_meta: DesignMeta,
}

impl IirFilter {
    /// Complex single-pass response at `f_hz`.
    pub fn frequency_response(&self, f_hz: f64) -> Complex64 {
        let w = std::f64::consts::TAU * f_hz / self.design_meta.sample_rate_hz;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let mut h = Complex64::new(1.0, 0.0);
        for s in &self.sections {
            h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (Complex64::new(1.0, 0.0) + s.a1 * z1 + s.a2 * z2);
        }
        h
    }

    /// Magnitudes of all cascade poles.
    pub fn pole_magnitudes(&self) -> Vec<f64> {
        self.sections
            .iter()
            .flat_map(|s| {
                let disc = s.a1 * s.a1 - 4.0 * s.a2;
                if disc < 0.0 {
                    // conjugate pair; |z|^2 = a2
                    let mag = s.a2.sqrt();
                    vec![mag, mag]
                } else {
                    let r0 = (-s.a1 + disc.sqrt()) * 0.5;
                    let r1 = (-s.a1 - disc.sqrt()) * 0.5;
                    vec![r0.abs(), r1.abs()]
                }
            })
            .collect()
    }
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = Complex64::new(2.0 * fs, 0.0);
    (k + s) / (k - s)
}

/// Designs an order-`order` Butterworth bandpass (the digital cascade has
/// `order` biquads, i.e. 2x`order` poles).
pub fn design_bandpass(
    order: usize,
    low_hz: f64,
    high_hz: f64,
    fs_hz: f64,
) -> Result<IirFilter, DspError> {
    if order < 1 || !(0.0 < low_hz && low_hz < high_hz && high_hz < fs_hz / 2.0) {
        return Err(DspError::InvalidBand {
            low: low_hz,
            high: high_hz,
            fs: fs_hz,
        });
    }

    // Pre-warped analog band edges (rad/s).
    let warp = |f: f64| 2.0 * fs_hz * (std::f64::consts::PI * f / fs_hz).tan();
    let w_low = warp(low_hz);
    let w_high = warp(high_hz);
    let bw = w_high - w_low;
    let w0 = (w_low * w_high).sqrt();

    // Analog Butterworth prototype poles on the unit circle, left half-plane.
    let proto: Vec<Complex64> = (0..order)
        .map(|k| {
            let ang = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, ang)
        })
        .collect();

    // Lowpass -> bandpass doubles each pole; pair the results into
    // conjugate (or real) quadratics directly.
    let mut pole_pairs: Vec<(Complex64, Complex64)> = Vec::with_capacity(order);
    let w0sq = Complex64::new(w0 * w0, 0.0);
    for p in proto.iter().filter(|p| p.im > 1e-12) {
        let s = p * bw * 0.5;
        let disc = (s * s - w0sq).sqrt();
        for bp in [s + disc, s - disc] {
            let z = bilinear(bp, fs_hz);
            pole_pairs.push((z, z.conj()));
        }
    }
    if order % 2 == 1 {
        // The real prototype pole at -1 maps to one conjugate pair (narrow
        // band) or two real poles (wide band).
        let s = Complex64::new(-bw * 0.5, 0.0);
        let disc = (s * s - w0sq).sqrt();
        let z1 = bilinear(s + disc, fs_hz);
        let z2 = bilinear(s - disc, fs_hz);
        if disc.im.abs() > 0.0 {
            pole_pairs.push((z1, z1.conj()));
        } else {
            pole_pairs.push((z1, z2));
        }
    }
    debug_assert_eq!(pole_pairs.len(), order);

    for &(z1, z2) in &pole_pairs {
        for z in [z1, z2] {
            if z.norm() >= 1.0 - 1e-12 {
                return Err(DspError::UnstableDesign(z.norm()));
            }
        }
    }

    // Each section takes one zero at z=1 and one at z=-1 (numerator 1 - z^-2)
    // and is normalized to unit magnitude at the warped center frequency, so
    // the cascade is exactly 1 there.
    let wc = 2.0 * (w0 / (2.0 * fs_hz)).atan();
    let e1 = Complex64::from_polar(1.0, -wc);
    let e2 = e1 * e1;
    let sections = pole_pairs
        .iter()
        .map(|&(z1, z2)| {
            let a1 = -(z1 + z2).re;
            let a2 = (z1 * z2).re;
            let num = Complex64::new(1.0, 0.0) - e2;
            let den = Complex64::new(1.0, 0.0) + a1 * e1 + a2 * e2;
            let g = 1.0 / (num / den).norm();
            Sos {
                b0: g,
                b1: 0.0,
                b2: -g,
                a1,
                a2,
            }
        })
        .collect();

    Ok(IirFilter {
        sections,
        design_meta: DesignMeta {
            order,
            low_hz,
            high_hz,
            sample_rate_hz: fs_hz,
        },
    })
}

/// Single forward pass of the cascade over `x`, transposed direct form II.
/// `zi` holds two states per section and is left at its final value.
fn sosfilt(sections: &[Sos], x: &mut [f64], zi: &mut [(f64, f64)]) {
    for (s, z) in sections.iter().zip(zi.iter_mut()) {
        let (mut z1, mut z2) = *z;
        for v in x.iter_mut() {
            let y = s.b0 * *v + z1;
            z1 = s.b1 * *v - s.a1 * y + z2;
            z2 = s.b2 * *v - s.a2 * y;
            *v = y;
        }
        *z = (z1, z2);
    }
}

/// Steady-state section states for a constant input of 1, scaled per section
/// by the DC gain accumulated through the preceding sections.
fn steady_state_zi(sections: &[Sos], x0: f64) -> Vec<(f64, f64)> {
    let mut zi = Vec::with_capacity(sections.len());
    let mut scale = x0;
    for s in sections {
        let dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        zi.push(((dc - s.b0) * scale, (dc * (1.0 + s.a1) - s.b0 - s.b1) * scale));
        scale *= dc;
    }
    zi
}

/// Zero-phase application to one channel: odd-reflection pad, filter, reverse,
/// filter, reverse, trim.
fn filtfilt_channel(filter: &IirFilter, x: &[f64]) -> Vec<f64> {
    let t_len = x.len();
    let pad = (3 * filter.sections.len() * 2).min(t_len.saturating_sub(1));
    let mut ext = Vec::with_capacity(t_len + 2 * pad);
    for j in 0..pad {
        ext.push(2.0 * x[0] - x[pad - j]);
    }
    ext.extend_from_slice(x);
    for j in 0..pad {
        ext.push(2.0 * x[t_len - 1] - x[t_len - 2 - j]);
    }

    let mut zi = steady_state_zi(&filter.sections, ext[0]);
    sosfilt(&filter.sections, &mut ext, &mut zi);
    ext.reverse();
    let mut zi = steady_state_zi(&filter.sections, ext[0]);
    sosfilt(&filter.sections, &mut ext, &mut zi);
    ext.reverse();

    ext[pad..pad + t_len].to_vec()
}

/// Filters every channel of a trial zero-phase; metadata is preserved.
pub fn filter_trial(filter: &IirFilter, trial: &Trial) -> Result<Trial, DspError> {
    if trial.sample_rate_hz != filter.design_meta.sample_rate_hz {
        return Err(DspError::RateMismatch {
            filter: filter.design_meta.sample_rate_hz,
            trial: trial.sample_rate_hz,
        });
    }
    let mut out = trial.data.clone();
    for (mut row, src) in out.rows_mut().into_iter().zip(trial.data.rows()) {
        let filtered = filtfilt_channel(filter, &src.to_vec());
        row.assign(&Array1::from_vec(filtered));
    }
    Ok(trial.with_data(out))
}

/// Filters all trials of a set, in parallel when the `parallel` feature is on.
pub fn filter_trialset(filter: &IirFilter, set: &TrialSet) -> Result<TrialSet, DspError> {
    let filtered = crate::par::map_collect(set.trials(), |t| filter_trial(filter, t));
    let trials = filtered.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(TrialSet::new(trials).expect("filtering preserves set invariants"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trialio::{ClassLabel, Session};
    use ndarray::Array2;

    /// Independent cascade evaluation straight from the difference equation's
    /// transfer function.
    fn oracle_mag(filter: &IirFilter, f_hz: f64) -> f64 {
        let w = std::f64::consts::TAU * f_hz / filter.design_meta.sample_rate_hz;
        let mut h = Complex64::new(1.0, 0.0);
        for s in &filter.sections {
            let e = |k: i32| Complex64::from_polar(1.0, -w * k as f64);
            let num = s.b0 * e(0) + s.b1 * e(1) + s.b2 * e(2);
            let den = e(0) + s.a1 * e(1) + s.a2 * e(2);
            h *= num / den;
        }
        h.norm()
    }

    fn paper_filter() -> IirFilter {
        design_bandpass(5, 4.0, 40.0, 250.0).unwrap()
    }

    fn trial_from(data: Array2<f64>, fs: f64) -> Trial {
        Trial {
            data,
            sample_rate_hz: fs,
            label: Some(ClassLabel::Left),
            subject_id: "s".into(),
            trial_id: "t".into(),
            session: Session::Train,
        }
    }

    fn sine_trial(f_hz: f64, t_len: usize, fs: f64) -> Trial {
        let mut data = Array2::<f64>::zeros((1, t_len));
        for t in 0..t_len {
            data[[0, t]] = (std::f64::consts::TAU * f_hz * t as f64 / fs).sin();
        }
        trial_from(data, fs)
    }

    /// Least-squares sinusoid amplitude over an interior window.
    fn fitted_amplitude(y: &[f64], f_hz: f64, fs: f64, skip: usize) -> f64 {
        let n = y.len() - 2 * skip;
        let (mut cs, mut sn) = (0.0, 0.0);
        for (i, &v) in y.iter().enumerate().skip(skip).take(n) {
            let ang = std::f64::consts::TAU * f_hz * i as f64 / fs;
            sn += v * ang.sin();
            cs += v * ang.cos();
        }
        ((2.0 * sn / n as f64).powi(2) + (2.0 * cs / n as f64).powi(2)).sqrt()
    }

    #[test]
    fn response_matches_spec_points() {
        let f = paper_filter();
        let center = (4.0f64 * 40.0).sqrt();
        let at_center = oracle_mag(&f, center);
        assert!((0.99..=1.01).contains(&at_center), "|H({center})| = {at_center}");
        assert!(oracle_mag(&f, 1.0) < 0.1);
        assert!(oracle_mag(&f, 100.0) < 0.1);
    }

    #[test]
    fn poles_strictly_stable() {
        let f = paper_filter();
        assert_eq!(f.sections.len(), 5);
        for m in f.pole_magnitudes() {
            assert!(m < 1.0 - 1e-12, "pole magnitude {m}");
        }
    }

    #[test]
    fn frequency_response_agrees_with_oracle() {
        let f = paper_filter();
        for hz in [0.5, 2.0, 8.0, 12.649, 25.0, 60.0, 110.0] {
            assert!((f.frequency_response(hz).norm() - oracle_mag(&f, hz)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_bands_rejected() {
        assert!(matches!(
            design_bandpass(1, 40.0, 4.0, 250.0),
            Err(DspError::InvalidBand { .. })
        ));
        assert!(matches!(
            design_bandpass(5, 0.0, 40.0, 250.0),
            Err(DspError::InvalidBand { .. })
        ));
        assert!(matches!(
            design_bandpass(5, 4.0, 130.0, 250.0),
            Err(DspError::InvalidBand { .. })
        ));
        assert!(matches!(
            design_bandpass(0, 4.0, 40.0, 250.0),
            Err(DspError::InvalidBand { .. })
        ));
    }

    #[test]
    fn zero_in_zero_out() {
        let f = paper_filter();
        let t = trial_from(Array2::zeros((3, 400)), 250.0);
        let y = filter_trial(&f, &t).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.0));
        assert_eq!(y.data.dim(), (3, 400));
    }

    #[test]
    fn passband_sine_kept() {
        let f = paper_filter();
        let t = sine_trial(15.0, 1250, 250.0);
        let y = filter_trial(&f, &t).unwrap();
        let amp = fitted_amplitude(y.data.row(0).as_slice().unwrap(), 15.0, 250.0, 250);
        assert!((0.95..=1.05).contains(&amp), "amplitude {amp}");
    }

    #[test]
    fn stopband_sine_rejected() {
        let f = paper_filter();
        let t = sine_trial(1.0, 1250, 250.0);
        let y = filter_trial(&f, &t).unwrap();
        let amp = fitted_amplitude(y.data.row(0).as_slice().unwrap(), 1.0, 250.0, 250);
        assert!(amp < 0.02, "amplitude {amp}");
    }

    #[test]
    fn linearity() {
        let f = paper_filter();
        let mut rng_state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x = Array2::from_shape_fn((2, 300), |_| next());
        let y = Array2::from_shape_fn((2, 300), |_| next());
        let (a, b) = (2.3, -1.7);
        let combined = filter_trial(&f, &trial_from(&x * a + &y * b, 250.0)).unwrap();
        let fx = filter_trial(&f, &trial_from(x, 250.0)).unwrap();
        let fy = filter_trial(&f, &trial_from(y, 250.0)).unwrap();
        let expect = &fx.data * a + &fy.data * b;
        let num = (&combined.data - &expect).iter().map(|v| v * v).sum::<f64>().sqrt();
        let den = expect.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 1e-9, "relative error {}", num / den);
    }

    #[test]
    fn zero_phase_lag() {
        let f = paper_filter();
        let fs = 250.0;
        let t_len = 1000;
        let mut data = Array2::<f64>::zeros((1, t_len));
        for t in 0..t_len {
            let mut v = 0.0;
            for (i, f_hz) in [10.0, 15.0, 20.0, 25.0, 30.0].iter().enumerate() {
                v += (std::f64::consts::TAU * f_hz * t as f64 / fs + i as f64).sin();
            }
            data[[0, t]] = v;
        }
        let input = trial_from(data, fs);
        let y = filter_trial(&f, &input).unwrap();
        let x = input.data.row(0);
        let yo = y.data.row(0);
        let mut best = (0i32, f64::MIN);
        for lag in -5i32..=5 {
            let mut c = 0.0;
            for t in 100..t_len - 100 {
                let ti = t as i32 + lag;
                c += x[t] * yo[ti as usize];
            }
            if c > best.1 {
                best = (lag, c);
            }
        }
        assert_eq!(best.0, 0, "cross-correlation peak at lag {}", best.0);
    }

    #[test]
    fn rate_mismatch_rejected() {
        let f = paper_filter();
        let t = sine_trial(10.0, 100, 128.0);
        assert!(matches!(
            filter_trial(&f, &t),
            Err(DspError::RateMismatch { .. })
        ));
    }
}
