//! Scale-invariant signal-to-distortion ratio and waveform arithmetic.
//!
//! SI-SDR projects the estimate onto the reference: with
//! a = <estimate, reference> / ||reference||^2, the value is
//! 10*log10(||a*reference||^2 / ||a*reference - estimate||^2). A zero
//! distortion energy yields the +inf sentinel, which [`mean_si_sdr`]
//! excludes from averaging with an explicit count.

use crate::model::Waveform;

pub type Result<T> = std::result::Result<T, SignalError>;

#[derive(Debug, thiserror::Error)]
pub enum SignalError {
    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("sample rate mismatch: {0} vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("signals must be non-empty")]
    Empty,
    #[error("reference has zero energy")]
    ZeroReference,
    #[error("no finite values to average")]
    NothingToAverage,
}

/// SI-SDR value and the projection scale that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SiSdrResult {
    /// Decibels; `f64::INFINITY` when the distortion energy is exactly zero.
    pub value_db: f64,
    pub scaling: f64,
}

/// Compute SI-SDR of an estimate against a reference of equal length.
pub fn si_sdr(estimate: &Waveform, reference: &Waveform) -> Result<SiSdrResult> {
    if estimate.sample_rate != reference.sample_rate {
        return Err(SignalError::RateMismatch(estimate.sample_rate, reference.sample_rate));
    }
    if estimate.samples.len() != reference.samples.len() {
        return Err(SignalError::LengthMismatch(estimate.samples.len(), reference.samples.len()));
    }
    if estimate.samples.is_empty() {
        return Err(SignalError::Empty);
    }
    let e = &estimate.samples;
    let r = &reference.samples;
    let ref_energy: f64 = r.iter().map(|x| x * x).sum();
    if ref_energy == 0.0 {
        return Err(SignalError::ZeroReference);
    }
    let dot: f64 = e.iter().zip(r.iter()).map(|(x, y)| x * y).sum();
    let scaling = dot / ref_energy;

    // explicit projection residual, not the algebraic shortcut
    let mut target_energy = 0.0f64;
    let mut distortion_energy = 0.0f64;
    for (x, y) in e.iter().zip(r.iter()) {
        let t = scaling * y;
        target_energy += t * t;
        let d = t - x;
        distortion_energy += d * d;
    }
    let value_db = if distortion_energy == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (target_energy / distortion_energy).log10()
    };
    Ok(SiSdrResult { value_db, scaling })
}

/// Mean SI-SDR with +inf entries excluded and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSiSdr {
    pub mean_db: f64,
    pub excluded_infinite: usize,
}

/// Average SI-SDR values, skipping the +inf sentinel.
pub fn mean_si_sdr(values: &[f64]) -> Result<MeanSiSdr> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| *v != f64::INFINITY).collect();
    if finite.is_empty() {
        return Err(SignalError::NothingToAverage);
    }
    let mean = finite.iter().sum::<f64>() / finite.len() as f64;
    Ok(MeanSiSdr { mean_db: mean, excluded_infinite: values.len() - finite.len() })
}

fn zip_pad(a: &Waveform, b: &Waveform, op: impl Fn(f64, f64) -> f64) -> Result<Waveform> {
    if a.sample_rate != b.sample_rate {
        return Err(SignalError::RateMismatch(a.sample_rate, b.sample_rate));
    }
    let n = a.samples.len().max(b.samples.len());
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let x = a.samples.get(i).copied().unwrap_or(0.0);
        let y = b.samples.get(i).copied().unwrap_or(0.0);
        samples.push(op(x, y));
    }
    Ok(Waveform { samples, sample_rate: a.sample_rate })
}

/// Sample-wise sum; the shorter input is zero-padded at the tail.
pub fn add(a: &Waveform, b: &Waveform) -> Result<Waveform> {
    zip_pad(a, b, |x, y| x + y)
}

/// Sample-wise difference `a - b`; the shorter input is zero-padded at the tail.
pub fn subtract(a: &Waveform, b: &Waveform) -> Result<Waveform> {
    zip_pad(a, b, |x, y| x - y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(samples: &[f64]) -> Waveform {
        Waveform::new(samples.to_vec(), 16_000)
    }

    #[test]
    fn unit_vectors_give_zero_db() {
        let r = si_sdr(&wave(&[1.0, 1.0]), &wave(&[1.0, 0.0])).unwrap();
        assert!((r.value_db - 0.0).abs() < 1e-9);
        assert_eq!(r.scaling, 1.0);
    }

    #[test]
    fn scaled_copy_is_infinite() {
        let reference = wave(&[0.3, -0.2, 0.7, 0.01]);
        let estimate = wave(&[0.6, -0.4, 1.4, 0.02]);
        let r = si_sdr(&estimate, &reference).unwrap();
        assert_eq!(r.value_db, f64::INFINITY);
        assert_eq!(r.scaling, 2.0);
    }

    #[test]
    fn closed_form_agrees_with_projection_route() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(2..64);
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = si_sdr(&wave(&e), &wave(&r)).unwrap();
            // algebraic route: ||a r||^2 / (||e||^2 - ||a r||^2)
            let rr: f64 = r.iter().map(|x| x * x).sum();
            let ee: f64 = e.iter().map(|x| x * x).sum();
            let dot: f64 = e.iter().zip(&r).map(|(x, y)| x * y).sum();
            let a = dot / rr;
            let target = a * a * rr;
            let expected = 10.0 * (target / (ee - target)).log10();
            assert!(
                (got.value_db - expected).abs() < 1e-9,
                "{} vs {expected}",
                got.value_db
            );
        }
    }

    #[test]
    fn scale_invariance_of_the_estimate() {
        let reference = wave(&[0.5, -0.1, 0.3, 0.2, -0.4]);
        let estimate = wave(&[0.4, -0.2, 0.35, 0.1, -0.3]);
        let base = si_sdr(&estimate, &reference).unwrap().value_db;
        for beta in [0.1, 10.0] {
            let scaled = wave(&estimate.samples.iter().map(|x| x * beta).collect::<Vec<_>>());
            let v = si_sdr(&scaled, &reference).unwrap().value_db;
            assert!((v - base).abs() < 1e-6, "beta {beta}: {v} vs {base}");
        }
    }

    #[test]
    fn error_contract() {
        assert!(matches!(
            si_sdr(&wave(&[1.0]), &wave(&[1.0, 2.0])),
            Err(SignalError::LengthMismatch(1, 2))
        ));
        let mut other_rate = wave(&[1.0]);
        other_rate.sample_rate = 8_000;
        assert!(matches!(
            si_sdr(&other_rate, &wave(&[1.0])),
            Err(SignalError::RateMismatch(8_000, 16_000))
        ));
        assert!(matches!(
            si_sdr(&wave(&[1.0, 2.0]), &wave(&[0.0, 0.0])),
            Err(SignalError::ZeroReference)
        ));
        assert!(si_sdr(&wave(&[]), &wave(&[])).is_err());
    }

    #[test]
    fn mean_excludes_infinite_with_count() {
        let m = mean_si_sdr(&[17.9, 15.8, 14.6, 14.0, 14.0]).unwrap();
        assert!((m.mean_db - 15.26).abs() < 1e-9);
        assert_eq!(m.excluded_infinite, 0);

        let m = mean_si_sdr(&[f64::INFINITY, 10.0]).unwrap();
        assert_eq!(m.mean_db, 10.0);
        assert_eq!(m.excluded_infinite, 1);

        assert!(mean_si_sdr(&[f64::INFINITY]).is_err());
        assert!(mean_si_sdr(&[]).is_err());
    }

    #[test]
    fn add_and_subtract_pad_tails() {
        let a = wave(&[1.0, 2.0, 3.0]);
        let b = wave(&[0.5, 0.5]);
        assert_eq!(add(&a, &b).unwrap().samples, vec![1.5, 2.5, 3.0]);
        assert_eq!(subtract(&a, &b).unwrap().samples, vec![0.5, 1.5, 3.0]);
        assert_eq!(subtract(&b, &a).unwrap().samples, vec![-0.5, -1.5, -3.0]);
        let mut c = b.clone();
        c.sample_rate = 8_000;
        assert!(add(&a, &c).is_err());
    }
}
