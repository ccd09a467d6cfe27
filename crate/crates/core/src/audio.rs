//! Audio featurization: 16-bit PCM WAV → standardized 12 kHz clip →
//! power STFT → 96-band log-amplitude mel-spectrogram in `[0, 1]`.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SAMPLE_RATE: u32 = 12_000;
pub const HOP: usize = 256;
pub const N_FFT: usize = 512;
pub const N_MELS: usize = 96;
/// 29.12 s at 12 kHz; with a centered STFT this gives exactly 1366 frames.
pub const CLIP_SAMPLES: usize = 349_440;
pub const N_FRAMES: usize = CLIP_SAMPLES / HOP + 1;
pub const F_MIN: f64 = 0.0;
pub const F_MAX: f64 = 6_000.0;
/// Power floor before `10·log10`.
pub const POWER_FLOOR: f64 = 1e-10;

const MIN_INPUT_RATE: u32 = 8_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Reads a mono 16-bit PCM WAV file, scaling samples to `[-1, 1)`.
    pub fn read_wav(path: &Path) -> Result<Self> {
        let reader = hound::WavReader::open(path)
            .map_err(|e| Error::format(path, format!("unreadable WAV: {e}")))?;
        let spec = reader.spec();
        if spec.channels != 1
            || spec.bits_per_sample != 16
            || spec.sample_format != hound::SampleFormat::Int
        {
            return Err(Error::format(
                path,
                format!(
                    "need mono 16-bit PCM, got {} ch / {} bit / {:?}",
                    spec.channels, spec.bits_per_sample, spec.sample_format
                ),
            ));
        }
        let samples = reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32_768.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("corrupt WAV payload: {e}")))?;
        Ok(Self::new(samples, spec.sample_rate))
    }

    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let werr = |e: hound::Error| Error::format(path, format!("WAV write failed: {e}"));
        let mut w = hound::WavWriter::create(path, spec).map_err(werr)?;
        for &s in &self.samples {
            let v = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
            w.write_sample(v).map_err(werr)?;
        }
        w.finalize().map_err(werr)
    }
}

/// Resamples to 12 kHz by linear interpolation, then center-trims or
/// zero-pads the tail to exactly [`CLIP_SAMPLES`].
pub fn standardize(clip: &AudioClip) -> Result<AudioClip> {
    if clip.samples.is_empty() {
        return Err(Error::input("empty audio signal"));
    }
    if clip.sample_rate < MIN_INPUT_RATE {
        return Err(Error::input(format!(
            "sample rate {} Hz below the {MIN_INPUT_RATE} Hz minimum",
            clip.sample_rate
        )));
    }
    let mut samples = if clip.sample_rate == SAMPLE_RATE {
        clip.samples.clone()
    } else {
        resample_linear(&clip.samples, clip.sample_rate, SAMPLE_RATE)
    };
    if samples.len() > CLIP_SAMPLES {
        let start = (samples.len() - CLIP_SAMPLES) / 2;
        samples = samples[start..start + CLIP_SAMPLES].to_vec();
    } else {
        samples.resize(CLIP_SAMPLES, 0.0);
    }
    Ok(AudioClip::new(samples, SAMPLE_RATE))
}

fn resample_linear(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    let ratio = f64::from(from) / f64::from(to);
    // Last output position that still lies inside the source signal.
    let out_len = ((x.len() - 1) as u64 * u64::from(to) / u64::from(from)) as usize + 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let lo = (pos.floor() as usize).min(x.len() - 1);
            let hi = (lo + 1).min(x.len() - 1);
            let frac = pos - lo as f64;
            x[lo] + (x[hi] - x[lo]) * frac
        })
        .collect()
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mirror-pads `pad` samples on each side without repeating the edge sample.
fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len() as isize;
    let reflect = |mut i: isize| -> f64 {
        if n == 1 {
            return x[0];
        }
        let period = 2 * (n - 1);
        i = i.rem_euclid(period);
        if i >= n {
            i = period - i;
        }
        x[i as usize]
    };
    (-(pad as isize)..n + pad as isize).map(reflect).collect()
}

/// Power spectrogram `[(N_FFT/2+1) × frames]` of a clip, Hann window,
/// hop 256, centered with reflect padding.
pub fn stft_power(clip: &AudioClip) -> Result<Tensor> {
    if clip.samples.is_empty() {
        return Err(Error::input("empty audio signal"));
    }
    let padded = reflect_pad(&clip.samples, N_FFT / 2);
    let frames = clip.samples.len() / HOP + 1;
    let bins = N_FFT / 2 + 1;
    let window = hann(N_FFT);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(N_FFT);

    let mut out = vec![0.0; bins * frames];
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for f in 0..frames {
        let seg = &padded[f * HOP..f * HOP + N_FFT];
        for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, c) in buf.iter().take(bins).enumerate() {
            out[k * frames + f] = c.norm_sqr();
        }
    }
    Tensor::new(&[bins, frames], out)
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters over the FFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `[n_mels × (n_fft/2+1)]`.
    pub weights: Tensor,
    /// `n_mels + 2` band edges in Hz.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    /// Row `i` is the triangle over edges `i, i+1, i+2`, sampled at the FFT
    /// bin frequencies and rescaled so its largest sample is exactly 1.
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if n_mels == 0 || n_fft < 2 || !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
            return Err(Error::config(format!(
                "invalid filterbank: {n_mels} mels, nfft {n_fft}, [{fmin}, {fmax}] Hz at {sample_rate} Hz"
            )));
        }
        let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bins = n_fft / 2 + 1;
        let bin_hz = |k: usize| k as f64 * f64::from(sample_rate) / n_fft as f64;

        let mut w = vec![0.0; n_mels * bins];
        for i in 0..n_mels {
            let (lo, mid, hi) = (edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]);
            let row = &mut w[i * bins..(i + 1) * bins];
            for (k, slot) in row.iter_mut().enumerate() {
                let f = bin_hz(k);
                *slot = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
            }
            let peak = row.iter().copied().fold(0.0, f64::max);
            if peak <= 0.0 {
                return Err(Error::config(format!(
                    "mel band {i} ({lo:.1}-{hi:.1} Hz) contains no FFT bin; use fewer mels or a larger FFT"
                )));
            }
            row.iter_mut().for_each(|v| *v /= peak);
        }
        Ok(Self {
            weights: Tensor::new(&[n_mels, bins], w)?,
            edges_hz,
        })
    }

    pub fn standard() -> Self {
        Self::new(N_MELS, N_FFT, SAMPLE_RATE, F_MIN, F_MAX).expect("standard filterbank is valid")
    }

    pub fn n_mels(&self) -> usize {
        self.weights.shape()[0]
    }

    /// `[n_mels × bins] × [bins × frames]`.
    pub fn apply(&self, power: &Tensor) -> Result<Tensor> {
        self.weights.matmul(power)
    }
}

/// Log-amplitude mel features `[96×1366×1]`, min-max normalized per clip.
/// A constant spectrogram (e.g. silence) maps to all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram(pub Tensor);

impl MelSpectrogram {
    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

pub fn log_amplitude(mel_power: &Tensor) -> Tensor {
    mel_power.map(|v| 10.0 * v.max(POWER_FLOOR).log10())
}

pub fn min_max_normalize(x: &Tensor) -> Tensor {
    let (lo, hi) = (x.min(), x.max());
    if hi > lo {
        x.map(|v| (v - lo) / (hi - lo))
    } else {
        x.map(|_| 0.0)
    }
}

/// Full featurization of an already standardized clip.
pub fn mel_spectrogram_with(clip: &AudioClip, bank: &MelFilterbank) -> Result<MelSpectrogram> {
    if clip.sample_rate != SAMPLE_RATE || clip.samples.len() != CLIP_SAMPLES {
        return Err(Error::input(format!(
            "clip must be standardized to {CLIP_SAMPLES} samples at {SAMPLE_RATE} Hz, got {} at {}",
            clip.samples.len(),
            clip.sample_rate
        )));
    }
    let power = stft_power(clip)?;
    let mel = bank.apply(&power)?;
    let normalized = min_max_normalize(&log_amplitude(&mel));
    let frames = power.shape()[1];
    Ok(MelSpectrogram(normalized.reshape(&[bank.n_mels(), frames, 1])?))
}

pub fn mel_spectrogram(clip: &AudioClip) -> Result<MelSpectrogram> {
    mel_spectrogram_with(clip, &MelFilterbank::standard())
}

/// WAV file → cached-feature tensor.
pub fn featurize_wav(path: &Path, bank: &MelFilterbank) -> Result<MelSpectrogram> {
    let clip = standardize(&AudioClip::read_wav(path)?)?;
    mel_spectrogram_with(&clip, bank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64, rate: u32) -> AudioClip {
        let n = (secs * f64::from(rate)).round() as usize;
        AudioClip::new(
            (0..n)
                .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(rate)).sin())
                .collect(),
            rate,
        )
    }

    #[test]
    fn frame_arithmetic() {
        assert_eq!(CLIP_SAMPLES / HOP, 1365);
        assert_eq!(N_FRAMES, 1366);
        assert!((CLIP_SAMPLES as f64 / f64::from(SAMPLE_RATE) - 29.12).abs() < 1e-12);
    }

    #[test]
    fn standardize_fixed_point() {
        let clip = tone(440.0, 29.12, SAMPLE_RATE);
        assert_eq!(clip.samples.len(), CLIP_SAMPLES);
        assert_eq!(standardize(&clip).unwrap(), clip);
    }

    #[test]
    fn standardize_downsamples_two_to_one() {
        let clip = tone(440.0, 29.12, 24_000);
        let out = standardize(&clip).unwrap();
        assert_eq!(out.sample_rate, SAMPLE_RATE);
        assert_eq!(out.samples.len(), CLIP_SAMPLES);
        for (i, &s) in out.samples.iter().enumerate().step_by(997) {
            assert!((s - clip.samples[2 * i]).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_pads_short_and_trims_long() {
        let short = standardize(&tone(440.0, 10.0, SAMPLE_RATE)).unwrap();
        assert_eq!(short.samples.len(), CLIP_SAMPLES);
        assert!(short.samples[120_000..].iter().all(|&s| s == 0.0));

        let long = tone(440.0, 40.0, SAMPLE_RATE);
        let trimmed = standardize(&long).unwrap();
        let start = (long.samples.len() - CLIP_SAMPLES) / 2;
        assert_eq!(trimmed.samples[..], long.samples[start..start + CLIP_SAMPLES]);
    }

    #[test]
    fn standardize_rejects_bad_input() {
        assert!(matches!(
            standardize(&AudioClip::new(vec![], SAMPLE_RATE)),
            Err(Error::Input(_))
        ));
        assert!(standardize(&AudioClip::new(vec![0.0; 10], 4_000)).is_err());
    }

    #[test]
    fn reflect_padding_mirrors_edges() {
        assert_eq!(
            reflect_pad(&[1.0, 2.0, 3.0, 4.0], 2),
            vec![3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0]
        );
    }

    #[test]
    fn silent_stft_is_zero() {
        let p = stft_power(&AudioClip::new(vec![0.0; CLIP_SAMPLES], SAMPLE_RATE)).unwrap();
        assert_eq!(p.shape(), &[257, 1366]);
        assert!(p.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_lands_in_expected_bins() {
        let clip = standardize(&tone(1000.0, 29.12, SAMPLE_RATE)).unwrap();
        let p = stft_power(&clip).unwrap();
        let frames = p.shape()[1];
        let energy: Vec<f64> = (0..257)
            .map(|k| p.data()[k * frames..(k + 1) * frames].iter().sum())
            .collect();
        let peak = energy
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(peak == 42 || peak == 43, "peak bin {peak}");
        let total: f64 = energy.iter().sum();
        assert!((energy[42] + energy[43]) / total > 0.8);
    }

    #[test]
    fn mel_scale_formula() {
        assert!((hz_to_mel(700.0) - 781.172_838_748_031_2).abs() < 1e-9);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn filterbank_rows_are_peak_normalized_triangles() {
        let bank = MelFilterbank::standard();
        assert_eq!(bank.weights.shape(), &[96, 257]);
        assert_eq!(bank.edges_hz.len(), 98);
        let w = bank.weights.data();
        let mut prev_support = (0usize, 0usize);
        for i in 0..96 {
            let row = &w[i * 257..(i + 1) * 257];
            assert!(row.iter().all(|&v| v >= 0.0));
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1, "row {i}");
            assert!(row.iter().all(|&v| v <= 1.0));
            let first = row.iter().position(|&v| v > 0.0).unwrap();
            let last = row.iter().rposition(|&v| v > 0.0).unwrap();
            // contiguous support
            assert!(row[first..=last].iter().all(|&v| v > 0.0));
            if i > 0 {
                assert!(first >= prev_support.0 && last >= prev_support.1);
            }
            prev_support = (first, last);
        }
        // only adjacent rows may overlap
        for i in 0..94 {
            let a = &w[i * 257..(i + 1) * 257];
            let c = &w[(i + 2) * 257..(i + 3) * 257];
            assert!(a.iter().zip(c).all(|(&x, &y)| x == 0.0 || y == 0.0), "rows {i},{}", i + 2);
        }
    }

    #[test]
    fn filterbank_covers_interior_bins() {
        let bank = MelFilterbank::standard();
        for k in 1..256 {
            let col: f64 = (0..96).map(|i| bank.weights.at(&[i, k])).sum();
            assert!(col > 0.0, "bin {k}");
        }
    }

    #[test]
    fn filterbank_config_errors() {
        assert!(MelFilterbank::new(96, 512, 12_000, 0.0, 7_000.0).is_err());
        assert!(MelFilterbank::new(0, 512, 12_000, 0.0, 6_000.0).is_err());
        assert!(MelFilterbank::new(96, 512, 12_000, 3_000.0, 2_000.0).is_err());
    }

    #[test]
    fn silence_gives_all_zero_features() {
        let clip = AudioClip::new(vec![0.0; CLIP_SAMPLES], SAMPLE_RATE);
        let mel = mel_spectrogram(&clip).unwrap();
        assert_eq!(mel.tensor().shape(), &[96, 1366, 1]);
        assert!(mel.tensor().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn features_are_bounded_and_deterministic() {
        let clip = standardize(&tone(330.0, 5.0, 22_050)).unwrap();
        let a = mel_spectrogram(&clip).unwrap();
        let b = mel_spectrogram(&clip).unwrap();
        assert_eq!(a.tensor().to_bytes(), b.tensor().to_bytes());
        assert!(a.tensor().data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.tensor().max(), 1.0);
        assert_eq!(a.tensor().min(), 0.0);
    }

    #[test]
    fn requires_standardized_clip() {
        assert!(mel_spectrogram(&tone(440.0, 1.0, SAMPLE_RATE)).is_err());
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let clip = tone(440.0, 0.5, 16_000);
        clip.write_wav(&path).unwrap();
        let back = AudioClip::read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16_000);
        assert_eq!(back.samples.len(), clip.samples.len());
        for (a, b) in back.samples.iter().zip(&clip.samples) {
            assert!((a - b).abs() < 1.0 / 16_000.0);
        }
    }

    #[test]
    fn stereo_wav_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 12_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(AudioClip::read_wav(&path), Err(Error::Format { .. })));
    }
}
