//! Synthetic interrogation generator.
//!
//! Produces magnitude streams and IQ recordings for any interrogation type at
//! a chosen amplitude, sampling phase and noise level. Noiseless output is a
//! pure function of the spec, so the same spec always yields the same bytes.

use std::f64::consts::SQRT_2;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::iq::{IqSampleFormat, MagnitudeStream, SAMPLE_PERIOD_NS};
use crate::templates::{body_len_for, template_for, InterrogationType, PulseTemplate};

/// Sampling aperture: each sample averages the envelope over this long
/// after its instant.
pub const APERTURE_NS: f64 = 100.0;

/// Chip length of the stand-in data block pattern.
pub const CHIP_NS: i64 = 250;

/// Parameters of the canonical reference recordings.
pub const REFERENCE_AMPLITUDE: u8 = 200;
pub const REFERENCE_LEAD: usize = 100;
pub const REFERENCE_SEED: u64 = 1030;
pub const MANIFEST_NAME: &str = "manifest.tsv";

const CHIP_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// What to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub kind: InterrogationType,
    pub amplitude: u8,
    /// Sampling phase in units of one sample period, `[0, 1)`.
    pub fractional_offset: f64,
    /// Signal-to-noise ratio (amplitude squared over noise variance), dB.
    /// `None` or `+inf` is noiseless.
    pub snr_db: Option<f64>,
    pub lead_in: usize,
    pub lead_out: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(kind: InterrogationType, amplitude: u8) -> Self {
        Self {
            kind,
            amplitude,
            fractional_offset: 0.0,
            snr_db: None,
            lead_in: 0,
            lead_out: 0,
            seed: 0,
        }
    }

    pub fn with_offset(mut self, fractional_offset: f64) -> Self {
        self.fractional_offset = fractional_offset;
        self
    }

    pub fn with_snr(mut self, snr_db: Option<f64>) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_leads(mut self, lead_in: usize, lead_out: usize) -> Self {
        self.lead_in = lead_in;
        self.lead_out = lead_out;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The canonical reference recording of one type.
    pub fn reference(kind: InterrogationType) -> Self {
        Self::new(kind, REFERENCE_AMPLITUDE)
            .with_leads(REFERENCE_LEAD, REFERENCE_LEAD)
            .with_seed(REFERENCE_SEED)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.fractional_offset) {
            return Err(Error::InvalidSpec(format!(
                "fractional offset {} outside [0, 1)",
                self.fractional_offset
            )));
        }
        if self.snr_db.is_some_and(|s| s.is_nan() || s == f64::NEG_INFINITY) {
            return Err(Error::InvalidSpec("snr must be a number or +inf".into()));
        }
        Ok(())
    }

    /// Total number of samples produced.
    pub fn len(&self) -> usize {
        self.lead_in + body_len_for(self.kind) + self.lead_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn noise_sigma(&self, amplitude: f64) -> Option<f64> {
        match self.snr_db {
            Some(snr) if snr.is_finite() => Some(amplitude * 10f64.powf(-snr / 20.0)),
            _ => None,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Intervals (ns, relative to P1) where the envelope is on.
fn on_intervals(template: &PulseTemplate, seed: u64) -> Vec<(f64, f64)> {
    let mut on: Vec<(f64, f64)> = template
        .pulses
        .iter()
        .map(|p| (p.start_ns as f64, p.end_ns() as f64))
        .collect();
    if let Some(block) = template.data_block {
        let mut rng = rng_for(seed, CHIP_STREAM);
        let mut t = block.start_ns;
        while t < block.end_ns() {
            let end = (t + CHIP_NS).min(block.end_ns());
            if rng.random::<bool>() {
                on.push((t as f64, end as f64));
            }
            t = end;
        }
    }
    on
}

/// Noiseless envelope in `[0, 1]` for every output sample, leads included.
fn envelope(spec: &GenSpec) -> Vec<f64> {
    let template = template_for(spec.kind);
    let on = on_intervals(&template, spec.seed);
    let phase = spec.fractional_offset * SAMPLE_PERIOD_NS as f64;
    let first = -(spec.lead_in as i64);
    (first..first + spec.len() as i64)
        .map(|k| {
            let t0 = (k * SAMPLE_PERIOD_NS) as f64 + phase;
            let t1 = t0 + APERTURE_NS;
            let covered: f64 = on
                .iter()
                .map(|&(s, e)| (t1.min(e) - t0.max(s)).max(0.0))
                .sum();
            (covered / APERTURE_NS).min(1.0)
        })
        .collect()
}

fn noiseless_magnitudes(spec: &GenSpec) -> Vec<f64> {
    let amp = f64::from(spec.amplitude);
    envelope(spec).into_iter().map(|e| (amp * e).round()).collect()
}

/// Baseband `(I, Q)` in magnitude units: the carrier at a constant 225
/// degree phase plus complex AWGN split evenly over both components.
fn components(spec: &GenSpec, clean: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut noise = match spec.noise_sigma(f64::from(spec.amplitude)) {
        Some(sigma) => Some((
            rng_for(spec.seed, NOISE_STREAM),
            Normal::new(0.0, sigma / SQRT_2).map_err(|e| Error::InvalidSpec(e.to_string()))?,
        )),
        None => None,
    };
    Ok(clean
        .iter()
        .map(|&m| {
            let axis = -m / SQRT_2;
            match noise.as_mut() {
                Some((rng, normal)) => (axis + normal.sample(rng), axis + normal.sample(rng)),
                None => (axis, axis),
            }
        })
        .collect())
}

/// Magnitude samples for `spec`: lead-in, the rasterized message and
/// lead-out (silent apart from edge spill).
///
/// With noise the samples are the envelope of signal plus complex AWGN, so
/// silent stretches follow a Rayleigh distribution as in a real receiver.
pub fn generate_magnitude(spec: &GenSpec) -> Result<MagnitudeStream> {
    spec.validate()?;
    let clean = noiseless_magnitudes(spec);
    let samples = if spec.noise_sigma(1.0).is_none() {
        clean.iter().map(|&v| v as u8).collect()
    } else {
        components(spec, &clean)?
            .into_iter()
            .map(|(i, q)| i.hypot(q).round().clamp(0.0, 255.0) as u8)
            .collect()
    };
    Ok(MagnitudeStream::new(samples, 0))
}

/// Baseband amplitude whose magnitude maps back onto `magnitude`.
fn iq_amplitude(magnitude: f64) -> f64 {
    magnitude * 128.0 * SQRT_2 / 255.0
}

fn quantize(x: f64, format: IqSampleFormat) -> u8 {
    match format {
        IqSampleFormat::Cs8 => x.round().clamp(-128.0, 127.0) as i8 as u8,
        IqSampleFormat::Cu8 => (x + 127.5).round().clamp(0.0, 255.0) as u8,
    }
}

/// Interleaved IQ bytes for `spec`.
///
/// Uses the same noise draws as [`generate_magnitude`], so the magnitude
/// read back from the bytes is within quantization error of it.
pub fn generate_iq(spec: &GenSpec, format: IqSampleFormat) -> Result<Vec<u8>> {
    spec.validate()?;
    let clean = noiseless_magnitudes(spec);
    let mut out = Vec::with_capacity(clean.len() * 2);
    for (i, q) in components(spec, &clean)? {
        out.push(quantize(iq_amplitude(i), format));
        out.push(quantize(iq_amplitude(q), format));
    }
    Ok(out)
}

/// One line of the reference-set manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub filename: String,
    pub spec: GenSpec,
    pub sha256: String,
}

impl ManifestEntry {
    pub fn to_line(&self) -> String {
        let snr = match self.spec.snr_db {
            Some(s) => format!("{s}"),
            None => "none".to_string(),
        };
        format!(
            "{}\t{}\t{}\t{:?}\t{}\t{}\t{}",
            self.filename,
            self.spec.kind.name(),
            self.spec.amplitude,
            self.spec.fractional_offset,
            snr,
            self.spec.seed,
            self.sha256
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::IoPath {
        path: path.to_path_buf(),
        source,
    }
}

/// Write one `.cu8` recording per interrogation type plus a tab-separated
/// manifest (filename, type, amplitude, offset, snr, seed, sha256).
pub fn write_reference_set(dir: &Path) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::new();
    for kind in InterrogationType::ALL {
        let spec = GenSpec::reference(kind);
        let bytes = generate_iq(&spec, IqSampleFormat::Cu8)?;
        let filename = format!("{}.cu8", kind.name());
        let path: PathBuf = dir.join(&filename);
        fs::write(&path, &bytes).map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            filename,
            spec,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let manifest = dir.join(MANIFEST_NAME);
    let mut f = fs::File::create(&manifest).map_err(io_err(&manifest))?;
    for e in &entries {
        writeln!(f, "{}", e.to_line()).map_err(io_err(&manifest))?;
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iq::convert_bytes;
    use crate::templates::rasterize;
    use InterrogationType::*;

    #[test]
    fn compat_body_is_29_samples() {
        let s = generate_magnitude(&GenSpec::new(ModeAAllCallCompat, 255).with_offset(0.2)).unwrap();
        assert_eq!(s.len(), 29);
        let r = rasterize(&template_for(ModeAAllCallCompat), 0.2);
        for (k, &v) in s.samples.iter().enumerate() {
            let expect = if r.pulse_sample_indices().contains(&k) { 255 } else { 0 };
            assert_eq!(v, expect, "sample {k}");
        }
    }

    #[test]
    fn leads_are_zero() {
        let body = generate_magnitude(&GenSpec::new(ModeA, 200)).unwrap();
        let padded = generate_magnitude(&GenSpec::new(ModeA, 200).with_leads(10, 10)).unwrap();
        let mut expect = vec![0u8; 10];
        expect.extend_from_slice(&body.samples);
        expect.extend(std::iter::repeat_n(0u8, 10));
        assert_eq!(padded.samples, expect);
    }

    #[test]
    fn all_call_suffix_matches_mode_s_preamble() {
        for offset in [0.0, 0.2, 0.5, 0.7] {
            let s = generate_magnitude(&GenSpec::new(ModeS, 200).with_offset(offset)).unwrap();
            for kind in [ModeAAllCall, ModeCAllCall] {
                let ac = generate_magnitude(&GenSpec::new(kind, 200).with_offset(offset).with_leads(0, 10)).unwrap();
                let r = rasterize(&template_for(kind), offset);
                let p3 = r.primary().pulse_of(crate::templates::PulseRole::P3).unwrap().first;
                let preamble = crate::templates::mode_s_guard_index();
                assert_eq!(&ac.samples[p3..p3 + preamble], &s.samples[..preamble], "{kind} @ {offset}");
            }
        }
    }

    #[test]
    fn edge_samples_take_partial_amplitude() {
        // At 0.8 of a sample the aperture of the sample before P1 covers
        // 20% of the pulse and the last P1 sample covers 80%.
        let s = generate_magnitude(&GenSpec::new(ModeA, 200).with_offset(0.8).with_leads(1, 0)).unwrap();
        assert_eq!(&s.samples[..4], &[40, 200, 160, 0]);
    }

    #[test]
    fn infinite_snr_is_noiseless() {
        let base = GenSpec::new(ModeC, 150).with_leads(20, 20).with_seed(9);
        let a = generate_magnitude(&base).unwrap();
        let b = generate_magnitude(&base.clone().with_snr(Some(f64::INFINITY))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_is_seeded() {
        let spec = GenSpec::new(ModeS, 100).with_snr(Some(10.0)).with_leads(50, 50).with_seed(3);
        assert_eq!(generate_magnitude(&spec).unwrap(), generate_magnitude(&spec).unwrap());
        let other = spec.clone().with_seed(4);
        assert_ne!(generate_magnitude(&spec).unwrap(), generate_magnitude(&other).unwrap());
        assert_eq!(
            generate_iq(&spec, IqSampleFormat::Cs8).unwrap(),
            generate_iq(&spec, IqSampleFormat::Cs8).unwrap()
        );
    }

    #[test]
    fn iq_round_trip_within_one_count() {
        for format in [IqSampleFormat::Cu8, IqSampleFormat::Cs8] {
            for amp in 0..=255u8 {
                let spec = GenSpec::new(ModeAAllCall, amp).with_offset(0.8).with_leads(2, 2);
                let mag = generate_magnitude(&spec).unwrap();
                let back = convert_bytes(&generate_iq(&spec, format).unwrap(), format);
                assert_eq!(back.len(), mag.len());
                for (a, b) in mag.samples.iter().zip(&back) {
                    assert!(a.abs_diff(*b) <= 1, "{format:?} amp {amp}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn zero_amplitude_cu8_is_mid_scale() {
        let bytes = generate_iq(&GenSpec::new(ModeA, 0).with_leads(5, 5), IqSampleFormat::Cu8).unwrap();
        assert!(bytes.iter().all(|&b| b == 128));
    }

    #[test]
    fn invalid_offset_rejected() {
        let spec = GenSpec::new(ModeA, 10).with_offset(1.0);
        assert!(matches!(generate_magnitude(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn reference_set_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ea = write_reference_set(a.path()).unwrap();
        let eb = write_reference_set(b.path()).unwrap();
        assert_eq!(ea, eb);
        assert_eq!(ea.len(), 7);
        let manifest = fs::read_to_string(a.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(manifest.lines().count(), 7);
        let first = manifest.lines().next().unwrap();
        assert_eq!(first.split('\t').count(), 7);
        assert!(first.starts_with("mode-a.cu8\tmode-a\t200\t0.0\tnone\t1030\t"));
    }
}
