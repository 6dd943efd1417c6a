//! 8-bit IQ ingestion and magnitude translation.
//!
//! Interleaved I/Q byte pairs are centered according to their on-disk format
//! and mapped onto a 0..=255 envelope scale. All downstream index arithmetic
//! assumes a fixed 2.5 MSPS stream, i.e. one magnitude sample every 0.4 us.

use std::f64::consts::SQRT_2;
use std::io::{ErrorKind, Read};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The only supported sample rate.
pub const SAMPLE_RATE_HZ: u64 = 2_500_000;

/// Duration of one sample in microseconds.
pub const SAMPLE_PERIOD_US: f64 = 0.4;

/// Duration of one sample in nanoseconds (exact integer form of [`SAMPLE_PERIOD_US`]).
pub const SAMPLE_PERIOD_NS: i64 = 400;

/// Scale that maps the corner `(-128, -128)` onto 255.
const MAGNITUDE_SCALE: f64 = 255.0 / (128.0 * SQRT_2);

/// Mid-scale of unsigned offset-binary samples.
const CU8_CENTER: f64 = 127.5;

/// Byte layout of an interleaved IQ stream (I then Q, one byte each).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IqSampleFormat {
    /// Unsigned offset binary, RTL-SDR style: zero sits between 127 and 128.
    Cu8,
    /// Two's complement signed bytes.
    Cs8,
}

impl IqSampleFormat {
    pub fn name(self) -> &'static str {
        match self {
            IqSampleFormat::Cu8 => "cu8",
            IqSampleFormat::Cs8 => "cs8",
        }
    }

    /// Centered value of one raw byte.
    pub fn center(self, byte: u8) -> f64 {
        match self {
            IqSampleFormat::Cu8 => f64::from(byte) - CU8_CENTER,
            IqSampleFormat::Cs8 => f64::from(byte as i8),
        }
    }

    /// Magnitude of one raw byte pair, evaluated directly from the formula.
    pub fn magnitude(self, i: u8, q: u8) -> u8 {
        magnitude_centered(self.center(i), self.center(q))
    }

    /// Precomputed 256x256 table indexed by `(i << 8) | q`.
    pub fn lut(self) -> &'static [u8] {
        static CU8: OnceLock<Box<[u8]>> = OnceLock::new();
        static CS8: OnceLock<Box<[u8]>> = OnceLock::new();
        let cell = match self {
            IqSampleFormat::Cu8 => &CU8,
            IqSampleFormat::Cs8 => &CS8,
        };
        cell.get_or_init(|| {
            (0..=u16::MAX)
                .map(|idx| self.magnitude((idx >> 8) as u8, idx as u8))
                .collect()
        })
    }

    /// Guess the format from a file extension.
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "cu8" => Some(IqSampleFormat::Cu8),
            "cs8" => Some(IqSampleFormat::Cs8),
            _ => None,
        }
    }
}

impl FromStr for IqSampleFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cu8" => Ok(IqSampleFormat::Cu8),
            "cs8" => Ok(IqSampleFormat::Cs8),
            other => Err(format!("unknown IQ format '{other}' (expected cu8 or cs8)")),
        }
    }
}

/// Magnitude of a centered IQ vector: `round(|(i, q)| * 255 / (128 * sqrt 2))`, clamped.
pub fn magnitude_centered(i: f64, q: f64) -> u8 {
    let m = (i * i + q * q).sqrt() * MAGNITUDE_SCALE;
    m.round().clamp(0.0, 255.0) as u8
}

/// Magnitude of a signed IQ pair in `[-128, 127]`.
pub fn iq_to_magnitude(i: i8, q: i8) -> u8 {
    magnitude_centered(f64::from(i), f64::from(q))
}

/// A contiguous run of magnitude samples at 2.5 MSPS.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MagnitudeStream {
    pub samples: Vec<u8>,
    /// Index of `samples[0]` in the underlying source.
    pub source_offset: u64,
}

impl MagnitudeStream {
    pub fn new(samples: Vec<u8>, source_offset: u64) -> Self {
        Self {
            samples,
            source_offset,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_period_us(&self) -> f64 {
        SAMPLE_PERIOD_US
    }

    /// Global index one past the last sample.
    pub fn end_offset(&self) -> u64 {
        self.source_offset + self.samples.len() as u64
    }
}

/// Convert a whole byte buffer in one shot. A trailing odd byte is ignored.
pub fn convert_bytes(bytes: &[u8], format: IqSampleFormat) -> Vec<u8> {
    let lut = format.lut();
    bytes
        .chunks_exact(2)
        .map(|p| lut[(usize::from(p[0]) << 8) | usize::from(p[1])])
        .collect()
}

/// Chunked reader turning an IQ byte source into [`MagnitudeStream`] chunks.
///
/// Every chunk except the last holds exactly `chunk_size` samples.
pub struct IqReader<R> {
    inner: R,
    format: IqSampleFormat,
    buf: Vec<u8>,
    next_offset: u64,
    odd_bytes: u64,
    done: bool,
}

impl<R: Read> IqReader<R> {
    pub fn new(inner: R, format: IqSampleFormat, chunk_size: usize) -> Result<Self> {
        if chunk_size == 0 {
            return Err(Error::ZeroChunkSize);
        }
        Ok(Self {
            inner,
            format,
            buf: vec![0; chunk_size * 2],
            next_offset: 0,
            odd_bytes: 0,
            done: false,
        })
    }

    /// Trailing bytes dropped because they did not complete an IQ pair.
    pub fn discarded_bytes(&self) -> u64 {
        self.odd_bytes
    }

    /// Samples produced so far.
    pub fn samples_read(&self) -> u64 {
        self.next_offset
    }

    fn fill(&mut self) -> std::io::Result<usize> {
        let mut filled = 0;
        while filled < self.buf.len() {
            match self.inner.read(&mut self.buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(filled)
    }
}

impl<R: Read> Iterator for IqReader<R> {
    type Item = Result<MagnitudeStream>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let filled = match self.fill() {
            Ok(n) => n,
            Err(e) => {
                self.done = true;
                return Some(Err(Error::Io(e)));
            }
        };
        if filled < self.buf.len() {
            self.done = true;
            self.odd_bytes += (filled % 2) as u64;
        }
        let samples = convert_bytes(&self.buf[..filled], self.format);
        if samples.is_empty() {
            return None;
        }
        let chunk = MagnitudeStream::new(samples, self.next_offset);
        self.next_offset = chunk.end_offset();
        Some(Ok(chunk))
    }
}

/// Read an IQ source as a sequence of magnitude chunks.
pub fn read_iq_stream<R: Read>(
    source: R,
    format: IqSampleFormat,
    chunk_size: usize,
) -> Result<IqReader<R>> {
    IqReader::new(source, format, chunk_size)
}

/// Refuse anything other than the 2.5 MSPS design rate.
pub fn check_sample_rate(rate_hz: u64) -> Result<()> {
    if rate_hz == SAMPLE_RATE_HZ {
        Ok(())
    } else {
        Err(Error::UnsupportedSampleRate(rate_hz))
    }
}
