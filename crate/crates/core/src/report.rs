//! Statistics-mode output: periodic per-type count tables and json-lines.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::json;

use crate::detector::DetectionEvent;
use crate::iq::SAMPLE_RATE_HZ;
use crate::stats::TypeCounters;
use crate::templates::InterrogationType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    JsonLines,
}

#[derive(Serialize)]
struct EventRecord<'a> {
    record: &'static str,
    stream_sample: u64,
    #[serde(flatten)]
    event: &'a DetectionEvent,
}

/// Render the per-type table for a counter snapshot.
pub fn render_counters(heading: &str, c: &TypeCounters) -> String {
    let mut out = format!(
        "[{heading}] stream time {:.3} s, {} samples\n",
        c.stream_time_s(),
        c.total_samples
    );
    for t in InterrogationType::ALL {
        out.push_str(&format!("  {:<28}{:>12}\n", format!("{}:", t.label()), c.count(t)));
    }
    out.push_str(&format!("  {:<28}{:>12}\n", "Total:", c.total_events()));
    out.push_str(&format!("  {:<28}{:>12.2}\n", "Rate (1/s):", c.rate()));
    out
}

fn counters_json(record: &str, c: &TypeCounters) -> serde_json::Value {
    let counts: serde_json::Map<String, serde_json::Value> = InterrogationType::ALL
        .iter()
        .map(|t| (t.name().to_string(), json!(c.count(*t))))
        .collect();
    json!({
        "record": record,
        "samples": c.total_samples,
        "stream_time_s": c.stream_time_s(),
        "counts": counts,
        "total": c.total_events(),
        "rate": c.rate(),
    })
}

/// Writes reports as a stream is decoded.
///
/// Interval summaries are triggered by stream time (samples consumed), not
/// wall-clock time, so output is reproducible for a given recording. The
/// reporter only reads events; it never alters them.
pub struct Reporter<W: Write> {
    out: W,
    format: ReportFormat,
    interval_samples: Option<u64>,
    next_boundary: u64,
    print_events: bool,
    counters: TypeCounters,
}

impl<W: Write> Reporter<W> {
    /// `interval_s` of `None` (or zero) disables periodic summaries.
    pub fn new(out: W, format: ReportFormat, interval_s: Option<f64>) -> Self {
        let interval_samples = interval_s
            .filter(|s| *s > 0.0)
            .map(|s| ((s * SAMPLE_RATE_HZ as f64).round() as u64).max(1));
        Self {
            out,
            format,
            interval_samples,
            next_boundary: interval_samples.unwrap_or(u64::MAX),
            print_events: format == ReportFormat::JsonLines,
            counters: TypeCounters::default(),
        }
    }

    /// Also list individual events in text mode.
    pub fn with_text_events(mut self, on: bool) -> Self {
        if self.format == ReportFormat::Text {
            self.print_events = on;
        }
        self
    }

    pub fn counters(&self) -> TypeCounters {
        self.counters
    }

    pub fn on_event(&mut self, ev: &DetectionEvent) -> io::Result<()> {
        self.counters.accumulate(ev);
        if !self.print_events {
            return Ok(());
        }
        match self.format {
            ReportFormat::JsonLines => {
                let rec = EventRecord {
                    record: "event",
                    stream_sample: ev.start_sample,
                    event: ev,
                };
                serde_json::to_writer(&mut self.out, &rec)?;
                writeln!(self.out)
            }
            ReportFormat::Text => writeln!(
                self.out,
                "{:>12} {:<26} pulse {:6.1} far {:6.1} near {:6.1}",
                ev.start_sample,
                ev.kind.label(),
                ev.mean_pulse_amp,
                ev.mean_far_amp,
                ev.mean_near_amp
            ),
        }
    }

    fn summary(&mut self, record: &str) -> io::Result<()> {
        match self.format {
            ReportFormat::Text => write!(self.out, "{}", render_counters(record, &self.counters)),
            ReportFormat::JsonLines => {
                serde_json::to_writer(&mut self.out, &counters_json(record, &self.counters))?;
                writeln!(self.out)
            }
        }
    }

    /// Record that the stream has been consumed up to `samples`.
    pub fn advance(&mut self, samples: u64) -> io::Result<()> {
        self.counters.total_samples = self.counters.total_samples.max(samples);
        while let Some(step) = self.interval_samples {
            if self.counters.total_samples < self.next_boundary {
                break;
            }
            let total = self.counters.total_samples;
            self.counters.total_samples = self.next_boundary;
            self.summary("interval")?;
            self.counters.total_samples = total;
            self.next_boundary += step;
        }
        Ok(())
    }

    /// Write the final summary and hand back the counters.
    pub fn finish(mut self) -> io::Result<TypeCounters> {
        self.summary("summary")?;
        self.out.flush()?;
        Ok(self.counters)
    }
}
