//! Per-type counters and the confusion-matrix harness.

use std::fmt::Write as _;

use serde::Serialize;

use crate::detector::{DetectionEvent, DetectorConfig, Scanner};
use crate::error::Result;
use crate::iq::SAMPLE_RATE_HZ;
use crate::sigen::{generate_magnitude, GenSpec};
use crate::templates::{body_len_for, InterrogationType};

const N: usize = InterrogationType::ALL.len();

/// Running statistics for one stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TypeCounters {
    pub counts: [u64; N],
    pub total_samples: u64,
}

impl TypeCounters {
    pub fn accumulate(&mut self, event: &DetectionEvent) {
        self.counts[event.kind.index()] += 1;
    }

    pub fn count(&self, kind: InterrogationType) -> u64 {
        self.counts[kind.index()]
    }

    pub fn total_events(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Seconds of signal covered by `total_samples`.
    pub fn stream_time_s(&self) -> f64 {
        self.total_samples as f64 / SAMPLE_RATE_HZ as f64
    }

    /// Detections per second of stream time.
    pub fn rate(&self) -> f64 {
        let t = self.stream_time_s();
        if t > 0.0 {
            self.total_events() as f64 / t
        } else {
            0.0
        }
    }
}

/// Sent type x detected type, plus misses, duplicates and unattributed detections.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N]; N],
    /// Injected messages with no detection in their window.
    pub missed: [u64; N],
    /// Additional detections inside an already classified message window.
    pub extra: [u64; N],
    /// Detections outside every message window, by detected type.
    pub noise: [u64; N],
}

impl ConfusionMatrix {
    pub fn get(&self, sent: InterrogationType, detected: InterrogationType) -> u64 {
        self.counts[sent.index()][detected.index()]
    }

    pub fn injected(&self, sent: InterrogationType) -> u64 {
        self.counts[sent.index()].iter().sum::<u64>() + self.missed[sent.index()]
    }

    pub fn total_injected(&self) -> u64 {
        InterrogationType::ALL.iter().map(|&t| self.injected(t)).sum()
    }

    /// Fraction of `sent` messages classified as `detected`.
    pub fn rate(&self, sent: InterrogationType, detected: InterrogationType) -> f64 {
        let n = self.injected(sent);
        if n == 0 {
            0.0
        } else {
            self.get(sent, detected) as f64 / n as f64
        }
    }

    /// Wrongly classified messages of one sent type.
    pub fn misclassified(&self, sent: InterrogationType) -> u64 {
        let row = &self.counts[sent.index()];
        row.iter().sum::<u64>() - row[sent.index()]
    }

    pub fn misclassification_rate(&self, sent: InterrogationType) -> f64 {
        let n = self.injected(sent);
        if n == 0 {
            0.0
        } else {
            self.misclassified(sent) as f64 / n as f64
        }
    }

    /// Wrongly classified messages over all injected messages.
    pub fn error_rate(&self) -> f64 {
        let n = self.total_injected();
        if n == 0 {
            return 0.0;
        }
        let wrong: u64 = InterrogationType::ALL.iter().map(|&t| self.misclassified(t)).sum();
        wrong as f64 / n as f64
    }

    pub fn is_diagonal(&self) -> bool {
        InterrogationType::ALL.iter().all(|&t| self.misclassified(t) == 0)
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..N {
            for j in 0..N {
                self.counts[i][j] += other.counts[i][j];
            }
            self.missed[i] += other.missed[i];
            self.extra[i] += other.extra[i];
            self.noise[i] += other.noise[i];
        }
    }

    /// Fixed-width table followed by per-row false detection ratios.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<26}", "sent \\ detected");
        for t in InterrogationType::ALL {
            let _ = write!(out, "{:>8}", t.short_label());
        }
        let _ = writeln!(out, "{:>8}{:>8}", "missed", "extra");
        for sent in InterrogationType::ALL {
            let _ = write!(out, "{:<26}", sent.label());
            for n in self.counts[sent.index()] {
                let _ = write!(out, "{n:>8}");
            }
            let _ = writeln!(
                out,
                "{:>8}{:>8}",
                self.missed[sent.index()],
                self.extra[sent.index()]
            );
        }
        let _ = write!(out, "{:<26}", "noise");
        for n in self.noise {
            let _ = write!(out, "{n:>8}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out);
        let _ = writeln!(out, "false detection ratio");
        for sent in InterrogationType::ALL {
            let wrong: Vec<String> = InterrogationType::ALL
                .iter()
                .filter(|&&d| d != sent && self.get(sent, d) > 0)
                .map(|&d| format!("{} {:.2}%", d.label(), 100.0 * self.rate(sent, d)))
                .collect();
            let text = if wrong.is_empty() {
                "none".to_string()
            } else {
                wrong.join(", ")
            };
            let _ = writeln!(out, "{}: {}", sent.label(), text);
        }
        out
    }
}

/// Parameters of one confusion experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionPlan {
    /// Messages injected per type.
    pub count: usize,
    pub amplitude: u8,
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Sampling phases, cycled over successive messages.
    pub offsets: Vec<f64>,
    /// Silence between messages, in samples (at least 100).
    pub gap: usize,
}

impl ConfusionPlan {
    pub const MIN_GAP: usize = 100;

    pub fn new(count: usize, amplitude: u8, snr_db: Option<f64>, seed: u64) -> Self {
        Self {
            count,
            amplitude,
            snr_db,
            seed,
            offsets: vec![0.0, 0.2, 0.5, 0.7],
            gap: Self::MIN_GAP,
        }
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Self {
        self.offsets = offsets;
        self
    }
}

fn message_seed(seed: u64, kind: InterrogationType, m: usize) -> u64 {
    seed ^ ((kind.index() as u64) << 56) ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Generated test stream of one sent type with the start index of every message.
pub fn build_stream(plan: &ConfusionPlan, kind: InterrogationType) -> Result<(Vec<u8>, Vec<u64>)> {
    let gap = plan.gap.max(ConfusionPlan::MIN_GAP);
    let offsets = if plan.offsets.is_empty() {
        &[0.0][..]
    } else {
        &plan.offsets[..]
    };
    let mut stream = Vec::with_capacity(plan.count * (gap + body_len_for(kind)) + gap);
    let mut starts = Vec::with_capacity(plan.count);
    for m in 0..plan.count {
        let last = m + 1 == plan.count;
        let spec = GenSpec::new(kind, plan.amplitude)
            .with_offset(offsets[m % offsets.len()])
            .with_snr(plan.snr_db)
            .with_leads(gap, if last { gap } else { 0 })
            .with_seed(message_seed(plan.seed, kind, m));
        starts.push((stream.len() + gap) as u64);
        stream.extend_from_slice(&generate_magnitude(&spec)?.samples);
    }
    Ok((stream, starts))
}

/// Detections may start this many samples before an injected message and
/// still belong to it (edge spill at the leading sample).
const LEAD_SLACK: u64 = 2;

/// Assign each detection to the injected message whose span contains it.
///
/// The span runs from `LEAD_SLACK` samples before the start to the end of
/// the body. The first detection in a span is the classification; later
/// ones are extras. Detections outside every span go to the noise row.
pub fn attribute(
    sent: InterrogationType,
    starts: &[u64],
    events: &[DetectionEvent],
    matrix: &mut ConfusionMatrix,
) {
    let span = body_len_for(sent) as u64;
    let mut first: Vec<Option<InterrogationType>> = vec![None; starts.len()];
    for ev in events {
        let d = ev.start_sample;
        // Last message starting at or before d + slack.
        let owner = starts
            .partition_point(|&s| s <= d + LEAD_SLACK)
            .checked_sub(1)
            .filter(|&j| d < starts[j] + span);
        match owner {
            Some(j) if first[j].is_none() => first[j] = Some(ev.kind),
            Some(_) => matrix.extra[sent.index()] += 1,
            None => matrix.noise[ev.kind.index()] += 1,
        }
    }
    for got in first {
        match got {
            Some(d) => matrix.counts[sent.index()][d.index()] += 1,
            None => matrix.missed[sent.index()] += 1,
        }
    }
}

fn run_row(
    plan: &ConfusionPlan,
    config: &DetectorConfig,
    kind: InterrogationType,
) -> Result<ConfusionMatrix> {
    let (stream, starts) = build_stream(plan, kind)?;
    let mut scanner = Scanner::new(config.clone())?;
    let mut events = Vec::new();
    scanner.push_samples(&stream, &mut events);
    scanner.finish(&mut events);
    let mut m = ConfusionMatrix::default();
    attribute(kind, &starts, &events, &mut m);
    Ok(m)
}

/// Inject `plan.count` messages of every type, scan, and tabulate.
///
/// Rows are generated and scanned on separate threads; the result depends
/// only on the plan and the detector configuration.
pub fn run_confusion_experiment(
    plan: &ConfusionPlan,
    config: &DetectorConfig,
) -> Result<ConfusionMatrix> {
    config.validate()?;
    let rows: Vec<Result<ConfusionMatrix>> = std::thread::scope(|s| {
        let handles: Vec<_> = InterrogationType::ALL
            .iter()
            .map(|&kind| s.spawn(move || run_row(plan, config, kind)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("confusion worker panicked"))
            .collect()
    });
    let mut total = ConfusionMatrix::default();
    for row in rows {
        total.merge(&row?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use InterrogationType::*;

    fn event(kind: InterrogationType, start: u64) -> DetectionEvent {
        DetectionEvent {
            kind,
            start_sample: start,
            mean_pulse_amp: 100.0,
            mean_far_amp: 0.0,
            mean_near_amp: 0.0,
            alignment_variant: 0,
        }
    }

    #[test]
    fn accumulate_counts() {
        let mut c = TypeCounters::default();
        c.accumulate(&event(ModeS, 0));
        assert_eq!(c.count(ModeS), 1);
        let kinds = [ModeA, ModeC, ModeA, ModeS, ModeCAllCall, ModeA];
        for (i, &k) in kinds.iter().enumerate() {
            c.accumulate(&event(k, i as u64));
        }
        assert_eq!(c.total_events(), 7);
        assert_eq!(c.count(ModeA), 3);
        assert_eq!(c.count(ModeS), 2);
        assert_eq!(c.count(ModeCAllCall), 1);
    }

    #[test]
    fn attribution_rules() {
        let starts = [100, 300, 500];
        let events = [
            event(ModeAAllCall, 100),
            event(ModeS, 120),
            event(ModeS, 320),
            event(ModeA, 420),
            // Before the third message: noise, not a claim on it.
            event(ModeS, 480),
            event(ModeAAllCall, 499),
        ];
        let mut m = ConfusionMatrix::default();
        attribute(ModeAAllCall, &starts, &events, &mut m);
        assert_eq!(m.get(ModeAAllCall, ModeAAllCall), 2);
        assert_eq!(m.get(ModeAAllCall, ModeS), 1);
        assert_eq!(m.extra[ModeAAllCall.index()], 1);
        assert_eq!(m.missed[ModeAAllCall.index()], 0);
        assert_eq!(m.noise[ModeA.index()], 1);
        assert_eq!(m.noise[ModeS.index()], 1);
        assert_eq!(m.injected(ModeAAllCall), 3);
    }

    #[test]
    fn noiseless_experiment_is_diagonal() {
        let plan = ConfusionPlan::new(20, 150, None, 5);
        let m = run_confusion_experiment(&plan, &DetectorConfig::default()).unwrap();
        for t in InterrogationType::ALL {
            assert_eq!(m.get(t, t), 20, "{t}");
            assert_eq!(m.injected(t), 20);
        }
        assert!(m.is_diagonal());
        assert_eq!(m.missed, [0; N]);
        assert_eq!(m.extra, [0; N]);
        assert_eq!(m.noise, [0; N]);
    }

    #[test]
    fn zero_amplitude_misses_everything() {
        let plan = ConfusionPlan::new(5, 0, None, 1);
        let m = run_confusion_experiment(&plan, &DetectorConfig::default()).unwrap();
        assert_eq!(m.counts, [[0; N]; N]);
        assert_eq!(m.missed, [5; N]);
    }

    #[test]
    fn experiments_are_reproducible() {
        let plan = ConfusionPlan::new(30, 120, Some(9.0), 77);
        let cfg = DetectorConfig::default();
        assert_eq!(
            run_confusion_experiment(&plan, &cfg).unwrap(),
            run_confusion_experiment(&plan, &cfg).unwrap()
        );
    }
}
