//! Pulse timing of the seven uplink interrogation types and their
//! rasterization onto the 0.4 us sample grid.
//!
//! Times are kept as integer nanoseconds so that every edge that matters
//! (P3 of Mode C at 52.5 samples, the data block at 8.75 samples) is exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::iq::SAMPLE_PERIOD_NS;

const SHORT_PULSE_NS: i64 = 800;
const LONG_PULSE_NS: i64 = 1600;
const MODE_A_P3_NS: i64 = 8_000;
const MODE_C_P3_NS: i64 = 21_000;
const P4_AFTER_P3_NS: i64 = 2_000;
const MODE_S_P2_NS: i64 = 2_000;
const DATA_BLOCK_START_NS: i64 = 3_500;
/// 56-bit uplink data block.
const SHORT_DATA_BLOCK_NS: i64 = 16_125;

/// Samples skipped after a Mode S preamble (19.6 us, the short message length).
pub const MODE_S_SKIP: usize = 49;

/// Allowed pulse widths, ns.
pub const PULSE_WIDTHS_NS: [i64; 2] = [SHORT_PULSE_NS, LONG_PULSE_NS];
/// Allowed pulse breaks, ns.
pub const PULSE_BREAKS_NS: [i64; 4] = [700, 1_200, 7_200, 20_200];

/// The seven uplink interrogation classes.
///
/// Declaration order is the reporting order used by counters and the
/// confusion matrix: each mode family, standard first, then the long-P4
/// (compatibility) all-call, then the short-P4 all-call.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum InterrogationType {
    ModeA,
    ModeAAllCallCompat,
    ModeAAllCall,
    ModeC,
    ModeCAllCallCompat,
    ModeCAllCall,
    ModeS,
}

/// Which P4 variant an all-call carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum P4Width {
    /// 0.8 us, non-compatible all-call.
    Short,
    /// 1.6 us, compatibility-mode all-call.
    Long,
}

impl P4Width {
    pub fn width_ns(self) -> i64 {
        match self {
            P4Width::Short => SHORT_PULSE_NS,
            P4Width::Long => LONG_PULSE_NS,
        }
    }
}

/// Mode A or Mode C interrogations share everything except the P1-P3 spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    ModeA,
    ModeC,
    ModeS,
}

impl InterrogationType {
    pub const ALL: [InterrogationType; 7] = [
        InterrogationType::ModeA,
        InterrogationType::ModeAAllCallCompat,
        InterrogationType::ModeAAllCall,
        InterrogationType::ModeC,
        InterrogationType::ModeCAllCallCompat,
        InterrogationType::ModeCAllCall,
        InterrogationType::ModeS,
    ];

    /// Position in [`InterrogationType::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn family(self) -> Family {
        use InterrogationType::*;
        match self {
            ModeA | ModeAAllCall | ModeAAllCallCompat => Family::ModeA,
            ModeC | ModeCAllCall | ModeCAllCallCompat => Family::ModeC,
            ModeS => Family::ModeS,
        }
    }

    pub fn p4(self) -> Option<P4Width> {
        use InterrogationType::*;
        match self {
            ModeAAllCall | ModeCAllCall => Some(P4Width::Short),
            ModeAAllCallCompat | ModeCAllCallCompat => Some(P4Width::Long),
            ModeA | ModeC | ModeS => None,
        }
    }

    /// The type with the given family and P4, if it exists.
    pub fn from_parts(family: Family, p4: Option<P4Width>) -> Option<Self> {
        use InterrogationType::*;
        Some(match (family, p4) {
            (Family::ModeA, None) => ModeA,
            (Family::ModeA, Some(P4Width::Short)) => ModeAAllCall,
            (Family::ModeA, Some(P4Width::Long)) => ModeAAllCallCompat,
            (Family::ModeC, None) => ModeC,
            (Family::ModeC, Some(P4Width::Short)) => ModeCAllCall,
            (Family::ModeC, Some(P4Width::Long)) => ModeCAllCallCompat,
            (Family::ModeS, None) => ModeS,
            (Family::ModeS, Some(_)) => return None,
        })
    }

    /// Command-line / manifest name.
    pub fn name(self) -> &'static str {
        use InterrogationType::*;
        match self {
            ModeA => "mode-a",
            ModeAAllCallCompat => "mode-a-all-call-compat",
            ModeAAllCall => "mode-a-all-call",
            ModeC => "mode-c",
            ModeCAllCallCompat => "mode-c-all-call-compat",
            ModeCAllCall => "mode-c-all-call",
            ModeS => "mode-s",
        }
    }

    /// Human-readable label.
    pub fn label(self) -> &'static str {
        use InterrogationType::*;
        match self {
            ModeA => "Mode A",
            ModeAAllCallCompat => "Mode A all-call (compat)",
            ModeAAllCall => "Mode A all-call",
            ModeC => "Mode C",
            ModeCAllCallCompat => "Mode C all-call (compat)",
            ModeCAllCall => "Mode C all-call",
            ModeS => "Mode S",
        }
    }

    /// Column heading used in matrix output.
    pub fn short_label(self) -> &'static str {
        use InterrogationType::*;
        match self {
            ModeA => "A",
            ModeAAllCallCompat => "A-ACL",
            ModeAAllCall => "A-AC",
            ModeC => "C",
            ModeCAllCallCompat => "C-ACL",
            ModeCAllCall => "C-AC",
            ModeS => "S",
        }
    }
}

impl fmt::Display for InterrogationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterrogationType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InterrogationType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = InterrogationType::ALL.iter().map(|t| t.name()).collect();
                format!("unknown interrogation type '{s}' (one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseRole {
    P1,
    P2,
    P3,
    P4,
}

/// One pulse, `[start_ns, start_ns + width_ns)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub role: PulseRole,
    pub start_ns: i64,
    pub width_ns: i64,
}

impl Pulse {
    pub fn end_ns(&self) -> i64 {
        self.start_ns + self.width_ns
    }

    pub fn start_us(&self) -> f64 {
        self.start_ns as f64 / 1000.0
    }

    pub fn width_us(&self) -> f64 {
        self.width_ns as f64 / 1000.0
    }
}

/// A modulated region whose content is not modeled (the Mode S data block).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpaqueRegion {
    pub start_ns: i64,
    pub width_ns: i64,
}

impl OpaqueRegion {
    pub fn end_ns(&self) -> i64 {
        self.start_ns + self.width_ns
    }
}

/// Canonical timing of one interrogation type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseTemplate {
    pub kind: InterrogationType,
    pub pulses: Vec<Pulse>,
    pub data_block: Option<OpaqueRegion>,
    pub total_span_ns: i64,
}

impl PulseTemplate {
    pub fn total_span_us(&self) -> f64 {
        self.total_span_ns as f64 / 1000.0
    }

    pub fn pulse(&self, role: PulseRole) -> Option<&Pulse> {
        self.pulses.iter().find(|p| p.role == role)
    }

    /// Breaks between consecutive pulses (and before the data block), ns.
    pub fn gaps_ns(&self) -> Vec<i64> {
        let mut gaps: Vec<i64> = self
            .pulses
            .windows(2)
            .map(|w| w[1].start_ns - w[0].end_ns())
            .collect();
        if let (Some(block), Some(last)) = (self.data_block, self.pulses.last()) {
            gaps.push(block.start_ns - last.end_ns());
        }
        gaps
    }
}

pub fn template_for(kind: InterrogationType) -> PulseTemplate {
    let p1 = Pulse {
        role: PulseRole::P1,
        start_ns: 0,
        width_ns: SHORT_PULSE_NS,
    };
    let mut pulses = vec![p1];
    let mut data_block = None;
    match kind.family() {
        Family::ModeS => {
            pulses.push(Pulse {
                role: PulseRole::P2,
                start_ns: MODE_S_P2_NS,
                width_ns: SHORT_PULSE_NS,
            });
            data_block = Some(OpaqueRegion {
                start_ns: DATA_BLOCK_START_NS,
                width_ns: SHORT_DATA_BLOCK_NS,
            });
        }
        family => {
            let p3_start = if family == Family::ModeA {
                MODE_A_P3_NS
            } else {
                MODE_C_P3_NS
            };
            pulses.push(Pulse {
                role: PulseRole::P3,
                start_ns: p3_start,
                width_ns: SHORT_PULSE_NS,
            });
            if let Some(p4) = kind.p4() {
                pulses.push(Pulse {
                    role: PulseRole::P4,
                    start_ns: p3_start + P4_AFTER_P3_NS,
                    width_ns: p4.width_ns(),
                });
            }
        }
    }
    let total_span_ns = match data_block {
        Some(block) => block.end_ns(),
        None => pulses.last().map(Pulse::end_ns).unwrap_or(0),
    };
    PulseTemplate {
        kind,
        pulses,
        data_block,
        total_span_ns,
    }
}

/// Samples the scan pointer advances after classifying a message of this type.
pub fn skip_count_for(kind: InterrogationType) -> usize {
    if kind == InterrogationType::ModeS {
        return MODE_S_SKIP;
    }
    let span = template_for(kind).total_span_ns;
    ((span + SAMPLE_PERIOD_NS - 1) / SAMPLE_PERIOD_NS) as usize
}

/// Number of samples needed to hold the whole template at any alignment.
pub fn body_len_for(kind: InterrogationType) -> usize {
    let span = template_for(kind).total_span_ns;
    ((span + SAMPLE_PERIOD_NS - 1) / SAMPLE_PERIOD_NS) as usize
}

/// First sample index whose instant may fall inside the Mode S data block
/// at some sampling phase.
pub fn mode_s_guard_index() -> usize {
    (DATA_BLOCK_START_NS / SAMPLE_PERIOD_NS) as usize
}

/// Sample offset of the instant `k`, in ns, for a phase in `[0, 400)`.
fn instant_ns(k: usize, phase_ns: f64) -> f64 {
    (k as i64 * SAMPLE_PERIOD_NS) as f64 + phase_ns
}

/// Smallest `k >= 0` whose sampling instant is at or after `t_ns`.
fn first_index_at_or_after(t_ns: i64, phase_ns: f64) -> usize {
    let mut k = ((t_ns / SAMPLE_PERIOD_NS) - 1).max(0) as usize;
    while instant_ns(k, phase_ns) < t_ns as f64 {
        k += 1;
    }
    k
}

/// Contiguous run of pulse samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterPulse {
    pub role: PulseRole,
    pub first: usize,
    pub len: usize,
}

impl RasterPulse {
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.len
    }

    pub fn last(&self) -> usize {
        self.first + self.len - 1
    }
}

/// A template sampled at one phase.
///
/// `pulse`, `near` and `far` partition `[0, span)`. Indices at or past
/// `opaque_from` belong to the unmodeled data block.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub fractional_offset: f64,
    pub pulses: Vec<RasterPulse>,
    pub pulse: Vec<usize>,
    pub near: Vec<usize>,
    pub far: Vec<usize>,
    pub span: usize,
    pub opaque_from: Option<usize>,
}

impl Alignment {
    fn sample(template: &PulseTemplate, fractional_offset: f64) -> Self {
        let phase = fractional_offset * SAMPLE_PERIOD_NS as f64;
        let pulses: Vec<RasterPulse> = template
            .pulses
            .iter()
            .map(|p| {
                let first = first_index_at_or_after(p.start_ns, phase);
                let end = first_index_at_or_after(p.end_ns(), phase);
                RasterPulse {
                    role: p.role,
                    first,
                    len: end - first,
                }
            })
            .collect();
        let opaque_from = template
            .data_block
            .map(|b| first_index_at_or_after(b.start_ns, phase));
        let span = match opaque_from {
            Some(o) => o,
            None => pulses.iter().map(RasterPulse::last).max().unwrap_or(0) + 2,
        };

        let mut is_pulse = vec![false; span];
        for p in &pulses {
            for k in p.indices() {
                is_pulse[k] = true;
            }
        }
        let energized = |k: usize| {
            is_pulse.get(k).copied().unwrap_or(false) || opaque_from.is_some_and(|o| k >= o)
        };
        let mut pulse = Vec::new();
        let mut near = Vec::new();
        let mut far = Vec::new();
        for (k, &on) in is_pulse.iter().enumerate() {
            if on {
                pulse.push(k);
            } else if (k > 0 && energized(k - 1)) || energized(k + 1) {
                near.push(k);
            } else {
                far.push(k);
            }
        }
        Alignment {
            fractional_offset,
            pulses,
            pulse,
            near,
            far,
            span,
            opaque_from,
        }
    }

    pub fn pulse_of(&self, role: PulseRole) -> Option<&RasterPulse> {
        self.pulses.iter().find(|p| p.role == role)
    }

    pub fn last_pulse_index(&self) -> usize {
        self.pulses.iter().map(RasterPulse::last).max().unwrap_or(0)
    }
}

/// A template rasterized at a given fractional offset.
///
/// Templates whose P3 does not start on a whole sample (the Mode C family)
/// carry a second alignment sampled half a period later, which places P3 and
/// P4 one sample earlier or later relative to P1.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterTemplate {
    pub kind: InterrogationType,
    pub skip_count: usize,
    pub variants: Vec<Alignment>,
}

impl RasterTemplate {
    /// The alignment actually sampled at the requested offset.
    pub fn primary(&self) -> &Alignment {
        &self.variants[0]
    }

    pub fn pulse_sample_indices(&self) -> &[usize] {
        &self.primary().pulse
    }

    pub fn near_pulse_indices(&self) -> &[usize] {
        &self.primary().near
    }

    pub fn far_indices(&self) -> &[usize] {
        &self.primary().far
    }
}

/// Sample `template` at instants `(k + fractional_offset) * 0.4 us`.
///
/// Sample `k` is a pulse sample iff its instant lies in `[start, end)` of a
/// pulse, so a 0.8 us pulse always covers two samples and a 1.6 us pulse four.
///
/// # Panics
///
/// If `fractional_offset` is outside `[0, 1)`.
pub fn rasterize(template: &PulseTemplate, fractional_offset: f64) -> RasterTemplate {
    assert!(
        (0.0..1.0).contains(&fractional_offset),
        "fractional offset {fractional_offset} outside [0, 1)"
    );
    let mut variants = vec![Alignment::sample(template, fractional_offset)];
    let straddles = template
        .pulses
        .iter()
        .any(|p| p.start_ns % SAMPLE_PERIOD_NS != 0);
    if straddles {
        let other = (fractional_offset + 0.5).fract();
        variants.push(Alignment::sample(template, other));
    }
    RasterTemplate {
        kind: template.kind,
        skip_count: skip_count_for(template.kind),
        variants,
    }
}

/// Markdown table of every template, as used in the README.
pub fn reference_table() -> String {
    let mut out = String::from(
        "| type | pulses (start us / width us) | span us | skip samples |\n|---|---|---|---|\n",
    );
    for kind in InterrogationType::ALL {
        let t = template_for(kind);
        let mut pulses: Vec<String> = t
            .pulses
            .iter()
            .map(|p| format!("{:?} {}/{}", p.role, p.start_us(), p.width_us()))
            .collect();
        if let Some(b) = t.data_block {
            pulses.push(format!(
                "P6 {}/{} (opaque)",
                b.start_ns as f64 / 1000.0,
                b.width_ns as f64 / 1000.0
            ));
        }
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            kind.name(),
            pulses.join(", "),
            t.total_span_us(),
            skip_count_for(kind)
        ));
    }
    out
}
