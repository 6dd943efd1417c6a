//! The scan loop: slide over the magnitude stream and classify interrogations.
//!
//! At every position the checks run in a fixed order: P1, then the Mode S
//! preamble, then Mode A, then Mode C. A Mode A/C match continues into the
//! P4 checks (short first, then long). A failed position advances the scan by
//! one sample; a classified message advances it by the type's skip count.
//!
//! Every check compares the weakest expected pulse sample against the
//! strongest expected non-pulse sample of each group. Non-pulse samples are
//! split into four groups: far from / next to a pulse, before / after P3.
//! The groups before P3 use absolute and relative comparisons. The groups
//! after P3 (the P4 checks) use only relative comparisons.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::iq::MagnitudeStream;
use crate::templates::{
    mode_s_guard_index, rasterize, skip_count_for, template_for, Alignment, Family,
    InterrogationType, P4Width, PulseRole,
};

/// Comparison parameters.
///
/// The defaults are tuning starting points: relative ratios of 0.5 and
/// absolute margins of 10 counts on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorConfig {
    /// Far non-pulse / pulse ratio limit before P3.
    pub rel_far_pre: f64,
    /// Near non-pulse / pulse ratio limit before P3.
    pub rel_near_pre: f64,
    /// Far non-pulse / P4 ratio limit after P3.
    pub rel_far_post: f64,
    /// Near non-pulse / P4 ratio limit after P3.
    pub rel_near_post: f64,
    /// Margin added to far non-pulse samples before P3.
    pub abs_far_pre: f64,
    /// Margin added to near non-pulse samples before P3.
    pub abs_near_pre: f64,
    pub fixed_min_pulse: Option<u8>,
    pub fixed_max_far: Option<u8>,
    pub fixed_max_near: Option<u8>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            rel_far_pre: 0.5,
            rel_near_pre: 0.5,
            rel_far_post: 0.5,
            rel_near_post: 0.5,
            abs_far_pre: 10.0,
            abs_near_pre: 10.0,
            fixed_min_pulse: None,
            fixed_max_far: None,
            fixed_max_near: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let ratios = [
            ("rel_far_pre", self.rel_far_pre),
            ("rel_near_pre", self.rel_near_pre),
            ("rel_far_post", self.rel_far_post),
            ("rel_near_post", self.rel_near_post),
        ];
        for (name, r) in ratios {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} = {r} is not in (0, 1]")));
            }
        }
        for (name, a) in [("abs_far_pre", self.abs_far_pre), ("abs_near_pre", self.abs_near_pre)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} = {a} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Turn all absolute comparisons and fixed filters off.
    pub fn relative_only(mut self) -> Self {
        self.abs_far_pre = 0.0;
        self.abs_near_pre = 0.0;
        self.fixed_min_pulse = None;
        self.fixed_max_far = None;
        self.fixed_max_near = None;
        self
    }
}

/// `non_pulse + param < pulse`.
pub fn abs_compare(non_pulse: f64, pulse: f64, param: f64) -> bool {
    non_pulse + param < pulse
}

/// `non_pulse / pulse < ratio`; a zero pulse always fails.
pub fn rel_compare(non_pulse: f64, pulse: f64, ratio: f64) -> bool {
    pulse > 0.0 && non_pulse / pulse < ratio
}

/// One classified interrogation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionEvent {
    #[serde(rename = "type")]
    pub kind: InterrogationType,
    pub start_sample: u64,
    pub mean_pulse_amp: f64,
    pub mean_far_amp: f64,
    pub mean_near_amp: f64,
    /// Which rasterization matched (always 0 outside the Mode C family).
    pub alignment_variant: u8,
}

#[derive(Debug, Clone, Copy)]
struct Cmp {
    abs: Option<f64>,
    rel: f64,
}

/// Index sets for one comparison group.
#[derive(Debug, Clone, Default)]
struct Group {
    pulse: Vec<usize>,
    far: Vec<usize>,
    near: Vec<usize>,
}

impl Group {
    fn max_index(&self) -> usize {
        self.pulse
            .iter()
            .chain(&self.far)
            .chain(&self.near)
            .copied()
            .max()
            .unwrap_or(0)
    }

    fn from_alignment(a: &Alignment, keep: impl Fn(usize) -> bool) -> Self {
        let pick = |v: &[usize]| v.iter().copied().filter(|&k| keep(k)).collect();
        Group {
            pulse: pick(&a.pulse),
            far: pick(&a.far),
            near: pick(&a.near),
        }
    }
}

#[inline]
fn at(w: &[u8], k: usize) -> f64 {
    f64::from(w.get(k).copied().unwrap_or(0))
}

fn extreme(w: &[u8], idx: &[usize], init: f64, pick: fn(f64, f64) -> f64) -> f64 {
    idx.iter().fold(init, |acc, &k| pick(acc, at(w, k)))
}

fn mean(w: &[u8], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().map(|&k| at(w, k)).sum::<f64>() / idx.len() as f64
}

#[derive(Debug, Clone)]
struct FamilyGeometry {
    /// P1 + P3 and the break between them, one per alignment.
    main: Vec<Group>,
    short_p4: Vec<Group>,
    long_p4: Vec<Group>,
}

#[derive(Debug, Clone)]
struct Geometry {
    p1: Group,
    mode_s: Group,
    mode_a: FamilyGeometry,
    mode_c: FamilyGeometry,
    /// Statistic sets per type and alignment.
    stats: Vec<Vec<Group>>,
    window: usize,
}

fn family_geometry(family: Family) -> FamilyGeometry {
    let of = |kind| rasterize(&template_for(kind), 0.0);
    let (std, short, long) = match family {
        Family::ModeA => (
            InterrogationType::ModeA,
            InterrogationType::ModeAAllCall,
            InterrogationType::ModeAAllCallCompat,
        ),
        _ => (
            InterrogationType::ModeC,
            InterrogationType::ModeCAllCall,
            InterrogationType::ModeCAllCallCompat,
        ),
    };
    let std = of(std);
    let main = std
        .variants
        .iter()
        .map(|a| {
            let p3 = a.pulse_of(PulseRole::P3).expect("P3").first;
            let last = a.last_pulse_index();
            Group::from_alignment(a, |k| k < p3 || (k <= last && a.pulse.contains(&k)))
        })
        .collect();
    let post = |kind: InterrogationType| -> Vec<Group> {
        of(kind)
            .variants
            .iter()
            .map(|a| {
                let p3_last = a.pulse_of(PulseRole::P3).expect("P3").last();
                Group::from_alignment(a, |k| k > p3_last)
            })
            .collect()
    };
    FamilyGeometry {
        main,
        short_p4: post(short),
        long_p4: post(long),
    }
}

impl Geometry {
    fn build() -> Self {
        let guard = mode_s_guard_index();
        let mode_s_raster = rasterize(&template_for(InterrogationType::ModeS), 0.0);
        let mode_s = Group::from_alignment(mode_s_raster.primary(), |k| k < guard);
        let p1 = Group {
            pulse: vec![0, 1],
            far: vec![3, 4],
            near: vec![],
        };
        let stats = InterrogationType::ALL
            .iter()
            .map(|&kind| {
                if kind == InterrogationType::ModeS {
                    vec![mode_s.clone()]
                } else {
                    rasterize(&template_for(kind), 0.0)
                        .variants
                        .iter()
                        .map(|a| Group::from_alignment(a, |_| true))
                        .collect()
                }
            })
            .collect::<Vec<_>>();
        let window = stats
            .iter()
            .flatten()
            .map(Group::max_index)
            .max()
            .unwrap_or(0)
            + 1;
        Geometry {
            p1,
            mode_s,
            mode_a: family_geometry(Family::ModeA),
            mode_c: family_geometry(Family::ModeC),
            stats,
            window,
        }
    }
}

/// Stateless checks over a window that starts at a candidate P1.
///
/// Windows shorter than [`Classifier::window_len`] are read as zero-padded.
#[derive(Debug, Clone)]
pub struct Classifier {
    config: DetectorConfig,
    geometry: Geometry,
}

impl Classifier {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            geometry: Geometry::build(),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Samples a classification decision may look at.
    pub fn window_len(&self) -> usize {
        self.geometry.window
    }

    fn far_pre(&self) -> Cmp {
        Cmp {
            abs: Some(self.config.abs_far_pre),
            rel: self.config.rel_far_pre,
        }
    }

    fn near_pre(&self) -> Cmp {
        Cmp {
            abs: Some(self.config.abs_near_pre),
            rel: self.config.rel_near_pre,
        }
    }

    fn far_post(&self) -> Cmp {
        Cmp {
            abs: None,
            rel: self.config.rel_far_post,
        }
    }

    fn near_post(&self) -> Cmp {
        Cmp {
            abs: None,
            rel: self.config.rel_near_post,
        }
    }

    fn group_passes(&self, w: &[u8], g: &Group, far: Cmp, near: Cmp) -> bool {
        let pulse = extreme(w, &g.pulse, f64::INFINITY, f64::min);
        let cfg = &self.config;
        if let Some(min) = cfg.fixed_min_pulse {
            if pulse < f64::from(min) {
                return false;
            }
        }
        for (idx, cmp, fixed) in [(&g.far, far, cfg.fixed_max_far), (&g.near, near, cfg.fixed_max_near)] {
            if idx.is_empty() {
                continue;
            }
            let np = extreme(w, idx, f64::NEG_INFINITY, f64::max);
            if let Some(abs) = cmp.abs {
                if !abs_compare(np, pulse, abs) {
                    return false;
                }
            }
            if !rel_compare(np, pulse, cmp.rel) {
                return false;
            }
            if let Some(max) = fixed {
                if np > f64::from(max) {
                    return false;
                }
            }
        }
        true
    }

    /// P1 against samples 3 and 4, which are non-pulse in every type.
    pub fn p1_check(&self, w: &[u8]) -> bool {
        self.group_passes(w, &self.geometry.p1, self.far_pre(), self.near_pre())
    }

    /// Mode S preamble: P1, P2 and the break before the data block.
    pub fn mode_s_check(&self, w: &[u8]) -> bool {
        self.group_passes(w, &self.geometry.mode_s, self.far_pre(), self.near_pre())
    }

    pub fn mode_a_check(&self, w: &[u8]) -> bool {
        self.group_passes(w, &self.geometry.mode_a.main[0], self.far_pre(), self.near_pre())
    }

    /// Returns the first alignment whose P3 matches.
    pub fn mode_c_check(&self, w: &[u8]) -> Option<u8> {
        self.geometry
            .mode_c
            .main
            .iter()
            .position(|g| self.group_passes(w, g, self.far_pre(), self.near_pre()))
            .map(|v| v as u8)
    }

    /// P4 after an accepted Mode A/C match; relative comparisons only.
    pub fn p4_check(&self, w: &[u8], family: Family, alignment: u8, width: P4Width) -> bool {
        let fam = match family {
            Family::ModeA => &self.geometry.mode_a,
            Family::ModeC => &self.geometry.mode_c,
            Family::ModeS => return false,
        };
        let groups = match width {
            P4Width::Short => &fam.short_p4,
            P4Width::Long => &fam.long_p4,
        };
        groups
            .get(alignment as usize)
            .is_some_and(|g| self.group_passes(w, g, self.far_post(), self.near_post()))
    }

    /// Run the full check order on a window starting at a candidate P1.
    pub fn classify(&self, w: &[u8]) -> Option<(InterrogationType, u8)> {
        if !self.p1_check(w) {
            return None;
        }
        if self.mode_s_check(w) {
            return Some((InterrogationType::ModeS, 0));
        }
        let (family, alignment) = if self.mode_a_check(w) {
            (Family::ModeA, 0)
        } else {
            (Family::ModeC, self.mode_c_check(w)?)
        };
        let p4 = [P4Width::Short, P4Width::Long]
            .into_iter()
            .find(|&width| self.p4_check(w, family, alignment, width));
        let kind = InterrogationType::from_parts(family, p4).expect("A/C family");
        Some((kind, alignment))
    }

    /// Classify and, on success, build the event for a window at `start_sample`.
    pub fn detect(&self, w: &[u8], start_sample: u64) -> Option<DetectionEvent> {
        let (kind, alignment_variant) = self.classify(w)?;
        let g = &self.geometry.stats[kind.index()][alignment_variant as usize];
        Some(DetectionEvent {
            kind,
            start_sample,
            mean_pulse_amp: mean(w, &g.pulse),
            mean_far_amp: mean(w, &g.far),
            mean_near_amp: mean(w, &g.near),
            alignment_variant,
        })
    }
}

/// Incremental scanner over one contiguous stream.
///
/// Samples may arrive in chunks of any size; a decision at a position is
/// deferred until the whole classification window is buffered, so the event
/// sequence does not depend on where the stream was split.
#[derive(Debug, Clone)]
pub struct Scanner {
    classifier: Classifier,
    buf: Vec<u8>,
    buf_start: u64,
    pos: u64,
}

impl Scanner {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        Ok(Self::with_classifier(Classifier::new(config)?))
    }

    pub fn with_classifier(classifier: Classifier) -> Self {
        Self {
            classifier,
            buf: Vec::new(),
            buf_start: 0,
            pos: 0,
        }
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    /// Next scan position (global sample index).
    pub fn position(&self) -> u64 {
        self.pos
    }

    fn buf_end(&self) -> u64 {
        self.buf_start + self.buf.len() as u64
    }

    fn run(&mut self, limit: u64, out: &mut Vec<DetectionEvent>) {
        let window = self.classifier.window_len();
        while self.pos < limit && self.pos + window as u64 <= self.buf_end() {
            let off = (self.pos - self.buf_start) as usize;
            let w = &self.buf[off..off + window];
            match self.classifier.detect(w, self.pos) {
                Some(event) => {
                    self.pos += skip_count_for(event.kind) as u64;
                    out.push(event);
                }
                None => self.pos += 1,
            }
        }
        let drop = ((self.pos - self.buf_start) as usize).min(self.buf.len());
        self.buf.drain(..drop);
        self.buf_start += drop as u64;
    }

    /// Feed the next samples of the stream, appending any decided events.
    pub fn push_samples(&mut self, samples: &[u8], out: &mut Vec<DetectionEvent>) {
        self.buf.extend_from_slice(samples);
        self.run(u64::MAX, out);
    }

    pub fn push(&mut self, chunk: &MagnitudeStream) -> Vec<DetectionEvent> {
        let mut out = Vec::new();
        self.push_samples(&chunk.samples, &mut out);
        out
    }

    /// Decide the remaining positions, reading past the end of the stream as zeros.
    pub fn finish(&mut self, out: &mut Vec<DetectionEvent>) {
        let end = self.buf_end();
        let window = self.classifier.window_len();
        self.buf.resize(self.buf.len() + window, 0);
        self.run(end, out);
        self.buf.clear();
        self.buf_start = end.max(self.pos);
        self.pos = self.buf_start;
    }
}

/// Scan a complete in-memory stream.
pub fn scan(samples: &[u8], config: &DetectorConfig) -> Result<Vec<DetectionEvent>> {
    let mut scanner = Scanner::new(config.clone())?;
    let mut out = Vec::new();
    scanner.push_samples(samples, &mut out);
    scanner.finish(&mut out);
    Ok(out)
}

/// Scan a sequence of chunks of one stream.
pub fn scan_chunks<'a, I>(chunks: I, config: &DetectorConfig) -> Result<Vec<DetectionEvent>>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut scanner = Scanner::new(config.clone())?;
    let mut out = Vec::new();
    for chunk in chunks {
        scanner.push_samples(chunk, &mut out);
    }
    scanner.finish(&mut out);
    Ok(out)
}

/// Suggested fixed-filter values: mean amplitudes over accepted messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub fixed_min_pulse: u8,
    pub fixed_max_far: u8,
    pub fixed_max_near: u8,
}

/// `None` when there are no events to average.
pub fn recommend_thresholds(events: &[DetectionEvent]) -> Option<Recommendation> {
    if events.is_empty() {
        return None;
    }
    let n = events.len() as f64;
    let avg = |f: fn(&DetectionEvent) -> f64| {
        (events.iter().map(f).sum::<f64>() / n).round().clamp(0.0, 255.0) as u8
    };
    Some(Recommendation {
        fixed_min_pulse: avg(|e| e.mean_pulse_amp),
        fixed_max_far: avg(|e| e.mean_far_amp),
        fixed_max_near: avg(|e| e.mean_near_amp),
    })
}
