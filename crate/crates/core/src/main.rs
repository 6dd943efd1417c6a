use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use uplink_core::detector::{recommend_thresholds, DetectionEvent, DetectorConfig, Scanner};
use uplink_core::iq::{check_sample_rate, read_iq_stream, IqSampleFormat, SAMPLE_RATE_HZ};
use uplink_core::report::{ReportFormat, Reporter};
use uplink_core::sigen::{generate_iq, write_reference_set, GenSpec};
use uplink_core::stats::{run_confusion_experiment, ConfusionPlan};
use uplink_core::templates::InterrogationType;

#[derive(Parser)]
#[command(name = "uplink1030", version, about = "1030 MHz SSR interrogation decoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode an IQ recording (or stdin) and report detected interrogations.
    Decode(DecodeArgs),
    /// Decode, then print recommended fixed amplitude filters.
    Recommend(InputArgs),
    /// Write synthetic interrogation recordings.
    Generate(GenerateArgs),
    /// Run the synthetic confusion-matrix experiment.
    Confusion(ConfusionArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input file, or '-' for stdin.
    #[arg(long, default_value = "-")]
    ifile: String,
    /// Sample layout; defaults to the file extension, then cu8.
    #[arg(long)]
    format: Option<IqSampleFormat>,
    /// Must be 2500000; other rates are refused rather than resampled.
    #[arg(long, default_value_t = SAMPLE_RATE_HZ)]
    sample_rate: u64,
    /// Samples per read.
    #[arg(long, default_value_t = 262_144)]
    chunk_size: usize,
    #[command(flatten)]
    detector: DetectorArgs,
}

#[derive(Args)]
struct DetectorArgs {
    /// Far non-pulse / pulse ratio limit before P3.
    #[arg(long, default_value_t = 0.5)]
    rel_far: f64,
    /// Near non-pulse / pulse ratio limit before P3.
    #[arg(long, default_value_t = 0.5)]
    rel_near: f64,
    /// Far non-pulse / P4 ratio limit.
    #[arg(long, default_value_t = 0.5)]
    rel_far_p4: f64,
    /// Near non-pulse / P4 ratio limit.
    #[arg(long, default_value_t = 0.5)]
    rel_near_p4: f64,
    /// Absolute margin for far non-pulse samples before P3.
    #[arg(long, default_value_t = 10.0)]
    abs_far: f64,
    /// Absolute margin for near non-pulse samples before P3.
    #[arg(long, default_value_t = 10.0)]
    abs_near: f64,
    /// Reject messages with any pulse sample below this.
    #[arg(long)]
    fixed_min_pulse: Option<u8>,
    /// Reject messages with any far non-pulse sample above this.
    #[arg(long)]
    fixed_max_far: Option<u8>,
    /// Reject messages with any near non-pulse sample above this.
    #[arg(long)]
    fixed_max_near: Option<u8>,
}

impl DetectorArgs {
    fn config(&self) -> DetectorConfig {
        DetectorConfig {
            rel_far_pre: self.rel_far,
            rel_near_pre: self.rel_near,
            rel_far_post: self.rel_far_p4,
            rel_near_post: self.rel_near_p4,
            abs_far_pre: self.abs_far,
            abs_near_pre: self.abs_near,
            fixed_min_pulse: self.fixed_min_pulse,
            fixed_max_far: self.fixed_max_far,
            fixed_max_near: self.fixed_max_near,
        }
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Print a count table every this many seconds of stream time.
    #[arg(long)]
    stats_interval: Option<f64>,
    /// Emit json-lines instead of text.
    #[arg(long)]
    json: bool,
    /// List every detection in text mode.
    #[arg(long)]
    events: bool,
    /// Print recommended fixed filters after the run.
    #[arg(long)]
    recommend: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Write the seven canonical reference recordings and a manifest here.
    #[arg(long, conflicts_with_all = ["kind", "out"])]
    reference_set: Option<PathBuf>,
    #[arg(long = "type", required_unless_present = "reference_set")]
    kind: Option<InterrogationType>,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u8).range(1..))]
    amp: u8,
    /// Sampling phase in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    /// SNR in dB, or 'none'.
    #[arg(long, default_value = "none")]
    snr: Snr,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    lead_in: usize,
    #[arg(long, default_value_t = 100)]
    lead_out: usize,
    #[arg(long, required_unless_present = "reference_set")]
    out: Option<PathBuf>,
    /// Output layout; defaults to the file extension, then cu8.
    #[arg(long)]
    format: Option<IqSampleFormat>,
}

#[derive(Args)]
struct ConfusionArgs {
    /// Messages injected per type.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 200)]
    amp: u8,
    /// SNR in dB, or 'none'.
    #[arg(long, default_value = "none")]
    snr: Snr,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated sampling phases cycled over messages.
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.5,0.7")]
    offsets: Vec<f64>,
    #[command(flatten)]
    detector: DetectorArgs,
}

/// SNR in dB; `none` means noiseless.
#[derive(Debug, Clone, Copy)]
struct Snr(Option<f64>);

impl std::str::FromStr for Snr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("none") {
            return Ok(Snr(None));
        }
        s.parse::<f64>()
            .map(|v| Snr(Some(v)))
            .map_err(|e| format!("invalid SNR '{s}': {e}"))
    }
}

fn resolve_format(explicit: Option<IqSampleFormat>, path: &Path) -> IqSampleFormat {
    explicit
        .or_else(|| IqSampleFormat::from_extension(path))
        .unwrap_or(IqSampleFormat::Cu8)
}

fn open_input(ifile: &str) -> anyhow::Result<Box<dyn Read>> {
    if ifile == "-" {
        Ok(Box::new(io::stdin().lock()))
    } else {
        let f = File::open(ifile).with_context(|| format!("opening {ifile}"))?;
        Ok(Box::new(BufReader::new(f)))
    }
}

enum Tick<'a> {
    Event(&'a DetectionEvent),
    /// Samples consumed so far.
    Progress(u64),
}

/// Stream the input through a scanner, handing every event and progress
/// mark to `sink`. Returns total samples and discarded trailing bytes.
fn decode_stream(
    input: &InputArgs,
    mut sink: impl FnMut(Tick<'_>) -> io::Result<()>,
) -> anyhow::Result<(u64, u64)> {
    check_sample_rate(input.sample_rate)?;
    let format = resolve_format(input.format, Path::new(&input.ifile));
    let mut scanner = Scanner::new(input.detector.config())?;
    let mut reader = read_iq_stream(open_input(&input.ifile)?, format, input.chunk_size)?;
    let mut events = Vec::new();
    for chunk in reader.by_ref() {
        let chunk = chunk.with_context(|| format!("reading {}", input.ifile))?;
        events.clear();
        scanner.push_samples(&chunk.samples, &mut events);
        for ev in &events {
            sink(Tick::Event(ev))?;
        }
        sink(Tick::Progress(scanner.position().min(chunk.end_offset())))?;
    }
    let total = reader.samples_read();
    events.clear();
    scanner.finish(&mut events);
    for ev in &events {
        sink(Tick::Event(ev))?;
    }
    sink(Tick::Progress(total))?;
    Ok((total, reader.discarded_bytes()))
}

fn print_recommendation(events: &[DetectionEvent], out: &mut impl Write) -> io::Result<()> {
    match recommend_thresholds(events) {
        Some(r) => writeln!(
            out,
            "recommended: --fixed-min-pulse {} --fixed-max-far {} --fixed-max-near {}",
            r.fixed_min_pulse, r.fixed_max_far, r.fixed_max_near
        ),
        None => writeln!(out, "recommended: no data"),
    }
}

fn decode(args: DecodeArgs) -> anyhow::Result<()> {
    let stdout = io::stdout().lock();
    let format = if args.json {
        ReportFormat::JsonLines
    } else {
        ReportFormat::Text
    };
    let mut reporter =
        Reporter::new(BufWriter::new(stdout), format, args.stats_interval).with_text_events(args.events);
    let mut kept = Vec::new();
    let keep = args.recommend;
    let (_, odd) = decode_stream(&args.input, |tick| match tick {
        Tick::Event(ev) => {
            if keep {
                kept.push(ev.clone());
            }
            reporter.on_event(ev)
        }
        Tick::Progress(n) => reporter.advance(n),
    })?;
    reporter.finish()?;
    if odd > 0 {
        eprintln!("warning: discarded {odd} trailing byte(s)");
    }
    if args.recommend {
        print_recommendation(&kept, &mut io::stdout().lock())?;
    }
    Ok(())
}

fn recommend(args: InputArgs) -> anyhow::Result<()> {
    let mut events = Vec::new();
    decode_stream(&args, |tick| {
        if let Tick::Event(ev) = tick {
            events.push(ev.clone());
        }
        Ok(())
    })?;
    print_recommendation(&events, &mut io::stdout().lock())?;
    Ok(())
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    if let Some(dir) = args.reference_set {
        let entries = write_reference_set(&dir)?;
        for e in entries {
            println!("{}", e.to_line());
        }
        return Ok(());
    }
    let (Some(kind), Some(out)) = (args.kind, args.out) else {
        bail!("--type and --out are required unless --reference-set is given");
    };
    let spec = GenSpec::new(kind, args.amp)
        .with_offset(args.offset)
        .with_snr(args.snr.0)
        .with_leads(args.lead_in, args.lead_out)
        .with_seed(args.seed);
    let format = resolve_format(args.format, &out);
    let bytes = generate_iq(&spec, format)?;
    std::fs::write(&out, bytes).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn confusion(args: ConfusionArgs) -> anyhow::Result<()> {
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let plan = ConfusionPlan::new(args.count, args.amp, args.snr.0, args.seed).with_offsets(args.offsets);
    let matrix = run_confusion_experiment(&plan, &args.detector.config())?;
    print!("{}", matrix.render());
    println!("error rate: {:.4}%", 100.0 * matrix.error_rate());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decode(a) => decode(a),
        Command::Recommend(a) => recommend(a),
        Command::Generate(a) => generate(a),
        Command::Confusion(a) => confusion(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
