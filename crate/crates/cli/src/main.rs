use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::RecvTimeoutError;
use std::sync::Arc;
use std::time::Duration;
use tactile_core::eval::{
    accuracy_by_group, fingerprint_from_commands, identify, load_trials, micro_recall, precision_recall,
    table1_consistency, ConfusionMatrix, Fingerprint,
};
use tactile_core::live::LiveEngine;
use tactile_core::mapping::{
    map_bassline_note, map_chord_note, map_melody_note, map_percussion, render_timeline, Diagnostics,
    HapticEvent, MappingProfile, NoteSpan, Rendered,
};
use tactile_core::midi::{
    build_tempo_map, merge_tracks, note_name, parse_note_name, parse_smf, NoteNaming, StreamDecoder,
};
use tactile_core::profile::load_profile;
use tactile_core::timeline::{
    arbitrate, playback, shutoff, Clock, DeviceCommand, SystemClock, VirtualClock, DEFAULT_LATENESS_ALERT,
};
use tactile_core::transport::{
    read_log, read_midi_source, write_log, Backend, FrameBackend, LogBackend, MidiPassthrough, NullBackend,
    SourceEvent, SERIAL_BAUD,
};

/// Per-song precision and recall reported for the three-song study.
const TABLE1_TARGETS: [(f64, f64); 3] = [(0.94, 0.94), (0.91, 0.83), (0.92, 1.00)];

#[derive(Parser)]
#[command(name = "tactile", version, about = "Render MIDI to vibrotactile actuator commands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a MIDI file to an event log.
    Render {
        input: PathBuf,
        /// Profile file, name in TACTILE_PROFILE_PATH, or built-in preset.
        #[arg(long)]
        profile: Option<String>,
        /// Output log path; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Play a MIDI file to a device backend.
    Play {
        input: PathBuf,
        #[arg(long)]
        profile: Option<String>,
        /// serial:<port>, log:<path> or null
        #[arg(long, default_value = "null")]
        backend: String,
        /// Deliver every command at its scheduled time without waiting.
        #[arg(long)]
        virtual_clock: bool,
    },
    /// Render live MIDI bytes from a serial port or standard input.
    Listen {
        /// serial:<port> or stdin
        #[arg(long, default_value = "stdin")]
        input: String,
        #[arg(long, default_value = "null")]
        backend: String,
        #[arg(long)]
        profile: Option<String>,
        /// Also forward the raw MIDI bytes unchanged to serial:<port>.
        #[arg(long)]
        passthrough: Option<String>,
    },
    /// Show the gesture one note produces.
    InspectMapping {
        #[arg(long)]
        profile: Option<String>,
        /// Note number or name such as E4 or D#4.
        #[arg(long)]
        note: String,
        #[arg(long, value_enum)]
        role: RoleArg,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u8).range(1..=127))]
        velocity: u8,
        /// Note length in seconds.
        #[arg(long, default_value_t = 0.5)]
        duration: f64,
        /// Name octaves with middle C (60) as C4 instead of 72 as C4.
        #[arg(long)]
        middle_c_60: bool,
    },
    /// Match a recorded log against candidate logs or MIDI files.
    Identify {
        #[arg(long)]
        query: PathBuf,
        /// Directory of .log and .mid candidates, labelled by file stem.
        #[arg(long)]
        candidates: PathBuf,
        /// Profile used to render .mid candidates.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Score study trials.
    Eval {
        #[arg(long)]
        trials: PathBuf,
        /// Comma-separated label order; defaults to every label seen, sorted.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        /// Enumerate confusion matrices with this many trials that match
        /// the published per-song precision and recall.
        #[arg(long)]
        table1_check: Option<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Melody,
    Chords,
    Bassline,
    Percussion,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Render { input, profile, output } => cmd_render(&input, profile.as_deref(), output.as_deref()),
        Command::Play {
            input,
            profile,
            backend,
            virtual_clock,
        } => cmd_play(&input, profile.as_deref(), &backend, virtual_clock),
        Command::Listen {
            input,
            backend,
            profile,
            passthrough,
        } => cmd_listen(&input, &backend, profile.as_deref(), passthrough.as_deref()),
        Command::InspectMapping {
            profile,
            note,
            role,
            velocity,
            duration,
            middle_c_60,
        } => cmd_inspect(profile.as_deref(), &note, role, velocity, duration, middle_c_60),
        Command::Identify {
            query,
            candidates,
            profile,
        } => cmd_identify(&query, &candidates, profile.as_deref()),
        Command::Eval {
            trials,
            labels,
            table1_check,
        } => cmd_eval(&trials, labels, table1_check),
    }
}

fn profile(arg: Option<&str>) -> Result<MappingProfile> {
    match arg {
        Some(s) => load_profile(s).with_context(|| format!("profile `{s}`")),
        None => Ok(MappingProfile::default()),
    }
}

fn report_diagnostics(diag: &Diagnostics) {
    if !diag.is_clean() {
        for line in diag.to_string().lines() {
            eprintln!("warning: {line}");
        }
    }
}

fn render_file(input: &Path, profile: &MappingProfile) -> Result<Rendered> {
    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let doc = parse_smf(&bytes).with_context(|| format!("parsing {}", input.display()))?;
    let events = merge_tracks(&doc);
    render_timeline(&events, &build_tempo_map(&doc), doc.ticks_per_quarter, profile)
        .with_context(|| format!("mapping {}", input.display()))
}

fn cmd_render(input: &Path, profile_arg: Option<&str>, output: Option<&Path>) -> Result<()> {
    let rendered = render_file(input, &profile(profile_arg)?)?;
    report_diagnostics(&rendered.diagnostics);
    let log = write_log(&arbitrate(&rendered.timeline));
    match output {
        Some(path) => std::fs::write(path, log).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(log.as_bytes()).context("writing standard output"),
    }
}

fn open_serial(port: &str) -> Result<Box<dyn serialport::SerialPort>> {
    serialport::new(port, SERIAL_BAUD)
        .data_bits(serialport::DataBits::Eight)
        .parity(serialport::Parity::None)
        .stop_bits(serialport::StopBits::One)
        .timeout(Duration::from_millis(100))
        .open()
        .with_context(|| format!("opening serial port {port}"))
}

fn open_backend(arg: &str) -> Result<Box<dyn Backend>> {
    if arg == "null" {
        return Ok(Box::new(NullBackend::default()));
    }
    if let Some(port) = arg.strip_prefix("serial:") {
        return Ok(Box::new(FrameBackend::new(open_serial(port)?)));
    }
    if let Some(path) = arg.strip_prefix("log:") {
        let sink: Box<dyn Write> = if path == "-" {
            Box::new(io::stdout())
        } else {
            Box::new(File::create(path).with_context(|| format!("creating {path}"))?)
        };
        return Ok(Box::new(LogBackend::new(BufWriter::new(sink))?));
    }
    bail!("unknown backend `{arg}`; expected serial:<port>, log:<path> or null")
}

fn cancel_on_ctrl_c() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let handler_flag = Arc::clone(&flag);
    // a second registration fails; the first flag still works
    let _ = ctrlc::set_handler(move || handler_flag.store(true, Ordering::Relaxed));
    flag
}

fn cmd_play(input: &Path, profile_arg: Option<&str>, backend_arg: &str, virtual_clock: bool) -> Result<()> {
    let rendered = render_file(input, &profile(profile_arg)?)?;
    report_diagnostics(&rendered.diagnostics);
    let commands = arbitrate(&rendered.timeline);
    let mut backend = open_backend(backend_arg)?;
    let cancel = cancel_on_ctrl_c();
    let mut clock: Box<dyn Clock> = if virtual_clock {
        Box::new(VirtualClock::new())
    } else {
        Box::new(SystemClock::new())
    };
    let report = playback(&commands, clock.as_mut(), backend.as_mut(), &cancel, DEFAULT_LATENESS_ALERT)?;
    eprintln!(
        "{} {} commands, max lateness {:.3} ms, {} over {:.0} ms",
        if report.cancelled { "cancelled after" } else { "played" },
        report.emitted,
        report.max_lateness * 1000.0,
        report.late_commands,
        DEFAULT_LATENESS_ALERT * 1000.0
    );
    Ok(())
}

fn cmd_listen(input: &str, backend_arg: &str, profile_arg: Option<&str>, passthrough: Option<&str>) -> Result<()> {
    let reader: Box<dyn Read + Send> = match input {
        "stdin" | "-" => Box::new(io::stdin()),
        other => match other.strip_prefix("serial:") {
            Some(port) => Box::new(open_serial(port)?),
            None => bail!("unknown input `{other}`; expected serial:<port> or stdin"),
        },
    };
    let mut forward = match passthrough {
        None => None,
        Some(arg) => match arg.strip_prefix("serial:") {
            Some(port) => Some(MidiPassthrough::new(open_serial(port)?)),
            None => bail!("passthrough needs serial:<port>, got `{arg}`"),
        },
    };
    let mut backend = open_backend(backend_arg)?;
    let mut engine = LiveEngine::new(profile(profile_arg)?);
    let mut decoder = StreamDecoder::new();
    let cancel = cancel_on_ctrl_c();
    let clock = SystemClock::new();
    let source = read_midi_source(reader);

    let send_all = |backend: &mut Box<dyn Backend>, commands: Vec<DeviceCommand>| -> Result<()> {
        for c in &commands {
            if let Err(e) = backend.send(c) {
                shutoff(backend.as_mut(), c.t);
                return Err(e).context("backend write failed; all sites switched off");
            }
        }
        Ok(())
    };

    let source_error = loop {
        if cancel.load(Ordering::Relaxed) {
            break None;
        }
        let now = clock.now();
        let wait = engine
            .next_deadline(now)
            .map_or(0.1, |d| (d - now).clamp(0.0, 0.1));
        match source.events.recv_timeout(Duration::from_secs_f64(wait)) {
            Ok(SourceEvent::Data(bytes)) => {
                if let Some(p) = forward.as_mut() {
                    p.forward(&bytes).context("passthrough write failed")?;
                }
                let now = clock.now();
                let mut commands = engine.advance(now);
                for msg in decoder.decode(&bytes) {
                    commands.extend(engine.handle(now, &msg));
                }
                send_all(&mut backend, commands)?;
            }
            Ok(SourceEvent::End { error }) => break error,
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break Some("source reader stopped".to_string()),
        }
        let now = clock.now();
        let due = engine.advance(now);
        send_all(&mut backend, due)?;
    };

    let end = clock.now();
    let tail = engine.release_all(end);
    send_all(&mut backend, tail)?;
    backend.flush().context("flushing backend")?;
    report_diagnostics(engine.diagnostics());
    if engine.unmapped_notes() > 0 {
        eprintln!("warning: {} melody notes missing from the finger table", engine.unmapped_notes());
    }
    if decoder.discarded() > 0 {
        eprintln!("warning: {} stray MIDI bytes discarded", decoder.discarded());
    }
    if let Some(err) = source_error {
        eprintln!("warning: input ended: {err}");
    }
    eprintln!("{} gestures", engine.gestures());
    Ok(())
}

fn parse_note(text: &str, naming: NoteNaming) -> Result<u8> {
    if let Ok(n) = text.trim().parse::<u8>() {
        if n <= 127 {
            return Ok(n);
        }
    }
    parse_note_name(text, naming).ok_or_else(|| anyhow!("`{text}` is not a MIDI note number or note name"))
}

fn cmd_inspect(
    profile_arg: Option<&str>,
    note: &str,
    role: RoleArg,
    velocity: u8,
    duration: f64,
    middle_c_60: bool,
) -> Result<()> {
    let naming = if middle_c_60 { NoteNaming::C4Is60 } else { NoteNaming::C4Is72 };
    let note = parse_note(note, naming)?;
    if !(duration.is_finite() && duration > 0.0) {
        bail!("duration must be a positive number of seconds");
    }
    let p = profile(profile_arg)?;
    let span = NoteSpan {
        note,
        velocity,
        t_on: 0.0,
        duration,
    };
    let mut diag = Diagnostics::default();
    let (label, events): (&str, Vec<HapticEvent>) = match role {
        RoleArg::Melody => ("melody", map_melody_note(&span, &p, &mut diag)?),
        RoleArg::Chords => ("chords", vec![map_chord_note(&span, &p, &mut diag)]),
        RoleArg::Bassline => ("bassline", vec![map_bassline_note(&span, &p, &mut diag)]),
        RoleArg::Percussion => ("percussion", map_percussion(note, velocity, 0.0, &p, &mut diag)),
    };
    println!("note {note} ({}) velocity {velocity} as {label}", note_name(note, naming));
    if events.is_empty() {
        println!("  (no actuation)");
    }
    for e in &events {
        println!(
            "  {:<10} t={:.3}s dur={:.3}s intensity={}",
            e.site.name(),
            e.t_on,
            e.duration,
            e.intensity
        );
    }
    report_diagnostics(&diag);
    Ok(())
}

fn log_fingerprint(path: &Path) -> Result<Fingerprint> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let commands = read_log(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(fingerprint_from_commands(&commands))
}

fn cmd_identify(query: &Path, dir: &Path, profile_arg: Option<&str>) -> Result<()> {
    let q = log_fingerprint(query)?;
    let p = profile(profile_arg)?;
    let mut candidates = BTreeMap::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        let fp = match path.extension().and_then(|e| e.to_str()) {
            Some("log") => log_fingerprint(&path)?,
            Some("mid") | Some("midi") => fingerprint_from_commands(&arbitrate(&render_file(&path, &p)?.timeline)),
            _ => continue,
        };
        candidates.insert(stem.to_string(), fp);
    }
    let (label, score) =
        identify(&q, &candidates).ok_or_else(|| anyhow!("no .log or .mid candidates in {}", dir.display()))?;
    println!("{label} {score:.4}");
    Ok(())
}

fn fmt_ratio(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

fn cmd_eval(path: &Path, labels: Option<Vec<String>>, table1_check: Option<u32>) -> Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let trials = load_trials(file).with_context(|| format!("reading {}", path.display()))?;
    if trials.is_empty() {
        bail!("no trials in {}", path.display());
    }
    let matrix = match labels {
        Some(l) => ConfusionMatrix::from_trials(&l, &trials)?,
        None => ConfusionMatrix::from_trials_observed(&trials),
    };

    println!("confusion (rows presented, columns answered)");
    let width = matrix.labels().iter().map(String::len).max().unwrap_or(0).max(5);
    print!("{:width$}", "");
    for l in matrix.labels() {
        print!(" {l:>width$}");
    }
    println!();
    for (l, row) in matrix.labels().iter().zip(matrix.counts()) {
        print!("{l:width$}");
        for c in row {
            print!(" {c:>width$}");
        }
        println!();
    }
    println!();
    println!("{:width$} {:>9} {:>9}", "label", "precision", "recall");
    for s in precision_recall(&matrix) {
        println!("{:width$} {:>9} {:>9}", s.label, fmt_ratio(s.precision), fmt_ratio(s.recall));
    }
    println!("micro recall {}", fmt_ratio(micro_recall(&matrix)));

    let groups = accuracy_by_group(&trials);
    println!();
    for (name, g) in [("trained", &groups.trained), ("untrained", &groups.untrained), ("overall", &groups.overall)] {
        println!(
            "{name:<10} trials {:>4} accuracy {} mean confidence {}",
            g.trials,
            fmt_ratio(g.accuracy()),
            fmt_ratio(g.mean_confidence())
        );
    }
    for (id, g) in &groups.participants {
        println!("  {id:<8} accuracy {}", fmt_ratio(g.accuracy()));
    }

    if let Some(total) = table1_check {
        let found = table1_consistency(&TABLE1_TARGETS, total, None)?;
        println!();
        println!("{} confusion matrices with {total} trials reproduce the published precision/recall", found.len());
        for m in found.iter().take(20) {
            println!("  {m:?}");
        }
        if found.len() > 20 {
            println!("  ... {} more", found.len() - 20);
        }
    }
    Ok(())
}
