use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use photosync::config;
use photosync::experiment::{self, nominal_offsets};
use photosync::manifest::RunManifest;
use photosync::report::{self, Metric};
use photosync::reproduce;
use photosync::tagfile::{self, FileSink, LogReader, LogWriter, TagFormat, TagReader, TagWriter};
use photosync::{Error, Result};
use photosync_core::analysis::{
    Anchor, BinSpec, Chunked, DecayTask, ElectronicsRates, G2Task, HistTask, HomStocTask, StocTask,
    SyncTask, TagSet, WindowSpec,
};
use photosync_core::fit::{fit_decay, fit_g2_transmission, G2Dataset};
use photosync_core::model::Estimate;
use photosync_core::sim::{run_sim_into, Channel, RecordSink};
use photosync_core::{Routing, SystemConfig};

#[derive(Parser)]
#[command(
    name = "photosync",
    version,
    about = "Synchronized photon-pair source: model, simulator and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Ptag,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalyzeMode {
    /// Sync metrics when the event log has memory operations, else stoc.
    Auto,
    Stoc,
    Sync,
    HomStoc,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (`key = value`); reference defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "PHOTOSYNC_OUT", default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytic chain over an r1 sweep.
    Model {
        #[command(flatten)]
        common: Common,
        /// `r1=LO:HI:STEPS` (cps).
        #[arg(long, default_value = "r1=50000:440000:10")]
        sweep: String,
    },
    /// Run the simulator and write tags, event log and manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Simulated time in seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, value_enum, default_value_t = Format::Ptag)]
        format: Format,
    },
    /// Analyze a tag file (PTAG or CSV) and optional event log.
    Analyze {
        #[command(flatten)]
        common: Common,
        tags: PathBuf,
        /// Event log CSV written by `simulate`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = AnalyzeMode::Auto)]
        mode: AnalyzeMode,
        /// Measurement time in seconds; defaults to the last record time.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Compare simulation, analytic chain and published values.
    Reproduce {
        #[command(flatten)]
        common: Common,
        /// `r1=LO:HI:STEPS` (cps); the default is 50k, 200k and 440k.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Simulated seconds per rate measurement.
        #[arg(long, default_value_t = 100.0)]
        duration: f64,
        /// Simulated seconds per run of the g², HOM and decay checks.
        #[arg(long)]
        aux_duration: Option<f64>,
    },
    /// Fit data points (`t_ns,value,stderr`).
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(subcommand)]
        model: FitModel,
    },
}

#[derive(Subcommand)]
enum FitModel {
    /// Decoherence model η(t).
    Decay { points: PathBuf },
    /// Retrieval leakage factor from g² points; each file is `PATH:RHO`.
    G2 {
        #[arg(required = true)]
        datasets: Vec<String>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<SystemConfig> {
    let cfg = match path {
        Some(p) => config::load(p)?,
        None => SystemConfig::reference_defaults(),
    };
    cfg.validate_model()?;
    Ok(cfg)
}

fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Usage(format!("sweep `{s}`: expected r1=LO:HI:STEPS"));
    let spec = s.strip_prefix("r1=").ok_or_else(bad)?;
    let f: Vec<&str> = spec.split(':').collect();
    if f.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = f[0].parse().map_err(|_| bad())?;
    let hi: f64 = f[1].parse().map_err(|_| bad())?;
    let n: usize = f[2].parse().map_err(|_| bad())?;
    Ok(report::linspace(lo, hi, n))
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(Error::io(format!("creating {}", p.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::io(format!("writing {}", path.display())))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(Error::io(format!("opening {}", path.display())))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(Error::io(format!("creating {}", path.display())))
}

fn cmd_model(common: &Common, sweep: &str) -> Result<()> {
    let cfg = load_config(&common.config)?;
    let csv = report::model_sweep_csv(&cfg, &parse_sweep(sweep)?);
    create_dir(&common.out)?;
    let path = common.out.join("model.csv");
    write(&path, &csv)?;
    let mut m = RunManifest::new("model", &cfg);
    m.add_output(&path)?;
    m.write(&common.out.join("manifest.json"))?;
    print!("{csv}");
    Ok(())
}

fn cmd_simulate(common: &Common, seed: u64, duration: f64, format: Format) -> Result<()> {
    let cfg = load_config(&common.config)?;
    create_dir(&common.out)?;
    let (fmt, name) = match format {
        Format::Ptag => (TagFormat::Ptag, "tags.ptag"),
        Format::Csv => (TagFormat::Csv, "tags.csv"),
    };
    let tags_path = common.out.join(name);
    let log_path = common.out.join("events.csv");
    let tags = TagWriter::new(create(&tags_path)?, fmt).map_err(Error::io("writing tags"))?;
    let log = LogWriter::new(create(&log_path)?).map_err(Error::io("writing event log"))?;
    let mut sink = FileSink::new(tags, Some(log));
    let mut m = RunManifest::new("simulate", &cfg);
    let summary = run_sim_into(&cfg, seed, duration, &mut sink)?;
    sink.finish().map_err(Error::io("writing outputs"))?;
    m.seeds = vec![seed];
    m.duration_s = Some(duration);
    m.effective_duration_s = Some(summary.effective_duration_s());
    m.events = Some(summary.events);
    m.truncated = summary.truncated;
    for ch in Channel::ALL {
        m.counts.insert(ch.name().into(), summary.count(ch));
    }
    m.add_output(&tags_path)?;
    m.add_output(&log_path)?;
    m.write(&common.out.join("manifest.json"))?;
    println!(
        "{} events, {} tags in {:.3} s simulated{}",
        summary.events,
        summary.counts.iter().sum::<u64>(),
        summary.effective_duration_s(),
        if summary.truncated {
            " (stopped at the event cap)"
        } else {
            ""
        }
    );
    Ok(())
}

/// Replays a tag file (and log) into a sink.
fn replay_files<S: RecordSink>(tags: &Path, log: Option<&Path>, sink: &mut S) -> Result<()> {
    let t = TagReader::new(open(tags)?)?;
    match log {
        Some(l) => tagfile::replay(t, LogReader::new(open(l)?)?, sink)?,
        None => tagfile::replay(t, std::iter::empty(), sink)?,
    }
    Ok(())
}

/// Collects the records before a time limit, for window location.
struct PilotSink {
    limit: u64,
    tags: Vec<photosync_core::sim::TimeTag>,
    log: Vec<photosync_core::sim::LogEntry>,
    last: u64,
}

impl RecordSink for PilotSink {
    fn tag(&mut self, tag: photosync_core::sim::TimeTag) {
        self.last = self.last.max(tag.time);
        if tag.time < self.limit {
            self.tags.push(tag);
        }
    }

    fn log(&mut self, entry: photosync_core::sim::LogEntry) {
        self.last = self.last.max(entry.time());
        if entry.time() < self.limit {
            self.log.push(entry);
        }
    }
}

/// The manifest written next to a tag file by `simulate`, if any.
fn sibling_manifest(tags: &Path) -> Option<RunManifest> {
    let p = tags.parent()?.join("manifest.json");
    p.exists().then(|| RunManifest::read(&p).ok()).flatten()
}

fn cmd_analyze(
    common: &Common,
    tags: &Path,
    log: Option<&Path>,
    mode: AnalyzeMode,
    duration: Option<f64>,
) -> Result<()> {
    let sibling = sibling_manifest(tags).filter(|m| m.subcommand == "simulate");
    let cfg = match (&common.config, &sibling) {
        (None, Some(m)) => {
            let cfg = config::parse(&m.config)?;
            cfg.validate_model()?;
            cfg
        }
        _ => load_config(&common.config)?,
    };
    let duration = duration.or(sibling.as_ref().and_then(|m| m.effective_duration_s));
    // Two-detector g² needs the split signal path.
    let hbt = cfg.sim.routing == Routing::Hbt;
    create_dir(&common.out)?;
    // First pass: windows from the first part of the data and the data span.
    let pilot_ps = (experiment::PILOT_SECONDS * 1e12) as u64;
    let mut pilot = PilotSink {
        limit: pilot_ps,
        tags: Vec::new(),
        log: Vec::new(),
        last: 0,
    };
    replay_files(tags, log, &mut pilot)?;
    let end = match duration {
        Some(d) if d > 0.0 => (d * 1e12).round() as u64,
        Some(_) => return Err(Error::Usage("duration must be positive".into())),
        None => pilot.last + 1,
    };
    let set = TagSet::from_parts(&pilot.tags, &pilot.log);
    let w = WindowSpec::locate(&set.view(), nominal_offsets(&cfg), pilot_ps.min(end));
    let has_ops = !set.ops.is_empty();
    let mode = match mode {
        AnalyzeMode::Auto if has_ops => AnalyzeMode::Sync,
        AnalyzeMode::Auto => AnalyzeMode::Stoc,
        m => m,
    };
    let dur_s = end as f64 * 1e-12;
    let mut metrics = Vec::new();
    let mut outputs = Vec::new();
    let hist_spec = |center: i64| BinSpec {
        bin_width: 100,
        t_min: center - 20_000,
        t_max: center + 80_000,
    };

    match mode {
        AnalyzeMode::Stoc | AnalyzeMode::Auto => {
            let tasks = (
                StocTask::new(w),
                G2Task::idler1(w),
                HistTask::new(
                    Anchor::Tags(Channel::Idler1),
                    Channel::SigA,
                    hist_spec(w.offsets.idler1_sig_a),
                ),
            );
            let mut sink = Chunked::new(tasks, cfg.electronics.clone(), end);
            replay_files(tags, log, &mut sink)?;
            let ((stoc, g2, hist), _) = sink.finish();
            if !hbt {
                metrics.push(Metric::new(
                    "r_stoc",
                    Estimate::poisson_rate(stoc.coincidences, dur_s),
                    stoc.coincidences,
                ));
            }
            if let (true, Ok(g)) = (hbt, g2.counts.estimate()) {
                metrics.push(Metric::new("g2_h", g, g2.counts.ab));
            }
            let p = common.out.join("hist_idler1_sig_a.csv");
            write(&p, &report::histogram_csv(&hist.hist))?;
            outputs.push(p);
        }
        AnalyzeMode::Sync => {
            let k = cfg.detector.coupling_correction();
            let tasks = (
                SyncTask::new(w),
                G2Task::retrieval(w),
                DecayTask::new(w, w.offsets.retrieval_sig_a, 10_000, 200_000),
                HistTask::new(
                    Anchor::OpIdler2,
                    Channel::SigA,
                    hist_spec(w.offsets.idler2_sig_b),
                ),
                HistTask::new(
                    Anchor::OpIdler2,
                    Channel::SigB,
                    hist_spec(w.offsets.idler2_sig_b),
                ),
            );
            let mut sink = Chunked::new(tasks, cfg.electronics.clone(), end);
            replay_files(tags, log, &mut sink)?;
            let ((sync, g2, decay, ha, hb), counts) = sink.finish();
            let raw = Estimate::poisson_rate(sync.coincidences, dur_s);
            if !hbt {
                metrics.push(Metric::new(
                    "r_sync",
                    Estimate::new(raw.value * k, raw.stderr * k),
                    sync.coincidences,
                ));
            }
            let el = ElectronicsRates::from_counts(&counts, &cfg.electronics, dur_s);
            metrics.push(Metric::new("r_trig2", el.r_trig2, counts.ddg2));
            metrics.push(Metric::new("r_sync_trials", el.r_sync_trials, counts.ddg1));
            metrics.push(Metric::new("downtime", el.downtime, counts.ddg2));
            metrics.push(Metric::new(
                "spacing_violations",
                Estimate::exact(counts.spacing_violations as f64),
                counts.spacing_violations,
            ));
            if let (true, Ok(g)) = (hbt, g2.counts.estimate()) {
                metrics.push(Metric::new("g2_h", g, g2.counts.ab));
            }
            let c = w.offsets.idler2_sig_b;
            let half = (w.herald_window / 2) as i64;
            let overlap = photosync_core::analysis::temporal_overlap_estimate(
                &ha.hist.restricted(c - half, c + half),
                &hb.hist.restricted(c - half, c + half),
            );
            if let (false, Ok(i)) = (hbt, overlap) {
                metrics.push(Metric::new(
                    "overlap_i",
                    i,
                    ha.hist.total_pairs.min(hb.hist.total_pairs),
                ));
            }
            for (name, h) in [
                ("hist_idler2_sig_a.csv", &ha.hist),
                ("hist_idler2_sig_b.csv", &hb.hist),
            ] {
                let p = common.out.join(name);
                write(&p, &report::histogram_csv(h))?;
                outputs.push(p);
            }
            let p = common.out.join("decay.csv");
            write(&p, &report::decay_csv(&decay.curve(cfg.source.eta_h1)))?;
            outputs.push(p);
        }
        AnalyzeMode::HomStoc => {
            let mut sink = Chunked::new(HomStocTask::standard(w), cfg.electronics.clone(), end);
            replay_files(tags, log, &mut sink)?;
            let (task, _) = sink.finish();
            let scan = task.scan();
            if let Ok(v) = scan.visibility() {
                metrics.push(Metric::new(
                    "hom_visibility",
                    v,
                    scan.points.iter().map(|p| p.coincidences).sum(),
                ));
            }
            let mut csv = String::from("delay_ps,coincidences,norm\n");
            for p in &scan.points {
                csv.push_str(&format!("{},{},{}\n", p.delay_ps, p.coincidences, p.norm));
            }
            let p = common.out.join("hom_scan.csv");
            write(&p, &csv)?;
            outputs.push(p);
        }
    }
    // Singles are always reported, so an empty input gives a zero-count report.
    let mut singles = TagCounter::default();
    replay_files(tags, None, &mut singles)?;
    for ch in Channel::ALL {
        let n = singles.0[ch as usize];
        metrics.push(Metric::new(
            format!("singles_{}", ch.name()),
            Estimate::poisson_rate(n, dur_s),
            n,
        ));
    }
    let csv = report::metrics_csv(&metrics);
    let p = common.out.join("metrics.csv");
    write(&p, &csv)?;
    outputs.push(p);
    let mut m = RunManifest::new("analyze", &cfg);
    m.duration_s = Some(dur_s);
    for p in &outputs {
        m.add_output(p)?;
    }
    m.write(&common.out.join("manifest.json"))?;
    print!("{csv}");
    Ok(())
}

#[derive(Default)]
struct TagCounter([u64; 4]);

impl RecordSink for TagCounter {
    fn tag(&mut self, tag: photosync_core::sim::TimeTag) {
        self.0[tag.channel as usize] += 1;
    }

    fn log(&mut self, _: photosync_core::sim::LogEntry) {}
}

/// Returns whether every comparison passed.
fn cmd_reproduce(
    common: &Common,
    sweep: &Option<String>,
    seed: u64,
    duration: f64,
    aux: Option<f64>,
) -> Result<bool> {
    let cfg = load_config(&common.config)?;
    if duration.is_nan() || duration <= 0.0 {
        return Err(Error::Usage("duration must be positive".into()));
    }
    let points = match sweep {
        Some(s) => parse_sweep(s)?,
        None => vec![50e3, 200e3, 440e3],
    };
    let o = reproduce::Options {
        config: cfg.clone(),
        sweep: points,
        seed,
        duration_s: duration,
        aux_duration_s: aux.unwrap_or(duration),
    };
    let r = reproduce::run(&o)?;
    create_dir(&common.out)?;
    let mut m = RunManifest::new("reproduce", &cfg);
    m.seeds = vec![seed];
    m.duration_s = Some(duration);
    for (name, text) in [
        ("reproduce.csv", r.points_csv()),
        ("checks.csv", r.checks_csv()),
    ] {
        let p = common.out.join(name);
        write(&p, &text)?;
        m.add_output(&p)?;
    }
    m.write(&common.out.join("manifest.json"))?;
    print!("{}", r.points_csv());
    print!("{}", r.checks_csv());
    let failures = r.failures();
    if failures.is_empty() {
        println!("all comparisons passed");
    } else {
        println!("failed: {}", failures.join(", "));
    }
    Ok(failures.is_empty())
}

fn cmd_fit(common: &Common, model: &FitModel) -> Result<()> {
    let cfg = load_config(&common.config)?;
    let read_points = |p: &Path| -> Result<Vec<photosync_core::fit::DataPoint>> {
        let text = fs::read_to_string(p).map_err(Error::io(format!("reading {}", p.display())))?;
        report::parse_points(&text).map_err(|e| Error::Usage(format!("{}: {e}", p.display())))
    };
    let result = match model {
        FitModel::Decay { points } => fit_decay(&read_points(points)?)?,
        FitModel::G2 { datasets } => {
            let mut sets = Vec::new();
            for d in datasets {
                let (path, rho) = d
                    .rsplit_once(':')
                    .and_then(|(p, r)| r.parse::<f64>().ok().map(|r| (p, r)))
                    .ok_or_else(|| Error::Usage(format!("dataset `{d}`: expected PATH:RHO")))?;
                sets.push(G2Dataset {
                    points: read_points(Path::new(path))?,
                    g2_source: cfg.source.g2_source,
                    rho,
                    decay: cfg.memory.decay,
                    transmission: cfg.memory.transmission,
                    t_offres_factor: cfg.memory.t_offres_factor,
                });
            }
            fit_g2_transmission(&sets)?
        }
    };
    create_dir(&common.out)?;
    write(&common.out.join("fit.csv"), &report::fit_csv(&result))?;
    print!("{}", report::fit_text(&result));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Model { common, sweep } => cmd_model(common, sweep).map(|_| true),
        Command::Simulate {
            common,
            seed,
            duration,
            format,
        } => cmd_simulate(common, *seed, *duration, *format).map(|_| true),
        Command::Analyze {
            common,
            tags,
            log,
            mode,
            duration,
        } => cmd_analyze(common, tags, log.as_deref(), *mode, *duration).map(|_| true),
        Command::Reproduce {
            common,
            sweep,
            seed,
            duration,
            aux_duration,
        } => cmd_reproduce(common, sweep, *seed, *duration, *aux_duration),
        Command::Fit { common, model } => cmd_fit(common, model).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
