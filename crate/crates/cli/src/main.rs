use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use seizeval::edf::{DuplicatePolicy, CHB_MIT_COMMON_CHANNELS};
use seizeval::experiment::{
    plot, run_to_dir, score_only, Dataset, ExperimentConfig, FeatureCache, Hypothesis, ReportFile,
};
use seizeval::features::{extract_features, FeatureConfig, WindowingConfig};
use seizeval::metrics::{Aggregation, REPORT_CSV_COLUMNS, REPORT_CSV_VERSION};
use seizeval::partition::{arrange, DataFile};
use seizeval::recording::{scan_edf_directory, RecordingSet};
use seizeval::synth::{export_edf, generate};
use seizeval::timeline::{read_annotations_file, write_annotations_file};

#[derive(Parser)]
#[command(
    name = "seizeval",
    version,
    about = "Validation toolkit for long-term EEG seizure detectors"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic recording set.
    Synth(SynthArgs),
    /// Index a directory of EDF files and an annotation CSV.
    Ingest(IngestArgs),
    /// Arrange recordings into files and fold plans.
    Partition(PartitionArgs),
    /// Extract window features of arranged files.
    Features(FeaturesArgs),
    /// Run a full experiment.
    Run(RunArgs),
    /// Score a hypothesis against reference annotations.
    Score(ScoreArgs),
    /// Draw a metric panel from one or more report.json files.
    Plot(PlotArgs),
}

/// Experiment settings shared by several subcommands; each overrides the
/// config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    aggregation: Option<String>,
    /// Window size in seconds.
    #[arg(long)]
    ws: Option<f64>,
    /// Window step in seconds.
    #[arg(long)]
    wss: Option<f64>,
    /// Smoothing window in seconds.
    #[arg(long)]
    smooth: Option<f64>,
    #[arg(long = "merge-gap")]
    merge_gap: Option<f64>,
    /// Use the Fact-k arrangement with this k.
    #[arg(long)]
    factor: Option<u32>,
    /// Use fixed windows of this many hours.
    #[arg(long = "window-hours")]
    window_hours: Option<f64>,
    /// Arrangement name (Fact1, StoS, Win1h, ...).
    #[arg(long)]
    arrangement: Option<String>,
    #[arg(long)]
    cv: Option<String>,
    #[arg(long)]
    scope: Option<String>,
    /// Saved recording set to use instead of the configured source.
    #[arg(long)]
    recordings: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                // Validated after the flags are applied, so flags can repair a combination.
                ExperimentConfig::parse_toml(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if self.factor.is_some() as u8
            + self.window_hours.is_some() as u8
            + self.arrangement.is_some() as u8
            > 1
        {
            bail!("use only one of --factor, --window-hours and --arrangement");
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(a) = &self.aggregation {
            cfg.aggregation = a.parse::<Aggregation>()?;
        }
        if let Some(v) = self.ws {
            cfg.window_s = v;
        }
        if let Some(v) = self.wss {
            cfg.step_s = v;
        }
        if let Some(v) = self.smooth {
            cfg.smooth_window_s = v;
        }
        if let Some(v) = self.merge_gap {
            cfg.merge_gap_s = v;
        }
        if let Some(k) = self.factor {
            cfg.arrangement = format!("Fact{k}");
        }
        if let Some(h) = self.window_hours {
            cfg.arrangement = format!("Win{h}h");
        }
        if let Some(a) = &self.arrangement {
            cfg.arrangement = a.clone();
        }
        if let Some(v) = &self.cv {
            cfg.cv = v.clone();
        }
        if let Some(v) = &self.scope {
            cfg.scope = v.clone();
        }
        if let Some(r) = &self.recordings {
            cfg.recordings = Some(r.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    o: Overrides,
    /// Also write EDF files; the saved set then reads from them.
    #[arg(long)]
    edf: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Duplicates {
    Error,
    First,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long = "data-dir")]
    data_dir: PathBuf,
    /// Defaults to <data-dir>/annotations.csv.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Comma-separated channel labels; defaults to the 18 common CHB-MIT channels.
    #[arg(long, value_delimiter = ',')]
    channels: Vec<String>,
    #[arg(long, value_enum, default_value_t = Duplicates::Error)]
    duplicates: Duplicates,
    /// Output recording set (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    o: Overrides,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    o: Overrides,
    /// Arranged files from `partition` (files.json); arranged afresh if absent.
    #[arg(long)]
    files: Option<PathBuf>,
    /// Only this file id.
    #[arg(long)]
    file: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    o: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ScoreArgs {
    /// Reference annotation CSV.
    #[arg(long)]
    reference: PathBuf,
    /// Hypothesis annotation CSV.
    #[arg(long, conflicts_with = "labels")]
    hypothesis: Option<PathBuf>,
    /// Hypothesis as one 0/1 label per sample (needs --subject and --file).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    subject: Option<String>,
    #[arg(long)]
    file: Option<String>,
    /// Recording set giving the duration of every file.
    #[arg(long = "recordings")]
    recordings: Option<PathBuf>,
    /// Duration in seconds of every scored file (instead of --recordings).
    #[arg(long)]
    duration: Option<f64>,
    /// Scoring rate in Hz.
    #[arg(long, default_value_t = 256.0)]
    fs: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct PlotArgs {
    /// report.json files; each becomes one bar series.
    #[arg(long = "report", required = true)]
    reports: Vec<PathBuf>,
    /// Series labels, in the order of --report.
    #[arg(long = "label")]
    labels: Vec<String>,
    /// Plot this subject instead of the average.
    #[arg(long)]
    subject: Option<String>,
    #[arg(long, default_value = "Panel")]
    title: String,
    #[arg(long)]
    out: PathBuf,
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = a.o.resolve()?;
    let out = &cfg.out;
    std::fs::create_dir_all(out)?;
    let data = generate(&cfg.synth_config())?;
    let set = if a.edf {
        export_edf(&data, out)?
    } else {
        write_annotations_file(&out.join("annotations.csv"), &data.annotations)?;
        data.set.clone()
    };
    set.save_json(&out.join("recordings.json"))?;
    println!(
        "{} recordings, {} seizures, {:.1} h, seizure fraction {:.4} -> {}",
        set.recordings.len(),
        data.annotations.len(),
        set.total_duration_s() / 3600.0,
        set.seizure_fraction(),
        out.display()
    );
    Ok(())
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let ann_path = a
        .annotations
        .clone()
        .unwrap_or_else(|| a.data_dir.join("annotations.csv"));
    let ann = read_annotations_file(&ann_path)?;
    let channels: Vec<String> = if a.channels.is_empty() {
        CHB_MIT_COMMON_CHANNELS
            .iter()
            .map(|c| c.to_string())
            .collect()
    } else {
        a.channels.clone()
    };
    let policy = match a.duplicates {
        Duplicates::Error => DuplicatePolicy::Error,
        Duplicates::First => DuplicatePolicy::First,
    };
    let set = scan_edf_directory(&a.data_dir, &ann, &channels, policy)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    set.save_json(&a.out)?;
    println!(
        "{} recordings from {} subjects, {:.1} h -> {}",
        set.recordings.len(),
        set.subjects().len(),
        set.total_duration_s() / 3600.0,
        a.out.display()
    );
    Ok(())
}

fn arranged(cfg: &ExperimentConfig, data: &Dataset) -> Result<Vec<DataFile>> {
    Ok(arrange(&data.set, &cfg.arrangement()?, cfg.seed)?)
}

fn cmd_partition(a: &PartitionArgs) -> Result<()> {
    let cfg = a.o.resolve()?;
    let data = Dataset::load(&cfg)?;
    let files = arranged(&cfg, &data)?;
    let plans = seizeval::experiment::plan_folds(&files, cfg.scheme()?, cfg.scope()?)?;
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("files.json"), &files)?;
    write_json(&cfg.out.join("fold_plan.json"), &plans)?;
    println!(
        "{} files, {} folds -> {}",
        files.len(),
        plans.iter().map(|p| p.folds.len()).sum::<usize>(),
        cfg.out.display()
    );
    Ok(())
}

fn cmd_features(a: &FeaturesArgs) -> Result<()> {
    let cfg = a.o.resolve()?;
    let data = Dataset::load(&cfg)?;
    let files: Vec<DataFile> = match &a.files {
        Some(p) => serde_json::from_str(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => arranged(&cfg, &data)?,
    };
    let feature_cfg: FeatureConfig = cfg.feature_config();
    std::fs::create_dir_all(&cfg.out)?;
    let mut n = 0;
    for f in files
        .iter()
        .filter(|f| a.file.as_ref().is_none_or(|id| &f.meta.file_id == id))
    {
        let m = extract_features(f, data.reader.as_ref(), &data.set.channels, &feature_cfg)?;
        m.write_csv_file(&cfg.out.join(format!("{}.csv", f.meta.file_id)))?;
        n += 1;
    }
    if n == 0 {
        bail!("no matching files");
    }
    let w: WindowingConfig = feature_cfg.windowing;
    println!(
        "{n} feature files (window {} s, step {} s) -> {}",
        w.window_s,
        w.step_s,
        cfg.out.display()
    );
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = a.o.resolve()?;
    let data = Dataset::load(&cfg)?;
    let result = run_to_dir(&cfg, &data, &FeatureCache::new())?;
    let r = &result.average;
    println!(
        "{} folds; episode F1 {:.3} (TPR {:.3}, PPV {:.3}); duration F1 {:.3}; F1_DE {:.3}; FAR {:.2}/day -> {}",
        result.folds.len(),
        r.f1_ep,
        r.sensitivity_ep,
        r.precision_ep,
        r.f1_dur,
        r.f1_de,
        r.far_per_day,
        cfg.out.display()
    );
    Ok(())
}

fn read_label_file(path: &Path) -> Result<Vec<u8>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| match t {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => bail!(
                "{}: label {} is '{t}', expected 0 or 1",
                path.display(),
                i + 1
            ),
        })
        .collect()
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let reference = read_annotations_file(&a.reference)?;
    let hypothesis = match (&a.hypothesis, &a.labels) {
        (Some(p), None) => Hypothesis::Events(read_annotations_file(p)?),
        (None, Some(p)) => {
            let (Some(subject), Some(file)) = (&a.subject, &a.file) else {
                bail!("--labels needs --subject and --file");
            };
            Hypothesis::Labels {
                subject: subject.clone(),
                file: file.clone(),
                labels: read_label_file(p)?,
            }
        }
        _ => bail!("give exactly one of --hypothesis and --labels"),
    };
    let mut spans = BTreeMap::new();
    match (&a.recordings, a.duration) {
        (Some(p), None) => {
            for r in RecordingSet::load_json(p)?.recordings {
                spans.insert((r.meta.subject_id, r.meta.file_id), r.meta.duration_s);
            }
        }
        (None, Some(d)) => {
            for r in &reference {
                spans.insert((r.subject.clone(), r.file.clone()), d);
            }
            match &hypothesis {
                Hypothesis::Events(rows) => {
                    for r in rows {
                        spans.insert((r.subject.clone(), r.file.clone()), d);
                    }
                }
                Hypothesis::Labels { subject, file, .. } => {
                    spans.insert((subject.clone(), file.clone()), d);
                }
            }
        }
        _ => bail!("give exactly one of --recordings and --duration"),
    }
    let scored = score_only(&reference, &hypothesis, &spans, a.fs)?;
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&scored)?),
        Format::Csv => {
            println!("report_csv_version,{}", REPORT_CSV_COLUMNS.join(","));
            println!("{REPORT_CSV_VERSION},{}", scored.report.csv_row().join(","));
        }
    }
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    if !a.labels.is_empty() && a.labels.len() != a.reports.len() {
        bail!("{} labels for {} reports", a.labels.len(), a.reports.len());
    }
    let mut series = Vec::new();
    for (i, p) in a.reports.iter().enumerate() {
        let rep = ReportFile::load(p)?;
        let label = a
            .labels
            .get(i)
            .cloned()
            .unwrap_or_else(|| p.display().to_string());
        let r = match &a.subject {
            Some(s) => rep
                .subjects
                .get(s)
                .cloned()
                .with_context(|| format!("{} has no subject {s}", p.display()))?,
            None => rep.average,
        };
        series.push((label, r));
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&a.out, plot::panel_svg(&a.title, &series))?;
    println!("{} series -> {}", series.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.cmd {
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Ingest(a) => cmd_ingest(a),
        Cmd::Partition(a) => cmd_partition(a),
        Cmd::Features(a) => cmd_features(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Score(a) => cmd_score(a),
        Cmd::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
