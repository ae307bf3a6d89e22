//! Command-line subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sensorspace_core::eval::report::{
    scatter_svg, traces_svg, write_binned_csv, write_scatter_csv, write_score_table,
    write_traces_csv,
};
use sensorspace_core::eval::{
    direct_trace, encoder_bias_scan, factor_weights, improvement_row, model_metrics,
    normalize_survey, overall_score, similarity_trace, FactorWeights, KeyWeights, ModelMetrics,
    Reference, SurveyDataset, Trace,
};
use sensorspace_core::genesis::{bench_cache, drift_workload};
use sensorspace_core::geometry::{delaunay_tessellate, Point};
use sensorspace_core::space::{build_space, Reading, SensorSpace};
use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;
use crate::store::SchemaPayload;

#[derive(Debug, Parser)]
#[command(
    name = "sensorspace",
    version,
    about = "Sensor readings to visual embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Delaunay-tessellate a CSV point set.
    Tessellate(TessellateArgs),
    /// Interpolate the embedding of one reading.
    Interpolate(InterpolateArgs),
    /// Similarity traces along one sensor axis, with Kendall's tau.
    Trace(TraceArgs),
    /// Pairwise similarity against numeric difference for a prompt template.
    BiasScan(BiasScanArgs),
    /// Iteration totals with and without latent reuse.
    BenchCache(BenchCacheArgs),
    /// Weighted model scores with an improvement row.
    ScoreSurvey(ScoreSurveyArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// JSON config supplying the embedding provider and generator.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ProviderArgs {
    fn load(&self) -> Result<Config, CliError> {
        match &self.config {
            Some(path) => Ok(Config::load(path)?),
            None => Ok(Config::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct TessellateArgs {
    /// CSV with one point per row; a non-numeric first row is a header.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub dim: usize,
    /// Write the simplex CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub schema: PathBuf,
    /// Reading as JSON, or `@FILE`.
    #[arg(long)]
    pub reading: String,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub axis: String,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    /// Values of the other sensors as JSON (default: mid-range).
    #[arg(long)]
    pub at: Option<String>,
    /// Also trace prompts embedded directly, without interpolation.
    #[arg(long)]
    pub direct: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct BiasScanArgs {
    /// Template with an `{x}` placeholder.
    #[arg(long)]
    pub template: String,
    /// Numbers separated by whitespace, commas or newlines.
    #[arg(long)]
    pub values: PathBuf,
    #[arg(long, default_value_t = sensorspace_core::eval::DEFAULT_BIAS_BINS)]
    pub bins: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct BenchCacheArgs {
    #[arg(long)]
    pub schema: PathBuf,
    /// Readings as a JSON array or one JSON object per line.
    #[arg(long, required_unless_present = "drift")]
    pub workload: Option<PathBuf>,
    /// Generate a random-walk workload of this many readings instead.
    #[arg(long, conflicts_with = "workload")]
    pub drift: Option<usize>,
    /// Normalized step length of the random walk.
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct ScoreSurveyArgs {
    /// `participant_id,question_id,factor,model_id,score` CSV.
    #[arg(long, required_unless_present = "metrics")]
    pub responses: Option<PathBuf>,
    /// `participant_id,factors` CSV, factors joined by `;`.
    #[arg(long)]
    pub selections: Option<PathBuf>,
    /// Precomputed `model,coherence,faithfulness,sensitivity` CSV.
    #[arg(long, conflicts_with = "responses")]
    pub metrics: Option<PathBuf>,
    /// Coherence, faithfulness and sensitivity weights, comma separated.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path.display(), e))
}

fn create_file(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|e| CliError::io(path.display(), e))
}

fn load_schema(path: &Path) -> Result<SchemaPayload, CliError> {
    SchemaPayload::from_json(&read_file(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn load_space(path: &Path, provider: &ProviderArgs) -> Result<(Config, SensorSpace), CliError> {
    let config = provider.load()?;
    let payload = load_schema(path)?;
    let space = build_space(&payload.schema, &payload.anchors, &config.build_provider())?;
    Ok((config, space))
}

/// JSON given inline or as `@FILE`.
fn inline_json<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T, CliError> {
    let text = match arg.strip_prefix('@') {
        Some(path) => String::from_utf8_lossy(&read_file(Path::new(path))?).into_owned(),
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("invalid JSON: {e}")))
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Tessellate(a) => tessellate(&a, out),
        Command::Interpolate(a) => interpolate(&a, out),
        Command::Trace(a) => trace(&a, out),
        Command::BiasScan(a) => bias_scan(&a, out),
        Command::BenchCache(a) => bench(&a, out),
        Command::ScoreSurvey(a) => score_survey(&a, out),
        Command::Serve(a) => serve(&a),
    }
}

pub fn read_points(bytes: &[u8], dim: usize) -> Result<Vec<Point>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(coords) if coords.len() == dim => points.push(Point::new(coords)),
            Ok(coords) => {
                return Err(CliError::Validation(format!(
                    "row {}: {} coordinates, expected {dim}",
                    i + 1,
                    coords.len()
                )))
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(CliError::Validation(format!("row {}: {e}", i + 1))),
        }
    }
    Ok(points)
}

fn tessellate(a: &TessellateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let points = read_points(&read_file(&a.points)?, a.dim)?;
    let tess = delaunay_tessellate(&points)?;
    let mut sink: Box<dyn Write + '_> = match &a.out {
        Some(p) => Box::new(create_file(p)?),
        None => Box::new(&mut *out),
    };
    {
        let mut w = csv::Writer::from_writer(&mut sink);
        let mut header = vec!["simplex".to_string()];
        header.extend((0..=a.dim).map(|k| format!("v{k}")));
        header.push("volume".into());
        w.write_record(&header)
            .map_err(|e| CliError::Io(e.to_string()))?;
        for (id, s) in tess.simplices().iter().enumerate() {
            let mut row = vec![id.to_string()];
            row.extend(s.vertices().iter().map(ToString::to_string));
            row.push(tess.simplex_volume(id)?.to_string());
            w.write_record(&row)
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    drop(sink);
    let summary = format!(
        "{} points, {} simplices, total volume {}",
        points.len(),
        tess.len(),
        tess.total_volume()
    );
    if a.out.is_some() {
        writeln!(out, "{summary}")?;
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn interpolate(a: &InterpolateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (_, space) = load_space(&a.schema, &a.provider)?;
    let reading: Reading = inline_json(&a.reading)?;
    write_json(out, &space.interpolate(&reading)?)
}

fn trace(a: &TraceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (config, space) = load_space(&a.schema, &a.provider)?;
    let at: BTreeMap<String, f64> = match &a.at {
        Some(s) => inline_json(s)?,
        None => BTreeMap::new(),
    };
    let to_min = similarity_trace(&space, &a.axis, &at, a.steps, Reference::Min)?;
    let to_max = similarity_trace(&space, &a.axis, &at, a.steps, Reference::Max)?;
    let mut series: Vec<(&str, Trace)> = vec![
        ("interpolated_to_min", to_min),
        ("interpolated_to_max", to_max),
    ];
    if a.direct {
        let provider = config.build_provider();
        for (name, r) in [
            ("direct_to_min", Reference::Min),
            ("direct_to_max", Reference::Max),
        ] {
            series.push((
                name,
                direct_trace(&provider, space.schema(), &a.axis, &at, a.steps, r)?,
            ));
        }
    }
    let refs: Vec<(&str, &Trace)> = series.iter().map(|(n, t)| (*n, t)).collect();
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(a.out_dir.display(), e))?;
    let csv_path = a.out_dir.join(format!("{}_trace.csv", a.axis));
    write_traces_csv(create_file(&csv_path)?, &refs)?;
    let svg_path = a.out_dir.join(format!("{}_trace.svg", a.axis));
    fs::write(
        &svg_path,
        traces_svg(&format!("cosine similarity along {}", a.axis), &refs),
    )
    .map_err(|e| CliError::io(svg_path.display(), e))?;
    for (name, t) in &series {
        writeln!(out, "{name}: tau = {}", t.tau())?;
    }
    writeln!(
        out,
        "wrote {} and {}",
        csv_path.display(),
        svg_path.display()
    )?;
    Ok(())
}

pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Validation(format!("not a number: {s:?}")))
        })
        .collect()
}

fn bias_scan(a: &BiasScanArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = a.provider.load()?;
    let values = parse_values(&String::from_utf8_lossy(&read_file(&a.values)?))?;
    let scan = encoder_bias_scan(&config.build_provider(), &a.template, &values, a.bins)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(a.out_dir.display(), e))?;
    write_scatter_csv(create_file(&a.out_dir.join("bias_scatter.csv"))?, &scan)?;
    write_binned_csv(create_file(&a.out_dir.join("bias_binned.csv"))?, &scan)?;
    let svg = a.out_dir.join("bias_scan.svg");
    fs::write(
        &svg,
        scatter_svg("similarity against value difference", &scan),
    )
    .map_err(|e| CliError::io(svg.display(), e))?;
    writeln!(
        out,
        "{} values, {} pairs, {} non-empty bins; wrote bias_scatter.csv, bias_binned.csv, bias_scan.svg to {}",
        values.len(),
        scan.pairs.len(),
        scan.binned_mean.centers.len(),
        a.out_dir.display()
    )?;
    Ok(())
}

pub fn read_workload(text: &str) -> Result<Vec<Reading>, CliError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed)
            .map_err(|e| CliError::Validation(format!("workload: {e}")));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Validation(format!("workload line {}: {e}", i + 1)))
        })
        .collect()
}

fn bench(a: &BenchCacheArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (config, space) = load_space(&a.schema, &a.provider)?;
    let workload = match (&a.workload, a.drift) {
        (Some(path), _) => read_workload(&String::from_utf8_lossy(&read_file(path)?))?,
        (None, Some(n)) => drift_workload(space.schema(), n, a.step, a.seed),
        (None, None) => return Err(CliError::Validation("need --workload or --drift".into())),
    };
    let generator = config.build_generator(space.embedding_dim());
    let report = bench_cache(&space, &generator, &config.policy, &workload, a.seed)?;
    if a.json {
        return write_json(out, &report);
    }
    writeln!(out, "{:<24}{:>12}", "readings", report.items)?;
    writeln!(
        out,
        "{:<24}{:>12}",
        "iterations, no reuse", report.total_iterations_cold
    )?;
    writeln!(
        out,
        "{:<24}{:>12}",
        "iterations, reuse", report.total_iterations_warm
    )?;
    writeln!(out, "{:<24}{:>11.2}x", "speedup", report.speedup)?;
    writeln!(out, "{:<24}{:>11.1}%", "hit rate", report.hit_rate * 100.0)?;
    writeln!(
        out,
        "{:<24}{:>12.2}",
        "mean iterations", report.mean_iterations_warm
    )?;
    Ok(())
}

pub fn parse_weights(s: &str) -> Result<FactorWeights, CliError> {
    let v = parse_values(s)?;
    if v.len() != 3 {
        return Err(CliError::Validation(
            "--weights needs coherence,faithfulness,sensitivity".into(),
        ));
    }
    Ok(FactorWeights::new(v[0], v[1], v[2])?)
}

pub fn read_metrics(bytes: &[u8]) -> Result<Vec<ModelMetrics>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Validation(e.to_string()))?;
        if rec.len() != 4 {
            return Err(CliError::Validation(
                "metrics rows are model,coherence,faithfulness,sensitivity".into(),
            ));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| CliError::Validation(format!("not a number: {:?}", &rec[i])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Validation(format!("metric {v} outside [0, 1]")));
            }
            Ok(v)
        };
        rows.push(ModelMetrics::new(&rec[0], num(1)?, num(2)?, num(3)?));
    }
    Ok(rows)
}

fn score_survey(a: &ScoreSurveyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let metrics = match (&a.metrics, &a.responses) {
        (Some(path), _) => read_metrics(&read_file(path)?)?,
        (None, Some(path)) => {
            let responses = SurveyDataset::read_responses(read_file(path)?.as_slice())?;
            if responses.is_empty() {
                return Err(CliError::Validation("no survey responses".into()));
            }
            let data = SurveyDataset {
                responses,
                selections: BTreeMap::new(),
            };
            model_metrics(&normalize_survey(&data))?
        }
        (None, None) => return Err(CliError::Validation("need --responses or --metrics".into())),
    };
    let weights = match (&a.weights, &a.selections) {
        (Some(w), _) => parse_weights(w)?,
        (None, Some(path)) => {
            let selections = SurveyDataset::read_selections(read_file(path)?.as_slice())?;
            factor_weights(&selections, &KeyWeights::default())?
        }
        (None, None) => FactorWeights::PUBLISHED,
    };
    let overall = overall_score(&metrics, &weights);
    let row = improvement_row(&metrics, &weights, Some(2))?;
    eprintln!(
        "weights: coherence {:.3}, faithfulness {:.3}, sensitivity {:.3}",
        weights.coherence, weights.faithfulness, weights.sensitivity
    );
    match &a.out {
        Some(p) => {
            write_score_table(create_file(p)?, &metrics, &overall, &row)?;
            writeln!(out, "wrote {}", p.display())?;
        }
        None => write_score_table(&mut *out, &metrics, &overall, &row)?,
    }
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let mut config = match &a.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if a.config.is_none() {
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(crate::service::serve(config))
        .map_err(|e| CliError::Io(format!("service: {e}")))
}
