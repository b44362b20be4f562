use std::path::{Path, PathBuf};

use hybreg::clustering::ClusterAssignment;
use hybreg::dataset::{
    ingest_csv, read_columns, split, synthesize, BadRowPolicy, Schema, FEATURE_COLUMNS,
    TARGET_COLUMN,
};
use hybreg::hybrid::{compare_methods, Comparison};
use hybreg::lda::{fit_lda, LdaProjection};
use hybreg::quality::scan_k_with;
use hybreg::{
    error_report, train_hybrid, ClusterConfig, ClusterKind, Dataset, ErrorReport, HybridConfig,
    HybridModel, ScalerParams,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::archive::{ArchiveProvenance, ModelArchive};
use crate::config::{DataSource, PlotKind, RunConfig};
use crate::error::{CliError, Result};
use crate::fsio::{prepare_output_dir, Written};
use crate::report::{self, KindScan};
use crate::svg;

pub const SYNTH_FILE: &str = "synth.csv";
pub const SCAN_TEXT: &str = "scan.txt";
pub const SCAN_JSON: &str = "scan.json";
pub const ERRORS_TEXT: &str = "errors.txt";
pub const ERRORS_JSON: &str = "errors.json";
pub const PARAMS_TEXT: &str = "params.txt";
pub const ARCHIVE_FILE: &str = "model.json";
pub const COMPARE_TEXT: &str = "compare.txt";
pub const COMPARE_JSON: &str = "compare.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

/// Points drawn per series in a fit chart.
pub const FIT_POINTS: usize = 100;

const ARTIFACT_VERSION: u32 = 1;

pub fn lda_artifact_name(kind: ClusterKind) -> String {
    format!("lda_{}.json", kind.id())
}

pub fn fit_artifact_name(kind: ClusterKind) -> String {
    format!("fit_{}.json", kind.id())
}

/// A fitted 2-D projection and the projected training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaArtifact {
    pub version: u32,
    pub clustering: ClusterKind,
    pub k: usize,
    /// Command that produced the artifact.
    pub source: String,
    pub projection: LdaProjection,
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
}

impl LdaArtifact {
    fn build(
        kind: ClusterKind,
        source: &str,
        x: &Array2<f64>,
        assignment: &ClusterAssignment,
    ) -> hybreg::Result<Self> {
        let projection = fit_lda(x, assignment)?;
        let projected = projection.project(x)?;
        Ok(Self {
            version: ARTIFACT_VERSION,
            clustering: kind,
            k: assignment.k(),
            source: source.to_string(),
            points: projected.rows().into_iter().map(|r| [r[0], r[1]]).collect(),
            labels: assignment.labels().to_vec(),
            projection,
        })
    }
}

/// Validation targets and predictions grouped by cluster, in sample order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub version: u32,
    pub clustering: ClusterKind,
    pub k: usize,
    pub clusters: Vec<FitSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSeries {
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl FitArtifact {
    fn build(kind: ClusterKind, model: &HybridModel, validation: &Dataset) -> hybreg::Result<Self> {
        let clusters = model
            .groups(validation)?
            .into_iter()
            .map(|g| FitSeries {
                observed: g.observed,
                predicted: g.predicted,
            })
            .collect();
        Ok(Self {
            version: ARTIFACT_VERSION,
            clustering: kind,
            k: model.k(),
            clusters,
        })
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    report::to_pretty(value).into_bytes()
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Data(format!("csv: {e}")))
}

fn load_data(config: &RunConfig) -> Result<(Dataset, String)> {
    match &config.source {
        Some(DataSource::Csv(path)) => Ok((
            ingest_csv(path, &Schema::default(), BadRowPolicy::Error)?,
            path.display().to_string(),
        )),
        Some(DataSource::Synthetic(n)) => Ok((
            synthesize(*n, config.seed)?.dataset,
            format!("synthetic:{n}"),
        )),
        None => Err(CliError::Usage(
            "one of --data <csv> or --synth <rows> is required".into(),
        )),
    }
}

fn hybrid_config(config: &RunConfig, kind: ClusterKind) -> HybridConfig {
    HybridConfig {
        kind,
        k: config.k,
        seed: config.seed,
        grid: config.grid.clone(),
        mode: config.mode,
        linkage: config.linkage,
        gamma: config.gamma,
    }
}

pub fn synth(n: usize, config: &RunConfig) -> Result<Written> {
    prepare_output_dir(&config.out)?;
    let s = synthesize(n, config.seed)?;
    let mut header: Vec<&str> = FEATURE_COLUMNS.to_vec();
    header.extend([TARGET_COLUMN, "regime"]);
    let d = &s.dataset;
    let rows = d
        .features()
        .rows()
        .into_iter()
        .zip(d.target())
        .zip(&s.regimes)
        .map(|((x, y), r)| {
            x.iter()
                .chain(std::iter::once(y))
                .map(f64::to_string)
                .chain(std::iter::once(r.to_string()))
                .collect()
        });
    let mut written = Written::default();
    written.write(config.out.join(SYNTH_FILE), &csv_bytes(&header, rows)?)?;
    Ok(written)
}

pub struct ScanOutcome {
    pub scans: Vec<KindScan>,
    pub written: Written,
}

/// Scans `k_min..=k_max` for each kind on the MinMax-scaled dataset and
/// stores the LDA projection of each kind's best clustering.
pub fn scan(config: &RunConfig) -> Result<ScanOutcome> {
    prepare_output_dir(&config.out)?;
    let (data, _) = load_data(config)?;
    let x = ScalerParams::fit(data.features())?.transform(data.features())?;
    let mut scans = Vec::new();
    let mut artifacts = Vec::new();
    for kind in config.kinds_or(&ClusterKind::ALL) {
        log::info!(
            "scanning {kind} over k = {}..={}",
            config.k_min,
            config.k_max
        );
        let template = ClusterConfig {
            linkage: config.linkage,
            gamma: config.gamma,
            ..ClusterConfig::new(kind, config.k_min, config.seed)
        };
        let outcome =
            scan_k_with(&x, &template, config.k_min..=config.k_max).map_err(|e| e.to_string());
        if let Some((_, assignment)) = outcome
            .as_ref()
            .ok()
            .and_then(|s| s.best())
            .and_then(|r| r.outcome.as_ref().ok())
        {
            match LdaArtifact::build(kind, "scan", &x, assignment) {
                Ok(a) => artifacts.push(a),
                Err(e) => log::warn!("{kind}: no LDA projection: {e}"),
            }
        }
        scans.push((kind, outcome));
    }
    let mut written = Written::default();
    if config.format.text() {
        written.write(
            config.out.join(SCAN_TEXT),
            report::scan_text(&scans).as_bytes(),
        )?;
    }
    if config.format.json() {
        written.write(
            config.out.join(SCAN_JSON),
            report::scan_json(&scans).as_bytes(),
        )?;
    }
    for a in &artifacts {
        written.write(
            config.out.join(lda_artifact_name(a.clustering)),
            &json_bytes(a),
        )?;
    }
    Ok(ScanOutcome { scans, written })
}

pub struct TrainOutcome {
    pub kind: ClusterKind,
    pub model: HybridModel,
    pub report: ErrorReport,
    pub train: Dataset,
    pub validation: Dataset,
    pub written: Written,
}

/// Split, scale, cluster, grid-search and train; then evaluate on the
/// validation split and persist the archive, reports and plot artifacts.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    let kinds = config.kinds_or(&[ClusterKind::KMeans]);
    let [kind] = kinds[..] else {
        return Err(CliError::Usage(
            "train takes a single --kind; use `compare` for several".into(),
        ));
    };
    prepare_output_dir(&config.out)?;
    let (data, source) = load_data(config)?;
    let (train, validation) = split(&data, &config.split())?;
    let model = train_hybrid(&train, &hybrid_config(config, kind))?;
    let report = error_report(&model, &validation)?;

    let mut written = Written::default();
    if config.format.text() {
        written.write(
            config.out.join(ERRORS_TEXT),
            report::error_text(kind, &report).as_bytes(),
        )?;
        written.write(
            config.out.join(PARAMS_TEXT),
            report::parameter_text(kind, &model).as_bytes(),
        )?;
    }
    if config.format.json() {
        written.write(
            config.out.join(ERRORS_JSON),
            report::error_json(kind, &model, &report).as_bytes(),
        )?;
    }
    let fit = FitArtifact::build(kind, &model, &validation)?;
    written.write(config.out.join(fit_artifact_name(kind)), &json_bytes(&fit))?;
    if model.k() > 1 {
        let x = model.scaler.transform(train.features())?;
        let routed = model.cluster_model.route_all(&x)?;
        match ClusterAssignment::new(routed, model.k())
            .and_then(|a| LdaArtifact::build(kind, "train", &x, &a))
        {
            Ok(a) => written.write(config.out.join(lda_artifact_name(kind)), &json_bytes(&a))?,
            Err(e) => log::warn!("{kind}: no LDA projection: {e}"),
        }
    }
    let provenance = ArchiveProvenance::now(
        source,
        &model,
        kind,
        config.seed,
        config.grid.clone(),
        config.split(),
    );
    let archive_path = config.out.join(ARCHIVE_FILE);
    ModelArchive::new(model.clone(), provenance).save(&archive_path)?;
    written.0.push(archive_path);

    Ok(TrainOutcome {
        kind,
        model,
        report,
        train,
        validation,
        written,
    })
}

/// Reads the four feature columns of `input` and writes one prediction and
/// the 1-based routed cluster per row.
pub fn predict(archive: &Path, input: &Path, out: &Path) -> Result<Written> {
    prepare_output_dir(out)?;
    let model = ModelArchive::load(archive)?.model;
    let columns: Vec<String> = FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let x = read_columns(input, &columns, BadRowPolicy::Error)?;
    let predictions = if x.nrows() == 0 {
        Vec::new()
    } else {
        model.predict_batch(&x)?
    };
    let rows = predictions
        .iter()
        .map(|p| vec![p.value.to_string(), (p.cluster + 1).to_string()]);
    let mut written = Written::default();
    written.write(
        out.join(PREDICTIONS_FILE),
        &csv_bytes(&["prediction", "cluster"], rows)?,
    )?;
    Ok(written)
}

fn artifacts_with_prefix(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(_) => return Ok(Vec::new()),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

fn read_artifact<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("malformed artifact {}: {e}", path.display())))
}

/// Renders SVG charts from the artifacts in `artifacts` into `out`.
pub fn plot(what: PlotKind, artifacts: &Path, out: &Path) -> Result<Written> {
    prepare_output_dir(out)?;
    let mut written = Written::default();
    match what {
        PlotKind::Lda => {
            let paths = artifacts_with_prefix(artifacts, "lda_")?;
            if paths.is_empty() {
                return Err(CliError::Data(format!(
                    "no LDA projection in {}; run `hybreg scan` or `hybreg train` first",
                    artifacts.display()
                )));
            }
            for path in paths {
                let a: LdaArtifact = read_artifact(&path)?;
                let title = format!(
                    "{}: 2-D LDA projection, {} clusters",
                    a.clustering.display_name(),
                    a.k
                );
                let svg = svg::scatter(&title, &a.points, &a.labels, a.k);
                written.write(
                    out.join(format!("lda_{}.svg", a.clustering.id())),
                    svg.as_bytes(),
                )?;
            }
        }
        PlotKind::Fit => {
            let paths = artifacts_with_prefix(artifacts, "fit_")?;
            if paths.is_empty() {
                return Err(CliError::Data(format!(
                    "no fitted model results in {}; run `hybreg train` or `hybreg compare` first",
                    artifacts.display()
                )));
            }
            for path in paths {
                let a: FitArtifact = read_artifact(&path)?;
                for (j, s) in a.clusters.iter().enumerate() {
                    let m = s.observed.len().min(FIT_POINTS);
                    let title = format!(
                        "{}: cluster {} of {}, first {m} validation samples",
                        a.clustering.display_name(),
                        j + 1,
                        a.k
                    );
                    let svg =
                        svg::fit_chart(&title, TARGET_COLUMN, &s.observed[..m], &s.predicted[..m]);
                    written.write(
                        out.join(format!("fit_{}_cluster{}.svg", a.clustering.id(), j + 1)),
                        svg.as_bytes(),
                    )?;
                }
            }
        }
    }
    Ok(written)
}

pub struct CompareOutcome {
    pub comparison: Comparison,
    pub models: Vec<Option<HybridModel>>,
    pub written: Written,
}

/// Trains one hybrid per kind on the same split and compares them.
pub fn compare(config: &RunConfig) -> Result<CompareOutcome> {
    prepare_output_dir(&config.out)?;
    let (data, _) = load_data(config)?;
    let (train, validation) = split(&data, &config.split())?;
    let kinds = config.kinds_or(&ClusterKind::ALL);
    let base = hybrid_config(config, kinds[0]);
    let (comparison, models) = compare_methods(&train, &validation, &kinds, &base);

    let mut written = Written::default();
    if config.format.text() {
        written.write(
            config.out.join(COMPARE_TEXT),
            report::compare_text(&comparison, &models).as_bytes(),
        )?;
    }
    if config.format.json() {
        written.write(
            config.out.join(COMPARE_JSON),
            report::compare_json(&comparison, &models).as_bytes(),
        )?;
    }
    for (e, m) in comparison.entries.iter().zip(&models) {
        if let Some(m) = m {
            let fit = FitArtifact::build(e.kind, m, &validation)?;
            written.write(
                config.out.join(fit_artifact_name(e.kind)),
                &json_bytes(&fit),
            )?;
        }
    }
    Ok(CompareOutcome {
        comparison,
        models,
        written,
    })
}
