//! Text tables and JSON documents written by the commands.
//!
//! Text reports are pipe tables; JSON reports carry a `version` field.
//! Neither contains timestamps, so identical runs give identical bytes.

use std::fmt::Write as _;

use hybreg::hybrid::{Comparison, LocalModel, MetricRow, SkipCounts};
use hybreg::quality::ScanReport;
use hybreg::{ClusterKind, ErrorReport, HybridMode, HybridModel};
use serde::Serialize;

pub const REPORT_VERSION: u32 = 1;

pub const SCAN_COLUMNS: [&str; 5] = [
    "Clustering",
    "Best number of clusters",
    "Silhouette",
    "Calinski-Harabasz",
    "Davies-Bouldin",
];

pub const ERROR_ROWS: [&str; 6] = ["MSE", "MAE", "LMLS", "MAPE", "MASE", "SMAPE"];

pub const PARAMETER_ROWS: [&str; 3] = ["Number of neurons", "Activation function", "Solver"];

/// A pipe table. The first column is left aligned, the rest right aligned.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        let row: Vec<String> = cells.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                std::iter::once(&self.header[c])
                    .chain(self.rows.iter().map(|r| &r[c]))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
                    .max(3)
            })
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::from("|");
            for (c, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if c == 0 {
                    let _ = write!(s, " {cell:<w$} |");
                } else {
                    let _ = write!(s, " {cell:>w$} |");
                }
            }
            s.push('\n');
            s
        };
        let mut out = line(&self.header);
        out.push('|');
        for (c, w) in widths.iter().enumerate() {
            if c == 0 {
                let _ = write!(out, " {} |", "-".repeat(*w));
            } else {
                let _ = write!(out, " {}: |", "-".repeat(w - 1));
            }
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// Splits a rendered pipe-table line into trimmed cells.
pub fn cells(line: &str) -> Vec<String> {
    let inner = line.trim().trim_start_matches('|').trim_end_matches('|');
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), num)
}

// ---------------------------------------------------------------- scan

pub type KindScan = (ClusterKind, Result<ScanReport, String>);

pub fn scan_text(scans: &[KindScan]) -> String {
    let mut table = Table::new(SCAN_COLUMNS);
    let mut notes = Vec::new();
    for (kind, outcome) in scans {
        let name = kind.display_name();
        match outcome {
            Ok(scan) => {
                for row in &scan.rows {
                    if let Err(e) = &row.outcome {
                        notes.push(format!("{name}, k = {}: {e}", row.k));
                    }
                }
                match scan.best().and_then(|r| r.report().map(|q| (r.k, q))) {
                    Some((k, q)) => table.row([
                        name.to_string(),
                        k.to_string(),
                        num(q.silhouette),
                        num(q.calinski_harabasz),
                        num(q.davies_bouldin),
                    ]),
                    None => {
                        table.row([name, "failed", "-", "-", "-"]);
                        notes.push(format!("{name}: every k failed"));
                    }
                }
            }
            Err(e) => {
                table.row([name, "failed", "-", "-", "-"]);
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    let mut out = String::from(
        "Cluster count per technique: silhouette maximum, ties broken by Calinski-Harabasz.\n\n",
    );
    out.push_str(&table.render());
    push_notes(&mut out, &notes);
    out
}

fn push_notes(out: &mut String, notes: &[String]) {
    if !notes.is_empty() {
        out.push_str("\nFailures:\n");
        for n in notes {
            let _ = writeln!(out, "- {n}");
        }
    }
}

#[derive(Debug, Serialize)]
struct ScanDoc {
    version: u32,
    kinds: Vec<KindScanDoc>,
}

#[derive(Debug, Serialize)]
struct KindScanDoc {
    clustering: &'static str,
    best_k: Option<usize>,
    best_by_silhouette: Option<usize>,
    best_by_calinski_harabasz: Option<usize>,
    best_by_davies_bouldin: Option<usize>,
    error: Option<String>,
    rows: Vec<ScanRowDoc>,
}

#[derive(Debug, Serialize)]
struct ScanRowDoc {
    k: usize,
    silhouette: Option<f64>,
    calinski_harabasz: Option<f64>,
    davies_bouldin: Option<f64>,
    cluster_sizes: Option<Vec<usize>>,
    error: Option<String>,
}

pub fn scan_json(scans: &[KindScan]) -> String {
    let kinds = scans
        .iter()
        .map(|(kind, outcome)| match outcome {
            Ok(s) => KindScanDoc {
                clustering: kind.id(),
                best_k: s.best_k,
                best_by_silhouette: s.best_by_silhouette,
                best_by_calinski_harabasz: s.best_by_calinski_harabasz,
                best_by_davies_bouldin: s.best_by_davies_bouldin,
                error: None,
                rows: s
                    .rows
                    .iter()
                    .map(|r| match &r.outcome {
                        Ok((q, a)) => ScanRowDoc {
                            k: r.k,
                            silhouette: Some(q.silhouette),
                            calinski_harabasz: Some(q.calinski_harabasz),
                            davies_bouldin: Some(q.davies_bouldin),
                            cluster_sizes: Some(a.sizes().to_vec()),
                            error: None,
                        },
                        Err(e) => ScanRowDoc {
                            k: r.k,
                            silhouette: None,
                            calinski_harabasz: None,
                            davies_bouldin: None,
                            cluster_sizes: None,
                            error: Some(e.clone()),
                        },
                    })
                    .collect(),
            },
            Err(e) => KindScanDoc {
                clustering: kind.id(),
                best_k: None,
                best_by_silhouette: None,
                best_by_calinski_harabasz: None,
                best_by_davies_bouldin: None,
                error: Some(e.clone()),
                rows: Vec::new(),
            },
        })
        .collect();
    to_pretty(&ScanDoc {
        version: REPORT_VERSION,
        kinds,
    })
}

// ------------------------------------------------------- error reports

fn metric_value(row: &MetricRow, name: &str) -> Option<f64> {
    let i = MetricRow::NAMES.iter().position(|n| *n == name)?;
    row.values()[i]
}

fn cluster_header(k: usize, first: &str, last: Option<&str>) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((1..=k).map(|j| j.to_string()))
        .chain(last.map(str::to_string))
        .collect()
}

/// Per-cluster error table (metric rows by cluster columns plus the
/// weighted average) followed by NMSE, sizes and skip counts.
pub fn error_text(kind: ClusterKind, report: &ErrorReport) -> String {
    let k = report.k();
    let mut out = format!(
        "{} with {k} cluster{}: validation errors in target units\n\n",
        kind.display_name(),
        if k == 1 { "" } else { "s" }
    );
    let header = cluster_header(k, "Cluster", Some("Weighted average"));
    let mut main = Table::new(header.clone());
    for name in ERROR_ROWS.iter().copied().chain(["NMSE"]) {
        let mut row = vec![name.to_string()];
        row.extend(
            report
                .per_cluster
                .iter()
                .map(|r| opt_num(r.as_ref().and_then(|r| metric_value(r, name)))),
        );
        row.push(opt_num(metric_value(&report.weighted_average, name)));
        if name == "NMSE" {
            out.push_str(&main.render());
            out.push('\n');
            main = Table::new(header.clone());
        }
        main.row(row);
    }
    let total: usize = report.cluster_sizes.iter().sum();
    let mut sizes = vec!["Validation samples".to_string()];
    sizes.extend(report.cluster_sizes.iter().map(usize::to_string));
    sizes.push(total.to_string());
    main.row(sizes);
    let skip_row = |label: &str, f: fn(&SkipCounts) -> usize| {
        let mut row = vec![label.to_string()];
        row.extend(report.skipped.iter().map(|s| f(s).to_string()));
        row.push(report.skipped.iter().map(f).sum::<usize>().to_string());
        row
    };
    main.row(skip_row("Skipped (MAPE)", |s| s.mape));
    main.row(skip_row("Skipped (SMAPE)", |s| s.smape));
    main.row(skip_row("Skipped (NMSE)", |s| s.nmse));
    out.push_str(&main.render());
    out.push_str(
        "\nMAPE is in percent. MASE divides MAE by the mean absolute deviation of the \
         cluster's training targets from their mean.\n",
    );
    out
}

/// Best grid parameters: one column per local model.
pub fn parameter_text(kind: ClusterKind, model: &HybridModel) -> String {
    let mut out = format!("{}\n", kind.display_name());
    let header: Vec<String> = match model.mode {
        HybridMode::LocalModels => {
            cluster_header(model.locals.len(), "Grid Parameter / Cluster", None)
        }
        HybridMode::LabelFeature => vec!["Grid Parameter / Cluster".into(), "all".into()],
    };
    let mut t = Table::new(header);
    let row = |label: &str, f: &dyn Fn(&LocalModel) -> String| {
        std::iter::once(label.to_string())
            .chain(model.locals.iter().map(f))
            .collect::<Vec<_>>()
    };
    t.row(row(PARAMETER_ROWS[0], &|l| l.winner.neurons.to_string()));
    t.row(row(PARAMETER_ROWS[1], &|l| l.winner.activation.to_string()));
    t.row(row(PARAMETER_ROWS[2], &|l| l.winner.solver.to_string()));
    out.push_str(&t.render());
    out
}

#[derive(Debug, Serialize)]
pub struct ErrorDoc {
    pub clustering: &'static str,
    pub k: usize,
    pub mode: &'static str,
    pub per_cluster: Vec<ClusterDoc>,
    pub weighted_average: MetricRow,
    pub grid_winner: Vec<WinnerDoc>,
}

#[derive(Debug, Serialize)]
pub struct ClusterDoc {
    pub cluster: usize,
    pub size: usize,
    pub metrics: Option<MetricRow>,
    pub skipped: SkipCounts,
}

#[derive(Debug, Serialize)]
pub struct WinnerDoc {
    /// 1-based cluster, `None` for the single label-feature network.
    pub cluster: Option<usize>,
    pub neurons: usize,
    pub activation: String,
    pub solver: String,
    pub cv_mse: f64,
    pub train_size: usize,
}

pub fn error_doc(kind: ClusterKind, model: &HybridModel, report: &ErrorReport) -> ErrorDoc {
    ErrorDoc {
        clustering: kind.id(),
        k: report.k(),
        mode: model.mode.id(),
        per_cluster: (0..report.k())
            .map(|j| ClusterDoc {
                cluster: j + 1,
                size: report.cluster_sizes[j],
                metrics: report.per_cluster[j],
                skipped: report.skipped[j],
            })
            .collect(),
        weighted_average: report.weighted_average,
        grid_winner: model
            .locals
            .iter()
            .enumerate()
            .map(|(j, l)| WinnerDoc {
                cluster: (model.mode == HybridMode::LocalModels).then_some(j + 1),
                neurons: l.winner.neurons,
                activation: l.winner.activation.to_string(),
                solver: l.winner.solver.to_string(),
                cv_mse: l.cv_mse,
                train_size: l.train_size,
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    version: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn error_json(kind: ClusterKind, model: &HybridModel, report: &ErrorReport) -> String {
    to_pretty(&Versioned {
        version: REPORT_VERSION,
        body: &error_doc(kind, model, report),
    })
}

// ----------------------------------------------------------- compare

pub fn compare_text(cmp: &Comparison, models: &[Option<HybridModel>]) -> String {
    let mut header = vec!["Clustering".to_string(), "k".to_string()];
    header.extend(MetricRow::NAMES.iter().map(|s| s.to_string()));
    header.push("MSE gap to best (%)".into());
    let mut t = Table::new(header);
    let mut notes = Vec::new();
    for e in &cmp.entries {
        let name = e.kind.display_name();
        match &e.outcome {
            Ok(r) => {
                let mut row = vec![name.to_string(), r.k().to_string()];
                row.extend(r.weighted_average.values().iter().map(|v| opt_num(*v)));
                row.push(opt_num(e.mse_delta_percent));
                t.row(row);
            }
            Err(msg) => {
                let mut row = vec![name.to_string(), "-".to_string()];
                row.extend(std::iter::repeat_n("-".to_string(), MetricRow::NAMES.len()));
                row.push("failed".into());
                t.row(row);
                notes.push(format!("{name}: {msg}"));
            }
        }
    }
    let mut out = String::from("Weighted validation errors per clustering technique\n\n");
    out.push_str(&t.render());
    if let Some(b) = cmp.best {
        let _ = writeln!(
            out,
            "\nLowest weighted MSE: {}",
            cmp.entries[b].kind.display_name()
        );
    }
    push_notes(&mut out, &notes);
    for (e, m) in cmp.entries.iter().zip(models) {
        if let (Ok(r), Some(_)) = (&e.outcome, m) {
            out.push('\n');
            out.push_str(&error_text(e.kind, r));
        }
    }
    out.push_str("\nBest grid parameters\n\n");
    for (e, m) in cmp.entries.iter().zip(models) {
        if let Some(m) = m {
            out.push_str(&parameter_text(e.kind, m));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct CompareDoc {
    version: u32,
    best: Option<&'static str>,
    entries: Vec<CompareEntryDoc>,
}

#[derive(Debug, Serialize)]
struct CompareEntryDoc {
    clustering: &'static str,
    error: Option<String>,
    mse_delta_percent: Option<f64>,
    report: Option<ErrorDoc>,
}

pub fn compare_json(cmp: &Comparison, models: &[Option<HybridModel>]) -> String {
    let entries = cmp
        .entries
        .iter()
        .zip(models)
        .map(|(e, m)| CompareEntryDoc {
            clustering: e.kind.id(),
            error: e.outcome.as_ref().err().cloned(),
            mse_delta_percent: e.mse_delta_percent,
            report: match (&e.outcome, m) {
                (Ok(r), Some(m)) => Some(error_doc(e.kind, m, r)),
                _ => None,
            },
        })
        .collect();
    to_pretty(&CompareDoc {
        version: REPORT_VERSION,
        best: cmp.best.map(|b| cmp.entries[b].kind.id()),
        entries,
    })
}

pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report documents serialize");
    s.push('\n');
    s
}
