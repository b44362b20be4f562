use std::path::{Path, PathBuf};
use std::process::Command as Process;

use hybreg::mlp::{Activation, Solver, TrainLimits};
use hybreg::{ClusterKind, GridSpec};
use hybreg_cli::commands::{self, FIT_POINTS};
use hybreg_cli::report::{cells, PARAMETER_ROWS, SCAN_COLUMNS};
use hybreg_cli::{CliError, DataSource, ModelArchive, PlotKind, ReportFormat, RunConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_grid(seed: u64) -> GridSpec {
    GridSpec {
        neurons: 6..=6,
        activations: vec![Activation::Tanh],
        solvers: vec![Solver::Lbfgs],
        folds: 3,
        seed,
        limits: TrainLimits {
            max_iter: 150,
            ..Default::default()
        },
    }
}

fn config(out: &Path, n: usize, kind: ClusterKind, k: usize) -> RunConfig {
    RunConfig {
        source: Some(DataSource::Synthetic(n)),
        kinds: vec![kind],
        k,
        k_max: 6,
        grid: small_grid(42),
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

fn table_lines(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| l.starts_with('|') && !l.starts_with("| --"))
        .map(cells)
        .collect()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn features_csv(path: &Path, x: &Array2<f64>) {
    let mut s = String::from("s1_temp,s2_temp,flow_rate,solar_radiation\n");
    for r in x.rows() {
        let row: Vec<String> = r.iter().map(f64::to_string).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

fn read_predictions(path: &Path) -> Vec<(f64, usize)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["prediction", "cluster"]);
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn train_writes_archive_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let t = commands::train(&config(dir.path(), 2000, ClusterKind::KMeans, 4)).unwrap();
    assert_eq!(t.model.locals.len(), 4);

    let text = String::from_utf8(read(dir.path().join(commands::ERRORS_TEXT))).unwrap();
    let rows = table_lines(&text);
    assert_eq!(
        rows[0],
        vec!["Cluster", "1", "2", "3", "4", "Weighted average"]
    );
    let names: Vec<&str> = rows[1..7].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["MSE", "MAE", "LMLS", "MAPE", "MASE", "SMAPE"]);

    let json: serde_json::Value =
        serde_json::from_slice(&read(dir.path().join(commands::ERRORS_JSON))).unwrap();
    for field in [
        "clustering",
        "k",
        "per_cluster",
        "weighted_average",
        "grid_winner",
    ] {
        assert!(json.get(field).is_some(), "missing {field}");
    }
    assert_eq!(json["k"], 4);
    assert_eq!(json["per_cluster"].as_array().unwrap().len(), 4);

    let params = String::from_utf8(read(dir.path().join(commands::PARAMS_TEXT))).unwrap();
    let rows = table_lines(&params);
    assert_eq!(rows.len(), 4);
    for (row, name) in rows[1..].iter().zip(PARAMETER_ROWS) {
        assert_eq!(row[0], name);
        assert_eq!(row.len(), 5);
    }
    // The grid only offered tanh and lbfgs.
    assert!(rows[2][1..].iter().all(|c| c == "tanh"));
    assert!(rows[3][1..].iter().all(|c| c == "lbfgs"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let mut c = config(dir, 500, ClusterKind::GaussianMixture, 3);
        c.kinds = vec![ClusterKind::GaussianMixture, ClusterKind::KMeans];
        commands::scan(&c).unwrap();
        c.kinds = vec![ClusterKind::GaussianMixture];
        commands::train(&c).unwrap();
        commands::plot(PlotKind::Lda, dir, dir).unwrap();
        commands::plot(PlotKind::Fit, dir, dir).unwrap();
    }
    let mut compared = 0;
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        // The archive carries a creation timestamp; everything else is pure.
        if name == commands::ARCHIVE_FILE {
            continue;
        }
        assert_eq!(
            read(a.path().join(&name)),
            read(b.path().join(&name)),
            "{name:?}"
        );
        compared += 1;
    }
    assert!(compared >= 12, "{compared}");
}

#[test]
fn archive_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let t = commands::train(&config(dir.path(), 600, ClusterKind::Agglomerative, 3)).unwrap();
    let loaded = ModelArchive::load(&dir.path().join(commands::ARCHIVE_FILE)).unwrap();
    assert_eq!(loaded.model, t.model);
    assert_eq!(loaded.provenance.k, 3);

    // Probe rows spread over and beyond the training range.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lo = [5.0, 5.0, 0.0, 0.0];
    let hi = [85.0, 90.0, 750.0, 1000.0];
    let probe = Array2::from_shape_fn((100, 4), |(_, c)| rng.random_range(lo[c]..hi[c]));
    let want = t.model.predict_batch(&probe).unwrap();
    let got = loaded.model.predict_batch(&probe).unwrap();
    for (w, g) in want.iter().zip(&got) {
        assert_eq!(w.value.to_bits(), g.value.to_bits());
        assert_eq!(w.cluster, g.cluster);
    }

    // The same through the predictions file.
    let input = dir.path().join("probe.csv");
    features_csv(&input, &probe);
    commands::predict(&dir.path().join(commands::ARCHIVE_FILE), &input, dir.path()).unwrap();
    let rows = read_predictions(&dir.path().join(commands::PREDICTIONS_FILE));
    assert_eq!(rows.len(), 100);
    for ((v, c), w) in rows.iter().zip(&want) {
        assert_eq!(v.to_bits(), w.value.to_bits());
        assert_eq!(*c, w.cluster + 1);
    }
}

#[test]
fn single_cluster_archive_predicts_like_global_network() {
    let dir = tempfile::tempdir().unwrap();
    let t = commands::train(&config(dir.path(), 300, ClusterKind::KMeans, 1)).unwrap();
    let input = dir.path().join("train.csv");
    features_csv(&input, t.train.features());
    commands::predict(&dir.path().join(commands::ARCHIVE_FILE), &input, dir.path()).unwrap();
    let rows = read_predictions(&dir.path().join(commands::PREDICTIONS_FILE));
    let scaled = t.model.scaler.transform(t.train.features()).unwrap();
    let net = &t.model.locals[0].mlp;
    for ((v, c), x) in rows.iter().zip(scaled.rows()) {
        let direct = t
            .model
            .target_scaler
            .unscale(net.forward(&x.to_vec()).unwrap());
        assert_eq!(v.to_bits(), direct.to_bits());
        assert_eq!(*c, 1);
    }
}

#[test]
fn predict_handles_empty_and_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    commands::train(&config(dir.path(), 200, ClusterKind::KMeans, 2)).unwrap();
    let archive = dir.path().join(commands::ARCHIVE_FILE);

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "s1_temp,s2_temp,flow_rate,solar_radiation\n").unwrap();
    commands::predict(&archive, &empty, dir.path()).unwrap();
    assert_eq!(
        read(dir.path().join(commands::PREDICTIONS_FILE)),
        b"prediction,cluster\n"
    );

    let missing = dir.path().join("missing.csv");
    std::fs::write(&missing, "s1_temp,s2_temp,solar_radiation\n1,2,3\n").unwrap();
    let err = commands::predict(&archive, &missing, dir.path()).unwrap_err();
    assert!(err.to_string().contains("flow_rate"), "{err}");
    assert_eq!(err.exit_code(), 2);

    let text = std::fs::read_to_string(&archive).unwrap();
    let old = dir.path().join("old.json");
    std::fs::write(
        &old,
        text.replacen("\"format_version\":1", "\"format_version\":0", 1),
    )
    .unwrap();
    let err = commands::predict(&old, &empty, dir.path()).unwrap_err();
    assert!(err.to_string().contains("version 0"), "{err}");
}

fn svg_root_checks(path: &Path) -> String {
    let text = String::from_utf8(read(path)).unwrap();
    let doc =
        roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert!(root.attribute("viewBox").is_some());
    text
}

#[test]
fn fit_plots_follow_cluster_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let t = commands::train(&config(dir.path(), 800, ClusterKind::KMeans, 4)).unwrap();
    let written = commands::plot(PlotKind::Fit, dir.path(), dir.path()).unwrap();
    assert_eq!(written.0.len(), 4);
    assert!(t.report.cluster_sizes.iter().any(|&s| s < FIT_POINTS));
    for (j, path) in written.0.iter().enumerate() {
        let text = svg_root_checks(path);
        let doc = roxmltree::Document::parse(&text).unwrap();
        let lines: Vec<_> = doc
            .descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .collect();
        assert_eq!(lines.len(), 2);
        let expected = t.report.cluster_sizes[j].min(FIT_POINTS);
        for l in &lines {
            let pts = l.attribute("points").unwrap();
            assert_eq!(pts.split_whitespace().count(), expected);
        }
        assert_eq!(lines[0].attribute("stroke"), Some("blue"));
        assert_eq!(lines[1].attribute("stroke"), Some("red"));
        assert!(doc
            .descendants()
            .any(|n| n.attribute("class") == Some("legend")));
    }
}

#[test]
fn lda_plots_need_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let err = commands::plot(PlotKind::Lda, dir.path(), dir.path()).unwrap_err();
    assert!(err.to_string().contains("run `hybreg scan`"), "{err}");

    let mut c = config(dir.path(), 300, ClusterKind::KMeans, 4);
    c.kinds = ClusterKind::ALL.to_vec();
    commands::scan(&c).unwrap();
    let written = commands::plot(PlotKind::Lda, dir.path(), dir.path()).unwrap();
    assert_eq!(written.0.len(), 4);
    for path in &written.0 {
        let text = svg_root_checks(path);
        assert_eq!(
            text.matches("<circle cx").count() - 4,
            300,
            "{}",
            path.display()
        );
    }
}

#[test]
fn scan_table_columns() {
    let dir = tempfile::tempdir().unwrap();
    let s = commands::scan(&config(dir.path(), 400, ClusterKind::Spectral, 4)).unwrap();
    assert_eq!(s.scans.len(), 1);
    let text = String::from_utf8(read(dir.path().join(commands::SCAN_TEXT))).unwrap();
    let rows = table_lines(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], SCAN_COLUMNS);
    assert_eq!(rows[1][0], "Spectral Clustering");
}

#[test]
fn unwritable_output_fails_before_reading_data() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let c = RunConfig {
        source: Some(DataSource::Csv(dir.path().join("does_not_exist.csv"))),
        out: blocker.join("out"),
        ..RunConfig::default()
    };
    for result in [
        commands::scan(&c).map(|_| ()),
        commands::train(&c).map(|_| ()),
        commands::compare(&c).map(|_| ()),
    ] {
        assert!(matches!(result, Err(CliError::Output { .. })));
    }
}

#[test]
fn comparison_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), 400, ClusterKind::KMeans, 4);
    c.kinds = ClusterKind::ALL.to_vec();
    c.format = ReportFormat::Json;
    let out = commands::compare(&c).unwrap();
    assert_eq!(out.comparison.entries.len(), 4);
    let json: serde_json::Value =
        serde_json::from_slice(&read(dir.path().join(commands::COMPARE_JSON))).unwrap();
    assert_eq!(json["entries"].as_array().unwrap().len(), 4);
    assert!(!dir.path().join(commands::COMPARE_TEXT).exists());

    // Eleven rows cannot hold four clusters with three folds each.
    let mut c = config(dir.path(), 14, ClusterKind::KMeans, 4);
    c.kinds = vec![ClusterKind::KMeans, ClusterKind::GaussianMixture];
    c.validation_fraction = 0.2;
    let out = commands::compare(&c).unwrap();
    assert!(out.comparison.entries.iter().all(|e| e.outcome.is_err()));
    let text = String::from_utf8(read(dir.path().join(commands::COMPARE_TEXT))).unwrap();
    assert!(text.contains("Failures:"), "{text}");
}

fn binary() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_hybreg"))
}

#[test]
fn binary_exit_codes_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = |args: &[&str]| {
        Process::new(binary())
            .args(args)
            .output()
            .unwrap()
            .status
            .code()
            .unwrap()
    };
    assert_eq!(status(&["--help"]), 0);
    assert_eq!(status(&["frobnicate"]), 1);
    assert_eq!(status(&["train", "--folds", "x"]), 1);
    assert_eq!(status(&["scan", "--data", "a.csv", "--synth", "10"]), 1);
    assert_eq!(status(&["scan"]), 1);
    let missing = dir.path().join("nope.csv");
    assert_eq!(
        status(&[
            "scan",
            "--data",
            missing.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        2
    );

    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "synth = 200\nkind = kmeans\nk_min = 2\nk_max = 3\nformat = text\nout = {}\n",
            dir.path().join("ignored").display()
        ),
    )
    .unwrap();
    let o = out.to_str().unwrap();
    assert_eq!(
        status(&["scan", "--config", conf.to_str().unwrap(), "--out", o]),
        0
    );
    assert!(out.join(commands::SCAN_TEXT).exists());
    assert!(!out.join(commands::SCAN_JSON).exists());
    assert!(!dir.path().join("ignored").exists());
}
