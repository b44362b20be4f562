//! Cluster-then-regress models: one MLP per cluster, or one MLP with the
//! cluster id as an extra input.

mod compare;
mod metrics;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

pub use compare::{compare_methods, Comparison, ComparisonEntry};
pub use metrics::{
    naive_mean_scale, regression_metrics, weighted_average, ErrorReport, Group, MetricRow,
    SkipCounts,
};

use crate::clustering::{
    self, ClusterAssignment, ClusterConfig, ClusterKind, ClusterModel, Linkage,
};
use crate::dataset::{Dataset, ScalerParams, TargetScaler};
use crate::error::{check_dim, Error, Result};
use crate::mlp::{grid_search, train, Candidate, GridSpec, MlpModel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridMode {
    /// One network per cluster.
    #[default]
    LocalModels,
    /// A single network whose last input is `cluster / (k - 1)`.
    LabelFeature,
}

impl HybridMode {
    pub fn id(self) -> &'static str {
        match self {
            HybridMode::LocalModels => "local_models",
            HybridMode::LabelFeature => "label_feature",
        }
    }
}

impl fmt::Display for HybridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for HybridMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "local_models" | "local" => Ok(HybridMode::LocalModels),
            "label_feature" | "label" => Ok(HybridMode::LabelFeature),
            other => Err(Error::InvalidParameter(format!(
                "unknown hybrid mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub kind: ClusterKind,
    pub k: usize,
    /// Clustering seed. Each cluster's grid search uses `grid.seed + j`.
    pub seed: u64,
    pub grid: GridSpec,
    pub mode: HybridMode,
    pub linkage: Linkage,
    pub gamma: Option<f64>,
}

impl HybridConfig {
    pub fn new(kind: ClusterKind, k: usize, grid: GridSpec, seed: u64) -> Self {
        Self {
            kind,
            k,
            seed,
            grid,
            mode: HybridMode::LocalModels,
            linkage: Linkage::Ward,
            gamma: None,
        }
    }

    fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            linkage: self.linkage,
            gamma: self.gamma,
            ..ClusterConfig::new(self.kind, self.k, self.seed)
        }
    }
}

/// A trained network with the grid-search result that selected it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub mlp: MlpModel,
    pub winner: Candidate,
    pub cv_mse: f64,
    pub train_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub scaler: ScalerParams,
    pub target_scaler: TargetScaler,
    pub cluster_model: ClusterModel,
    /// `k` entries for local models, one for the label-feature mode.
    pub locals: Vec<LocalModel>,
    pub mode: HybridMode,
    /// Training samples per cluster.
    pub cluster_sizes: Vec<usize>,
    /// MASE scale per cluster, in target units.
    pub mase_scales: Vec<f64>,
}

/// A prediction in target units and the cluster that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub cluster: usize,
}

fn label_input(cluster: usize, k: usize) -> f64 {
    if k > 1 {
        cluster as f64 / (k - 1) as f64
    } else {
        0.0
    }
}

fn with_label_column(x: &Array2<f64>, labels: &[usize], k: usize) -> Array2<f64> {
    let col = Array1::from_iter(labels.iter().map(|&c| label_input(c, k)));
    ndarray::concatenate![Axis(1), x.view(), col.insert_axis(Axis(1))]
}

fn single_cluster(
    data: &Array2<f64>,
    kind: ClusterKind,
    seed: u64,
) -> Result<(ClusterModel, ClusterAssignment)> {
    let assignment = ClusterAssignment::new(vec![0; data.nrows()], 1)?;
    Ok((
        ClusterModel::from_assignment(kind, data, &assignment, seed),
        assignment,
    ))
}

fn fit_local(x: &Array2<f64>, y: &Array1<f64>, grid: &GridSpec) -> Result<LocalModel> {
    let search = grid_search(x, y, grid)?;
    let (mut mlp, report) = train(x, y, &grid.train_config(&search.best))?;
    if !report.final_train_mse.is_finite() {
        return Err(Error::Diverged(format!(
            "final fit of {} neurons {} {}",
            search.best.neurons, search.best.activation, search.best.solver
        )));
    }
    mlp.provenance.cv_mse = Some(search.best_cv_mse);
    Ok(LocalModel {
        mlp,
        winner: search.best,
        cv_mse: search.best_cv_mse,
        train_size: y.len(),
    })
}

/// Scales the training data, clusters it and fits the local model(s).
///
/// With `k = 1` clustering is skipped and the result is a single global
/// network, identical to grid-searching and training it directly.
pub fn train_hybrid(data: &Dataset, config: &HybridConfig) -> Result<HybridModel> {
    config.grid.validate()?;
    if config.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let scaler = ScalerParams::fit(data.features())?;
    let target_scaler = TargetScaler::fit(data.target())?;
    let x = scaler.transform(data.features())?;
    let y = data.target().mapv(|v| target_scaler.scale(v));

    let (cluster_model, assignment) = if config.k == 1 {
        single_cluster(&x, config.kind, config.seed)?
    } else {
        let fit = clustering::fit(&x, &config.cluster_config())?;
        (fit.model, fit.assignment)
    };
    let k = assignment.k();
    let cluster_sizes = assignment.sizes().to_vec();
    let mase_scales = (0..k)
        .map(|j| {
            let members = assignment.members(j);
            let t: Vec<f64> = members.iter().map(|&i| data.target()[i]).collect();
            naive_mean_scale(&t)
        })
        .collect();

    let locals = match config.mode {
        HybridMode::LocalModels => {
            for (j, &size) in cluster_sizes.iter().enumerate() {
                if size < config.grid.folds {
                    return Err(Error::ClusterTooSmall {
                        cluster: j,
                        size,
                        required: config.grid.folds,
                    });
                }
            }
            (0..k)
                .map(|j| {
                    let members = assignment.members(j);
                    let grid = GridSpec {
                        seed: config.grid.seed.wrapping_add(j as u64),
                        ..config.grid.clone()
                    };
                    log::info!(
                        "training local model {} of {k} on {} samples",
                        j + 1,
                        members.len()
                    );
                    fit_local(
                        &x.select(Axis(0), &members),
                        &y.select(Axis(0), &members),
                        &grid,
                    )
                })
                .collect::<Result<Vec<_>>>()?
        }
        HybridMode::LabelFeature => {
            let xl = with_label_column(&x, assignment.labels(), k);
            vec![fit_local(&xl, &y, &config.grid)?]
        }
    };

    Ok(HybridModel {
        scaler,
        target_scaler,
        cluster_model,
        locals,
        mode: config.mode,
        cluster_sizes,
        mase_scales,
    })
}

impl HybridModel {
    pub fn k(&self) -> usize {
        self.cluster_model.k
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_columns()
    }

    /// Scales a raw feature row, routes it and evaluates its network.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let scaled = self.scaler.transform_row(x)?;
        let cluster = self.cluster_model.route(&scaled)?;
        self.evaluate_routed(scaled, cluster)
    }

    fn evaluate_routed(&self, mut scaled: Vec<f64>, cluster: usize) -> Result<Prediction> {
        let out = match self.mode {
            HybridMode::LocalModels => self.locals[cluster].mlp.forward(&scaled)?,
            HybridMode::LabelFeature => {
                scaled.push(label_input(cluster, self.k()));
                self.locals[0].mlp.forward(&scaled)?
            }
        };
        Ok(Prediction {
            value: self.target_scaler.unscale(out),
            cluster,
        })
    }

    /// Predictions for every row of a raw feature matrix.
    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<Vec<Prediction>> {
        check_dim(self.n_features(), x.ncols())?;
        let scaled = self.scaler.transform(x)?;
        let clusters = self.cluster_model.route_all(&scaled)?;
        scaled
            .rows()
            .into_iter()
            .zip(clusters)
            .map(|(row, c)| self.evaluate_routed(row.to_vec(), c))
            .collect()
    }

    /// Observed and predicted targets of `validation`, grouped by cluster in
    /// sample order.
    pub fn groups(&self, validation: &Dataset) -> Result<Vec<Group>> {
        let predictions = self.predict_batch(validation.features())?;
        let mut groups: Vec<Group> = self
            .mase_scales
            .iter()
            .map(|&s| Group {
                mase_scale: Some(s),
                ..Group::default()
            })
            .collect();
        for (p, &t) in predictions.iter().zip(validation.target()) {
            groups[p.cluster].observed.push(t);
            groups[p.cluster].predicted.push(p.value);
        }
        Ok(groups)
    }
}

/// Per-cluster and size-weighted errors of `model` on `validation`, in
/// target units.
pub fn error_report(model: &HybridModel, validation: &Dataset) -> Result<ErrorReport> {
    if validation.n_samples() == 0 {
        return Err(Error::EmptyDataset);
    }
    let groups = model.groups(validation)?;
    ErrorReport::from_groups(&groups).ok_or(Error::EmptyDataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize;
    use crate::mlp::{Activation, Solver, TrainLimits};

    fn small_grid() -> GridSpec {
        GridSpec {
            neurons: 4..=4,
            activations: vec![Activation::Tanh],
            solvers: vec![Solver::Lbfgs],
            folds: 3,
            seed: 7,
            limits: TrainLimits {
                max_iter: 60,
                ..Default::default()
            },
        }
    }

    #[test]
    fn local_models_follow_clusters() {
        let synth = synthesize(200, 3).unwrap();
        let config = HybridConfig::new(ClusterKind::KMeans, 4, small_grid(), 1);
        let model = train_hybrid(&synth.dataset, &config).unwrap();
        assert_eq!(model.locals.len(), 4);
        assert_eq!(model.cluster_sizes.iter().sum::<usize>(), 200);
        let report = error_report(&model, &synth.dataset).unwrap();
        assert_eq!(report.k(), 4);
        assert_eq!(report.cluster_sizes, model.cluster_sizes);
    }

    #[test]
    fn single_cluster_is_global_network() {
        let synth = synthesize(120, 5).unwrap();
        let data = &synth.dataset;
        let config = HybridConfig::new(ClusterKind::Spectral, 1, small_grid(), 9);
        let model = train_hybrid(data, &config).unwrap();

        let scaler = ScalerParams::fit(data.features()).unwrap();
        let ts = TargetScaler::fit(data.target()).unwrap();
        let x = scaler.transform(data.features()).unwrap();
        let y = data.target().mapv(|v| ts.scale(v));
        let global = fit_local(&x, &y, &small_grid()).unwrap();
        let direct = global.mlp.predict(&x).unwrap();
        for (p, d) in model
            .predict_batch(data.features())
            .unwrap()
            .iter()
            .zip(direct.iter())
        {
            assert_eq!(p.cluster, 0);
            assert_eq!(p.value, ts.unscale(*d));
        }
    }

    #[test]
    fn small_cluster_is_named() {
        let mut x = Array2::zeros((23, 4));
        for i in 0..20 {
            x[[i, 0]] = i as f64 * 0.01;
        }
        for i in 20..23 {
            x[[i, 0]] = 100.0 + i as f64 * 0.01;
        }
        let y = Array1::from_iter((0..23).map(|i| i as f64));
        let data = Dataset::from_parts(x, y).unwrap();
        let grid = GridSpec {
            folds: 5,
            ..small_grid()
        };
        let err =
            train_hybrid(&data, &HybridConfig::new(ClusterKind::KMeans, 2, grid, 1)).unwrap_err();
        match err {
            Error::ClusterTooSmall { size, required, .. } => assert_eq!((size, required), (3, 5)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_feature_mode() {
        let synth = synthesize(150, 8).unwrap();
        let config = HybridConfig {
            mode: HybridMode::LabelFeature,
            ..HybridConfig::new(ClusterKind::KMeans, 3, small_grid(), 2)
        };
        let model = train_hybrid(&synth.dataset, &config).unwrap();
        assert_eq!(model.locals.len(), 1);
        assert_eq!(model.locals[0].mlp.n_inputs(), 5);
        let p = model
            .predict(synth.dataset.features().row(0).as_slice().unwrap())
            .unwrap();
        assert!(p.value.is_finite() && p.cluster < 3);
    }

    #[test]
    fn dimension_mismatch() {
        let synth = synthesize(60, 1).unwrap();
        let model = train_hybrid(
            &synth.dataset,
            &HybridConfig::new(ClusterKind::KMeans, 1, small_grid(), 0),
        )
        .unwrap();
        assert!(matches!(
            model.predict(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
