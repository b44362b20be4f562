use serde::{Deserialize, Serialize};

use super::{error_report, train_hybrid, ErrorReport, HybridConfig, HybridModel};
use crate::clustering::ClusterKind;
use crate::dataset::Dataset;

/// Outcome of one clustering kind in a comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub kind: ClusterKind,
    /// The error report, or the reason training or evaluation failed.
    pub outcome: std::result::Result<ErrorReport, String>,
    /// `(mse - best_mse) / mse * 100`: how much the best kind improves on
    /// this one. `None` for failed kinds.
    pub mse_delta_percent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub entries: Vec<ComparisonEntry>,
    /// Index into `entries` of the lowest weighted MSE (first on ties).
    pub best: Option<usize>,
}

/// Trains one hybrid per kind on `train` with otherwise identical settings
/// and scores all of them on `validation`. Failures are recorded per kind.
///
/// Returns the trained models alongside the comparison, `None` where a kind
/// failed.
pub fn compare_methods(
    train: &Dataset,
    validation: &Dataset,
    kinds: &[ClusterKind],
    base: &HybridConfig,
) -> (Comparison, Vec<Option<HybridModel>>) {
    let mut entries = Vec::with_capacity(kinds.len());
    let mut models = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let config = HybridConfig {
            kind,
            ..base.clone()
        };
        let result =
            train_hybrid(train, &config).and_then(|m| error_report(&m, validation).map(|r| (m, r)));
        match result {
            Ok((model, report)) => {
                models.push(Some(model));
                entries.push(ComparisonEntry {
                    kind,
                    outcome: Ok(report),
                    mse_delta_percent: None,
                });
            }
            Err(e) => {
                log::warn!("{kind}: {e}");
                models.push(None);
                entries.push(ComparisonEntry {
                    kind,
                    outcome: Err(e.to_string()),
                    mse_delta_percent: None,
                });
            }
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in entries.iter().enumerate() {
        if let Ok(r) = &e.outcome {
            let mse = r.weighted_average.mse;
            if best.is_none_or(|(_, b)| mse < b) {
                best = Some((i, mse));
            }
        }
    }
    if let Some((_, best_mse)) = best {
        for e in &mut entries {
            if let Ok(r) = &e.outcome {
                let mse = r.weighted_average.mse;
                e.mse_delta_percent = Some(if mse > 0.0 {
                    (mse - best_mse) / mse * 100.0
                } else {
                    0.0
                });
            }
        }
    }
    (
        Comparison {
            entries,
            best: best.map(|(i, _)| i),
        },
        models,
    )
}
