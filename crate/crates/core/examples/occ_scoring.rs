//! Fit the normal-class model on NILM posteriors and score every record.
//!
//! Usage: cargo run --example occ_scoring [shift]

use latent_occ::eval::{evaluate_scores, ThresholdRule};
use latent_occ::fixture::{generate, Preset, NORMAL_LABEL};
use latent_occ::occ::{score_dataset, CovarianceEstimator, NormalModel};

fn main() -> latent_occ::Result<()> {
    let shift = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let ds = generate(&Preset::two_class(600, 8, shift), 0)?;
    for est in [CovarianceEstimator::Printed, CovarianceEstimator::TotalVariance] {
        let model = NormalModel::fit_label(&ds, NORMAL_LABEL, est)?;
        let rows = score_dataset(&model, &ds)?;
        let r = evaluate_scores(&rows, NORMAL_LABEL, false, ThresholdRule::Youden)?;
        println!(
            "{est:?}: fit on {} normals, in-sample AUC {:.4}, Youden threshold {:.3}",
            model.n_fit(),
            r.overall.auc,
            r.threshold
        );
    }
    Ok(())
}
