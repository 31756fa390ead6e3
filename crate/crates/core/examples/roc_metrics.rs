//! ROC curve, AUC and TPR at low FPR for a scored attack.
//!
//! cargo run --release --example roc_metrics

use desia::metrics::{auc, roc, tpr_at_fpr, write_roc_csv};

fn main() -> desia::Result<()> {
    let scores = [0.95, 0.9, 0.8, 0.7, 0.6, 0.55, 0.5, 0.4, 0.3, 0.1];
    let labels = [true, true, false, true, false, true, false, false, true, false];
    let curve = roc(&scores, &labels)?;
    println!("AUC {:.3}", auc(&curve));
    for k in [0.1, 0.2, 0.5] {
        println!("TPR at FPR <= {k}: {:.2}", tpr_at_fpr(&curve, k)?);
    }
    write_roc_csv(&curve, std::io::stdout())?;
    Ok(())
}
