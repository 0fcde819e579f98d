//! CSV renderings of results. All floats use shortest round-trip form.

use std::fmt::Write as _;

use sspca_core::ufs::EvalReport;
use sspca_core::unfolding::SweepRow;

use crate::experiment::{AblationRow, GridPoint, HistoryRow};

/// `h,metric,mean,std`, one row per feature count and metric (`acc`, `nmi`),
/// values in percent.
pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = String::from("h,metric,mean,std\n");
    for (i, h) in report.feature_counts.iter().enumerate() {
        writeln!(
            out,
            "{h},acc,{:?},{:?}",
            report.acc_mean[i], report.acc_std[i]
        )
        .unwrap();
        writeln!(
            out,
            "{h},nmi,{:?},{:?}",
            report.nmi_mean[i], report.nmi_std[i]
        )
        .unwrap();
    }
    out
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("iter,objective,primal_residual_y,primal_residual_z\n");
    for r in rows {
        writeln!(
            out,
            "{},{:?},{:?},{:?}",
            r.iter, r.objective, r.primal_residual_y, r.primal_residual_z
        )
        .unwrap();
    }
    out
}

/// `step,loss`; step 0 is the starting model.
pub fn train_history_csv(losses: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (t, l) in losses.iter().enumerate() {
        writeln!(out, "{t},{l:?}").unwrap();
    }
    out
}

pub fn grid_csv(points: &[GridPoint]) -> String {
    let mut out = String::from("lambda,mu,loss\n");
    for p in points {
        writeln!(out, "{:?},{:?},{:?}", p.lambda, p.mu, p.loss).unwrap();
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("depth,initial_loss,trained_loss\n");
    for r in rows {
        writeln!(out, "{},{:?},{:?}", r.depth, r.initial_loss, r.trained_loss).unwrap();
    }
    out
}

/// `configuration,loss,h_acc,acc,acc_std,h_nmi,nmi,nmi_std`. Clustering
/// columns hold the best feature count and its mean ± std in percent, and
/// are empty without labels.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("configuration,loss,h_acc,acc,acc_std,h_nmi,nmi,nmi_std\n");
    for r in rows {
        write!(out, "{},{:?}", r.configuration, r.loss).unwrap();
        match &r.eval {
            Some(e) => {
                let (a, asd) = e.best_acc();
                let (n, nsd) = e.best_nmi();
                writeln!(
                    out,
                    ",{},{a:?},{asd:?},{},{n:?},{nsd:?}",
                    e.best_h_acc(),
                    e.best_h_nmi()
                )
                .unwrap();
            }
            None => out.push_str(",,,,,,\n"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_rows_per_h_and_metric() {
        let r = EvalReport {
            feature_counts: vec![10, 20],
            acc_mean: vec![50.0, 75.5],
            acc_std: vec![1.0, 0.0],
            nmi_mean: vec![10.0, 20.0],
            nmi_std: vec![0.5, 0.25],
            repeats: 3,
        };
        assert_eq!(
            eval_csv(&r),
            "h,metric,mean,std\n10,acc,50.0,1.0\n10,nmi,10.0,0.5\n20,acc,75.5,0.0\n20,nmi,20.0,0.25\n"
        );
    }

    #[test]
    fn sweep_and_history_headers() {
        let s = sweep_csv(&[SweepRow {
            depth: 1,
            initial_loss: 2.5,
            trained_loss: 2.0,
        }]);
        assert_eq!(s, "depth,initial_loss,trained_loss\n1,2.5,2.0\n");
        assert!(history_csv(&[]).starts_with("iter,objective"));
        assert_eq!(train_history_csv(&[3.0, 1.0]), "step,loss\n0,3.0\n1,1.0\n");
    }
}
