//! Metric CSV assembly: per-seed rows plus an aggregate mean±std row.
//!
//! Floating-point values are written with Rust's default `Display` (shortest
//! round-trip representation), so identical runs produce identical bytes.

use edpmvc_core::train::FusionMode;

/// One trained seed's headline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub accuracy: f64,
    pub mean_uncertainty: f64,
    /// Discounts in effect after training, one per view.
    pub gammas: Vec<f64>,
}

/// Mean and sample standard deviation (n−1 denominator; 0 when n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn join_semicolon(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Renders the metrics table: header, one `seed` row per outcome (in input
/// order), then one `aggregate` row with accuracy mean in the `accuracy`
/// column, sample std in `accuracy_std`, and per-view mean discounts.
pub fn render_metrics_csv(fusion: FusionMode, outcomes: &[SeedOutcome]) -> String {
    let mut out = String::from("row,fusion,seed,accuracy,accuracy_std,mean_uncertainty,gammas\n");
    for o in outcomes {
        out.push_str(&format!(
            "seed,{fusion},{},{},,{},{}\n",
            o.seed,
            o.accuracy,
            o.mean_uncertainty,
            join_semicolon(&o.gammas),
        ));
    }
    let accs: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let uncs: Vec<f64> = outcomes.iter().map(|o| o.mean_uncertainty).collect();
    let (acc_mean, acc_std) = mean_std(&accs);
    let (unc_mean, _) = mean_std(&uncs);
    let gamma_means: Vec<f64> = if outcomes.is_empty() {
        Vec::new()
    } else {
        let v = outcomes[0].gammas.len();
        (0..v)
            .map(|i| {
                outcomes.iter().map(|o| o.gammas[i]).sum::<f64>() / outcomes.len() as f64
            })
            .collect()
    };
    out.push_str(&format!(
        "aggregate,{fusion},all,{acc_mean},{acc_std},{unc_mean},{}\n",
        join_semicolon(&gamma_means),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((m - 5.0).abs() < 1e-12);
        // Sample variance of this classic set is 32/7.
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3.25]), (3.25, 0.0));
        assert_eq!(mean_std(&[]), (0.0, 0.0));
    }

    #[test]
    fn csv_has_one_row_per_seed_plus_aggregate() {
        let outcomes = vec![
            SeedOutcome {
                seed: 1,
                accuracy: 0.9,
                mean_uncertainty: 0.2,
                gammas: vec![0.8, 0.4],
            },
            SeedOutcome {
                seed: 2,
                accuracy: 0.8,
                mean_uncertainty: 0.4,
                gammas: vec![0.6, 0.2],
            },
        ];
        let csv = render_metrics_csv(FusionMode::Discount, &outcomes);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "row,fusion,seed,accuracy,accuracy_std,mean_uncertainty,gammas"
        );
        assert_eq!(lines[1], "seed,discount,1,0.9,,0.2,0.8;0.4");
        let agg = lines[3];
        assert!(agg.starts_with("aggregate,discount,all,"));
        let fields: Vec<&str> = agg.split(',').collect();
        assert!((fields[3].parse::<f64>().unwrap() - 0.85).abs() < 1e-12);
        // Sample std of {0.9, 0.8} = 0.1/√2.
        let std: f64 = fields[4].parse().unwrap();
        assert!((std - 0.1 / 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(fields[6], "0.7;0.30000000000000004");
    }
}
