use serde::Serialize;

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Row {
    pub epsilon: f64,
    pub t: Option<f64>,
    pub value: f64,
}

/// Statistic along a decreasing ε schedule, possibly several levels per ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<Row>,
    /// Distance to the finest-ε value never grows by more than 5% of the
    /// largest value along the schedule.
    pub monotone: bool,
}

impl ConvergenceTable {
    pub fn new(rows: Vec<(f64, Option<f64>, f64)>) -> Self {
        let mut rows: Vec<Row> = rows
            .into_iter()
            .map(|(epsilon, t, value)| Row { epsilon, t, value })
            .collect();
        rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        let mut table = ConvergenceTable { rows, monotone: true };
        table.monotone = table.check_monotone(0.05);
        table
    }

    /// Distinct ε in descending order.
    pub fn epsilons(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.epsilon) {
                out.push(r.epsilon);
            }
        }
        out
    }

    /// Mean of the rows at `eps`.
    pub fn mean_at(&self, eps: f64) -> f64 {
        let vals: Vec<f64> = self.rows.iter().filter(|r| r.epsilon == eps).map(|r| r.value).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    pub fn means(&self) -> Vec<f64> {
        self.epsilons().into_iter().map(|e| self.mean_at(e)).collect()
    }

    pub fn first_value(&self) -> f64 {
        self.means().first().copied().unwrap_or(f64::NAN)
    }

    pub fn last_value(&self) -> f64 {
        self.means().last().copied().unwrap_or(f64::NAN)
    }

    fn check_monotone(&self, slack: f64) -> bool {
        let m = self.means();
        let Some(&last) = m.last() else { return true };
        let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        m.windows(2)
            .all(|w| (w[1] - last).abs() <= (w[0] - last).abs() + slack * scale)
    }

    /// True when the finest mean is at most `1/factor` of the coarsest, or
    /// both are negligible.
    pub fn decreases_by(&self, factor: f64) -> bool {
        let (first, last) = (self.first_value().abs(), self.last_value().abs());
        last <= 1e-12 || last * factor <= first
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,t,value\n");
        for r in &self.rows {
            let t = r.t.map(|t| t.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{}\n", r.epsilon, t, r.value));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_monotone() {
        let t = ConvergenceTable::new(vec![(0.05, None, 6.2), (0.2, None, 5.9), (0.1, None, 6.1)]);
        assert_eq!(t.epsilons(), vec![0.2, 0.1, 0.05]);
        assert!(t.monotone);
        assert_eq!(t.last_value(), 6.2);
        let bad = ConvergenceTable::new(vec![(0.2, None, 6.0), (0.1, None, 3.0), (0.05, None, 6.0)]);
        assert!(!bad.monotone);
    }

    #[test]
    fn decrease_factor_and_csv() {
        let t = ConvergenceTable::new(vec![
            (0.2, Some(0.6), 0.4),
            (0.2, Some(0.8), 0.2),
            (0.05, Some(0.6), 0.1),
        ]);
        assert!((t.first_value() - 0.3).abs() < 1e-15);
        assert!(t.decreases_by(2.0) && !t.decreases_by(4.0));
        assert!(t.to_csv().starts_with("epsilon,t,value\n0.2,0.6,0.4\n"));
    }
}
