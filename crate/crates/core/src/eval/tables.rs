use super::ablation::AblationTable;
use super::grid::GridResult;
use super::report::{MetricReport, SeedSummary};
use super::synth::WinRateResult;
use crate::inspect::LayerActivitySummary;

/// A rectangular table of preformatted cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_markdown(&self) -> String {
        let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
        let mut s = line(&self.header);
        s.push_str(&format!("|{}\n", "---|".repeat(self.header.len())));
        for r in &self.rows {
            s.push_str(&line(r));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

/// Dataset | H | split | seed | MSE | MAE, three decimals.
pub fn metrics_table(reports: &[MetricReport]) -> Table {
    let mut t = Table::new(&["dataset", "horizon", "split", "seed", "mse", "mae"]);
    for r in reports {
        t.push(vec![
            r.dataset.clone(),
            r.horizon.to_string(),
            format!("{:?}", r.split).to_ascii_lowercase(),
            r.seed.to_string(),
            format!("{:.3}", r.mse),
            format!("{:.3}", r.mae),
        ]);
    }
    t
}

/// Mean ± sample std of test MSE per dataset/horizon.
pub fn seeds_table(summaries: &[SeedSummary]) -> Table {
    let mut t = Table::new(&["dataset", "horizon", "mse", "seeds", "failed"]);
    for s in summaries {
        t.push(vec![
            s.dataset.clone(),
            s.horizon.to_string(),
            s.cell(),
            s.seeds.len().to_string(),
            s.failed.iter().map(|f| f.seed.to_string()).collect::<Vec<_>>().join(" "),
        ]);
    }
    t
}

pub fn ablation_table(a: &AblationTable) -> Table {
    let mut t = Table::new(&["variant", "mse", "mae", "delta_pct"]);
    for r in &a.rows {
        t.push(vec![
            r.variant.to_string(),
            format!("{:.3}", r.mse),
            format!("{:.3}", r.mae),
            format!("{:+.1}%", r.delta_pct),
        ]);
    }
    t
}

pub fn grid_table(g: &GridResult) -> Table {
    let mut t = Table::new(&["lr", "bidirectional", "lookback", "val_mse", "test_mse", "selected"]);
    for (i, c) in g.cells.iter().enumerate() {
        t.push(vec![
            format!("{:e}", c.lr),
            if c.bidirectional { "on" } else { "off" }.to_string(),
            c.lookback.to_string(),
            format!("{:.4}", c.val_mse),
            format!("{:.4}", c.test_mse),
            if i == g.best { "*" } else { "" }.to_string(),
        ]);
    }
    t
}

/// One row per experiment and contender.
pub fn winrate_table(results: &[WinRateResult]) -> Table {
    let mut t = Table::new(&["experiment", "contender", "params", "wins", "trials", "median_mse"]);
    for r in results {
        for (i, c) in r.contenders.iter().enumerate() {
            t.push(vec![
                r.label.clone(),
                c.name().to_string(),
                r.param_counts[i].to_string(),
                r.wins[i].to_string(),
                r.trials.len().to_string(),
                format!("{:.3e}", r.median_mse(*c)),
            ]);
        }
    }
    t
}

/// Mean ± population std of the edge activation range per KAN layer.
pub fn activity_table(layers: &[LayerActivitySummary]) -> Table {
    let mut t = Table::new(&["branch", "layer", "edges", "mean_range", "std_range"]);
    for l in layers {
        t.push(vec![
            l.branch.to_string(),
            l.layer.to_string(),
            l.edge_count.to_string(),
            format!("{:.4}", l.mean_range),
            format!("{:.4}", l.std_range),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_and_csv_layouts() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.to_markdown(), "| a | b |\n|---|---|\n| 1 | x,y |\n");
        assert_eq!(t.to_csv(), "a,b\n1,\"x,y\"\n");
    }
}
