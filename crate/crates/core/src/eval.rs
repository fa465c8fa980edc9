//! Regret metrics over (scheduler × workload) cost matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no costs for workload {0:?}")]
    EmptyWorkload(String),
    #[error("scheduler {0:?} has no costs")]
    NoData(String),
    #[error("unknown scheduler index {0}")]
    UnknownScheduler(usize),
    #[error("cost for ({scheduler}, {workload}) must be positive and finite, got {cost}")]
    InvalidCost { scheduler: String, workload: String, cost: f64 },
    #[error("duplicate cell ({scheduler}, {workload})")]
    DuplicateCell { scheduler: String, workload: String },
    #[error("percentile {0} is outside [0, 100]")]
    InvalidPercentile(f64),
    #[error("bootstrap needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error("resample count must be positive")]
    NoResamples,
}

/// Mean costs `C(S, w)`; cells without data are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostMatrix {
    schedulers: Vec<String>,
    workloads: Vec<String>,
    /// Indexed `[workload][scheduler]`.
    costs: Vec<Vec<Option<f64>>>,
    samples: Vec<Vec<Vec<f64>>>,
}

impl CostMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a matrix from `(scheduler, workload, cost)` triples. Labels keep
    /// their first-seen order.
    pub fn from_cells<I, S, W>(cells: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = (S, W, f64)>,
        S: Into<String>,
        W: Into<String>,
    {
        let mut m = Self::new();
        for (s, w, c) in cells {
            m.insert(s.into(), w.into(), c)?;
        }
        Ok(m)
    }

    fn index_of(labels: &mut Vec<String>, label: &str) -> (usize, bool) {
        match labels.iter().position(|l| l == label) {
            Some(i) => (i, false),
            None => {
                labels.push(label.into());
                (labels.len() - 1, true)
            }
        }
    }

    pub fn add_scheduler(&mut self, label: &str) -> usize {
        let (i, new) = Self::index_of(&mut self.schedulers, label);
        if new {
            for row in &mut self.costs {
                row.push(None);
            }
            for row in &mut self.samples {
                row.push(Vec::new());
            }
        }
        i
    }

    pub fn add_workload(&mut self, label: &str) -> usize {
        let (i, new) = Self::index_of(&mut self.workloads, label);
        if new {
            self.costs.push(alloc::vec![None; self.schedulers.len()]);
            self.samples.push(alloc::vec![Vec::new(); self.schedulers.len()]);
        }
        i
    }

    pub fn insert(&mut self, scheduler: String, workload: String, cost: f64) -> Result<(), EvalError> {
        if !(cost.is_finite() && cost > 0.0) {
            return Err(EvalError::InvalidCost { scheduler, workload, cost });
        }
        let s = self.add_scheduler(&scheduler);
        let w = self.add_workload(&workload);
        if self.costs[w][s].is_some() {
            return Err(EvalError::DuplicateCell { scheduler, workload });
        }
        self.costs[w][s] = Some(cost);
        Ok(())
    }

    /// Inserts the mean of `samples` and keeps the raw samples.
    pub fn insert_samples(&mut self, scheduler: String, workload: String, samples: Vec<f64>) -> Result<(), EvalError> {
        let mean = if samples.is_empty() {
            f64::NAN
        } else {
            samples.iter().sum::<f64>() / samples.len() as f64
        };
        let (s_label, w_label) = (scheduler.clone(), workload.clone());
        self.insert(scheduler, workload, mean)?;
        let s = self.schedulers.iter().position(|l| *l == s_label).unwrap_or(0);
        let w = self.workloads.iter().position(|l| *l == w_label).unwrap_or(0);
        self.samples[w][s] = samples;
        Ok(())
    }

    pub fn schedulers(&self) -> &[String] {
        &self.schedulers
    }

    pub fn workloads(&self) -> &[String] {
        &self.workloads
    }

    pub fn cost(&self, workload: usize, scheduler: usize) -> Option<f64> {
        self.costs.get(workload)?.get(scheduler).copied().flatten()
    }

    pub fn samples(&self, workload: usize, scheduler: usize) -> &[f64] {
        self.samples
            .get(workload)
            .and_then(|r| r.get(scheduler))
            .map_or(&[], |v| v.as_slice())
    }

    /// Costs of every scheduler for one workload.
    pub fn workload_costs(&self, workload: usize) -> &[Option<f64>] {
        &self.costs[workload]
    }

    pub fn regret(&self, workload: usize, scheduler: usize) -> Result<Option<f64>, EvalError> {
        regret_cell(&self.costs[workload], scheduler)
            .map_err(|_| EvalError::EmptyWorkload(self.workloads[workload].clone()))
    }

    /// `R(S, w)` for every workload where `S` has data.
    pub fn regrets_of(&self, scheduler: usize) -> Result<Vec<f64>, EvalError> {
        if scheduler >= self.schedulers.len() {
            return Err(EvalError::UnknownScheduler(scheduler));
        }
        let mut out = Vec::new();
        for w in 0..self.workloads.len() {
            if let Some(r) = self.regret(w, scheduler)? {
                out.push(r);
            }
        }
        Ok(out)
    }
}

/// `R(S, w) = (C(S, w) − min C)/min C × 100` in percent, `None` if `S` has no
/// cost for this workload.
pub fn regret_cell(costs: &[Option<f64>], scheduler: usize) -> Result<Option<f64>, EvalError> {
    let best = costs.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(EvalError::EmptyWorkload(String::new()));
    }
    Ok(costs
        .get(scheduler)
        .copied()
        .flatten()
        .map(|c| (c - best) / best * 100.0))
}

/// `R(S) = max_w R(S, w)`.
pub fn minimax_regret(matrix: &CostMatrix, scheduler: usize) -> Result<f64, EvalError> {
    let r = matrix.regrets_of(scheduler)?;
    if r.is_empty() {
        return Err(EvalError::NoData(matrix.schedulers[scheduler].clone()));
    }
    Ok(r.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `p`-th percentile (`0 ≤ p ≤ 100`) of `R(S, w)` over workloads.
pub fn percentile_regret(matrix: &CostMatrix, scheduler: usize, p: f64) -> Result<f64, EvalError> {
    let r = matrix.regrets_of(scheduler)?;
    if r.is_empty() {
        return Err(EvalError::NoData(matrix.schedulers[scheduler].clone()));
    }
    percentile(&r, p)
}

/// Linear interpolation between order statistics at rank `(n − 1)·p/100`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, EvalError> {
    if !(0.0..=100.0).contains(&p) {
        return Err(EvalError::InvalidPercentile(p));
    }
    if values.is_empty() {
        return Err(EvalError::NoData(String::new()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&v, p / 100.0))
}

fn sorted_quantile(v: &[f64], q: f64) -> f64 {
    let pos = (v.len() - 1) as f64 * q;
    let lo = pos as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    v[lo] + frac * (v[hi] - v[lo])
}

/// Percentile-bootstrap confidence interval of the mean of `samples`.
pub fn bootstrap_ci(samples: &[f64], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64), EvalError> {
    if samples.len() < 2 {
        return Err(EvalError::TooFewSamples(samples.len()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::InvalidLevel(level));
    }
    if resamples == 0 {
        return Err(EvalError::NoResamples);
    }
    // Resample deviations from the first sample so constant data is exact.
    let origin = samples[0];
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)] - origin).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((
        origin + sorted_quantile(&means, tail),
        origin + sorted_quantile(&means, 1.0 - tail),
    ))
}

/// Regrets laid out like a report table.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTable {
    pub schedulers: Vec<String>,
    pub workloads: Vec<String>,
    /// `[workload][scheduler]`
    pub regrets: Vec<Vec<Option<f64>>>,
    /// Index of the lowest-cost scheduler per workload.
    pub best: Vec<usize>,
    pub minimax: Vec<Option<f64>>,
    pub r90: Vec<Option<f64>>,
}

pub fn regret_table(matrix: &CostMatrix) -> Result<RegretTable, EvalError> {
    let ns = matrix.schedulers.len();
    let mut regrets = Vec::with_capacity(matrix.workloads.len());
    let mut best = Vec::with_capacity(matrix.workloads.len());
    for w in 0..matrix.workloads.len() {
        let row = (0..ns).map(|s| matrix.regret(w, s)).collect::<Result<Vec<_>, _>>()?;
        let b = (0..ns)
            .filter_map(|s| matrix.cost(w, s).map(|c| (s, c)))
            .fold((0, f64::INFINITY), |acc, (s, c)| if c < acc.1 { (s, c) } else { acc })
            .0;
        regrets.push(row);
        best.push(b);
    }
    let minimax = (0..ns).map(|s| minimax_regret(matrix, s).ok()).collect();
    let r90 = (0..ns).map(|s| percentile_regret(matrix, s, 90.0).ok()).collect();
    Ok(RegretTable {
        schedulers: matrix.schedulers.clone(),
        workloads: matrix.workloads.clone(),
        regrets,
        best,
        minimax,
        r90,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| String::from("n/a"), |r| format!("{r:.2}"))
}

impl RegretTable {
    /// Markdown table; the best scheduler of each workload is in bold.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| workload |");
        for s in &self.schedulers {
            out += &format!(" {s} |");
        }
        out += "\n|---|";
        for _ in &self.schedulers {
            out += "---:|";
        }
        out.push('\n');
        for (w, label) in self.workloads.iter().enumerate() {
            out += &format!("| {label} |");
            for (s, r) in self.regrets[w].iter().enumerate() {
                if s == self.best[w] {
                    out += &format!(" **{}** |", cell(*r));
                } else {
                    out += &format!(" {} |", cell(*r));
                }
            }
            out.push('\n');
        }
        for (name, row) in [("R(S)", &self.minimax), ("R90(S)", &self.r90)] {
            out += &format!("| {name} |");
            for v in row {
                out += &format!(" {} |", cell(*v));
            }
            out.push('\n');
        }
        out
    }

    /// CSV with one row per workload plus the summary rows. The last column
    /// names the best scheduler.
    pub fn to_csv(&self) -> String {
        let esc = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                String::from(s)
            }
        };
        let mut out = String::from("workload");
        for s in &self.schedulers {
            out += &format!(",{}", esc(s));
        }
        out += ",best\n";
        for (w, label) in self.workloads.iter().enumerate() {
            out += &esc(label);
            for r in &self.regrets[w] {
                out += &format!(",{}", r.map_or_else(String::new, |v| format!("{v:.6}")));
            }
            out += &format!(",{}\n", esc(&self.schedulers[self.best[w]]));
        }
        for (name, row) in [("R(S)", &self.minimax), ("R90(S)", &self.r90)] {
            out += name;
            for v in row {
                out += &format!(",{}", v.map_or_else(String::new, |v| format!("{v:.6}")));
            }
            out += ",\n";
        }
        out
    }
}

pub fn render_regret_table(matrix: &CostMatrix) -> Result<(String, String), EvalError> {
    let t = regret_table(matrix)?;
    Ok((t.to_markdown(), t.to_csv()))
}
