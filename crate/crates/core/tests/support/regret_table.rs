//! Published per-workload regrets (percent) of ten schedulers on thirteen
//! workloads; `None` marks schedulers that could not run the workload.

#![allow(dead_code)]

pub const SCHEDULERS: [&str; 10] = [
    "BO FSS", "STATIC", "HSS", "BinLPT", "GUIDED", "FSS", "CSS", "FAC2", "TRAP1", "TAPER3",
];

pub const WORKLOADS: [&str; 13] = [
    "lavaMD", "stream", "kmeans", "srad v1", "nn", "cc-journal", "cc-wiki", "cc-road", "cc-skitter", "pr-journal",
    "pr-wiki", "pr-road", "pr-skitter",
];

const NA: Option<f64> = None;

const fn v(x: f64) -> Option<f64> {
    Some(x)
}

pub const REGRETS: [[Option<f64>; 10]; 13] = [
    [v(0.00), v(17.55), NA, NA, v(7.25), v(3.00), v(0.36), v(0.25), v(10.33), v(42.64)],
    [v(0.00), v(10.79), NA, NA, v(2.39), v(10.36), v(1.25), v(0.68), v(2.00), v(2.45)],
    [v(0.00), v(23.02), NA, NA, v(8.01), v(17.62), v(1.50), v(1.17), v(2.30), v(6.41)],
    [v(22.34), v(10.92), NA, NA, v(16.75), v(11.74), v(26.03), v(0.00), v(16.43), v(17.61)],
    [v(4.76), v(5.06), NA, NA, v(0.00), v(0.55), v(7.00), v(6.06), v(4.39), v(5.14)],
    [v(0.00), v(2.88), v(66.98), v(196.63), v(11.94), v(2.47), v(2.98), v(6.15), v(3.65), v(0.66)],
    [v(0.00), v(6.94), v(58.57), v(154.31), v(10.37), v(2.77), v(6.58), v(5.29), v(7.88), v(5.27)],
    [v(0.00), v(8.57), v(81.88), v(251.71), v(7.19), v(1.37), v(1.55), v(1.23), v(1.97), v(1.71)],
    [v(5.28), v(2.28), v(61.69), v(129.08), v(3.57), v(1.03), v(1.05), v(1.06), v(0.73), v(0.00)],
    [v(0.00), v(29.66), v(5.52), v(66.89), v(42.93), v(29.01), v(29.07), v(29.17), v(29.33), v(28.81)],
    [v(15.30), v(45.20), v(0.00), v(42.26), v(85.34), v(46.99), v(47.28), v(46.82), v(46.53), v(46.87)],
    [v(0.00), v(0.32), v(41.65), v(138.32), v(6.60), v(0.41), v(0.42), v(0.42), v(0.40), v(0.41)],
    [v(0.00), v(11.51), v(23.21), v(68.91), v(29.97), v(11.66), v(11.21), v(11.34), v(12.06), v(11.26)],
];

/// Printed summary rows: maximum and 90th percentile of each column.
pub const MINIMAX: [f64; 10] = [22.34, 45.20, 81.88, 251.71, 85.34, 46.99, 47.28, 46.83, 46.53, 46.87];
pub const R90: [f64; 10] = [13.30, 28.33, 71.75, 213.15, 40.34, 26.73, 28.46, 25.60, 26.75, 39.87];

/// Costs that reproduce the regrets: every row has a zero-regret scheduler
/// with unit cost.
pub fn cost_matrix() -> loopsched_core::eval::CostMatrix {
    let mut m = loopsched_core::eval::CostMatrix::new();
    for (w, row) in REGRETS.iter().enumerate() {
        for (s, r) in row.iter().enumerate() {
            if let Some(r) = r {
                m.insert(SCHEDULERS[s].into(), WORKLOADS[w].into(), 1.0 + r / 100.0).unwrap();
            } else {
                m.add_scheduler(SCHEDULERS[s]);
                m.add_workload(WORKLOADS[w]);
            }
        }
    }
    m
}
