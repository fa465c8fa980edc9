//! DIRECT (dividing rectangles) on a closed interval, followed by a
//! golden-section polish of the best cell.

use alloc::vec::Vec;

use libm::pow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectOptions {
    pub lower: f64,
    pub upper: f64,
    /// Stop dividing once every cell is narrower than this.
    pub x_tol: f64,
    pub max_evals: usize,
    /// Jones' `ε` in the potential-optimality test.
    pub epsilon: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            lower: super::sobol::DOMAIN_MARGIN,
            upper: 1.0 - super::sobol::DOMAIN_MARGIN,
            x_tol: 1e-3,
            max_evals: 600,
            epsilon: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectResult {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// The objective returned a non-finite value at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFiniteValue {
    pub x: f64,
    pub value: f64,
}

struct Cell {
    center: f64,
    level: i32,
    /// Negated objective (DIRECT minimizes).
    cost: f64,
}

struct Evaluator<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(f64) -> f64> Evaluator<F> {
    fn cost(&mut self, x: f64) -> Result<f64, NonFiniteValue> {
        self.evals += 1;
        let v = (self.f)(x);
        if !v.is_finite() {
            return Err(NonFiniteValue { x, value: v });
        }
        Ok(-v)
    }
}

/// Globally maximizes `f` over `[opts.lower, opts.upper]`.
pub fn direct_maximize<F: FnMut(f64) -> f64>(f: F, opts: &DirectOptions) -> Result<DirectResult, NonFiniteValue> {
    let span = opts.upper - opts.lower;
    let width = |level: i32| span * pow(3.0, -f64::from(level));
    let mut ev = Evaluator { f, evals: 0 };
    let c0 = opts.lower + 0.5 * span;
    let mut cells = alloc::vec![Cell {
        center: c0,
        level: 0,
        cost: ev.cost(c0)?,
    }];

    while ev.evals < opts.max_evals {
        if cells.iter().all(|c| width(c.level) <= opts.x_tol) {
            break;
        }
        let fmin = cells.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
        let chosen = potentially_optimal(&cells, fmin, opts.epsilon, &width);
        for idx in chosen {
            if ev.evals >= opts.max_evals {
                break;
            }
            let w = width(cells[idx].level);
            if w <= opts.x_tol {
                continue;
            }
            let c = cells[idx].center;
            let level = cells[idx].level + 1;
            cells[idx].level = level;
            for x in [c - w / 3.0, c + w / 3.0] {
                let cost = ev.cost(x)?;
                cells.push(Cell { center: x, level, cost });
            }
        }
    }

    let best = cells
        .iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("at least one cell");
    let (mut bx, mut bcost) = (best.center, best.cost);
    let half = width(best.level);
    let lo = (bx - half).max(opts.lower);
    let hi = (bx + half).min(opts.upper);
    let (px, pcost) = golden_section(&mut ev, lo, hi, 1e-9)?;
    if pcost < bcost {
        bx = px;
        bcost = pcost;
    }
    Ok(DirectResult {
        x: bx,
        value: -bcost,
        evaluations: ev.evals,
    })
}

/// Indices of the potentially optimal cells: best in their size class and on
/// the lower-right convex hull of (size, cost) with Jones' ε condition.
fn potentially_optimal(cells: &[Cell], fmin: f64, epsilon: f64, width: &dyn Fn(i32) -> f64) -> Vec<usize> {
    let mut best_by_level: Vec<(i32, usize)> = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        match best_by_level.iter_mut().find(|(l, _)| *l == c.level) {
            Some(entry) => {
                if c.cost < cells[entry.1].cost {
                    entry.1 = i;
                }
            }
            None => best_by_level.push((c.level, i)),
        }
    }
    let cand: Vec<(f64, f64, usize)> = best_by_level
        .iter()
        .map(|&(l, i)| (0.5 * width(l), cells[i].cost, i))
        .collect();
    let target = fmin - epsilon * fmin.abs();
    let mut out = Vec::new();
    for &(dj, fj, j) in &cand {
        let mut k_low: f64 = 0.0;
        let mut k_high = f64::INFINITY;
        for &(di, fi, _) in &cand {
            if di < dj {
                k_low = k_low.max((fj - fi) / (dj - di));
            } else if di > dj {
                k_high = k_high.min((fi - fj) / (di - dj));
            }
        }
        if k_low > k_high {
            continue;
        }
        if k_high.is_infinite() || fj - k_high * dj <= target {
            out.push(j);
        }
    }
    out
}

fn golden_section<F: FnMut(f64) -> f64>(
    ev: &mut Evaluator<F>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64), NonFiniteValue> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = ev.cost(c)?;
    let mut fd = ev.cost(d)?;
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = ev.cost(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = ev.cost(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}
