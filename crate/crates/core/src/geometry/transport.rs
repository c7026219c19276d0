//! Transportation simplex with an absorbing boundary node.
//!
//! Sources carry positive mass, sinks negative mass. Mass may travel source to sink at the
//! Euclidean distance, or leave/enter through the boundary at the boundary-distance cost.

use crate::error::{Error, Result};

/// Solution of a boundary transport problem.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub cost: f64,
    pub pivots: usize,
    /// Row potentials (sources then boundary row).
    pub row_potentials: Vec<f64>,
    /// Column potentials (sinks then boundary column).
    pub col_potentials: Vec<f64>,
}

struct Problem {
    rows: usize,
    cols: usize,
    supply: Vec<f64>,
    demand: Vec<f64>,
    cost: Vec<f64>,
}

impl Problem {
    #[inline]
    fn c(&self, r: usize, c: usize) -> f64 {
        self.cost[r * self.cols + c]
    }
}

/// Minimum boundary transport cost.
///
/// `source_gap[i]` and `sink_gap[j]` are the boundary costs, `distance(i, j)` the pair cost.
pub fn boundary_transport<D: Fn(usize, usize) -> f64>(
    source_mass: &[f64],
    source_gap: &[f64],
    sink_mass: &[f64],
    sink_gap: &[f64],
    distance: D,
) -> Result<TransportSolution> {
    let s = source_mass.len();
    let t = sink_mass.len();
    let rows = s + 1;
    let cols = t + 1;
    let mut cost = vec![0.0; rows * cols];
    for i in 0..s {
        for j in 0..t {
            cost[i * cols + j] = distance(i, j);
        }
        cost[i * cols + t] = source_gap[i];
    }
    for j in 0..t {
        cost[s * cols + j] = sink_gap[j];
    }
    let total_source: f64 = source_mass.iter().sum();
    let total_sink: f64 = sink_mass.iter().sum();
    let mut supply = source_mass.to_vec();
    supply.push(total_sink);
    let mut demand = sink_mass.to_vec();
    demand.push(total_source);
    solve(Problem {
        rows,
        cols,
        supply,
        demand,
        cost,
    })
}

struct Basis {
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
}

impl Basis {
    fn add(&mut self, r: usize, c: usize, x: f64) {
        let id = self.cells.len();
        self.cells.push((r, c));
        self.flow.push(x);
        self.row_adj[r].push(id);
        self.col_adj[c].push(id);
    }

    fn replace(&mut self, leaving: usize, r: usize, c: usize, x: f64) {
        let (lr, lc) = self.cells[leaving];
        self.row_adj[lr].retain(|&k| k != leaving);
        self.col_adj[lc].retain(|&k| k != leaving);
        self.cells[leaving] = (r, c);
        self.flow[leaving] = x;
        self.row_adj[r].push(leaving);
        self.col_adj[c].push(leaving);
    }
}

fn initial_basis(p: &Problem) -> Basis {
    let mut order: Vec<usize> = (0..p.rows * p.cols).collect();
    order.sort_by(|&a, &b| p.cost[a].total_cmp(&p.cost[b]).then(a.cmp(&b)));
    let mut rem_a = p.supply.clone();
    let mut rem_b = p.demand.clone();
    let mut row_on = vec![true; p.rows];
    let mut col_on = vec![true; p.cols];
    let (mut active_rows, mut active_cols) = (p.rows, p.cols);
    let mut basis = Basis {
        cells: Vec::with_capacity(p.rows + p.cols - 1),
        flow: Vec::with_capacity(p.rows + p.cols - 1),
        row_adj: vec![Vec::new(); p.rows],
        col_adj: vec![Vec::new(); p.cols],
    };
    for cell in order {
        if active_rows == 0 || active_cols == 0 {
            break;
        }
        let (r, c) = (cell / p.cols, cell % p.cols);
        if !row_on[r] || !col_on[c] {
            continue;
        }
        if active_rows == 1 && active_cols == 1 {
            basis.add(r, c, rem_a[r].max(rem_b[c]).max(0.0));
            row_on[r] = false;
            col_on[c] = false;
            active_rows = 0;
            active_cols = 0;
        } else if active_rows == 1 {
            let x = rem_b[c].max(0.0);
            basis.add(r, c, x);
            rem_a[r] -= x;
            col_on[c] = false;
            active_cols -= 1;
        } else if active_cols == 1 {
            let x = rem_a[r].max(0.0);
            basis.add(r, c, x);
            rem_b[c] -= x;
            row_on[r] = false;
            active_rows -= 1;
        } else {
            let x = rem_a[r].min(rem_b[c]).max(0.0);
            basis.add(r, c, x);
            rem_a[r] -= x;
            rem_b[c] -= x;
            if rem_a[r] <= rem_b[c] {
                row_on[r] = false;
                active_rows -= 1;
            } else {
                col_on[c] = false;
                active_cols -= 1;
            }
        }
    }
    basis
}

/// Potentials with `u[0] = 0` and `u_r + v_c = cost` on basic cells.
fn potentials(p: &Problem, basis: &Basis, u: &mut [f64], v: &mut [f64]) {
    let mut row_seen = vec![false; p.rows];
    let mut col_seen = vec![false; p.cols];
    let mut stack: Vec<(bool, usize)> = Vec::with_capacity(p.rows + p.cols);
    for root in 0..p.rows {
        if row_seen[root] {
            continue;
        }
        row_seen[root] = true;
        u[root] = 0.0;
        stack.push((true, root));
        while let Some((is_row, k)) = stack.pop() {
            if is_row {
                for &id in &basis.row_adj[k] {
                    let c = basis.cells[id].1;
                    if !col_seen[c] {
                        col_seen[c] = true;
                        v[c] = p.c(k, c) - u[k];
                        stack.push((false, c));
                    }
                }
            } else {
                for &id in &basis.col_adj[k] {
                    let r = basis.cells[id].0;
                    if !row_seen[r] {
                        row_seen[r] = true;
                        u[r] = p.c(r, k) - v[k];
                        stack.push((true, r));
                    }
                }
            }
        }
    }
}

/// Basic cells on the tree path from row `r` to column `c`, ordered starting at column `c`.
fn tree_path(p: &Problem, basis: &Basis, r: usize, c: usize) -> Vec<usize> {
    // Node ids: rows 0..R, columns R..R+C.
    let total = p.rows + p.cols;
    let mut via = vec![usize::MAX; total];
    let mut seen = vec![false; total];
    let mut queue = std::collections::VecDeque::new();
    seen[r] = true;
    queue.push_back(r);
    let target = p.rows + c;
    while let Some(node) = queue.pop_front() {
        if node == target {
            break;
        }
        let (adj, is_row) = if node < p.rows {
            (&basis.row_adj[node], true)
        } else {
            (&basis.col_adj[node - p.rows], false)
        };
        for &id in adj {
            let (cr, cc) = basis.cells[id];
            let next = if is_row { p.rows + cc } else { cr };
            if !seen[next] {
                seen[next] = true;
                via[next] = id;
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = target;
    while node != r {
        let id = via[node];
        path.push(id);
        let (cr, cc) = basis.cells[id];
        node = if node >= p.rows { cr } else { p.rows + cc };
    }
    path
}

fn solve(p: Problem) -> Result<TransportSolution> {
    let mut basis = initial_basis(&p);
    let scale = p
        .cost
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()))
        .max(1e-300);
    let tol = 1e-12 * scale;
    let mut u = vec![0.0; p.rows];
    let mut v = vec![0.0; p.cols];
    let max_pivots = 50 * (p.rows + p.cols) * (p.rows + p.cols).max(8);
    let degenerate_limit = 2 * (p.rows + p.cols);
    let block = (p.rows / 8).max(1);
    let mut cursor = 0usize;
    let mut degenerate_run = 0usize;
    let mut pivots = 0usize;
    loop {
        potentials(&p, &basis, &mut u, &mut v);
        let bland = degenerate_run >= degenerate_limit;
        let mut entering: Option<(usize, usize, f64)> = None;
        if bland {
            'scan: for r in 0..p.rows {
                for c in 0..p.cols {
                    let rc = p.c(r, c) - u[r] - v[c];
                    if rc < -tol {
                        entering = Some((r, c, rc));
                        break 'scan;
                    }
                }
            }
        } else {
            let mut scanned = 0;
            while scanned < p.rows {
                let end = (scanned + block).min(p.rows);
                for k in scanned..end {
                    let r = (cursor + k) % p.rows;
                    for c in 0..p.cols {
                        let rc = p.c(r, c) - u[r] - v[c];
                        if rc < -tol && entering.map_or(true, |(_, _, best)| rc < best) {
                            entering = Some((r, c, rc));
                        }
                    }
                }
                scanned = end;
                if entering.is_some() {
                    cursor = (cursor + scanned) % p.rows;
                    break;
                }
            }
        }
        let Some((er, ec, _)) = entering else {
            break;
        };
        if pivots >= max_pivots {
            let primal = basis
                .cells
                .iter()
                .zip(&basis.flow)
                .map(|(&(r, c), x)| p.c(r, c) * x)
                .sum();
            let dual = p.supply.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>()
                + p.demand.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            return Err(Error::NonConvergence {
                pivots,
                primal,
                dual,
            });
        }
        pivots += 1;
        let path = tree_path(&p, &basis, er, ec);
        // Path cells alternate −, +, −, ... starting at the column end.
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &id) in path.iter().enumerate() {
            if k % 2 == 0 {
                let x = basis.flow[id];
                let better =
                    x < theta || (x == theta && bland && basis.cells[id] < basis.cells[leaving]);
                if better {
                    theta = x;
                    leaving = id;
                }
            }
        }
        let theta = theta.max(0.0);
        if theta == 0.0 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        for (k, &id) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis.flow[id] -= theta;
            } else {
                basis.flow[id] += theta;
            }
        }
        basis.replace(leaving, er, ec, theta);
    }
    let cost = {
        let mut acc = crate::numeric::CompensatedSum::new();
        for (&(r, c), &x) in basis.cells.iter().zip(&basis.flow) {
            acc.add(p.c(r, c) * x.max(0.0));
        }
        acc.value()
    };
    Ok(TransportSolution {
        cost,
        pivots,
        row_potentials: u,
        col_potentials: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair() {
        let sol = boundary_transport(&[1.0], &[5.0], &[1.0], &[5.0], |_, _| 2.0).unwrap();
        assert!((sol.cost - 2.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_cheaper_than_pair() {
        let sol = boundary_transport(&[2.0], &[0.5], &[1.0], &[0.25], |_, _| 3.0).unwrap();
        assert!((sol.cost - (2.0 * 0.5 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn only_sources() {
        let sol = boundary_transport(&[1.0, 3.0], &[0.5, 2.0], &[], &[], |_, _| 0.0).unwrap();
        assert!((sol.cost - 6.5).abs() < 1e-15);
    }

    #[test]
    fn small_assignment() {
        let xs: [f64; 3] = [0.0, 1.0, 2.0];
        let ys = [0.1, 1.2, 1.9];
        let sol = boundary_transport(&[1.0; 3], &[10.0; 3], &[1.0; 3], &[10.0; 3], |i, j| {
            (xs[i] - ys[j]).abs()
        })
        .unwrap();
        assert!((sol.cost - 0.4).abs() < 1e-12);
    }
}
