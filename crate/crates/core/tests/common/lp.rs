//! Dense two-phase simplex with Bland's rule, used as an exact reference for
//! the depth reconstruction objective on tiny grids.

const EPS: f64 = 1e-10;

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[col];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        self.basis[r] = col;
    }

    /// Minimizes `cost · x` over the current basic feasible region, using only
    /// columns below `allowed`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        let rhs = self.rows[0].len() - 1;
        loop {
            let reduced = |t: &Tableau, j: usize| {
                cost[j]
                    - t.basis
                        .iter()
                        .zip(&t.rows)
                        .map(|(&b, row)| cost[b] * row[j])
                        .sum::<f64>()
            };
            let Some(enter) = (0..allowed).find(|&j| !self.basis.contains(&j) && reduced(self, j) < -EPS)
            else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[enter] > EPS {
                    let ratio = row[rhs] / row[enter];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return false,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }
}

/// Optimal value of `min c·x  s.t.  A x = b, x >= 0`, or None when the
/// problem is infeasible or unbounded.
pub fn minimize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    let mut rows = Vec::with_capacity(m);
    for (i, (ai, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = ai.iter().map(|v| sign * v).collect();
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        row.push(sign * bi);
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
    };
    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    t.optimize(&phase1, n + m);
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.rows)
        .filter(|(b, _)| **b >= n)
        .map(|(_, row)| row[n + m])
        .sum();
    if infeasibility > 1e-7 {
        return None;
    }
    // drive remaining artificials out of the basis, dropping redundant rows
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            match (0..n).find(|&j| t.rows[r][j].abs() > EPS) {
                Some(j) => t.pivot(r, j),
                None => {
                    t.rows.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    if !t.optimize(&cost, n) {
        return None;
    }
    Some(
        t.basis
            .iter()
            .zip(&t.rows)
            .map(|(&bj, row)| cost[bj] * row[n + m])
            .sum(),
    )
}

/// Minimum of the anisotropic l1 gradient norm over maps agreeing with
/// `depth` on `mask`. Column-major `width x height` input.
///
/// Variables: free pixel values (nonnegative, which loses nothing because the
/// optimum stays within the range of the data) followed by a positive and a
/// negative part for every forward difference.
pub fn tv_interpolation_optimum(width: usize, height: usize, depth: &[f64], mask: &[bool]) -> f64 {
    let idx = |r: usize, c: usize| c * height + r;
    let mut var_of = vec![usize::MAX; width * height];
    let mut n_free = 0;
    for k in 0..width * height {
        if !mask[k] {
            var_of[k] = n_free;
            n_free += 1;
        }
    }
    let mut edges = Vec::new();
    for c in 0..width {
        for r in 0..height {
            if c + 1 < width {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < height {
                edges.push((idx(r, c), idx(r + 1, c)));
            }
        }
    }
    let n = n_free + 2 * edges.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut cost = vec![0.0; n];
    for (e, &(from, to)) in edges.iter().enumerate() {
        // x_to - x_from - g+ + g- = 0, fixed pixels moved to the right side
        let mut row = vec![0.0; n];
        let mut rhs = 0.0;
        if mask[to] {
            rhs -= depth[to];
        } else {
            row[var_of[to]] += 1.0;
        }
        if mask[from] {
            rhs += depth[from];
        } else {
            row[var_of[from]] -= 1.0;
        }
        let (gp, gm) = (n_free + 2 * e, n_free + 2 * e + 1);
        row[gp] = -1.0;
        row[gm] = 1.0;
        cost[gp] = 1.0;
        cost[gm] = 1.0;
        a.push(row);
        b.push(rhs);
    }
    minimize(&a, &b, &cost).expect("the reconstruction LP is feasible and bounded")
}

