//! Linear programming contract used by the master problem, and a dense
//! bounded dual simplex implementing it.
//!
//! The master problem only ever grows by rows (cuts) and changes variable
//! bounds (branching). Both keep a dual feasible basis dual feasible, so the
//! dual simplex restarts from the previous basis instead of from scratch.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

pub trait LpSubsystem {
    /// New column with bounds and objective coefficient; returns its index.
    fn add_var(&mut self, lo: f64, hi: f64, cost: f64) -> usize;
    /// New row `lo ≤ Σ a_j x_j ≤ hi`; returns its index.
    fn add_row(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64) -> usize;
    fn set_var_bounds(&mut self, var: usize, lo: f64, hi: f64);
    fn var_bounds(&self, var: usize) -> (f64, f64);
    fn solve(&mut self) -> Result<LpStatus>;
    fn value(&self, var: usize) -> f64;
    fn values(&self) -> Vec<f64>;
    fn objective(&self) -> f64;
    fn num_vars(&self) -> usize;
    fn num_rows(&self) -> usize;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic(usize),
    Lower,
    Upper,
}

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const MAX_ITERATIONS: usize = 200_000;

/// Basis of a [`DualSimplex`] at some point of its life.
#[derive(Clone, Debug)]
pub struct BasisSnapshot {
    rows: usize,
    basis: Vec<usize>,
    status: Vec<Status>,
}

/// Dense dual simplex with an explicit basis inverse. Costs must be
/// non-negative and lower bounds finite, which makes the all-slack basis
/// dual feasible.
#[derive(Clone, Debug, Default)]
pub struct DualSimplex {
    nv: usize,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    m: usize,
    basis: Vec<usize>,
    status: Vec<Status>,
    binv: Vec<f64>,
    x: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    objective: f64,
}

impl DualSimplex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Simplex pivots performed so far.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// The current basis, to be handed back to [`DualSimplex::restore_basis`]
    /// after further rows were added or bounds changed.
    pub fn basis_snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            rows: self.m,
            basis: self.basis.clone(),
            status: self.status.clone(),
        }
    }

    /// Reinstates a basis taken earlier; rows added since then get their
    /// slacks as basic columns. Returns `false` (keeping the current basis)
    /// when the snapshot is stale or singular.
    pub fn restore_basis(&mut self, snap: &BasisSnapshot) -> bool {
        if snap.rows > self.m || snap.status.len() != self.nv + snap.rows {
            return false;
        }
        let saved = (self.basis.clone(), self.status.clone(), self.binv.clone(), self.since_refactor);
        self.basis = snap.basis.clone();
        self.status = snap.status[..self.nv].to_vec();
        self.status.extend_from_slice(&snap.status[self.nv..]);
        for r in snap.rows..self.m {
            self.basis.push(self.nv + r);
            self.status.push(Status::Basic(r));
        }
        if self.refactor() {
            true
        } else {
            (self.basis, self.status, self.binv, self.since_refactor) = saved;
            false
        }
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.nv {
            for &(r, a) in &self.cols[j] {
                f(r, a);
            }
        } else {
            f(j - self.nv, -1.0);
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Lower => self.lo[j],
            Status::Upper => self.hi[j],
            Status::Basic(_) => self.x[j],
        }
    }

    fn cold_start(&mut self) {
        let m = self.m;
        self.basis = (0..m).map(|r| self.nv + r).collect();
        for j in 0..self.nv {
            self.status[j] = Status::Lower;
        }
        for r in 0..m {
            self.status[self.nv + r] = Status::Basic(r);
        }
        self.binv = vec![0.0; m * m];
        for r in 0..m {
            self.binv[r * m + r] = -1.0;
        }
        self.since_refactor = 0;
    }

    /// Rebuilds the basis inverse by Gauss–Jordan elimination.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            let mut col = Vec::new();
            self.for_column(j, |r, v| col.push((r, v)));
            for (r, v) in col {
                a[r * m + c] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m).max_by(|&p, &q| a[p * m + c].abs().total_cmp(&a[q * m + c].abs())).unwrap();
            if a[piv * m + c].abs() < 1e-12 {
                return false;
            }
            if piv != c {
                for k in 0..m {
                    a.swap(piv * m + k, c * m + k);
                    inv.swap(piv * m + k, c * m + k);
                }
            }
            let p = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= p;
                inv[c * m + k] /= p;
            }
            let prow: Vec<f64> = a[c * m..(c + 1) * m].to_vec();
            let irow: Vec<f64> = inv[c * m..(c + 1) * m].to_vec();
            let pnz: Vec<usize> = (0..m).filter(|&k| prow[k] != 0.0).collect();
            let inz: Vec<usize> = (0..m).filter(|&k| irow[k] != 0.0).collect();
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    let ar = &mut a[r * m..(r + 1) * m];
                    for &k in &pnz {
                        ar[k] -= f * prow[k];
                    }
                    let ir = &mut inv[r * m..(r + 1) * m];
                    for &k in &inz {
                        ir[k] -= f * irow[k];
                    }
                }
            }
        }
        // inv = B^{-1} with rows indexed by basis position
        self.binv = inv;
        self.since_refactor = 0;
        true
    }

    fn compute_primal(&mut self) {
        let m = self.m;
        let mut w = vec![0.0; m];
        for j in 0..self.nv + m {
            if let Status::Basic(_) = self.status[j] {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                self.for_column(j, |r, a| w[r] += a * v);
            }
        }
        let nz: Vec<(usize, f64)> = w.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let s: f64 = nz.iter().map(|&(k, v)| row[k] * v).sum();
            self.x[self.basis[r]] = -s;
        }
    }

    fn compute_duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = self.cost_of(self.basis[r]);
            if cb != 0.0 {
                for k in 0..m {
                    y[k] += cb * self.binv[r * m + k];
                }
            }
        }
        y
    }

    fn cost_of(&self, j: usize) -> f64 {
        if j < self.nv {
            self.cost[j]
        } else {
            0.0
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost_of(j);
        self.for_column(j, |r, a| d -= y[r] * a);
        d
    }

    /// Puts nonbasic columns on the bound their reduced cost prefers; falls
    /// back to the slack basis if some column cannot be made dual feasible.
    fn restore_dual_feasibility(&mut self) {
        let y = self.compute_duals();
        for j in 0..self.nv + self.m {
            if let Status::Basic(_) = self.status[j] {
                continue;
            }
            let d = self.reduced_cost(j, &y);
            if d < -DUAL_TOL {
                if self.hi[j].is_finite() {
                    self.status[j] = Status::Upper;
                } else if self.lo[j] < self.hi[j] {
                    self.cold_start();
                    return;
                }
            } else if d > DUAL_TOL || !self.hi[j].is_finite() {
                if self.lo[j].is_finite() {
                    self.status[j] = Status::Lower;
                } else if self.lo[j] < self.hi[j] {
                    self.cold_start();
                    return;
                }
            } else if self.status[j] == Status::Lower && !self.lo[j].is_finite() {
                self.status[j] = Status::Upper;
            }
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL * (1.0 + self.lo[j].abs()) {
            self.lo[j] - v
        } else if v > self.hi[j] + PRIMAL_TOL * (1.0 + self.hi[j].abs()) {
            v - self.hi[j]
        } else {
            0.0
        }
    }
}

impl LpSubsystem for DualSimplex {
    fn add_var(&mut self, lo: f64, hi: f64, cost: f64) -> usize {
        assert_eq!(self.m, 0, "columns must be added before rows");
        assert!(lo.is_finite() && cost >= 0.0, "finite lower bounds and non-negative costs required");
        self.cost.push(cost);
        self.lo.push(lo);
        self.hi.push(hi);
        self.cols.push(Vec::new());
        self.status.push(Status::Lower);
        self.x.push(lo);
        self.nv += 1;
        self.nv - 1
    }

    fn add_row(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64) -> usize {
        let r = self.m;
        let old = self.m;
        let new = old + 1;
        // B⁻¹ grows as [[B⁻¹, 0], [a_B B⁻¹, −1]] with the new slack basic
        let mut a_b = vec![0.0; old];
        for &(j, a) in terms {
            if let Status::Basic(pos) = self.status[j] {
                a_b[pos] += a;
            }
        }
        let mut binv = vec![0.0; new * new];
        for i in 0..old {
            binv[i * new..i * new + old].copy_from_slice(&self.binv[i * old..(i + 1) * old]);
        }
        for k in 0..old {
            let mut s = 0.0;
            for (i, ab) in a_b.iter().enumerate() {
                if *ab != 0.0 {
                    s += ab * self.binv[i * old + k];
                }
            }
            binv[old * new + k] = s;
        }
        binv[old * new + old] = -1.0;
        self.binv = binv;
        for &(j, a) in terms {
            if a != 0.0 {
                self.cols[j].push((r, a));
            }
        }
        self.lo.push(lo);
        self.hi.push(hi);
        self.status.push(Status::Basic(r));
        self.x.push(0.0);
        self.basis.push(self.nv + r);
        self.m = new;
        r
    }

    fn set_var_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        assert!(lo.is_finite() && lo <= hi, "invalid bounds [{lo}, {hi}]");
        self.lo[var] = lo;
        self.hi[var] = hi;
    }

    fn var_bounds(&self, var: usize) -> (f64, f64) {
        (self.lo[var], self.hi[var])
    }

    fn solve(&mut self) -> Result<LpStatus> {
        if self.m == 0 {
            for j in 0..self.nv {
                self.status[j] = Status::Lower;
                self.x[j] = self.lo[j];
            }
            self.objective = (0..self.nv).map(|j| self.cost[j] * self.x[j]).sum();
            return Ok(LpStatus::Optimal);
        }
        self.restore_dual_feasibility();
        let mut last_obj = f64::NEG_INFINITY;
        let mut stall = 0usize;
        let mut retries = 0usize;
        for _ in 0..MAX_ITERATIONS {
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                self.cold_start();
            }
            self.compute_primal();
            let obj: f64 = (0..self.nv).map(|j| self.cost[j] * self.x[j]).sum();
            if obj > last_obj + 1e-9 * (1.0 + obj.abs()) {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
            let bland = stall > 50;

            // leaving row: largest bound violation (smallest index when cycling)
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let inf = self.infeasibility(self.basis[r]);
                if inf <= 0.0 {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((lr, li)) => {
                        if bland {
                            self.basis[r] < self.basis[lr]
                        } else {
                            inf > li
                        }
                    }
                };
                if better {
                    leave = Some((r, inf));
                }
            }
            let Some((r, _)) = leave else {
                self.objective = obj;
                return Ok(LpStatus::Optimal);
            };
            let p = self.basis[r];
            let below = self.x[p] < self.lo[p];
            let m = self.m;
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let y = self.compute_duals();

            // ratio test over nonbasic columns (Harris two-pass)
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..self.nv + m {
                let st = self.status[j];
                if matches!(st, Status::Basic(_)) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let mut alpha = 0.0;
                self.for_column(j, |row, a| alpha += rho[row] * a);
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let eligible = match (st, below) {
                    (Status::Lower, true) => alpha < 0.0,
                    (Status::Upper, true) => alpha > 0.0,
                    (Status::Lower, false) => alpha > 0.0,
                    (Status::Upper, false) => alpha < 0.0,
                    _ => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let d = match st {
                    Status::Lower => d.max(0.0),
                    _ => (-d).max(0.0),
                };
                cands.push((j, d, alpha.abs()));
            }
            if cands.is_empty() {
                return Ok(LpStatus::Infeasible);
            }
            let q = if bland {
                let min = cands.iter().map(|c| c.1 / c.2).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 / c.2 <= min + 1e-12)
                    .map(|c| c.0)
                    .min()
                    .unwrap()
            } else {
                let bound = cands.iter().map(|c| (c.1 + DUAL_TOL) / c.2).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 / c.2 <= bound)
                    .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
                    .unwrap()
                    .0
            };

            // FTRAN of the entering column
            let mut col = Vec::new();
            self.for_column(q, |row, a| col.push((row, a)));
            let alpha_q: Vec<f64> = self
                .binv
                .chunks_exact(m)
                .map(|row| col.iter().map(|&(k, a)| row[k] * a).sum())
                .collect();
            let piv = alpha_q[r];
            if piv.abs() < 1e-11 {
                retries += 1;
                if retries > 5 {
                    return Err(Error::Lp("numerically singular pivot".into()));
                }
                if !self.refactor() {
                    self.cold_start();
                }
                continue;
            }
            for b in &mut self.binv[r * m..(r + 1) * m] {
                *b /= piv;
            }
            let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let nz: Vec<usize> = (0..m).filter(|&k| pivot_row[k] != 0.0).collect();
            let sparse = nz.len() * 3 < m;
            for (i, &f) in alpha_q.iter().enumerate() {
                if i == r || f == 0.0 {
                    continue;
                }
                let row = &mut self.binv[i * m..(i + 1) * m];
                if sparse {
                    for &k in &nz {
                        row[k] -= f * pivot_row[k];
                    }
                } else {
                    for (b, p) in row.iter_mut().zip(&pivot_row) {
                        *b -= f * p;
                    }
                }
            }
            self.status[p] = if below { Status::Lower } else { Status::Upper };
            self.status[q] = Status::Basic(r);
            self.basis[r] = q;
            self.since_refactor += 1;
            self.iterations += 1;
        }
        Err(Error::Lp(format!("no convergence after {MAX_ITERATIONS} iterations")))
    }

    fn value(&self, var: usize) -> f64 {
        self.x[var]
    }

    fn values(&self) -> Vec<f64> {
        self.x[..self.nv].to_vec()
    }

    fn objective(&self) -> f64 {
        self.objective
    }

    fn num_vars(&self) -> usize {
        self.nv
    }

    fn num_rows(&self) -> usize {
        self.m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-7
    }

    #[test]
    fn small_covering_problem() {
        // min x + 2y  s.t.  x + y ≥ 2,  x ≤ 1.5
        let mut lp = DualSimplex::new();
        let x = lp.add_var(0.0, 1.5, 1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 2.0);
        lp.add_row(&[(x, 1.0), (y, 1.0)], 2.0, f64::INFINITY);
        assert_eq!(lp.solve().unwrap(), LpStatus::Optimal);
        assert!(close(lp.value(x), 1.5));
        assert!(close(lp.value(y), 0.5));
        assert!(close(lp.objective(), 2.5));
    }

    #[test]
    fn warm_start_after_rows_and_bounds() {
        // min 3a + 2b + c  s.t. a + b + c = 2, b + c ≤ 1, each in [0,1]
        let mut lp = DualSimplex::new();
        let a = lp.add_var(0.0, 1.0, 3.0);
        let b = lp.add_var(0.0, 1.0, 2.0);
        let c = lp.add_var(0.0, 1.0, 1.0);
        lp.add_row(&[(a, 1.0), (b, 1.0), (c, 1.0)], 2.0, 2.0);
        lp.solve().unwrap();
        assert!(close(lp.objective(), 3.0));
        lp.add_row(&[(b, 1.0), (c, 1.0)], f64::NEG_INFINITY, 1.0);
        lp.solve().unwrap();
        assert!(close(lp.objective(), 4.0));
        assert!(close(lp.value(a), 1.0) && close(lp.value(c), 1.0));
        lp.set_var_bounds(c, 0.0, 0.0);
        lp.solve().unwrap();
        assert!(close(lp.objective(), 5.0));
        lp.set_var_bounds(c, 0.0, 1.0);
        lp.solve().unwrap();
        assert!(close(lp.objective(), 4.0));
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = DualSimplex::new();
        let a = lp.add_var(0.0, 1.0, 1.0);
        let b = lp.add_var(0.0, 1.0, 1.0);
        lp.add_row(&[(a, 1.0), (b, 1.0)], 3.0, f64::INFINITY);
        assert_eq!(lp.solve().unwrap(), LpStatus::Infeasible);
        lp.set_var_bounds(a, 0.0, 2.0);
        lp.set_var_bounds(b, 0.0, 2.0);
        assert_eq!(lp.solve().unwrap(), LpStatus::Optimal);
        assert!(close(lp.objective(), 3.0));
    }

    #[test]
    fn matches_enumerated_vertices_on_random_boxes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            // min c·x over the box with two covering rows; compare against a
            // fine grid search over the 3-dimensional box
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..3.0)).collect();
            let rows: Vec<Vec<f64>> = (0..2).map(|_| (0..3).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
            let rhs: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..2.0)).collect();
            let mut lp = DualSimplex::new();
            let vars: Vec<usize> = c.iter().map(|&ci| lp.add_var(0.0, 1.0, ci)).collect();
            for (row, &b) in rows.iter().zip(&rhs) {
                let terms: Vec<(usize, f64)> = vars.iter().zip(row).map(|(&v, &a)| (v, a)).collect();
                lp.add_row(&terms, b, f64::INFINITY);
            }
            let st = lp.solve().unwrap();
            let steps = 40;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        let x = [i as f64 / steps as f64, j as f64 / steps as f64, k as f64 / steps as f64];
                        let ok = rows
                            .iter()
                            .zip(&rhs)
                            .all(|(r, &b)| r.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() >= b - 1e-12);
                        if ok {
                            best = best.min(c.iter().zip(&x).map(|(a, v)| a * v).sum());
                        }
                    }
                }
            }
            if st == LpStatus::Optimal {
                assert!(lp.objective() <= best + 1e-9, "lp {} grid {}", lp.objective(), best);
                assert!(lp.objective() >= best - 0.2, "lp {} grid {}", lp.objective(), best);
            } else {
                assert!(best.is_infinite());
            }
        }
    }
}
