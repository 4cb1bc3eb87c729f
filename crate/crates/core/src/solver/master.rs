//! Master problem: edge variables, fleet-size selectors, recourse variables,
//! degree and fleet rows, plus whatever cuts separation contributes.

use crate::cuts::{Cut, Sense};
use crate::graph::{Edge, EdgeValues};
use crate::instance::Instance;
use crate::lp::{DualSimplex, LpStatus, LpSubsystem};
use crate::Result;

pub(crate) struct Master {
    pub lp: DualSimplex,
    n: usize,
    fleet: Vec<usize>,
    edge_var: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    z0: usize,
    theta0: usize,
    aggregated: bool,
    root_bounds: Vec<(f64, f64)>,
}

impl Master {
    /// `aggregated` selects a single recourse variable `Θ` instead of one
    /// `θ_i` per customer.
    pub fn new(inst: &Instance, aggregated: bool) -> Result<Master> {
        let n = inst.n();
        let mut lp = DualSimplex::new();
        let mut edge_var = vec![vec![usize::MAX; n + 1]; n + 1];
        let mut edges = Vec::new();
        for i in 0..=n {
            for j in i + 1..=n {
                let hi = if i == 0 { 2.0 } else { 1.0 };
                let v = lp.add_var(0.0, hi, inst.distance(i, j));
                edge_var[i][j] = v;
                edge_var[j][i] = v;
                edges.push(Edge::new(i, j));
            }
        }
        let fleet = inst.fleet().to_vec();
        let z0 = lp.num_vars();
        for _ in &fleet {
            lp.add_var(0.0, 1.0, 0.0);
        }
        let theta0 = lp.num_vars();
        for _ in 0..if aggregated { 1 } else { n } {
            lp.add_var(0.0, f64::INFINITY, 1.0);
        }
        // depot degree equals twice the chosen fleet size
        let mut row: Vec<(usize, f64)> = (1..=n).map(|i| (edge_var[0][i], 1.0)).collect();
        row.extend(fleet.iter().enumerate().map(|(k, &m)| (z0 + k, -2.0 * m as f64)));
        lp.add_row(&row, 0.0, 0.0);
        for i in 1..=n {
            let row: Vec<(usize, f64)> = (0..=n).filter(|&j| j != i).map(|j| (edge_var[i][j], 1.0)).collect();
            lp.add_row(&row, 2.0, 2.0);
        }
        let row: Vec<(usize, f64)> = (0..fleet.len()).map(|k| (z0 + k, 1.0)).collect();
        lp.add_row(&row, 1.0, 1.0);
        let root_bounds = (0..lp.num_vars()).map(|v| lp.var_bounds(v)).collect();
        Ok(Master {
            lp,
            n,
            fleet,
            edge_var,
            edges,
            z0,
            theta0,
            aggregated,
            root_bounds,
        })
    }

    pub fn edge_var(&self, e: Edge) -> usize {
        self.edge_var[e.lo()][e.hi()]
    }

    pub fn edge_of(&self, var: usize) -> Option<Edge> {
        self.edges.get(var).copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn fleet_var(&self, k: usize) -> usize {
        self.z0 + k
    }

    fn theta_var(&self, i: usize) -> usize {
        if self.aggregated {
            self.theta0
        } else {
            self.theta0 + i - 1
        }
    }

    pub fn add_cut(&mut self, cut: &Cut) {
        let mut terms: Vec<(usize, f64)> = cut.theta.iter().map(|&i| (self.theta_var(i), 1.0)).collect();
        terms.extend(cut.x_terms.iter().map(|&(e, a)| (self.edge_var(e), a)));
        match cut.sense {
            Sense::Ge => self.lp.add_row(&terms, cut.rhs, f64::INFINITY),
            Sense::Le => self.lp.add_row(&terms, f64::NEG_INFINITY, cut.rhs),
        };
    }

    /// Resets every variable to its root domain, then applies `fixings`.
    pub fn apply_bounds(&mut self, fixings: &[(usize, f64, f64)]) {
        for (v, &(lo, hi)) in self.root_bounds.iter().enumerate() {
            self.lp.set_var_bounds(v, lo, hi);
        }
        for &(v, lo, hi) in fixings {
            let (l0, h0) = self.lp.var_bounds(v);
            self.lp.set_var_bounds(v, l0.max(lo), h0.min(hi));
        }
    }

    pub fn solve(&mut self) -> Result<LpStatus> {
        self.lp.solve()
    }

    pub fn lp_objective(&self) -> f64 {
        self.lp.objective()
    }

    pub fn lp_iterations(&self) -> usize {
        self.lp.iterations()
    }

    /// Current edge values and recourse values (`θ_i` at index `i`, or `Θ`
    /// at index 0 when aggregated).
    pub fn point(&self) -> (EdgeValues, Vec<f64>, Vec<f64>) {
        let vals = self.lp.values();
        let mut x = EdgeValues::zeros(self.n);
        for (k, &e) in self.edges.iter().enumerate() {
            x.set(e, vals[k]);
        }
        let z = vals[self.z0..self.z0 + self.fleet.len()].to_vec();
        let theta = if self.aggregated {
            vec![vals[self.theta0]]
        } else {
            std::iter::once(0.0).chain(vals[self.theta0..self.theta0 + self.n].iter().copied()).collect()
        };
        (x, z, theta)
    }
}
