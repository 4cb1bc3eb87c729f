//! Named checks on the embedded instances, each reported as pass/fail.

use crate::builtin;
use crate::cuts::CutKind;
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeSet};
use crate::instance::Path;
use crate::oracle::{check_path_subsequences, check_superadditivity, enumerate_l, feasible_paths};
use crate::recourse::{dtd_recourse, or_cost_to_go, or_recourse, recourse, Policy};
use crate::solver::{solve, SolveOptions};
use serde::Serialize;
use std::time::Instant;

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproduceReport {
    pub name: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub wall_time_s: f64,
}

struct Checks(Vec<Assertion>);

impl Checks {
    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(Assertion {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }
}

fn path(c: &[usize]) -> Path {
    Path::from_vec_unchecked(c.to_vec())
}

pub fn run(name: &str) -> Result<ReproduceReport> {
    let start = Instant::now();
    let mut checks = Checks(Vec::new());
    let (budget, label) = match name {
        "fig1" => (1.0, fig1(&mut checks)?),
        "fig2" => (5.0, fig2(&mut checks)?),
        "thm4" => (10.0, thm4(&mut checks)?),
        other => {
            return Err(Error::Malformed(format!(
                "unknown instance '{other}', expected one of {:?}",
                builtin::NAMES
            )))
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    checks.check(&format!("runtime below {budget} s"), elapsed < budget, format!("{elapsed:.3} s"));
    Ok(ReproduceReport {
        name: label.to_string(),
        passed: checks.0.iter().all(|a| a.passed),
        assertions: checks.0,
        wall_time_s: elapsed,
    })
}

fn fig1(c: &mut Checks) -> Result<&'static str> {
    let inst = builtin::fig1();
    let with = or_recourse(&inst, &path(&[1, 2, 3])).forward;
    let without = or_recourse(&inst, &path(&[1, 3])).forward;
    c.check("OR recourse of (1,2,3) in [3.24, 3.26]", (3.24..=3.26).contains(&with), format!("{with:.6}"));
    c.check("OR recourse of (1,3) in [6.07, 6.09]", (6.07..=6.09).contains(&without), format!("{without:.6}"));
    let report = check_path_subsequences(&inst, &path(&[1, 2, 3]), Policy::Or);
    let witness = report.violation.as_ref().map(|v| v.subsequence.clone());
    c.check(
        "OR subsequence violation: dropping customer 2 raises the recourse",
        witness.as_deref() == Some(&[1, 3][..]),
        format!("{witness:?}"),
    );
    let monotone = [[1, 2, 3], [3, 2, 1]].iter().all(|p| or_cost_to_go(&inst, &path(p)).is_monotone(1e-9));
    c.check("cost-to-go non-increasing in residual capacity", monotone, "");
    let sa = check_superadditivity(&inst, Policy::Or, 3)?;
    c.check("OR superadditivity holds", sa.holds, format!("{} concatenations", sa.checked));
    Ok("fig1")
}

fn fig2(c: &mut Checks) -> Result<&'static str> {
    let inst = builtin::fig2();
    let cycle = [1, 2, 3, 4];
    let mut worst = 0.0f64;
    for r in 0..4 {
        let rot: Vec<usize> = (0..4).map(|k| cycle[(r + k) % 4]).collect();
        let v = or_recourse(&inst, &path(&rot));
        worst = worst.max((v.forward - 0.125).abs()).max((v.backward - 0.125).abs());
    }
    c.check("every rotation of the square has OR recourse 1/8", worst <= 1e-9, format!("max error {worst:.2e}"));
    let diagonals = [Edge::new(1, 3), Edge::new(2, 4)];
    let mut max_diag = 0.0f64;
    let mut count = 0;
    feasible_paths(&inst, 4, |p| {
        if crate::graph::path_edges(p).iter().any(|e| diagonals.contains(e)) {
            count += 1;
            max_diag = max_diag.max(recourse(&inst, &path(p), Policy::Or).forward);
        }
    });
    c.check(
        "routes using a diagonal have zero OR recourse",
        max_diag == 0.0,
        format!("{count} routes, max {max_diag}"),
    );
    let all: Vec<usize> = inst.customers().collect();
    let free = enumerate_l(&inst, &all, 1, &EdgeSet::new(), Policy::Or)?.value;
    let forbidden: EdgeSet = diagonals.into_iter().collect();
    let restricted = enumerate_l(&inst, &all, 1, &forbidden, Policy::Or)?.value;
    let dtd = enumerate_l(&inst, &all, 1, &EdgeSet::new(), Policy::Dtd)?.value;
    c.check("L(N,1) = 0 under OR", free == 0.0, format!("{free}"));
    c.check(
        "L(N,1) = 1/8 under OR without the diagonals",
        (restricted - 0.125).abs() <= 1e-9,
        format!("{restricted}"),
    );
    c.check("L(N,1) = 1/8 under DTD", (dtd - 0.125).abs() <= 1e-9, format!("{dtd}"));
    let sol = solve(
        &inst,
        Policy::Or,
        &SolveOptions {
            record_cuts: true,
            ..Default::default()
        },
    )?;
    c.check("optimum 5.125", (sol.objective - 5.125).abs() <= 1e-6, format!("{}", sol.objective));
    let side_edges = vec![Edge::new(1, 2), Edge::new(1, 4), Edge::new(2, 3), Edge::new(3, 4)];
    let logged = sol.cut_log.iter().any(|e| {
        let cut = &e.cut;
        cut.kind == CutKind::EdgeSet
            && cut.set == all
            && cut.edges == side_edges
            && cut.vehicles == 1
            && (cut.coefficient - 0.125).abs() <= 1e-9
            && (cut.rhs + 0.25).abs() <= 1e-9
    });
    c.check(
        "edge-set cut Σθ ≥ (x12 + x23 + x34 + x14 − 2)/8 was added",
        logged,
        format!("{} edge-set cuts", crate::solver::cut_count(&sol, CutKind::EdgeSet)),
    );
    Ok("fig2")
}

fn thm4(c: &mut Checks) -> Result<&'static str> {
    let inst = builtin::thm4();
    let full: Vec<usize> = inst.customers().collect();
    let joined = dtd_recourse(&inst, &path(&full)).forward;
    let split = dtd_recourse(&inst, &path(&full[..4])).forward + dtd_recourse(&inst, &path(&full[4..])).forward;
    c.check("DTD recourse of (1..8) in [2.51, 2.53]", (2.51..=2.53).contains(&joined), format!("{joined:.6}"));
    c.check("DTD recourse of (1,2,3,4) + (5,6,7,8) above 2.62", split > 2.62, format!("{split:.6}"));
    let sub = check_path_subsequences(&inst, &path(&full), Policy::Dtd);
    c.check(
        "no subsequence of (1..8) has larger DTD recourse",
        sub.holds,
        format!("{} subsequences", sub.checked),
    );
    c.check(
        "DTD recourse is not superadditive on this instance",
        joined < split,
        format!("{joined:.6} < {split:.6}"),
    );
    Ok("thm4")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_embedded_reproductions_pass() {
        for name in builtin::NAMES {
            let r = run(name).unwrap();
            assert!(r.passed, "{name}: {:#?}", r.assertions.iter().filter(|a| !a.passed).collect::<Vec<_>>());
        }
        assert!(run("fig3").is_err());
    }
}
