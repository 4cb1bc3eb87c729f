//! Read-only support for CVRPLIB/TSPLIB `.vrp` files.
//!
//! The file only carries deterministic demands; a small JSON sidecar names the
//! distribution family used to turn them into random variables.

use super::{ceil_tol, Instance, InstanceData};
use crate::demand::DemandDistribution;
use crate::error::{Error, Result};
use crate::DEFAULT_TAIL_EPS;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    /// `"poisson"` (file demands become Poisson means) or `"deterministic"`.
    #[serde(default = "default_distribution")]
    pub distribution: String,
    #[serde(default)]
    pub f: Option<f64>,
    #[serde(default, rename = "M")]
    pub fleet: Option<Vec<usize>>,
    #[serde(default, rename = "bF")]
    pub b_failure: Option<f64>,
    #[serde(default, rename = "bP")]
    pub b_preventive: Option<f64>,
}

fn default_distribution() -> String {
    "poisson".into()
}

impl Default for Sidecar {
    fn default() -> Self {
        Sidecar {
            distribution: default_distribution(),
            f: None,
            fleet: None,
            b_failure: None,
            b_preventive: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CvrplibOptions {
    /// Round Euclidean distances to the nearest integer (TSPLIB `nint`).
    pub round_distances: bool,
    pub tail_eps: f64,
}

impl Default for CvrplibOptions {
    fn default() -> Self {
        CvrplibOptions {
            round_distances: false,
            tail_eps: DEFAULT_TAIL_EPS,
        }
    }
}

#[derive(Default)]
struct Raw {
    headers: HashMap<String, String>,
    coords: Vec<(usize, f64, f64)>,
    demands: Vec<(usize, f64)>,
    depots: Vec<usize>,
    weights: Vec<f64>,
}

fn parse_num<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Malformed(format!("cannot parse {what} from '{tok}'")))
}

fn scan(text: &str) -> Result<Raw> {
    let mut raw = Raw::default();
    let mut section = String::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if line.ends_with("_SECTION") {
            section = line.to_string();
            continue;
        }
        if let Some((key, value)) = line.split_once(':') {
            let key = key.trim();
            if key.chars().all(|c| c.is_ascii_uppercase() || c == '_') && !key.is_empty() {
                raw.headers.insert(key.to_string(), value.trim().to_string());
                section.clear();
                continue;
            }
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match section.as_str() {
            "NODE_COORD_SECTION" => {
                if toks.len() < 3 {
                    return Err(Error::Malformed(format!("bad coordinate line '{line}'")));
                }
                raw.coords.push((
                    parse_num(toks[0], "node id")?,
                    parse_num(toks[1], "x")?,
                    parse_num(toks[2], "y")?,
                ));
            }
            "DEMAND_SECTION" => {
                if toks.len() < 2 {
                    return Err(Error::Malformed(format!("bad demand line '{line}'")));
                }
                raw.demands.push((parse_num(toks[0], "node id")?, parse_num(toks[1], "demand")?));
            }
            "DEPOT_SECTION" => {
                for t in toks {
                    let v: i64 = parse_num(t, "depot id")?;
                    if v >= 0 {
                        raw.depots.push(v as usize);
                    }
                }
            }
            "EDGE_WEIGHT_SECTION" => {
                for t in toks {
                    raw.weights.push(parse_num(t, "edge weight")?);
                }
            }
            "" => return Err(Error::Malformed(format!("unexpected line '{line}'"))),
            _ => {} // sections we do not use
        }
    }
    Ok(raw)
}

fn explicit_matrix(format: &str, dim: usize, w: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut m = vec![vec![0.0; dim]; dim];
    let mut it = w.iter().copied();
    let mut take = || it.next().ok_or_else(|| Error::Malformed("EDGE_WEIGHT_SECTION too short".into()));
    match format {
        "FULL_MATRIX" => {
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v = take()?;
                }
            }
        }
        "LOWER_ROW" => {
            for i in 1..dim {
                for j in 0..i {
                    m[i][j] = take()?;
                }
            }
        }
        "UPPER_ROW" => {
            for i in 0..dim {
                for j in i + 1..dim {
                    m[i][j] = take()?;
                }
            }
        }
        "LOWER_DIAG_ROW" => {
            for i in 0..dim {
                for j in 0..=i {
                    m[i][j] = take()?;
                }
            }
        }
        "UPPER_DIAG_ROW" => {
            for i in 0..dim {
                for j in i..dim {
                    m[i][j] = take()?;
                }
            }
        }
        other => return Err(Error::Malformed(format!("unsupported EDGE_WEIGHT_FORMAT {other}"))),
    }
    if format != "FULL_MATRIX" {
        for i in 0..dim {
            m[i][i] = 0.0;
            for j in 0..i {
                let v = m[i][j].max(m[j][i]);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
    }
    Ok(m)
}

pub fn parse_cvrplib(text: &str, sidecar: &Sidecar, options: &CvrplibOptions) -> Result<Instance> {
    let raw = scan(text)?;
    let dim: usize = parse_num(
        raw.headers
            .get("DIMENSION")
            .ok_or_else(|| Error::Malformed("missing DIMENSION".into()))?,
        "DIMENSION",
    )?;
    let capacity: usize = parse_num(
        raw.headers
            .get("CAPACITY")
            .ok_or_else(|| Error::Malformed("missing CAPACITY".into()))?,
        "CAPACITY",
    )?;
    if dim < 2 {
        return Err(Error::Malformed("need a depot and at least one customer".into()));
    }
    let weight_type = raw.headers.get("EDGE_WEIGHT_TYPE").map(String::as_str).unwrap_or("EUC_2D");
    let file_matrix: Vec<Vec<f64>> = match weight_type {
        "EUC_2D" => {
            if raw.coords.len() != dim {
                return Err(Error::Malformed(format!("expected {dim} coordinates, found {}", raw.coords.len())));
            }
            let mut pts = vec![(0.0, 0.0); dim];
            for &(id, x, y) in &raw.coords {
                if id == 0 || id > dim {
                    return Err(Error::Malformed(format!("node id {id} out of range")));
                }
                pts[id - 1] = (x, y);
            }
            (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            let d = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
                            if options.round_distances {
                                d.round()
                            } else {
                                d
                            }
                        })
                        .collect()
                })
                .collect()
        }
        "EXPLICIT" => {
            let fmt = raw
                .headers
                .get("EDGE_WEIGHT_FORMAT")
                .ok_or_else(|| Error::Malformed("EXPLICIT weights need EDGE_WEIGHT_FORMAT".into()))?;
            explicit_matrix(fmt, dim, &raw.weights)?
        }
        other => return Err(Error::Malformed(format!("unsupported EDGE_WEIGHT_TYPE {other}"))),
    };

    let mut file_demand = vec![f64::NAN; dim];
    for &(id, d) in &raw.demands {
        if id == 0 || id > dim {
            return Err(Error::Malformed(format!("demand for unknown node {id}")));
        }
        file_demand[id - 1] = d;
    }
    if file_demand.iter().any(|d| d.is_nan()) {
        return Err(Error::Malformed("DEMAND_SECTION does not cover every node".into()));
    }
    let depot = raw.depots.first().copied().unwrap_or(1);
    if depot == 0 || depot > dim {
        return Err(Error::Malformed(format!("depot id {depot} out of range")));
    }
    // internal order: depot first, customers in file order
    let order: Vec<usize> = std::iter::once(depot - 1)
        .chain((0..dim).filter(|&k| k != depot - 1))
        .collect();
    let distance: Vec<Vec<f64>> = order
        .iter()
        .map(|&a| order.iter().map(|&b| file_matrix[a][b]).collect())
        .collect();

    let demands = order[1..]
        .iter()
        .map(|&k| {
            let mu = file_demand[k];
            if mu < 0.0 {
                return Err(Error::Malformed(format!("negative demand at node {}", k + 1)));
            }
            match sidecar.distribution.as_str() {
                "poisson" if mu > 0.0 => DemandDistribution::poisson(mu, options.tail_eps),
                "poisson" | "deterministic" => {
                    if mu.fract() != 0.0 {
                        return Err(Error::Distribution(format!("deterministic demand {mu} is not integral")));
                    }
                    Ok(DemandDistribution::point(mu as usize))
                }
                other => Err(Error::Malformed(format!("unknown sidecar distribution '{other}'"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let n = dim - 1;
    let f = sidecar.f.unwrap_or(1.0);
    let fleet = match &sidecar.fleet {
        Some(m) => m.clone(),
        None => {
            let total: f64 = demands.iter().map(|d| d.mean()).sum();
            vec![ceil_tol(total / (f * capacity as f64)).clamp(1, n)]
        }
    };
    Instance::new(InstanceData {
        name: raw.headers.get("NAME").cloned().unwrap_or_else(|| "cvrplib".into()),
        distance,
        demands,
        capacity,
        load_factor: f,
        fleet,
        b_failure: sidecar.b_failure.unwrap_or(0.0),
        b_preventive: sidecar.b_preventive.unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // synthetic 5-node file in the usual layout, depot listed last
    const EUC: &str = "NAME : toy-n5\nCOMMENT : synthetic\nTYPE : CVRP\nDIMENSION : 5\nEDGE_WEIGHT_TYPE : EUC_2D\nCAPACITY : 10\nNODE_COORD_SECTION\n1 3 4\n2 0 4\n3 3 0\n4 6 4\n5 0 0\nDEMAND_SECTION\n1 2\n2 3\n3 1\n4 4\n5 0\nDEPOT_SECTION\n5\n-1\nEOF\n";

    #[test]
    fn euclidean_file_with_poisson_sidecar() {
        let inst = parse_cvrplib(EUC, &Sidecar::default(), &CvrplibOptions::default()).unwrap();
        assert_eq!(inst.n(), 4);
        assert_eq!(inst.name(), "toy-n5");
        let means: Vec<f64> = (1..=4).map(|i| inst.mean(i)).collect();
        assert_eq!(means, vec![2.0, 3.0, 1.0, 4.0]);
        assert!(inst.demand(1).is_poisson());
        // depot (0,0) to node 1 (3,4)
        assert_eq!(inst.distance(0, 1), 5.0);
        assert_eq!(inst.distance(1, 2), 3.0);
        assert_eq!(inst.fleet(), &[1]);
    }

    #[test]
    fn rounding_flag() {
        let text = EUC.replace("3 3 0", "3 1 1");
        let plain = parse_cvrplib(&text, &Sidecar::default(), &CvrplibOptions::default()).unwrap();
        assert!((plain.distance(0, 3) - 2f64.sqrt()).abs() < 1e-12);
        let opts = CvrplibOptions {
            round_distances: true,
            ..Default::default()
        };
        let rounded = parse_cvrplib(&text, &Sidecar::default(), &opts).unwrap();
        assert_eq!(rounded.distance(0, 3), 1.0);
    }

    #[test]
    fn explicit_lower_row() {
        let text = "NAME : ex\nDIMENSION : 3\nEDGE_WEIGHT_TYPE : EXPLICIT\nEDGE_WEIGHT_FORMAT : LOWER_ROW\nCAPACITY : 5\nEDGE_WEIGHT_SECTION\n4\n3 5\nDEMAND_SECTION\n1 0\n2 1\n3 2\nDEPOT_SECTION\n1\n-1\nEOF\n";
        let side = Sidecar {
            distribution: "deterministic".into(),
            ..Default::default()
        };
        let inst = parse_cvrplib(text, &side, &CvrplibOptions::default()).unwrap();
        assert_eq!(inst.distance(0, 1), 4.0);
        assert_eq!(inst.distance(0, 2), 3.0);
        assert_eq!(inst.distance(1, 2), 5.0);
        assert_eq!(inst.demand(2).prob(2), 1.0);
    }

    #[test]
    fn missing_capacity_is_malformed() {
        let text = EUC.replace("CAPACITY : 10\n", "");
        assert!(matches!(
            parse_cvrplib(&text, &Sidecar::default(), &CvrplibOptions::default()),
            Err(Error::Malformed(_))
        ));
    }
}
