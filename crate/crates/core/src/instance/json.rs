//! Native JSON instance format.

use super::{ceil_tol, Instance, InstanceData};
use crate::demand::{DemandDistribution, DemandFamily};
use crate::error::{Error, Result};
use crate::DEFAULT_TAIL_EPS;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DemandSpec {
    Poisson { lambda: f64 },
    Discrete { support: Vec<usize>, mass: Vec<f64> },
    Triangular { center: usize, halfwidth: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub distance: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub capacity: usize,
    pub f: AutoOr<f64>,
    #[serde(rename = "M")]
    pub fleet: AutoOr<Vec<usize>>,
    #[serde(rename = "bF")]
    pub b_failure: f64,
    #[serde(rename = "bP")]
    pub b_preventive: f64,
    pub demands: Vec<DemandSpec>,
    /// Condition each demand on `ξ ≤ Q` (renormalized).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncate_at_capacity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_eps: Option<f64>,
}

impl DemandSpec {
    pub fn build(&self, tail_eps: f64) -> Result<DemandDistribution> {
        match self {
            DemandSpec::Poisson { lambda } => DemandDistribution::poisson(*lambda, tail_eps),
            DemandSpec::Discrete { support, mass } => DemandDistribution::discrete(support, mass),
            DemandSpec::Triangular { center, halfwidth } => DemandDistribution::triangular(*center, *halfwidth),
        }
    }

    fn describe(d: &DemandDistribution) -> Self {
        match d.family() {
            DemandFamily::Poisson { lambda } => DemandSpec::Poisson { lambda: *lambda },
            DemandFamily::Triangular { center, halfwidth } => DemandSpec::Triangular {
                center: *center,
                halfwidth: *halfwidth,
            },
            DemandFamily::Discrete => {
                let (support, mass) = d.support().unzip();
                DemandSpec::Discrete { support, mass }
            }
        }
    }
}

impl InstanceDoc {
    pub fn build(&self) -> Result<Instance> {
        if self.demands.len() != self.n {
            return Err(Error::Malformed(format!(
                "n = {} but {} demand entries",
                self.n,
                self.demands.len()
            )));
        }
        let tail_eps = self.tail_eps.unwrap_or(DEFAULT_TAIL_EPS);
        let demands = self
            .demands
            .iter()
            .enumerate()
            .map(|(k, spec)| {
                spec.build(tail_eps)
                    .map_err(|e| Error::Distribution(format!("customer {}: {e}", k + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        // "auto" load factor keeps the expected-capacity constraint
        let f = match self.f {
            AutoOr::Value(v) => v,
            AutoOr::Auto(_) => 1.0,
        };
        let fleet = match &self.fleet {
            AutoOr::Value(v) => v.clone(),
            AutoOr::Auto(_) => {
                let total: f64 = demands.iter().map(|d| d.mean()).sum();
                let lo = ceil_tol(total / (f * self.capacity as f64)).max(1);
                (lo..=self.n).collect()
            }
        };
        let inst = Instance::new(InstanceData {
            name: self.name.clone().unwrap_or_else(|| "instance".into()),
            distance: self.distance.clone(),
            demands,
            capacity: self.capacity,
            load_factor: f,
            fleet,
            b_failure: self.b_failure,
            b_preventive: self.b_preventive,
        })?;
        if self.truncate_at_capacity {
            inst.truncated_at_capacity()
        } else {
            Ok(inst)
        }
    }

    pub fn from_instance(inst: &Instance) -> Self {
        InstanceDoc {
            name: Some(inst.name().to_string()),
            n: inst.n(),
            distance: inst.distance_matrix(),
            capacity: inst.capacity(),
            f: AutoOr::Value(inst.load_factor()),
            fleet: AutoOr::Value(inst.fleet().to_vec()),
            b_failure: inst.b_failure(),
            b_preventive: inst.b_preventive(),
            demands: inst.demands().iter().map(DemandSpec::describe).collect(),
            truncate_at_capacity: false,
            tail_eps: None,
        }
    }
}

pub fn parse_json(text: &str) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Malformed(format!("instance JSON: {e}")))?;
    doc.build()
}

pub fn to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceDoc::from_instance(inst)).expect("instance serializes")
}
