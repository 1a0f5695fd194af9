//! Utility of an organization in a hierarchical information-retrieval
//! system.
//!
//! Every query is broadcast to every mediator and therefore visits every
//! node, so each node is an open M/M/1-style station with arrival rate equal
//! to the query rate:
//!
//! * a database answers with sojourn `1 / (mu_p - lambda)`;
//! * a node merging `c` replies has sojourn `1 / (mu_r / c - lambda)`;
//! * every hop down and back up costs `2 * latency`.
//!
//! A mediator without children hosts one database and merges its single
//! reply. With several mediators, the responsible one waits for the slowest
//! mediator and merges their results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::Level;
use crate::tree::{Node, OrganizationTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitnessError {
    #[error("{station} at level {level} is saturated: service rate {service_rate} <= query rate {query_rate}")]
    Infeasible {
        station: Station,
        level: Level,
        service_rate: f64,
        query_rate: f64,
    },
    #[error("invalid environment: {0}")]
    InvalidParams(String),
    #[error("evaluator failed: {0}")]
    Evaluator(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Station {
    Database,
    /// A node merging this many replies.
    Merge(usize),
    /// The cross-mediator merge at the responsible mediator.
    Mediators(usize),
}

impl std::fmt::Display for Station {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Station::Database => write!(f, "database"),
            Station::Merge(c) => write!(f, "merge of {c} replies"),
            Station::Mediators(k) => write!(f, "merge across {k} mediators"),
        }
    }
}

/// Evaluation environment. Latency is held in seconds and written as
/// milliseconds in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvironmentParams {
    #[serde(rename = "message_latency_ms", with = "millis")]
    pub message_latency: f64,
    pub process_service_rate: f64,
    pub response_service_rate: f64,
    pub query_rate: f64,
    pub utility_ceiling: f64,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seconds: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(seconds * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(|ms| ms / 1000.0)
    }
}

impl Default for EnvironmentParams {
    fn default() -> Self {
        EnvironmentParams {
            message_latency: 0.020,
            process_service_rate: 10.0,
            response_service_rate: 20.0,
            query_rate: 3.0,
            utility_ceiling: 1000.0,
        }
    }
}

impl EnvironmentParams {
    pub fn validate(&self) -> Result<(), FitnessError> {
        let fields = [
            ("message_latency", self.message_latency),
            ("process_service_rate", self.process_service_rate),
            ("response_service_rate", self.response_service_rate),
            ("query_rate", self.query_rate),
            ("utility_ceiling", self.utility_ceiling),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(FitnessError::InvalidParams(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Maps an organization to a utility. Implementations must be deterministic.
pub trait Evaluator {
    fn evaluate(&self, org: &OrganizationTree) -> Result<f64, FitnessError>;
}

impl<F> Evaluator for F
where
    F: Fn(&OrganizationTree) -> f64,
{
    fn evaluate(&self, org: &OrganizationTree) -> Result<f64, FitnessError> {
        Ok(self(org))
    }
}

/// Fraction of relevant data returned. Queries reach every database when the
/// search and query sets cover all mediators, so this is always 1.
pub fn recall(_org: &OrganizationTree, _env: &EnvironmentParams) -> f64 {
    1.0
}

fn sojourn(
    service_rate: f64,
    env: &EnvironmentParams,
    station: Station,
    level: Level,
) -> Result<f64, FitnessError> {
    if service_rate <= env.query_rate {
        return Err(FitnessError::Infeasible {
            station,
            level,
            service_rate,
            query_rate: env.query_rate,
        });
    }
    Ok(1.0 / (service_rate - env.query_rate))
}

fn merge_sojourn(children: usize, env: &EnvironmentParams, station: Station, level: Level) -> Result<f64, FitnessError> {
    sojourn(env.response_service_rate / children as f64, env, station, level)
}

fn node_time(node: &Node, env: &EnvironmentParams) -> Result<f64, FitnessError> {
    let hop = 2.0 * env.message_latency;
    let database = || sojourn(env.process_service_rate, env, Station::Database, node.level);
    if node.is_leaf() {
        let db = database()?;
        if node.level == 1 {
            // mediator hosting its own database
            return Ok(hop + db + merge_sojourn(1, env, Station::Merge(1), 1)?);
        }
        return Ok(db);
    }
    let mut slowest = 0.0f64;
    for child in &node.children {
        slowest = slowest.max(node_time(child, env)?);
    }
    let c = node.children.len();
    Ok(hop + slowest + merge_sojourn(c, env, Station::Merge(c), node.level)?)
}

/// System response time in seconds.
pub fn response_time(org: &OrganizationTree, env: &EnvironmentParams) -> Result<f64, FitnessError> {
    let mut slowest = 0.0f64;
    for root in &org.roots {
        slowest = slowest.max(node_time(root, env)?);
    }
    let k = org.roots.len();
    if k <= 1 {
        return Ok(slowest);
    }
    let merge = merge_sojourn(k, env, Station::Mediators(k), 1)?;
    Ok(2.0 * env.message_latency + slowest + merge)
}

/// `recall * max(0, ceiling - 1000 * response_time)`; infeasible
/// organizations score 0.
pub fn evaluate(org: &OrganizationTree, env: &EnvironmentParams) -> f64 {
    match response_time(org, env) {
        Ok(t) => recall(org, env) * (env.utility_ceiling - t * 1000.0).max(0.0),
        Err(_) => 0.0,
    }
}

/// The default evaluator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IrUtilityModel {
    pub env: EnvironmentParams,
}

impl IrUtilityModel {
    pub fn new(env: EnvironmentParams) -> Result<Self, FitnessError> {
        env.validate()?;
        Ok(IrUtilityModel { env })
    }
}

impl Evaluator for IrUtilityModel {
    fn evaluate(&self, org: &OrganizationTree) -> Result<f64, FitnessError> {
        Ok(evaluate(org, &self.env))
    }
}
