//! HTTP client for an external scoring service.
//!
//! Protocol (JSON, UTF-8):
//!
//! ```text
//! POST /score   {"instances": [{"id": str, "prompt": str, "choices": [str, ...]}]}
//!            -> {"scores": [{"id": str, "confidences": [float, ...]}]}
//! GET  /health  -> {"status": "ok", "model": str}
//! ```
//!
//! Instances are sent in batches; up to `max_in_flight` batches are
//! outstanding at once. A failed batch is retried with exponential backoff,
//! three attempts in total.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ConfidenceSet, Scorer};
use crate::corpus::Instance;
use crate::error::{Error, Result};

pub const MAX_ATTEMPTS: u32 = 3;

pub(crate) fn default_batch_size() -> usize {
    32
}

pub(crate) fn default_timeout_secs() -> f64 {
    60.0
}

pub(crate) fn default_in_flight() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireInstance {
    pub id: String,
    pub prompt: String,
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub instances: Vec<WireInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireScore {
    pub id: String,
    pub confidences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<WireScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model: String,
}

impl ScoreRequest {
    pub fn from_instances(instances: &[Instance]) -> Self {
        ScoreRequest {
            instances: instances
                .iter()
                .map(|i| WireInstance { id: i.id.clone(), prompt: i.prompt.clone(), choices: i.choices.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    endpoint: String,
    batch_size: usize,
    timeout: Duration,
    max_in_flight: usize,
    backoff: Duration,
}

impl RemoteScorer {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteScorer {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            batch_size: default_batch_size(),
            timeout: Duration::from_secs_f64(default_timeout_secs()),
            max_in_flight: default_in_flight(),
            backoff: Duration::from_millis(200),
        }
    }

    pub fn batch_size(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        self.batch_size = n;
        Ok(self)
    }

    pub fn timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("max in-flight batches must be >= 1".into()));
        }
        self.max_in_flight = n;
        Ok(self)
    }

    /// Delay before the first retry; doubled for each further attempt.
    pub fn backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into()
    }

    pub fn health(&self) -> Result<Health> {
        let remote = |message: String| Error::Remote { batch: 0, message };
        self.agent()
            .get(&format!("{}/health", self.endpoint))
            .call()
            .map_err(|e| remote(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| remote(e.to_string()))
    }

    fn post_once(&self, agent: &ureq::Agent, batch: &[Instance]) -> std::result::Result<Vec<ConfidenceSet>, String> {
        let reply: ScoreResponse = agent
            .post(&format!("{}/score", self.endpoint))
            .send_json(ScoreRequest::from_instances(batch))
            .map_err(|e| e.to_string())?
            .body_mut()
            .read_json()
            .map_err(|e| format!("malformed reply: {e}"))?;
        if reply.scores.len() != batch.len() {
            return Err(format!("malformed reply: {} scores for {} instances", reply.scores.len(), batch.len()));
        }
        let by_id: HashMap<&str, &[f64]> =
            reply.scores.iter().map(|s| (s.id.as_str(), s.confidences.as_slice())).collect();
        batch
            .iter()
            .map(|inst| {
                let raw = by_id
                    .get(inst.id.as_str())
                    .ok_or_else(|| format!("malformed reply: no score for `{}`", inst.id))?;
                ConfidenceSet::from_raw(&inst.id, raw, inst.num_choices())
                    .map_err(|e| format!("malformed reply for `{}`: {e}", inst.id))
            })
            .collect()
    }

    fn post_with_retry(&self, agent: &ureq::Agent, index: usize, batch: &[Instance]) -> Result<Vec<ConfidenceSet>> {
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.post_once(agent, batch) {
                Ok(sets) => return Ok(sets),
                Err(e) => last = e,
            }
        }
        Err(Error::Remote { batch: index, message: format!("{last} (after {MAX_ATTEMPTS} attempts)") })
    }
}

impl Scorer for RemoteScorer {
    fn score(&self, instances: &[Instance]) -> Result<Vec<ConfidenceSet>> {
        let batches: Vec<&[Instance]> = instances.chunks(self.batch_size).collect();
        let results: Mutex<Vec<Option<Result<Vec<ConfidenceSet>>>>> =
            Mutex::new((0..batches.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let agent = self.agent();
        std::thread::scope(|scope| {
            for _ in 0..self.max_in_flight.min(batches.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= batches.len() {
                        break;
                    }
                    let r = self.post_with_retry(&agent, i, batches[i]);
                    let failed = r.is_err();
                    results.lock().expect("no panics while holding the lock")[i] = Some(r);
                    if failed {
                        // stop handing out new batches
                        next.store(batches.len(), Ordering::SeqCst);
                        break;
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(instances.len());
        // batches skipped after a failure stay `None`; the failing one carries the error
        for r in results.into_inner().expect("workers joined").into_iter().flatten() {
            out.extend(r?);
        }
        if out.len() != instances.len() {
            return Err(Error::Remote { batch: out.len() / self.batch_size, message: "scoring aborted".into() });
        }
        Ok(out)
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}
