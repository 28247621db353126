//! HTTP client for external learned graders (the only network surface).
//!
//! Wire contract: POST a JSON body `{"question", "gold_answers", "attempt"}`;
//! the grader answers `{"score": <number in [0,1]>, "justification"?: <str>}`.
//! Anything other than HTTP 200 with a valid body is a failure.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dataset::{QARecord, Score};
use crate::error::{Error, Result};
use crate::metrics::MetricId;

/// Connection settings for one registered external grader.
#[derive(Debug, Clone)]
pub struct ExternalGraderConfig {
    pub id: MetricId,
    pub endpoint: String,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl ExternalGraderConfig {
    pub fn new(
        id: MetricId,
        endpoint: impl Into<String>,
        timeout: Duration,
        max_retries: u32,
    ) -> Result<Self> {
        if timeout.is_zero() {
            return Err(Error::InvalidGraderTimeout);
        }
        Ok(ExternalGraderConfig {
            id,
            endpoint: endpoint.into(),
            timeout,
            max_retries,
        })
    }
}

#[derive(Serialize)]
struct GradeRequest<'a> {
    question: &'a str,
    gold_answers: &'a [String],
    attempt: &'a str,
}

#[derive(Deserialize)]
struct GradeResponse {
    score: f64,
    #[serde(default)]
    justification: Option<String>,
}

/// A validated grader verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedAnswer {
    pub score: Score,
    pub justification: Option<String>,
}

/// Grades one record against the configured endpoint.
///
/// Transport failures (unreachable endpoint, timeout) are retried up to
/// `max_retries` more times; protocol failures (non-200 status, malformed
/// body, out-of-range score) are not retried.
pub fn external_grade(cfg: &ExternalGraderConfig, record: &QARecord) -> Result<GradedAnswer> {
    let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
    let body = GradeRequest {
        question: &record.question,
        gold_answers: &record.gold_answers,
        attempt: &record.attempt,
    };

    let attempts = cfg.max_retries + 1;
    let mut last_transport_error = String::new();
    for _ in 0..attempts {
        match agent.post(&cfg.endpoint).send_json(&body) {
            Ok(response) => return parse_grade(response),
            Err(ureq::Error::Status(code, _)) => {
                return Err(Error::GraderProtocol(format!(
                    "endpoint returned HTTP {code}"
                )));
            }
            Err(ureq::Error::Transport(transport)) => {
                last_transport_error = transport.to_string();
            }
        }
    }
    Err(Error::GraderUnavailable {
        attempts,
        reason: last_transport_error,
    })
}

fn parse_grade(response: ureq::Response) -> Result<GradedAnswer> {
    let parsed: GradeResponse = response
        .into_json()
        .map_err(|e| Error::GraderProtocol(format!("invalid response body: {e}")))?;
    let score = Score::new(parsed.score)
        .map_err(|_| Error::GraderProtocol(format!("score out of range: {}", parsed.score)))?;
    Ok(GradedAnswer {
        score,
        justification: parsed.justification,
    })
}
