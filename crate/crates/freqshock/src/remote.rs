//! Remote HTTP backend: POST /v1/predict with bounded in-flight requests,
//! retries, and logprob-to-probability conversion.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Query;
use crate::predict::{
    aggregate_candidates, Backend, PredictContext, RawDecoderOutput, ScoredCandidates, Variant,
};

/// Environment variable overriding the endpoint at the CLI.
pub const ENDPOINT_ENV: &str = "FREQSHOCK_ENDPOINT";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_RETRIES: u32 = 2;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL, e.g. "http://host:port".
    pub endpoint: String,
    pub timeout: Duration,
    /// Additional attempts after the first on transport failure.
    pub retries: u32,
    pub max_in_flight: usize,
    /// Mask sentinels the remote decoder emits around the answer span.
    pub sentinels: (String, String),
    /// Whether the remote model was finetuned (enables the FT variant).
    pub assume_finetuned: bool,
}

impl RemoteConfig {
    pub fn new(endpoint: &str) -> Self {
        RemoteConfig {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            timeout: DEFAULT_TIMEOUT,
            retries: DEFAULT_RETRIES,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            sentinels: ("<extra_id_0>".to_string(), "<extra_id_1>".to_string()),
            assume_finetuned: false,
        }
    }
}

#[derive(Debug, Serialize)]
struct PredictRequest<'a> {
    prompt: &'a str,
    top_k: usize,
}

#[derive(Debug, Deserialize)]
struct PredictResponse {
    outputs: Vec<OutputRow>,
}

#[derive(Debug, Deserialize)]
struct OutputRow {
    text: String,
    logprob: f64,
}

/// Counting semaphore bounding concurrent requests.
struct Semaphore {
    available: Mutex<usize>,
    signal: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            available: Mutex::new(permits),
            signal: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.signal.wait(available).unwrap();
        }
        *available -= 1;
    }

    fn release(&self) {
        *self.available.lock().unwrap() += 1;
        self.signal.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    in_flight: Semaphore,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.max_in_flight == 0 {
            return Err(Error::InvalidInput(
                "max in-flight requests must be positive".to_string(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let in_flight = Semaphore::new(config.max_in_flight);
        Ok(RemoteBackend {
            config,
            client,
            in_flight,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Issues one prediction request, retrying transport failures up to
    /// `retries` additional times. Server output order is preserved.
    pub fn remote_predict(&self, prompt: &str, top_k: usize) -> Result<Vec<RawDecoderOutput>> {
        self.in_flight.acquire();
        let result = self.request_with_retries(prompt, top_k);
        self.in_flight.release();
        result
    }

    fn request_with_retries(&self, prompt: &str, top_k: usize) -> Result<Vec<RawDecoderOutput>> {
        let url = format!("{}/v1/predict", self.config.endpoint);
        let body = PredictRequest { prompt, top_k };
        let mut last_error = String::new();
        for _attempt in 0..=self.config.retries {
            match self.client.post(&url).json(&body).send() {
                Err(e) => {
                    last_error = e.to_string();
                    continue;
                }
                Ok(response) => {
                    let status = response.status();
                    if !status.is_success() {
                        return Err(Error::RemoteStatus(status.as_u16()));
                    }
                    let parsed: PredictResponse = response
                        .json()
                        .map_err(|e| Error::Protocol(format!("malformed response: {e}")))?;
                    return parsed
                        .outputs
                        .into_iter()
                        .map(|row| {
                            RawDecoderOutput::new(&row.text, row.logprob.exp()).map_err(|e| {
                                Error::Protocol(format!(
                                    "logprob {} maps to an invalid probability: {e}",
                                    row.logprob
                                ))
                            })
                        })
                        .collect();
                }
            }
        }
        Err(Error::Transport(format!(
            "request to {url} failed after {} attempt(s): {last_error}",
            self.config.retries + 1
        )))
    }
}

impl Backend for RemoteBackend {
    fn supports(&self, variant: Variant) -> bool {
        match variant {
            Variant::Zs | Variant::Fs => true,
            Variant::Ft => self.config.assume_finetuned,
            Variant::Rr => false,
        }
    }

    fn predict(
        &self,
        variant: Variant,
        query: &Query,
        ctx: &PredictContext,
        top_k: usize,
    ) -> Result<ScoredCandidates> {
        if !self.supports(variant) {
            return Err(Error::UnsupportedVariant(variant.as_str().to_string()));
        }
        let prompt = match variant {
            Variant::Fs => {
                let demos = ctx.require_demos()?;
                let prefix = demos.render_prefix(&query.relation, ctx.demos_per_relation, ctx.seed);
                format!("{prefix}{}", query.prompt)
            }
            _ => query.prompt.clone(),
        };
        let outputs = self.remote_predict(&prompt, top_k)?;
        let sentinels = (
            self.config.sentinels.0.as_str(),
            self.config.sentinels.1.as_str(),
        );
        Ok(aggregate_candidates(&query.query_id, &outputs, sentinels)?.truncated(top_k))
    }
}
