//! Blocking JSON-over-HTTP client shared by the service-backed ports.
//!
//! Each call is one POST with a JSON body and a JSON response. Failed calls
//! are retried up to the configured count; the number of concurrent requests
//! is bounded per client.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Transport {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub url: String,
    #[serde(default = "ServiceConfig::default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "ServiceConfig::default_retries")]
    pub retries: u32,
    #[serde(default = "ServiceConfig::default_max_in_flight")]
    pub max_in_flight: usize,
}

impl ServiceConfig {
    pub fn new(url: impl Into<String>) -> Self {
        ServiceConfig {
            url: url.into(),
            timeout_ms: Self::default_timeout_ms(),
            retries: Self::default_retries(),
            max_in_flight: Self::default_max_in_flight(),
        }
    }

    fn default_timeout_ms() -> u64 {
        30_000
    }

    fn default_retries() -> u32 {
        2
    }

    fn default_max_in_flight() -> usize {
        4
    }
}

struct InFlight {
    limit: usize,
    count: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.0.count.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

pub struct JsonService {
    config: ServiceConfig,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl std::fmt::Debug for JsonService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonService").field("config", &self.config).finish()
    }
}

impl JsonService {
    pub fn new(config: ServiceConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let in_flight = InFlight {
            limit: config.max_in_flight.max(1),
            count: Mutex::new(0),
            freed: Condvar::new(),
        };
        JsonService {
            config,
            agent,
            in_flight,
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Posts `body` and decodes the response. Transport errors and non-2xx
    /// statuses are retried; an undecodable body is not.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp, ServiceError> {
        let _slot = self.in_flight.acquire();
        let url = &self.config.url;
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            match self.agent.post(url).send_json(body) {
                Ok(resp) => {
                    let text = resp.into_string().map_err(|e| ServiceError::Malformed {
                        url: url.clone(),
                        message: e.to_string(),
                    })?;
                    return serde_json::from_str(&text).map_err(|e| ServiceError::Malformed {
                        url: url.clone(),
                        message: e.to_string(),
                    });
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(ServiceError::Transport {
            url: url.clone(),
            attempts,
            message: last,
        })
    }
}
