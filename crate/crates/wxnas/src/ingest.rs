//! Open-Meteo historical archive client.
//!
//! The HTTP layer sits behind [`Transport`] so tests can script responses,
//! and sleeping between retries goes through an injectable function so retry
//! timing is testable without waiting.

use std::sync::Arc;
use std::time::Duration;

use chrono::{NaiveDate, NaiveDateTime, Utc};
use serde_json::Value;
use wxnas_core::calendar::hours_inclusive;
use wxnas_core::series::{CityRecord, HourlySeries, Matrix};
use wxnas_core::{Feature, N_FEATURES};

use crate::error::{AppError, Result};

pub const ARCHIVE_URL: &str = "https://archive-api.open-meteo.com/v1/archive";

/// First day the archive serves.
pub fn archive_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(1940, 1, 1).expect("valid date")
}

const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// `Retry-After` in seconds, when the server sent one.
    pub retry_after: Option<u64>,
    pub body: String,
}

/// A single blocking GET. `Err` means no response arrived at all.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, String> {
        let mut resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse().ok());
        let body = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, retry_after, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, initial_backoff: Duration::from_secs(1) }
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub struct ArchiveClient {
    transport: Box<dyn Transport>,
    base_url: String,
    policy: RetryPolicy,
    sleep: Sleeper,
}

impl ArchiveClient {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            base_url: ARCHIVE_URL.to_string(),
            policy: RetryPolicy::default(),
            sleep: Arc::new(std::thread::sleep),
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_sleeper(mut self, sleep: Sleeper) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn with_base_url(mut self, url: impl Into<String>) -> Self {
        self.base_url = url.into();
        self
    }

    pub fn request_url(&self, city: &CityRecord, start: NaiveDate, end: NaiveDate) -> String {
        let hourly: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).collect();
        format!(
            "{}?latitude={}&longitude={}&start_date={}&end_date={}&hourly={}&timezone=UTC",
            self.base_url,
            city.latitude,
            city.longitude,
            start.format("%Y-%m-%d"),
            end.format("%Y-%m-%d"),
            hourly.join(",")
        )
    }

    /// Hourly records for the whole days `start..=end` (UTC). API nulls are
    /// kept as rows flagged in the missing mask.
    pub fn fetch_city_history(&self, city: &CityRecord, start: NaiveDate, end: NaiveDate) -> Result<HourlySeries> {
        check_range(start, end)?;
        let body = self.get_with_retry(&self.request_url(city, start, end))?;
        parse_archive(&body, city, start, end)
    }

    fn get_with_retry(&self, url: &str) -> Result<String> {
        let attempts = self.policy.attempts.max(1);
        let mut backoff = self.policy.initial_backoff;
        let mut last = AppError::Network { attempts: 0, message: "no attempt made".into() };
        for attempt in 1..=attempts {
            let mut wait = backoff;
            match self.transport.get(url) {
                Ok(r) if (200..300).contains(&r.status) => return Ok(r.body),
                Ok(r) if r.status == 429 => {
                    let hinted = r.retry_after.unwrap_or(0);
                    wait = wait.max(Duration::from_secs(hinted));
                    last = AppError::RateLimited { attempts: attempt, retry_after_secs: wait.as_secs() };
                }
                Ok(r) if r.status >= 500 => {
                    last = AppError::Network { attempts: attempt, message: format!("HTTP {}", r.status) };
                }
                Ok(r) => {
                    return Err(AppError::Data(format!(
                        "archive rejected the request (HTTP {}): {}",
                        r.status,
                        error_reason(&r.body)
                    )));
                }
                Err(message) => last = AppError::Network { attempts: attempt, message },
            }
            if attempt < attempts {
                log::warn!("archive request failed ({last}); retrying in {wait:?}");
                (self.sleep)(wait);
                backoff *= 2;
            }
        }
        Err(last)
    }
}

fn error_reason(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v.get("reason").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_else(|| body.chars().take(200).collect())
}

pub fn check_range(start: NaiveDate, end: NaiveDate) -> Result<()> {
    if start >= end {
        return Err(AppError::Core(wxnas_core::Error::Precondition(format!(
            "start date {start} must precede end date {end}"
        ))));
    }
    let today = Utc::now().date_naive();
    if start < archive_start() || end > today {
        return Err(AppError::Core(wxnas_core::Error::Precondition(format!(
            "range {start}..={end} is outside the archive's {}..={today}",
            archive_start()
        ))));
    }
    Ok(())
}

pub fn unix_midnight(d: NaiveDate) -> i64 {
    d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp()
}

/// Hours covered by `start..=end`.
pub fn expected_hours(start: NaiveDate, end: NaiveDate) -> usize {
    let day = |d: NaiveDate| unix_midnight(d).div_euclid(86_400);
    hours_inclusive(day(start), day(end))
}

/// Parses an archive JSON payload into a series for `start..=end`.
pub fn parse_archive(body: &str, city: &CityRecord, start: NaiveDate, end: NaiveDate) -> Result<HourlySeries> {
    let root: Value = serde_json::from_str(body).map_err(|e| AppError::Data(format!("invalid JSON: {e}")))?;
    let hourly = root.get("hourly").ok_or_else(|| AppError::Data("missing field `hourly`".into()))?;
    let field = |name: &str| -> Result<&Vec<Value>> {
        hourly
            .get(name)
            .and_then(Value::as_array)
            .ok_or_else(|| AppError::Data(format!("missing field `hourly.{name}`")))
    };
    let times = field("time")?;
    let n = expected_hours(start, end);
    if times.len() != n {
        return Err(AppError::Data(format!("`hourly.time` has {} entries, expected {n}", times.len())));
    }
    let first = times[0]
        .as_str()
        .and_then(|s| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M").ok())
        .ok_or_else(|| AppError::Data("`hourly.time[0]` is not an ISO-8601 hour".into()))?;
    let start_time = first.and_utc().timestamp();
    if start_time != unix_midnight(start) {
        return Err(AppError::Data(format!("`hourly.time` starts at {first}, expected {start}T00:00")));
    }

    let mut data = vec![f64::NAN; n * N_FEATURES];
    let mut missing = vec![false; n * N_FEATURES];
    for feature in Feature::ALL {
        let col = field(feature.name())?;
        if col.len() != n {
            return Err(AppError::Data(format!(
                "`hourly.{}` has {} entries, expected {n}",
                feature.name(),
                col.len()
            )));
        }
        let f = feature.index();
        for (r, v) in col.iter().enumerate() {
            match v {
                Value::Null => missing[r * N_FEATURES + f] = true,
                v => {
                    data[r * N_FEATURES + f] = v.as_f64().ok_or_else(|| {
                        AppError::Data(format!("`hourly.{}[{r}]` is not a number", feature.name()))
                    })?
                }
            }
        }
    }
    Ok(HourlySeries::new(city.clone(), start_time, Matrix::from_vec(n, N_FEATURES, data)?, missing)?)
}
