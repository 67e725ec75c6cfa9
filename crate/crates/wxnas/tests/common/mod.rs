#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{Duration as Span, NaiveDate};
use serde_json::{json, Value};
use wxnas::ingest::{ArchiveClient, HttpResponse, Sleeper, Transport};
use wxnas_core::series::{CityRecord, Role};
use wxnas_core::Feature;

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn athens() -> CityRecord {
    CityRecord::new("Athens", 37.98, 23.73, "temperate", Role::Source).unwrap()
}

/// Archive JSON for `start..=end` whose value at (hour r, feature f) is
/// `r + f / 10`, with `nulls` entries replaced by JSON null.
pub fn archive_body(start: NaiveDate, end: NaiveDate, nulls: &[(usize, Feature)]) -> String {
    let days = (end - start).num_days() as usize + 1;
    let t0 = start.and_hms_opt(0, 0, 0).unwrap();
    let times: Vec<String> =
        (0..days * 24).map(|h| (t0 + Span::hours(h as i64)).format("%Y-%m-%dT%H:%M").to_string()).collect();
    let mut hourly = serde_json::Map::new();
    hourly.insert("time".into(), json!(times));
    for f in Feature::ALL {
        let col: Vec<Value> = (0..times.len())
            .map(|r| if nulls.contains(&(r, f)) { Value::Null } else { json!(r as f64 + f.index() as f64 / 10.0) })
            .collect();
        hourly.insert(f.name().into(), Value::Array(col));
    }
    json!({ "latitude": 37.98, "longitude": 23.73, "hourly": hourly }).to_string()
}

pub fn ok(body: String) -> Result<HttpResponse, String> {
    Ok(HttpResponse { status: 200, retry_after: None, body })
}

pub fn status(code: u16, retry_after: Option<u64>) -> Result<HttpResponse, String> {
    Ok(HttpResponse { status: code, retry_after, body: r#"{"error":true,"reason":"scripted"}"#.into() })
}

/// Replays scripted responses and counts requests; once the script runs
/// out, every request fails at the transport level.
#[derive(Clone, Default)]
pub struct MockTransport {
    script: Arc<Mutex<VecDeque<Result<HttpResponse, String>>>>,
    pub urls: Arc<Mutex<Vec<String>>>,
}

impl MockTransport {
    pub fn new(script: Vec<Result<HttpResponse, String>>) -> Self {
        Self { script: Arc::new(Mutex::new(script.into())), urls: Arc::default() }
    }

    pub fn push(&self, r: Result<HttpResponse, String>) {
        self.script.lock().unwrap().push_back(r);
    }

    pub fn calls(&self) -> usize {
        self.urls.lock().unwrap().len()
    }
}

impl Transport for MockTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, String> {
        self.urls.lock().unwrap().push(url.to_string());
        self.script.lock().unwrap().pop_front().unwrap_or_else(|| Err("connection refused".into()))
    }
}

/// A client over `transport` whose sleeps are recorded instead of taken.
pub fn client(transport: &MockTransport) -> (ArchiveClient, Arc<Mutex<Vec<Duration>>>) {
    let slept = Arc::new(Mutex::new(Vec::new()));
    let log = slept.clone();
    let sleeper: Sleeper = Arc::new(move |d| log.lock().unwrap().push(d));
    (ArchiveClient::new(Box::new(transport.clone())).with_sleeper(sleeper), slept)
}
