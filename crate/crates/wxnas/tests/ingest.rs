mod common;

use std::time::Duration;

use common::{archive_body, athens, client, date, ok, status, MockTransport};
use wxnas::ingest::{check_range, expected_hours, parse_archive, unix_midnight, RetryPolicy};
use wxnas::AppError;
use wxnas_core::{Feature, N_FEATURES};

#[test]
fn two_days_parse_into_48_rows_with_nulls_flagged() {
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let body = archive_body(s, e, &[(5, Feature::Precipitation), (47, Feature::CloudCover)]);
    let series = parse_archive(&body, &athens(), s, e).unwrap();
    assert_eq!(series.len(), 48);
    assert_eq!(series.start_time, 1_672_531_200);
    assert_eq!(series.timestamp(47), 1_672_531_200 + 47 * 3600);
    assert!(series.is_missing(5, Feature::Precipitation.index()));
    assert!(series.values.get(5, Feature::Precipitation.index()).is_nan());
    assert!(series.is_missing(47, Feature::CloudCover.index()));
    assert_eq!(series.missing_count(), 2);
    assert_eq!(series.values.get(10, Feature::WindSpeed10m.index()), 10.0 + Feature::WindSpeed10m.index() as f64 / 10.0);
}

#[test]
fn six_year_range_spans_52608_hours() {
    // 2019..=2024 holds two leap years: (6 * 365 + 2) * 24.
    assert_eq!(expected_hours(date(2019, 1, 1), date(2024, 12, 31)), 52_608);
    let body = archive_body(date(2019, 1, 1), date(2024, 12, 31), &[]);
    let series = parse_archive(&body, &athens(), date(2019, 1, 1), date(2024, 12, 31)).unwrap();
    assert_eq!(series.len(), 52_608);
    assert_eq!(series.values.cols(), N_FEATURES);
}

#[test]
fn missing_variable_is_named_in_the_error() {
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let mut v: serde_json::Value = serde_json::from_str(&archive_body(s, e, &[])).unwrap();
    v["hourly"].as_object_mut().unwrap().remove("surface_pressure");
    let err = parse_archive(&v.to_string(), &athens(), s, e).unwrap_err();
    assert!(matches!(&err, AppError::Data(m) if m.contains("hourly.surface_pressure")), "{err}");
}

#[test]
fn short_or_misaligned_payloads_are_rejected() {
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let short = archive_body(s, date(2023, 1, 1), &[]);
    assert!(matches!(parse_archive(&short, &athens(), s, e), Err(AppError::Data(_))));
    let shifted = archive_body(date(2022, 12, 31), date(2023, 1, 1), &[]);
    assert!(matches!(parse_archive(&shifted, &athens(), s, e), Err(AppError::Data(_))));
    assert!(matches!(parse_archive("not json", &athens(), s, e), Err(AppError::Data(_))));
}

#[test]
fn server_errors_are_retried_with_doubling_backoff() {
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let t = MockTransport::new(vec![status(503, None), Err("reset".into()), ok(archive_body(s, e, &[]))]);
    let (c, slept) = client(&t);
    let series = c.fetch_city_history(&athens(), s, e).unwrap();
    assert_eq!(series.len(), 48);
    assert_eq!(t.calls(), 3);
    assert_eq!(*slept.lock().unwrap(), vec![Duration::from_secs(1), Duration::from_secs(2)]);
}

#[test]
fn rate_limit_waits_at_least_retry_after() {
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let t = MockTransport::new(vec![status(429, Some(7)), ok(archive_body(s, e, &[]))]);
    let (c, slept) = client(&t);
    c.fetch_city_history(&athens(), s, e).unwrap();
    assert_eq!(*slept.lock().unwrap(), vec![Duration::from_secs(7)]);
}

#[test]
fn persistent_rate_limit_surfaces_as_rate_limited() {
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let t = MockTransport::new(vec![status(429, None), status(429, None), status(429, Some(3))]);
    let (c, slept) = client(&t);
    let err = c.fetch_city_history(&athens(), s, e).unwrap_err();
    assert!(matches!(err, AppError::RateLimited { attempts: 3, .. }), "{err}");
    assert_eq!(slept.lock().unwrap().len(), 2);
}

#[test]
fn exhausted_retries_report_network_error() {
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let t = MockTransport::new(vec![]);
    let (c, _) = client(&t);
    let c = c.with_policy(RetryPolicy { attempts: 4, initial_backoff: Duration::from_millis(1) });
    let err = c.fetch_city_history(&athens(), s, e).unwrap_err();
    assert!(matches!(err, AppError::Network { attempts: 4, .. }), "{err}");
    assert!(err.is_retriable());
    assert_eq!(t.calls(), 4);
}

#[test]
fn client_errors_fail_without_retry() {
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let t = MockTransport::new(vec![status(400, None)]);
    let (c, slept) = client(&t);
    let err = c.fetch_city_history(&athens(), s, e).unwrap_err();
    assert!(matches!(&err, AppError::Data(m) if m.contains("scripted")), "{err}");
    assert_eq!(t.calls(), 1);
    assert!(slept.lock().unwrap().is_empty());
}

#[test]
fn invalid_ranges_never_reach_the_network() {
    let t = MockTransport::new(vec![]);
    let (c, _) = client(&t);
    for (s, e) in [
        (date(2023, 1, 2), date(2023, 1, 1)),
        (date(2023, 1, 1), date(2023, 1, 1)),
        (date(1939, 12, 31), date(1940, 1, 5)),
        (date(2020, 1, 1), chrono::Utc::now().date_naive() + chrono::Duration::days(2)),
    ] {
        assert!(check_range(s, e).is_err(), "{s}..{e}");
        assert!(matches!(c.fetch_city_history(&athens(), s, e), Err(AppError::Core(_))));
    }
    assert_eq!(t.calls(), 0);
}

#[test]
fn request_names_location_range_and_all_variables() {
    let t = MockTransport::new(vec![]);
    let (c, _) = client(&t);
    let url = c.with_base_url("http://mock/archive").request_url(&athens(), date(2019, 1, 1), date(2024, 12, 31));
    assert!(url.starts_with("http://mock/archive?"));
    for part in ["latitude=37.98", "longitude=23.73", "start_date=2019-01-01", "end_date=2024-12-31", "timezone=UTC"] {
        assert!(url.contains(part), "{url} lacks {part}");
    }
    for f in Feature::ALL {
        assert!(url.contains(f.name()), "{url} lacks {}", f.name());
    }
    assert_eq!(unix_midnight(date(1970, 1, 2)), 86_400);
}
