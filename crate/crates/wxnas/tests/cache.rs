mod common;

use std::fs;

use common::{archive_body, athens, client, date, ok, MockTransport};
use wxnas::cache::{cache_get_or_fetch, cache_path, read_series, write_series};
use wxnas::ingest::parse_archive;
use wxnas_core::series::{CityRecord, HourlySeries, Role};
use wxnas_core::synthetic::{generate_synthetic_city, ClimateProfile};
use wxnas_core::Feature;

fn bits(s: &HourlySeries) -> Vec<u64> {
    s.values.as_slice().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn write_then_read_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (s, e) = (date(2021, 3, 1), date(2021, 3, 4));
    let mut series = generate_synthetic_city(5, 96, ClimateProfile::Arid).unwrap();
    series.city = CityRecord::new("São Paulo", -23.55, -46.63, "tropical", Role::Target).unwrap();
    series.start_time = wxnas::ingest::unix_midnight(s);
    series.values.set(3, 0, 0.1 + 0.2);
    series.values.set(4, 1, -0.0);
    series.values.set(5, 2, 1e-300);
    series.values.set(6, 3, f64::NAN);
    series.missing[6 * 8 + 3] = true;

    let path = cache_path(dir.path(), &series.city, s, e);
    write_series(&path, &series, s, e).unwrap();
    let back = read_series(&path, &series.city, s, e).unwrap();
    assert_eq!(back.start_time, series.start_time);
    assert_eq!(back.missing, series.missing);
    assert_eq!(bits(&back), bits(&series));
    let header = fs::read_to_string(&path).unwrap();
    assert!(header.lines().nth(1).unwrap().starts_with("time,temperature_2m [°C],"));
}

#[test]
fn cache_hit_makes_no_request() {
    let dir = tempfile::tempdir().unwrap();
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let t = MockTransport::new(vec![ok(archive_body(s, e, &[(2, Feature::Precipitation)]))]);
    let (c, _) = client(&t);
    let first = cache_get_or_fetch(&c, &athens(), s, e, dir.path()).unwrap();
    assert_eq!(t.calls(), 1);
    let second = cache_get_or_fetch(&c, &athens(), s, e, dir.path()).unwrap();
    assert_eq!(t.calls(), 1);
    assert_eq!(bits(&first), bits(&second));
    assert_eq!(first.missing, second.missing);
    assert_eq!(second.missing_count(), 1);
}

#[test]
fn truncated_cache_file_is_refetched_and_repaired() {
    let dir = tempfile::tempdir().unwrap();
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let body = archive_body(s, e, &[]);
    let t = MockTransport::new(vec![ok(body.clone()), ok(body.clone())]);
    let (c, _) = client(&t);
    cache_get_or_fetch(&c, &athens(), s, e, dir.path()).unwrap();
    let path = cache_path(dir.path(), &athens(), s, e);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();

    let repaired = cache_get_or_fetch(&c, &athens(), s, e, dir.path()).unwrap();
    assert_eq!(t.calls(), 2);
    assert_eq!(bits(&repaired), bits(&parse_archive(&body, &athens(), s, e).unwrap()));
    assert!(read_series(&path, &athens(), s, e).is_ok());
}

#[test]
fn key_separates_city_range_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sofia = CityRecord::new("Sofia", 42.7, 23.32, "continental", Role::Target).unwrap();
    let a = cache_path(d, &athens(), date(2019, 1, 1), date(2024, 12, 31));
    assert_ne!(a, cache_path(d, &sofia, date(2019, 1, 1), date(2024, 12, 31)));
    assert_ne!(a, cache_path(d, &athens(), date(2019, 1, 2), date(2024, 12, 31)));
    assert_ne!(a, cache_path(d, &athens(), date(2019, 1, 1), date(2024, 12, 30)));
    assert!(a.file_name().unwrap().to_string_lossy().ends_with("_v1.csv"));
    // A file stored under another range is never accepted for this one.
    let (s, e) = (date(2023, 1, 1), date(2023, 1, 2));
    let series = parse_archive(&archive_body(s, e, &[]), &athens(), s, e).unwrap();
    let path = cache_path(d, &athens(), s, e);
    write_series(&path, &series, s, e).unwrap();
    assert!(read_series(&path, &athens(), s, date(2023, 1, 3)).is_err());
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

    #[test]
    fn any_finite_values_round_trip(
        cells in proptest::collection::vec(
            proptest::prop_oneof![
                proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
                proptest::strategy::Just(f64::NAN),
            ],
            24 * 8,
        )
    ) {
        let dir = tempfile::tempdir().unwrap();
        let (s, e) = (date(2020, 2, 29), date(2020, 2, 29));
        let missing: Vec<bool> = cells.iter().map(|v| v.is_nan()).collect();
        let values = wxnas_core::series::Matrix::from_vec(24, 8, cells).unwrap();
        let series = HourlySeries::new(athens(), wxnas::ingest::unix_midnight(s), values, missing).unwrap();
        let path = cache_path(dir.path(), &athens(), s, e);
        write_series(&path, &series, s, e).unwrap();
        let back = read_series(&path, &athens(), s, e).unwrap();
        proptest::prop_assert_eq!(&back.missing, &series.missing);
        proptest::prop_assert_eq!(bits(&back), bits(&series));
    }
}
