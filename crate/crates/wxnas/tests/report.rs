use std::fs;

use wxnas::cli::regenerate_figures;
use wxnas::report::{
    emit_comparison_report, emit_front_csv, emit_pareto_plot, emit_transfer_report, read_csv, ComparisonRow, FrontRow,
    TransferRow,
};

fn front() -> Vec<FrontRow> {
    let row = |g: &str, rmse, params, depth, rep: Option<&str>| FrontRow {
        genome: g.into(),
        val_rmse: rmse,
        params,
        depth,
        representative: rep.map(str::to_string),
    };
    vec![
        row("gru128-gru128", 0.0988, 153_096, 2, Some("accuracy")),
        row("cnn128", 0.1234567890123, 4_232, 1, Some("balanced")),
        row("cnn32", 0.15, 1_064, 1, Some("efficiency")),
        row("gru16-dense8@0.2", 0.13, 2_900, 2, None),
    ]
}

/// Genome names carried by the point tooltips of a scatter plot.
fn plotted_genomes(svg: &str) -> Vec<String> {
    svg.split("<circle class=\"point")
        .skip(1)
        .map(|c| {
            let t = &c[c.find("<title>").unwrap() + 7..];
            t[..t.find(" (").unwrap()].to_string()
        })
        .collect()
}

#[test]
fn comparison_csv_round_trips_with_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        ComparisonRow { model: "gru128x2".into(), params: 153_096, rmse: 0.0988, latency_ms: Some(0.47), size_bytes: Some(612_700) },
        ComparisonRow { model: "climatology".into(), params: 0, rmse: 0.21, latency_ms: None, size_bytes: None },
    ];
    let paths = emit_comparison_report(dir.path(), &rows).unwrap();
    assert_eq!(read_csv::<ComparisonRow>(&paths[0]).unwrap(), rows);
    let svg = fs::read_to_string(&paths[1]).unwrap();
    assert!(svg.contains("data-scale=\"log\""), "parameter panel must use a log axis");
    assert!(svg.contains("data-scale=\"linear\""));
}

#[test]
fn every_pareto_point_is_listed_in_front_csv() {
    let dir = tempfile::tempdir().unwrap();
    let rows = front();
    let csv = emit_front_csv(dir.path(), &rows).unwrap();
    let plot = emit_pareto_plot(dir.path(), &rows).unwrap();
    let listed: Vec<String> = read_csv::<FrontRow>(&csv).unwrap().into_iter().map(|r| r.genome).collect();
    let svg = fs::read_to_string(&plot[1]).unwrap();
    let plotted = plotted_genomes(&svg);
    assert_eq!(plotted.len(), rows.len());
    assert!(plotted.iter().all(|g| listed.contains(g)));
    assert_eq!(svg.matches("point highlight").count(), 3);
    assert!(svg.contains("<g class=\"axis x\" data-scale=\"log\">"));
    assert_eq!(read_csv::<FrontRow>(&plot[0]).unwrap(), rows);
}

#[test]
fn figures_regenerate_from_csv_alone() {
    let dir = tempfile::tempdir().unwrap();
    emit_front_csv(dir.path(), &front()).unwrap();
    let transfer = vec![TransferRow {
        fraction: 0.01,
        block_rows: 40,
        train_windows: 13,
        scratch_mean: 0.2,
        scratch_std: 0.01,
        transfer_mean: 0.1,
        transfer_std: 0.005,
        improvement_pct: 50.0,
        t_statistic: 9.0,
        p_value: 1e-6,
        wilcoxon_z: 4.0,
        wilcoxon_p: 1e-5,
        trials: 10,
    }];
    emit_transfer_report(dir.path(), &transfer).unwrap();
    let first = fs::read_to_string(dir.path().join("transfer.svg")).unwrap();
    fs::remove_file(dir.path().join("transfer.svg")).unwrap();
    let out = regenerate_figures(dir.path()).unwrap();
    assert!(out.iter().any(|p| p.ends_with("pareto.svg")));
    assert_eq!(fs::read_to_string(dir.path().join("transfer.svg")).unwrap(), first);
    assert_eq!(read_csv::<TransferRow>(&dir.path().join("transfer.csv")).unwrap(), transfer);
}

#[test]
fn empty_inputs_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_comparison_report(dir.path(), &[]).is_err());
    assert!(emit_pareto_plot(dir.path(), &[]).is_err());
}
