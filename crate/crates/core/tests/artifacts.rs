use std::fs;

use mmsim::sim::output::{
    summary_json, write_drops_csv, write_run_artifacts, write_sweep_csv, ArtifactWriter,
    DROPS_HEADER, SWEEP_HEADER,
};
use mmsim::sim::{preset, run_experiment, sweep_tx_power, ScenarioConfig};
use mmsim::Error;
use tempfile::TempDir;

fn small(name: &str, drops: u64) -> ScenarioConfig {
    ScenarioConfig {
        drops,
        ..preset(name).unwrap()
    }
}

#[test]
fn drops_csv_is_long_format() {
    let result = run_experiment(&small("fig4", 7), 0).unwrap();
    let mut bytes = Vec::new();
    write_drops_csv(&result, &mut bytes).unwrap();
    let mut reader = csv::Reader::from_reader(&bytes[..]);
    assert_eq!(
        reader.headers().unwrap(),
        &csv::StringRecord::from(DROPS_HEADER.to_vec())
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    // 2 cells x 7 drops x 5 precoders x 4 UEs.
    assert_eq!(rows.len(), 280);
    for row in &rows {
        let sinr_db: f64 = row[3].parse().unwrap();
        let capacity: f64 = row[4].parse().unwrap();
        let expected = (1.0 + 10f64.powf(sinr_db / 10.0)).log2();
        assert!((capacity - expected).abs() < 1e-9 * expected.max(1e-3));
        assert_eq!(&row[7], "0.99");
    }
    assert!(rows.iter().any(|r| &r[6] == "nyu") && rows.iter().any(|r| &r[6] == "uma"));
}

#[test]
fn summary_carries_config_and_percentiles() {
    let mut cfg = small("fig2c", 25);
    cfg.master_seed = 99;
    let result = run_experiment(&cfg, 0).unwrap();
    let json: serde_json::Value = serde_json::from_str(&summary_json(&result).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["master_seed"], 99);
    assert_eq!(json["config"]["drops"], 25);
    assert!(json["version"].as_str().is_some_and(|v| !v.is_empty()));
    assert_eq!(json["total_failures"], 0);
    for s in json["cells"][0]["summaries"].as_array().unwrap() {
        assert_eq!(s["samples"], 100);
        let p = &s["sinr_percentiles_db"];
        let values: Vec<f64> = ["p5", "p25", "p50", "p75", "p95"]
            .iter()
            .map(|k| p[k].as_f64().unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        assert!(s["mean_capacity_bps_hz"].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(json["median_gaps_db"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_csv_has_one_row_per_point() {
    let sweep = sweep_tx_power(&small("fig3", 5), &[0.0, 30.0], 0).unwrap();
    let mut bytes = Vec::new();
    write_sweep_csv(&sweep, &mut bytes).unwrap();
    let mut reader = csv::Reader::from_reader(&bytes[..]);
    assert_eq!(
        reader.headers().unwrap(),
        &csv::StringRecord::from(SWEEP_HEADER.to_vec())
    );
    assert_eq!(reader.records().count(), 2 * 2 * 5);
}

#[test]
fn writer_refuses_existing_files_unless_forced() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("nested/out");
    let result = run_experiment(&small("fig2a", 2), 0).unwrap();

    let writer = ArtifactWriter::new(&out_dir, false).unwrap();
    let paths = write_run_artifacts(&result, &writer).unwrap();
    assert_eq!(paths.len(), 2);
    let before = fs::read(&paths[0]).unwrap();

    match write_run_artifacts(&result, &writer) {
        Err(Error::WouldOverwrite(path)) => assert_eq!(path, paths[0]),
        other => panic!("expected overwrite refusal, got {other:?}"),
    }
    let forced = ArtifactWriter::new(&out_dir, true).unwrap();
    write_run_artifacts(&result, &forced).unwrap();
    assert_eq!(fs::read(&paths[0]).unwrap(), before);
}
