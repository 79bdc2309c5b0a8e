//! End-to-end checks of the binary's external surfaces: subcommands, file
//! formats, exit codes, and output determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twoprice"))
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("twoprice-test-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).expect("temp file");
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn paper_instances_feed_other_commands() {
    let market = run(&["paper-instance", "appendixE"]);
    let market_json = String::from_utf8(market.stdout).unwrap();
    assert!(market.status.success());
    let path = write_temp("appe.json", &market_json);

    let classify = stdout_json(&run(&["classify", path.to_str().unwrap()]));
    assert_eq!(classify["m"], 27);
    assert_eq!(classify["classes"][0], serde_json::json!(["Subadditive"]));

    let min_d = stdout_json(&run(&["min-discrepancy", path.to_str().unwrap()]));
    assert_eq!(min_d["discrepancy"], "6/5");
    assert_eq!(min_d["split"], serde_json::json!([6, 21]));

    let geometry = stdout_json(&run(&["geometry", path.to_str().unwrap(), "--buyer", "0"]));
    assert_eq!(geometry["intersection_indices"], serde_json::json!([0, 1, 5, 27]));
    assert_eq!(geometry["triangle_slopes"], serde_json::json!(["1", "1/4", "2/11"]));
}

#[test]
fn verify_exit_codes() {
    let market = r#"{"m": 2, "buyers": [
        {"kind": "symmetric", "values": ["0", "1", "1"]},
        {"kind": "symmetric", "values": ["0", "1", "1"]}
    ]}"#;
    let market_path = write_temp("m2.json", market);

    // One item each at zero prices is a Walrasian equilibrium here.
    let good = write_temp(
        "eq-good.json",
        r#"{"allocation": [1, 1], "prices": ["0", "0"]}"#,
    );
    let out = run(&[
        "verify",
        "--kind",
        "we",
        market_path.to_str().unwrap(),
        good.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    // Both items to one buyer at price 1 each: she drops one.
    let bad = write_temp(
        "eq-bad.json",
        r#"{"allocation": [2, 0], "prices": ["1", "1"]}"#,
    );
    let out = run(&[
        "verify",
        "--kind",
        "we",
        market_path.to_str().unwrap(),
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "witnessed failure exits 2");
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["report"]["holds"], false);
    assert!(value["report"]["witness"]["buyer"].is_number());

    // Malformed input exits 3.
    let broken = write_temp("broken.json", "{not json");
    let out = run(&[
        "verify",
        "--kind",
        "we",
        broken.to_str().unwrap(),
        good.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // Non-uniform prices on a big symmetric market need the bundle table,
    // which is capped: exits 4.
    let mut values = vec!["0".to_string()];
    for k in 1..=25 {
        values.push(k.to_string());
    }
    let big_market = format!(
        r#"{{"m": 25, "buyers": [{{"kind": "symmetric", "values": {values:?}}},
            {{"kind": "symmetric", "values": {values:?}}}]}}"#
    );
    let big_path = write_temp("m25.json", &big_market);
    let mut high = vec!["9".to_string(); 25];
    high[0] = "10".to_string(); // breaks per-bundle uniformity
    let low = vec!["0".to_string(); 25];
    let eq = format!(r#"{{"allocation": [25, 0], "high": {high:?}, "low": {low:?}}}"#);
    let eq_path = write_temp("eq25.json", &eq);
    let out = run(&[
        "verify",
        "--kind",
        "2pe",
        big_path.to_str().unwrap(),
        eq_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reproduce_fixtures_and_plotdata() {
    let table = stdout_json(&run(&["reproduce", "table1"]));
    assert_eq!(table["min_discrepancy"], "6/5");
    assert_eq!(table["rows"].as_array().unwrap().len(), 14);

    let example = stdout_json(&run(&["reproduce", "ex3.2"]));
    assert_eq!(example["discrepancy"], "17/15");

    let market = run(&["paper-instance", "appendixE"]);
    let path = write_temp("appe2.json", &String::from_utf8(market.stdout).unwrap());
    let csv = run(&["plotdata", path.to_str().unwrap(), "--buyer", "1"]);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 29); // header + 28 rows
    assert_eq!(lines[0], "k,value,closure,forward_slope,backward_slope,flat_slope");
    // The closure column dominates the value column.
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        let value = twoprice_core::rational::parse_rat(cells[1]).unwrap();
        let closure = twoprice_core::rational::parse_rat(cells[2]).unwrap();
        assert!(closure >= value);
    }
}

#[test]
fn auction_commands() {
    let market = r#"{"m": 2, "buyers": [
        {"kind": "general", "values": {"0": "0", "1": "2", "2": "1", "3": "2"}},
        {"kind": "general", "values": {"0": "0", "1": "1", "2": "2", "3": "2"}}
    ]}"#;
    let market_path = write_temp("auction-market.json", market);
    let bids = write_temp(
        "bids.json",
        r#"{"bids": [["2", "0"], ["0", "2"]]}"#,
    );
    let resolved = stdout_json(&run(&[
        "auction",
        "resolve",
        market_path.to_str().unwrap(),
        bids.to_str().unwrap(),
    ]));
    assert_eq!(resolved["allocation"], serde_json::json!([[0], [1]]));
    assert_eq!(resolved["payments"], serde_json::json!(["0", "0"]));

    let checked = stdout_json(&run(&[
        "auction",
        "check",
        market_path.to_str().unwrap(),
        bids.to_str().unwrap(),
        "--tiebreak",
        "index",
    ]));
    assert_eq!(checked["report"]["holds"], true);
    assert_eq!(checked["high"], serde_json::json!(["2", "2"]));
    assert_eq!(checked["low"], serde_json::json!(["0", "0"]));
}

#[test]
fn endowment_conversion() {
    let market = run(&["paper-instance", "ex3.2"]);
    let market_path = write_temp("ex32.json", &String::from_utf8(market.stdout).unwrap());
    let eq = write_temp(
        "ex32-eq.json",
        r#"{"allocation": [[0, 1, 2, 3], []],
            "high": ["9/10", "9/10", "9/10", "9/10"],
            "low": ["1/3", "1/3", "1/3", "1/3"]}"#,
    );
    let out = stdout_json(&run(&[
        "endowment",
        "convert",
        market_path.to_str().unwrap(),
        eq.to_str().unwrap(),
    ]));
    assert_eq!(out["endowment_report"]["holds"], true);
    assert_eq!(out["recovered_report"]["holds"], true);
    assert_eq!(out["recovered_low"], serde_json::json!(["1/3", "1/3", "1/3", "1/3"]));
    assert_eq!(out["gains"][0]["full_gain"], "34/15");
}

#[test]
fn pipeline_is_deterministic() {
    let market = run(&["paper-instance", "appendixE"]);
    let path = write_temp("appe3.json", &String::from_utf8(market.stdout).unwrap());
    let first = stdout_json(&run(&["pipeline", path.to_str().unwrap()]));
    let second = stdout_json(&run(&["pipeline", path.to_str().unwrap()]));
    assert_eq!(first["results"], second["results"]);
    assert_eq!(first["inputs_digest"], second["inputs_digest"]);
    assert_eq!(first["results"]["discrepancy"], "11/9");
    assert_eq!(first["results"]["allocate"]["bound"], "2");
    assert_eq!(first["results"]["welfare_bound_holds"], true);
    // The step market admits no Walrasian equilibrium, but the pipeline's
    // bound still holds through the price support.
    assert_eq!(first["results"]["verify"]["holds"], true);
}
