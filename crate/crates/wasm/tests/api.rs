use isolab_wasm::api;
use serde_json::Value;

#[test]
fn gantt_two_vcpus_share_a_pcpu() {
    let spec = r#"{"policy":"EDF","pcpus":1,"horizon_ms":100,
        "vcpus":[{"budget_us":3000,"period_us":10000,"affinity":[0]},
                 {"budget_us":5000,"period_us":20000,"affinity":[0]}]}"#;
    let out: Value = serde_json::from_str(&api::rtds_gantt(spec).unwrap()).unwrap();
    let share: Vec<f64> = out["share"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((share[0] - 0.3).abs() < 1e-9);
    assert!((share[1] - 0.25).abs() < 1e-9);
    assert!(out["segments"].as_array().unwrap().iter().all(|s| s["extra"] == false));
}

#[test]
fn gantt_extratime_and_blocking() {
    let spec = r#"{"policy":"RM","pcpus":2,"horizon_ms":50,
        "vcpus":[{"budget_us":2000,"period_us":10000,"extratime":true,"affinity":[0,1]},
                 {"budget_us":4000,"period_us":10000,"affinity":[0],"busy_us":1000,"idle_us":3000}]}"#;
    let out: Value = serde_json::from_str(&api::rtds_gantt(spec).unwrap()).unwrap();
    let segs = out["segments"].as_array().unwrap();
    assert!(segs.iter().any(|s| s["extra"] == true));
    assert!(api::rtds_gantt(r#"{"policy":"EDF","pcpus":1,"horizon_ms":5000,"vcpus":[]}"#).is_err());
    assert!(api::rtds_gantt(r#"{"policy":"EDF","pcpus":1,"horizon_ms":10,"vcpus":[{"budget_us":9,"period_us":5,"affinity":[0]}]}"#).is_err());
}

#[test]
fn campaign_rows() {
    let out: Value = serde_json::from_str(&api::campaign(0.2, 1, 2, 10).unwrap()).unwrap();
    let rows = out["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][0], "LOW_FIFO");
    assert!(out["text"].as_str().unwrap().contains("HIGH_FIFO"));
    assert!(api::campaign(0.2, 1, 0, 10).is_err());
    assert!(api::campaign(0.2, 1, 1, 1).is_err());
}

#[test]
fn welch_hand_case() {
    let out: Value = serde_json::from_str(&api::welch("1,2,3,4,5", "2 3 4 5 6").unwrap()).unwrap();
    assert!((out["t"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!((out["p"].as_f64().unwrap() - 0.3466).abs() < 1e-4);
    assert_eq!(out["p_text"], "3.47E-01");
    assert!(api::welch("1,x", "2,3").is_err());
}
