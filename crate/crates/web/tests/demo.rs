use edgesched_web::{compare, motivating, share_link};
use serde_json::Value;

fn parse(text: String) -> Value {
    serde_json::from_str(&text).unwrap()
}

#[test]
fn motivating_reports_four_strategies() {
    let v = parse(motivating().unwrap());
    assert!((v["least_request"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!(v["optimal_routing"].as_f64().unwrap() >= v["proportional"].as_f64().unwrap() - 1e-9);
}

#[test]
fn shared_link_splits_by_volume() {
    let v = parse(share_link(10.0, &[2.0, 1.0, 1.0]).unwrap());
    let rates: Vec<f64> = v["proportional"]["rates"].as_array().unwrap().iter().map(|r| r.as_f64().unwrap()).collect();
    assert_eq!(rates.len(), 3);
    assert!((rates[0] - 5.0).abs() < 1e-12 && (rates[1] - 2.5).abs() < 1e-12);
    assert!((v["proportional"]["period"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!((v["equal"]["period"].as_f64().unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn compare_runs_every_scheduler() {
    let v = parse(compare(8, 1.0, 5, 3).unwrap());
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
    assert_eq!(v["power"].as_array().unwrap().len(), 8);
    assert!(!v["links"].as_array().unwrap().is_empty());
}
