use adaptrain_core::env::metrics::{average_precision, compute_map};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    name: String,
    scores: Vec<i64>,
    labels: Vec<u8>,
    ap: f64,
}

#[derive(Deserialize)]
struct Vectors {
    version: u32,
    cases: Vec<Case>,
}

fn vectors() -> Vectors {
    serde_json::from_str(include_str!("../data/ap_vectors.json")).unwrap()
}

fn inputs(c: &Case) -> (Vec<f64>, Vec<bool>) {
    (c.scores.iter().map(|&s| s as f64).collect(), c.labels.iter().map(|&l| l == 1).collect())
}

#[test]
fn average_precision_is_bit_exact() {
    let v = vectors();
    assert_eq!(v.version, 1);
    assert!(v.cases.len() >= 20);
    for c in &v.cases {
        let (s, l) = inputs(c);
        let ap = average_precision(&s, &l).unwrap().unwrap();
        assert_eq!(ap.to_bits(), c.ap.to_bits(), "{}: {ap} != {}", c.name, c.ap);
    }
}

#[test]
fn map_is_the_mean_over_cases_of_equal_length() {
    let v = vectors();
    let perfect = &v.cases[0];
    let last = &v.cases[1];
    let (s0, l0) = inputs(perfect);
    let (s1, l1) = inputs(last);
    let map = compute_map(&[s0, s1], &[l0, l1]).unwrap();
    assert_eq!(map, (perfect.ap + last.ap) / 2.0);
}
