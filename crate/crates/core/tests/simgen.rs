use trajkit::dataset::write_csv;
use trajkit::simgen::{generate, preset};

#[test]
fn full_cohort_row_count() {
    let mut spec = preset("bp5").unwrap();
    spec.n_subjects = 80_000;
    let ds = generate(&spec).unwrap();
    let rows = ds.n_obs() as f64;
    assert!(
        (rows - 1_353_910.0).abs() / 1_353_910.0 < 0.02,
        "{rows} rows"
    );
    for s in ds.subjects() {
        let pre = s.times.iter().filter(|&&t| t < 0.0).count();
        assert!(pre >= 1 && s.n_obs() - pre >= 3);
        assert!(s.times.iter().all(|&t| (-365.0..=730.0).contains(&t) && t != 0.0));
    }
}

#[test]
fn same_spec_same_bytes() {
    let mut spec = preset("bp5").unwrap();
    spec.n_subjects = 500;
    fn bytes(s: &trajkit::simgen::GeneratorSpec) -> Vec<u8> {
        let mut out = Vec::new();
        write_csv(&generate(s).unwrap(), &mut out).unwrap();
        out
    }
    let a = bytes(&spec);
    assert_eq!(a, bytes(&spec));
    spec.seed += 1;
    assert_ne!(a, bytes(&spec));
    assert!(String::from_utf8(a).unwrap().starts_with("id,time,response,true_group\n"));
}

#[test]
fn single_subject() {
    let mut spec = preset("clean2").unwrap();
    spec.n_subjects = 1;
    let ds = generate(&spec).unwrap();
    assert_eq!(ds.len(), 1);
    assert_eq!(ds.subjects()[0].id, "1");
}
