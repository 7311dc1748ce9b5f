use linopt_verify::{run_all, Depth, CRITERIA};

#[test]
fn acceptance_criteria() {
    let results = run_all(Depth::Full);
    assert_eq!(results.len(), CRITERIA.len());
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
