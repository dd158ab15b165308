use std::path::PathBuf;

use veil_core::risk::fixture::SchemaFixture;

#[test]
fn twenty_fixtures_match_their_expectations() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/schema");
    let fixtures = SchemaFixture::load_dir(&dir).unwrap();
    assert_eq!(fixtures.len(), 20);
    let failures: Vec<String> = fixtures
        .iter()
        .filter_map(|f| f.verify().err().map(|e| format!("{}: {e}", f.name)))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}
