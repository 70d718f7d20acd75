//! Full acceptance suite with the default configuration and tolerances.
//!
//! Prints one line per criterion, then fails if any criterion failed.

use opatwin_cli::validate::{self, Tolerances};
use opatwin_cli::ScenarioConfig;

#[test]
fn all_primary_criteria() {
    let report = validate::run(&ScenarioConfig::default(), &Tolerances::default(), None);
    for r in &report.results {
        println!("{}", r.line());
    }
    assert_eq!(report.results.len(), 10);
    let failed: Vec<u8> = report.results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
