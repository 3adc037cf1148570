//! End-to-end acceptance battery: runs every suite criterion with the
//! default seed and prints one pass/fail line per criterion.

use cylwalk::suite::{self, SuiteStatus};

#[test]
fn acceptance() {
    let reports = suite::run_all(42);
    assert_eq!(reports.len(), suite::CRITERIA as usize);
    let mut failed = Vec::new();
    for rep in &reports {
        println!("{}", rep.line());
        if rep.status != SuiteStatus::Pass {
            failed.push(rep.id);
        }
    }
    assert!(failed.is_empty(), "criteria not passing: {failed:?}");
}
