//! One test per acceptance criterion at default tolerances. Each prints a
//! single PASS/FAIL line to stderr, outside the test harness capture.

use phasespace_cli::acceptance::{run_criterion, SuiteOptions, CRITERIA};
use std::io::Write;

fn criterion(name: &str) {
    let res = run_criterion(name, &SuiteOptions::default()).expect("known criterion");
    let _ = writeln!(std::io::stderr(), "{res}");
    assert!(res.passed(), "{res}");
}

macro_rules! criteria {
    ($($test:ident => $name:literal),* $(,)?) => {
        $(#[test]
        fn $test() {
            criterion($name);
        })*

        #[test]
        fn every_criterion_has_a_test() {
            let covered = [$($name),*];
            assert_eq!(covered, CRITERIA);
        }
    };
}

criteria! {
    c01_involution => "involution",
    c02_unitarity => "unitarity",
    c03_moyal => "moyal",
    c04_wavepacket => "wavepacket",
    c05_intertwining => "intertwining",
    c06_spectrum => "spectrum",
    c07_basis => "basis",
    c08_twisted => "twisted",
    c09_kernel => "kernel",
    c10_conjugation => "conjugation",
    c11_modnorm => "modnorm",
    c12_capacity => "capacity",
}
