use std::fs;

use proptest::prelude::*;
use srgbm_core::ensemble::SnapshotPanel;
use srgbm_core::io::{
    align, fmt_sig, load_series, read_panel, write_panel, write_series, AnnualSeries, DataError, Schema, Units,
};

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn minimal_file_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "share.csv", "year,value\n1977,0.105\n1978,0.101\n");
    let s = load_series(&path, Schema::Share).unwrap();
    assert_eq!(s.years, vec![1977, 1978]);
    assert_eq!(s.values, vec![0.105, 0.101]);
    assert_eq!(s.units, Units::Fraction);
    assert_eq!(s.name, "share");
    let r = load_series(&path, Schema::Resetting).unwrap();
    assert_eq!(r.units, Units::RatePerYear);
}

#[test]
fn distinct_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_series(dir.path().join("absent.csv"), Schema::Share),
        Err(DataError::MissingFile(_))
    ));
    let p = write(&dir, "range.csv", "year,value\n1977,0.1\n1978,1.2\n");
    match load_series(&p, Schema::Share) {
        Err(DataError::OutOfRange { line, year, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(year, 1978);
        }
        other => panic!("unexpected {other:?}"),
    }
    let p = write(&dir, "gap.csv", "year,value\n1977,0.1\n1979,0.2\n");
    match load_series(&p, Schema::Share) {
        Err(DataError::Gap { missing, .. }) => assert_eq!(missing, vec![1978]),
        other => panic!("unexpected {other:?}"),
    }
    let p = write(&dir, "dup.csv", "year,value\n1977,0.1\n1977,0.2\n");
    assert!(matches!(load_series(&p, Schema::Share), Err(DataError::DuplicateYear { line: 3, year: 1977, .. })));
    let p = write(&dir, "bad.csv", "year,value\n1977,0.1\n1978,abc\n");
    assert!(matches!(load_series(&p, Schema::Share), Err(DataError::MalformedRow { line: 3, .. })));
    let p = write(&dir, "short.csv", "year,value\n1977\n");
    assert!(matches!(load_series(&p, Schema::Share), Err(DataError::MalformedRow { line: 2, .. })));
    let p = write(&dir, "header.csv", "yr,val\n1977,0.1\n");
    assert!(matches!(load_series(&p, Schema::Share), Err(DataError::Header { .. })));
    let p = write(&dir, "empty.csv", "year,value\n");
    assert!(matches!(load_series(&p, Schema::Share), Err(DataError::Empty(_))));
}

fn series(from: i32, to: i32) -> AnnualSeries {
    let years: Vec<i32> = (from..=to).collect();
    let values = years.iter().map(|y| 0.1 + 0.001 * f64::from(y - 1900)).collect();
    AnnualSeries::new("s", years, values, Units::Fraction).unwrap()
}

#[test]
fn align_examples() {
    let (a, b) = align(&series(1977, 2015), &series(1980, 2018)).unwrap();
    assert_eq!((a.first_year(), a.last_year()), (1980, 2015));
    assert_eq!((b.first_year(), b.last_year()), (1980, 2015));
    let s = series(1990, 2000);
    let (a, b) = align(&s, &s).unwrap();
    assert_eq!(a, s);
    assert_eq!(b, s);
    assert!(matches!(align(&series(1970, 1975), &series(1980, 1985)), Err(DataError::EmptyOverlap(..))));
}

#[test]
fn panel_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let panel = SnapshotPanel::new(vec![0.0, 0.5], vec![vec![1.0, 2.25, 0.125], vec![1.5, 0.75, 3.0]]).unwrap();
    let path = dir.path().join("panel.csv");
    write_panel(&path, &panel).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("time,slot,income\n0,0,1\n0,1,2.25\n"));
    assert_eq!(read_panel(&path).unwrap(), panel);
}

proptest! {
    #[test]
    fn load_write_load_is_bit_identical(
        start in 1900i32..2000,
        values in prop::collection::vec(1e-9f64..0.999_999, 1..60),
        digits in 1usize..17,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("year,value\n");
        for (i, v) in values.iter().enumerate() {
            text.push_str(&format!("{},{:.*}\n", start + i as i32, digits, v));
        }
        prop_assume!(text.lines().skip(1).all(|l| {
            let v: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
            v > 0.0 && v < 1.0
        }));
        let first = write(&dir, "in.csv", &text);
        let loaded = load_series(&first, Schema::Share).unwrap();
        let second = dir.path().join("in2.csv");
        write_series(&second, &loaded).unwrap();
        let again = load_series(&second, Schema::Share).unwrap();
        prop_assert_eq!(&again.years, &loaded.years);
        for (a, b) in again.values.iter().zip(&loaded.values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        // writing is deterministic
        let third = dir.path().join("in3.csv");
        write_series(&third, &again).unwrap();
        prop_assert_eq!(fs::read(&second).unwrap(), fs::read(&third).unwrap());
    }

    #[test]
    fn nine_digit_format_is_close(x in -1e12f64..1e12) {
        let back: f64 = fmt_sig(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs());
    }
}
