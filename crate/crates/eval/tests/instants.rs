use chrono::{Duration, TimeZone, Utc};
use heatcast_core::{BuildingDataset, HourlyRecord, SiteMeta};
use heatcast_eval::{is_valid_instant, select_test_instants, EvalError};

const H: usize = 48;
const L: usize = 7;

fn dataset(hours: impl IntoIterator<Item = i64>) -> BuildingDataset {
    let base = Utc.with_ymd_and_hms(2021, 1, 4, 0, 0, 0).unwrap();
    let records = hours
        .into_iter()
        .map(|h| HourlyRecord { timestamp: base + Duration::hours(h), t_in: 21.0, t_sup: 40.0, t_out: 0.0, ghi: 0.0 })
        .collect();
    BuildingDataset::new(SiteMeta::new(60.0, 25.0, 0).unwrap(), records).unwrap()
}

fn index_of(ds: &BuildingDataset, ts: chrono::DateTime<Utc>) -> usize {
    ds.position(ts).unwrap()
}

#[test]
fn exact_capacity_is_evenly_spaced() {
    let t = 4;
    let ds = dataset(0..(t * (H + L + 1)) as i64);
    let got = select_test_instants(&ds, t, H, L).unwrap();
    assert_eq!(got.len(), t);
    let idx: Vec<usize> = got.iter().map(|&ts| index_of(&ds, ts)).collect();
    assert!(idx.iter().all(|&i| is_valid_instant(&ds, i, H, L)));
    assert_eq!(idx[0], L);
    assert_eq!(*idx.last().unwrap(), ds.len() - 1 - H);
    let steps: Vec<usize> = idx.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.iter().max().unwrap() - steps.iter().min().unwrap() <= 1, "{steps:?}");
}

#[test]
fn single_instant_is_the_midpoint() {
    let ds = dataset(0..200);
    let got = select_test_instants(&ds, 1, H, L).unwrap();
    // Valid origins run from L to 199 - H.
    assert_eq!(index_of(&ds, got[0]), (L + 199 - H) / 2);
}

#[test]
fn gaps_are_never_crossed() {
    let ds = dataset((0..150).chain(170..400));
    let got = select_test_instants(&ds, 40, H, L).unwrap();
    assert_eq!(got.len(), 40);
    let mut prev = None;
    for ts in got {
        let i = index_of(&ds, ts);
        let r = ds.records();
        assert!(r[i].timestamp - r[i - L].timestamp == Duration::hours(L as i64));
        assert!(r[i + H].timestamp - r[i].timestamp == Duration::hours(H as i64));
        assert!(prev.is_none_or(|p| p < ts), "instants must be distinct and sorted");
        prev = Some(ts);
    }
}

#[test]
fn too_many_instants_fail() {
    let ds = dataset(0..(H + L + 3) as i64);
    assert_eq!(select_test_instants(&ds, 3, H, L).unwrap().len(), 3);
    assert!(matches!(select_test_instants(&ds, 4, H, L), Err(EvalError::InsufficientData(_))));
    assert!(select_test_instants(&ds, 0, H, L).is_err());
}

#[test]
fn selection_is_deterministic() {
    let ds = dataset((0..300).chain(310..900));
    assert_eq!(select_test_instants(&ds, 25, H, L).unwrap(), select_test_instants(&ds, 25, H, L).unwrap());
}
