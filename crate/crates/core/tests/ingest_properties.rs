mod common;

use std::io::Write;

use beliefsum::ingest::{bin_rows, ingest, sum_streams, Binning, CountRow};
use proptest::prelude::*;

fn stream() -> impl Strategy<Value = Vec<(i64, u64)>> {
    (
        0i64..2_000_000_000_000,
        prop::collection::vec((0i64..9_000, 0u64..50), 1..200),
    )
        .prop_map(|(start, steps)| {
            let mut t = start;
            steps
                .into_iter()
                .map(|(gap, c)| {
                    t += gap;
                    (t, c)
                })
                .collect()
        })
}

fn to_rows(s: &[(i64, u64)]) -> Vec<CountRow> {
    s.iter()
        .map(|&(timestamp_ms, count)| CountRow { timestamp_ms, count })
        .collect()
}

proptest! {
    #[test]
    fn time_bins_match_the_rebinning_oracle(s in stream(), width in 1u64..30) {
        let got = bin_rows(&to_rows(&s), Some(Binning::seconds(width))).unwrap();
        prop_assert_eq!(&got.counts, &common::rebin(&s, width as i64 * 1000));
        let kept: u64 = got.counts.iter().sum();
        let total: u64 = s.iter().map(|r| r.1).sum();
        prop_assert!(kept <= total);
        prop_assert_eq!(got.bin_starts_ms.len(), got.counts.len());
    }

    #[test]
    fn row_bins_partition_the_stream(s in stream(), width in 1u64..20) {
        let got = bin_rows(&to_rows(&s), Some(Binning::rows(width))).unwrap();
        prop_assert_eq!(got.counts.len(), s.len() / width as usize);
        let want: Vec<u64> = s
            .chunks_exact(width as usize)
            .map(|c| c.iter().map(|r| r.1).sum())
            .collect();
        prop_assert_eq!(got.counts, want);
    }

    #[test]
    fn unbinned_is_passthrough(s in stream()) {
        let got = bin_rows(&to_rows(&s), None).unwrap();
        prop_assert_eq!(got.counts, s.iter().map(|r| r.1).collect::<Vec<_>>());
    }
}

#[test]
fn mixed_gap_file_is_binned_from_the_first_timestamp() {
    // Gaps of 1, 2 and 7 seconds starting off a 6-second boundary.
    let stamps = [
        "2024-09-10T08:00:05Z",
        "2024-09-10T08:00:06Z",
        "2024-09-10T08:00:08Z",
        "2024-09-10T08:00:10Z",
        "2024-09-10T08:00:11Z",
        "2024-09-10T08:00:18Z",
        "2024-09-10T08:00:19Z",
        "2024-09-10T08:00:20Z",
        "2024-09-10T08:00:22Z",
        "2024-09-10T08:00:29Z",
    ];
    let counts = [1u64, 2, 3, 4, 5, 6, 7, 8, 9, 10];
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "timestamp,count").unwrap();
    for (t, c) in stamps.iter().zip(counts) {
        writeln!(f, "{t},{c}").unwrap();
    }
    let got = ingest(f.path(), Some(Binning::seconds(6))).unwrap();
    // Bins start at :05, :11, :17, :23, :29; the data cover [:05, :30), so
    // [:23, :29) is an empty bin and [:29, :35) is dropped.
    assert_eq!(got.counts, vec![10, 5, 30, 0]);
    assert_eq!(got.dropped_rows, 1);
    let oracle_rows: Vec<(i64, u64)> = stamps
        .iter()
        .zip(counts)
        .map(|(t, c)| (beliefsum::ingest::parse_timestamp(t).unwrap(), c))
        .collect();
    assert_eq!(got.counts, common::rebin(&oracle_rows, 6000));
}

#[test]
fn multi_stream_sum_bins_each_stream_first() {
    let a: Vec<(i64, u64)> = (0..12).map(|t| (t * 1000, 1)).collect();
    let b: Vec<(i64, u64)> = (0..6).map(|t| (500 + t * 2000, 3)).collect();
    let ba = bin_rows(&to_rows(&a), Some(Binning::seconds(6))).unwrap();
    let bb = bin_rows(&to_rows(&b), Some(Binning::seconds(6))).unwrap();
    assert_eq!(ba.counts, vec![6, 6]);
    assert_eq!(bb.counts, vec![9, 9]);
    assert_eq!(sum_streams(&[ba, bb]), vec![15, 15]);
}
