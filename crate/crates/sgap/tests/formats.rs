use proptest::prelude::*;
use sgap::formats::{format_mask, format_points, parse_mask, parse_points};
use sgap::FormatError;
use sgap_core::SamplingMask;

proptest! {
    #[test]
    fn mask_text_round_trips(
        (n, m) in (1usize..15, 1usize..15),
        coords in proptest::collection::vec((0usize..15, 0usize..15), 0..60),
    ) {
        let coords: Vec<_> = coords.into_iter().filter(|&(i, j)| i < n && j < m).collect();
        let mask = SamplingMask::from_coords(n, m, &coords).unwrap().0;
        let text = format_mask(&mask);
        let back = parse_mask(&text).unwrap();
        prop_assert_eq!(&back, &mask);
        prop_assert_eq!(format_mask(&back), text);
    }

    #[test]
    fn points_round_trip_exactly(pts in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 0..30)) {
        let back = parse_points(&format_points(&pts)).unwrap();
        prop_assert_eq!(back, pts);
    }
}

#[test]
fn unsorted_and_duplicate_entries_are_rejected() {
    assert!(matches!(
        parse_mask("sg-mask v1\n2 2 2\n1 0\n0 1\n"),
        Err(FormatError::Unsorted { line: 4 })
    ));
    assert!(matches!(
        parse_mask("sg-mask v1\n2 2 2\n0 1\n0 1\n"),
        Err(FormatError::DuplicateEntry { .. })
    ));
    assert!(matches!(
        parse_mask("sg-mask v1\n2 2 3\n0 1\n"),
        Err(FormatError::EntryCountMismatch { declared: 3, found: 1 })
    ));
}
