use proptest::prelude::*;
use simaudit_core::rank_metrics::{hits_at, mrr, parse_ranks, summarize, MetricsError, RankRecord, Side};
use simaudit_core::rbo::{agreement_at_depth, rbo, rbo_at};

/// Agreement by explicit pair counting, averaged over depths.
fn naive_rbo(s: &[u32], t: &[u32], k: usize) -> f64 {
    let mut total = 0.0;
    for d in 1..=k {
        let mut overlap = 0usize;
        for x in &s[..d] {
            for y in &t[..d] {
                if x == y {
                    overlap += 1;
                }
            }
        }
        total += overlap as f64 / d as f64;
    }
    total / k as f64
}

fn list_pair() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (1usize..=10).prop_flat_map(|k| {
        let alphabet: Vec<u32> = (0..20).collect();
        (
            prop::sample::subsequence(alphabet.clone(), k).prop_shuffle(),
            prop::sample::subsequence(alphabet, k).prop_shuffle(),
        )
    })
}

/// Lists whose shared items sit at identical ranks, plus the match mask.
fn aligned_pair() -> impl Strategy<Value = (Vec<u32>, Vec<u32>, Vec<bool>)> {
    prop::collection::vec(any::<bool>(), 2..=10).prop_map(|mask| {
        let s: Vec<u32> = (0..mask.len() as u32).collect();
        let t = s
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| if m { x } else { 100 + x })
            .collect();
        (s, t, mask)
    })
}

fn records(ranks: &[f64]) -> Vec<RankRecord> {
    ranks.iter().map(|&r| RankRecord::with_rank(r)).collect()
}

fn rank_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((2u32..200).prop_map(|r| r as f64 / 2.0), 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn rbo_matches_pair_counting((s, t) in list_pair()) {
        let k = s.len();
        let fast = rbo(&s, &t, k).unwrap();
        prop_assert!((fast - naive_rbo(&s, &t, k)).abs() <= 1e-12);
        prop_assert_eq!(fast, rbo(&t, &s, k).unwrap());
        prop_assert!((0.0..=1.0).contains(&fast));
    }

    #[test]
    fn hits_grow_with_k(ranks in rank_values(), k in 1usize..50) {
        let r = records(&ranks);
        prop_assert!(hits_at(&r, k).unwrap() <= hits_at(&r, k + 1).unwrap());
        let m = mrr(&r).unwrap();
        prop_assert!(hits_at(&r, 1).unwrap() <= m && m <= 1.0);
    }
}

proptest! {
    #[test]
    fn rbo_extremes((s, t) in list_pair()) {
        let k = s.len();
        prop_assert_eq!(rbo(&s, &s, k).unwrap(), 1.0);
        let value = rbo(&s, &t, k).unwrap();
        prop_assert_eq!(value == 1.0, s == t);
        let disjoint = s.iter().all(|x| !t.contains(x));
        prop_assert_eq!(value == 0.0, disjoint);
    }

    #[test]
    fn earlier_matches_never_lower_rbo((s, t, mask) in aligned_pair(), pick in any::<prop::sample::Index>()) {
        let k = s.len();
        let moves: Vec<(usize, usize)> = (0..k)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .filter(|&(i, j)| mask[j] && !mask[i])
            .collect();
        prop_assume!(!moves.is_empty());
        let (i, j) = moves[pick.index(moves.len())];
        let (mut s2, mut t2) = (s.clone(), t.clone());
        s2.swap(i, j);
        t2.swap(i, j);
        prop_assert!(rbo(&s2, &t2, k).unwrap() >= rbo(&s, &t, k).unwrap());
    }

    #[test]
    fn truncated_rbo_uses_prefixes((s, t) in list_pair(), cut in 1usize..=10) {
        let k = cut.min(s.len());
        prop_assert_eq!(rbo_at(&s, &t, k).unwrap(), rbo(&s[..k], &t[..k], k).unwrap());
        let a = agreement_at_depth(&s, &t, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn mrr_pools_disjoint_sets(a in rank_values(), b in rank_values()) {
        let (ra, rb) = (records(&a), records(&b));
        let all: Vec<RankRecord> = ra.iter().chain(&rb).cloned().collect();
        let pooled = mrr(&all).unwrap() * all.len() as f64;
        let parts = mrr(&ra).unwrap() * ra.len() as f64 + mrr(&rb).unwrap() * rb.len() as f64;
        prop_assert!((pooled - parts).abs() <= 1e-9 * parts.max(1.0));
    }
}

#[test]
fn ranks_file_pools_both_sides() {
    let text = "# protocol=filtered ties=realistic\n\
                a\tr\tb\thead\t1\tfiltered\n\
                a\tr\tb\ttail\t2\tfiltered\n\
                \n\
                c\tr\td\thead\t4\tfiltered\r\n\
                c\tr\td\ttail\t2.5\traw\n";
    let rows = parse_ranks(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r.side == Side::Head).count(), 2);
    let summary = summarize(&rows).unwrap();
    let expected = (1.0 + 0.5 + 0.25 + 0.4) / 4.0;
    assert!((summary.mrr - expected).abs() < 1e-15);
    assert_eq!(summary.hits_at_1, 0.25);
    assert_eq!(summary.hits_at_3, 0.75);
    assert_eq!(summary.hits_at_10, 1.0);
}

#[test]
fn invalid_rank_rows_report_their_line() {
    for (text, line) in [
        ("a\tr\tb\thead\t0\tfiltered\n", 1),
        ("# meta\na\tr\tb\tboth\t1\tfiltered\n", 2),
        ("a\tr\tb\thead\t1\tfiltered\na\tr\tb\thead\t1\n", 2),
        ("a\tr\tb\ttail\tNaN\tfiltered\n", 1),
    ] {
        match parse_ranks(text.as_bytes()) {
            Err(MetricsError::MalformedLine { line: got, .. }) => assert_eq!(got, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(matches!(mrr(&[]), Err(MetricsError::EmptyRecords)));
}
