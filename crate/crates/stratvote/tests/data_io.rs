use proptest::prelude::*;
use stratvote::data::{load_dataset, read_csv, save_dataset, write_csv, DataError, Dataset};
use stratvote_core::{Candidate, Poll, Utility, VoteRecord};

fn record() -> impl Strategy<Value = VoteRecord> {
    (
        "[a-z][a-z0-9]{0,6}",
        0u32..1000,
        prop::collection::vec(0u64..20_000, 3),
        Just([10.0, 5.0, 0.0]).prop_shuffle(),
        0usize..3,
    )
        .prop_filter("empty poll", |(_, _, s, _, _)| s.iter().sum::<u64>() > 0)
        .prop_map(|(id, round, s, u, a)| VoteRecord {
            voter_id: id,
            round,
            poll: Poll::new(s).unwrap(),
            utilities: Utility::new(u.to_vec()).unwrap(),
            action: Candidate(a),
        })
}

fn unique_rounds(mut rs: Vec<VoteRecord>) -> Vec<VoteRecord> {
    let mut seen = std::collections::HashSet::new();
    rs.retain(|r| seen.insert((r.voter_id.clone(), r.round)));
    rs
}

proptest! {
    #[test]
    fn csv_round_trip(rs in prop::collection::vec(record(), 1..40).prop_map(unique_rounds)) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &rs).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rs);
    }
}

#[test]
fn directory_round_trip_keeps_the_manifest() {
    let rs = vec![VoteRecord {
        voter_id: "v17".into(),
        round: 3,
        poll: Poll::with_n(vec![25, 70, 20], 295).unwrap(),
        utilities: Utility::new(vec![40.0, 30.0, 20.0]).unwrap(),
        action: Candidate(1),
    }];
    let ds = Dataset::new(rs, "hand-written").unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &ds).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.records, ds.records);
    assert_eq!(back.manifest.source, "hand-written");
    assert_eq!(back.records[0].poll.n(), 295);
}

#[test]
fn malformed_files_are_rejected() {
    let header = "voter_id,round,n,s_1,s_2,s_3,u_1,u_2,u_3,action\n";
    let cases = [
        "voter_id,round,n,s_1,s_2,u_1,u_2,u_3,action\nv,1,3,1,1,1,10,5,0,1\n",
        &format!("{header}v,1,3,1,x,1,10,5,0,1\n"),
        &format!("{header}v,1,3,1,1,1,10,5,0,q4\n"),
        &format!("{header}v,1,3,1,1,1,10,5,0,1\nv,1,3,1,1,1,10,5,0,2\n"),
        header,
    ];
    for text in cases {
        assert!(read_csv(text.as_bytes()).is_err(), "{text}");
    }
    assert!(matches!(
        read_csv(format!("{header}v,1,3,1,1,1,10,5,0,1\nv,1,3,1,1,1,10,5,0,2\n").as_bytes()),
        Err(DataError::DuplicateRound { .. })
    ));
}
