use astrodf::{stream_for, RngState, StreamKey, StreamPurpose};
use proptest::prelude::*;

fn draws(key: StreamKey, seed: u64, n: usize) -> Vec<u64> {
    let mut rng = stream_for(key, seed);
    (0..n).map(|_| rng.next_uniform().to_bits()).collect()
}

#[test]
fn stream_replay_is_thread_independent() {
    let keys: Vec<StreamKey> = (0..16)
        .map(|i| StreamKey::new(i % 4, StreamPurpose::Oracle, i * 1000))
        .collect();
    let serial: Vec<Vec<u64>> = keys.iter().map(|&k| draws(k, 42, 200)).collect();
    let parallel: Vec<Vec<u64>> = std::thread::scope(|s| {
        let handles: Vec<_> = keys.iter().map(|&k| s.spawn(move || draws(k, 42, 200))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(serial, parallel);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn advances_compose(seed in any::<u64>(), n in 0u64..300, m in 0u64..300) {
        let start = RngState::from_seed(seed);
        let mut a = start.clone();
        a.advance(n);
        a.advance(m);
        let mut b = start.clone();
        b.advance(n + m);
        let mut c = start;
        for _ in 0..n + m {
            c.next_uniform();
        }
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&b, &c);
    }

    #[test]
    fn distinct_keys_give_distinct_streams(
        rep in 0u64..1000,
        serial in 0u64..1_000_000,
        other in 0u64..1_000_000,
        seed in any::<u64>(),
    ) {
        prop_assume!(serial != other);
        let a = draws(StreamKey::new(rep, StreamPurpose::Oracle, serial), seed, 4);
        let b = draws(StreamKey::new(rep, StreamPurpose::Oracle, other), seed, 4);
        let c = draws(StreamKey::new(rep, StreamPurpose::PostReplication, serial), seed, 4);
        prop_assert_ne!(&a, &b);
        prop_assert_ne!(&a, &c);
    }
}
