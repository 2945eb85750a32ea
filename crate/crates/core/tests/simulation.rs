use conjunct_core::sim::{count_events, run_trials, stream, CHUNK_TRIALS};
use conjunct_core::{missed_maneuver_rate, CoverageScenario};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;

fn draws(seed: u64, n: u64) -> Vec<u64> {
    run_trials(
        seed,
        n,
        Vec::new,
        |acc: &mut Vec<u64>, rng| {
            acc.push(rng.gen());
            Ok(())
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )
    .unwrap()
}

#[test]
fn trial_outcomes_depend_only_on_seed_and_index() {
    let n = 3 * CHUNK_TRIALS + 17;
    let all = draws(5, n);
    assert_eq!(all.len() as u64, n);
    // Sequential reconstruction, chunk by chunk.
    let mut expected = Vec::new();
    for chunk in 0..n.div_ceil(CHUNK_TRIALS) {
        let mut rng = stream(5, chunk);
        let len = CHUNK_TRIALS.min(n - chunk * CHUNK_TRIALS);
        expected.extend((0..len).map(|_| rng.gen::<u64>()));
    }
    assert_eq!(all, expected);
    // A shorter run is a prefix of a longer one.
    assert_eq!(draws(5, CHUNK_TRIALS + 1)[..], all[..CHUNK_TRIALS as usize + 1]);
    assert_ne!(draws(6, 10), all[..10]);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let scenario = CoverageScenario {
        truth1: Vector3::new(0.0, 0.0, 0.0),
        truth2: Vector3::new(1.0, 1.0, 0.0),
        cov1: Matrix3::from_diagonal(&Vector3::new(400.0, 100.0, 25.0)),
        cov2: Matrix3::from_diagonal(&Vector3::new(100.0, 900.0, 25.0)),
        r1: 2.0,
        r2: 2.0,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let count = count_events(9, 50_000, |rng| Ok(rng.gen::<f64>() < 0.3)).unwrap();
            let coverage = missed_maneuver_rate(&scenario, 1.5, 20_000, 9).unwrap();
            (count, coverage.missed, draws(9, 20_000))
        })
    };
    let single = run(1);
    assert_eq!(single, run(4));
    assert_eq!(single, run(3));
}
