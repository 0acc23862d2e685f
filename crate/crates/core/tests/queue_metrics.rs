use isr_core::data::{generate_world, WorldConfig};
use isr_core::eval::{average_precision, build_retrieval_split, chance_rank_1, evaluate_embeddings};
use isr_core::queue::NegativeQueue;
use isr_core::rng::Rng;
use isr_core::verify::{brute_force_metrics, cmc_monotone, metric_suite, queue_suite};
use isr_core::{FeatureMatrix, NegativeSelection};
use proptest::prelude::*;

fn unit_cols(rng: &mut Rng, d: usize, m: usize) -> FeatureMatrix {
    FeatureMatrix::normalized(d, &(0..d * m).map(|_| rng.normal()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn queue_rank_oracle() {
    let out = queue_suite(300, 17);
    assert!(out.passed(), "{:?}", out.failures);
}

#[test]
fn metric_oracle_and_expected_ap() {
    let out = metric_suite(2000, 20_000, 23);
    assert!(out.passed(), "{:?}", out.failures);
}

#[test]
fn all_same_video_queue_yields_no_negatives() {
    let mut q = NegativeQueue::new(8, 2).unwrap();
    q.enqueue((0..5).map(|i| (vec![(i as f64).cos(), (i as f64).sin()], 3))).unwrap();
    let sel = q.select_negatives(&[1.0, 0.0], 3, 4, NegativeSelection::MostSimilar);
    assert!(sel.positions.is_empty() && sel.shortfall);
}

#[test]
fn chance_level_matches_random_rankings() {
    let ds = generate_world(&WorldConfig {
        num_videos: 10,
        ..WorldConfig::default()
    })
    .unwrap();
    let split = build_retrieval_split(&ds, 0);
    let qids: Vec<u32> = split.query.iter().map(|c| c.true_identity).collect();
    let gids: Vec<u32> = split.gallery.iter().map(|c| c.true_identity).collect();
    let chance = chance_rank_1(&qids, &gids);
    let mut rng = Rng::new(5);
    let trials = 4000;
    let mean = (0..trials)
        .map(|_| {
            let q = unit_cols(&mut rng, 8, qids.len());
            let g = unit_cols(&mut rng, 8, gids.len());
            evaluate_embeddings(&q, &qids, &g, &gids).rank_1
        })
        .sum::<f64>()
        / trials as f64;
    assert!(chance > 0.0);
    assert!((mean - chance).abs() < 0.1 * chance, "random rankings {mean}, chance {chance}");
}

proptest! {
    #[test]
    fn fifo_keeps_newest(capacity in 1usize..64, batches in proptest::collection::vec(0usize..40, 1..6), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut q = NegativeQueue::new(capacity, 3).unwrap();
        let mut inserted = 0u64;
        for b in batches {
            let emb = unit_cols(&mut rng, 3, b);
            q.enqueue(emb.columns().map(|c| (c.to_vec(), 0))).unwrap();
            inserted += b as u64;
            prop_assert!(q.len() <= capacity);
            let first = inserted.saturating_sub(capacity as u64);
            prop_assert!(q.iter().map(|e| e.insertion_index).eq(first..inserted));
        }
    }

    #[test]
    fn selection_is_pure(seed in any::<u64>(), k in 1usize..20) {
        let mut rng = Rng::new(seed);
        let mut q = NegativeQueue::new(50, 4).unwrap();
        let emb = unit_cols(&mut rng, 4, 40);
        q.enqueue(emb.columns().map(|c| (c.to_vec(), rng.below(4) as u32))).unwrap();
        let anchor = unit_cols(&mut rng, 4, 1);
        for mode in [NegativeSelection::MostSimilar, NegativeSelection::MostDissimilar] {
            let sel = q.select_negatives(anchor.col(0), 2, k, mode);
            prop_assert!(sel.positions.iter().all(|&p| q.get(p).video_id != 2));
            let ordered = sel.similarities.windows(2).all(|w| match mode {
                NegativeSelection::MostSimilar => w[0] >= w[1],
                NegativeSelection::MostDissimilar => w[0] <= w[1],
            });
            prop_assert!(ordered);
        }
    }

    #[test]
    fn cmc_monotone_and_oracle(seed in any::<u64>(), g in 1usize..=8, qn in 1usize..6) {
        let mut rng = Rng::new(seed);
        let gallery = unit_cols(&mut rng, 3, g);
        let query = unit_cols(&mut rng, 3, qn);
        let gids: Vec<u32> = (0..g).map(|_| rng.below(3) as u32).collect();
        let qids: Vec<u32> = (0..qn).map(|_| rng.below(3) as u32).collect();
        let r = evaluate_embeddings(&query, &qids, &gallery, &gids);
        prop_assert!(cmc_monotone(&r));
        prop_assert_eq!(r, brute_force_metrics(&query, &qids, &gallery, &gids));
    }

    #[test]
    fn ap_bounds(rel in proptest::collection::vec(any::<bool>(), 1..30)) {
        let ap = average_precision(&rel);
        prop_assert!((0.0..=1.0).contains(&ap));
        if rel[0] && rel.iter().filter(|&&r| r).count() == 1 {
            prop_assert_eq!(ap, 1.0);
        }
    }
}
