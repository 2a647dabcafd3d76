use mvqa_core::compliance::{class_distance, induced_distribution, DistanceKind};
use mvqa_core::flow::{enumerate_mcc, solve_mcc, verify_optimal};
use mvqa_core::random::{random_instance, InstanceShape};
use mvqa_core::tolerance::tie;
use mvqa_core::worlds::{classes_by_enumeration, is_admissible, support_of};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const KINDS: [DistanceKind; 6] = [
    DistanceKind::Kl,
    DistanceKind::SquaredEuclidean,
    DistanceKind::L1,
    DistanceKind::ChiSquareStat,
    DistanceKind::Hellinger,
    DistanceKind::Matchings,
];

#[test]
fn optimizer_and_enumerator_agree_with_enumerated_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut worst_ratio = 0.0f64;
    let mut tied = 0;
    let mut multi_row = 0;
    for case in 0..200 {
        let inst = random_instance(&mut rng, InstanceShape::default());
        let s = support_of(&inst.bid);
        let induced = induced_distribution(&inst.mg, &inst.bid.attributes, &s).unwrap();
        multi_row += usize::from(s.m() > 2);
        let classes = classes_by_enumeration(&s, 1 << 20).unwrap();
        for kind in KINDS {
            let dists: Vec<f64> = classes.iter().map(|c| class_distance(kind, &c.k, s.n(), &induced)).collect();
            let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
            let argmin: Vec<Vec<u32>> =
                classes.iter().zip(&dists).filter(|(_, &d)| tie(d, best)).map(|(c, _)| c.k.clone()).collect();

            let sol = solve_mcc(&s, kind, &induced).unwrap();
            assert!(tie(sol.c_min, best), "case {case} {kind}: flow {} vs brute {best}", sol.c_min);
            assert!(is_admissible(&s, &sol.k));
            assert!(verify_optimal(&s, kind, &induced, &sol.k, best));

            let (stream, stats) = enumerate_mcc(&s, kind, &induced, 1 << 20).unwrap();
            assert!(stream.windows(2).all(|w| w[0] < w[1]), "case {case} {kind}: not increasing");
            assert_eq!(stream, argmin, "case {case} {kind}");
            assert_eq!(sol.k, stream[0]);
            assert!(
                stats.max_solves_between_emissions <= stats.bound,
                "case {case} {kind}: {} solves between emissions, bound {}",
                stats.max_solves_between_emissions,
                stats.bound
            );
            tied += usize::from(stream.len() > 1);
            worst_ratio = worst_ratio.max(stats.max_solves_between_emissions as f64 / stats.bound as f64);
        }
    }
    eprintln!("multi-row supports {multi_row}/200, tied optima {tied}/1200, worst solve ratio {worst_ratio:.3}");
    assert!(tied > 0 && multi_row > 100);
}
