//! Scans the budget constants and prints the success rates the acceptance
//! criteria depend on. Used to pick the values frozen in `constants.json`.
//!
//!     cargo run --release --example calibrate -- [c_test] [c_cand] [c_final] [c_bins]

use robust_collab::oracle::{DistributionFamily, PretenderKind};
use robust_collab::verify::*;
use robust_collab::{HypothesisClass, LearnerConstants};

fn main() -> robust_collab::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("number"))
        .collect();
    let mut constants = LearnerConstants::calibrated();
    if let Some(&c) = args.first() {
        constants.c_test = c;
    }
    if let Some(&c) = args.get(1) {
        constants.c_cand = c;
    }
    if let Some(&c) = args.get(2) {
        constants.c_final = c;
    }
    if let Some(&c) = args.get(3) {
        constants.c_bins = c;
    }
    println!("{constants:?}");
    let threshold = HypothesisClass::threshold(16)?;

    for (n, eta) in [(16, 0.0), (20, 0.05)] {
        let config = CollaborativeConfig {
            class: threshold.clone(),
            n,
            eta,
            family: DistributionFamily::RandomWeights,
            pretender: PretenderKind::Random,
            eps: 0.1,
            delta: 0.1,
            constants: constants.clone(),
        };
        let (r, rounds) = collaborative_trials(&config, 200, 11, PassRule::AtLeast(0.87))?;
        let mut sorted = rounds.clone();
        sorted.sort_unstable();
        println!(
            "{}  mean samples {:.0} median rounds {}",
            r.summary(),
            r.mean_samples(),
            sorted[sorted.len() / 2]
        );
    }

    for (class, pretender) in [
        (threshold.clone(), PretenderKind::Random),
        (threshold.clone(), PretenderKind::Close),
        (HypothesisClass::powerset(10)?, PretenderKind::Close),
    ] {
        let config = CandidateLemmaConfig {
            class,
            group_size: 10,
            adversaries: 1,
            family: DistributionFamily::RandomWeights,
            pretender,
            eps: 0.1,
            delta: 0.1,
            round: 1,
            constants: constants.clone(),
        };
        println!("{}", check_candidate_lemma(&config, 500, 12)?.summary());
    }

    let mut tl = TestLemmaConfig {
        planted_errors: vec![0.04, 0.15],
        eps: 0.1,
        delta: 0.1,
        constants: constants.clone(),
    };
    println!("{}", check_test_lemma(&tl, 500, 13)?.summary());
    tl.constants.c_test /= 10.0;
    println!("control {}", check_test_lemma(&tl, 500, 13)?.summary());

    for scale in [1.0, 0.1] {
        let b = BallsInBinsConfig {
            bins: 50,
            c_bins: constants.c_bins,
            delta: 0.1,
            budget_scale: scale,
        };
        println!(
            "scale {scale} m={} {}",
            b.balls(),
            check_balls_in_bins(&b, 1000, 14)?.summary()
        );
    }

    let sweep: Vec<SweepPoint> = [
        (4, 0.0),
        (8, 0.0),
        (16, 0.0),
        (20, 0.0),
        (20, 0.1),
        (1, 0.0),
    ]
    .into_iter()
    .map(|(n, eta)| SweepPoint { n, d: n, eta })
    .collect();
    for e in measure_overhead(&sweep, 100, 15, &constants)? {
        println!("{}", e.csv_row());
    }

    let lb = LowerBoundConfig {
        n: 10,
        d: 8,
        eps: 0.1,
        delta: 0.1,
        eta: 0.2,
        gamma: 1.0,
        constants: constants.clone(),
    };
    let r = check_lower_bound_cost(&lb, 200, 16)?;
    println!(
        "lower bound mean {:.0} vs bound {:.0} success {:.3}",
        r.mean_total, r.bound, r.success_rate
    );

    for c_pac in [1.0, 0.5] {
        let p = PacConfig {
            class: HypothesisClass::powerset(8)?,
            family: DistributionFamily::RandomWeights,
            eps: 0.1,
            delta: 0.1,
            c_pac,
        };
        println!(
            "c_pac {c_pac} {}",
            check_pac_sample_size(&p, 500, 17)?.summary()
        );
    }
    Ok(())
}
