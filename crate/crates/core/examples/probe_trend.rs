// Scratch probe for the gap-trend medians (removed before release).
use fddcsi::experiment::mmd_median_trend;
use fddcsi::io::ExperimentConfig;

fn main() {
    let cfg = ExperimentConfig::default();
    let labels = ["gap-120", "gap-240", "gap-480", "other-cell"];
    for (n, n_sets) in [(100usize, 50usize), (200, 50)] {
        let t0 = std::time::Instant::now();
        let medians = mmd_median_trend(&cfg, &labels, n, n_sets).unwrap();
        println!("n={n}, sets={n_sets} ({:?}):", t0.elapsed());
        for (label, m) in medians {
            println!("  {label:<12} {m:+.4}");
        }
    }
}
