// scratch harness for picking training hyperparameters; not part of the API
use phaseref::grid::RealGrid;
use phaseref::measurement::{MeasurementMode, MeasurementOperator};
use phaseref::solver::SolverConfig;
use phaseref::trainer::{train_reference, Optimizer, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(n: usize, seed: u64) -> RealGrid<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealGrid::from_fn(n, n, |_, _| rng.gen())
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let beta: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2e-2);
    let iters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let k: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);
    let opt = match args.get(4).map(String::as_str) {
        Some("gd") => Optimizer::PlainGd,
        _ => Optimizer::AdaptiveMoments,
    };

    let op = MeasurementOperator::new(8, 8, MeasurementMode::Amplitude).unwrap();
    let solver_cfg = SolverConfig::with_defaults(k, MeasurementMode::Amplitude);
    let mut cfg = TrainConfig::new(iters, beta, 8).unwrap();
    cfg.seed = 3;
    cfg.optimizer = opt;
    let data: Vec<_> = (0..8).map(|i| random_image(8, 600 + i)).collect();
    let report = train_reference(&data, &op, &cfg, &solver_cfg).unwrap();
    let h = &report.loss_history;
    for (j, l) in h.iter().enumerate() {
        if j % (iters / 20).max(1) == 0 || j + 1 == h.len() {
            println!("iter {j:5}  loss {l:.6e}  ratio {:.3e}", l / h[0]);
        }
    }
    println!("wall {:?}", report.wall_time);
}
