use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slowave_core::cnn::{grid_search, train, CnnArch, TrainConfig};
use slowave_core::spectral::CNN_BINS;

/// Spectra peaked in the delta range (label 1) or the alpha range (label 0).
fn peaked_spectra(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let slow = i % 2 == 0;
        let centre = if slow { rng.random_range(8.0..18.0) } else { rng.random_range(45.0..60.0) };
        let row: Vec<f64> = (0..CNN_BINS)
            .map(|b| {
                let d = (b as f64 - centre) / 4.0;
                5.0 * (-d * d).exp() + 0.2 + rng.random_range(0.0..0.1)
            })
            .collect();
        rows.push(row);
        y.push(u8::from(slow));
    }
    (rows, y)
}

fn refs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(Vec::as_slice).collect()
}

fn fast_config(seed: u64) -> TrainConfig {
    TrainConfig { max_iters: 800, patience: 200, seed, ..TrainConfig::default() }
}

#[test]
fn separable_spectra_are_fit_exactly() {
    let (rows, y) = peaked_spectra(40, 1);
    let model = train(&refs(&rows), &y, CnnArch::default(), &fast_config(3)).unwrap();
    assert!(model.log.epochs.len() <= 200);
    let scores = model.scores(&refs(&rows)).unwrap();
    let correct = scores.iter().zip(&y).filter(|(s, &l)| (**s > 0.5) == (l == 1)).count();
    assert_eq!(correct, rows.len());

    // training loss falls across 10-epoch windows
    let means: Vec<f64> = model
        .log
        .epochs
        .chunks(10)
        .filter(|c| c.len() == 10)
        .map(|c| c.iter().map(|e| e.train_loss).sum::<f64>() / 10.0)
        .collect();
    assert!(means.len() >= 2);
    assert!(means.last().unwrap() < means.first().unwrap());
}

#[test]
fn returned_weights_have_minimum_validation_loss() {
    let (rows, y) = peaked_spectra(40, 2);
    let model = train(&refs(&rows), &y, CnnArch::default(), &fast_config(5)).unwrap();
    let min = model.log.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(model.log.best_val_loss, min);
    assert_eq!(model.log.epochs[model.log.best_epoch].val_loss, min);
}

#[test]
fn shuffled_labels_stay_near_chance() {
    let (rows, _) = peaked_spectra(300, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y: Vec<u8> = (0..rows.len()).map(|_| u8::from(rng.random::<bool>())).collect();
    let cfg = TrainConfig { max_iters: 400, seed: 1, ..TrainConfig::default() };
    let model = train(&refs(&rows), &y, CnnArch::default(), &cfg).unwrap();
    assert!(model.log.best_val_loss >= 0.65, "{}", model.log.best_val_loss);
}

#[test]
fn training_is_deterministic() {
    let (rows, y) = peaked_spectra(40, 6);
    let cfg = TrainConfig { max_iters: 40, ..fast_config(9) };
    let a = train(&refs(&rows), &y, CnnArch::default(), &cfg).unwrap();
    let b = train(&refs(&rows), &y, CnnArch::default(), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_class_in_a_split_is_an_error() {
    let (rows, _) = peaked_spectra(10, 1);
    let y = vec![0; 10];
    assert!(train(&refs(&rows), &y, CnnArch::default(), &fast_config(0)).is_err());
}

#[test]
fn grid_search_prefers_smaller_net_on_ties() {
    let (rows, y) = peaked_spectra(40, 3);
    let cfg = fast_config(2);
    let single = grid_search(&refs(&rows), &y, &[CnnArch::new(1, 1, 16, 5)], &cfg).unwrap();
    assert_eq!(single.best, CnnArch::new(1, 1, 16, 5));

    let grid = [CnnArch::new(1, 1, 64, 5), CnnArch::new(1, 1, 8, 5)];
    let r = grid_search(&refs(&rows), &y, &grid, &cfg).unwrap();
    assert!(r.scores.iter().all(|(_, l)| *l < 0.1), "{:?}", r.scores);
    assert_eq!(r.best.n_filters, 8);

    let too_deep = CnnArch { input_len: 20, ..CnnArch::new(3, 1, 8, 7) };
    let short: Vec<Vec<f64>> = rows.iter().map(|r| r[..20].to_vec()).collect();
    let ok = CnnArch { input_len: 20, ..CnnArch::new(1, 1, 8, 5) };
    let r = grid_search(&refs(&short), &y, &[too_deep, ok], &cfg).unwrap();
    assert_eq!(r.skipped, vec![too_deep]);
    assert_eq!(r.best, ok);
}
