use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttscore::corpus::FeatureMatrix;
use ttscore::prosody::{rvq_decode, rvq_encode, rvq_fit};
use ttscore::quantizer::{kmeans_assign, kmeans_fit, kmeans_fit_traced, Codebook, KMeansParams};

/// Minimum within-cluster sum of squares over every split of the points
/// into two non-empty groups.
fn exhaustive_two_means(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let sse = |group: &[[f64; 2]]| {
        let m = group.len() as f64;
        let cx = group.iter().map(|p| p[0]).sum::<f64>() / m;
        let cy = group.iter().map(|p| p[1]).sum::<f64>() / m;
        group
            .iter()
            .map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2))
            .sum::<f64>()
    };
    (1..(1u32 << (n - 1)))
        .map(|mask| {
            let (a, b): (Vec<_>, Vec<_>) = (0..n).partition(|&i| mask & (1 << i) != 0);
            let a: Vec<[f64; 2]> = a.iter().map(|&i| points[i]).collect();
            let b: Vec<[f64; 2]> = b.iter().map(|&i| points[i]).collect();
            sse(&a) + sse(&b)
        })
        .fold(f64::INFINITY, f64::min)
}

fn matrix(points: &[[f64; 2]]) -> FeatureMatrix {
    let rows: Vec<[f32; 2]> = points.iter().map(|p| [p[0] as f32, p[1] as f32]).collect();
    FeatureMatrix::from_rows(&rows).unwrap()
}

#[test]
fn eight_point_fit_reaches_exhaustive_optimum() {
    // cluster means are integers, so every quantity is exact
    let points = [
        [0.0, 0.0],
        [1.0, 2.0],
        [2.0, 1.0],
        [10.0, 10.0],
        [12.0, 10.0],
        [10.0, 12.0],
        [8.0, 10.0],
        [10.0, 8.0],
    ];
    let optimum = exhaustive_two_means(&points);
    assert_eq!(optimum, 4.0 + 16.0);
    for seed in 0..10 {
        let cb = kmeans_fit(&[matrix(&points)], &KMeansParams::new(2, seed)).unwrap();
        assert_eq!(cb.inertia, optimum);
    }
}

#[test]
fn random_eight_point_fits_never_beat_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let points: Vec<[f64; 2]> = (0..8)
            .map(|i| {
                let off = if i < 4 { 0.0 } else { 20.0 };
                [off + rng.random_range(-2..=2) as f64, rng.random_range(-2..=2) as f64]
            })
            .collect();
        let optimum = exhaustive_two_means(&points);
        let Ok(cb) = kmeans_fit(&[matrix(&points)], &KMeansParams::new(2, rng.random())) else {
            continue;
        };
        assert!(cb.inertia >= optimum - 1e-9);
        // two far-apart blobs: Lloyd from k-means++ finds the split
        assert!((cb.inertia - optimum).abs() < 1e-4, "{} vs {optimum}", cb.inertia);
    }
}

fn random_data(rng: &mut ChaCha8Rng, frames: usize, dims: usize) -> FeatureMatrix {
    let v = (0..frames * dims).map(|_| rng.random_range(-5.0..5.0f32)).collect();
    FeatureMatrix::new(frames, dims, v).unwrap()
}

#[test]
fn lloyd_inertia_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let frames = rng.random_range(20..200);
        let dims = rng.random_range(1..6);
        let k = rng.random_range(2..10);
        let data = random_data(&mut rng, frames, dims);
        let fit = kmeans_fit_traced(&[data], &KMeansParams::new(k, rng.random())).unwrap();
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]), "{:?}", fit.trace);
    }
}

#[test]
fn assignments_pick_the_nearest_centroid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = random_data(&mut rng, 300, 3);
    let cb = kmeans_fit(std::slice::from_ref(&data), &KMeansParams::new(7, 4)).unwrap();
    let tokens = kmeans_assign(&data, &cb).unwrap();
    for (row, &id) in data.rows().zip(tokens.ids()) {
        let d = |c: &[f32]| row.iter().zip(c).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>();
        let best = (0..cb.k()).map(|j| d(cb.centroid(j))).fold(f64::INFINITY, f64::min);
        assert_eq!(d(cb.centroid(id as usize)), best);
    }
}

#[test]
fn codebook_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = random_data(&mut rng, 50, 4);
    let cb = kmeans_fit(std::slice::from_ref(&data), &KMeansParams::new(5, 1)).unwrap();
    let path = dir.path().join("km.json");
    cb.write(&path).unwrap();
    let back = Codebook::read(&path).unwrap();
    assert_eq!(back, cb);
    assert_eq!(kmeans_assign(&data, &back).unwrap(), kmeans_assign(&data, &cb).unwrap());
}

#[test]
fn single_stage_rvq_equals_kmeans() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let data = random_data(&mut rng, 80, 3);
        let seed = rng.random();
        let rvq = rvq_fit(std::slice::from_ref(&data), 1, 6, seed).unwrap();
        let cb = kmeans_fit(std::slice::from_ref(&data), &KMeansParams::new(6, seed)).unwrap();
        assert_eq!(rvq.stage(0), &cb);
        let encoded = rvq_encode(&data, &rvq).unwrap();
        assert_eq!(encoded.stage0(), &kmeans_assign(&data, &cb).unwrap());
    }
}

fn mse(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| ((x - y) as f64).powi(2))
        .sum::<f64>()
        / a.values().len() as f64
}

#[test]
fn rvq_error_shrinks_with_stages() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (frames, dims) = (rng.random_range(40..150), rng.random_range(1..5));
        let data = random_data(&mut rng, frames, dims);
        let seed = rng.random();
        let errors: Vec<f64> = (1..=3)
            .map(|s| {
                let rvq = rvq_fit(std::slice::from_ref(&data), s, 4, seed).unwrap();
                mse(&data, &rvq_decode(&rvq_encode(&data, &rvq).unwrap(), &rvq).unwrap())
            })
            .collect();
        assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
    }
}
