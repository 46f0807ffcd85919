//! Greedy backward elimination over lexical category counts: plant a few
//! informative categories among noise and watch the selection keep them.
//!
//! Run with: cargo run --release --example lexical_selection

use mannerscope::eval::cv_auc_scorer;
use mannerscope::models::backward_eliminate;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows = 120;
    let categories = 10;
    // count-like columns: small nonnegative integers
    let x = Array2::from_shape_fn((rows, categories), |_| f64::from(rng.gen_range(0..6u8)));
    // labels driven by categories 1, 4 and 7
    let y = Array1::from_shape_fn(rows, |i| {
        let s = x[[i, 1]] - x[[i, 4]] + 0.5 * x[[i, 7]] + rng.gen_range(-1.0..1.0);
        if s > 0.3 {
            1.0
        } else {
            0.0
        }
    });

    println!("{categories} candidate categories, informative: [1, 4, 7]");
    let scorer = cv_auc_scorer(0.01);
    for target in [6, 3] {
        let kept = backward_eliminate(&x.view(), &y, target, &scorer, 99)
            .expect("elimination runs");
        println!("keep {target}: {kept:?}");
    }
}
