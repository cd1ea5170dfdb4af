//! Ignored helper for re-measuring per-architecture batch cost on the
//! current machine (`cargo test --test timing_probe -- --ignored --nocapture`);
//! useful when re-budgeting the long acceptance tests.

use ndarray::Array3;
use std::time::Instant;
use vrfatigue::nn::graph::Mode;
use vrfatigue::nn::{build_model, ModelKind, ModelSpec};

#[test]
#[ignore]
fn probe() {
    for kind in ModelKind::ALL {
        for len in [1250usize, 5000] {
            let mut m = build_model(&ModelSpec::new(kind, len, 1)).unwrap();
            m.set_mode(Mode::Train);
            let x = Array3::from_shape_fn((16, 4, len), |(b, c, t)| {
                ((b * 31 + c * 7 + t) % 13) as f64 * 0.1 - 0.6
            });
            let labels: Vec<bool> = (0..16).map(|i| i % 2 == 0).collect();
            let t0 = Instant::now();
            let _ = m.backward(&x, &labels).unwrap();
            let bwd = t0.elapsed();
            m.set_mode(Mode::Eval);
            let t1 = Instant::now();
            let _ = m.forward(&x).unwrap();
            let fwd = t1.elapsed();
            println!(
                "{kind:<10} len {len:>5}  fwd+bwd(B=16) {:>8.1} ms   fwd {:>8.1} ms",
                bwd.as_secs_f64() * 1e3,
                fwd.as_secs_f64() * 1e3
            );
        }
    }
}
