//! Weak-domain contact accuracy of the four loss configurations over a few
//! paired seeds.
//!
//! `cargo run --release -p pressense-core --example ablation -- [seeds]`

use pressense_core::nn::{train_toy, TrainConfig};
use pressense_core::synth::{generate_dataset, SplitPlan, SynthConfig};
use pressense_core::BinSpec;

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let names = ["baseline", "L_w", "L_d", "L_w + L_d"];
    let mut acc = vec![Vec::new(); 4];
    for seed in 0..seeds {
        let ds = generate_dataset(&SynthConfig::toy(seed), &SplitPlan::sequential(4, 2, 8, 2)).unwrap();
        let data = ds.to_toy(&BinSpec::default());
        for (i, (lw, ld)) in [(false, false), (true, false), (false, true), (true, true)].into_iter().enumerate() {
            let cfg = TrainConfig { use_contact_loss: lw, use_domain_loss: ld, ..TrainConfig::desk_scale(seed) };
            let out = train_toy(&data, &cfg).unwrap();
            acc[i].push(out.history.last().unwrap().weak_contact_accuracy.unwrap());
        }
    }
    for (name, mut v) in names.iter().zip(acc) {
        v.sort_by(f64::total_cmp);
        println!("{name:>10}: median {:.3}  {:?}", v[v.len() / 2], v);
    }
}
