//! Scratch tuning harness (not part of the example set).

use sscd::toy::{train, EncoderKind, Schedule, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2.0);
    let enc = args.get(2).map(|s| s.as_str()).unwrap_or("linear");
    let noise: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let dropout: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let warmup: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0);
    let encoder = match enc {
        "linear" => EncoderKind::Linear,
        h => EncoderKind::Mlp {
            hidden: h.parse().unwrap(),
        },
    };
    let schedule = if warmup > 0 {
        Schedule::Cosine {
            warmup_epochs: warmup,
        }
    } else {
        Schedule::Constant
    };
    println!("lr={lr} encoder={enc} noise={noise} dropout={dropout} warmup={warmup}");
    println!("lambda seed uap r@1 mrr eff_rank ratio gap loss_inf");
    for &lambda in &[0.0, 3.0, 30.0] {
        for seed in 1..=args.get(10).map(|s| s.parse().unwrap()).unwrap_or(3u64) {
            let mut config = TrainConfig {
                learning_rate: lr,
                encoder,
                seed,
                schedule,
                ..Default::default()
            };
            config.loss.lambda = lambda;
            config.augment.noise_sigma = noise;
            config.augment.dropout_prob = dropout;
            if let Some(pk) = args.get(6) { config.probe_k = pk.parse().unwrap(); }
            if let Some(mp) = args.get(7) { config.augment.mix_prob = mp.parse().unwrap(); }
            if let Some(t) = args.get(8) { config.loss.tau = t.parse().unwrap(); }
            if let Some(pn) = args.get(9) {
                config.probe_augment.noise_sigma = pn.parse().unwrap();
                config.probe_augment.dropout_prob = 0.15;
            }
            let start = std::time::Instant::now();
            match train(&config) {
                Ok((_, history)) => {
                    let p = &history.final_probe;
                    println!(
                        "{lambda:>6} {seed} {:.4} {:.4} {:.4} {:>6.2} {:>8.2} {:+.4} {:.4}  [{:?}]",
                        p.micro_ap,
                        p.recall_at_1,
                        p.mrr,
                        p.effective_rank,
                        p.max_min_ratio,
                        p.separation_gap(),
                        history.epochs.last().unwrap().loss_infonce,
                        start.elapsed(),
                    );
                }
                Err(e) => println!("{lambda:>6} {seed} FAILED: {e}"),
            }
        }
    }
}
