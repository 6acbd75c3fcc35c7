//! Scratch config scanner: which settings satisfy the lambda-trend criteria?

use sscd::toy::{train, EncoderKind, Schedule, TrainConfig};

struct RunOut {
    uap: f64,
    r1: f64,
    rank: f64,
    ratio: f64,
    gap: f64,
}

fn run(lr: f64, h: usize, noise: f64, dropout: f64, warmup: usize, lambda: f64, seed: u64) -> Option<RunOut> {
    let mut config = TrainConfig {
        learning_rate: lr,
        encoder: if h == 0 {
            EncoderKind::Linear
        } else {
            EncoderKind::Mlp { hidden: h }
        },
        seed,
        schedule: if warmup > 0 {
            Schedule::Cosine {
                warmup_epochs: warmup,
            }
        } else {
            Schedule::Constant
        },
        ..Default::default()
    };
    config.loss.lambda = lambda;
    config.augment.noise_sigma = noise;
    config.augment.dropout_prob = dropout;
    let (_, history) = train(&config).ok()?;
    let p = &history.final_probe;
    Some(RunOut {
        uap: p.micro_ap,
        r1: p.recall_at_1,
        rank: p.effective_rank,
        ratio: p.max_min_ratio,
        gap: p.separation_gap(),
    })
}

fn main() {
    println!("lr h noise drop warm | pass uap_mono r1_mono rank25 ratio gap | min_uap_margin(30v0) min_rank_ratio");
    for &lr in &[10.0, 15.0, 20.0, 30.0] {
        for &h in &[64usize, 128] {
            for &noise in &[0.6, 0.7, 0.8] {
                for &dropout in &[0.3, 0.4] {
                    for &warmup in &[0usize, 6, 10] {
                        let mut ok_uap = true;
                        let mut ok_r1 = true;
                        let mut ok_rank = true;
                        let mut ok_ratio = true;
                        let mut ok_gap = true;
                        let mut min_margin = f64::INFINITY;
                        let mut min_rank_ratio = f64::INFINITY;
                        let mut failed = false;
                        for seed in [1u64, 2, 3] {
                            let (Some(l0), Some(l3), Some(l30)) = (
                                run(lr, h, noise, dropout, warmup, 0.0, seed),
                                run(lr, h, noise, dropout, warmup, 3.0, seed),
                                run(lr, h, noise, dropout, warmup, 30.0, seed),
                            ) else {
                                failed = true;
                                break;
                            };
                            ok_uap &= l3.uap >= l0.uap && l30.uap >= l3.uap && l30.uap > l0.uap;
                            ok_r1 &= l3.r1 >= l0.r1 && l30.r1 >= l3.r1 && l30.r1 > l0.r1;
                            ok_rank &= l30.rank >= 1.25 * l0.rank;
                            ok_ratio &= l30.ratio < l0.ratio;
                            ok_gap &= l30.gap > l0.gap;
                            min_margin = min_margin.min(l30.uap - l0.uap);
                            min_rank_ratio = min_rank_ratio.min(l30.rank / l0.rank);
                        }
                        if failed {
                            println!("{lr} {h} {noise} {dropout} {warmup} | DIVERGED");
                            continue;
                        }
                        let pass = ok_uap && ok_r1 && ok_rank && ok_ratio && ok_gap;
                        println!(
                            "{lr} {h} {noise} {dropout} {warmup} | {} {} {} {} {} {} | {:+.3} {:.3}",
                            if pass { "PASS" } else { "----" },
                            ok_uap as u8,
                            ok_r1 as u8,
                            ok_rank as u8,
                            ok_ratio as u8,
                            ok_gap as u8,
                            min_margin,
                            min_rank_ratio,
                        );
                    }
                }
            }
        }
    }
}
