//! Train the synthetic copy-detection benchmark and watch the losses,
//! effective rank, and probe retrieval quality evolve.
//!
//!     cargo run --release --example toy_train

use sscd::toy::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = TrainConfig {
        sources: 256,
        input_dim: 64,
        descriptor_dim: 32,
        batch: 64,
        epochs: 15,
        seed: 42,
        ..Default::default()
    };
    println!(
        "training: {} sources, {} -> {} dims, batch {}, {} epochs, tau {}, lambda {}",
        config.sources,
        config.input_dim,
        config.descriptor_dim,
        config.batch,
        config.epochs,
        config.loss.tau,
        config.loss.lambda
    );

    let (encoder, history) = train(&config)?;

    println!("\nepoch  infonce   koleo    total    eff_rank  toy_uap");
    for e in &history.epochs {
        println!(
            "{:>5}  {:>7.4}  {:>7.4}  {:>7.4}  {:>8.2}  {:>7.4}",
            e.epoch, e.loss_infonce, e.loss_koleo, e.loss_total, e.effective_rank, e.toy_uap
        );
    }

    let p = &history.final_probe;
    println!("\nfinal probe: micro_ap {:.4}, recall@1 {:.4}, mrr {:.4}", p.micro_ap, p.recall_at_1, p.mrr);
    println!(
        "embedding geometry: effective rank {:.2} of {}, max/min principal value {:.2}",
        p.effective_rank,
        encoder.descriptor_dim(),
        p.max_min_ratio
    );
    println!("positive/negative separation gap: {:+.4}", p.separation_gap());
    Ok(())
}
