//! Scratch harness for tuning the desk-scale overfit: prints loss-component
//! magnitudes and training-set metrics for a few step sizes.

use freqsal_core::io::dataset::Sample;
use freqsal_core::losses::LossWeights;
use freqsal_core::model::{self, ModelConfig};
use freqsal_core::trainer::{Augment, TrainSettings, Trainer};
use freqsal_core::{metrics, synth};

fn main() {
    let samples: Vec<Sample> = (0..8)
        .map(|i| {
            let s = synth::sample(64, 900 + i as u64);
            Sample { rgb: s.rgb, thermal: s.thermal, gt: s.gt }
        })
        .collect();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let lr: f64 = args.first().map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let steps: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let lambda: [f64; 4] = args
        .get(2)
        .map(|s| {
            let v: Vec<f64> = s.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3]]
        })
        .unwrap_or([1.0; 4]);
    println!("lr {lr}, steps {steps}, lambda {lambda:?}");
    let settings = TrainSettings {
        lr,
        augment: Augment { flip: false, crop: false, rotate: false },
        loss: LossWeights { lambda, ..LossWeights::default() },
        ..TrainSettings::default()
    };
    let mut trainer = Trainer::new(ModelConfig::default(), settings).unwrap();
    let t0 = std::time::Instant::now();
    for step in 0..steps {
        let batch: Vec<Sample> = (0..3).map(|j| samples[(3 * step + j) % 8].clone()).collect();
        let bd = trainer.train_step(&batch, lr).unwrap();
        if step % 20 == 0 || step + 1 == steps {
            println!(
                "step {step:4}  sal {:.4}  lvl {:.4}  edge {:.4}  cfl {:.4}  total {:.4}",
                bd.saliency, bd.levels, bd.edge, bd.cfl, bd.total
            );
        }
    }
    println!("trained in {:.1?}", t0.elapsed());
    let mut mae_sum = 0.0;
    let mut f_sum = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let out = model::infer(&trainer.store, &trainer.weights, &s.rgb, &s.thermal).unwrap();
        let mae = metrics::mae(&out.s, &s.gt).unwrap();
        let (f, _) = metrics::max_f_beta(&out.s, &s.gt, metrics::BETA_SQ).unwrap();
        let lo = out.s.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = out.s.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("sample {i}: mae {mae:.4} maxF {f:.4} s-range [{lo:.3}, {hi:.3}]");
        mae_sum += mae;
        f_sum += f;
    }
    println!("mean MAE {:.4}  mean maxF {:.4}", mae_sum / 8.0, f_sum / 8.0);
    let out = model::infer(&trainer.store, &trainer.weights, &samples[0].rgb, &samples[0].thermal).unwrap();
    println!("sample 0 prediction vs ground truth (16×16 block means):");
    dump(&out.s, &samples[0].gt);
}

/// ASCII dump of two [1, n, n] maps side by side, averaged into 16×16 cells.
fn dump(s: &freqsal_core::Tensor, g: &freqsal_core::Tensor) {
    let n = s.shape()[1];
    let b = n / 16;
    let cell = |t: &freqsal_core::Tensor, by: usize, bx: usize| -> f64 {
        let mut acc = 0.0;
        for y in 0..b {
            for x in 0..b {
                acc += t.data()[(by * b + y) * n + bx * b + x];
            }
        }
        acc / (b * b) as f64
    };
    let glyph = |v: f64| b" .:-=+*#%@"[(v.clamp(0.0, 1.0) * 9.999) as usize] as char;
    for by in 0..16 {
        let left: String = (0..16).map(|bx| glyph(cell(s, by, bx))).collect();
        let right: String = (0..16).map(|bx| glyph(cell(g, by, bx))).collect();
        println!("  {left}   {right}");
    }
}
