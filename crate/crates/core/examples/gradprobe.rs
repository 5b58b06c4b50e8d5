//! Scratch probe: per-module gradient norms and feature statistics on one
//! batch, to find where the learning signal dies.

use std::collections::BTreeMap;

use freqsal_core::losses::{total_loss, LossWeights};
use freqsal_core::model::{self, ModelConfig, ModelWeights};
use freqsal_core::{canny, synth, Graph, ParamStore, Tensor};

fn stats(name: &str, t: &Tensor) {
    let lo = t.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = t.data().iter().sum::<f64>() / t.numel() as f64;
    let var = t.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t.numel() as f64;
    println!("  {name:12} {:?} range [{lo:.3}, {hi:.3}] mean {mean:.3} std {:.3}", t.shape(), var.sqrt());
}

fn main() {
    let mut store = ParamStore::new();
    let cfg = ModelConfig::default();
    let w = ModelWeights::register(&mut store, &cfg).unwrap();
    let s = synth::sample(64, 900);
    let edge = canny::canny_edges(&s.gt, &freqsal_core::canny::CannyParams::default()).unwrap();
    let lw = LossWeights { lambda: [1.0, 1.0, 1.0, 0.0], ..LossWeights::default() };

    let mut g = Graph::new(&store);
    let rgb = g.input(s.rgb.clone());
    let th = g.input(s.thermal.clone());
    let nodes = model::forward(&mut g, rgb, th, &w).unwrap();
    println!("features:");
    stats("s", g.real(nodes.s).unwrap());
    stats("e_pred", g.real(nodes.e_pred).unwrap());
    for (i, d) in nodes.d.iter().enumerate() {
        stats(&format!("d{}", i + 1), g.real(*d).unwrap());
    }
    stats("e3", g.real(nodes.e3).unwrap());
    stats("r1", g.real(nodes.r1).unwrap());
    stats("t1", g.real(nodes.t1).unwrap());

    let (total, bd) = total_loss(&mut g, &nodes, &w, &s.gt, &edge, &lw).unwrap();
    println!("losses: sal {:.4} lvl {:.4} edge {:.4} total {:.4}", bd.saliency, bd.levels, bd.edge, bd.total);
    g.backward(total).unwrap();
    let grads = g.param_grads().unwrap();

    // Group max-abs gradient and max-abs value by the first two name parts.
    let mut groups: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for id in store.ids() {
        let name = store.name_of(id);
        let key: String = name.split('.').take(2).collect::<Vec<_>>().join(".");
        let entry = groups.entry(key).or_insert((0.0, 0.0, 0));
        let vmax = store.value(id).data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        entry.1 = entry.1.max(vmax);
        entry.2 += store.value(id).numel();
        if let Some(gt) = grads.get(id) {
            let gmax = gt.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            entry.0 = entry.0.max(gmax);
        }
    }
    println!("{:28} {:>12} {:>12} {:>8}", "module", "max|grad|", "max|w|", "params");
    for (k, (gmax, vmax, n)) in groups {
        println!("{k:28} {gmax:>12.3e} {vmax:>12.3e} {n:>8}");
    }

    // How much ground-truth signal do the fusion and decoder features carry
    // at init? |corr| of each channel with the mask, at feature resolution.
    let nodes2 = {
        let mut g2 = Graph::new(&store);
        let rgb = g2.input(s.rgb.clone());
        let th = g2.input(s.thermal.clone());
        let n = model::forward(&mut g2, rgb, th, &w).unwrap();
        [
            ("r1", g2.real(n.r1).unwrap().clone()),
            ("t1", g2.real(n.t1).unwrap().clone()),
            ("d1", g2.real(n.d[0]).unwrap().clone()),
            ("e3", g2.real(n.e3).unwrap().clone()),
            ("s", g2.real(n.s).unwrap().clone()),
        ]
    };
    for (name, feat) in &nodes2 {
        let (c, h, wd) = feat.dims3().unwrap();
        let g_small = downsample(&s.gt, h, wd);
        let mut best = 0.0f64;
        let mut mean_abs = 0.0f64;
        for ch in 0..c {
            let plane = &feat.data()[ch * h * wd..(ch + 1) * h * wd];
            let r = corr(plane, &g_small);
            best = best.max(r.abs());
            mean_abs += r.abs() / c as f64;
        }
        println!("{name:4} [{c}x{h}x{wd}] |corr with gt|: best {best:.3} mean {mean_abs:.3}");
    }
    block_probe(&nodes2[0].1, &nodes2[1].1, &s.gt);
}

/// Does one freshly initialized block preserve the mask signal its input
/// carries? Feeds the real encoder features through a standalone MPA and
/// FRCAB and reports the correlation before and after.
fn block_probe(r1: &Tensor, t1: &Tensor, gt: &Tensor) {
    use freqsal_core::blocks::frcab::{frcab, FrcabWeights};
    use freqsal_core::blocks::mpa::{mpa, mpf, MpaWeights};
    use freqsal_core::blocks::WeightInit;
    let mut store = ParamStore::new();
    let mut init = WeightInit::new(7);
    let (c, h, wd) = r1.dims3().unwrap();
    let mw = MpaWeights::register(&mut store, "m", c, 8, h, wd, &mut init).unwrap();
    let fw = FrcabWeights::register(&mut store, "f", c, c, &mut init).unwrap();
    let mut g = Graph::new(&store);
    let rn = g.input(r1.clone());
    let tn = g.input(t1.clone());
    let f = mpa(&mut g, rn, tn, &mw).unwrap();
    let fl = mpf(&mut g, rn, tn, &mw).unwrap();
    let d = frcab(&mut g, f, &fw, 2).unwrap();
    let dr = frcab(&mut g, rn, &fw, 2).unwrap();
    for (name, node, scale) in [("mpf(r1,t1)", fl, 1), ("mpa(r1,t1)", f, 1), ("frcab(mpa)", d, 2), ("frcab(r1)", dr, 2)] {
        let t = g.real(node).unwrap();
        let (cc, hh, ww) = t.dims3().unwrap();
        let _ = scale;
        let gs = downsample(gt, hh, ww);
        let mut best = 0.0f64;
        for ch in 0..cc {
            let plane = &t.data()[ch * hh * ww..(ch + 1) * hh * ww];
            best = best.max(corr(plane, &gs).abs());
        }
        println!("{name:12} [{cc}x{hh}x{ww}] best |corr| {best:.3}");
    }
}

fn downsample(gt: &Tensor, h: usize, w: usize) -> Vec<f64> {
    let n = gt.shape()[1];
    let (by, bx) = (n / h, n / w);
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in 0..by {
                for dx in 0..bx {
                    acc += gt.data()[(y * by + dy) * n + x * bx + dx];
                }
            }
            out[y * w + x] = acc / (by * bx) as f64;
        }
    }
    out
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    num / (va.sqrt() * vb.sqrt()).max(1e-12)
}
