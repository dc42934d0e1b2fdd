use rand::rngs::StdRng;
use rand::SeedableRng;
use std::time::Instant;
use stylemotion::dataset::*;
use stylemotion::geom::MotionSequence;
use stylemotion::nn::AdamConfig;
use stylemotion::shortrange::{self, time_gram, ShortRangeConfig, ShortRangeModel, mean_square_diff};

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 8, frames: 300, styles: 2, seed: 7 });
    let seqs: Vec<MotionSequence<f64>> = named.iter().map(|(_, s)| s.clone()).collect();
    let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
    let ds = split(clips, 0.25, 7);
    let adam = AdamConfig::default();

    let by_name = |suffix: &str| -> Vec<MotionClip<f64>> {
        let sq: Vec<MotionSequence<f64>> = named.iter().filter(|(n, _)| n.ends_with(suffix)).map(|(_, s)| s.clone()).collect();
        window_clips(&sq, &topo, 120, 60).unwrap().clips
    };
    let c0 = by_name("style0");
    let c1 = by_name("style1");

    let mut rng = StdRng::seed_from_u64(7);
    let mut model = ShortRangeModel::new(ShortRangeConfig::<f64>::default(), topo.joint_count(), 30.0, &mut rng);
    let t0 = Instant::now();
    for chunk in [60usize, 40, 40] {
        shortrange::train(&mut model, &ds, &topo, chunk, &adam, &mut rng).unwrap();
        let (mut pw, mut mean_v, mut gram) = (0, 0, 0);
        let total = 16.min(c0.len()).min(c1.len());
        for i in 0..total {
            let content = &c0[i];
            let style = &c1[(i * 3 + 1) % c1.len()];
            let out = model.transfer_style(content, style, &topo).unwrap();
            let f_out = model.encode_style(&out, &topo).unwrap();
            let f_sty = model.encode_style(style, &topo).unwrap();
            let f_ctn = model.encode_style(content, &topo).unwrap();
            if mean_square_diff(&f_out, &f_sty) < mean_square_diff(&f_out, &f_ctn) { pw += 1; }
            let mv = |t: &stylemotion::Tensor64| -> Vec<f64> {
                let (c, m) = (t.dim(0), t.dim(1));
                (0..c).map(|ch| (0..m).map(|tt| t.at2(ch, tt)).sum::<f64>() / m as f64).collect()
            };
            let d = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| (x-y)*(x-y)).sum::<f64>();
            let (mo, ms, mc) = (mv(&f_out), mv(&f_sty), mv(&f_ctn));
            if d(&mo, &ms) < d(&mo, &mc) { mean_v += 1; }
            if mean_square_diff(&time_gram(&f_out), &time_gram(&f_sty)) < mean_square_diff(&time_gram(&f_out), &time_gram(&f_ctn)) { gram += 1; }
        }
        println!("epochs so far {} ({:.0}s): pointwise {pw}/{total}, time-mean {mean_v}/{total}, gram {gram}/{total}",
            model.store.epoch(), t0.elapsed().as_secs_f64());
    }
    // Also: cst-ablation with a common yardstick (the cst model's encoder).
    let train_short = |cst: f64| {
        let mut rng = StdRng::seed_from_u64(7);
        let mut cfg = ShortRangeConfig::tiny(120);
        cfg.weights.cst = cst;
        let mut m = ShortRangeModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        shortrange::train(&mut m, &ds, &topo, 50, &adam, &mut rng).unwrap();
        m
    };
    let with_m = train_short(0.01);
    let without_m = train_short(0.0);
    let (mut own_w, mut own_wo, mut common_w, mut common_wo) = (0.0, 0.0, 0.0, 0.0);
    for (i, clip) in ds.heldout.iter().enumerate() {
        let src = &ds.train[i % ds.train.len()];
        let out_w = with_m.transfer_style(clip, src, &topo).unwrap();
        let out_wo = without_m.transfer_style(clip, src, &topo).unwrap();
        own_w += with_m.style_temporal_std(&out_w, &topo).unwrap();
        own_wo += without_m.style_temporal_std(&out_wo, &topo).unwrap();
        common_w += with_m.style_temporal_std(&out_w, &topo).unwrap();
        common_wo += with_m.style_temporal_std(&out_wo, &topo).unwrap();
    }
    println!("ablation own-encoder: {:.5} vs {:.5}; common-encoder: {:.5} vs {:.5}",
        own_w / 16.0, own_wo / 16.0, common_w / 16.0, common_wo / 16.0);
}
