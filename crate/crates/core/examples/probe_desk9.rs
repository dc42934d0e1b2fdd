use rand::rngs::StdRng;
use rand::SeedableRng;
use std::time::Instant;
use stylemotion::dataset::*;
use stylemotion::geom::MotionSequence;
use stylemotion::nn::AdamConfig;
use stylemotion::refsearch::*;
use stylemotion::shortrange::{self, time_gram, ShortRangeConfig, ShortRangeModel, mean_square_diff};

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 8, frames: 300, styles: 2, seed: 7 });
    let seqs: Vec<MotionSequence<f64>> = named.iter().map(|(_, s)| s.clone()).collect();
    let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
    let ds = split(clips, 0.25, 7);
    let adam = AdamConfig::default();
    let root = topo.root();

    // c7 plan seeds at 9 m separation.
    let index = build_index(&ds.train).unwrap();
    let s1p = ds.heldout[0].seq.frames[0].positions[root];
    let p_end = [s1p[0] + 9.0, s1p[2]];
    let mut good = vec![];
    for seed in 0..60u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        if let Ok(plan) = sample_subgoals([s1p[0], s1p[2]], p_end, 3, &index, &mut rng) {
            let matchable = plan.segment_dists.iter().all(|&d| {
                let mut r2 = rng.clone();
                match_clip_widening(d, &index, 0.05, &mut r2).is_ok()
            });
            if matchable { good.push(seed); }
        }
    }
    println!("c7 seeds (sep 9): {:?}", &good[..good.len().min(15)]);

    // cst ablation at tiny dims, e50.
    let train_short = |cst: f64| {
        let mut rng = StdRng::seed_from_u64(7);
        let mut cfg = ShortRangeConfig::tiny(120);
        cfg.weights.cst = cst;
        let mut model = ShortRangeModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let rep = shortrange::train(&mut model, &ds, &topo, 50, &adam, &mut rng).unwrap();
        (model, rep)
    };
    let t0 = Instant::now();
    let (with_m, rep) = train_short(0.01);
    let (without_m, _) = train_short(0.0);
    let mut w = 0.0;
    let mut wo = 0.0;
    for (i, clip) in ds.heldout.iter().enumerate() {
        let src = &ds.train[i % ds.train.len()];
        w += with_m.style_temporal_std(&with_m.transfer_style(clip, src, &topo).unwrap(), &topo).unwrap();
        wo += without_m.style_temporal_std(&without_m.transfer_style(clip, src, &topo).unwrap(), &topo).unwrap();
    }
    println!("cst ablation ({:.0}s both): with {:.5} vs without {:.5}; tiny drop {:.0}%",
        t0.elapsed().as_secs_f64(), w / 16.0, wo / 16.0,
        100.0 * (1.0 - rep.epoch_loss.last().unwrap() / rep.epoch_loss[0]));

    // Style gram closeness at default dims, 60 epochs, 16 pairs.
    let by_name = |suffix: &str| -> Vec<MotionClip<f64>> {
        let sq: Vec<MotionSequence<f64>> = named.iter().filter(|(n, _)| n.ends_with(suffix)).map(|(_, s)| s.clone()).collect();
        window_clips(&sq, &topo, 120, 60).unwrap().clips
    };
    let c0 = by_name("style0");
    let c1 = by_name("style1");
    let mut rng = StdRng::seed_from_u64(7);
    let mut model = ShortRangeModel::new(ShortRangeConfig::<f64>::default(), topo.joint_count(), 30.0, &mut rng);
    let t0 = Instant::now();
    let rep = shortrange::train(&mut model, &ds, &topo, 60, &adam, &mut rng).unwrap();
    let mut gram = 0;
    let total = 16.min(c0.len()).min(c1.len());
    for i in 0..total {
        let content = &c0[i];
        let style = &c1[(i * 3 + 1) % c1.len()];
        let out = model.transfer_style(content, style, &topo).unwrap();
        let f_out = model.encode_style(&out, &topo).unwrap();
        let f_sty = model.encode_style(style, &topo).unwrap();
        let f_ctn = model.encode_style(content, &topo).unwrap();
        if mean_square_diff(&time_gram(&f_out), &time_gram(&f_sty)) < mean_square_diff(&time_gram(&f_out), &time_gram(&f_ctn)) { gram += 1; }
    }
    println!("short default e60 ({:.0}s) loss {:.3}->{:.3} (drop {:.0}%): gram {gram}/{total}",
        t0.elapsed().as_secs_f64(), rep.epoch_loss[0], rep.epoch_loss.last().unwrap(),
        100.0 * (1.0 - rep.epoch_loss.last().unwrap() / rep.epoch_loss[0]));
}
