use rand::rngs::StdRng;
use rand::SeedableRng;
use std::time::Instant;
use stylemotion::dataset::*;
use stylemotion::geom::*;
use stylemotion::longrange::{self, TransitionBoundary, TransitionConfig, TransitionModel};
use stylemotion::nn::AdamConfig;
use stylemotion::pipeline::*;
use stylemotion::refsearch::*;
use stylemotion::shortrange::{self, time_gram, ShortRangeConfig, ShortRangeModel, mean_square_diff};

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 8, frames: 300, styles: 2, seed: 7 });
    let seqs: Vec<MotionSequence<f64>> = named.iter().map(|(_, s)| s.clone()).collect();
    let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
    let ds = split(clips, 0.25, 7);
    let adam = AdamConfig::default();
    let root = topo.root();

    // 1. c7 seeds.
    let index = build_index(&ds.train).unwrap();
    let s1p = ds.heldout[0].seq.frames[0].positions[root];
    let p_end = [s1p[0] + 9.0, s1p[2]];
    let mut good = vec![];
    for seed in 0..60u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        if let Ok(plan) = sample_subgoals([s1p[0], s1p[2]], p_end, 3, &index, &mut rng) {
            if plan.segment_dists.iter().all(|&d| {
                let mut r2 = rng.clone();
                match_clip_widening(d, &index, 0.05, &mut r2).is_ok()
            }) { good.push(seed); }
        }
    }
    println!("c7 seeds: {:?}", &good[..good.len().min(10)]);

    // 2. tiny short e50 drop + cst ablation.
    let train_tiny = |cst: f64| {
        let mut rng = StdRng::seed_from_u64(7);
        let mut cfg = ShortRangeConfig::tiny(120);
        cfg.weights.cst = cst;
        let mut m = ShortRangeModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let rep = shortrange::train(&mut m, &ds, &topo, 50, &adam, &mut rng).unwrap();
        (m, rep)
    };
    let (with_m, rep) = train_tiny(0.01);
    let (without_m, _) = train_tiny(0.0);
    let (mut w, mut wo) = (0.0, 0.0);
    for (i, clip) in ds.heldout.iter().enumerate() {
        let src = &ds.train[i % ds.train.len()];
        w += with_m.style_temporal_std(&with_m.transfer_style(clip, src, &topo).unwrap(), &topo).unwrap();
        wo += without_m.style_temporal_std(&without_m.transfer_style(clip, src, &topo).unwrap(), &topo).unwrap();
    }
    println!("short tiny e50 drop {:.0}%; ablation {:.5} vs {:.5} (margin {:.4})",
        100.0 * (1.0 - rep.epoch_loss.last().unwrap() / rep.epoch_loss[0]), w / 16.0, wo / 16.0, (wo - w) / 16.0);

    // 3. tiny long e50 drop.
    {
        let mut rng = StdRng::seed_from_u64(7);
        let mut m = TransitionModel::new(TransitionConfig::tiny(40), topo.joint_count(), 30.0, &mut rng);
        let rep = longrange::train(&mut m, &ds, &topo, 50, &adam, &mut rng).unwrap();
        println!("long tiny e50 drop {:.0}% ({:.5} -> {:.5})",
            100.0 * (1.0 - rep.epoch_pos_loss.last().unwrap() / rep.epoch_pos_loss[0]),
            rep.epoch_pos_loss[0], rep.epoch_pos_loss.last().unwrap());
    }

    // 4. big long h32 e120 dev0.5: ratios on pairs, via true rotated velocities.
    {
        let mut rng = StdRng::seed_from_u64(7);
        let cfg = TransitionConfig { transition_len: 40, hidden: 32, fuse_hidden: 48, disc_hidden: 24, disc_window: 8, disc_blocks: 2, batch_size: 8, adv_batch: 2, adv_weight: 0.01, deviation_scale: 0.5 };
        let mut long = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        let rep = longrange::train(&mut long, &ds, &topo, 120, &adam, &mut rng).unwrap();
        let mut line = format!("big long ({:.0}s, drop {:.0}%):", t0.elapsed().as_secs_f64(),
            100.0 * (1.0 - rep.epoch_pos_loss.last().unwrap() / rep.epoch_pos_loss[0]));
        for (ia, ib) in [(0usize, 1usize), (2, 5), (4, 9), (7, 12)] {
            let a = &ds.heldout[ia];
            let b = &ds.heldout[ib];
            let s1 = a.seq.frames[0].clone();
            let v1 = { let p0 = a.seq.frames[0].positions[root]; let p1 = a.seq.frames[1].positions[root]; [p1[0]-p0[0], p1[2]-p0[2]] };
            line += " |";
            for angle in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
                let pivot = { let p = b.seq.frames[119].positions[root]; [p[0], p[2]] };
                let r118 = rotate_state_about_vertical(&b.seq.frames[118], angle, pivot);
                let r119 = rotate_state_about_vertical(&b.seq.frames[119], angle, pivot);
                let v2 = [r119.positions[root][0]-r118.positions[root][0], r119.positions[root][2]-r118.positions[root][2]];
                let boundary = TransitionBoundary { start_state: s1.clone(), end_state: r119, start_vel: v1, end_vel: v2, interior: None };
                let seq = longrange::interpolate_with_boundary(&long, &boundary, 40, &topo).unwrap();
                line += &format!(" {:.1}", max_over_median_jump(&foot_height_curve(&seq, &topo)));
            }
        }
        println!("{line}");
        long.save(std::path::Path::new("/tmp/probe_big_long.ckpt")).unwrap();
    }

    // 5. default short e100: gram metric.
    let by_name = |suffix: &str| -> Vec<MotionClip<f64>> {
        let sq: Vec<MotionSequence<f64>> = named.iter().filter(|(n, _)| n.ends_with(suffix)).map(|(_, s)| s.clone()).collect();
        window_clips(&sq, &topo, 120, 60).unwrap().clips
    };
    let c0 = by_name("style0");
    let c1 = by_name("style1");
    let mut rng = StdRng::seed_from_u64(7);
    let mut model = ShortRangeModel::new(ShortRangeConfig::<f64>::default(), topo.joint_count(), 30.0, &mut rng);
    let t0 = Instant::now();
    for chunk in [60usize, 40] {
        shortrange::train(&mut model, &ds, &topo, chunk, &adam, &mut rng).unwrap();
        let (mut pw, mut gram) = (0, 0);
        let total = 16;
        for i in 0..total {
            let content = &c0[i % c0.len()];
            let style = &c1[(i * 3 + 1) % c1.len()];
            let out = model.transfer_style(content, style, &topo).unwrap();
            let f_out = model.encode_style(&out, &topo).unwrap();
            let f_sty = model.encode_style(style, &topo).unwrap();
            let f_ctn = model.encode_style(content, &topo).unwrap();
            if mean_square_diff(&f_out, &f_sty) < mean_square_diff(&f_out, &f_ctn) { pw += 1; }
            if mean_square_diff(&time_gram(&f_out), &time_gram(&f_sty)) < mean_square_diff(&time_gram(&f_out), &time_gram(&f_ctn)) { gram += 1; }
        }
        println!("short default epoch {} ({:.0}s): pointwise {pw}/{total}, gram {gram}/{total}",
            model.store.epoch(), t0.elapsed().as_secs_f64());
    }
}
