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

    // Long-range candidate for the shared artifacts.
    {
        let mut rng = StdRng::seed_from_u64(7);
        let cfg = TransitionConfig { transition_len: 40, hidden: 32, fuse_hidden: 48, disc_hidden: 24, disc_window: 8, disc_blocks: 2, batch_size: 8, adv_batch: 2, adv_weight: 0.01 };
        let mut long = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        let report = longrange::train(&mut long, &ds, &topo, 120, &adam, &mut rng).unwrap();
        let a = &ds.heldout[0];
        let b = &ds.heldout[1];
        let s1 = a.seq.frames[0].clone();
        let v1 = { let p0 = a.seq.frames[0].positions[root]; let p1 = a.seq.frames[1].positions[root]; [p1[0]-p0[0], p1[2]-p0[2]] };
        let mut line = format!("long e120 h32 ({:.0}s): pos {:.4}->{:.5} ratios",
            t0.elapsed().as_secs_f64(), report.epoch_pos_loss[0], report.epoch_pos_loss.last().unwrap());
        for angle in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let pivot = { let p = b.seq.frames[119].positions[root]; [p[0], p[2]] };
            let r118 = rotate_state_about_vertical(&b.seq.frames[118], angle, pivot);
            let r119 = rotate_state_about_vertical(&b.seq.frames[119], angle, pivot);
            let v2 = [r119.positions[root][0]-r118.positions[root][0], r119.positions[root][2]-r118.positions[root][2]];
            let boundary = TransitionBoundary { start_state: s1.clone(), end_state: r119, start_vel: v1, end_vel: v2, interior: None };
            let seq = longrange::interpolate_with_boundary(&long, &boundary, 40, &topo).unwrap();
            let h = foot_height_curve(&seq, &topo);
            line += &format!(" {:.2}", max_over_median_jump(&h));
        }
        println!("{line}");
        // Also disc accuracy quick check.
        let win = long.cfg.disc_window;
        let mut real = Vec::new();
        let mut fake = Vec::new();
        for (i, clip) in ds.heldout.iter().take(8).enumerate() {
            let dirs: Vec<DirectionFrame<f64>> = clip.seq.frames.iter().map(|f| direction_vectors(f, &topo).unwrap()).collect();
            real.push(dirs[10..10+win].to_vec());
            let other = &ds.heldout[(i + 3) % ds.heldout.len()];
            let seq = longrange::interpolate(&long, &clip.seq.frames[0], &other.seq.frames[other.len()-1], 40, &topo).unwrap();
            let fd: Vec<DirectionFrame<f64>> = seq.frames[1..39].iter().map(|f| direction_vectors(f, &topo).unwrap()).collect();
            fake.push(fd[12..12+win].to_vec());
        }
        println!("  disc accuracy: {:.2}", longrange::discriminator_accuracy(&long, &real, &fake).unwrap());
    }

    // Short-range default dims e100: gram metric on 16 cross-style pairs.
    let by_name = |suffix: &str| -> Vec<MotionClip<f64>> {
        let sq: Vec<MotionSequence<f64>> = named.iter().filter(|(n, _)| n.ends_with(suffix)).map(|(_, s)| s.clone()).collect();
        window_clips(&sq, &topo, 120, 60).unwrap().clips
    };
    let c0 = by_name("style0");
    let c1 = by_name("style1");
    {
        let mut rng = StdRng::seed_from_u64(7);
        let mut model = ShortRangeModel::new(ShortRangeConfig::<f64>::default(), topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        let rep = shortrange::train(&mut model, &ds, &topo, 100, &adam, &mut rng).unwrap();
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
        println!("short default e100 ({:.0}s) loss {:.3}->{:.3}: gram {gram}/{total}",
            t0.elapsed().as_secs_f64(), rep.epoch_loss[0], rep.epoch_loss.last().unwrap());
    }

    // cst ablation at tiny dims.
    {
        let train_short = |cst: f64| {
            let mut rng = StdRng::seed_from_u64(7);
            let mut cfg = ShortRangeConfig::tiny(120);
            cfg.weights.cst = cst;
            let mut model = ShortRangeModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
            let rep = shortrange::train(&mut model, &ds, &topo, 50, &adam, &mut rng).unwrap();
            (model, rep)
        };
        let (with_m, rep) = train_short(0.01);
        let (without_m, _) = train_short(0.0);
        let mut w = 0.0;
        let mut wo = 0.0;
        for (i, clip) in ds.heldout.iter().enumerate() {
            let src = &ds.train[i % ds.train.len()];
            w += with_m.style_temporal_std(&with_m.transfer_style(clip, src, &topo).unwrap(), &topo).unwrap();
            wo += without_m.style_temporal_std(&without_m.transfer_style(clip, src, &topo).unwrap(), &topo).unwrap();
        }
        println!("cst ablation: with {:.5} vs without {:.5}; tiny loss {:.3}->{:.3}",
            w / 16.0, wo / 16.0, rep.epoch_loss[0], rep.epoch_loss.last().unwrap());
    }

    // c7 seed search.
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
}
