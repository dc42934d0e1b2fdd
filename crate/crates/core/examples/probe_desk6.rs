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

    // Long-range with windowed deviations.
    for (epochs, hidden, fuse) in [(50usize, 12usize, 16usize), (100, 24, 32)] {
        let mut rng = StdRng::seed_from_u64(7);
        let cfg = TransitionConfig { transition_len: 40, hidden, fuse_hidden: fuse, disc_hidden: 16, disc_window: 8, disc_blocks: 2, batch_size: 8, adv_batch: 2, adv_weight: 0.01 };
        let mut long = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        let report = longrange::train(&mut long, &ds, &topo, epochs, &adam, &mut rng).unwrap();
        let mut windows = Vec::new();
        for clip in &ds.heldout[..6] {
            windows.push(TransitionBoundary::from_window(&clip.seq.frames[0..40], &topo, 30.0).unwrap());
        }
        let curve = longrange::interpolation_mse(&long, &windows, 40, &topo).unwrap();
        let a = &ds.heldout[0];
        let b = &ds.heldout[1];
        let s1 = a.seq.frames[0].clone();
        let v1 = { let p0 = a.seq.frames[0].positions[root]; let p1 = a.seq.frames[1].positions[root]; [p1[0]-p0[0], p1[2]-p0[2]] };
        let mut line = format!("long e{epochs} h{hidden} ({:.0}s): pos {:.5} mse f/m/l {:.4}/{:.4}/{:.4} ratios",
            t0.elapsed().as_secs_f64(), report.epoch_pos_loss.last().unwrap(), curve[0], curve[19], curve[37]);
        for angle in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let pivot = { let p = b.seq.frames[119].positions[root]; [p[0], p[2]] };
            let r118 = rotate_state_about_vertical(&b.seq.frames[118], angle, pivot);
            let r119 = rotate_state_about_vertical(&b.seq.frames[119], angle, pivot);
            let v2 = [r119.positions[root][0]-r118.positions[root][0], r119.positions[root][2]-r118.positions[root][2]];
            let boundary = TransitionBoundary { start_state: s1.clone(), end_state: r119, start_vel: v1, end_vel: v2, interior: None };
            let seq = longrange::interpolate_with_boundary(&long, &boundary, 40, &topo).unwrap();
            let h = foot_height_curve(&seq, &topo);
            let jumps: Vec<f64> = h.windows(2).map(|w| (w[1]-w[0]).abs()).collect();
            let mx = jumps.iter().cloned().fold(0.0, f64::max);
            let at = jumps.iter().position(|&j| j == mx).unwrap();
            line += &format!(" {:.2}[{at}]", max_over_median_jump(&h));
            let _ = mx;
        }
        println!("{line}");
    }

    // Also untrained ratios (structural sanity).
    {
        let mut rng = StdRng::seed_from_u64(7);
        let long = TransitionModel::new(TransitionConfig::tiny(40), topo.joint_count(), 30.0, &mut rng);
        let a = &ds.heldout[0];
        let b = &ds.heldout[1];
        let s1 = a.seq.frames[0].clone();
        let mut line = String::from("long untrained ratios:");
        for angle in [0.0, std::f64::consts::FRAC_PI_4] {
            let pivot = { let p = b.seq.frames[119].positions[root]; [p[0], p[2]] };
            let r119 = rotate_state_about_vertical(&b.seq.frames[119], angle, pivot);
            let seq = longrange::interpolate(&long, &s1, &r119, 40, &topo).unwrap();
            let h = foot_height_curve(&seq, &topo);
            line += &format!(" {:.2}", max_over_median_jump(&h));
        }
        println!("{line}");
    }

    // Style metrics at default dims, 60 and 120 epochs; 16 pairs; plus the
    // cst ablation comparison.
    let by_name = |suffix: &str| -> Vec<MotionClip<f64>> {
        let sq: Vec<MotionSequence<f64>> = named.iter().filter(|(n, _)| n.ends_with(suffix)).map(|(_, s)| s.clone()).collect();
        window_clips(&sq, &topo, 120, 60).unwrap().clips
    };
    let c0 = by_name("style0");
    let c1 = by_name("style1");
    for epochs in [60usize, 120] {
        let mut rng = StdRng::seed_from_u64(7);
        let mut model = ShortRangeModel::new(ShortRangeConfig::<f64>::default(), topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        let rep = shortrange::train(&mut model, &ds, &topo, epochs, &adam, &mut rng).unwrap();
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
        println!("short default e{epochs} ({:.0}s) loss {:.3}->{:.3}: pointwise {pw}/{total}, time-mean {mean_v}/{total}, gram {gram}/{total}",
            t0.elapsed().as_secs_f64(), rep.epoch_loss[0], rep.epoch_loss.last().unwrap());
    }

    // cst ablation at tiny dims (criterion 6 config).
    {
        let train_short = |cst: f64| {
            let mut rng = StdRng::seed_from_u64(7);
            let mut cfg = ShortRangeConfig::tiny(120);
            cfg.weights.cst = cst;
            let mut model = ShortRangeModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
            let rep = shortrange::train(&mut model, &ds, &topo, 50, &adam, &mut rng).unwrap();
            (model, rep)
        };
        let (with_m, rep_a) = train_short(0.01);
        let (without_m, _) = train_short(0.0);
        let mut w = 0.0;
        let mut wo = 0.0;
        for (i, clip) in ds.heldout.iter().enumerate() {
            let src = &ds.train[i % ds.train.len()];
            let oa = with_m.transfer_style(clip, src, &topo).unwrap();
            w += with_m.style_temporal_std(&oa, &topo).unwrap();
            let ob = without_m.transfer_style(clip, src, &topo).unwrap();
            wo += without_m.style_temporal_std(&ob, &topo).unwrap();
        }
        println!("cst ablation: with {:.5} vs without {:.5} (short tiny loss {:.3}->{:.3})",
            w / 16.0, wo / 16.0, rep_a.epoch_loss[0], rep_a.epoch_loss.last().unwrap());
    }

    // c7 seed search on the new dataset.
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
