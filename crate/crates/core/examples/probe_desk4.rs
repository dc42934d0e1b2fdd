use rand::rngs::StdRng;
use rand::SeedableRng;
use std::time::Instant;
use stylemotion::dataset::*;
use stylemotion::geom::*;
use stylemotion::longrange::{self, TransitionBoundary, TransitionConfig, TransitionModel};
use stylemotion::nn::AdamConfig;
use stylemotion::pipeline::*;
use stylemotion::shortrange::{self, time_gram, ShortRangeConfig, ShortRangeModel, mean_square_diff};

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 8, frames: 300, styles: 2, seed: 7 });
    let seqs: Vec<MotionSequence<f64>> = named.iter().map(|(_, s)| s.clone()).collect();
    let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
    let ds = split(clips, 0.25, 7);
    let adam = AdamConfig::default();
    let root = topo.root();

    for (epochs, hidden, fuse) in [(50usize, 12usize, 16usize), (100, 24, 32)] {
        let mut rng = StdRng::seed_from_u64(7);
        let cfg = TransitionConfig { transition_len: 40, hidden, fuse_hidden: fuse, disc_hidden: 16, disc_window: 8, disc_blocks: 2, batch_size: 8, adv_batch: 2, adv_weight: 0.01 };
        let mut long = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        let report = longrange::train(&mut long, &ds, &topo, epochs, &adam, &mut rng).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        // Per-timestep error profile over supervised held-out windows.
        let mut windows = Vec::new();
        for clip in &ds.heldout[..6] {
            windows.push(TransitionBoundary::from_window(&clip.seq.frames[0..40], &topo, 30.0).unwrap());
        }
        let curve = longrange::interpolation_mse(&long, &windows, 40, &topo).unwrap();
        println!("long e{epochs} h{hidden} ({secs:.0}s): pos {:.5}; mse curve first/mid/last: {:.5} {:.5} {:.5}",
            report.epoch_pos_loss.last().unwrap(), curve[0], curve[19], curve[37]);

        // Foot-height ratios with true rotated boundary velocities.
        let a = &ds.heldout[0];
        let b = &ds.heldout[1];
        let s1 = a.seq.frames[0].clone();
        let v1 = {
            let p0 = a.seq.frames[0].positions[root];
            let p1 = a.seq.frames[1].positions[root];
            [p1[0] - p0[0], p1[2] - p0[2]]
        };
        let mut line = String::from("  true-vel ratios:");
        for angle in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let pivot = {
                let p = b.seq.frames[119].positions[root];
                [p[0], p[2]]
            };
            let r118 = rotate_state_about_vertical(&b.seq.frames[118], angle, pivot);
            let r119 = rotate_state_about_vertical(&b.seq.frames[119], angle, pivot);
            let v2 = [
                r119.positions[root][0] - r118.positions[root][0],
                r119.positions[root][2] - r118.positions[root][2],
            ];
            let boundary = TransitionBoundary { start_state: s1.clone(), end_state: r119, start_vel: v1, end_vel: v2, interior: None };
            let seq = longrange::interpolate_with_boundary(&long, &boundary, 40, &topo).unwrap();
            let h = foot_height_curve(&seq, &topo);
            let jumps: Vec<f64> = h.windows(2).map(|w| (w[1]-w[0]).abs()).collect();
            let mx = jumps.iter().cloned().fold(0.0, f64::max);
            let at = jumps.iter().position(|&j| j == mx).unwrap();
            line += &format!(" {:.2}[{at} abs {mx:.4}]", max_over_median_jump(&h));
        }
        println!("{line}");
    }

    // Style transfer isolated on the style axis: same walker, two styles.
    let by_name = |suffix: &str| -> Vec<MotionClip<f64>> {
        let sq: Vec<MotionSequence<f64>> = named.iter().filter(|(n, _)| n.ends_with(suffix)).map(|(_, s)| s.clone()).collect();
        window_clips(&sq, &topo, 120, 120).unwrap().clips
    };
    let c0 = by_name("style0");
    let c1 = by_name("style1");
    for (epochs, cfg_name, cfg) in [
        (60usize, "tiny", ShortRangeConfig::tiny(120)),
        (60, "medium", ShortRangeConfig { content_channels: 8, style_channels: 8, fused_channels: 16, content_hidden: 12, style_hidden: 10, decoder_hidden: 12, clip_len: 120, batch_size: 8, weights: Default::default() }),
    ] {
        let mut rng = StdRng::seed_from_u64(7);
        let mut model = ShortRangeModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        shortrange::train(&mut model, &ds, &topo, epochs, &adam, &mut rng).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let (mut pw, mut gram) = (0, 0);
        let total = 8.min(c0.len());
        for i in 0..total {
            let content = &c0[i];   // walker i, neutral posture
            let style = &c1[i];     // same walker, offset posture
            let out = model.transfer_style(content, style, &topo).unwrap();
            let f_out = model.encode_style(&out, &topo).unwrap();
            let f_sty = model.encode_style(style, &topo).unwrap();
            let f_ctn = model.encode_style(content, &topo).unwrap();
            if mean_square_diff(&f_out, &f_sty) < mean_square_diff(&f_out, &f_ctn) { pw += 1; }
            if mean_square_diff(&time_gram(&f_out), &time_gram(&f_sty)) < mean_square_diff(&time_gram(&f_out), &time_gram(&f_ctn)) { gram += 1; }
        }
        println!("short {cfg_name} e{epochs} ({secs:.0}s) same-walker cross-style: pointwise {pw}/{total}, gram {gram}/{total}");
    }
}
