use rand::rngs::StdRng;
use rand::SeedableRng;
use std::time::Instant;
use stylemotion::dataset::*;
use stylemotion::geom::*;
use stylemotion::longrange::{self, TransitionConfig, TransitionModel};
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

    // Same-frame pairing: sweep capacity/epochs for the foot-height ratios.
    for (epochs, hidden, fuse) in [(50usize, 12usize, 16usize), (100, 24, 32), (150, 32, 32)] {
        let mut rng = StdRng::seed_from_u64(7);
        let cfg = TransitionConfig { transition_len: 40, hidden, fuse_hidden: fuse, disc_hidden: 16, disc_window: 8, disc_blocks: 2, batch_size: 8, adv_batch: 2, adv_weight: 0.01 };
        let mut long = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        let report = longrange::train(&mut long, &ds, &topo, epochs, &adam, &mut rng).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let s1 = ds.heldout[0].seq.frames[0].clone();
        let base = ds.heldout[1].seq.frames[119].clone();
        let mut line = format!("long e{epochs} h{hidden}: pos {:.4}->{:.5} ({secs:.0}s) ratios", report.epoch_pos_loss[0], report.epoch_pos_loss.last().unwrap());
        for angle in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let pivot = [base.positions[root][0], base.positions[root][2]];
            let s2 = rotate_state_about_vertical(&base, angle, pivot);
            let seq = longrange::interpolate(&long, &s1, &s2, 40, &topo).unwrap();
            let h = foot_height_curve(&seq, &topo);
            let jumps: Vec<f64> = h.windows(2).map(|w| (w[1]-w[0]).abs()).collect();
            let mx = jumps.iter().cloned().fold(0.0, f64::max);
            let at = jumps.iter().position(|&j| j == mx).unwrap();
            line += &format!(" {:.2}[{}]", max_over_median_jump(&h), at);
        }
        println!("{line}");
    }

    // Style closeness, cross-class pairing, three metrics at 60 epochs.
    let s0: Vec<MotionSequence<f64>> = named.iter().filter(|(n, _)| n.ends_with("style0")).map(|(_, s)| s.clone()).collect();
    let s1v: Vec<MotionSequence<f64>> = named.iter().filter(|(n, _)| n.ends_with("style1")).map(|(_, s)| s.clone()).collect();
    let c0 = window_clips(&s0, &topo, 120, 120).unwrap().clips;
    let c1 = window_clips(&s1v, &topo, 120, 120).unwrap().clips;
    for epochs in [60usize] {
        let mut rng = StdRng::seed_from_u64(7);
        let mut model = ShortRangeModel::new(ShortRangeConfig::tiny(120), topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        shortrange::train(&mut model, &ds, &topo, epochs, &adam, &mut rng).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let (mut pw, mut mean_v, mut gram) = (0, 0, 0);
        let total = 8;
        for i in 0..total {
            let content = &c0[(i * 2) % c0.len()];
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
        println!("short e{epochs} ({secs:.0}s) cross-class: pointwise {pw}/8, time-mean {mean_v}/8, gram {gram}/8");
    }
}
