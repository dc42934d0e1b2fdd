use rand::rngs::StdRng;
use rand::SeedableRng;
use stylemotion::dataset::*;
use stylemotion::geom::*;
use stylemotion::longrange::{self, TransitionBoundary, TransitionConfig, TransitionModel};
use stylemotion::nn::AdamConfig;
use stylemotion::pipeline::*;

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 8, frames: 300, styles: 2, seed: 7 });
    let seqs: Vec<MotionSequence<f64>> = named.iter().map(|(_, s)| s.clone()).collect();
    let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
    let ds = split(clips, 0.25, 7);
    let root = topo.root();

    let path = std::path::Path::new("/tmp/probe_long_h32.ckpt");
    let long = if path.exists() {
        TransitionModel::<f64>::load(path).unwrap()
    } else {
        let mut rng = StdRng::seed_from_u64(7);
        let cfg = TransitionConfig { transition_len: 40, hidden: 32, fuse_hidden: 48, disc_hidden: 24, disc_window: 8, disc_blocks: 2, batch_size: 8, adv_batch: 2, adv_weight: 0.01 };
        let mut m = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        longrange::train(&mut m, &ds, &topo, 120, &AdamConfig::default(), &mut rng).unwrap();
        m.save(path).unwrap();
        m
    };

    let a = &ds.heldout[0];
    let b = &ds.heldout[1];
    let s1 = a.seq.frames[0].clone();
    let v1 = { let p0 = a.seq.frames[0].positions[root]; let p1 = a.seq.frames[1].positions[root]; [p1[0]-p0[0], p1[2]-p0[2]] };
    for angle in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
        let pivot = { let p = b.seq.frames[119].positions[root]; [p[0], p[2]] };
        let r118 = rotate_state_about_vertical(&b.seq.frames[118], angle, pivot);
        let r119 = rotate_state_about_vertical(&b.seq.frames[119], angle, pivot);
        let v2 = [r119.positions[root][0]-r118.positions[root][0], r119.positions[root][2]-r118.positions[root][2]];
        let boundary = TransitionBoundary { start_state: s1.clone(), end_state: r119, start_vel: v1, end_vel: v2, interior: None };
        let seq = longrange::interpolate_with_boundary(&long, &boundary, 40, &topo).unwrap();
        let h = foot_height_curve(&seq, &topo);
        let mut jumps: Vec<(usize, f64)> = h.windows(2).map(|w| (w[1]-w[0]).abs()).enumerate().collect();
        jumps.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
        let mut sorted: Vec<f64> = jumps.iter().map(|j| j.1).collect();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let median = sorted[sorted.len()/2];
        println!("angle {angle:.2}: ratio {:.2} median {:.5} top5 {:?}",
            jumps[0].1 / median, median,
            jumps[..5].iter().map(|(i, v)| format!("{i}:{:.4}", v)).collect::<Vec<_>>());
    }
    // Several other endpoint pairs for robustness.
    for (ia, ib) in [(2usize, 5usize), (4, 9), (7, 12)] {
        let a = &ds.heldout[ia];
        let b = &ds.heldout[ib];
        let s1 = a.seq.frames[0].clone();
        let v1 = { let p0 = a.seq.frames[0].positions[root]; let p1 = a.seq.frames[1].positions[root]; [p1[0]-p0[0], p1[2]-p0[2]] };
        let mut line = format!("pair ({ia},{ib}):");
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
    }
}
