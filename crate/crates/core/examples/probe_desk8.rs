use rand::rngs::StdRng;
use rand::SeedableRng;
use std::time::Instant;
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
    let adam = AdamConfig::default();

    // Tiny 50-epoch run: the training-baseline drop for criterion 6.
    {
        let mut rng = StdRng::seed_from_u64(7);
        let mut m = TransitionModel::new(TransitionConfig::tiny(40), topo.joint_count(), 30.0, &mut rng);
        let rep = longrange::train(&mut m, &ds, &topo, 50, &adam, &mut rng).unwrap();
        let (a, b) = (rep.epoch_pos_loss[0], *rep.epoch_pos_loss.last().unwrap());
        println!("tiny e50: pos {a:.5} -> {b:.5} (drop {:.0}%)", 100.0 * (1.0 - b / a));
    }

    // Candidate shared long model: h32, deviation_scale sweep.
    for dev in [1.0f64, 0.5] {
        let mut rng = StdRng::seed_from_u64(7);
        let cfg = TransitionConfig { transition_len: 40, hidden: 32, fuse_hidden: 48, disc_hidden: 24, disc_window: 8, disc_blocks: 2, batch_size: 8, adv_batch: 2, adv_weight: 0.01, deviation_scale: dev };
        let mut long = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let t0 = Instant::now();
        let rep = longrange::train(&mut long, &ds, &topo, 120, &adam, &mut rng).unwrap();
        let (l0, l1) = (rep.epoch_pos_loss[0], *rep.epoch_pos_loss.last().unwrap());
        let mut line = format!("h32 e120 dev {dev} ({:.0}s): pos {l0:.5}->{l1:.5} (drop {:.0}%)",
            t0.elapsed().as_secs_f64(), 100.0 * (1.0 - l1 / l0));
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
                let h = foot_height_curve(&seq, &topo);
                line += &format!(" {:.1}", max_over_median_jump(&h));
            }
        }
        println!("{line}");
    }
}
