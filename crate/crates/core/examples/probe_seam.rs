use rand::rngs::StdRng;
use rand::SeedableRng;
use stylemotion::dataset::*;
use stylemotion::geom::*;
use stylemotion::longrange::{self, TransitionBoundary, TransitionConfig, TransitionModel};
use stylemotion::nn::AdamConfig;

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 8, frames: 300, styles: 2, seed: 7 });
    let seqs: Vec<MotionSequence<f64>> = named.iter().map(|(_, s)| s.clone()).collect();
    let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
    let ds = split(clips, 0.25, 7);
    let adam = AdamConfig::default();

    let mut rng = StdRng::seed_from_u64(7);
    let cfg = TransitionConfig { transition_len: 40, hidden: 24, fuse_hidden: 32, disc_hidden: 16, disc_window: 8, disc_blocks: 2, batch_size: 8, adv_batch: 2, adv_weight: 0.01 };
    let mut long = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
    longrange::train(&mut long, &ds, &topo, 60, &adam, &mut rng).unwrap();

    // Supervised held-out window: compare rollout outputs to projected truth.
    let w = &ds.heldout[2];
    let boundary = TransitionBoundary::from_window(&w.seq.frames[0..40], &topo, 30.0).unwrap();
    let (o1, on) = long.boundary_params(&boundary);
    let fwd = long.rollout_forward(&o1, &on, 40).unwrap();
    let bwd = long.rollout_backward(&on, &o1, 40).unwrap();
    let bones = topo.joint_count() - 1;

    // True interior params for frames 2..39 from the projected targets.
    let d1 = direction_vectors(&boundary.start_state, &topo).unwrap();
    let dn = direction_vectors(&boundary.end_state, &topo).unwrap();
    let interior_dirs: Vec<DirectionFrame<f64>> = boundary.interior.as_ref().unwrap().iter()
        .map(|f| direction_vectors(f, &topo).unwrap()).collect();
    let extraction = stylemotion::slerp::motion_to_params(&d1, &dn, &interior_dirs);

    for (label, i) in [("frame 2 (i=0)", 0usize), ("frame 20", 18), ("frame 39 (i=37)", 37)] {
        let truth = &extraction.trajectory.frames[i];
        let f = &fwd[i];
        let bidx = 40 - 2 - 1 - i; // same-frame backward index
        let b = &bwd[bidx];
        let mut ferr = 0.0f64;
        let mut berr = 0.0f64;
        for bn in 0..bones {
            ferr = ferr.max((f.data()[bn] - truth[bn].latitude).abs())
                .max((f.data()[bones + bn] - truth[bn].longitude).abs());
            berr = berr.max((b.data()[bn] - truth[bn].latitude).abs())
                .max((b.data()[bones + bn] - truth[bn].longitude).abs());
        }
        println!("{label}: fwd max param err {ferr:.4}, bwd(same-frame) max param err {berr:.4}");
    }

    // Where do the final fused positions land vs truth?
    let seq = longrange::interpolate_with_boundary(&long, &boundary, 40, &topo).unwrap();
    let tgt = boundary.interior.as_ref().unwrap();
    for (label, i) in [("frame 2", 0usize), ("frame 20", 18), ("frame 39", 37)] {
        let err = longrange::loss_position(&tgt[i..=i], &seq.frames[i + 1..=i + 1]);
        println!("{label}: fused msq {err:.5}");
    }
    // Foot heights near the end.
    let hcurve = stylemotion::pipeline::foot_height_curve(&seq, &topo);
    println!("foot y end: gen[37] {:.4} gen[38] {:.4} sN {:.4}", hcurve[37], hcurve[38], hcurve[39]);
    let t_curve: Vec<f64> = tgt.iter().map(|f| f.positions[topo.feet().unwrap().1][1]).collect();
    println!("tgt foot y [36],[37](=frame39): {:.4} {:.4}", t_curve[36], t_curve[37]);
}
