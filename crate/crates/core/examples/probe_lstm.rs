use rand::rngs::StdRng;
use rand::SeedableRng;
use stylemotion::dataset::*;
use stylemotion::geom::direction_vectors;
use stylemotion::longrange::{TransitionBoundary, TransitionConfig, TransitionModel};
use stylemotion::nn::{AdamConfig, Graph};
use stylemotion::slerp::motion_to_params;

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 8, frames: 300, styles: 2, seed: 7 });
    let seqs: Vec<_> = named.into_iter().map(|(_, s)| s).collect();
    let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
    let ds = split(clips, 0.25, 7);
    let mut rng = StdRng::seed_from_u64(7);
    let model = TransitionModel::new(TransitionConfig::tiny(40), topo.joint_count(), 30.0, &mut rng);
    let mut store = model.gen_store.clone();
    let adam = AdamConfig::default();
    let bones = topo.joint_count() - 1;
    let n = 40;

    // Direct o-space supervision of the forward rollout only.
    let mut windows = Vec::new();
    for clip in ds.train.iter().take(12) {
        let frames = &clip.seq.frames[0..n];
        let b = TransitionBoundary::from_window(frames, &topo, 30.0).unwrap();
        let d1 = direction_vectors(&frames[0], &topo).unwrap();
        let dn = direction_vectors(&frames[n-1], &topo).unwrap();
        let dirs: Vec<_> = frames[1..n-1].iter().map(|f| direction_vectors(f, &topo).unwrap()).collect();
        let ext = motion_to_params(&d1, &dn, &dirs);
        let (o1, on) = model.boundary_params(&b);
        // target lat/lon per interior frame
        let targets: Vec<Vec<f64>> = ext.trajectory.frames.iter().map(|fr| {
            let mut v = vec![0.0; 2 * bones];
            for (bi, p) in fr.iter().enumerate() { v[bi] = p.latitude; v[bones + bi] = p.longitude; }
            v
        }).collect();
        windows.push((o1, on, targets));
    }

    for step in 0..1500 {
        let mut g = Graph::new();
        let bound = store.bind(&mut g);
        let mut losses = Vec::new();
        for wi in 0..4 {
            let (o1, on, targets) = &windows[(step * 4 + wi) % windows.len()];
            let outs = model.rollout_graph_probe(&mut g, &bound, "fwd", o1, on, n - 2).unwrap();
            for (i, &o) in outs.iter().enumerate() {
                let latlon = g.slice(o, 0, 2 * bones).unwrap();
                let tgt = g.input(stylemotion::Tensor64::vector(targets[i].clone()));
                losses.push(g.mse(latlon, tgt).unwrap());
            }
        }
        let sum = g.sum_values(&losses).unwrap();
        let loss = g.scale(sum, 1.0 / losses.len() as f64);
        if step % 250 == 0 { println!("step {step}: o-space mse {:.5}", g.item(loss)); }
        let grads = g.backward(loss).unwrap();
        store.absorb_grads(&bound, &grads);
        store.adam_step(&adam).unwrap();
    }
    // Inspect learned lambda ramp at frames 2, 20, 39.
    let (o1, on, targets) = &windows[0];
    let mut g = Graph::new();
    let bound = store.bind(&mut g);
    let outs = model.rollout_graph_probe(&mut g, &bound, "fwd", o1, on, n - 2).unwrap();
    for (label, i) in [("frame2", 0usize), ("frame20", 18), ("frame39", 37)] {
        let got = g.value(outs[i]).data()[bones..2 * bones].to_vec();
        let want = &targets[i][bones..2 * bones];
        println!("{label}: lon got {:.3?} want {:.3?}", &got[..3], &want[..3]);
    }
}
