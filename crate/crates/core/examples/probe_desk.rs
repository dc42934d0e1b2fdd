use rand::rngs::StdRng;
use rand::SeedableRng;
use stylemotion::dataset::*;
use stylemotion::geom::*;
use stylemotion::longrange::{self, TransitionConfig, TransitionModel};
use stylemotion::nn::AdamConfig;
use stylemotion::pipeline::*;
use stylemotion::refsearch::*;
use stylemotion::shortrange::{self, ShortRangeConfig, ShortRangeModel, mean_square_diff};

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 8, frames: 300, styles: 2, seed: 7 });
    let seqs: Vec<MotionSequence<f64>> = named.into_iter().map(|(_, s)| s).collect();
    let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
    let ds = split(clips, 0.25, 7);
    println!("train {} heldout {}", ds.train.len(), ds.heldout.len());
    let mut dists: Vec<f64> = ds.train.iter().map(|c| c.travel_distance).collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("distances: {:?}", dists.iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>());
    let gaps: Vec<f64> = dists.windows(2).map(|w| w[1] - w[0]).collect();
    let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    println!("max gap {max_gap:.3} (widening covers 0.4)");

    // Plan feasibility at various seeds, L=3.
    let index = build_index(&ds.train).unwrap();
    let s1 = ds.heldout[0].seq.frames[0].positions[topo.root()];
    let e_clip = &ds.heldout[1];
    let s2 = e_clip.seq.frames[e_clip.len() - 1].positions[topo.root()];
    for seed in [7u64, 11, 13, 5, 3, 1, 2] {
        let mut rng = StdRng::seed_from_u64(seed);
        match sample_subgoals([s1[0], s1[2]], [s2[0], s2[2]], 3, &index, &mut rng) {
            Ok(plan) => {
                let mut ok = true;
                for &d in &plan.segment_dists {
                    let mut r2 = StdRng::seed_from_u64(seed + 100);
                    if match_clip_widening(d, &index, 0.05, &mut r2).is_err() { ok = false; }
                }
                println!("plan seed {seed}: segments {:?} matchable {ok}", plan.segment_dists.iter().map(|d| (d*100.0).round()/100.0).collect::<Vec<_>>());
            }
            Err(e) => println!("plan seed {seed}: {e}"),
        }
    }

    // Train long-range variants, measure foot-height ratios.
    let adam = AdamConfig::default();
    for (epochs, hidden) in [(50usize, 12usize), (150, 12), (150, 24)] {
        let mut rng = StdRng::seed_from_u64(7);
        let mut cfg = TransitionConfig::tiny(40);
        cfg.hidden = hidden;
        let mut long = TransitionModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
        let report = longrange::train(&mut long, &ds, &topo, epochs, &adam, &mut rng).unwrap();
        let s1 = ds.heldout[0].seq.frames[0].clone();
        let base = ds.heldout[1].seq.frames[119].clone();
        let root = topo.root();
        let mut line = format!("long epochs {epochs} hidden {hidden}: pos {:.4}->{:.4} ratios", report.epoch_pos_loss[0], report.epoch_pos_loss.last().unwrap());
        for angle in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let pivot = [base.positions[root][0], base.positions[root][2]];
            let s2 = rotate_state_about_vertical(&base, angle, pivot);
            let seq = longrange::interpolate(&long, &s1, &s2, 40, &topo).unwrap();
            let h = foot_height_curve(&seq, &topo);
            line += &format!(" {:.2}", max_over_median_jump(&h));
        }
        println!("{line}");
    }

    // Train short-range variants, measure style closeness.
    for (epochs, label) in [(50usize, "50ep"), (150, "150ep")] {
        let mut rng = StdRng::seed_from_u64(7);
        let mut model = ShortRangeModel::new(ShortRangeConfig::tiny(120), topo.joint_count(), 30.0, &mut rng);
        shortrange::train(&mut model, &ds, &topo, epochs, &adam, &mut rng).unwrap();
        let mut closer = 0;
        for i in 0..8 {
            let content = &ds.heldout[i];
            let style = &ds.train[(i * 3 + 1) % ds.train.len()];
            let out = model.transfer_style(content, style, &topo).unwrap();
            let f_out = model.encode_style(&out, &topo).unwrap();
            let f_style = model.encode_style(style, &topo).unwrap();
            let f_content = model.encode_style(content, &topo).unwrap();
            if mean_square_diff(&f_out, &f_style) < mean_square_diff(&f_out, &f_content) { closer += 1; }
        }
        println!("short {label}: closer {closer}/8");
    }
}
