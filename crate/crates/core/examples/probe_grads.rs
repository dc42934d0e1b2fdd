use rand::rngs::StdRng;
use rand::SeedableRng;
use stylemotion::dataset::*;
use stylemotion::longrange::{self, TransitionBoundary, TransitionConfig, TransitionModel};
use stylemotion::nn::Graph;

fn main() {
    let (topo, named) = synth_dataset::<f64>(SynthSpec { walkers: 2, frames: 60, styles: 1, seed: 7 });
    let seq = named[0].1.clone();
    let mut rng = StdRng::seed_from_u64(7);
    let model = TransitionModel::new(TransitionConfig::tiny(40), topo.joint_count(), 30.0, &mut rng);
    let boundary = TransitionBoundary::from_window(&seq.frames[0..40], &topo, 30.0).unwrap();

    let mut g = Graph::new();
    let bound = model.gen_store.bind(&mut g);
    let loss = longrange::supervised_loss_graph(&model, &mut g, &bound, &boundary, &topo).unwrap();
    println!("loss {}", g.item(loss));
    let grads = g.backward(loss).unwrap();
    for name in model.gen_store.names() {
        let v = bound.value(name);
        let norm = grads.get(v).map(|gr| gr.iter().map(|x| x * x).sum::<f64>().sqrt());
        println!("{name}: grad norm {:?}", norm.map(|n| format!("{n:.3e}")));
    }
}
