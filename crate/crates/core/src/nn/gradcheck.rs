//! Central finite-difference verification of analytic gradients.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::nn::graph::{BoundParams, Graph, Value};
use crate::nn::optim::ParamStore;
use crate::nn::NnError;
use crate::scalar::Scalar;

/// Coordinates probed per tensor; larger tensors are subsampled down to this.
pub const COORDS_PER_TENSOR: usize = 32;

/// Compare analytic gradients of `loss_fn` against central finite
/// differences and return the worst relative error
/// `|g_a - g_n| / max(1e-8, |g_a| + |g_n|)`.
///
/// `loss_fn` must be a deterministic function of the store contents: it is
/// re-evaluated many times at perturbed parameters. Tensors larger than
/// [`COORDS_PER_TENSOR`] are probed at a seeded random subset of coordinates.
pub fn grad_check<S, F>(
    store: &mut ParamStore<S>,
    h: S,
    seed: u64,
    loss_fn: F,
) -> Result<S, NnError>
where
    S: Scalar,
    F: Fn(&mut Graph<S>, &BoundParams) -> Result<Value, NnError>,
{
    let mut g = Graph::new();
    let bound = store.bind(&mut g);
    let loss = loss_fn(&mut g, &bound)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<(String, Vec<S>)> = bound
        .values
        .iter()
        .map(|(name, value)| {
            let len = g.value(*value).len();
            let ga = grads
                .get(*value)
                .map(|s| s.to_vec())
                .unwrap_or_else(|| vec![S::zero(); len]);
            (name.clone(), ga)
        })
        .collect();
    drop(g);

    let eval = |store: &ParamStore<S>| -> Result<S, NnError> {
        let mut g = Graph::new();
        let bound = store.bind(&mut g);
        let loss = loss_fn(&mut g, &bound)?;
        Ok(g.item(loss))
    };

    let mut rng = StdRng::seed_from_u64(seed);
    let floor = S::of(1e-8);
    let two = S::of(2.0);
    let mut worst = S::zero();
    for (name, ga) in &analytic {
        let len = ga.len();
        let coords: Vec<usize> = if len <= COORDS_PER_TENSOR {
            (0..len).collect()
        } else {
            // Deterministic distinct subsample.
            let mut picked = std::collections::BTreeSet::new();
            while picked.len() < COORDS_PER_TENSOR {
                picked.insert(rng.random_range(0..len));
            }
            picked.into_iter().collect()
        };
        for i in coords {
            let original = store.get(name).unwrap().data()[i];
            store.get_mut(name).unwrap().data_mut()[i] = original + h;
            let plus = eval(store)?;
            store.get_mut(name).unwrap().data_mut()[i] = original - h;
            let minus = eval(store)?;
            store.get_mut(name).unwrap().data_mut()[i] = original;
            let numeric = (plus - minus) / (two * h);
            let denom = floor.max(ga[i].abs() + numeric.abs());
            let rel = (ga[i] - numeric).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}
