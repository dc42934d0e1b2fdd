//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measurements. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines).
//!
//! The desk-scale trained artifacts (criteria 6-8 and the behavioral
//! desk_* checks) are built once and shared through a `OnceLock`.

use std::rc::Rc;
use std::sync::OnceLock;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use stylemotion::dataset::{
    split, synth_dataset, window_clips, DatasetSplit, MotionClip, SynthSpec,
};
use stylemotion::geom::{
    direction_vectors, forward_kinematics, rotate_about_vertical, rotate_state_about_vertical,
    translate, DirectionFrame, MotionSequence, MotionState, SkeletonTopology,
};
use stylemotion::longrange::{
    self, interpolate, lsgan_discriminator_loss, lsgan_generator_loss, position_mse_curve,
    supervised_loss_graph, TransitionBoundary, TransitionConfig, TransitionModel,
};
use stylemotion::nn::{grad_check, AdamConfig, ParamStore, Tensor};
use stylemotion::pipeline::{
    expected_length, foot_height_curve, generate, max_over_median_jump, ClipDatabase,
    GenerationConfig, Models, SpanKind, StylePolicy,
};
use stylemotion::refsearch::{match_clip, sample_subgoals, ClipIndex, SearchError};
use stylemotion::shortrange::{
    clip_channels, diversity, loss_total, mean_square_diff, time_gram, training_loss_graph,
    LossComponents, Normalization, ShortRangeConfig, ShortRangeModel,
};
use stylemotion::slerp::{
    make_basis, recover_params, synthesize_direction, BoneBasis, SlerpParams,
};

// ---------------------------------------------------------------------------
// Shared random-geometry helpers (independent of library internals).
// ---------------------------------------------------------------------------

fn random_unit(rng: &mut StdRng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn random_topology(rng: &mut StdRng, joints: usize) -> SkeletonTopology<f64> {
    let mut parent = vec![None];
    let mut bone = vec![0.0];
    for j in 1..joints {
        parent.push(Some(rng.random_range(0..j)));
        bone.push(rng.random_range(0.1..2.0));
    }
    SkeletonTopology::new(parent, bone).unwrap()
}

fn random_state(rng: &mut StdRng, topo: &SkeletonTopology<f64>) -> MotionState<f64> {
    let dirs = (0..topo.rows()).map(|_| random_unit(rng)).collect();
    let root = [
        rng.random_range(-3.0..3.0),
        rng.random_range(0.0..2.0),
        rng.random_range(-3.0..3.0),
    ];
    forward_kinematics(
        &DirectionFrame {
            dirs,
            root_position: root,
        },
        topo,
    )
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

// ---------------------------------------------------------------------------
// Criterion 1: geometry.
// ---------------------------------------------------------------------------

#[test]
fn c1_geometry_suite() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(101);
    let mut worst_identity = 0.0f64;
    let mut worst_bone = 0.0f64;
    let mut worst_rigid = 0.0f64;
    for case in 0..10_000 {
        let joints = rng.random_range(2..12);
        let topo = random_topology(&mut rng, joints);
        let state = random_state(&mut rng, &topo);

        // Round trip through direction vectors and FK.
        let frame = direction_vectors(&state, &topo).unwrap();
        let rebuilt = forward_kinematics(&frame, &topo);
        for (a, b) in state.positions.iter().zip(&rebuilt.positions) {
            worst_identity = worst_identity.max(dist3(*a, *b));
        }
        worst_bone = worst_bone.max(rebuilt.max_bone_deviation(&topo));
        for d in &frame.dirs {
            worst_identity =
                worst_identity.max(((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - 1.0).abs());
        }

        // Rigid transforms preserve pairwise distances.
        if case % 10 == 0 {
            let seq = MotionSequence::new(vec![state.clone()], 30.0).unwrap();
            let angle = rng.random_range(-3.0..3.0);
            let pivot = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let offset = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ];
            let moved = translate(&rotate_about_vertical(&seq, angle, pivot), offset);
            let a = &seq.frames[0].positions;
            let b = &moved.frames[0].positions;
            for i in 0..a.len() {
                for j in (i + 1)..a.len() {
                    worst_rigid =
                        worst_rigid.max((dist3(a[i], a[j]) - dist3(b[i], b[j])).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst_identity < 1e-9, "identity error {worst_identity}");
    assert!(worst_bone < 1e-9, "bone error {worst_bone}");
    assert!(worst_rigid < 1e-9, "rigidity error {worst_rigid}");
    assert!(elapsed < 10.0, "geometry suite took {elapsed:.1}s");
    println!(
        "acceptance 1 (geometry): PASS - identity {worst_identity:.2e}, bones {worst_bone:.2e}, rigidity {worst_rigid:.2e}, {elapsed:.2}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: the two-slerp parameterization.
// ---------------------------------------------------------------------------

/// Independent single-arc slerp oracle: rotate `v1` toward `vn` about the
/// plane normal with the Rodrigues formula.
fn rodrigues_slerp(v1: [f64; 3], vn: [f64; 3], t: f64) -> [f64; 3] {
    let cross = [
        v1[1] * vn[2] - v1[2] * vn[1],
        v1[2] * vn[0] - v1[0] * vn[2],
        v1[0] * vn[1] - v1[1] * vn[0],
    ];
    let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let axis = [cross[0] / cn, cross[1] / cn, cross[2] / cn];
    let dot = v1[0] * vn[0] + v1[1] * vn[1] + v1[2] * vn[2];
    let angle = t * cn.atan2(dot);
    let (s, c) = angle.sin_cos();
    let ax_cross_v = [
        axis[1] * v1[2] - axis[2] * v1[1],
        axis[2] * v1[0] - axis[0] * v1[2],
        axis[0] * v1[1] - axis[1] * v1[0],
    ];
    let ad = axis[0] * v1[0] + axis[1] * v1[1] + axis[2] * v1[2];
    [
        v1[0] * c + ax_cross_v[0] * s + axis[0] * ad * (1.0 - c),
        v1[1] * c + ax_cross_v[1] * s + axis[1] * ad * (1.0 - c),
        v1[2] * c + ax_cross_v[2] * s + axis[2] * ad * (1.0 - c),
    ]
}

#[test]
fn c2_parameterization_suite() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(102);
    let mut bases = Vec::new();
    while bases.len() < 1000 {
        if let Ok(b) = make_basis::<f64>(random_unit(&mut rng), random_unit(&mut rng)) {
            if b.angle > 0.05 && b.angle < std::f64::consts::PI - 0.05 {
                bases.push(b);
            }
        }
    }

    // Unit norm over 1e5 random parameter draws.
    let mut worst_unit = 0.0f64;
    for i in 0..100_000 {
        let b = &bases[i % bases.len()];
        let p = SlerpParams::new(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        let v = synthesize_direction(b, p);
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        worst_unit = worst_unit.max((n - 1.0).abs());
    }
    assert!(worst_unit < 1e-9, "unit-norm error {worst_unit}");

    // Boundary cases.
    let mut worst_boundary = 0.0f64;
    for b in &bases {
        for (p, want) in [
            (SlerpParams::new(0.0, 0.0), b.start),
            (SlerpParams::new(0.0, 1.0), b.end),
            (SlerpParams::new(1.0, 0.31), b.normal),
            (
                SlerpParams::new(-1.0, 0.77),
                [-b.normal[0], -b.normal[1], -b.normal[2]],
            ),
        ] {
            let v = synthesize_direction(b, p);
            worst_boundary = worst_boundary.max(dist3(v, want));
        }
    }
    assert!(worst_boundary < 1e-9, "boundary error {worst_boundary}");

    // Latitude zero against the independent slerp oracle.
    let mut worst_slerp = 0.0f64;
    for b in &bases {
        for _ in 0..20 {
            let t = rng.random_range(0.0..1.0);
            let ours = synthesize_direction(b, SlerpParams::new(0.0, t));
            let oracle = rodrigues_slerp(b.start, b.end, t);
            worst_slerp = worst_slerp.max(dist3(ours, oracle));
        }
    }
    assert!(worst_slerp < 1e-9, "slerp oracle error {worst_slerp}");

    // Round trip over the stated domain.
    let mut worst_rt = 0.0f64;
    for b in &bases {
        for _ in 0..20 {
            let p = SlerpParams::new(rng.random_range(-0.9..0.9), rng.random_range(0.0..1.0));
            let v = synthesize_direction(b, p);
            let q = recover_params(b, v);
            let w = synthesize_direction(b, q);
            worst_rt = worst_rt.max(dist3(v, w));
        }
    }
    assert!(worst_rt < 1e-6, "round-trip error {worst_rt}");

    // Degenerate fallbacks stay finite.
    for (a, b) in [
        ([0.0, 1.0, 0.0], [0.0, 1.0, 0.0]),
        ([0.0, 1.0, 0.0], [0.0, -1.0, 0.0]),
        ([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]),
    ] {
        let basis = BoneBasis::<f64>::between(a, b);
        assert!(basis.is_degenerate());
        for i in 0..=20 {
            let lam = i as f64 / 20.0;
            let v = basis.direction(SlerpParams::new(0.4, lam));
            assert!(v.iter().all(|c| c.is_finite()), "non-finite fallback");
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "parameterization suite took {elapsed:.1}s");
    println!(
        "acceptance 2 (two-slerp parameterization): PASS - unit {worst_unit:.2e}, boundary {worst_boundary:.2e}, slerp {worst_slerp:.2e}, round-trip {worst_rt:.2e}, {elapsed:.2}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: differentiation.
// ---------------------------------------------------------------------------

/// Five-joint skeleton with declared feet for the model-level checks.
fn five_joint_topo() -> SkeletonTopology<f64> {
    SkeletonTopology::new(
        vec![None, Some(0), Some(1), Some(0), Some(3)],
        vec![0.0, 0.6, 0.4, 0.5, 0.7],
    )
    .unwrap()
    .with_feet(2, 4)
    .unwrap()
}

fn random_clip(rng: &mut StdRng, topo: &SkeletonTopology<f64>, frames: usize) -> MotionClip<f64> {
    let states: Vec<MotionState<f64>> = (0..frames)
        .map(|t| {
            let dirs = (0..topo.rows()).map(|_| random_unit(rng)).collect();
            forward_kinematics(
                &DirectionFrame {
                    dirs,
                    root_position: [0.05 * t as f64, 0.9, 0.02 * t as f64],
                },
                topo,
            )
        })
        .collect();
    MotionClip::from_sequence(MotionSequence::new(states, 30.0).unwrap(), topo).unwrap()
}

#[test]
fn c3_differentiation_suite() {
    let start = Instant::now();

    // Every primitive in one graph.
    let mut rng = StdRng::seed_from_u64(103);
    let rt = |rng: &mut StdRng, shape: Vec<usize>| {
        let len = shape.iter().product();
        Tensor::new(
            shape,
            (0..len)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>(),
        )
        .unwrap()
    };
    let chain = Rc::new(
        SkeletonTopology::new(
            vec![None, Some(0), Some(1), Some(0)],
            vec![0.0, 0.8, 0.5, 1.1],
        )
        .unwrap(),
    );
    let mut store = ParamStore::new();
    for (name, shape) in [
        ("x", vec![2usize, 6]),
        ("w", vec![3, 2, 3]),
        ("b", vec![3]),
        ("hc", vec![3]),
        ("bw", vec![3, 2, 4]),
        ("hs", vec![4]),
        ("mat", vec![4, 3]),
        ("vecv", vec![4]),
        ("dirs", vec![3, 3]),
        ("root", vec![3]),
        ("seq", vec![9]),
        ("hcm", vec![3, 5]),
        ("hsm", vec![4, 5]),
    ] {
        store.insert(name, rt(&mut rng, shape)).unwrap();
    }
    let primitive_err = grad_check(&mut store, 1e-5, 31, |g, p| {
        let conv = g.conv1d(p.value("x"), p.value("w"), p.value("b"))?;
        let t1 = g.tanh(conv);
        let t2 = g.leaky_relu(t1, 0.2);
        let bil = g.bilinear(p.value("hc"), p.value("bw"), p.value("hs"))?;
        let bs = g.bilinear_seq(p.value("hcm"), p.value("bw"), p.value("hsm"))?;
        let sg = g.sigmoid(bil);
        let mv = g.matvec(p.value("mat"), p.value("hc"))?;
        let tr = g.transpose(p.value("mat"))?;
        let gm = g.gram(tr)?;
        let rs = g.row_scale(p.value("mat"), p.value("vecv"))?;
        let rn = g.row_normalize(p.value("dirs"), 1e-12)?;
        let fk = g.fk(rn, p.value("root"), &chain)?;
        let sl = g.slice(p.value("seq"), 2, 4)?;
        let sn = g.sin(sl);
        let cs = g.cos(sl);
        let trig = g.mul(sn, cs)?;
        let col = g.col(p.value("mat"), 1)?;
        let cat = g.concat(&[trig, sg, mv, col])?;
        let rsl = g.row_slice(p.value("mat"), 1, 2)?;
        let rcc = g.row_concat(&[rsl, rsl])?;
        let resh = g.reshape(fk, vec![12])?;
        let sub = g.sub(resh, resh)?;
        let pieces = [
            g.mean_all(cat),
            g.mean_all(gm),
            g.mean_all(rs),
            g.mean_all(resh),
            g.mean_all(t2),
            g.mean_all(bs),
            g.mean_all(rcc),
            g.sum_all(sub),
        ];
        let tot = g.sum_values(&pieces)?;
        let sq = g.mul(tot, tot)?;
        Ok(g.sum_all(sq))
    })
    .unwrap();
    assert!(primitive_err < 1e-4, "primitive error {primitive_err}");

    // Short-range model graph at the stated dimensions: learned content 6,
    // style 4, fused 8, M = 16, J = 5.
    let topo5 = five_joint_topo();
    let mut rng = StdRng::seed_from_u64(104);
    let mut short = ShortRangeModel::new(ShortRangeConfig::tiny(16), 5, 30.0, &mut rng);
    assert_eq!(short.cfg.content_channels, 6);
    assert_eq!(short.cfg.style_channels, 4);
    assert_eq!(short.cfg.fused_channels, 8);
    let clip_m = random_clip(&mut rng, &topo5, 16);
    let clip_n = random_clip(&mut rng, &topo5, 16);
    let mats = [
        clip_channels(&clip_m, &topo5),
        clip_channels(&clip_n, &topo5),
    ];
    short.norm = Normalization::fit(&mats);
    let x_m = short.norm.normalize(&mats[0]);
    let x_n = short.norm.normalize(&mats[1]);
    let short_ref = short.clone();
    let mut short_store = short.store.clone();
    let short_err = grad_check(&mut short_store, 1e-5, 32, move |g, p| {
        training_loss_graph(&short_ref, g, p, &x_m, &x_n, (2, 13))
    })
    .unwrap();
    assert!(short_err < 1e-4, "short-range error {short_err}");

    // Long-range generator graph at N = 8, J = 5.
    let mut rng = StdRng::seed_from_u64(105);
    let long = TransitionModel::new(TransitionConfig::tiny(8), 5, 30.0, &mut rng);
    let window = random_clip(&mut rng, &topo5, 8);
    let boundary = TransitionBoundary::from_window(&window.seq.frames, &topo5, 30.0).unwrap();
    let long_ref = long.clone();
    let topo_ref = topo5.clone();
    let mut long_store = long.gen_store.clone();
    let long_err = grad_check(&mut long_store, 1e-5, 33, move |g, p| {
        supervised_loss_graph(&long_ref, g, p, &boundary, &topo_ref)
            .map_err(|e| stylemotion::nn::NnError::Checkpoint(e.to_string()))
    })
    .unwrap();
    assert!(long_err < 1e-4, "long-range error {long_err}");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "differentiation suite took {elapsed:.1}s");
    println!(
        "acceptance 3 (differentiation): PASS - primitives {primitive_err:.2e}, short-range {short_err:.2e}, long-range {long_err:.2e}, {elapsed:.1}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: loss formulas.
// ---------------------------------------------------------------------------

fn random_orthogonal(n: usize, rng: &mut StdRng) -> Vec<f64> {
    loop {
        let mut q = vec![0.0; n * n];
        for v in &mut q {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut ok = true;
        for r in 0..n {
            for prev in 0..r {
                let mut dot = 0.0;
                for c in 0..n {
                    dot += q[r * n + c] * q[prev * n + c];
                }
                for c in 0..n {
                    q[r * n + c] -= dot * q[prev * n + c];
                }
            }
            let norm: f64 = (0..n).map(|c| q[r * n + c] * q[r * n + c]).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for c in 0..n {
                q[r * n + c] /= norm;
            }
        }
        if ok {
            return q;
        }
    }
}

#[test]
fn c4_loss_formula_suite() {
    // Combined short-range objective on a unit fixture.
    let ones = LossComponents::<f64> {
        rec: 1.0,
        cst: 1.0,
        rte: 1.0,
        trn: 1.0,
    };
    assert!((loss_total(&ones) - 2.51).abs() < 1e-12);

    // Position loss on a fixed 3-element fixture: one joint, three frames.
    let gt: Vec<MotionState<f64>> = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]
        .iter()
        .map(|&p| MotionState::new(vec![p]))
        .collect();
    let pred: Vec<MotionState<f64>> = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 2.0]]
        .iter()
        .map(|&p| MotionState::new(vec![p]))
        .collect();
    // Squared residuals 1 and 4 over nine coordinates.
    assert!((longrange::loss_position(&gt, &pred) - 5.0 / 9.0).abs() < 1e-15);

    // Least-squares adversarial fixtures, exact.
    assert_eq!(lsgan_discriminator_loss(1.0f64, 0.0), 0.0);
    assert_eq!(lsgan_generator_loss(0.0f64), 1.0);
    assert_eq!(lsgan_discriminator_loss(0.5f64, 0.5), 0.25);
    assert_eq!(lsgan_generator_loss(0.5f64), 0.25);
    assert_eq!(lsgan_generator_loss(1.0f64), 0.0);

    // Gram-statistics term is invariant under orthogonal channel rotation.
    let mut rng = StdRng::seed_from_u64(106);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (c, m) = (4, 6);
        let x = Tensor::new(
            vec![c, m],
            (0..c * m)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>(),
        )
        .unwrap();
        let q = random_orthogonal(c, &mut rng);
        let mut rotated = vec![0.0; c * m];
        for t in 0..m {
            for r in 0..c {
                let mut acc = 0.0;
                for k in 0..c {
                    acc += q[r * c + k] * x.at2(k, t);
                }
                rotated[r * m + t] = acc;
            }
        }
        let xr = Tensor::new(vec![c, m], rotated).unwrap();
        worst = worst.max(mean_square_diff(&time_gram(&x), &time_gram(&xr)));
    }
    assert!(worst < 1e-9, "gram invariance error {worst}");
    println!(
        "acceptance 4 (loss formulas): PASS - combined 2.51, position 5/9, lsgan fixtures exact, gram invariance {worst:.2e}"
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: reference search.
// ---------------------------------------------------------------------------

#[test]
fn c5_reference_search_suite() {
    let index = ClipIndex::<f64> {
        entries: vec![(0, 1.0), (1, 1.4), (2, 2.0), (3, 2.7), (4, 3.1)],
        d_min: 1.0,
        d_max: 3.1,
    };

    // 10 000 plans: every segment length inside the index range.
    let mut rng = StdRng::seed_from_u64(107);
    let mut plans = 0usize;
    while plans < 10_000 {
        let l = rng.random_range(1..6);
        let ex = rng.random_range(-8.0..8.0);
        let ez = rng.random_range(-8.0..8.0);
        match sample_subgoals([0.0, 0.0], [ex, ez], l, &index, &mut rng) {
            Ok(plan) => {
                for &d in &plan.segment_dists {
                    assert!(
                        (index.d_min..=index.d_max).contains(&d),
                        "segment length {d} out of range"
                    );
                }
                plans += 1;
            }
            Err(SearchError::PlanInfeasible) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    // Band semantics, including the exact-boundary exclusion.
    let mut rng = StdRng::seed_from_u64(108);
    for _ in 0..100 {
        assert_eq!(match_clip(2.03, &index, 0.05, &mut rng).unwrap(), 2);
    }
    assert!(matches!(
        match_clip(2.0, &index, 0.05, &mut rng),
        Err(SearchError::NoMatch { .. })
    ));

    // Seed determinism, bit-exact.
    let plan = |seed: u64| {
        let mut rng = StdRng::seed_from_u64(seed);
        sample_subgoals([0.0, 0.0], [6.0, 1.0], 4, &index, &mut rng).unwrap()
    };
    assert_eq!(plan(9), plan(9));
    println!("acceptance 5 (reference search): PASS - 10000 plans in range, band exclusion, determinism");
}

// ---------------------------------------------------------------------------
// Criteria 6-8 share one desk-scale training run.
// ---------------------------------------------------------------------------

struct Trained {
    topo: SkeletonTopology<f64>,
    ds: DatasetSplit<f64>,
    short: ShortRangeModel<f64>,
    short_ablated: ShortRangeModel<f64>,
    long: TransitionModel<f64>,
    short_curve: Vec<f64>,
    long_curve: Vec<f64>,
    short_secs: f64,
    long_secs: f64,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let (topo, named) = synth_dataset::<f64>(SynthSpec {
            walkers: 8,
            frames: 300,
            styles: 2,
            seed: 7,
        });
        let seqs: Vec<MotionSequence<f64>> = named.into_iter().map(|(_, s)| s).collect();
        let clips = window_clips(&seqs, &topo, 120, 60).unwrap().clips;
        let ds = split(clips, 0.25, 7);
        assert_eq!(ds.heldout.len(), 16);
        let adam = AdamConfig::default();

        let train_short = |cst_weight: f64| {
            let mut rng = StdRng::seed_from_u64(7);
            let mut cfg = ShortRangeConfig::tiny(120);
            cfg.weights.cst = cst_weight;
            let mut model = ShortRangeModel::new(cfg, topo.joint_count(), 30.0, &mut rng);
            let t0 = Instant::now();
            let report =
                stylemotion::shortrange::train(&mut model, &ds, &topo, 50, &adam, &mut rng)
                    .unwrap();
            (model, report.epoch_loss, t0.elapsed().as_secs_f64())
        };
        let (short, short_curve, short_secs) = train_short(0.01);
        let (short_ablated, _, _) = train_short(0.0);

        let mut rng = StdRng::seed_from_u64(7);
        let mut long = TransitionModel::new(
            TransitionConfig::tiny(40),
            topo.joint_count(),
            30.0,
            &mut rng,
        );
        let t0 = Instant::now();
        let long_report =
            stylemotion::longrange::train(&mut long, &ds, &topo, 50, &adam, &mut rng).unwrap();
        let long_secs = t0.elapsed().as_secs_f64();

        Trained {
            topo,
            ds,
            short,
            short_ablated,
            long,
            short_curve,
            long_curve: long_report.epoch_pos_loss,
            short_secs,
            long_secs,
        }
    })
}

#[test]
fn c6_desk_scale_training_baselines() {
    let t = trained();
    let s0 = t.short_curve[0];
    let s49 = *t.short_curve.last().unwrap();
    assert!(
        s49 <= 0.7 * s0,
        "short-range loss fell only {s0} -> {s49}"
    );
    let l0 = t.long_curve[0];
    let l49 = *t.long_curve.last().unwrap();
    assert!(l49 <= 0.7 * l0, "long-range loss fell only {l0} -> {l49}");
    assert!(t.short_secs < 900.0, "short-range run took {:.0}s", t.short_secs);
    assert!(t.long_secs < 900.0, "long-range run took {:.0}s", t.long_secs);

    // Style-consistency ablation: with the consistency loss active, the
    // restyled outputs carry flatter style features than the ablated twin's.
    let mut with_cst = 0.0;
    let mut without_cst = 0.0;
    for (i, clip) in t.ds.heldout.iter().enumerate() {
        let style_src = &t.ds.train[i % t.ds.train.len()];
        let out_a = t.short.transfer_style(clip, style_src, &t.topo).unwrap();
        with_cst += t.short.style_temporal_std(&out_a, &t.topo).unwrap();
        let out_b = t
            .short_ablated
            .transfer_style(clip, style_src, &t.topo)
            .unwrap();
        without_cst += t.short_ablated.style_temporal_std(&out_b, &t.topo).unwrap();
    }
    with_cst /= t.ds.heldout.len() as f64;
    without_cst /= t.ds.heldout.len() as f64;
    assert!(
        with_cst < without_cst,
        "style std with consistency loss {with_cst} not below ablated {without_cst}"
    );
    println!(
        "acceptance 6 (desk-scale training): PASS - short {s0:.3}->{s49:.3} in {:.0}s, long {l0:.4}->{l49:.4} in {:.0}s, style std {with_cst:.4} < {without_cst:.4}",
        t.short_secs, t.long_secs
    );
}

#[test]
fn c7_end_to_end_generation() {
    let t = trained();
    let db = ClipDatabase::new(
        t.topo.clone(),
        t.ds.train.iter().cloned().collect(),
    )
    .unwrap();
    let models = Models {
        short: t.short.clone(),
        long: t.long.clone(),
    };
    let start_state = t.ds.heldout[0].seq.frames[0].clone();
    let end_clip = &t.ds.heldout[1];
    let end_state = end_clip.seq.frames[end_clip.len() - 1].clone();
    let cfg = GenerationConfig {
        num_segments: 3,
        transition_len: 40,
        sigma: 0.05,
        plan_seed: 7,
        style_seed: 11,
        style_policy: StylePolicy::Random,
    };
    let t0 = Instant::now();
    let a = generate(&cfg, &start_state, &end_state, &db, &models).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    assert_eq!(a.sequence.len(), expected_length(3, 120, 40));
    assert_eq!(a.sequence.len(), 2 + 3 * 120 + 4 * 38);
    let mut worst_bone = 0.0f64;
    for f in &a.sequence.frames {
        worst_bone = worst_bone.max(f.max_bone_deviation(&t.topo));
    }
    assert!(worst_bone < 1e-9, "bone deviation {worst_bone}");

    // Junction frames appear exactly once, owned by the neighbouring spans,
    // and are bit-equal to the states the transitions were conditioned on.
    let mut junction = 0usize;
    for (i, span) in a.spans.iter().enumerate() {
        if let SpanKind::Transition { .. } = span.kind {
            let before = &a.sequence.frames[span.start_frame - 1];
            let after = &a.sequence.frames[span.start_frame + span.frames];
            assert_eq!(before, &a.junctions[junction].0, "junction {i} start");
            assert_eq!(after, &a.junctions[junction].1, "junction {i} end");
            junction += 1;
        }
    }
    assert_eq!(junction, 4);

    // Byte-identical across reruns with the same seeds.
    let b = generate(&cfg, &start_state, &end_state, &db, &models).unwrap();
    assert_eq!(
        stylemotion::geom::format_motion(&a.sequence),
        stylemotion::geom::format_motion(&b.sequence)
    );
    assert!(elapsed < 60.0, "generation took {elapsed:.1}s");
    println!(
        "acceptance 7 (end to end): PASS - {} frames, bones {worst_bone:.2e}, byte-identical rerun, {elapsed:.2}s",
        a.sequence.len()
    );
}

#[test]
fn c8_metric_suite() {
    let t = trained();

    // Diversity of identical clips is exactly zero.
    let clip = t.ds.heldout[0].clone();
    assert_eq!(diversity(&[clip.clone(), clip.clone(), clip]), 0.0);

    // A perfect oracle has a zero MSE curve everywhere.
    let gt: Vec<Vec<MotionState<f64>>> = t.ds.heldout[..4]
        .iter()
        .map(|c| c.seq.frames[1..39].to_vec())
        .collect();
    let curve = position_mse_curve(&gt, &gt.clone());
    assert_eq!(curve.len(), 38);
    assert!(curve.iter().all(|&v| v == 0.0));

    // Foot-height curves stay continuous across endpoint rotations.
    let s1 = t.ds.heldout[0].seq.frames[0].clone();
    let base = t.ds.heldout[1].seq.frames[119].clone();
    let root = t.topo.root();
    let mut ratios = Vec::new();
    for angle in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
        let pivot = [base.positions[root][0], base.positions[root][2]];
        let s2 = rotate_state_about_vertical(&base, angle, pivot);
        let seq = interpolate(&t.long, &s1, &s2, 40, &t.topo).unwrap();
        let heights = foot_height_curve(&seq, &t.topo);
        let ratio = max_over_median_jump(&heights);
        assert!(
            ratio < 5.0,
            "foot-height max/median jump {ratio} at rotation {angle}"
        );
        ratios.push(ratio);
    }
    println!(
        "acceptance 8 (metrics): PASS - zero diversity/MSE fixtures, foot-height jump ratios {:.2} {:.2} {:.2}",
        ratios[0], ratios[1], ratios[2]
    );
}

// ---------------------------------------------------------------------------
// Desk-scale behavioral checks sharing the trained artifacts.
// ---------------------------------------------------------------------------

#[test]
fn desk_discriminator_separates_real_from_fake() {
    let t = trained();
    // Fresh fakes from cross-boundary transitions of held-out states.
    let mut real = Vec::new();
    let mut fake = Vec::new();
    let win = t.long.cfg.disc_window;
    for (i, clip) in t.ds.heldout.iter().take(8).enumerate() {
        let dirs: Vec<DirectionFrame<f64>> = clip
            .seq
            .frames
            .iter()
            .map(|f| direction_vectors(f, &t.topo).unwrap())
            .collect();
        real.push(dirs[10..10 + win].to_vec());
        let other = &t.ds.heldout[(i + 3) % t.ds.heldout.len()];
        let seq = interpolate(
            &t.long,
            &clip.seq.frames[0],
            &other.seq.frames[other.len() - 1],
            40,
            &t.topo,
        )
        .unwrap();
        let fdirs: Vec<DirectionFrame<f64>> = seq.frames[1..39]
            .iter()
            .map(|f| direction_vectors(f, &t.topo).unwrap())
            .collect();
        fake.push(fdirs[12..12 + win].to_vec());
    }
    let acc = longrange::discriminator_accuracy(&t.long, &real, &fake).unwrap();
    assert!(acc > 0.5, "discriminator accuracy {acc}");
    println!("desk check (discriminator): PASS - accuracy {acc:.2}");
}

#[test]
fn desk_transfer_output_tracks_the_style_source() {
    let t = trained();
    // Restyled output's style features sit closer to the style source's
    // than to the content source's, averaged over held-out pairs.
    let mut closer = 0usize;
    let total = 8usize;
    for i in 0..total {
        let content = &t.ds.heldout[i];
        let style = &t.ds.train[(i * 3 + 1) % t.ds.train.len()];
        let out = t.short.transfer_style(content, style, &t.topo).unwrap();
        let f_out = t.short.encode_style(&out, &t.topo).unwrap();
        let f_style = t.short.encode_style(style, &t.topo).unwrap();
        let f_content = t.short.encode_style(content, &t.topo).unwrap();
        let to_style = mean_square_diff(&f_out, &f_style);
        let to_content = mean_square_diff(&f_out, &f_content);
        if to_style < to_content {
            closer += 1;
        }
    }
    assert!(
        closer * 2 > total,
        "style features closer to style source in only {closer}/{total} cases"
    );
    println!("desk check (style transfer): PASS - {closer}/{total} outputs closer to the style source");
}

#[test]
fn desk_style_seeds_increase_generation_diversity() {
    let t = trained();
    let db = ClipDatabase::new(t.topo.clone(), t.ds.train.clone()).unwrap();
    let models = Models {
        short: t.short.clone(),
        long: t.long.clone(),
    };
    let start_state = t.ds.heldout[2].seq.frames[0].clone();
    let end_clip = &t.ds.heldout[3];
    let end_state = end_clip.seq.frames[end_clip.len() - 1].clone();
    let base = GenerationConfig {
        num_segments: 1,
        transition_len: 40,
        sigma: 0.05,
        plan_seed: 5,
        style_seed: 0,
        style_policy: StylePolicy::Random,
    };
    let run = |style_seed: u64| {
        let cfg = GenerationConfig { style_seed, ..base.clone() };
        let result = generate(&cfg, &start_state, &end_state, &db, &models).unwrap();
        MotionClip::from_sequence(result.sequence, &t.topo).unwrap()
    };
    let varied: Vec<MotionClip<f64>> = (0..10).map(|s| run(100 + s)).collect();
    let repeated: Vec<MotionClip<f64>> = (0..10).map(|_| run(100)).collect();
    let d_varied = diversity(&varied);
    let d_repeated = diversity(&repeated);
    assert!(
        d_varied > d_repeated,
        "style-seed diversity {d_varied} not above fixed-seed {d_repeated}"
    );
    println!(
        "desk check (generation diversity): PASS - varied {d_varied:.4} > fixed {d_repeated:.4}"
    );
}
