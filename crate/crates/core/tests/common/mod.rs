//! Independent oracles shared by the `oracles` test target and the
//! acceptance binary. Every check returns `Ok(detail)` or `Err(detail)`.

#![allow(dead_code)]

use std::fmt::Debug;

use ndarray::{array, Array1, Array2, ArrayView1};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};

use sncn::data::{synthetic_source, SourceDataset, TaskData, TaskDef};
use sncn::harness::run_stream;
use sncn::inhibition::{apply_inhibition_vec, kwta_winners};
use sncn::metrics::{acc, bwt, cbwt, tbwt, GoldDiagonal};
use sncn::mlp::{mlp_backward, mlp_forward, mlp_loss, MlpParams, Pass};
use sncn::ncn::{
    apply_deltas, compute_deltas, compute_errors, correct_states, corrections, infer_states, normalized_step,
    predict_layers, total_discrepancy, update_weights, ErrorUnits, LayerEpisode,
};
use sncn::{
    Activation, Clamp, ContextStore, Hyperparams, InhibitionMode, LayerSpec, ModelParams, SeededRng, Sncn,
    TaskMatrix,
};

pub type Outcome = Result<String, String>;

pub const EXAMPLE_TOL: f64 = 1e-9;
pub const METRIC_TOL: f64 = 1e-12;
pub const GRADIENT_TOL: f64 = 1e-4;
pub const STEP_TOL: f64 = 1e-6;
pub const PROPERTY_CASES: u32 = 256;

pub fn all_ok(checks: &[(String, Outcome)]) -> bool {
    checks.iter().all(|(_, o)| o.is_ok())
}

pub fn failures(checks: &[(String, Outcome)]) -> String {
    checks
        .iter()
        .filter_map(|(name, o)| o.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect::<Vec<_>>()
        .join("; ")
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Outcome {
    if (got - want).abs() <= tol {
        Ok(format!("{got}"))
    } else {
        Err(format!("{name}: got {got}, want {want}"))
    }
}

fn close_all(name: &str, got: &[f64], want: &[f64], tol: f64) -> Outcome {
    if got.len() != want.len() {
        return Err(format!("{name}: length {} vs {}", got.len(), want.len()));
    }
    for (g, w) in got.iter().zip(want) {
        close(name, *g, *w, tol)?;
    }
    Ok(format!("{got:?}"))
}

fn lib<T>(r: sncn::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Hand-worked scalar examples

fn identity_layer(width: usize) -> LayerSpec {
    LayerSpec::new(width, Activation::Identity, InhibitionMode::Identity)
}

fn zero_context(width: usize) -> ContextStore {
    let mut store = ContextStore::new(width);
    store
        .register(0.0, &mut SeededRng::seed_from_u64(0))
        .expect("zero-spread code");
    store
}

/// One hidden unit, one input unit, no label block.
fn scalar_net(w_x: f64, e_x: f64) -> ModelParams {
    ModelParams {
        w_x: array![[w_x]],
        w_y: Array2::zeros((0, 1)),
        w_hidden: vec![],
        e_x: array![[e_x]],
        e_y: Array2::zeros((1, 0)),
        e_hidden: vec![],
        contexts: vec![zero_context(1)],
    }
}

fn scalar_errors(ex: f64) -> ErrorUnits {
    ErrorUnits {
        x: array![[ex]],
        y: Array2::zeros((0, 1)),
        hidden: vec![],
    }
}

fn hp_with(beta: f64, steps: usize) -> Hyperparams {
    Hyperparams {
        beta,
        steps,
        ..Hyperparams::default()
    }
}

fn example_predict_two_layer() -> Outcome {
    let params = ModelParams {
        w_x: array![[1.0]],
        w_y: Array2::zeros((0, 1)),
        w_hidden: vec![array![[1.0]]],
        e_x: array![[1.0]],
        e_y: Array2::zeros((1, 0)),
        e_hidden: vec![array![[1.0]]],
        contexts: vec![zero_context(1), zero_context(1)],
    };
    let layers = [identity_layer(1), identity_layer(1)];
    let pred = lib(predict_layers(&params, &layers, &[array![[0.3]], array![[0.7]]]))?;
    close("zmu of layer 1", pred.hidden[0][[0, 0]], 0.7, EXAMPLE_TOL)?;
    close("zmu_x", pred.x[[0, 0]], 0.3, EXAMPLE_TOL)
}

fn example_kwta() -> Outcome {
    let out = lib(apply_inhibition_vec(
        array![1.0, 1.0, 1.0].view(),
        array![2.0, 0.0, 1.0].view(),
        &InhibitionMode::KwtaMask { k: 1 },
    ))?;
    close_all("kwta-mask", out.as_slice().unwrap(), &[4.0, 0.0, 0.0], EXAMPLE_TOL)
}

fn example_subtractive() -> Outcome {
    let out = lib(apply_inhibition_vec(
        array![1.0, 0.4].view(),
        array![1.0, 1.0].view(),
        &InhibitionMode::Subtractive { alpha: 0.5 },
    ))?;
    close_all("subtractive", out.as_slice().unwrap(), &[0.8, 0.0], EXAMPLE_TOL)
}

fn example_first_correction() -> Outcome {
    let params = scalar_net(1.0, -1.0);
    let layers = [identity_layer(1)];
    let mut z = vec![array![[0.0]]];
    let g = params.contexts[0].lookup(0).unwrap();
    lib(correct_states(&params, &layers, &hp_with(0.1, 1), &mut z, &scalar_errors(-1.0), &[g]))?;
    close("z after step 1", z[0][[0, 0]], 0.1, EXAMPLE_TOL)
}

fn example_second_correction() -> Outcome {
    let params = scalar_net(1.0, -1.0);
    let layers = [identity_layer(1)];
    let g = params.contexts[0].lookup(0).unwrap();
    let mut z = vec![array![[0.1]]];
    let pred = lib(predict_layers(&params, &layers, &z))?;
    close("zmu_x at step 2", pred.x[[0, 0]], 0.1, EXAMPLE_TOL)?;
    let ex = lib(compute_errors(pred.x.view(), array![[1.0]].view()))?;
    close("e_x at step 2", ex[[0, 0]], -0.9, EXAMPLE_TOL)?;
    let errors = ErrorUnits {
        x: ex,
        y: Array2::zeros((0, 1)),
        hidden: vec![],
    };
    let d = lib(corrections(&params, &errors))?;
    close("d at step 2", d[0][[0, 0]], 0.9, EXAMPLE_TOL)?;
    lib(correct_states(&params, &layers, &hp_with(0.1, 1), &mut z, &errors, &[g]))?;
    close("z after step 2", z[0][[0, 0]], 0.19, EXAMPLE_TOL)
}

fn example_two_step_episode() -> Outcome {
    let params = scalar_net(1.0, -1.0);
    let x = array![[1.0]];
    let episode = lib(infer_states(
        &params,
        &[identity_layer(1)],
        &hp_with(0.1, 2),
        Some(x.view()),
        None,
        0,
        Clamp::Train,
    ))?;
    close("z after K=2", episode.z[0][[0, 0]], 0.19, EXAMPLE_TOL)
}

fn example_discrepancy() -> Outcome {
    let episode = LayerEpisode {
        z: vec![array![[0.0]], array![[0.0]]],
        zmu_x: array![[0.0]],
        zmu_y: Array2::zeros((0, 1)),
        zmu_hidden: vec![array![[0.0]]],
        errors: ErrorUnits {
            x: array![[1.0]],
            y: Array2::zeros((0, 1)),
            hidden: vec![array![[2.0]]],
        },
        d: vec![array![[0.0]], array![[0.0]]],
        step_discrepancy: vec![],
    };
    close("total discrepancy", total_discrepancy(&episode), 2.5, EXAMPLE_TOL)
}

fn scalar_episode(z: f64, ex: f64, d: f64) -> LayerEpisode {
    LayerEpisode {
        z: vec![array![[z]]],
        zmu_x: array![[0.0]],
        zmu_y: Array2::zeros((0, 1)),
        zmu_hidden: vec![],
        errors: scalar_errors(ex),
        d: vec![array![[d]]],
        step_discrepancy: vec![],
    }
}

fn example_forward_weight_update() -> Outcome {
    let hp = Hyperparams {
        lambda: 0.01,
        ..Hyperparams::default()
    };
    let episode = scalar_episode(0.5, -1.0, 0.0);
    let deltas = lib(compute_deltas(&[identity_layer(1)], &hp, &episode))?;
    close("raw W_x delta", deltas.w_x[[0, 0]], -0.5, EXAMPLE_TOL)?;
    let mut w = array![[1.0]];
    lib(normalized_step(&mut w, &deltas.w_x, &hp))?;
    close("W_x after update", w[[0, 0]], 1.01, EXAMPLE_TOL)
}

fn example_error_weight_update() -> Outcome {
    let hp = Hyperparams {
        lambda: 0.01,
        gamma: 0.9,
        ..Hyperparams::default()
    };
    let mut params = scalar_net(1.0, -1.0);
    let episode = scalar_episode(0.0, -1.0, 0.9);
    let deltas = lib(compute_deltas(&[identity_layer(1)], &hp, &episode))?;
    close("raw E_x delta", deltas.e_x[[0, 0]], -0.81, EXAMPLE_TOL)?;
    lib(update_weights(&mut params, &[identity_layer(1)], &hp, &episode, 0))?;
    close("E_x after update", params.e_x[[0, 0]], -0.99, EXAMPLE_TOL)
}

fn example_first_task_context() -> Outcome {
    let mut store = zero_context(1);
    lib(store.update(0, array![1.0].view(), 0.1, 0.001))?;
    close("first-task code", store.codes()[[0, 0]], 0.1, EXAMPLE_TOL)
}

fn example_context_drift() -> Outcome {
    let mut store = zero_context(1);
    lib(store.register(0.0, &mut SeededRng::seed_from_u64(1)))?;
    // Walk the second code to g = 1 with the drift switched off.
    lib(store.update(1, array![10.0].view(), 0.1, 0.0))?;
    close("second code before drift", store.codes()[[0, 1]], 1.0, EXAMPLE_TOL)?;
    close("prior mean", store.running_mean()[0], 0.0, EXAMPLE_TOL)?;
    lib(store.update(1, array![0.0].view(), 0.1, 0.001))?;
    close("second code after drift", store.codes()[[0, 1]], 0.999, EXAMPLE_TOL)
}

/// The hand-derived examples for settling, inhibition, weight updates and
/// context updates, each checked to [`EXAMPLE_TOL`].
pub fn update_rule_examples() -> Vec<(String, Outcome)> {
    let cases: [(&str, fn() -> Outcome); 11] = [
        ("two-layer prediction", example_predict_two_layer),
        ("kwta-mask [2,0,1] k=1", example_kwta),
        ("subtractive alpha=0.5", example_subtractive),
        ("correction step 1 -> 0.1", example_first_correction),
        ("correction step 2 -> 0.19", example_second_correction),
        ("two-step episode -> 0.19", example_two_step_episode),
        ("discrepancy 2.5", example_discrepancy),
        ("W_x 1 -> 1.01", example_forward_weight_update),
        ("E_x -1 -> -0.99", example_error_weight_update),
        ("first-task context 0.1", example_first_task_context),
        ("context drift 0.999", example_context_drift),
    ];
    cases.iter().map(|(n, f)| (n.to_string(), f())).collect()
}

// ---------------------------------------------------------------------------
// Metrics

fn matrix(rows: &[&[f64]]) -> TaskMatrix {
    TaskMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).expect("valid matrix")
}

pub fn metric_examples() -> Vec<(String, Outcome)> {
    let three = matrix(&[&[0.9, 0.0, 0.0], &[0.5, 0.8, 0.0], &[0.5, 0.6, 0.7]]);
    let column = matrix(&[&[0.9, 0.0, 0.0], &[0.5, 0.8, 0.0], &[0.4, 0.6, 0.7]]);
    let gold = GoldDiagonal(vec![1.0, 1.0, 1.0]);
    let two = matrix(&[&[0.9, 0.0], &[0.7, 0.8]]);
    let cases: Vec<(&str, Result<f64, String>, f64)> = vec![
        ("acc final row ones", Ok(acc(&matrix(&[&[1.0, 0.0], &[1.0, 1.0]]))), 1.0),
        ("acc mean 0.7", Ok(acc(&matrix(&[&[0.6, 0.0], &[0.6, 0.8]]))), 0.7),
        ("acc single task", Ok(acc(&matrix(&[&[0.5]]))), 0.5),
        ("bwt single term", lib(bwt(&two)), -0.2),
        ("bwt three tasks", lib(bwt(&three)), -0.3),
        ("tbwt against ones", lib(tbwt(&three, &gold)), -0.45),
        (
            "tbwt reduces to bwt",
            lib(tbwt(&three, &GoldDiagonal(vec![0.9, 0.8, 0.7]))),
            -0.3,
        ),
        ("cbwt column 1", lib(cbwt(&column, 1)), -0.45),
        ("cbwt single term", lib(cbwt(&two, 1)), -0.2),
    ];
    cases
        .into_iter()
        .map(|(name, got, want)| (name.to_string(), got.and_then(|g| close(name, g, want, METRIC_TOL))))
        .collect()
}

/// Loop-per-definition versions with 1-based indices, sharing nothing with
/// the library code.
fn brute_metrics(r: &[Vec<f64>], g: &[f64]) -> (f64, f64, f64, Vec<f64>) {
    let t = r.len();
    let at = |stage: usize, task: usize| r[stage - 1][task - 1];
    let mut acc = 0.0;
    for i in 1..=t {
        acc += at(t, i);
    }
    acc /= t as f64;
    let mut bwt = 0.0;
    let mut tbwt = 0.0;
    for i in 1..t {
        bwt += at(t, i) - at(i, i);
        tbwt += at(t, i) - g[i - 1];
    }
    bwt /= (t - 1) as f64;
    tbwt /= (t - 1) as f64;
    let mut cbwt = Vec::new();
    for task in 1..t {
        let mut sum = 0.0;
        for stage in task + 1..=t {
            sum += at(stage, task) - at(task, task);
        }
        cbwt.push(sum / (t - task) as f64);
    }
    (acc, bwt, tbwt, cbwt)
}

pub fn metric_brute_force(cases: usize, size: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let rows: Vec<Vec<f64>> = (0..size)
            .map(|_| (0..size).map(|_| rng.random::<f64>()).collect())
            .collect();
        let gold: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
        let (a, b, tb, cb) = brute_metrics(&rows, &gold);
        let r = lib(TaskMatrix::from_rows(&rows))?;
        let g = GoldDiagonal(gold);
        let mut diffs = vec![
            (acc(&r) - a).abs(),
            (lib(bwt(&r))? - b).abs(),
            (lib(tbwt(&r, &g))? - tb).abs(),
        ];
        for (task, want) in cb.iter().enumerate() {
            diffs.push((lib(cbwt(&r, task + 1))? - want).abs());
        }
        let max = diffs.into_iter().fold(0.0, f64::max);
        if max > METRIC_TOL {
            return Err(format!("case {case}: deviation {max:e}"));
        }
        worst = worst.max(max);
    }
    Ok(format!("{cases} random {size}x{size} matrices, max deviation {worst:e}"))
}

// ---------------------------------------------------------------------------
// MLP gradients

/// Relative error of one gradient entry. The floor keeps entries that are
/// numerically zero from dividing round-off by round-off.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

/// Central differences on every weight and bias of `nets` random small MLPs.
pub fn gradient_oracle(nets: usize, seed: u64) -> Outcome {
    let mut rng = SeededRng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for net in 0..nets {
        let input = rng.random_range(2..7);
        let depth = rng.random_range(1..4);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..11)).collect();
        let outputs = rng.random_range(2..6);
        let batch = rng.random_range(1..5);
        let mut params = MlpParams::init(input, &hidden, outputs, 0.0, &mut rng);
        for b in &mut params.biases {
            b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let x = Array2::from_shape_simple_fn((input, batch), || rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..outputs)).collect();
        let (_, cache) = lib(mlp_forward(&params, x.view(), Pass::Eval))?;
        let grads = lib(mlp_backward(&params, &cache, &labels))?;

        for layer in 0..params.weights.len() {
            for idx in 0..params.weights[layer].len() {
                let (r, c) = (idx / params.weights[layer].ncols(), idx % params.weights[layer].ncols());
                let orig = params.weights[layer][[r, c]];
                params.weights[layer][[r, c]] = orig + h;
                let up = lib(mlp_loss(&params, x.view(), &labels))?;
                params.weights[layer][[r, c]] = orig - h;
                let down = lib(mlp_loss(&params, x.view(), &labels))?;
                params.weights[layer][[r, c]] = orig;
                let err = relative_error(grads.weights[layer][[r, c]], (up - down) / (2.0 * h));
                if err >= GRADIENT_TOL {
                    return Err(format!("net {net}, W{layer}[{r},{c}]: relative error {err:e}"));
                }
                worst = worst.max(err);
            }
            for i in 0..params.biases[layer].len() {
                let orig = params.biases[layer][i];
                params.biases[layer][i] = orig + h;
                let up = lib(mlp_loss(&params, x.view(), &labels))?;
                params.biases[layer][i] = orig - h;
                let down = lib(mlp_loss(&params, x.view(), &labels))?;
                params.biases[layer][i] = orig;
                let err = relative_error(grads.biases[layer][i], (up - down) / (2.0 * h));
                if err >= GRADIENT_TOL {
                    return Err(format!("net {net}, b{layer}[{i}]: relative error {err:e}"));
                }
                worst = worst.max(err);
            }
        }
    }
    Ok(format!("{nets} random nets, max relative error {worst:e}"))
}

// ---------------------------------------------------------------------------
// Structural properties

fn property<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome
where
    S: Strategy,
    S::Value: Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner
        .run(&strategy, test)
        .map(|()| format!("{cases} cases"))
        .map_err(|e| e.to_string())
}

fn fail(e: sncn::Error) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn nonzero() -> impl Strategy<Value = f64> {
    prop_oneof![-3.0..-0.01f64, 0.01..3.0f64]
}

/// A random small S-NCN description: widths, activations, inhibition modes
/// and a seed for weights and contexts.
#[derive(Debug, Clone)]
struct NetSpec {
    input: usize,
    output: usize,
    layers: Vec<LayerSpec>,
    seed: u64,
}

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        Just(Activation::Identity),
        Just(Activation::Tanh),
        Just(Activation::Relu),
        Just(Activation::Heaviside),
    ]
}

fn layer(width: usize) -> impl Strategy<Value = LayerSpec> {
    let mode = prop_oneof![
        Just(InhibitionMode::Identity),
        (1..=width).prop_map(|k| InhibitionMode::KwtaMask { k }),
        (0.0..1.0f64).prop_map(|alpha| InhibitionMode::Subtractive { alpha }),
    ];
    (activation(), mode).prop_map(move |(a, m)| LayerSpec::new(width, a, m))
}

fn net_spec() -> impl Strategy<Value = NetSpec> {
    (1usize..6, 1usize..4, prop::collection::vec(1usize..8, 1..4), any::<u64>()).prop_flat_map(
        |(input, output, widths, seed)| {
            let layers: Vec<_> = widths.into_iter().map(layer).collect();
            (Just(input), Just(output), layers, Just(seed)).prop_map(|(input, output, layers, seed)| NetSpec {
                input,
                output,
                layers,
                seed,
            })
        },
    )
}

/// Weights with random scale and contexts drawn wide enough that inhibition
/// actually bites. `E_y` is filled too so the label path is exercised.
fn build(spec: &NetSpec) -> ModelParams {
    let mut rng = SeededRng::seed_from_u64(spec.seed);
    let mut params = ModelParams::init(spec.input, &spec.layers, &mut rng).expect("valid spec");
    params
        .register_task(0, spec.output, 0.5, &mut rng)
        .expect("first task");
    params
        .e_y
        .mapv_inplace(|_| rng.random_range(-1.0..1.0));
    params
}

fn random_block(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = SeededRng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

pub fn prop_kwta_sparsity(cases: u32) -> Outcome {
    let strategy = (1usize..40).prop_flat_map(|w| {
        (
            prop::collection::vec(nonzero(), w),
            prop::collection::vec(nonzero(), w),
            1..=w,
        )
    });
    property(cases, strategy, |(z, g, k)| {
        let out = apply_inhibition_vec(
            Array1::from(z).view(),
            Array1::from(g.clone()).view(),
            &InhibitionMode::KwtaMask { k },
        )
        .map_err(fail)?;
        let winners = kwta_winners(Array1::from(g).view(), k);
        let nonzero: Vec<usize> = (0..out.len()).filter(|&i| out[i] != 0.0).collect();
        prop_assert!(nonzero.len() <= k);
        prop_assert_eq!(nonzero, winners);
        Ok(())
    })
}

pub fn prop_subtractive_non_negative(cases: u32) -> Outcome {
    let direct = (1usize..30).prop_flat_map(|w| {
        (
            prop::collection::vec(-5.0..5.0f64, w),
            prop::collection::vec(-3.0..3.0f64, w),
            0.0..2.0f64,
        )
    });
    let first = property(cases, direct, |(z, g, alpha)| {
        let out = apply_inhibition_vec(
            Array1::from(z).view(),
            Array1::from(g).view(),
            &InhibitionMode::Subtractive { alpha },
        )
        .map_err(fail)?;
        prop_assert!(out.iter().all(|&v| v >= 0.0));
        Ok(())
    })?;
    // Every settled state of a subtractive layer is non-negative too.
    let settled = property(cases, (net_spec(), any::<u64>()), |(spec, data)| {
        let params = build(&spec);
        let x = random_block(spec.input, 3, data);
        let ep = infer_states(&params, &spec.layers, &Hyperparams::default(), Some(x.view()), None, 0, Clamp::Predict)
            .map_err(fail)?;
        for (l, z) in spec.layers.iter().zip(&ep.z) {
            if matches!(l.inhibition, InhibitionMode::Subtractive { .. }) {
                prop_assert!(z.iter().all(|&v| v >= 0.0));
            }
        }
        Ok(())
    })?;
    Ok(format!("{first} direct, {settled} settled"))
}

pub fn prop_normalized_step(cases: u32) -> Outcome {
    let direct = ((1usize..8, 1usize..8), 1e-4..1.0f64, any::<u64>());
    let first = property(cases, direct, |((r, c), lambda, seed)| {
        let hp = Hyperparams {
            lambda,
            ..Hyperparams::default()
        };
        let mut p = random_block(r, c, seed);
        let mut delta = random_block(r, c, seed ^ 1);
        delta[[0, 0]] += 1.0;
        let before = p.clone();
        normalized_step(&mut p, &delta, &hp).map_err(fail)?;
        let moved = (&before - &p).iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((moved - lambda).abs() <= STEP_TOL, "moved {} for lambda {}", moved, lambda);
        Ok(())
    })?;
    // Through a real episode: every parameter whose raw delta is not
    // vanishing moves by exactly lambda; untouched ones stay put.
    let episodes = property(cases, (net_spec(), any::<u64>()), |(spec, data)| {
        let hp = Hyperparams::default();
        let mut params = build(&spec);
        let x = random_block(spec.input, 4, data);
        let y = random_block(spec.output, 4, data ^ 7);
        let ep = infer_states(&params, &spec.layers, &hp, Some(x.view()), Some(y.view()), 0, Clamp::Train)
            .map_err(fail)?;
        let deltas = compute_deltas(&spec.layers, &hp, &ep).map_err(fail)?;
        let before: Vec<Array2<f64>> = params.matrices().into_iter().map(|(_, m)| m.clone()).collect();
        let raw: Vec<f64> = {
            let mut all = vec![&deltas.w_x, &deltas.w_y];
            all.extend(&deltas.w_hidden);
            all.push(&deltas.e_x);
            all.push(&deltas.e_y);
            all.extend(&deltas.e_hidden);
            all.iter().map(|d| d.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
        };
        apply_deltas(&mut params, &deltas, &hp).map_err(fail)?;
        for ((b, (name, a)), n) in before.iter().zip(params.matrices()).zip(raw) {
            let moved = (b - a).iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                prop_assert!(moved == 0.0, "{} moved without a delta", name);
            } else if n >= 1e-3 {
                prop_assert!((moved - hp.lambda).abs() <= STEP_TOL, "{} moved {}", name, moved);
            }
        }
        Ok(())
    })?;
    Ok(format!("{first} direct, {episodes} via episodes"))
}

pub fn prop_zero_fixed_point(cases: u32) -> Outcome {
    property(cases, (net_spec(), 1usize..9, 1usize..4), |(spec, steps, batch)| {
        let params = build(&spec);
        let x = Array2::zeros((spec.input, batch));
        let y = Array2::zeros((spec.output, batch));
        let ep = infer_states(&params, &spec.layers, &hp_with(0.05, steps), Some(x.view()), Some(y.view()), 0, Clamp::Train)
            .map_err(fail)?;
        prop_assert!(ep.z.iter().all(|z| z.iter().all(|&v| v == 0.0)));
        prop_assert!(ep.step_discrepancy.iter().all(|&v| v == 0.0));
        prop_assert_eq!(total_discrepancy(&ep), 0.0);
        Ok(())
    })
}

fn tiny_stream(seed: u64) -> Vec<TaskData> {
    let source = synthetic_source(4, 6, 12, 4, 0.1, seed);
    let split = |id: usize, classes: Vec<usize>| {
        sncn::data::build_split(
            &source,
            TaskDef {
                id,
                name: format!("S{id}"),
                source: SourceDataset::Synthetic,
                class_subset: classes,
            },
            Default::default(),
        )
        .expect("synthetic classes exist")
    };
    vec![split(0, vec![0, 1]), split(1, vec![2, 3])]
}

pub fn prop_determinism(cases: u32) -> Outcome {
    property(cases, (any::<u64>(), 0usize..3), |(seed, mode)| {
        let tasks = tiny_stream(seed);
        let inhibition = match mode {
            0 => InhibitionMode::Identity,
            1 => InhibitionMode::KwtaMask { k: 3 },
            _ => InhibitionMode::Subtractive { alpha: 0.1 },
        };
        let layers = vec![
            LayerSpec::new(8, Activation::Tanh, inhibition),
            LayerSpec::new(5, Activation::Tanh, inhibition),
        ];
        let run = || {
            let mut rng = SeededRng::seed_from_u64(seed);
            let model = Sncn::new(6, layers.clone(), Hyperparams::default(), &mut rng)?;
            run_stream(model, &tasks, 5, seed, |_, _, _| {})
        };
        let a = run().map_err(fail)?;
        let b = run().map_err(fail)?;
        let bits = |m: &TaskMatrix| m.matrix().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.r), bits(&b.r));
        for ((_, pa), (_, pb)) in a.model.params().matrices().into_iter().zip(b.model.params().matrices()) {
            let same = pa.iter().zip(pb.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
            prop_assert!(same);
        }
        Ok(())
    })
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// The errors an episode of `k` steps reports must equal the predictions
/// made from the states of the `k − 1` step episode minus the targets.
pub fn prop_error_units(cases: u32) -> Outcome {
    property(cases, (net_spec(), 1usize..6, any::<u64>()), |(spec, k, data)| {
        let params = build(&spec);
        let x = random_block(spec.input, 2, data);
        let y = random_block(spec.output, 2, data ^ 3);
        let episode = |steps| {
            infer_states(&params, &spec.layers, &hp_with(0.05, steps), Some(x.view()), Some(y.view()), 0, Clamp::Train)
        };
        let now = episode(k).map_err(fail)?;
        let prev: Vec<Array2<f64>> = if k == 1 {
            spec.layers.iter().map(|l| Array2::zeros((l.width, 2))).collect()
        } else {
            episode(k - 1).map_err(fail)?.z
        };
        let pred = predict_layers(&params, &spec.layers, &prev).map_err(fail)?;
        prop_assert!(max_abs_diff(&now.errors.x, &(&pred.x - &x)) <= 1e-12);
        prop_assert!(max_abs_diff(&now.errors.y, &(&pred.y - &y)) <= 1e-12);
        for (i, e) in now.errors.hidden.iter().enumerate() {
            prop_assert!(max_abs_diff(e, &(&pred.hidden[i] - &prev[i])) <= 1e-12);
        }
        Ok(())
    })
}

/// The deltas of one predictor do not change when every other layer's
/// states, errors and corrections are replaced.
pub fn prop_locality(cases: u32) -> Outcome {
    let spec = net_spec().prop_filter("needs two layers", |s| s.layers.len() >= 2);
    property(cases, (spec, any::<u64>()), |(spec, data)| {
        let hp = Hyperparams::default();
        let params = build(&spec);
        let x = random_block(spec.input, 3, data);
        let y = random_block(spec.output, 3, data ^ 5);
        let ep = infer_states(&params, &spec.layers, &hp, Some(x.view()), Some(y.view()), 0, Clamp::Train)
            .map_err(fail)?;
        let base = compute_deltas(&spec.layers, &hp, &ep).map_err(fail)?;
        let top = spec.layers.len() - 1;

        // Output predictors read only z1, e_x / e_y and d1.
        let mut other = ep.clone();
        for (i, z) in other.z.iter_mut().enumerate().skip(1) {
            *z = random_block(z.nrows(), z.ncols(), data ^ (11 + i as u64));
        }
        for (i, d) in other.d.iter_mut().enumerate().skip(1) {
            *d = random_block(d.nrows(), d.ncols(), data ^ (23 + i as u64));
        }
        for (i, e) in other.errors.hidden.iter_mut().enumerate() {
            *e = random_block(e.nrows(), e.ncols(), data ^ (37 + i as u64));
        }
        let moved = compute_deltas(&spec.layers, &hp, &other).map_err(fail)?;
        prop_assert_eq!(&base.w_x, &moved.w_x);
        prop_assert_eq!(&base.w_y, &moved.w_y);
        prop_assert_eq!(&base.e_x, &moved.e_x);
        prop_assert_eq!(&base.e_y, &moved.e_y);

        // The top predictor reads only z_top, e_{top-1} and d_top.
        let mut other = ep.clone();
        for i in 0..top {
            other.z[i] = random_block(other.z[i].nrows(), 3, data ^ (41 + i as u64));
            other.d[i] = random_block(other.d[i].nrows(), 3, data ^ (53 + i as u64));
        }
        other.errors.x = random_block(spec.input, 3, data ^ 61);
        other.errors.y = random_block(spec.output, 3, data ^ 67);
        for i in 0..top - 1 {
            other.errors.hidden[i] = random_block(other.errors.hidden[i].nrows(), 3, data ^ (71 + i as u64));
        }
        let moved = compute_deltas(&spec.layers, &hp, &other).map_err(fail)?;
        prop_assert_eq!(&base.w_hidden[top - 1], &moved.w_hidden[top - 1]);
        prop_assert_eq!(&base.e_hidden[top - 1], &moved.e_hidden[top - 1]);
        Ok(())
    })
}

/// Settling and learning see a layer's state only through `φ(z)`: swapping
/// `tanh` for the identity applied to `tanh(z)` gives identical results, so
/// no derivative of `φ` is involved anywhere.
pub fn prop_forward_values_only(cases: u32) -> Outcome {
    property(cases, (net_spec(), any::<u64>()), |(spec, data)| {
        let hp = Hyperparams::default();
        let params = build(&spec);
        let tanh_layers: Vec<LayerSpec> = spec
            .layers
            .iter()
            .map(|l| LayerSpec::new(l.width, Activation::Tanh, l.inhibition))
            .collect();
        let plain_layers: Vec<LayerSpec> = spec
            .layers
            .iter()
            .map(|l| LayerSpec::new(l.width, Activation::Identity, l.inhibition))
            .collect();
        let z: Vec<Array2<f64>> = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| random_block(l.width, 2, data ^ (i as u64 + 1)) * 3.0)
            .collect();
        let squashed: Vec<Array2<f64>> = z.iter().map(|m| m.mapv(f64::tanh)).collect();

        let a = predict_layers(&params, &tanh_layers, &z).map_err(fail)?;
        let b = predict_layers(&params, &plain_layers, &squashed).map_err(fail)?;
        prop_assert_eq!(&a, &b);

        let errors = ErrorUnits {
            x: random_block(spec.input, 2, data ^ 91),
            y: random_block(spec.output, 2, data ^ 93),
            hidden: spec.layers[..spec.layers.len() - 1]
                .iter()
                .enumerate()
                .map(|(i, l)| random_block(l.width, 2, data ^ (97 + i as u64)))
                .collect(),
        };
        let contexts: Vec<ArrayView1<'_, f64>> = params.contexts.iter().map(|c| c.lookup(0).unwrap()).collect();
        let (mut za, mut zb) = (z.clone(), squashed.clone());
        correct_states(&params, &tanh_layers, &hp, &mut za, &errors, &contexts).map_err(fail)?;
        correct_states(&params, &plain_layers, &hp, &mut zb, &errors, &contexts).map_err(fail)?;
        prop_assert_eq!(&za, &zb);

        let episode = |z: Vec<Array2<f64>>| LayerEpisode {
            z,
            zmu_x: a.x.clone(),
            zmu_y: a.y.clone(),
            zmu_hidden: a.hidden.clone(),
            errors: errors.clone(),
            d: za.clone(),
            step_discrepancy: vec![],
        };
        let da = compute_deltas(&tanh_layers, &hp, &episode(z.clone())).map_err(fail)?;
        let db = compute_deltas(&plain_layers, &hp, &episode(squashed.clone())).map_err(fail)?;
        prop_assert_eq!(da, db);
        Ok(())
    })
}

pub fn prop_context_retrieval(cases: u32) -> Outcome {
    property(cases, (1usize..20, 1usize..6, any::<u64>()), |(width, tasks, seed)| {
        let mut rng = SeededRng::seed_from_u64(seed);
        let mut store = ContextStore::new(width);
        for _ in 0..tasks {
            store.register(0.3, &mut rng).map_err(fail)?;
        }
        for t in 0..tasks {
            let mut onehot = Array1::zeros(tasks);
            onehot[t] = 1.0;
            let got = store.retrieve(onehot.view()).map_err(fail)?;
            let want = store.lookup(t).map_err(fail)?;
            let same = got.iter().zip(want.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
        Ok(())
    })
}

/// Every structural property, each run for `cases` randomized cases.
pub fn structural_properties(cases: u32) -> Vec<(String, Outcome)> {
    let props: [(&str, fn(u32) -> Outcome); 9] = [
        ("kwta sparsity", prop_kwta_sparsity),
        ("subtractive non-negativity", prop_subtractive_non_negative),
        ("normalized step = lambda", prop_normalized_step),
        ("zero fixed point", prop_zero_fixed_point),
        ("determinism", prop_determinism),
        ("error-unit identity", prop_error_units),
        ("locality", prop_locality),
        ("forward values only", prop_forward_values_only),
        ("context retrieval", prop_context_retrieval),
    ];
    props.iter().map(|(n, f)| (n.to_string(), f(cases))).collect()
}

// ---------------------------------------------------------------------------
// Real data

/// `SNCN_DATA_DIR` if set, otherwise the workspace `data/` directory.
pub fn data_root() -> std::path::PathBuf {
    std::env::var_os(sncn::harness::DATA_DIR_ENV)
        .map(Into::into)
        .unwrap_or_else(|| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// The four tasks of the reduced equal-class stream, or a message naming
/// what is missing.
pub fn reduced_stream() -> Result<(sncn::ExperimentConfig, Vec<TaskData>), String> {
    let root = data_root();
    let config = sncn::ExperimentConfig {
        data: sncn::harness::DataPaths::under(&root),
        ..Default::default()
    };
    let tasks = sncn::harness::load_tasks(&config)
        .map_err(|e| format!("{e} (set {} or run scripts/fetch_data.sh)", sncn::harness::DATA_DIR_ENV))?;
    Ok((config, tasks))
}
