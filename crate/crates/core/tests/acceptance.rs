//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::sync::OnceLock;

use rand::Rng;
use relaylab::channel::{evolve, sample_initial, FadingParams};
use relaylab::dqn::{tabular_q_update, QTable};
use relaylab::env::{mi_af, mi_df, outage_indicator, power_from_level};
use relaylab::harness::{
    self, convergence_episode, evaluate_checkpoint, train_run, AgentCheckpoint, RunConfig,
    TrainOutcome,
};
use relaylab::hrl::{goal_distribution, update_preferences, MetaController};
use relaylab::nn::{dueling_combine, DenseNet, HeadKind};
use relaylab::replay::RingBuffer;
use relaylab::{seeded_rng, Action, AgentKind, EnvConfig, Protocol, RelayEnv};

const SEEDS: [u64; 7] = [0, 1, 2, 3, 4, 5, 6];

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {id:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) not met: {detail}");
}

fn env(relays: usize, levels: usize, protocol: Protocol) -> EnvConfig {
    EnvConfig {
        relays,
        power_levels: levels,
        protocol,
        ..EnvConfig::default()
    }
}

struct Runs {
    hrl: Vec<TrainOutcome>,
    dqn: Vec<TrainOutcome>,
    random: Vec<TrainOutcome>,
}

impl Runs {
    fn train(env: EnvConfig, agents: &[AgentKind]) -> Self {
        let config = RunConfig::new(env, AgentKind::Hrl);
        let run = |kind: AgentKind| {
            if agents.contains(&kind) {
                SEEDS
                    .iter()
                    .map(|&s| train_run(&config, kind, s).unwrap())
                    .collect()
            } else {
                Vec::new()
            }
        };
        Runs {
            hrl: run(AgentKind::Hrl),
            dqn: run(AgentKind::Dqn),
            random: run(AgentKind::Random),
        }
    }
}

fn final_median(runs: &[TrainOutcome]) -> f64 {
    median(runs.iter().map(TrainOutcome::final_success_ma).collect())
}

fn curve_mean(runs: &[TrainOutcome]) -> f64 {
    let all: Vec<f64> = runs.iter().flat_map(TrainOutcome::success_ma).collect();
    all.iter().sum::<f64>() / all.len() as f64
}

/// Variance of per-episode success over the last 20 episodes, median over seeds.
fn tail_variance(runs: &[TrainOutcome]) -> f64 {
    median(
        runs.iter()
            .map(|o| {
                let s = o.success();
                let tail = &s[s.len() - 20..];
                let m = tail.iter().sum::<f64>() / 20.0;
                tail.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 20.0
            })
            .collect(),
    )
}

fn df_k10() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        Runs::train(
            env(10, 10, Protocol::DF),
            &[AgentKind::Hrl, AgentKind::Dqn, AgentKind::Random],
        )
    })
}

fn af_k10() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        Runs::train(
            env(10, 10, Protocol::AF),
            &[AgentKind::Hrl, AgentKind::Dqn, AgentKind::Random],
        )
    })
}

fn df_k20() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| Runs::train(env(20, 20, Protocol::DF), &[AgentKind::Hrl, AgentKind::Dqn]))
}

#[test]
fn criterion_01_df_final_success() {
    let runs = df_k10();
    let hrl = final_median(&runs.hrl);
    let dqn = final_median(&runs.dqn);
    report(
        1,
        "DF K=L=10 final success",
        hrl >= 0.85 && hrl - dqn >= 0.03,
        format!("HRL median {hrl:.3} (need >= 0.85), DQN median {dqn:.3}, gap {:.3} (need >= 0.03)", hrl - dqn),
    );
}

#[test]
fn criterion_02_convergence_speed() {
    let runs = df_k10();
    let episodes = |r: &[TrainOutcome]| {
        median(
            r.iter()
                .map(|o| convergence_episode(&o.success_ma(), 0.95).unwrap() as f64)
                .collect(),
        )
    };
    let hrl = episodes(&runs.hrl);
    let dqn = episodes(&runs.dqn);
    report(
        2,
        "convergence to 95% of final",
        hrl <= 20.0 && dqn >= 1.5 * hrl,
        format!("HRL median {hrl} episodes (need <= 20), DQN median {dqn} (need >= {:.1})", 1.5 * hrl),
    );
}

#[test]
fn criterion_03_search_space_scaling() {
    let (small, large) = (df_k10(), df_k20());
    let hrl_10 = final_median(&small.hrl);
    let hrl_20 = final_median(&large.hrl);
    let dqn_10 = final_median(&small.dqn);
    let dqn_20 = final_median(&large.dqn);
    let var_dqn = tail_variance(&large.dqn);
    let var_hrl = tail_variance(&large.hrl);
    let hrl_ok = hrl_20 >= hrl_10 - 0.05;
    let dqn_ok = dqn_20 <= dqn_10 - 0.03 || var_dqn >= 2.0 * var_hrl;
    report(
        3,
        "K=L=20 scaling",
        hrl_ok && dqn_ok,
        format!(
            "HRL {hrl_10:.3} -> {hrl_20:.3} (need >= {:.3}); DQN {dqn_10:.3} -> {dqn_20:.3} (drop {:.3}, need >= 0.03) \
             or tail variance DQN {var_dqn:.5} vs HRL {var_hrl:.5} (ratio {:.2}, need >= 2)",
            hrl_10 - 0.05,
            dqn_10 - dqn_20,
            var_dqn / var_hrl
        ),
    );
}

#[test]
fn criterion_04_threshold_robustness() {
    let runs = df_k10();
    let cfg = env(10, 10, Protocol::DF);
    let hrl = median(
        runs.hrl
            .iter()
            .map(|o| evaluate_checkpoint(&o.checkpoint, &cfg, &[1.8], 100, 1000 + o.seed).unwrap().outage[0])
            .collect(),
    );
    let random_ckpt = AgentCheckpoint::Random {
        relays: 10,
        power_levels: 10,
    };
    let random = median(
        SEEDS
            .iter()
            .map(|&s| evaluate_checkpoint(&random_ckpt, &cfg, &[1.8], 100, 1000 + s).unwrap().outage[0])
            .collect(),
    );
    report(
        4,
        "frozen policies at lambda = 1.8",
        hrl <= 0.10 && random >= 0.5,
        format!("HRL outage {hrl:.4} (need <= 0.10), random outage {random:.4} (need >= 0.5)"),
    );
}

#[test]
fn criterion_05_af_below_df() {
    let (df, af) = (df_k10(), af_k10());
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, d, a) in [
        ("HRL", &df.hrl, &af.hrl),
        ("DQN", &df.dqn, &af.dqn),
        ("random", &df.random, &af.random),
    ] {
        let (fd, fa) = (final_median(d), final_median(a));
        let (cd, ca) = (curve_mean(d), curve_mean(a));
        pass &= fa < fd && ca < cd;
        detail.push(format!("{name} final AF {fa:.3} / DF {fd:.3}, curve mean AF {ca:.3} / DF {cd:.3}"));
    }
    report(5, "AF below DF for every agent", pass, detail.join("; "));
}

fn gradient_error(head: HeadKind, seed: u64) -> f64 {
    let mut rng = seeded_rng(10_000 + seed);
    let inputs = rng.random_range(1..6);
    let hidden: Vec<usize> = (0..rng.random_range(1..3)).map(|_| rng.random_range(2..7)).collect();
    let outputs = rng.random_range(2..5);
    let mut net = DenseNet::new(inputs, &hidden, outputs, head, &mut rng).unwrap();
    for arr in net.param_arrays_mut() {
        for p in arr.iter_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
    }
    let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-1.5..1.5)).collect();
    let action = rng.random_range(0..outputs);
    let target = rng.random_range(-2.0..2.0);
    let loss = |n: &DenseNet| (target - n.forward(&x).unwrap()[action]).powi(2);
    let grads = net.td_backward(&x, action, target).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let lens: Vec<usize> = net.param_arrays().iter().map(|a| a.len()).collect();
    for (i, len) in lens.into_iter().enumerate() {
        for j in 0..len {
            let p = net.param_arrays()[i][j];
            net.param_arrays_mut()[i][j] = p + h;
            let up = loss(&net);
            net.param_arrays_mut()[i][j] = p - h;
            let down = loss(&net);
            net.param_arrays_mut()[i][j] = p;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.arrays()[i][j];
            let scale = analytic.abs().max(numeric.abs());
            let err = if scale > 1e-7 {
                (analytic - numeric).abs() / scale
            } else {
                0.0
            };
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn criterion_06_gradient_oracle() {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        for head in [HeadKind::Plain, HeadKind::Dueling] {
            worst = worst.max(gradient_error(head, seed));
        }
    }
    report(
        6,
        "TD gradients vs central differences",
        worst < 1e-3,
        format!("worst relative error {worst:.2e} over 50 plain + 50 dueling nets (need < 1e-3)"),
    );
}

#[test]
fn criterion_07_algebraic_invariants() {
    let mut rng = seeded_rng(77);
    let mut softmax_err: f64 = 0.0;
    let mut shift_err: f64 = 0.0;
    let mut delta_err: f64 = 0.0;
    let mut dueling_err: f64 = 0.0;
    for _ in 0..10_000 {
        let k = rng.random_range(1..25);
        let m: Vec<f64> = (0..k).map(|_| rng.random_range(-20.0..20.0)).collect();
        let p = goal_distribution(&m);
        softmax_err = softmax_err.max((p.iter().sum::<f64>() - 1.0).abs());
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = m.iter().map(|x| x + c).collect();
        for (a, b) in p.iter().zip(goal_distribution(&shifted)) {
            shift_err = shift_err.max((a - b).abs());
        }
        let mut after = m.clone();
        let r = rng.random_range(0.0..1.0);
        let b = rng.random_range(0.0..1.0);
        update_preferences(&mut after, rng.random_range(0..k), r, b, 0.1).unwrap();
        delta_err = delta_err.max(after.iter().zip(&m).map(|(x, y)| x - y).sum::<f64>().abs());
        let v = rng.random_range(-50.0..50.0);
        let adv: Vec<f64> = (0..k).map(|_| rng.random_range(-50.0..50.0)).collect();
        let q = dueling_combine(v, &adv).unwrap();
        dueling_err = dueling_err.max((q.iter().sum::<f64>() / k as f64 - v).abs());
    }
    let mut power_exact = true;
    for levels in 2..200 {
        for level in 1..levels {
            for p_max in [0.1, 1.0, 3.3, 4.0, 7.0, 1e3] {
                let (ps, pr) = power_from_level(level, levels, p_max).unwrap();
                power_exact &= ps + pr == p_max;
            }
        }
    }
    let mut complementary = true;
    let mut env = RelayEnv::new(EnvConfig::default()).unwrap();
    for ep in 0..20 {
        env.reset(ep);
        loop {
            let action = Action::new(rng.random_range(0..10), rng.random_range(1..10));
            let step = env.step(action).unwrap();
            complementary &= step.reward + f64::from(outage_indicator(step.mutual_information, 2.0)) == 1.0;
            if step.done {
                break;
            }
        }
    }
    report(
        7,
        "algebraic invariants",
        softmax_err <= 1e-12
            && shift_err <= 1e-12
            && delta_err <= 1e-12
            && dueling_err <= 1e-9
            && power_exact
            && complementary,
        format!(
            "softmax sum err {softmax_err:.1e}, shift err {shift_err:.1e}, sum dM {delta_err:.1e}, \
             dueling mean err {dueling_err:.1e}, P_s + P_r exact: {power_exact}, reward + indicator = 1: {complementary}"
        ),
    );
}

#[test]
fn criterion_08_oracles() {
    // mutual information against a 50-digit reference table
    let mut mi_err: f64 = 0.0;
    for line in include_str!("data/mi_reference.csv").lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        mi_err = mi_err.max(((mi_af(v[0], v[1], v[2]) - v[4]) / v[4]).abs());
        mi_err = mi_err.max(((mi_df(v[0], v[1], v[2], v[3]) - v[5]) / v[5]).abs());
    }

    // tabular Q-learning against value iteration on a two-state chain
    let step = |s: usize, a: usize| match (s, a) {
        (0, 0) => (0.0, 0),
        (0, _) => (0.5, 1),
        (1, 0) => (1.0, 1),
        _ => (0.0, 0),
    };
    let gamma = 0.9;
    let mut vi = [[0.0f64; 2]; 2];
    for _ in 0..2000 {
        let old = vi;
        for s in 0..2 {
            for a in 0..2 {
                let (r, s2) = step(s, a);
                vi[s][a] = r + gamma * old[s2][0].max(old[s2][1]);
            }
        }
    }
    let mut table = QTable::zeros(2, 2);
    let mut rng = seeded_rng(5);
    let mut s = 0;
    for t in 0..400_000u64 {
        let a = rng.random_range(0..2);
        let (r, s2) = step(s, a);
        let alpha = (1.0 / (1.0 + t as f64 / 2000.0)).max(0.01);
        tabular_q_update(&mut table, s, a, r, s2, alpha, gamma).unwrap();
        s = s2;
    }
    let q_err = (0..4)
        .map(|i| (table.get(i / 2, i % 2) - vi[i / 2][i % 2]).abs())
        .fold(0.0, f64::max);

    // lag-1 correlation of the fading recursion
    let params = FadingParams::stationary(0.95, 1.0).unwrap();
    let mut h = sample_initial(1, 1.0, &mut rng).unwrap();
    let (mut cross, mut power) = (0.0, 0.0);
    for _ in 0..100_000 {
        let next = evolve(&h, &params, &mut rng).unwrap();
        let (a, b) = (h.entries()[0], next.entries()[0]);
        cross += (a.conj() * b).re;
        power += a.norm_sqr();
        h = next;
    }
    let corr = cross / power;

    // replay sampling uniformity
    let mut buf = RingBuffer::new(10).unwrap();
    for i in 0..10usize {
        buf.push(i);
    }
    let mut counts = [0usize; 10];
    for item in buf.sample(100_000, &mut rng).unwrap() {
        counts[*item] += 1;
    }
    let replay_err = counts
        .iter()
        .map(|&c| (c as f64 / 1e5 - 0.1).abs())
        .fold(0.0, f64::max);

    report(
        8,
        "independent oracles",
        mi_err < 1e-12 && q_err < 1e-3 && (corr - 0.95).abs() <= 0.01 && replay_err <= 0.01,
        format!(
            "MI rel err {mi_err:.1e} (1000 triples), |Q - VI| {q_err:.1e}, lag-1 corr {corr:.4}, \
             replay freq err {replay_err:.4}"
        ),
    );
}

/// Plain reimplementation of the gradient bandit used as the reference.
fn reference_bandit(k: usize, best: usize, seed: u64, max_updates: usize) -> Option<usize> {
    let mut m = vec![0.0f64; k];
    let mut baseline = 0.0;
    let mut rng = seeded_rng(seed);
    for n in 1..=max_updates {
        let z = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = m.iter().map(|x| (x - z).exp()).collect();
        let s: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|x| x / s).collect();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut g = k - 1;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                g = i;
                break;
            }
        }
        let r = if g == best { 1.0 } else { 0.0 };
        baseline += (r - baseline) / n as f64;
        for i in 0..k {
            let ind = if i == g { 1.0 } else { 0.0 };
            m[i] += 0.1 * (r - baseline) * (ind - p[i]);
        }
        if goal_distribution(&m)[best] > 0.9 {
            return Some(n);
        }
    }
    None
}

#[test]
fn criterion_09_isolated_bandit() {
    let (k, best) = (10, 6);
    let mut worst = 0;
    let mut agree = true;
    for seed in 0..200 {
        let mut meta = MetaController::new(k, 0.1, 1000).unwrap();
        let mut rng = seeded_rng(seed);
        let mut hit = None;
        for n in 1..=500 {
            let g = meta.choose(&mut rng);
            meta.update(g, if g == best { 1.0 } else { 0.0 }).unwrap();
            if meta.distribution()[best] > 0.9 {
                hit = Some(n);
                break;
            }
        }
        agree &= hit == reference_bandit(k, best, seed, 500);
        worst = worst.max(hit.unwrap_or(usize::MAX));
    }
    report(
        9,
        "isolated bandit finds the best relay",
        worst <= 500 && agree,
        format!("worst case {worst} updates over 200 seeds (need <= 500), matches reference simulation: {agree}"),
    );
}

#[test]
fn criterion_10_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::new(
        env(10, 10, Protocol::DF),
        harness::AgentSelection::Many(vec![AgentKind::Hrl, AgentKind::Dqn, AgentKind::Random]),
    );
    config.iterations = 20;
    config.seeds = vec![3, 11];
    for run in ["a", "b"] {
        config.output_dir = dir.path().join(run);
        harness::train(&config).unwrap();
    }
    let mut identical = true;
    let mut files = 0;
    for kind in ["hrl", "dqn", "random"] {
        for seed in [3, 11] {
            let name = format!("{kind}_seed{seed}.csv");
            let a = std::fs::read(dir.path().join("a").join(&name)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(&name)).unwrap();
            identical &= a == b;
            files += 1;
        }
    }
    report(
        10,
        "byte-identical metrics",
        identical,
        format!("{files} metrics files compared across two runs, identical: {identical}"),
    );
}
