use noma_aoi_core::agents::{
    continue_training, critic_targets, dqn_targets, train_hybrid, Batch, HybridPolicy, TrainConfig, Trainer, Transition,
};
use noma_aoi_core::env::{EnvConfig, Environment};
use noma_aoi_core::meta::{fine_tune, meta_train, mean_gradients, outer_update, Gradients, MetaConfig, MetaParams, StepSizes};
use noma_aoi_core::nn::{Architecture, Mlp, OutputActivation};
use noma_aoi_core::rng::{stream, stream_rng};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_env() -> EnvConfig {
    let mut cfg = EnvConfig::default();
    cfg.network.vehicles = 2;
    cfg.network.processes = 2;
    cfg.network.noise_power = 1e-8;
    cfg.demand.per_vehicle = 1;
    cfg.road.horizon = 20;
    cfg
}

fn small_hp(episodes: usize) -> TrainConfig {
    TrainConfig {
        hidden: vec![32, 16],
        batch_size: 32,
        episodes,
        replay_capacity: 5000,
        tau: 0.01,
        lr_actor: 1e-3,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic() {
    let env = small_env();
    let hp = small_hp(5);
    let (a, ca) = train_hybrid(&env, 0.4, &hp, 3).unwrap();
    let (b, cb) = train_hybrid(&env, 0.4, &hp, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(ca, cb);
    let (c, _) = train_hybrid(&env, 0.4, &hp, 4).unwrap();
    assert_ne!(a, c);
}

#[test]
fn zero_episodes_return_the_initialization() {
    let env = small_env();
    let hp = small_hp(0);
    let (p, curve) = train_hybrid(&env, 0.5, &hp, 9).unwrap();
    let init = HybridPolicy::new(2, &hp.hidden, 0.5, &mut stream_rng(9, stream::INIT)).unwrap();
    assert_eq!(p, init);
    assert!(curve.rewards.is_empty());
}

#[test]
fn learning_improves_reward_on_a_tiny_instance() {
    let env = small_env();
    let hp = small_hp(200);
    let improved = (0..3)
        .filter(|&seed| {
            let (_, curve) = train_hybrid(&env, 0.5, &hp, seed).unwrap();
            let n = curve.rewards.len() / 10;
            let head: f64 = curve.rewards[..n].iter().sum::<f64>() / n as f64;
            let tail: f64 = curve.rewards[curve.rewards.len() - n..].iter().sum::<f64>() / n as f64;
            tail > head
        })
        .count();
    assert!(improved >= 2, "{improved} of 3 seeds improved");
}

#[test]
fn replay_rewards_are_the_environment_rewards() {
    let cfg = small_env();
    let policy = HybridPolicy::new(2, &[8], 0.7, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut trainer = Trainer::new(policy, small_hp(1), 5).unwrap();
    let mut env = Environment::new(cfg, 0.7).unwrap();
    let curve = trainer.run(&mut env, 1).unwrap();
    let stored: Vec<f64> = trainer.buffer().iter().map(|t| t.reward).collect();
    assert_eq!(stored.len(), 20);
    let mean = stored.iter().sum::<f64>() / stored.len() as f64;
    assert!((mean - curve.rewards[0]).abs() < 1e-12);
}

#[test]
fn both_agents_regress_on_the_same_joint_reward() {
    let items: Vec<Transition> = (0..4)
        .map(|k| Transition {
            state: vec![0.1 * k as f64; 4],
            order: k % 2,
            alpha: vec![0.3, 0.6],
            reward: 0.25 * k as f64 - 0.2,
            next_state: vec![0.0; 4],
            done: true,
        })
        .collect();
    let batch = Batch::from_transitions(&items).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dqn = Mlp::new(Architecture::new(4, &[6], 2, OutputActivation::Identity), &mut rng);
    let actor = Mlp::new(Architecture::new(4, &[6], 2, OutputActivation::Sigmoid), &mut rng);
    let critic = Mlp::new(Architecture::new(8, &[6], 1, OutputActivation::Identity), &mut rng);
    let yq = dqn_targets(&dqn, &batch, 0.5).unwrap();
    let yc = critic_targets(&critic, &actor, &dqn, &batch, 0.5).unwrap();
    assert_eq!(yq, batch.rewards);
    assert_eq!(yc, batch.rewards);
}

fn random_gradients(meta: &MetaParams, rng: &mut ChaCha8Rng) -> Gradients {
    let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    Gradients {
        dqn: draw(meta.dqn.params().len()),
        actor: draw(meta.actor.params().len()),
        critic: draw(meta.critic.params().len()),
    }
}

#[test]
fn outer_update_is_linear_in_the_task_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let meta = MetaParams::init(2, &[4], &mut rng).unwrap();
    let beta = StepSizes { dqn: 0.1, critic: 0.2, actor: 0.3 };
    let g = random_gradients(&meta, &mut rng);
    let once = outer_update(&meta, std::slice::from_ref(&g), beta).unwrap();
    for j in [2, 4, 7] {
        let many = outer_update(&meta, &vec![g.clone(); j], beta).unwrap();
        for (a, b) in many.dqn.params().iter().zip(once.dqn.params()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let h = random_gradients(&meta, &mut rng);
    let mean = mean_gradients(&meta, &[g.clone(), h.clone()]).unwrap();
    for k in 0..g.actor.len() {
        assert!((mean.actor[k] - 0.5 * (g.actor[k] + h.actor[k])).abs() < 1e-12);
    }
    let step = outer_update(&meta, &[g.clone(), h.clone()], beta).unwrap();
    for k in 0..g.critic.len() {
        let expect = meta.critic.params()[k] - beta.critic * mean.critic[k];
        assert!((step.critic.params()[k] - expect).abs() < 1e-12);
    }
}

#[test]
fn fine_tuning_copies_the_meta_initialization() {
    let env = small_env();
    let hp = small_hp(10);
    let meta = MetaParams::init(2, &hp.hidden, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let before = meta.clone();
    let cfg = MetaConfig::default();

    let (zero_shot, _) = fine_tune(&meta, &env, 0.37, 0, &hp, &cfg, 1).unwrap();
    assert_eq!(zero_shot.dqn, meta.dqn);
    assert_eq!(zero_shot.dqn_target, meta.dqn);
    assert_eq!(zero_shot.actor_target, meta.actor);
    assert_eq!(zero_shot.critic, meta.critic);
    assert_eq!(zero_shot.zeta, 0.37);

    let (tuned, curve) = fine_tune(&meta, &env, 0.37, 5, &hp, &cfg, 1).unwrap();
    assert_eq!(meta, before);
    assert_eq!(curve.rewards.len(), 5);
    assert_ne!(tuned.actor, meta.actor);
}

#[test]
fn meta_training_is_deterministic_and_moves_the_initialization() {
    let env = small_env();
    let hp = small_hp(10);
    let cfg = MetaConfig { iterations: 2, inner_steps: 2, ..MetaConfig::default() };
    let (a, ha) = meta_train(&env, &hp, &cfg, 8).unwrap();
    let (b, hb) = meta_train(&env, &hp, &cfg, 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(ha.zetas.len(), 2);
    assert!(ha.zetas.iter().flatten().all(|z| (0.0..=1.0).contains(z)));
    let init = MetaParams::init(2, &hp.hidden, &mut stream_rng(8, stream::INIT)).unwrap();
    assert_ne!(a.dqn, init.dqn);
}

#[test]
fn continued_training_extends_the_curve() {
    let env = small_env();
    let hp = small_hp(3);
    let (p, _) = train_hybrid(&env, 0.5, &hp, 1).unwrap();
    let (_, curve) = continue_training(p, &env, &hp, 4, 2).unwrap();
    assert_eq!(curve.rewards.len(), 4);
}
