import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mocco.agent import Agent, AgentConfig, OUState, canonical_mode, ou_step
from mocco.envs import PendulumSwingup, PointMass2D
from mocco.numcore import MLPParams, NumericError, adam_step, mlp_backward, mlp_forward
from mocco.oracles import ou_stationary_variance

SMALL = dict(hidden=(16, 16), ensemble_hidden=(16, 16), batch_size=8)


def make(kind="td3", spec=PointMass2D.spec, seed=0, **kw):
    return Agent(kind, spec, AgentConfig(**{**SMALL, **kw}), seed=seed)


def batch(spec=PointMass2D.spec, n=8, seed=0, done=0.0):
    rng = np.random.default_rng(seed)
    return {
        "state": rng.normal(size=(n, spec.obs_dim)),
        "action": rng.uniform(-1, 1, (n, spec.action_dim)),
        "reward": rng.normal(size=n),
        "next_state": rng.normal(size=(n, spec.obs_dim)),
        "done": np.full(n, done),
    }


def snapshot(agent):
    n = agent.nets
    out = {"actor": n.actor.data.copy(), "actor_target": n.actor_target.data.copy(),
           "critics": [c.data.copy() for c in n.critics], "critic_targets": [c.data.copy() for c in n.critic_targets]}
    if agent.controller is not None:
        out["ensemble"] = [m.data.copy() for m in agent.controller.members]
    return out


def linear_net(w, b=0.0):
    w = np.asarray(w, float)
    return MLPParams((w.size, 1), [w.reshape(-1, 1)], [np.array([b])])


class TestConfig:
    def test_aliases(self):
        assert [canonical_mode(m) for m in ("no_expl", "normal", "OU", "ge")] == ["none", "gaussian", "ou", "guided"]

    @pytest.mark.parametrize("bad", [dict(gamma=1.5), dict(tau=0.0), dict(beta=-1.0), dict(exploration_mode="levy"),
                                     dict(policy_delay=0)])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            AgentConfig(**bad)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Agent("sac", PointMass2D.spec)

    def test_critic_counts(self):
        assert len(make("td3").nets.critics) == 2 and make("td3").controller is None
        m = make("mocco")
        assert len(m.nets.critics) == 1 and m.controller.n == 3


class TestActing:
    def test_none_is_base(self):
        ag = make(exploration_mode="none")
        s = np.array([0.1, -0.1, 0.0, 0.2])
        a, corr = ag.select_action_train(s, np.random.default_rng(0))
        assert np.array_equal(a, ag.base_action(s)) and corr is None
        assert np.array_equal(ag.select_action_eval(s), a)

    def test_zero_sigma_gaussian(self):
        ag = make(exploration_mode="gaussian", gaussian_sigma=0.0)
        s = np.ones(4) * 0.3
        assert np.array_equal(ag.select_action_train(s, np.random.default_rng(0))[0], ag.base_action(s))

    def test_guided_identical_members(self):
        ag = make(exploration_mode="guided")
        for m in ag.controller.members[1:]:
            m.data[:] = ag.controller.members[0].data
        s = np.array([0.1, 0.2, 0.0, 0.0])
        a, corr = ag.select_action_train(s, np.random.default_rng(0))
        assert np.array_equal(a, ag.base_action(s)) and not np.any(corr.a_e)

    def test_eval_deterministic(self):
        ag = make()
        s = np.random.default_rng(1).normal(size=4)
        assert np.array_equal(ag.select_action_eval(s), ag.select_action_eval(s))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 1000), mode=st.sampled_from(["none", "gaussian", "ou", "guided"]),
           scale=st.floats(0.0, 100.0))
    def test_actions_in_bounds(self, seed, mode, scale):
        ag = make("mocco", seed=seed, exploration_mode=mode, gaussian_sigma=5.0, ou_sigma=3.0)
        rng = np.random.default_rng(seed)
        for _ in range(10):
            s = rng.normal(size=4) * scale
            for a in (ag.select_action_train(s, rng)[0], ag.select_action_eval(s)):
                assert np.all(a >= -1) and np.all(a <= 1)


class TestOU:
    def test_decay(self):
        ou = OUState(np.array([1.0]), theta=0.15, sigma=0.0)
        assert ou_step(ou, np.random.default_rng(0))[0] == pytest.approx(0.85, abs=1e-15)

    def test_fixed_point(self):
        ou = OUState(np.zeros(2), sigma=0.0)
        for _ in range(10):
            ou_step(ou, np.random.default_rng(0))
        assert not np.any(ou.x)

    def test_stationary_variance(self):
        ou = OUState(np.zeros(1), theta=0.15, sigma=0.2)
        rng = np.random.default_rng(0)
        xs = np.empty(1_000_000)
        for i in range(xs.size):
            xs[i] = ou_step(ou, rng)[0]
        target = ou_stationary_variance(0.15, 0.2)
        assert abs(xs[1000:].var() - target) <= 0.1 * target

    def test_reset_on_episode(self):
        ag = make(exploration_mode="ou")
        ag.select_action_train(np.zeros(4), np.random.default_rng(0))
        ag.reset_episode()
        assert not np.any(ag.ou.x)


class TestCritic:
    def test_done_target_is_reward(self):
        ag = make()
        b = batch(done=1.0)
        assert np.array_equal(ag._td_target(b, np.random.default_rng(0)), b["reward"])

    def test_gamma_zero_target_is_reward(self):
        ag = make(gamma=0.0)
        b = batch()
        assert np.array_equal(ag._td_target(b, np.random.default_rng(0)), b["reward"])

    def test_twin_min(self):
        ag = make()
        ag.nets.critic_targets[1] = ag.nets.critic_targets[0].copy()
        b = batch()
        y = ag._td_target(b, np.random.default_rng(0))
        ag.nets.critic_targets[1].biases[-1][0] += 10.0
        assert np.array_equal(ag._td_target(b, np.random.default_rng(0)), y)
        ag.nets.critic_targets[1].biases[-1][0] -= 20.0
        assert np.all(ag._td_target(b, np.random.default_rng(0)) < y)

    def test_nonfinite_target(self):
        ag = make()
        b = batch()
        b["reward"][0] = np.nan
        with pytest.raises(NumericError):
            ag.td3_critic_update(b, np.random.default_rng(0))

    def test_beta_zero_reduction(self):
        ag = make("mocco", beta=0.0)
        ref_critic = ag.nets.critics[0].copy()
        ref_opt = type(ag.nets.critic_opts[0]).for_params(ref_critic, ag.config.learning_rate)
        b = batch(seed=3)
        ag.mocco_critic_update(b, np.random.default_rng(42))

        # single-critic TD step written against numcore directly
        rng = np.random.default_rng(42)
        a2 = mlp_forward(ag.nets.actor_target, b["next_state"], ag.head)
        noise = np.clip(rng.normal(0.0, 1.0, a2.shape) * 0.2, -0.5, 0.5)
        a2 = np.clip(a2 + noise, -1, 1)
        q2 = mlp_forward(ag.nets.critic_targets[0], np.hstack([b["next_state"], a2]))[:, 0]
        y = b["reward"] + 0.99 * (1 - b["done"]) * q2
        x = np.hstack([b["state"], b["action"]])
        q, bundle = mlp_backward(ref_critic, x, np.zeros((8, 1)))
        err = q[:, 0] - y
        _, bundle = mlp_backward(ref_critic, x, (2 / 8) * err[:, None])
        adam_step(ref_critic, ref_opt, bundle.by_parameter)
        assert np.max(np.abs(ag.nets.critics[0].data - ref_critic.data)) <= 1e-12

    def test_beta_zero_loss_is_td_loss(self):
        a1, a2 = make("mocco", beta=0.0), make("mocco", beta=0.0)
        for m in a2.controller.members:
            m.biases[-1][0] += 100.0
        b = batch()
        assert a1.mocco_critic_update(b, np.random.default_rng(0)) == a2.mocco_critic_update(b, np.random.default_rng(0))

    def test_constant_targets_minimizer(self):
        c = 2.5
        ag = make("mocco", gamma=0.0, beta=0.1, learning_rate=0.05)
        for m in ag.controller.members:
            m.data[:] = 0.0
            m.biases[-1][0] = c
        ag.nets.critics[0] = linear_net(np.zeros(6))
        ag.nets.critic_opts[0] = type(ag.nets.critic_opts[0]).for_params(ag.nets.critics[0], 0.05)
        b = batch()
        b["reward"][:] = c
        for _ in range(2000):
            ag.mocco_critic_update(b, np.random.default_rng(0))
        x = np.hstack([b["state"], b["action"]])
        assert np.allclose(mlp_forward(ag.nets.critics[0], x)[:, 0], c, atol=1e-3)

    def test_critic_update_leaves_actor(self):
        for kind in ("td3", "mocco"):
            ag = make(kind)
            before = snapshot(ag)
            ag.critic_update(batch(), np.random.default_rng(0))
            after = snapshot(ag)
            assert np.array_equal(before["actor"], after["actor"])
            assert np.array_equal(before["actor_target"], after["actor_target"])
            assert not np.array_equal(before["critics"][0], after["critics"][0])
            if kind == "mocco":
                assert all(np.array_equal(x, y) for x, y in zip(before["ensemble"], after["ensemble"]))


class TestActor:
    def test_leaves_critics_and_ensemble(self):
        ag = make("mocco")
        before = snapshot(ag)
        ag.actor_update(batch())
        after = snapshot(ag)
        assert all(np.array_equal(x, y) for x, y in zip(before["critics"], after["critics"]))
        assert all(np.array_equal(x, y) for x, y in zip(before["ensemble"], after["ensemble"]))
        assert not np.array_equal(before["actor"], after["actor"])

    def test_constant_critic_no_gradient(self):
        ag = make()
        ag.nets.critics[0] = linear_net(np.r_[np.ones(4), 0.0, 0.0])
        before = ag.nets.actor.data.copy()
        ag.actor_update(batch())
        assert np.array_equal(ag.nets.actor.data, before)

    def test_linear_critic_direction(self):
        w = np.array([0.7, -0.3])
        ag = make()
        ag.nets.critics[0] = linear_net(np.r_[np.zeros(4), w])
        ag.nets.actor.weights[-1][:] = 0.0
        ag.nets.actor.biases[-1][:] = 0.0  # tanh'(0) = 1: pre-activation gradient equals the action gradient
        b = batch()
        ag.actor_update(b)
        step = ag.nets.actor.biases[-1]
        assert np.allclose(step / 3e-4, np.sign(w), rtol=1e-6)

    def test_reported_loss(self):
        ag = make()
        b = batch()
        a = mlp_forward(ag.nets.actor, b["state"], ag.head)
        expected = -np.mean(mlp_forward(ag.nets.critics[0], np.hstack([b["state"], a]))[:, 0])
        assert ag.actor_update(b) == pytest.approx(expected, rel=1e-12)


class TestSoftUpdate:
    def _perturbed(self):
        ag = make()
        for p in [ag.nets.actor, *ag.nets.critics]:
            p.data += 1.0
        return ag

    def test_tau_one(self):
        ag = self._perturbed()
        ag.target_soft_update(1.0)
        assert np.array_equal(ag.nets.actor_target.data, ag.nets.actor.data)
        assert all(np.array_equal(t.data, c.data) for t, c in zip(ag.nets.critic_targets, ag.nets.critics))

    def test_tau_zero(self):
        ag = self._perturbed()
        before = snapshot(ag)
        ag.target_soft_update(0.0)
        assert np.array_equal(before["actor_target"], ag.nets.actor_target.data)

    def test_half(self):
        ag = make()
        ag.nets.actor.data[:] = 2.0
        ag.nets.actor_target.data[:] = 0.0
        ag.target_soft_update(0.5)
        assert np.all(ag.nets.actor_target.data == 1.0)

    def test_geometric(self):
        ag = self._perturbed()
        gap0 = np.linalg.norm(ag.nets.critic_targets[1].data - ag.nets.critics[1].data)
        for _ in range(100):
            ag.target_soft_update()
        gap = np.linalg.norm(ag.nets.critic_targets[1].data - ag.nets.critics[1].data)
        assert gap == pytest.approx(0.995**100 * gap0, rel=1e-9)


def test_pendulum_agent_shapes():
    ag = make("mocco", spec=PendulumSwingup.spec, exploration_mode="guided")
    a, corr = ag.select_action_train(np.array([-1.0, 0.0, 0.0]), np.random.default_rng(0))
    assert a.shape == (1,) and corr.a_e.shape == (1,)
    assert ag.scaling.epsilon == 0.5
