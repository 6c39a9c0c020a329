import numpy as np
import pytest

from gridtrade.maddpg import (
    Adam,
    AgentBundle,
    Batch,
    Mlp,
    OuNoise,
    ReplayBuffer,
    ShapeError,
    act,
    critic_input,
    critic_target,
    execute_policy,
    load_actors,
    save_checkpoint,
    soft_update,
    update_actor,
    update_critic,
)
from gridtrade.maddpg.agent import actor_objective_grads
from gridtrade.maddpg.checkpoint import CheckpointError


def flat_params(net):
    return np.concatenate([p.ravel() for p in net.parameters()])


def fd_check(net, x, grad_out, eps=1e-5):
    """Largest relative error between backprop and central differences of sum(grad_out * net(x))."""
    grads, _ = net.backward(net.forward(x), grad_out)
    worst = 0.0
    for p, g in zip(net.parameters(), grads):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            up = np.sum(grad_out * net(x))
            p[i] = old - eps
            dn = np.sum(grad_out * net(x))
            p[i] = old
            num = (up - dn) / (2 * eps)
            worst = max(worst, abs(num - g[i]) / max(abs(num), abs(g[i]), 1e-6))
    return worst


def scalar_forward(net, x):
    h = list(map(float, x))
    for li, (w, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for j in range(w.shape[1]):
            z = b[j]
            for i in range(w.shape[0]):
                z += h[i] * w[i, j]
            out.append(z)
        if li < len(net.weights) - 1:
            h = [max(z, 0.0) for z in out]
        elif net.out_activation == "tanh":
            h = [float(np.tanh(z)) for z in out]
        else:
            h = out
    return np.array(h)


def test_zero_actor_outputs_zero():
    net = Mlp([3, 4, 1], "tanh")
    net.set_parameters([np.zeros_like(p) for p in net.parameters()])
    assert net(np.array([0.3, 1.0, 0.5]))[0] == 0.0


def test_one_by_one_linear_critic():
    net = Mlp([1, 1], "identity")
    net.set_parameters([np.array([[2.5]]), np.array([0.0])])
    assert net(np.array([4.0]))[0] == 10.0


def test_forward_matches_scalar_reimplementation():
    rng = np.random.default_rng(0)
    for out in ("tanh", "identity"):
        net = Mlp([5, 7, 6, 2], out, rng)
        x = rng.normal(size=5)
        assert np.allclose(net(x), scalar_forward(net, x), rtol=0, atol=1e-12)


def test_shape_error():
    with pytest.raises(ShapeError):
        Mlp([3, 4, 1])(np.zeros(4))


def test_backprop_matches_finite_differences_small_net():
    rng = np.random.default_rng(1)
    net = Mlp([3, 4, 1], "tanh", rng)
    x = rng.normal(size=(5, 3))
    assert fd_check(net, x, rng.normal(size=(5, 1))) < 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    net = Mlp([4, 8, 1], "identity", rng)
    x = rng.normal(size=4)
    _, gx = net.backward(net.forward(x), np.ones(1))
    eps = 1e-6
    num = [(net(x + eps * e)[0] - net(x - eps * e)[0]) / (2 * eps) for e in np.eye(4)]
    assert np.allclose(gx, num, atol=1e-8)


def test_zero_output_gradient_gives_zero_gradients():
    net = Mlp([3, 5, 1], "tanh", np.random.default_rng(3))
    grads, gx = net.backward(net.forward(np.ones(3)), np.zeros(1))
    assert all(np.all(g == 0) for g in grads) and np.all(gx == 0)


def test_dead_relu_passes_no_gradient():
    net = Mlp([1, 2, 1], "identity")
    net.set_parameters([np.array([[1.0, -1.0]]), np.zeros(2), np.array([[1.0], [1.0]]), np.zeros(1)])
    grads, _ = net.backward(net.forward(np.array([2.0])), np.ones(1))
    # second hidden unit is inactive for positive input
    assert grads[0][0, 1] == 0.0 and grads[2][1, 0] == 0.0
    assert grads[0][0, 0] == 2.0


def test_adam_first_step_moves_by_lr():
    p = [np.array([1.0, -1.0])]
    opt = Adam(p, lr=0.1)
    opt.step(p, [np.array([3.0, -0.5])])
    assert np.allclose(p[0], [0.9, -0.9])


def test_ou_zero_sigma_is_silent():
    nz = OuNoise(1, 0.15, 0.0, np.random.default_rng(0))
    assert all(nz.sample()[0] == 0.0 for _ in range(10))


def test_ou_stationary_statistics():
    theta, sigma, n = 0.15, 0.2, 100_000
    nz = OuNoise(1, theta, sigma, np.random.default_rng(4))
    xs = np.array([nz.sample()[0] for _ in range(n)])
    # successive samples are correlated, so the mean's spread is sigma / (theta sqrt n)
    assert abs(xs.mean()) < 3 * sigma / (theta * np.sqrt(n))
    var = sigma ** 2 / (theta * (2 - theta))
    assert xs.var() == pytest.approx(var, rel=0.1)


def test_buffer_ring_and_sampling_guard():
    buf = ReplayBuffer(3, 1)
    with pytest.raises(ValueError):
        buf.sample(1, np.random.default_rng(0))
    for i in range(5):
        buf.add(np.full((1, 3), i), [0.0], [float(i)], np.zeros((1, 3)), False)
    assert len(buf) == 3
    assert sorted(buf.rewards[:, 0]) == [2.0, 3.0, 4.0]


def test_buffer_sampling_is_uniform():
    buf = ReplayBuffer(10, 1)
    for i in range(10):
        buf.add(np.zeros((1, 3)), [0.0], [float(i)], np.zeros((1, 3)), False)
    n = 100_000
    rng = np.random.default_rng(5)
    idx = np.concatenate([buf.sample_indices(10, rng) for _ in range(n // 10)])
    counts = np.bincount(idx, minlength=10)
    sd = np.sqrt(n * 0.1 * 0.9)
    assert np.all(np.abs(counts - n / 10) < 5 * sd)


def _bundle(n_agents=1, seed=0, hidden=(8,)):
    rng = np.random.default_rng(seed)
    return [AgentBundle.create(n_agents, hidden, 1e-3, 1e-3, rng) for _ in range(n_agents)]


def _batch(rng, s=16, p=1):
    return Batch(rng.normal(size=(s, p, 3)), rng.uniform(-1, 1, (s, p)), rng.normal(size=(s, p)),
                 rng.normal(size=(s, p, 3)), (rng.uniform(size=s) < 0.2).astype(float))


def test_targets_start_equal_to_originals():
    (a,) = _bundle()
    assert np.array_equal(flat_params(a.actor), flat_params(a.target_actor))
    assert np.array_equal(flat_params(a.critic), flat_params(a.target_critic))


def test_critic_dimensions():
    agents = _bundle(3)
    assert agents[0].critic.in_dim == 12 and agents[0].actor.in_dim == 3


def test_critic_target_gamma_zero_is_reward():
    agents = _bundle()
    batch = _batch(np.random.default_rng(0))
    assert np.array_equal(critic_target(0, batch, agents, 0.0), batch.rewards[:, 0])


def test_critic_target_hand_case():
    (a,) = _bundle(hidden=(1,))
    # actor: a' = tanh(s . [1, 0, 0]); critic: Q = relu(sum(inputs)) * 2 + 0.5
    a.target_actor.set_parameters([np.array([[1.0], [0.0], [0.0]]), np.zeros(1),
                                   np.array([[1.0]]), np.zeros(1)])
    a.target_critic.set_parameters([np.ones((4, 1)), np.zeros(1), np.array([[2.0]]), np.array([0.5])])
    s2 = np.array([[[0.2, 0.4, 0.1]]])
    batch = Batch(np.zeros((1, 1, 3)), np.zeros((1, 1)), np.array([[-0.3]]), s2, np.zeros(1))
    a_next = np.tanh(0.2)
    q = 2.0 * (0.2 + 0.4 + 0.1 + a_next) + 0.5
    assert critic_target(0, batch, [a], 0.9)[0] == pytest.approx(-0.3 + 0.9 * q, abs=1e-12)
    done = Batch(batch.states, batch.actions, batch.rewards, s2, np.ones(1))
    assert critic_target(0, done, [a], 0.9)[0] == -0.3


def test_critic_target_zero_critic_gives_reward():
    (a,) = _bundle()
    a.target_critic.set_parameters([np.zeros_like(p) for p in a.target_critic.parameters()])
    batch = _batch(np.random.default_rng(1))
    assert np.array_equal(critic_target(0, batch, [a], 0.95), batch.rewards[:, 0])


def test_update_critic_exact_targets_zero_loss():
    (a,) = _bundle()
    batch = _batch(np.random.default_rng(2))
    y = a.critic(critic_input(batch.states, batch.actions))[:, 0]
    before = flat_params(a.critic)
    assert update_critic(a, batch, y) == 0.0
    assert np.array_equal(before, flat_params(a.critic))


def test_update_critic_descends():
    (a,) = _bundle(seed=3)
    a.critic_opt.lr = 1e-3
    rng = np.random.default_rng(3)
    batch = _batch(rng)
    y = rng.normal(size=16)
    losses = [update_critic(a, batch, y) for _ in range(11)]
    assert all(l2 < l1 for l1, l2 in zip(losses, losses[1:]))


def test_actor_objective_gradient_matches_finite_differences():
    agents = _bundle(2, seed=4)
    batch = _batch(np.random.default_rng(4), p=2)
    grads, _ = actor_objective_grads(1, batch, agents)
    actor = agents[1].actor
    eps = 1e-5
    for p, g in zip(actor.parameters(), grads):
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + eps
            up = actor_objective_grads(1, batch, agents)[1]
            p[i] = old - eps
            dn = actor_objective_grads(1, batch, agents)[1]
            p[i] = old
            num = (up - dn) / (2 * eps)
            assert abs(num - g[i]) <= 1e-4 * max(abs(num), abs(g[i]), 1e-6)


def test_constant_critic_leaves_actor_unchanged():
    (a,) = _bundle()
    w = a.critic.parameters()
    a.critic.set_parameters([np.zeros_like(p) for p in w[:-1]] + [np.array([1.0])])
    a.actor_opt = Adam(a.actor.parameters(), 1e-3)
    before = flat_params(a.actor)
    update_actor(0, _batch(np.random.default_rng(5)), [a])
    assert np.array_equal(before, flat_params(a.actor))


class QuadraticCritic:
    """Stand-in critic Q(s, a) = -(a - target)^2 on a one-agent input row."""

    def __init__(self, target):
        self.target = target

    def forward(self, x):
        return _QuadCache(x, -(x[:, 3:4] - self.target) ** 2)

    def backward(self, cache, grad_out):
        grad_in = np.zeros_like(cache.x)
        grad_in[:, 3] = grad_out[:, 0] * -2.0 * (cache.x[:, 3] - self.target)
        return None, grad_in


class _QuadCache:
    def __init__(self, x, output):
        self.x, self.output = x, output


def test_actor_climbs_quadratic_critic():
    (a,) = _bundle(hidden=(8,), seed=6)
    a.critic = QuadraticCritic(0.6)
    states = np.random.default_rng(6).normal(size=(32, 1, 3))
    batch = Batch(states, np.zeros((32, 1)), np.zeros((32, 1)), states, np.zeros(32))
    gaps = []
    for _ in range(1000):
        gaps.append(np.mean(np.abs(a.actor(states[:, 0, :])[:, 0] - 0.6)))
        update_actor(0, batch, [a])
    assert gaps[-1] < 0.05 < gaps[0]
    assert all(g2 <= g1 + 1e-3 for g1, g2 in zip(gaps[::100], gaps[100::100]))


@pytest.mark.parametrize("tau", [0.0, 0.5, 1.0])
def test_soft_update(tau):
    (a,) = _bundle()
    for p in a.actor.parameters():
        p[...] = 2.0
    for p in a.target_actor.parameters():
        p[...] = 0.0
    before_critic_target = flat_params(a.target_critic)
    soft_update(a, tau)
    assert np.allclose(flat_params(a.target_actor), 2.0 * tau)
    assert np.allclose(flat_params(a.target_critic), before_critic_target)  # critic equal to target


def test_tau_one_tracks_exactly():
    (a,) = _bundle()
    rng = np.random.default_rng(7)
    for _ in range(3):
        update_critic(a, _batch(rng), rng.normal(size=16))
        soft_update(a, 1.0)
        assert np.array_equal(flat_params(a.critic), flat_params(a.target_critic))


def test_act_without_noise_is_deterministic_and_bounded():
    (a,) = _bundle()
    s = np.array([0.5, 1.0, 0.3])
    assert np.array_equal(act(a, s), act(a, s))
    assert np.array_equal(act(a, s, OuNoise(1, 0.15, 0.0)), act(a, s))
    big = OuNoise(1, 0.15, 50.0, np.random.default_rng(0))
    for _ in range(20):
        assert -1.0 <= act(a, s, big)[0] <= 1.0
    assert -1.0 <= execute_policy(a.actor, s)[0] <= 1.0


def test_checkpoint_round_trip(tmp_path):
    agents = _bundle(2)
    save_checkpoint(tmp_path / "c.json", agents, ["A", "B"])
    actors = load_actors(tmp_path / "c.json")
    s = np.array([0.1, 0.2, 0.3])
    assert np.array_equal(actors["B"](s), agents[1].actor(s))


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"format": "other"}')
    with pytest.raises(CheckpointError):
        load_actors(path)
