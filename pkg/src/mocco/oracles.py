"""Independent reference computations used to check the fast code paths.

Nothing here calls into the code it checks: the MLP is re-evaluated with
scalar loops, gradients come from central differences, expectations from
plain Monte-Carlo sums, and recurrences are written out by hand.
"""

from __future__ import annotations

import math

import numpy as np


def naive_forward(weights, biases, x, tanh_low=None, tanh_high=None) -> list[float]:
    """ReLU MLP evaluated with explicit triple loops over Python floats."""
    h = [float(v) for v in x]
    n = len(weights)
    for layer, (w, b) in enumerate(zip(weights, biases)):
        fan_in, fan_out = len(w), len(w[0])
        z = []
        for j in range(fan_out):
            acc = float(b[j])
            for i in range(fan_in):
                acc += h[i] * float(w[i][j])
            z.append(acc)
        h = [max(v, 0.0) for v in z] if layer < n - 1 else z
    if tanh_low is not None:
        h = [0.5 * (hi + lo) + 0.5 * (hi - lo) * math.tanh(v) for v, lo, hi in zip(h, tanh_low, tanh_high)]
    return h


def central_difference(f, x, h: float = 1e-5) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` by central differences, one coordinate at a time."""
    x = np.array(x, dtype=np.float64)
    out = np.empty_like(x)
    flat = x.reshape(-1)
    g = out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return out


def relative_error(a, b, floor: float = 1e-8) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def mc_expected_norm(low, high, samples: int = 1_000_000, seed: int = 12345) -> float:
    """E||a||_2 for a ~ U(low, high) by plain Monte Carlo."""
    rng = np.random.default_rng(seed)
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    a = rng.uniform(low, high, size=(samples, low.size))
    return float(np.sqrt((a * a).sum(axis=1)).mean())


def expected_norm_square_exact() -> float:
    """E||a|| on [-1, 1]^2 in closed form: (sqrt 2 + asinh 1) / 3."""
    return (math.sqrt(2.0) + math.asinh(1.0)) / 3.0


def adam_first_step(g: float, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> float:
    """Change in a scalar parameter after one Adam step from zero moments."""
    m = (1 - beta1) * g
    v = (1 - beta2) * g * g
    m_hat = m / (1 - beta1)
    v_hat = v / (1 - beta2)
    return -lr * m_hat / (math.sqrt(v_hat) + eps)


def discounted_returns(rewards, gamma: float) -> list[float]:
    """R_t = sum_k gamma^k r_{t+k}, summed directly (not via the recurrence)."""
    n = len(rewards)
    return [sum(gamma ** (k - t) * rewards[k] for k in range(t, n)) for t in range(n)]


def pendulum_euler(theta: float, omega: float, a: float, g=10.0, m=1.0, l=1.0, dt=0.05, max_torque=2.0):
    u = max_torque * a
    omega2 = omega + dt * (-(3 * g / (2 * l)) * math.sin(theta + math.pi) + (3.0 / (m * l * l)) * u)
    return theta + dt * omega2, omega2


def ou_stationary_variance(theta: float, sigma: float) -> float:
    """Stationary variance of x_{t+1} = (1 - theta) x_t + sigma * eps (an AR(1) process)."""
    return sigma**2 / (2 * theta - theta**2)


def population_variance(values) -> float:
    values = [float(v) for v in values]
    mu = sum(values) / len(values)
    return sum((v - mu) ** 2 for v in values) / len(values)


def lattice_argmax(fn, low, high, resolution: int) -> tuple[float, float]:
    """Brute-force argmax of fn(a1, a2) over the same lattice the surface dump uses."""
    best, arg = -math.inf, None
    for i in range(resolution):
        a1 = low[0] + (high[0] - low[0]) * i / (resolution - 1) if resolution > 1 else low[0]
        for j in range(resolution):
            a2 = low[1] + (high[1] - low[1]) * j / (resolution - 1) if resolution > 1 else low[1]
            v = fn(a1, a2)
            if v > best:
                best, arg = v, (a1, a2)
    return arg


def report() -> list[tuple[str, float, str]]:
    """Values of the reference computations, as (name, value, what it checks)."""
    rows = [
        ("adam_first_step(g=1, lr=3e-4)", adam_first_step(1.0, 3e-4), "first Adam step magnitude ~ lr"),
        ("E|a| on [-1,1]^2, 1e6-sample MC", mc_expected_norm([-1, -1], [1, 1]), "epsilon for 2-D boxes"),
        ("E|a| on [-1,1]^2, closed form", expected_norm_square_exact(), "epsilon for 2-D boxes"),
        ("E|a| on [-1,1], 1e6-sample MC", mc_expected_norm([-1], [1]), "epsilon for 1-D boxes (0.5)"),
    ]
    for i, r in enumerate(discounted_returns([1, 1, 1], 0.5)):
        rows.append((f"returns([1,1,1], 0.5)[{i}]", r, "MC return recurrence"))
    for i, r in enumerate(discounted_returns([0, 0, 0, 1], 0.9)):
        rows.append((f"returns([0,0,0,1], 0.9)[{i}]", r, "MC return recurrence"))
    theta, omega = pendulum_euler(math.pi, 0.0, 1.0)
    rows.append(("pendulum omega' from (pi, 0, a=1)", omega, "Euler step"))
    rows.append(("pendulum theta' - pi", theta - math.pi, "Euler step"))
    rows.append(("OU stationary variance (0.15, 0.2)", ou_stationary_variance(0.15, 0.2), "OU noise"))
    rows.append(("Var{1, 2, 3}", population_variance([1, 2, 3]), "ensemble uncertainty"))
    return rows
