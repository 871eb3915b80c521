"""Independent reference implementations used only by the tests.

Everything here is written as plain loops over scalars or Python lists so it
shares no code path with the vectorised package implementation.
"""

from __future__ import annotations

import math

import numpy as np


def sigmoid_scalar(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def activation_scalar(name: str, z: float) -> float:
    if name == "linear":
        return z
    if name == "tanh":
        return math.tanh(z)
    if name == "sigmoid":
        return sigmoid_scalar(z)
    if name == "elu":
        return z if z > 0 else math.expm1(z)
    raise ValueError(name)


def dense_loop(W, b, x, activation="linear"):
    out = []
    for r in range(len(b)):
        s = b[r]
        for c in range(len(x)):
            s += W[r][c] * x[c]
        out.append(activation_scalar(activation, s))
    return np.array(out)


def lstm_step_loop(W, U, b, x, h, c):
    """Forget-gate LSTM step with gate blocks (i, f, g, o) stacked in W, U, b."""
    H = len(h)
    pre = []
    for r in range(4 * H):
        s = b[r]
        for j in range(len(x)):
            s += W[r][j] * x[j]
        for j in range(H):
            s += U[r][j] * h[j]
        pre.append(s)
    h_new, c_new = [], []
    for j in range(H):
        i = sigmoid_scalar(pre[j])
        f = sigmoid_scalar(pre[H + j])
        g = math.tanh(pre[2 * H + j])
        o = sigmoid_scalar(pre[3 * H + j])
        cj = f * c[j] + i * g
        c_new.append(cj)
        h_new.append(o * math.tanh(cj))
    return np.array(h_new), np.array(c_new)


def base_tensor_loop(U_N, n_inst, n_t, K, params=None):
    N = U_N.shape[0]
    T, L = [], []
    for beta in range(n_inst):
        for alpha in range(n_t - K):
            T.append([[U_N[j, beta * n_t + alpha + k] for k in range(K)] for j in range(N)])
            if params is not None:
                L.append([[params[r, beta * n_t + alpha + k] for k in range(K)] for r in range(params.shape[0])])
    return np.array(T), (np.array(L) if params is not None else None)


def prev_horizon_loop(T, p, k):
    P = [[[T[i][j][s] for s in range(p)] for j in range(len(T[i]))] for i in range(len(T))]
    H = [[[T[i][j][p + s] for s in range(k)] for j in range(len(T[i]))] for i in range(len(T))]
    return np.array(P), np.array(H)


def eps_rel_loop(U, Ut, n_inst, n_t):
    total = 0.0
    for i in range(n_inst):
        num = den = 0.0
        for k in range(n_t):
            for r in range(U.shape[0]):
                d = U[r, i * n_t + k] - Ut[r, i * n_t + k]
                num += d * d
                den += U[r, i * n_t + k] ** 2
        total += math.sqrt(num) / math.sqrt(den)
    return total / n_inst


def eps_k_loop(U, Ut, n_inst, n_t):
    out = np.empty_like(U)
    for i in range(n_inst):
        s = 0.0
        for k in range(n_t):
            for r in range(U.shape[0]):
                s += U[r, i * n_t + k] ** 2
        den = math.sqrt(s / n_t)
        for k in range(n_t):
            for r in range(U.shape[0]):
                out[r, i * n_t + k] = abs(U[r, i * n_t + k] - Ut[r, i * n_t + k]) / den
    return out


def bootstrap_loop(samples, level, n_resamples, seed):
    """One ``integers`` draw per resample, sorted-order percentile by linear interpolation."""
    rng = np.random.default_rng(seed)
    x = list(np.asarray(samples, dtype=np.float64).ravel())
    n = len(x)
    means = []
    for _ in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        means.append(math.fsum(x[j] for j in idx) / n)
    means.sort()

    def q(p):
        pos = p * (len(means) - 1)
        lo = math.floor(pos)
        hi = min(lo + 1, len(means) - 1)
        return means[lo] + (pos - lo) * (means[hi] - means[lo])

    a = (1 - level) / 2
    return q(a), q(1 - a)


def rollout_simulator(seed_steps, forecast_fn, n_ext, k):
    """Sliding-window list simulation; returns emitted steps and the encoder windows seen."""
    history = [np.array(s) for s in seed_steps]
    p = len(history)
    windows, emitted = [], []
    for _ in range(n_ext):
        window = np.array(history[-p:])
        windows.append(window)
        fc = forecast_fn(window)
        assert len(fc) == k
        for step in fc:
            history.append(np.array(step))
            emitted.append(np.array(step))
    return np.array(emitted), windows


def rk4(f, u0, t_end, dt, sample_times):
    """Fixed-step classical Runge-Kutta, returning states at ``sample_times``."""
    u = np.array(u0, dtype=np.float64)
    t = 0.0
    out = {}
    targets = sorted(sample_times)
    j = 0
    n_steps = int(round(t_end / dt))
    if targets and abs(targets[0]) < 1e-14:
        out[0] = u.copy()
        j = 1
    for s in range(1, n_steps + 1):
        k1 = f(t, u)
        k2 = f(t + dt / 2, u + dt / 2 * k1)
        k3 = f(t + dt / 2, u + dt / 2 * k2)
        k4 = f(t + dt, u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = s * dt
        while j < len(targets) and abs(t - targets[j]) < dt / 2:
            out[j] = u.copy()
            j += 1
    return np.array([out[i] for i in range(len(targets))]).T


def adam_scalar(theta, grads, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        theta = theta - lr * mh / (math.sqrt(vh) + eps)
    return theta


def central_difference(loss_fn, params, h=1e-6):
    """Finite-difference gradients of ``loss_fn()`` with respect to every entry of ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p.value)
        flat = g.reshape(-1)
        for idx in range(p.value.size):
            orig = p.value.copy()
            plus = orig.copy().reshape(-1)
            plus[idx] += h
            p.value = plus.reshape(orig.shape)
            fp = loss_fn()
            minus = orig.copy().reshape(-1)
            minus[idx] -= h
            p.value = minus.reshape(orig.shape)
            fm = loss_fn()
            p.value = orig
            flat[idx] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def relative_gradient_error(analytic, numeric) -> float:
    """Worst per-tensor ``||a - n|| / max(||a||, ||n||)``; zero tensors compare absolutely."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = max(np.linalg.norm(a), np.linalg.norm(n))
        err = np.linalg.norm(a - n)
        worst = max(worst, err / scale if scale > 1e-12 else err)
    return worst
