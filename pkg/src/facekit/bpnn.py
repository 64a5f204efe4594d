"""Three-layer feed-forward network with sigmoid units, trained by
per-sample backpropagation gradient descent on squared error.

Training stops on an MSE goal, on validation failure (val MSE above its
running minimum for a run of epochs, restoring the minimum-epoch weights,
the same protocol as the classic curve-fitting tools), or on the epoch
cap. Everything is seeded and bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .images import round_half_up


@dataclass
class NetworkConfig:
    n_in: int
    n_hidden: int
    n_out: int
    learning_rate: float = 0.5
    max_epochs: int = 1000
    val_fail_limit: int = 6
    goal_mse: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if min(self.n_in, self.n_hidden, self.n_out) < 1:
            raise ValueError("all layer sizes must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class Network:
    """Weights and biases: hidden layer (w1, b1), output layer (w2, b2)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def copy(self) -> "Network":
        return Network(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


@dataclass
class Gradients:
    dw1: np.ndarray
    db1: np.ndarray
    dw2: np.ndarray
    db2: np.ndarray


@dataclass
class DataSplit:
    train: list[int]
    validation: list[int]
    test: list[int]
    ratios: tuple[float, float, float]


@dataclass
class TrainReport:
    """Per-epoch (train_mse, val_mse) curve plus how training ended."""

    epochs_run: int
    mse_curve: list[tuple[float, float]]
    stop_reason: str  # goal_met | val_fail | max_epochs
    final_test_mse: float


def init_network(cfg: NetworkConfig) -> Network:
    """Seeded uniform [-0.5, 0.5] initialization, drawn in w1, b1, w2, b2 order."""
    gen = np.random.Generator(np.random.PCG64(cfg.seed))
    return Network(
        w1=gen.uniform(-0.5, 0.5, (cfg.n_hidden, cfg.n_in)),
        b1=gen.uniform(-0.5, 0.5, cfg.n_hidden),
        w2=gen.uniform(-0.5, 0.5, (cfg.n_out, cfg.n_hidden)),
        b2=gen.uniform(-0.5, 0.5, cfg.n_out),
    )


def sigmoid(x):
    """Logistic function 1/(1+e^-x), scalar or elementwise.

    Evaluated on the non-growing branch (e^x/(1+e^x) for x < 0) so no
    exponent ever overflows.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        xf = float(x)
        if xf >= 0:
            return 1.0 / (1.0 + float(np.exp(-xf)))
        e = float(np.exp(xf))
        return e / (1.0 + e)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_derivative(s):
    """Derivative in terms of the sigmoid output: s * (1 - s)."""
    return s * (1.0 - s)


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Propagate one input; returns (hidden activations, output activations)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.w1.shape[1],):
        raise ValueError(f"input shape {x.shape} does not match n_in {net.w1.shape[1]}")
    hidden = sigmoid(net.w1 @ x + net.b1)
    output = sigmoid(net.w2 @ hidden + net.b2)
    return hidden, output


def backward(net: Network, x: np.ndarray, target: np.ndarray) -> Gradients:
    """Chain-rule gradients of E = 1/2 * sum((output - target)^2)."""
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (net.w2.shape[0],):
        raise ValueError(f"target shape {target.shape} does not match n_out {net.w2.shape[0]}")
    hidden, output = forward(net, x)
    delta_out = (output - target) * output * (1.0 - output)
    delta_hid = (net.w2.T @ delta_out) * hidden * (1.0 - hidden)
    return Gradients(
        dw1=np.outer(delta_hid, x),
        db1=delta_hid,
        dw2=np.outer(delta_out, hidden),
        db2=delta_out,
    )


def apply_update(net: Network, grads: Gradients, learning_rate: float) -> Network:
    """Gradient-descent step: every parameter moves by -learning_rate * grad."""
    return Network(
        w1=net.w1 - learning_rate * grads.dw1,
        b1=net.b1 - learning_rate * grads.db1,
        w2=net.w2 - learning_rate * grads.dw2,
        b2=net.b2 - learning_rate * grads.db2,
    )


def sample_error(net: Network, x: np.ndarray, target: np.ndarray) -> float:
    """The per-sample objective E = 1/2 * sum((output - target)^2)."""
    _, output = forward(net, x)
    return 0.5 * float(np.sum((output - np.asarray(target, dtype=np.float64)) ** 2))


def mse(outputs, targets) -> float:
    """Mean of squared differences over all samples and components."""
    o = np.asarray(outputs, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if o.shape != t.shape:
        raise ValueError(f"shape mismatch {o.shape} vs {t.shape}")
    return float(np.mean((o - t) ** 2))


def split_data(n: int, ratios: tuple[float, float, float], seed: int) -> DataSplit:
    """Seeded shuffle, then contiguous slices cut at round(n * cumulative ratio).

    The cut rule keeps the three parts disjoint and exhaustive for every n;
    the training slice always gets at least one sample.
    """
    r_train, r_val, r_test = ratios
    if n < 1:
        raise ValueError("n must be >= 1")
    if r_train <= 0 or r_val < 0 or r_test < 0:
        raise ValueError(f"bad ratios {ratios}")
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    gen = np.random.Generator(np.random.PCG64(seed))
    perm = gen.permutation(n)
    b1 = max(1, round_half_up(n * r_train))
    b2 = max(b1, round_half_up(n * (r_train + r_val)))
    return DataSplit(
        train=[int(i) for i in perm[:b1]],
        validation=[int(i) for i in perm[b1:b2]],
        test=[int(i) for i in perm[b2:]],
        ratios=(r_train, r_val, r_test),
    )


def _eval_mse(net: Network, X: np.ndarray, T: np.ndarray, idx: list[int]) -> float:
    if not idx:
        return float("nan")
    Xs = X[idx]
    hidden = sigmoid(net.w1 @ Xs.T + net.b1[:, None])
    output = sigmoid(net.w2 @ hidden + net.b2[:, None])
    return float(np.mean((output.T - T[idx]) ** 2))


def train(
    net: Network,
    data,
    split: DataSplit,
    cfg: NetworkConfig,
) -> tuple[Network, TrainReport]:
    """Stochastic per-sample gradient descent over the training split.

    `data` is a sequence of (input, target) pairs. Sample order is
    reshuffled every epoch from the config seed. Returns a new trained
    network (the argument is untouched) and the training report.
    """
    if not split.train:
        raise ValueError("training split is empty")
    X = np.stack([np.asarray(x, dtype=np.float64) for x, _ in data])
    T = np.stack([np.asarray(t, dtype=np.float64) for _, t in data])
    if X.shape[1] != cfg.n_in or T.shape[1] != cfg.n_out:
        raise ValueError(
            f"data is {X.shape[1]}->{T.shape[1]}, config wants {cfg.n_in}->{cfg.n_out}"
        )

    net = net.copy()
    gen = np.random.Generator(np.random.PCG64(cfg.seed))
    train_idx = np.array(split.train)

    curve: list[tuple[float, float]] = []
    stop_reason = "max_epochs"
    best_val = float("inf")
    best_net: Network | None = None
    fail_count = 0

    for _ in range(cfg.max_epochs):
        for i in train_idx[gen.permutation(len(train_idx))]:
            grads = backward(net, X[i], T[i])
            net = apply_update(net, grads, cfg.learning_rate)
        train_mse = _eval_mse(net, X, T, split.train)
        val_mse = _eval_mse(net, X, T, split.validation)
        curve.append((train_mse, val_mse))

        if train_mse <= cfg.goal_mse:
            stop_reason = "goal_met"
            break
        if split.validation:
            if val_mse <= best_val:
                best_val = val_mse
                best_net = net.copy()
                fail_count = 0
            else:
                fail_count += 1
                if fail_count >= cfg.val_fail_limit:
                    stop_reason = "val_fail"
                    net = best_net
                    break

    report = TrainReport(
        epochs_run=len(curve),
        mse_curve=curve,
        stop_reason=stop_reason,
        final_test_mse=_eval_mse(net, X, T, split.test),
    )
    return net, report
