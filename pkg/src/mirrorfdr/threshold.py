"""Covariate-dependent rejection threshold learned under an FDP constraint.

A small tanh MLP maps a scaled covariate vector to a threshold t(x) in (0,1)
through a final logistic sigmoid. Hypothesis i is rejected when p_i < t(X_i).
Training maximizes a sigmoid-relaxed rejection count R_sigma subject to the
mirror-estimated false-discovery proportion staying below alpha, via the
augmented Lagrangian

    L = -R_sigma + lambda2 * (V_sigma - alpha R_sigma)
        + rho/2 * (V_sigma - alpha R_sigma)^2

with the multiplier updated once per epoch on the full data:
lambda2 <- max(0, lambda2 + eta * (V_sigma - alpha R_sigma)).

Training is single-threaded, full-batch, and deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for threshold training.

    lambda_sharp sets the steepness of the sigmoid relaxation on the p-scale;
    too small and the relaxed counts drift far from the indicator counts, too
    large and gradients vanish. rho and eta are sized for constraint values on
    the raw-count scale (O(n)).
    """

    alpha: float = 0.1
    lambda_sharp: float = 200.0
    lambda2_init: float = 0.0
    rho: float = 0.01
    eta: float = 0.001
    epochs: int = 500
    pretrain_epochs: int = 200
    learning_rate: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValidationError("alpha must lie in [0, 1)")
        for name in ("lambda_sharp", "rho", "eta", "learning_rate"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.lambda2_init < 0:
            raise ValidationError("lambda2_init must be >= 0")
        if self.epochs < 0 or self.pretrain_epochs < 0:
            raise ValidationError("epoch counts must be >= 0")


@dataclass(frozen=True)
class RejectionResult:
    """Indicator-count rejections for a trained threshold."""

    rejected: np.ndarray
    R: int
    V_hat: int
    FDP_hat: float
    threshold_at: np.ndarray


@dataclass
class TrainingTrace:
    """Per-epoch record of (epoch, R_sigma, V_sigma, FDP_sigma, lambda2, loss)."""

    rows: list = field(default_factory=list)
    pretrain_mse: float | None = None

    def append(self, epoch, r_sigma, v_sigma, fdp_sigma, lambda2, loss):
        self.rows.append((epoch, r_sigma, v_sigma, fdp_sigma, lambda2, loss))


class ThresholdNet:
    """Feed-forward threshold network: tanh hidden layers, sigmoid output.

    depth counts affine layers; depth=2 with one hidden layer of width
    hidden_dim is the default for one-dimensional covariates. Parameters are
    initialized uniformly in +-1/sqrt(fan_in) from the given seed.
    """

    def __init__(self, input_dim: int, hidden_dim: int = 32, depth: int = 2,
                 seed: int = 0):
        if input_dim < 1 or hidden_dim < 1 or depth < 1:
            raise ValidationError("network dimensions must be >= 1")
        rng = np.random.default_rng(seed)
        dims = [input_dim] + [hidden_dim] * (depth - 1) + [1]
        self.input_dim = input_dim
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, fan_out))

    @classmethod
    def for_dimension(cls, d: int, hidden_dim: int = 32, seed: int = 0) -> "ThresholdNet":
        """Default architecture: two affine layers for d=1, three for d>=2."""
        return cls(d, hidden_dim=hidden_dim, depth=2 if d == 1 else 3, seed=seed)

    def parameters(self) -> list:
        return self.weights + self.biases

    def copy(self) -> "ThresholdNet":
        out = ThresholdNet.__new__(ThresholdNet)
        out.input_dim = self.input_dim
        out.weights = [w.copy() for w in self.weights]
        out.biases = [b.copy() for b in self.biases]
        return out

    def _forward_full(self, X: np.ndarray):
        """Forward pass keeping layer activations for backprop."""
        activations = [X]
        a = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w + b)
            activations.append(a)
        z_out = a @ self.weights[-1] + self.biases[-1]
        t = expit(z_out[:, 0])
        return t, activations

    def forward(self, x) -> np.ndarray | float:
        """Threshold t(x) in (0,1); accepts one vector or a batch."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValidationError(
                f"input dimension {x.shape} does not match network ({self.input_dim})")
        t, _ = self._forward_full(X)
        return float(t[0]) if single else t

    def _grads_from_dt(self, d_t: np.ndarray, activations: list, t: np.ndarray):
        """Backpropagate dL/dt through the sigmoid output and tanh stack."""
        dz = (d_t * t * (1.0 - t))[:, None]
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for k in range(len(self.weights) - 1, -1, -1):
            grads_w[k] = activations[k].T @ dz
            grads_b[k] = dz.sum(axis=0)
            if k > 0:
                dz = (dz @ self.weights[k].T) * (1.0 - activations[k] ** 2)
        return grads_w + grads_b


class _Adam:
    """Standard Adam on a list of parameter arrays (updates in place)."""

    def __init__(self, params: list, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list, grads: list):
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def surrogate_counts(net: ThresholdNet, X: np.ndarray, p: np.ndarray,
                     lambda_sharp: float):
    """Sigmoid-relaxed rejection and false-rejection counts (R_s, V_s, FDP_s).

    R_s sums sigma(lambda (t(X_i) - p_i)); V_s sums
    sigma(lambda (p_i - (1 - t(X_i)))). R_s is strictly positive, so the
    relaxed FDP is always defined.
    """
    p = np.asarray(p, dtype=float)
    t = net.forward(X)
    s_rej = expit(lambda_sharp * (t - p))
    s_fls = expit(lambda_sharp * (p - (1.0 - t)))
    r_sigma = float(s_rej.sum())
    v_sigma = float(s_fls.sum())
    return r_sigma, v_sigma, v_sigma / r_sigma


def augmented_loss(r_sigma: float, v_sigma: float, lambda2: float,
                   rho: float, alpha: float) -> float:
    """Penalized objective -R_s + lambda2*(V_s - alpha R_s) + rho/2 (...)^2."""
    c = v_sigma - alpha * r_sigma
    return -r_sigma + lambda2 * c + 0.5 * rho * c * c


def loss_and_grad(net: ThresholdNet, X: np.ndarray, p: np.ndarray,
                  lambda_sharp: float, lambda2: float, rho: float, alpha: float):
    """Loss value and analytic parameter gradients in one pass."""
    t, activations = net._forward_full(X)
    s_rej = expit(lambda_sharp * (t - p))
    s_fls = expit(lambda_sharp * (p - (1.0 - t)))
    r_sigma = float(s_rej.sum())
    v_sigma = float(s_fls.sum())
    c = v_sigma - alpha * r_sigma
    loss = -r_sigma + lambda2 * c + 0.5 * rho * c * c
    dl_dr = -1.0 - (lambda2 + rho * c) * alpha
    dl_dv = lambda2 + rho * c
    d_t = (dl_dr * lambda_sharp) * s_rej * (1.0 - s_rej) \
        + (dl_dv * lambda_sharp) * s_fls * (1.0 - s_fls)
    grads = net._grads_from_dt(d_t, activations, t)
    return loss, grads, (r_sigma, v_sigma)


def pretrain(net: ThresholdNet, X: np.ndarray, targets: np.ndarray,
             epochs: int, learning_rate: float = 1e-2) -> float:
    """Fit t(x) to per-hypothesis targets in (0,1) by full-batch MSE descent.

    Returns the final mean squared error; epochs=0 leaves the net untouched.
    """
    targets = np.asarray(targets, dtype=float)
    if np.any(targets <= 0) or np.any(targets >= 1):
        raise ValidationError("pretraining targets must lie strictly in (0, 1)")
    params = net.parameters()
    opt = _Adam(params, learning_rate)
    mse = float(np.mean((net.forward(X) - targets) ** 2))
    for epoch in range(epochs):
        t, activations = net._forward_full(X)
        residual = t - targets
        mse = float(np.mean(residual ** 2))
        if not np.isfinite(mse):
            raise NumericalError(f"pretraining diverged at epoch {epoch}")
        d_t = 2.0 * residual / t.size
        opt.step(params, net._grads_from_dt(d_t, activations, t))
    return float(np.mean((net.forward(X) - targets) ** 2)) if epochs else mse


def train(net: ThresholdNet, X: np.ndarray, p: np.ndarray,
          cfg: TrainConfig) -> TrainingTrace:
    """Full-batch augmented-Lagrangian training of the threshold network.

    Each epoch takes one Adam step on the penalized loss, then updates the
    multiplier from the fresh relaxed counts. The trace records post-step
    counts, the multiplier, and the loss for every epoch.
    """
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != p.size:
        raise ValidationError("X must be (n, d) matching p")
    trace = TrainingTrace()
    params = net.parameters()
    opt = _Adam(params, cfg.learning_rate)
    lambda2 = cfg.lambda2_init
    for epoch in range(cfg.epochs):
        _, grads, _ = loss_and_grad(
            net, X, p, cfg.lambda_sharp, lambda2, cfg.rho, cfg.alpha)
        opt.step(params, grads)
        if not all(np.isfinite(w).all() for w in params):
            raise NumericalError(
                f"training diverged at epoch {epoch} (non-finite parameters)")
        r_sigma, v_sigma, fdp_sigma = surrogate_counts(net, X, p, cfg.lambda_sharp)
        lambda2 = max(0.0, lambda2 + cfg.eta * (v_sigma - cfg.alpha * r_sigma))
        loss = augmented_loss(r_sigma, v_sigma, lambda2, cfg.rho, cfg.alpha)
        trace.append(epoch, r_sigma, v_sigma, fdp_sigma, lambda2, loss)
    return trace


def fit_threshold(X: np.ndarray, p: np.ndarray, targets: np.ndarray,
                  cfg: TrainConfig, hidden_dim: int = 32) -> tuple:
    """Pretrain + train a fresh network; returns (net, trace)."""
    X = np.asarray(X, dtype=float)
    net = ThresholdNet.for_dimension(X.shape[1], hidden_dim=hidden_dim, seed=cfg.seed)
    trace = TrainingTrace()
    trace.pretrain_mse = pretrain(net, X, targets, cfg.pretrain_epochs,
                                  cfg.learning_rate)
    trace_rows = train(net, X, p, cfg)
    trace.rows = trace_rows.rows
    return net, trace


def rejections(net: ThresholdNet, X: np.ndarray, p: np.ndarray) -> RejectionResult:
    """Indicator-count rejections: reject i when p_i < t(X_i).

    V_hat counts p_i > 1 - t(X_i), the mirror estimate of false rejections;
    FDP_hat is V_hat / R with the 0/0 case defined as 0.
    """
    p = np.asarray(p, dtype=float)
    t = net.forward(np.asarray(X, dtype=float))
    rejected = np.nonzero(p < t)[0]
    r = int(rejected.size)
    v_hat = int(np.count_nonzero(p > 1.0 - t))
    return RejectionResult(
        rejected=rejected,
        R=r,
        V_hat=v_hat,
        FDP_hat=(v_hat / r) if r > 0 else 0.0,
        threshold_at=np.asarray(t, dtype=float),
    )
