"""Innovation-based adaptation of the measurement noise covariance.

Two independent two-input ANFIS networks (one per measurement channel) map the
degree of mismatch between theoretical and empirical innovation covariance,
and its first difference, to an additive correction of the matching diagonal
entry of R.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

N_TERMS = 5  # L, LM, Z, HM, H
N_RULES = N_TERMS * N_TERMS


class DegenerateActivation(ArithmeticError):
    """Every rule fired with zero strength, so the normalisation layer is undefined."""


def rule_labels() -> np.ndarray:
    """Singleton label index (1..7) for each of the 25 rules, row-major by (DOM term, dDOM term)."""
    j1, j2 = np.divmod(np.arange(N_RULES), N_TERMS)
    return np.clip(8 - j1 - j2, 1, 7)


@dataclass(frozen=True, eq=False)
class AnfisNet:
    mf_mean: np.ndarray      # (2, 5): row 0 = DOM, row 1 = dDOM
    mf_width: np.ndarray     # (2, 5)
    consequents: np.ndarray  # (25,)
    learning_rate: float = 1e-4

    def __post_init__(self):
        if np.any(np.asarray(self.mf_width) <= 0):
            raise ValueError("membership widths must be positive")
        if np.shape(self.consequents) != (N_RULES,):
            raise ValueError("expected 25 rule consequents")

    @classmethod
    def default(cls, d_max: float, kappa: float, learning_rate: float = 1e-4,
                dd_max: float | None = None) -> "AnfisNet":
        """Evenly spaced MFs on ``[-d_max, d_max]`` and consequents ``(label - 4) * kappa``.

        Label S1 (strongest decrease) maps to ``-3 kappa`` and S7 to ``+3 kappa``.
        """
        dd_max = d_max if dd_max is None else dd_max
        centers = np.stack([np.linspace(-d_max, d_max, N_TERMS), np.linspace(-dd_max, dd_max, N_TERMS)])
        widths = np.stack([np.full(N_TERMS, d_max / 2), np.full(N_TERMS, dd_max / 2)])
        w = (rule_labels() - 4).astype(float) * kappa
        return cls(centers, widths, w, learning_rate)


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    inputs: np.ndarray      # (2,)
    membership: np.ndarray  # (2, 5) layer 2
    firing: np.ndarray      # (25,) layer 3
    normalized: np.ndarray  # (25,) layer 4
    output: float           # layer 5


def anfis_forward(net: AnfisNet, dom: float, ddom: float) -> tuple[float, ForwardTrace]:
    u = np.array([dom, ddom], dtype=float)
    mu = np.exp(-((u[:, None] - net.mf_mean) ** 2) / net.mf_width**2)
    firing = np.outer(mu[0], mu[1]).ravel()
    total = firing.sum()
    if not total > 0.0 or not np.isfinite(total):
        raise DegenerateActivation(f"no rule fires for inputs ({dom!r}, {ddom!r})")
    norm = firing / total
    out = float(norm @ net.consequents)
    return out, ForwardTrace(u, mu, firing, norm, out)


def output_gradients(net: AnfisNet, trace: ForwardTrace):
    """Partial derivatives of the network output w.r.t. (centers, widths, consequents)."""
    total = trace.firing.sum()
    # d out / d firing_l
    d_f = ((net.consequents - trace.output) / total).reshape(N_TERMS, N_TERMS)
    mu = trace.membership
    d_mu = np.stack([d_f @ mu[1], d_f.T @ mu[0]])
    diff = trace.inputs[:, None] - net.mf_mean
    d_mean = d_mu * mu * 2.0 * diff / net.mf_width**2
    d_width = d_mu * mu * 2.0 * diff**2 / net.mf_width**3
    return d_mean, d_width, trace.normalized.copy()


def anfis_train_step(net: AnfisNet, dom: float, ddom: float, error: float,
                     min_width: float = 1e-6) -> AnfisNet:
    """One steepest-descent step on ``E = e^2 / 2`` with ``dE/dW = -e * d(out)/dW``.

    A degenerate activation leaves the network unchanged.
    """
    if error == 0.0:
        return net
    try:
        _, trace = anfis_forward(net, dom, ddom)
    except DegenerateActivation:
        return net
    d_mean, d_width, d_w = output_gradients(net, trace)
    step = net.learning_rate * error
    return replace(
        net,
        mf_mean=net.mf_mean + step * d_mean,
        mf_width=np.maximum(net.mf_width + step * d_width, min_width),
        consequents=net.consequents + step * d_w,
    )


@dataclass(frozen=True)
class DomPair:
    dom: np.ndarray   # diag(S - C)
    ddom: np.ndarray  # dom - dom_prev


def actual_innovation_cov(window) -> np.ndarray:
    """Mean outer product of the innovations in the window."""
    r = np.asarray(window, dtype=float).reshape(-1, 2)
    if r.shape[0] == 0:
        raise ValueError("innovation window is empty")
    return r.T @ r / r.shape[0]


def compute_dom(s_theoretical, c_actual, dom_prev) -> DomPair:
    dom = np.diag(np.asarray(s_theoretical, dtype=float) - np.asarray(c_actual, dtype=float)).copy()
    return DomPair(dom, dom - np.asarray(dom_prev, dtype=float))


@dataclass(frozen=True)
class AnfisConfig:
    window: int = 15
    learning_rate: float = 1e-4
    r_floor: tuple[float, float] = (1e-6, 1e-8)
    kappa_fraction: float = 0.02
    # MF half-range per channel; None -> twice the initial R diagonal
    d_max: tuple[float, float] | None = None
    train: bool = True
    # innovations whose normalised squared value exceeds this are kept out of the window
    # (99% point of chi-square with 2 dof); None disables the gate
    nis_gate: float | None = 9.21


@dataclass(eq=False)
class AdaptiveR:
    nets: tuple[AnfisNet, AnfisNet]
    r_current: np.ndarray
    r_floor: tuple[float, float]
    window: deque = field(default_factory=lambda: deque(maxlen=15))
    dom_prev: np.ndarray = field(default_factory=lambda: np.zeros(2))
    train: bool = True
    last: DomPair | None = None
    last_delta: np.ndarray = field(default_factory=lambda: np.zeros(2))
    nis_gate: float | None = None
    gated: int = 0

    @classmethod
    def create(cls, r_initial, cfg: AnfisConfig = AnfisConfig()) -> "AdaptiveR":
        r0 = np.diag(np.diag(np.asarray(r_initial, dtype=float)))
        d_max = cfg.d_max if cfg.d_max is not None else tuple(2.0 * np.diag(r0))
        nets = tuple(AnfisNet.default(d_max[i], cfg.kappa_fraction * r0[i, i], cfg.learning_rate)
                     for i in range(2))
        return cls(nets, r0, tuple(cfg.r_floor), deque(maxlen=cfg.window), train=cfg.train,
                   nis_gate=cfg.nis_gate)

    def copy(self) -> "AdaptiveR":
        return replace(self, window=deque(self.window, maxlen=self.window.maxlen),
                       r_current=self.r_current.copy(), dom_prev=self.dom_prev.copy(),
                       last_delta=self.last_delta.copy())


def adapt_r(state: AdaptiveR, innovation, s_theoretical) -> AdaptiveR:
    """Push innovation(s) into the window and, once it is full, adjust the diagonal of R.

    ``innovation`` may be a single 2-vector or a ``(k, 2)`` stack from one scan; a stack of
    theoretical covariances ``(k, 2, 2)`` is averaged into one ``S``.
    """
    new = state.copy()
    nu = np.asarray(innovation, dtype=float).reshape(-1, 2)
    s = np.asarray(s_theoretical, dtype=float).reshape(-1, 2, 2)
    if new.nis_gate is not None:
        nis = np.einsum("ki,kij,kj->k", nu, np.linalg.inv(s), nu)
        keep = nis <= new.nis_gate
        new.gated += int(np.count_nonzero(~keep))
        if not np.any(keep):
            return new
        nu = nu[keep]
        s = s[keep] if s.shape[0] == keep.shape[0] else s
    for r in nu:
        new.window.append(r)
    if len(new.window) < new.window.maxlen:
        return new

    s = s.mean(axis=0)
    pair = compute_dom(s, actual_innovation_cov(new.window), new.dom_prev)
    nets = list(new.nets)
    delta = np.zeros(2)
    for i in range(2):
        net = nets[i]
        # saturate at the outermost MF centres, as shoulder terms would
        dom_i = float(np.clip(pair.dom[i], net.mf_mean[0].min(), net.mf_mean[0].max()))
        ddom_i = float(np.clip(pair.ddom[i], net.mf_mean[1].min(), net.mf_mean[1].max()))
        delta[i], _ = anfis_forward(net, dom_i, ddom_i)
        new.r_current[i, i] = max(new.r_floor[i], new.r_current[i, i] + delta[i])
        if new.train:
            # error drives R toward C: positive dom means R is too large; the clipped
            # value keeps a single outlier scan from blowing up the parameters
            nets[i] = anfis_train_step(net, dom_i, ddom_i, -dom_i)
    if not np.all(np.isfinite(new.r_current)):
        raise FloatingPointError("adapted R became non-finite")
    new.nets = tuple(nets)
    new.dom_prev = pair.dom
    new.last = pair
    new.last_delta = delta
    return new
