"""Maximum causal entropy IRL over platform activity logs.

Users act through seven action types; the state is the user's cumulative
action count, and features are one-hot over the action plus one-hot over the
count bucket. Fitted per-action weights are min-max normalised and averaged
into the buyer utility coefficients ``(l, o, u)``.

Trace files are comma- or tab-separated text with one event per line::

    user_id,order,action

``order`` is any sortable per-user position (timestamp rank or similar).
For a Meta-Kaggle export the actions map as: Datasets -> DatasetCreate,
Kernels -> KernelCreate, Submissions -> Submission, ForumMessages ->
ForumPost, DatasetVotes -> DatasetVote, ForumMessageVotes -> ForumVote,
KernelVotes -> KernelVote. The dump itself is not bundled.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import read_key_values

logger = logging.getLogger(__name__)

ACTIONS = ("DatasetCreate", "KernelCreate", "Submission", "ForumPost", "DatasetVote", "ForumVote", "KernelVote")
VOTE_ACTIONS = ("DatasetVote", "ForumVote", "KernelVote")
QUALITY_ACTIONS = ("KernelCreate", "ForumPost")
PURCHASE_ACTION = "DatasetVote"


def _normalise_name(name: str) -> str:
    return "".join(ch for ch in name.lower() if ch.isalnum())


_ALIASES = {_normalise_name(a): a for a in ACTIONS}
_ALIASES.update({
    "datasetcreation": "DatasetCreate", "kernelcreation": "KernelCreate", "submissions": "Submission",
    "forumcreation": "ForumPost", "forummessage": "ForumPost", "forumpost": "ForumPost",
    "datasetvoting": "DatasetVote", "forumvoting": "ForumVote", "kernelvoting": "KernelVote",
    "forummessagevote": "ForumVote",
})


def action_index(name: str) -> int:
    try:
        return ACTIONS.index(_ALIASES[_normalise_name(name)])
    except KeyError:
        raise ValueError(f"unknown action {name!r}") from None


class NotConverged(RuntimeWarning):
    pass


@dataclass
class IrlModel:
    """Count-state MDP with one-hot action and count-bucket features.

    Internal states are cumulative counts ``0..cap`` with ``cap`` the first
    count of the last bucket; every action moves ``count -> min(count + 1, cap)``.
    """

    n_actions: int = len(ACTIONS)
    n_buckets: int = 10
    bucket_width: int = 5
    gamma: float = 0.9
    delta: float = 0.9
    epsilon: float = 1e-3
    theta: np.ndarray = None

    def __post_init__(self):
        if self.theta is None:
            self.theta = np.zeros(self.n_features)

    @property
    def cap(self) -> int:
        return self.bucket_width * (self.n_buckets - 1)

    @property
    def n_states(self) -> int:
        return self.cap + 1

    @property
    def n_features(self) -> int:
        return self.n_actions + self.n_buckets

    def bucket(self, count):
        return np.minimum(np.asarray(count) // self.bucket_width, self.n_buckets - 1)

    def state_of(self, count):
        return np.minimum(np.asarray(count), self.cap)

    def next_state(self, s):
        return np.minimum(np.asarray(s) + 1, self.cap)

    def features(self) -> np.ndarray:
        """``phi[s, a]`` as an ``(n_states, n_actions, n_features)`` array."""
        phi = np.zeros((self.n_states, self.n_actions, self.n_features))
        a = np.arange(self.n_actions)
        phi[:, a, a] = 1.0
        phi[np.arange(self.n_states), :, self.n_actions + self.bucket(np.arange(self.n_states))] = 1.0
        return phi

    def transitions(self) -> np.ndarray:
        """``P[s, a, s']``, deterministic and action-independent."""
        P = np.zeros((self.n_states, self.n_actions, self.n_states))
        s = np.arange(self.n_states)
        P[s, :, self.next_state(s)] = 1.0
        return P

    def reward(self, theta=None) -> np.ndarray:
        return self.features() @ (self.theta if theta is None else theta)

    def action_weights(self, theta=None) -> np.ndarray:
        return np.asarray(self.theta if theta is None else theta)[:self.n_actions]


@dataclass
class SoftSolution:
    Q: np.ndarray
    V: np.ndarray
    policy: np.ndarray
    sweeps: int
    converged: bool
    deltas: list = field(default_factory=list, repr=False)


def soft_value_iteration(reward, P, gamma: float, tol: float = 1e-6, max_sweeps: int = 1000,
                         V0=None) -> SoftSolution:
    """Soft Bellman backups ``Q = r + gamma P V``, ``V = logsumexp_a Q``."""
    reward = np.asarray(reward, dtype=float)
    n_states = reward.shape[0]
    V = np.zeros(n_states) if V0 is None else np.array(V0, dtype=float)
    deltas = []
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        Q = reward + gamma * (P @ V)
        V_new = logsumexp(Q, axis=1)
        change = float(np.abs(V_new - V).max())
        deltas.append(change)
        V = V_new
        if change < tol:
            converged = True
            break
    Q = reward + gamma * (P @ V)
    V = logsumexp(Q, axis=1)
    policy = np.exp(Q - V[:, None])
    if not converged:
        logger.warning("soft value iteration stopped after %d sweeps (last change %.3g)", sweeps, deltas[-1])
    return SoftSolution(Q, V, policy, sweeps, converged, deltas)


# -- traces ----------------------------------------------------------------------

def trace_states(model: IrlModel, length: int, start_count: int = 0) -> np.ndarray:
    return model.state_of(start_count + np.arange(length))


def empirical_feature_expectations(model: IrlModel, traces: Sequence[Sequence[int]]) -> np.ndarray:
    """Average over traces of ``sum_t delta^t phi(s_t, a_t)``."""
    if not len(traces):
        raise ValueError("need at least one trace")
    phi = model.features()
    total = np.zeros(model.n_features)
    # sorted per-trace contributions keep the sum independent of input order
    parts = []
    for trace in traces:
        a = np.asarray(trace, dtype=np.int64)
        s = trace_states(model, a.size)
        disc = model.delta ** np.arange(a.size)
        parts.append(disc @ phi[s, a])
    for part in sorted(parts, key=lambda v: tuple(v)):
        total += part
    return total / len(traces)


def survival(traces: Sequence[Sequence[int]]) -> np.ndarray:
    """``alive[t]`` = fraction of traces that still have an action at position ``t``."""
    lengths = np.array([len(t) for t in traces])
    horizon = lengths.max() if lengths.size else 0
    return (lengths[None, :] > np.arange(horizon)[:, None]).mean(axis=1)


def model_feature_expectations(model: IrlModel, policy, start_dist=None, alive=None,
                               mass_tol: float = 1e-8, max_steps: int = 100_000) -> np.ndarray:
    """Discounted feature occupancy of ``policy`` propagated from ``start_dist``.

    ``alive[t]`` scales step ``t`` by the share of traces still running, so
    that finite-length demonstrations are matched on equal terms; ``None``
    means an unbounded horizon.
    """
    phi = model.features()
    P = model.transitions()
    d = np.zeros(model.n_states)
    if start_dist is None:
        d[0] = 1.0
    else:
        d[:] = start_dist
    mu = np.zeros(model.n_features)
    for t in range(max_steps):
        w = model.delta ** t * (1.0 if alive is None else (alive[t] if t < len(alive) else 0.0))
        if w * d.sum() < mass_tol:
            break
        sa = d[:, None] * policy
        mu += w * np.einsum("sa,saf->f", sa, phi)
        d = np.einsum("sa,sap->p", sa, P)
    return mu


def sample_traces(model: IrlModel, theta, n_traces: int, horizon: int, rng: np.random.Generator):
    """Roll out the soft-optimal policy for ``theta``; returns an ``(n_traces, horizon)`` array."""
    sol = soft_value_iteration(model.reward(theta), model.transitions(), model.gamma)
    cdf = np.cumsum(sol.policy, axis=1)
    cdf[:, -1] = 1.0
    out = np.empty((n_traces, horizon), dtype=np.int64)
    s = np.zeros(n_traces, dtype=np.int64)
    for t in range(horizon):
        u = rng.random(n_traces)
        a = (u[:, None] > cdf[s]).sum(axis=1)
        out[:, t] = a
        s = model.next_state(s)
    return out


@dataclass
class IrlResult:
    theta: np.ndarray
    converged: bool
    grad_norm: float
    iterations: int
    model: IrlModel = field(repr=False)

    @property
    def action_weights(self) -> dict[str, float]:
        return dict(zip(ACTIONS[:self.model.n_actions], self.model.action_weights(self.theta).tolist()))


def irl_gradient(model: IrlModel, theta, mu_e, start_dist=None, alive=None, V0=None):
    sol = soft_value_iteration(model.reward(theta), model.transitions(), model.gamma, V0=V0)
    mu_theta = model_feature_expectations(model, sol.policy, start_dist, alive)
    return mu_e - mu_theta - model.epsilon * theta, sol


def irl_fit(traces, model: IrlModel | None = None, learning_rate: float = 0.1, lr_decay: float = 1e-3,
            tol: float = 1e-4, max_iter: int = 2000) -> IrlResult:
    """Gradient ascent on the regularised log-likelihood starting from ``theta = 0``."""
    model = model or IrlModel()
    if not len(traces):
        raise ValueError("need at least one trace")
    mu_e = empirical_feature_expectations(model, traces)
    alive = survival(traces)
    theta = np.zeros(model.n_features)
    V = None
    grad_norm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad, sol = irl_gradient(model, theta, mu_e, alive=alive, V0=V)
        V = sol.V
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < tol:
            break
        theta = theta + learning_rate / (1.0 + lr_decay * it) * grad
    converged = grad_norm < tol
    if not converged:
        logger.warning("IRL stopped after %d iterations with gradient norm %.3g", it, grad_norm)
    model.theta = theta
    return IrlResult(theta, converged, grad_norm, it, model)


# -- weights ------------------------------------------------------------------

def normalize_weights(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        raise ValueError("cannot normalise weights that are all equal")
    return (raw - lo) / (hi - lo)


def _by_name(values) -> dict[str, float]:
    if isinstance(values, Mapping):
        return {ACTIONS[action_index(k)]: float(v) for k, v in values.items()}
    values = list(values)
    if len(values) != len(ACTIONS):
        raise ValueError(f"expected {len(ACTIONS)} action weights, got {len(values)}")
    return dict(zip(ACTIONS, map(float, values)))


def derive_lou(normalized) -> tuple[float, float, float]:
    """Quality, reputation and price coefficients from normalised action weights.

    Quality averages kernel creation and forum posts, reputation averages the
    three vote types, and dataset votes stand in for purchases (price).
    """
    w = _by_name(normalized)
    l = float(np.mean([w[a] for a in QUALITY_ACTIONS]))
    o = float(np.mean([w[a] for a in VOTE_ACTIONS]))
    u = w[PURCHASE_ACTION]
    return l, o, u


def write_weights(path: str | Path, raw) -> tuple[float, float, float]:
    raw_by_name = _by_name(raw)
    norm = dict(zip(ACTIONS, normalize_weights([raw_by_name[a] for a in ACTIONS])))
    l, o, u = derive_lou(norm)
    lines = [f"l = {l!r}", f"o = {o!r}", f"u = {u!r}"]
    lines += [f"raw.{a} = {raw_by_name[a]!r}" for a in ACTIONS]
    lines += [f"normalized.{a} = {norm[a]!r}" for a in ACTIONS]
    Path(path).write_text("\n".join(lines) + "\n")
    return l, o, u


def read_lou(path: str | Path) -> dict[str, float]:
    values = read_key_values(path)
    missing = {"l", "o", "u"} - set(values)
    if missing:
        raise ValueError(f"{path}: missing {', '.join(sorted(missing))}")
    return {k: float(values[k]) for k in ("l", "o", "u")}


# -- trace files ----------------------------------------------------------------

def read_events(path: str | Path) -> dict[str, list[tuple[float, int]]]:
    """Parse a trace file into ``user -> [(order, action_index), ...]``."""
    text = Path(path).read_text()
    dialect = "excel-tab" if "\t" in text.split("\n", 1)[0] else "excel"
    events: dict[str, list[tuple[float, int]]] = defaultdict(list)
    for lineno, row in enumerate(csv.reader(text.splitlines(), dialect=dialect), 1):
        if not row or row[0].startswith("#"):
            continue
        if len(row) < 3:
            raise ValueError(f"{path}:{lineno}: expected user,order,action")
        user, order, action = (x.strip() for x in row[:3])
        try:
            key = float(order)
        except ValueError:
            if lineno == 1:
                continue  # header
            raise ValueError(f"{path}:{lineno}: order {order!r} is not numeric") from None
        events[user].append((key, action_index(action)))
    return events


def select_buyer_like(events: Mapping[str, list], top_n: int = 500,
                      creation_percentile: float = 50.0) -> list[str]:
    """Users who create few datasets but vote a lot.

    Keeps users whose dataset-creation count is at or below the given
    percentile of all users, then the ``top_n`` of those by total votes.
    """
    create = ACTIONS.index("DatasetCreate")
    votes = {ACTIONS.index(a) for a in VOTE_ACTIONS}
    users = sorted(events)
    n_create = np.array([sum(a == create for _, a in events[u]) for u in users])
    n_votes = np.array([sum(a in votes for _, a in events[u]) for u in users])
    if not users:
        return []
    cutoff = np.percentile(n_create, creation_percentile)
    eligible = [i for i in range(len(users)) if n_create[i] <= cutoff]
    eligible.sort(key=lambda i: (-n_votes[i], users[i]))
    return [users[i] for i in eligible[:top_n]]


def load_traces(path: str | Path, top_n: int | None = None, creation_percentile: float = 50.0,
                max_length: int | None = None) -> list[np.ndarray]:
    """Read per-user action sequences, optionally filtered to buyer-like users."""
    events = read_events(path)
    users = sorted(events) if top_n is None else select_buyer_like(events, top_n, creation_percentile)
    traces = []
    for user in users:
        actions = [a for _, a in sorted(events[user], key=lambda e: e[0])]
        if max_length is not None:
            actions = actions[:max_length]
        if actions:
            traces.append(np.asarray(actions, dtype=np.int64))
    return traces
