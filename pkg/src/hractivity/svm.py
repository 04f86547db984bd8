"""Soft-margin kernel SVM trained by sequential minimal optimization.

Multiclass wraps one-against-one binary machines. Training uses Platt-style
working-set selection: alternate full sweeps with sweeps over non-bound
multipliers, pick the partner maximizing |E1 - E2|, fall back to seeded
scans. The error cache is updated exactly after every step, so heuristics
never work from stale values.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, NonFiniteFeature, SingleClassInput

ALPHA_KEEP = 1e-12  # multipliers at or below this are dropped from the model


class KernelKind(enum.Enum):
    LINEAR = "linear"
    RBF = "rbf"


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.RBF
    gamma: float | None = None  # None: resolve 1/(d * mean per-dim variance) at fit

    def resolve(self, x: np.ndarray) -> "KernelSpec":
        if self.kind is KernelKind.LINEAR or self.gamma is not None:
            return self
        d = x.shape[1]
        variance = float(x.var(axis=0).mean())
        if variance <= 0:
            variance = 1.0
        return replace(self, gamma=1.0 / (d * variance))

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.kind is KernelKind.LINEAR:
            return a @ b.T
        if self.gamma is None or not np.isfinite(self.gamma) or self.gamma <= 0:
            raise InvalidConfig("rbf kernel requires a positive resolved gamma")
        sq = (a**2).sum(axis=1)[:, None] + (b**2).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class BinarySvm:
    support_vectors: np.ndarray  # (m, d)
    coef: np.ndarray  # alpha_i * y_i, shape (m,)
    bias: float
    kernel: KernelSpec
    c: float
    alpha: np.ndarray | None = None  # full training multipliers; not serialized

    def decision(self, x) -> np.ndarray:
        mat = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if mat.shape[1] != self.support_vectors.shape[1]:
            raise DimensionMismatch(
                f"expected dimension {self.support_vectors.shape[1]}, got {mat.shape[1]}"
            )
        if self.support_vectors.shape[0] == 0:
            return np.full(mat.shape[0], self.bias)
        return self.kernel.matrix(mat, self.support_vectors) @ self.coef + self.bias


def _take_step(i1, i2, alpha, y, errors, gram, c, state):
    if i1 == i2:
        return False
    a1_old, a2_old = alpha[i1], alpha[i2]
    y1, y2 = y[i1], y[i2]
    e1, e2 = errors[i1], errors[i2]
    s = y1 * y2
    if s > 0:
        lo, hi = max(0.0, a1_old + a2_old - c), min(c, a1_old + a2_old)
    else:
        lo, hi = max(0.0, a2_old - a1_old), min(c, c + a2_old - a1_old)
    if lo == hi:
        return False
    k11, k22, k12 = gram[i1, i1], gram[i2, i2], gram[i1, i2]
    eta = k11 + k22 - 2.0 * k12
    if eta > 0:
        a2 = a2_old + y2 * (e1 - e2) / eta
        a2 = min(max(a2, lo), hi)
    else:
        # flat direction: evaluate the dual at both clip ends
        f1 = y1 * e1 - a1_old * k11 - s * a2_old * k12
        f2 = y2 * e2 - a2_old * k22 - s * a1_old * k12
        l1 = a1_old + s * (a2_old - lo)
        h1 = a1_old + s * (a2_old - hi)
        obj_lo = l1 * f1 + lo * f2 + 0.5 * l1**2 * k11 + 0.5 * lo**2 * k22 + s * lo * l1 * k12
        obj_hi = h1 * f1 + hi * f2 + 0.5 * h1**2 * k11 + 0.5 * hi**2 * k22 + s * hi * h1 * k12
        if obj_lo < obj_hi - 1e-12:
            a2 = lo
        elif obj_lo > obj_hi + 1e-12:
            a2 = hi
        else:
            return False
    if abs(a2 - a2_old) < 1e-12 * (a2 + a2_old + 1e-12):
        return False
    a1 = a1_old + s * (a2_old - a2)
    if a1 < 0.0:
        a1 = 0.0
    elif a1 > c:
        a1 = c

    d1 = y1 * (a1 - a1_old)
    d2 = y2 * (a2 - a2_old)
    b_old = state["b"]
    b1 = b_old - e1 - d1 * k11 - d2 * k12
    b2 = b_old - e2 - d1 * k12 - d2 * k22
    if 0.0 < a1 < c:
        b_new = b1
    elif 0.0 < a2 < c:
        b_new = b2
    else:
        b_new = 0.5 * (b1 + b2)
    state["b"] = b_new

    alpha[i1], alpha[i2] = a1, a2
    errors += d1 * gram[i1] + d2 * gram[i2] + (b_new - b_old)
    return True


def _examine(i2, alpha, y, errors, gram, c, tol, state, rng):
    e2 = errors[i2]
    r2 = e2 * y[i2]
    a2 = alpha[i2]
    if not ((r2 < -tol and a2 < c) or (r2 > tol and a2 > 0.0)):
        return False
    non_bound = np.nonzero((alpha > 0.0) & (alpha < c))[0]
    if non_bound.size > 1:
        i1 = int(non_bound[np.abs(errors[non_bound] - e2).argmax()])
        if _take_step(i1, i2, alpha, y, errors, gram, c, state):
            return True
    if non_bound.size:
        start = int(rng.integers(non_bound.size))
        for offset in range(non_bound.size):
            i1 = int(non_bound[(start + offset) % non_bound.size])
            if _take_step(i1, i2, alpha, y, errors, gram, c, state):
                return True
    n = alpha.size
    start = int(rng.integers(n))
    for offset in range(n):
        if _take_step((start + offset) % n, i2, alpha, y, errors, gram, c, state):
            return True
    return False


def train_binary(
    x,
    y,
    kernel: KernelSpec = KernelSpec(),
    c: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 200,
    seed: int = 0,
) -> BinarySvm:
    """Platt SMO on the soft-margin dual; deterministic given seed.

    max_passes caps full examine-all sweeps; normal termination is a full
    sweep with no multiplier change.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatch("x must be (n, d) with matching labels")
    if not np.isfinite(x).all():
        raise NonFiniteFeature("non-finite training feature")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SingleClassInput("labels must be -1/+1")
    if np.unique(y).size < 2:
        raise SingleClassInput("need both classes to train")
    if c <= 0:
        raise InvalidConfig("C must be positive")

    kernel = kernel.resolve(x)
    gram = kernel.matrix(x, x)
    n = x.shape[0]
    alpha = np.zeros(n)
    errors = -y.astype(np.float64)  # f = 0 everywhere at start, b = 0
    state = {"b": 0.0}
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed),)))

    examine_all = True
    sweeps = 0
    while sweeps < max_passes:
        sweeps += 1
        changed = 0
        if examine_all:
            for i2 in range(n):
                changed += _examine(i2, alpha, y, errors, gram, c, tol, state, rng)
        else:
            for i2 in np.nonzero((alpha > 0.0) & (alpha < c))[0]:
                changed += _examine(int(i2), alpha, y, errors, gram, c, tol, state, rng)
        if examine_all:
            if changed == 0:
                break
            examine_all = False
        elif changed == 0:
            examine_all = True

    # Recompute the threshold from the final multipliers.  The running
    # threshold can end up outside the feasible interval when every
    # multiplier sits at a bound, which leaves phantom margin violations.
    g = (alpha * y) @ gram
    eps_b = 1e-10 * max(1.0, c)
    free = (alpha > eps_b) & (alpha < c - eps_b)
    if np.any(free):
        state["b"] = float(np.mean(y[free] - g[free]))
    else:
        at_zero = alpha <= eps_b
        at_c = alpha >= c - eps_b
        lows = np.concatenate(
            [(1.0 - g)[at_zero & (y > 0)], (-1.0 - g)[at_c & (y < 0)]]
        )
        highs = np.concatenate(
            [(1.0 - g)[at_c & (y > 0)], (-1.0 - g)[at_zero & (y < 0)]]
        )
        if lows.size and highs.size:
            state["b"] = float((lows.max() + highs.min()) / 2.0)
        elif lows.size:
            state["b"] = float(lows.max())
        elif highs.size:
            state["b"] = float(highs.min())

    keep = alpha > ALPHA_KEEP
    return BinarySvm(
        support_vectors=x[keep].copy(),
        coef=(alpha * y)[keep],
        bias=float(state["b"]),
        kernel=kernel,
        c=float(c),
        alpha=alpha,
    )


def dual_objective(svm_alpha, y, gram) -> float:
    """W(alpha) for diagnostics and oracle comparison."""
    a = np.asarray(svm_alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    q = (y[:, None] * y[None, :]) * gram
    return float(a.sum() - 0.5 * a @ q @ a)


def kkt_violation(model: BinarySvm, x, y, tol_bound: float = 1e-9) -> float:
    """Largest stationarity violation over the training set the model saw.

    Uses the full multiplier vector stashed at training time; a violation of
    v means some margin condition is off by v (0 for a perfect KKT point).
    """
    if model.alpha is None:
        raise InvalidConfig("model carries no training multipliers")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    margins = y * model.decision(x)
    worst = 0.0
    for a, margin in zip(model.alpha, margins):
        if a <= tol_bound:
            worst = max(worst, 1.0 - margin)
        elif a >= model.c - tol_bound:
            worst = max(worst, margin - 1.0)
        else:
            worst = max(worst, abs(margin - 1.0))
    return float(worst)


@dataclass(frozen=True)
class OvoSvm:
    classes: tuple[int, ...]
    machines: dict  # (class_a, class_b) with a < b -> BinarySvm; +1 means a
    kernel: KernelSpec
    c: float
    tol: float
    seed: int

    def decision_rows(self, x) -> dict:
        return {pair: m.decision(x) for pair, m in self.machines.items()}


def train_ovo(
    x,
    y,
    kernel: KernelSpec = KernelSpec(),
    c: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 200,
    seed: int = 0,
) -> OvoSvm:
    """One binary machine per class pair; +1 encodes the lower class id."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = tuple(int(v) for v in np.unique(y))
    if len(classes) < 2:
        raise SingleClassInput("need at least two classes")
    kernel = kernel.resolve(x)  # shared gamma across all machines
    machines = {}
    for a, b in combinations(classes, 2):
        mask = (y == a) | (y == b)
        pair_y = np.where(y[mask] == a, 1.0, -1.0)
        pair_seed = np.random.SeedSequence(entropy=(int(seed), a, b)).generate_state(1)[0]
        machines[(a, b)] = train_binary(
            x[mask], pair_y, kernel, c, tol, max_passes, seed=int(pair_seed)
        )
    return OvoSvm(classes=classes, machines=machines, kernel=kernel, c=float(c),
                  tol=float(tol), seed=int(seed))


def predict_ovo(model: OvoSvm, x) -> np.ndarray:
    """Vote of all machines; ties by largest signed decision sum, then lowest id."""
    mat = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = mat.shape[0]
    index = {cls: i for i, cls in enumerate(model.classes)}
    votes = np.zeros((n, len(model.classes)), dtype=np.int64)
    sums = np.zeros((n, len(model.classes)))
    for (a, b), machine in model.machines.items():
        d = machine.decision(mat)
        wins_a = d > 0
        votes[:, index[a]] += wins_a
        votes[:, index[b]] += ~wins_a
        sums[:, index[a]] += d
        sums[:, index[b]] -= d
    out = np.empty(n, dtype=np.int64)
    classes = np.asarray(model.classes)
    for i in range(n):
        top = votes[i].max()
        tied = np.nonzero(votes[i] == top)[0]
        if tied.size > 1:
            best = sums[i][tied].max()
            tied = tied[sums[i][tied] == best]
        out[i] = classes[tied[0]]
    return out


def _kernel_to_json(kernel: KernelSpec) -> dict:
    return {"kind": kernel.kind.value, "gamma": kernel.gamma}


def _kernel_from_json(obj: dict) -> KernelSpec:
    return KernelSpec(kind=KernelKind(obj["kind"]), gamma=obj["gamma"])


def save_ovo(model: OvoSvm, path: str | Path) -> None:
    """Versioned JSON; float repr round-trips make reloaded predictions bit-exact."""
    payload = {
        "schema": "ovo_svm.v1",
        "classes": list(model.classes),
        "kernel": _kernel_to_json(model.kernel),
        "c": model.c,
        "tol": model.tol,
        "seed": model.seed,
        "machines": [
            {
                "pair": [a, b],
                "bias": m.bias,
                "coef": [float(v) for v in m.coef],
                "support_vectors": [[float(v) for v in row] for row in m.support_vectors],
                "kernel": _kernel_to_json(m.kernel),
                "c": m.c,
            }
            for (a, b), m in sorted(model.machines.items())
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_ovo(path: str | Path) -> OvoSvm:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema") != "ovo_svm.v1":
        raise InvalidConfig(f"unsupported model schema {payload.get('schema')!r}")
    machines = {}
    for entry in payload["machines"]:
        a, b = entry["pair"]
        d = len(entry["support_vectors"][0]) if entry["support_vectors"] else 0
        machines[(int(a), int(b))] = BinarySvm(
            support_vectors=np.asarray(entry["support_vectors"], dtype=np.float64).reshape(-1, d),
            coef=np.asarray(entry["coef"], dtype=np.float64),
            bias=float(entry["bias"]),
            kernel=_kernel_from_json(entry["kernel"]),
            c=float(entry["c"]),
        )
    return OvoSvm(
        classes=tuple(int(v) for v in payload["classes"]),
        machines=machines,
        kernel=_kernel_from_json(payload["kernel"]),
        c=float(payload["c"]),
        tol=float(payload["tol"]),
        seed=int(payload["seed"]),
    )
