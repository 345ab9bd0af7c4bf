"""One transition matrix per component: mixing, fixed point, truncation, best line.

Everything here is a pure function of its inputs. ``(C, alpha)`` are fitted
from exact total-variation decay so the envelope d(t) <= C * alpha**t holds on
the probed range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .errors import (
    EnvelopeFailure,
    NotAperiodic,
    NotIrreducible,
    NoTopTransition,
    PolicyShapeMismatch,
    ZeroTailMass,
)
from .line import Hyperbox, compute_phi_table, expected_payoff_line
from .model import Instance, validate_instance
from .multiline import lines_of

T_CAP = 200
DECAY_FLOOR = 1e-12


def _reach(P: np.ndarray) -> np.ndarray:
    k = P.shape[0]
    A = (P > 0).astype(int)
    R = np.eye(k, dtype=int) | A
    for _ in range(max(1, int(math.ceil(math.log2(max(k, 2)))) + 1)):
        R = ((R @ R) > 0).astype(int)
    return R.astype(bool)


def _periods(P: np.ndarray) -> list[int | None]:
    """Period of each state (None for states on no cycle)."""
    k = P.shape[0]
    R = _reach(P)
    out: list[int | None] = [None] * k
    for i in range(k):
        scc = [j for j in range(k) if R[i, j] and R[j, i]]
        if len(scc) == 1 and P[i, i] <= 0:
            continue
        members = set(scc)
        level = {i: 0}
        queue = [i]
        g = 0
        while queue:
            u = queue.pop(0)
            for v in range(k):
                if P[u, v] <= 0 or v not in members:
                    continue
                if v not in level:
                    level[v] = level[u] + 1
                    queue.append(v)
                else:
                    g = gcd(g, level[u] + 1 - level[v])
        out[i] = abs(g) if g else None
    return out


def check_irreducible_aperiodic(P) -> tuple[bool, bool]:
    P = np.asarray(P, dtype=float)
    irreducible = bool(_reach(P).all())
    aperiodic = all(p in (None, 1) for p in _periods(P))
    return irreducible, aperiodic


def _require_ergodic(P: np.ndarray) -> None:
    irr, aper = check_irreducible_aperiodic(P)
    if not irr:
        raise NotIrreducible("transition matrix is not irreducible")
    if not aper:
        raise NotAperiodic("transition matrix is periodic")


def stationary_distribution(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    _require_ergodic(P)
    k = P.shape[0]
    A = np.vstack([P.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    # polish: a few power steps remove the least-squares residual
    for _ in range(3):
        pi = pi @ P
        pi = pi / pi.sum()
    return pi


def tv_decay(P, pi, t_max: int) -> np.ndarray:
    """d(t) = max_i TV(P^t[i], pi) for t = 0..t_max."""
    P = np.asarray(P, dtype=float)
    k = P.shape[0]
    M = np.eye(k)
    out = np.empty(t_max + 1)
    for t in range(t_max + 1):
        out[t] = 0.5 * np.abs(M - pi).sum(axis=1).max()
        M = M @ P
    return out


@dataclass(frozen=True)
class StationaryProfile:
    pi: np.ndarray
    C: float
    alpha: float
    t_mix_quarter: int

    def to_dict(self) -> dict:
        return {"pi": self.pi.tolist(), "C": self.C, "alpha": self.alpha,
                "t_mix_quarter": self.t_mix_quarter}


def mixing_constants(P, t_cap: int = T_CAP, pi=None) -> tuple[float, float]:
    C, alpha, _ = _fit_envelope(np.asarray(P, dtype=float), t_cap, pi)
    return C, alpha


def _fit_envelope(P: np.ndarray, t_cap: int, pi=None) -> tuple[float, float, int]:
    if pi is None:
        pi = stationary_distribution(P)
    d = tv_decay(P, pi, t_cap)
    below = np.flatnonzero(d[1:] <= 0.25)
    if len(below) == 0:
        raise EnvelopeFailure(f"d(t) stays above 1/4 up to t = {t_cap}")
    t_mix = int(below[0]) + 1
    if d[1] <= DECAY_FLOOR:
        return 1.0, 0.5, t_mix
    eig = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    slem = float(eig[1]) if len(eig) > 1 else 0.0
    ratios = [d[t + 1] / d[t] for t in range(t_mix, t_cap) if d[t] > DECAY_FLOOR and d[t + 1] > DECAY_FLOOR]
    alpha = max([slem] + ratios)
    if alpha <= 0.0:
        alpha = 0.5
    if alpha >= 1.0:
        raise EnvelopeFailure("fitted decay ratio is not below 1")
    C = float(max(d[t] / alpha**t for t in range(t_cap + 1) if t == 0 or d[t] > DECAY_FLOOR))
    return C, float(alpha), t_mix


def stationary_profile(P, t_cap: int = T_CAP) -> StationaryProfile:
    P = np.asarray(P, dtype=float)
    pi = stationary_distribution(P)
    C, alpha, t_mix = _fit_envelope(P, t_cap, pi)
    return StationaryProfile(pi, C, alpha, t_mix)


def _horizon(C: float, alpha: float, tail: float, delta: float) -> int:
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if tail <= 0.0:
        raise ZeroTailMass("stationary mass at and above the target value is zero")
    first = 2.0 * C / (tail * (1.0 - alpha))
    second = math.log(delta) / math.log(1.0 - tail / 2.0)
    return int(math.ceil(max(first, second)))


def truncation_horizon(profile: StationaryProfile, j: int = -1, delta: float = 0.05) -> int:
    """Line length after which the running max has reached grid index j w.p. >= 1 - delta."""
    k = len(profile.pi)
    j = j % k
    tail = float(profile.pi[j:].sum())
    return _horizon(profile.C, profile.alpha, tail, delta)


def max_reward_tail(P, t: int, j: int = -1, start=None) -> float:
    """Exact Pr[max of the first t states >= index j], box 1 drawn from ``start``.

    ``start`` defaults to the worst point mass over states below j. DP over
    (state, reached-j flag); once reached the chain can be dropped.
    """
    P = np.asarray(P, dtype=float)
    k = P.shape[0]
    j = j % k
    if start is None:
        return min(max_reward_tail(P, t, j, np.eye(k)[i]) for i in range(j)) if j > 0 else 1.0
    start = np.asarray(start, dtype=float)
    miss = start.copy()
    miss[j:] = 0.0
    for _ in range(t - 1):
        miss = miss @ P
        miss[j:] = 0.0
    return float(1.0 - miss.sum())


@dataclass
class StaticPhi:
    values: tuple[float, ...]
    ygrid: np.ndarray
    phi: np.ndarray  # [y index on ygrid, state index]
    cost: float
    q: float
    iterations: int
    diffs: list[float] = field(default_factory=list, repr=False)

    def value(self, y: float, x: int) -> float:
        return float(self.phi[int(np.searchsorted(self.ygrid, y)), x])

    def continues(self, y: float, x: int) -> bool:
        return self.value(y, x) > y + 1e-12 * max(1.0, abs(y))


def top_transition_ratio(P) -> float:
    P = np.asarray(P, dtype=float)
    if np.any(P[:, -1] <= 0.0):
        raise NoTopTransition("some state never moves to the top value")
    return float(np.max(1.0 - P[:, -1]))


def bellman_step(P: np.ndarray, c: float, values, ygrid: np.ndarray, phi: np.ndarray) -> np.ndarray:
    k = len(values)
    yidx_of = {float(v): i for i, v in enumerate(ygrid)}
    out = np.empty_like(phi)
    for yi, y in enumerate(ygrid):
        if y >= values[-1]:
            out[yi, :] = y
            continue
        nxt = np.array([phi[yidx_of[float(max(y, values[l]))], l] for l in range(k)])
        cont = -c + P @ nxt
        out[yi, :] = np.maximum(y, cont)
    return out


def fixed_point_phi(P, c: float, values, tol: float = 1e-12, max_iter: int = 100_000) -> StaticPhi:
    """Index-free equivalent reward phi(y, x) of an endless line with constant cost.

    Value iteration from phi_0(y, x) = y; records the sup-norm change per step.
    """
    P = np.asarray(P, dtype=float)
    q = top_transition_ratio(P)
    ygrid = np.array(sorted(set(float(v) for v in values) | {0.0}))
    k = len(values)
    phi = np.repeat(ygrid[:, None], k, axis=1)
    diffs: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        new = bellman_step(P, c, values, ygrid, phi)
        diff = float(np.max(np.abs(new - phi)))
        diffs.append(diff)
        phi = new
        if diff < tol:
            break
    polished = _policy_evaluation(P, c, values, ygrid, phi)
    if polished is not None:
        res = float(np.max(np.abs(bellman_step(P, c, values, ygrid, polished) - polished)))
        if res <= max(diffs[-1], 1e-13):
            phi = polished
    return StaticPhi(tuple(values), ygrid, phi, c, q, it, diffs)


def _policy_evaluation(P, c, values, ygrid, phi) -> np.ndarray | None:
    """Solve the linear equations of the continue/stop rule read off ``phi``.

    Value iteration only approaches the limit geometrically; once the rule has
    settled this returns the limit itself up to linear-solve rounding.
    """
    k = len(values)
    yidx_of = {float(v): i for i, v in enumerate(ygrid)}
    cont = [(yi, x) for yi, y in enumerate(ygrid) for x in range(k)
            if y < values[-1] and phi[yi, x] > y + 1e-9 * max(1.0, abs(y))]
    if not cont:
        return None
    col = {key: j for j, key in enumerate(cont)}
    A = np.eye(len(cont))
    b = np.full(len(cont), -float(c))
    for row, (yi, x) in enumerate(cont):
        y = ygrid[yi]
        for l in range(k):
            if P[x, l] == 0.0:
                continue
            nyi = yidx_of[float(max(y, values[l]))]
            if (nyi, l) in col:
                A[row, col[(nyi, l)]] -= P[x, l]
            else:
                b[row] += P[x, l] * ygrid[nyi]
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None
    out = np.repeat(ygrid[:, None], k, axis=1).astype(float)
    for (yi, x), v in zip(cont, sol):
        out[yi, x] = v
    return out


def finite_line(P, c: float, values, length: int) -> Hyperbox:
    """Constant-cost line of ``length`` boxes entered from an observed state."""
    P = np.asarray(P, dtype=float)
    return Hyperbox(
        ids=tuple(f"t{i}" for i in range(length)),
        costs=(float(c),) * length,
        values=tuple(values),
        transitions=(P,) * length,
    )


def _component_matrix(instance: Instance, comp) -> np.ndarray | None:
    for b in comp[1:]:
        return instance.transition_into(b)
    return None


def pooled_profile(instance: Instance, t_cap: int = T_CAP):
    """Per-component profiles pooled conservatively: max C, max alpha, min top mass."""
    if not instance.static_transition:
        raise PolicyShapeMismatch("instance does not have one transition matrix per component")
    profiles = []
    for comp in instance.forest.components():
        P = _component_matrix(instance, comp)
        if P is not None:
            profiles.append(stationary_profile(P, t_cap))
    if not profiles:
        return None, profiles
    C = max(p.C for p in profiles)
    alpha = max(p.alpha for p in profiles)
    tail = min(float(p.pi[-1]) for p in profiles)
    return (C, alpha, tail), profiles


def pooled_horizon(instance: Instance, delta: float, t_cap: int = T_CAP) -> tuple[int | None, list]:
    pooled, profiles = pooled_profile(instance, t_cap)
    if pooled is None:
        return None, profiles
    C, alpha, tail = pooled
    return _horizon(C, alpha, tail, delta), profiles


def truncate_lines(instance: Instance, delta: float, t_cap: int = T_CAP) -> Instance:
    """Keep only the first t_delta boxes of every line."""
    lines = lines_of(instance)
    t, _ = pooled_horizon(instance, delta, t_cap)
    if t is None:
        return instance
    keep = set()
    for ids in lines:
        keep.update(ids[:t])
    return restrict(instance, keep)


def restrict(instance: Instance, keep) -> Instance:
    """Sub-instance on a downward-closed set of boxes."""
    keep = set(keep)
    raw = instance.to_dict()
    raw["boxes"] = [b for b in raw["boxes"] if b["id"] in keep]
    raw["edges"] = [e for e in raw["edges"] if e["to"] in keep]
    used = {e["transition"] for e in raw["edges"]}
    raw["transitions"] = {k: v for k, v in raw["transitions"].items() if k in used}
    return validate_instance(raw)


@dataclass
class BestLine:
    path: tuple[str, ...]
    value: float
    t_delta: int | None
    profiles: list

    def to_dict(self) -> dict:
        prof = None
        if self.profiles:
            prof = {
                "pi": [p.pi.tolist() for p in self.profiles],
                "C": max(p.C for p in self.profiles),
                "alpha": max(p.alpha for p in self.profiles),
            }
        return {"path": list(self.path), "value": self.value, "t_delta": self.t_delta, "profile": prof}


def root_paths(instance: Instance, max_len: int | None):
    """Every directed path that starts at a root, of length 1..max_len."""
    for r in sorted(instance.forest.roots):
        stack = [(r,)]
        while stack:
            path = stack.pop()
            yield path
            if max_len is not None and len(path) >= max_len:
                continue
            for c in sorted(instance.children(path[-1]), reverse=True):
                stack.append(path + (c,))


def best_line_half_approx(instance: Instance, delta: float, t_cap: int = T_CAP) -> BestLine:
    """Best single root path of length at most t_delta under optimal stopping."""
    t, profiles = pooled_horizon(instance, delta, t_cap)
    best_path, best_val = (), 0.0
    for path in root_paths(instance, t):
        val = expected_payoff_line(compute_phi_table(Hyperbox.from_instance(instance, path)))
        if not best_path or val > best_val + 1e-12 or (abs(val - best_val) <= 1e-12 and path < best_path):
            best_path, best_val = path, val
    return BestLine(best_path, best_val, t, profiles)
