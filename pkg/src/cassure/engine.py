"""PCTL and expected-reward checking over the explicit DTMC.

Qualitative probability-0/1 sets come from graph fixpoints; remaining states
are solved by damped fixed-point sweeps (Gauss-Seidel by default) against the
sparse matrix.  Bounds of exactly 0 or 1 are always decided qualitatively,
never by comparing floats against 0.0/1.0.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import SolverError
from .kernels import backend_name, get_kernels
from .model import Expr, Lit, Unary
from .parsing import render_path
from .statespace import StateSpace, label_states

BOUND_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Convergence is reached when the largest sweep change, scaled by
    max(1, |value|), drops to epsilon (absolute for values <= 1, relative
    above)."""
    epsilon: float = 1e-9
    max_iterations: int = 100_000
    method: str = "gauss-seidel"  # or "jacobi"
    damping: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.method not in ("gauss-seidel", "jacobi"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class VerificationResult:
    property: str
    kind: str                  # "probability" | "boolean" | "reward"
    value: float | None = None
    infinite: bool = False     # distinct +infinity variant for rewards
    verdict: bool | None = None
    marginal: bool = False     # numeric bound comparison within tolerance of b
    stats: dict = field(default_factory=dict)
    model_fingerprint: str = ""


# --------------------------------------------------------------------------
# Qualitative graph precomputation
# --------------------------------------------------------------------------

def _predecessors(space: StateSpace):
    n = space.n_states
    preds = [[] for _ in range(n)]
    for i in range(n):
        lo, hi = space.indptr[i], space.indptr[i + 1]
        for j in space.indices[lo:hi]:
            preds[j].append(i)
    return preds


def _backward_reach(space, seeds_mask, allowed_mask):
    """States that reach a seed via allowed states (seeds always included)."""
    preds = _predecessors(space)
    reached = seeds_mask.copy()
    stack = list(np.flatnonzero(seeds_mask))
    while stack:
        j = stack.pop()
        for i in preds[j]:
            if not reached[i] and allowed_mask[i]:
                reached[i] = True
                stack.append(i)
    return reached


def _as_mask(space, phi):
    if isinstance(phi, np.ndarray):
        return phi
    return label_states(space, phi)


def prob0_states(space: StateSpace, phi, psi) -> np.ndarray:
    """Mask of states satisfying phi U psi with probability exactly 0."""
    phi_m = _as_mask(space, phi)
    psi_m = _as_mask(space, psi)
    can = _backward_reach(space, psi_m, phi_m & ~psi_m)
    return ~can


def prob1_states(space: StateSpace, phi, psi) -> np.ndarray:
    """Mask of states satisfying phi U psi with probability exactly 1."""
    phi_m = _as_mask(space, phi)
    psi_m = _as_mask(space, psi)
    zero = prob0_states(space, phi_m, psi_m)
    bad = _backward_reach(space, zero, phi_m & ~psi_m)
    return ~bad


# --------------------------------------------------------------------------
# Numeric solving
# --------------------------------------------------------------------------

def _solve_fixpoint(space, x, unknown, add, cfg):
    """Iterate sweeps over the unknown states until convergence.

    Returns (iterations, residual); raises SolverError on non-convergence.
    """
    gs, jacobi, _ = get_kernels()
    sweep = gs if cfg.method == "gauss-seidel" else jacobi
    indptr, indices, data = space.indptr, space.indices, space.data
    unknown = np.asarray(unknown, dtype=np.int64)
    if unknown.size == 0:
        return 0, 0.0
    residual = math.inf
    for it in range(1, cfg.max_iterations + 1):
        if cfg.damping != 1.0:
            before = x[unknown].copy()
            residual = sweep(indptr, indices, data, x, unknown, add)
            x[unknown] = before + cfg.damping * (x[unknown] - before)
        else:
            residual = sweep(indptr, indices, data, x, unknown, add)
        if residual <= cfg.epsilon:
            return it, float(residual)
    raise SolverError(
        f"no convergence after {cfg.max_iterations} iterations "
        f"(residual {residual:.3e})")


def until_probability(space: StateSpace, phi, psi, cfg=SolverConfig()):
    """Per-state P(phi U psi); returns (vector, stats dict)."""
    phi_m = _as_mask(space, phi)
    psi_m = _as_mask(space, psi)
    zero = prob0_states(space, phi_m, psi_m)
    one = prob1_states(space, phi_m, psi_m)
    x = np.zeros(space.n_states, dtype=np.float64)
    x[one] = 1.0
    unknown = np.flatnonzero(~zero & ~one)
    add = np.zeros(space.n_states, dtype=np.float64)
    iters, residual = _solve_fixpoint(space, x, unknown, add, cfg)
    np.clip(x, 0.0, 1.0, out=x)
    return x, {"iterations": iters, "residual": residual}


def eventually_probability(space, psi, cfg=SolverConfig()):
    return until_probability(space, Lit(True), psi, cfg)


def globally_probability(space, phi, cfg=SolverConfig()):
    """1 - P(F not phi) per state."""
    phi_m = _as_mask(space, phi)
    x, stats = until_probability(space, Lit(True), ~phi_m, cfg)
    return 1.0 - x, stats


def bounded_eventually_probability(space, psi, k, cfg=SolverConfig()):
    """k backward steps from the target indicator, targets absorbing."""
    if k < 0:
        raise ValueError("step bound must be >= 0")
    psi_m = _as_mask(space, psi)
    _, _, step = get_kernels()
    absorbing = np.flatnonzero(psi_m).astype(np.int64)
    x = np.zeros(space.n_states, dtype=np.float64)
    x[psi_m] = 1.0
    for _ in range(k):
        x = step(space.indptr, space.indices, space.data, x, absorbing)
    np.clip(x, 0.0, 1.0, out=x)
    return x, {"iterations": k, "residual": 0.0}


def reach_reward(space: StateSpace, reward_name, psi, cfg=SolverConfig()):
    """Expected cumulated reward until psi; +inf where P(F psi) < 1."""
    if reward_name not in space.rewards:
        raise SolverError(f"unknown reward structure '{reward_name}'")
    rew = space.rewards[reward_name]
    psi_m = _as_mask(space, psi)
    one = prob1_states(space, Lit(True), psi_m)
    r = np.zeros(space.n_states, dtype=np.float64)
    r[~one] = np.inf
    r[psi_m] = 0.0
    unknown = np.flatnonzero(one & ~psi_m)
    # Successor values outside `one` never feed back into unknown states, but
    # keep the sweep well-defined by masking infinities out of the accumulator.
    x = np.where(np.isinf(r), 0.0, r)
    iters, residual = _solve_fixpoint(space, x, unknown, rew, cfg)
    r[unknown] = x[unknown]
    return r, {"iterations": iters, "residual": residual}


# --------------------------------------------------------------------------
# Property dispatch
# --------------------------------------------------------------------------

def _not(mask):
    return ~mask


def _path_vector(space, path, cfg):
    if path.kind == "F":
        return eventually_probability(space, path.target, cfg)
    if path.kind == "F<=":
        return bounded_eventually_probability(space, path.target, path.bound, cfg)
    if path.kind == "G":
        return globally_probability(space, path.target, cfg)
    return until_probability(space, path.constraint, path.target, cfg)


def _qualitative_verdict(space, path, bound_op, bound):
    """Decide P>=1 / P<=0 by graph fixpoints; None if not decidable this way."""
    if path.kind == "F<=":
        return None  # step-bounded: no graph characterization
    if path.kind == "G":
        # P(G phi) = 1 - P(F !phi)
        not_phi = ~_as_mask(space, path.target)
        if bound_op == ">=" and bound == 1.0:
            return bool(prob0_states(space, Lit(True), not_phi)[space.initial])
        if bound_op == "<=" and bound == 0.0:
            return bool(prob1_states(space, Lit(True), not_phi)[space.initial])
        return None
    phi = Lit(True) if path.kind == "F" else path.constraint
    if bound_op == ">=" and bound == 1.0:
        return bool(prob1_states(space, phi, path.target)[space.initial])
    if bound_op == "<=" and bound == 0.0:
        return bool(prob0_states(space, phi, path.target)[space.initial])
    return None


def model_fingerprint(space: StateSpace, prop) -> str:
    """Content hash of (model text, bound constants, property text)."""
    h = hashlib.sha256()
    h.update(space.bound.ast.source.encode())
    h.update(json.dumps(space.bound.constants, sort_keys=True).encode())
    h.update(prop.source_text.encode())
    return h.hexdigest()


def check_property(space: StateSpace, prop, cfg=SolverConfig()) -> VerificationResult:
    """Check one property; queries return the initial-state value."""
    t0 = time.perf_counter()
    fingerprint = model_fingerprint(space, prop)
    tag = f"{cfg.method}/{backend_name()}"

    if prop.kind == "R_query":
        vec, stats = reach_reward(space, prop.reward, prop.path.target, cfg)
        v = vec[space.initial]
        stats = dict(stats, wall_ms=_ms(t0), engine=tag)
        if math.isinf(v):
            return VerificationResult(prop.name, "reward", None, True,
                                      stats=stats, model_fingerprint=fingerprint)
        return VerificationResult(prop.name, "reward", float(v),
                                  stats=stats, model_fingerprint=fingerprint)

    if prop.kind == "P_query":
        vec, stats = _path_vector(space, prop.path, cfg)
        stats = dict(stats, wall_ms=_ms(t0), engine=tag)
        return VerificationResult(prop.name, "probability", float(vec[space.initial]),
                                  stats=stats, model_fingerprint=fingerprint)

    # Bound property: qualitative where the bound is exactly 0 or 1.
    verdict = None
    marginal = False
    value = None
    if prop.bound in (0.0, 1.0):
        verdict = _qualitative_verdict(space, prop.path, prop.bound_op, prop.bound)
        stats = {"iterations": 0, "residual": 0.0}
    if verdict is None:
        vec, stats = _path_vector(space, prop.path, cfg)
        value = float(vec[space.initial])
        if prop.bound_op == ">=":
            verdict = value >= prop.bound - BOUND_TOL if prop.bound in (0.0, 1.0) \
                else value >= prop.bound
        else:
            verdict = value <= prop.bound + BOUND_TOL if prop.bound in (0.0, 1.0) \
                else value <= prop.bound
        marginal = abs(value - prop.bound) <= BOUND_TOL
    stats = dict(stats, wall_ms=_ms(t0), engine=tag)
    return VerificationResult(prop.name, "boolean", value, verdict=bool(verdict),
                              marginal=marginal, stats=stats,
                              model_fingerprint=fingerprint)


def check_properties(space, props, cfg=SolverConfig()):
    return [check_property(space, p, cfg) for p in props]


def _ms(t0):
    return round((time.perf_counter() - t0) * 1000.0, 3)


# --------------------------------------------------------------------------
# Result records
# --------------------------------------------------------------------------

def render_value(res: VerificationResult) -> str:
    """Fixed rendering used in argument solutions and result fingerprints:
    6 significant digits, booleans as holds/violated, +infinity spelled out."""
    if res.kind == "boolean":
        return "holds" if res.verdict else "violated"
    if res.infinite:
        return "+∞"
    return f"{res.value:.6g}"


def result_fingerprint(res: VerificationResult) -> str:
    """Hash of the result content (name, kind, rendered outcome)."""
    h = hashlib.sha256()
    h.update(f"{res.property}|{res.kind}|{render_value(res)}".encode())
    return h.hexdigest()


# One JSON object per line, fixed key order.
_RECORD_KEYS = ("property", "kind", "value", "infinite", "verdict", "marginal",
                "stats", "model_fingerprint")


def serialize_results(results) -> str:
    lines = []
    for r in results:
        rec = {k: getattr(r, k) for k in _RECORD_KEYS}
        lines.append(json.dumps(rec, sort_keys=False))
    return "\n".join(lines) + "\n"


def parse_results(text: str):
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        out.append(VerificationResult(
            rec["property"], rec["kind"], rec.get("value"),
            rec.get("infinite", False), rec.get("verdict"),
            rec.get("marginal", False), rec.get("stats", {}),
            rec.get("model_fingerprint", "")))
    return out
