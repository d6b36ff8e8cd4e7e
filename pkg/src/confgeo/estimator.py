"""The graph-metric estimator: parameter selection, error budgets, losses.

Parameter rules follow the sample-size scalings under which the estimator
provably converges; their outputs are clamped into valid ranges with the
clamping recorded.  Error budgets are a priori upper bounds on the
worst-case multiplicative error, used by the experiment harness as
containment checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .factors import ConformalFactor
from .geometry import PointCloud, nearest_indices
from .graphs import (
    Ball,
    GraphKind,
    INFINITE_RESOLUTION,
    Knn,
    build_graph,
    check_resolution,
)
from .seeding import make_rng
from .shortest_path import dijkstra_matrix

RULES = ("manual", "ball_rate1", "ball_rate2", "knn_default")


@dataclass(frozen=True)
class EstimatorParams:
    """Graph kind and weight resolution, plus rule provenance."""

    kind: GraphKind
    q: float | int
    rule: str = "manual"
    clamped: bool = False
    inputs: dict | None = None

    def describe(self) -> dict:
        out = {"rule": self.rule, "clamped": self.clamped,
               "q": "inf" if self.q == INFINITE_RESOLUTION else int(self.q)}
        if isinstance(self.kind, Ball):
            out["graph"] = "ball"
            out["r"] = self.kind.r
        else:
            out["graph"] = "knn"
            out["k"] = self.kind.k
        if self.inputs:
            out["inputs"] = dict(self.inputs)
        return out


@dataclass
class LossReport:
    """Worst-case multiplicative losses over a finite pair set.

    ``ell_inf`` is the symmetric loss |D' - D| / max(D', D) in [0, 1];
    ``l_inf`` is |1 - D'/D|.  Any infinite estimate forces (1, inf).
    """

    ell_inf: float
    l_inf: float
    pair_count: int
    worst_pair: tuple[int, int] | None = None


def weight_distortion_bound(dist: float, q, kappa: float, f_min: float,
                            conformal_reach: float) -> float:
    """Upper bound on the relative gap between an edge weight and the true
    conformal distance of its endpoints, valid for dist <= conformal_reach.

    ``kappa * dist / (4 * f_min * (q - 1)) + dist^2 / (16 * reach^2)``;
    the first term is 0 at infinite resolution.
    """
    if dist < 0:
        raise ValueError("dist must be >= 0")
    if conformal_reach <= 0:
        raise ValueError("conformal_reach must be positive")
    q = check_resolution(q)
    first = 0.0 if q == INFINITE_RESOLUTION else (
        kappa * dist / (4.0 * f_min * (q - 1))
    )
    return first + dist * dist / (16.0 * conformal_reach ** 2)


def approximation_error_budget(r: float, q, conformal_reach: float,
                               cover_radius: float) -> float:
    """A priori bound on the worst multiplicative error of the ball-graph
    estimator at threshold r, resolution q, and sample cover radius rho.

    ``r / (32 (q-1) reach) + r^2 / (8 reach^2) + 56 rho^2 / r^2``; the
    first term is 0 at infinite resolution.  Valid when
    ``4 rho <= r <= reach`` (see :func:`budget_feasible`); the value is
    still computed outside that regime.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if conformal_reach <= 0:
        raise ValueError("conformal_reach must be positive")
    q = check_resolution(q)
    first = 0.0 if q == INFINITE_RESOLUTION else r / (
        32.0 * (q - 1) * conformal_reach
    )
    second = r * r / (8.0 * conformal_reach ** 2)
    third = 56.0 * cover_radius ** 2 / (r * r)
    return first + second + third


def budget_feasible(r: float, conformal_reach: float,
                    cover_radius: float) -> bool:
    """Whether (r, rho) sit in the regime where the budget is a theorem."""
    return 4.0 * cover_radius <= r <= conformal_reach


def select_params(rule: str, n: int, d: int,
                  support_scale: float | None = None,
                  conformal_reach: float | None = None,
                  r: float | None = None, k: int | None = None,
                  q=None) -> EstimatorParams:
    """Theory-driven estimator parameters.

    - ``ball_rate1``: r = 8 sqrt(scale * reach) (log n / n)^(1/2d) clamped
      to the conformal reach, q = ceil(1 + 4 reach / r).
    - ``ball_rate2``: r = 8 scale^(2/3) reach^(1/3) (log n / n)^(2/3d)
      clamped, q = 2.
    - ``knn_default``: k = ceil(sqrt(n log n)) clamped to n - 1,
      q = ceil(n^(1/4)).  Does not depend on d.
    - ``manual``: pass r or k plus q explicitly.
    """
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}; choices: {RULES}")
    if n < 2:
        raise ValueError("n must be >= 2")
    if d < 1:
        raise ValueError("d must be >= 1")
    if d < 2 and rule != "manual":
        warnings.warn(
            "parameter rules assume intrinsic dimension >= 2; "
            "d=1 is accepted but the rate guarantees are nominal",
            stacklevel=2,
        )

    if rule == "manual":
        if (r is None) == (k is None):
            raise ValueError("manual rule takes exactly one of r or k")
        if q is None:
            raise ValueError("manual rule requires q")
        kind: GraphKind = Ball(float(r)) if r is not None else Knn(int(k))
        return EstimatorParams(kind, check_resolution(q), "manual", False,
                               {"n": n, "d": d})

    inputs = {"n": n, "d": d}
    if rule == "knn_default":
        k_raw = math.ceil(math.sqrt(n * math.log(n)))
        clamped = k_raw > n - 1
        k_val = max(1, min(k_raw, n - 1))
        q_val = max(2, math.ceil(n ** 0.25))
        return EstimatorParams(Knn(k_val), q_val, rule, clamped, inputs)

    if support_scale is None or conformal_reach is None:
        raise ValueError(f"rule {rule!r} needs support_scale and conformal_reach")
    if support_scale <= 0 or conformal_reach <= 0:
        raise ValueError("support_scale and conformal_reach must be positive")
    inputs.update(support_scale=support_scale, conformal_reach=conformal_reach)
    rate = math.log(n) / n

    if rule == "ball_rate1":
        r_raw = 8.0 * math.sqrt(support_scale * conformal_reach) * rate ** (
            1.0 / (2 * d)
        )
        clamped = r_raw > conformal_reach
        r_val = min(r_raw, conformal_reach)
        if math.isinf(conformal_reach):
            # the resolution-dependent error term vanishes with the reach
            q_val: float | int = 2
        else:
            q_val = math.ceil(1.0 + 4.0 * conformal_reach / r_val)
        return EstimatorParams(Ball(r_val), q_val, rule, clamped, inputs)

    # ball_rate2
    r_raw = 8.0 * support_scale ** (2.0 / 3.0) * conformal_reach ** (
        1.0 / 3.0
    ) * rate ** (2.0 / (3 * d))
    clamped = r_raw > conformal_reach
    r_val = min(r_raw, conformal_reach)
    return EstimatorParams(Ball(r_val), 2, rule, clamped, inputs)


def estimate_matrix(cloud: PointCloud, params: EstimatorParams,
                    factor: ConformalFactor, pairs) -> np.ndarray:
    """Graph-metric estimates for the requested index pairs.

    One graph build plus one shortest-path run per distinct source; +inf
    marks unreachable pairs.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must be an (m, 2) index array")
    if pairs.size and (pairs.min() < 0 or pairs.max() >= cloud.n):
        raise IndexError("pair index out of range")
    graph = build_graph(cloud, params.kind, factor, params.q)
    if pairs.size == 0:
        return np.empty(0)
    sources = np.unique(pairs[:, 0])
    dmat = dijkstra_matrix(graph, sources)
    row_of = {int(s): i for i, s in enumerate(sources)}
    return np.array([dmat[row_of[int(i)], int(j)] for i, j in pairs])


def loss(estimates, truths, pairs=None) -> LossReport:
    """Worst-case multiplicative losses of estimates against positive truths.

    Raises on non-positive truths; callers exclude coincident pairs first.
    Any infinite estimate yields ``ell_inf = 1`` and ``l_inf = inf``.
    """
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truths, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 1:
        raise ValueError("estimates and truths must be 1-D of equal length")
    if est.size == 0:
        raise ValueError("need at least one pair")
    if np.any(tru <= 0) or not np.all(np.isfinite(tru)):
        raise ValueError("ground-truth distances must be positive and finite")
    if pairs is not None:
        pairs = np.asarray(pairs, dtype=np.int64)
        if pairs.shape != (est.size, 2):
            raise ValueError("pairs must align with the estimates")

    finite = np.isfinite(est)
    if not finite.all():
        bad = int(np.nonzero(~finite)[0][0])
        worst = (int(pairs[bad, 0]), int(pairs[bad, 1])) if pairs is not None else None
        return LossReport(1.0, math.inf, est.size, worst)
    ell_values = np.abs(est - tru) / np.maximum(est, tru)
    l_values = np.abs(1.0 - est / tru)
    worst_idx = int(np.argmax(ell_values))
    worst = (
        (int(pairs[worst_idx, 0]), int(pairs[worst_idx, 1]))
        if pairs is not None else None
    )
    return LossReport(float(ell_values.max()), float(l_values.max()),
                      est.size, worst)


def sample_loss_pairs(n: int, budget: int, seed, *,
                      coords: np.ndarray | None = None,
                      net_coords: np.ndarray | None = None,
                      net_pair_count: int = 100,
                      net_source_count: int = 10,
                      source_count: int = 12) -> np.ndarray:
    """A finite pair set standing in for the sup over the whole domain.

    All pairs when there are at most ``budget`` of them; otherwise a seeded
    random subset grouped under ``source_count`` distinct sources
    (shortest-path runs are per-source, and a sample-size-independent
    source count keeps the sampled sup comparable across a convergence
    grid), plus pairs of reference-net points mapped to their nearest
    sample indices for coverage.
    """
    if n < 2:
        raise ValueError("need n >= 2 to form pairs")
    total = n * (n - 1) // 2
    if total <= budget:
        iu, ju = np.triu_indices(n, k=1)
        return np.column_stack([iu, ju]).astype(np.int64)

    rng = make_rng(seed, "loss-pairs")
    n_sources = min(max(2, source_count), n)
    per_source = min(n - 1, math.ceil(budget / n_sources))
    sources = np.sort(rng.choice(n, size=n_sources, replace=False))
    blocks = []
    for s in sources:
        others = np.delete(np.arange(n), s)
        targets = rng.choice(others, size=per_source, replace=False)
        blocks.append(np.column_stack([np.full(targets.size, s), targets]))
    pairs = np.vstack(blocks)[:budget]

    if net_coords is not None and coords is not None and net_pair_count > 0:
        srcs = rng.choice(net_coords.shape[0], size=net_source_count,
                          replace=False)
        tgts = rng.choice(net_coords.shape[0],
                          size=(net_source_count,
                                math.ceil(net_pair_count / net_source_count)),
                          replace=True)
        mapped_src = nearest_indices(net_coords[srcs], coords)
        net_rows = []
        for row, s_idx in enumerate(mapped_src):
            mapped_tgt = nearest_indices(net_coords[tgts[row]], coords)
            for t_idx in mapped_tgt:
                if t_idx != s_idx:
                    net_rows.append((int(s_idx), int(t_idx)))
        if net_rows:
            pairs = np.vstack([pairs, np.asarray(net_rows, dtype=np.int64)])

    # stable dedupe, first occurrence wins
    keys = pairs[:, 0] * n + pairs[:, 1]
    _, first = np.unique(keys, return_index=True)
    return pairs[np.sort(first)]


def arcsin_gap_upper_bounds(t: np.ndarray) -> dict[str, np.ndarray]:
    """Four closed forms dominating arcsin(t) - t on (0, 1/2]."""
    t = np.asarray(t, dtype=np.float64)
    a = np.arcsin(t)
    return {
        "cubed_arcsin": a ** 3 / 6.0,
        "arcsin_t_squared": 4.0 * (1.0 - 3.0 / math.pi) * a * t * t,
        "cubed_t": 4.0 * (math.pi / 3.0 - 1.0) * t ** 3,
        "doubled_argument": 0.125 * (np.arcsin(2.0 * t) - 2.0 * t),
    }


def arcsin_gap_lower_bounds(t: np.ndarray) -> dict[str, np.ndarray]:
    """Two closed forms dominated by arcsin(t) - t on [0, 1]."""
    t = np.asarray(t, dtype=np.float64)
    return {
        "arcsin_t_squared_over_6": np.arcsin(t) * t * t / 6.0,
        "cubed_t_over_6": t ** 3 / 6.0,
    }


def check_arcsin_gap_inequalities(grid: int = 10_000,
                                  slack: float = 1e-12) -> dict:
    """Grid check of the arcsin-gap inequality families.

    Some of the upper bounds meet the gap with equality at t = 1/2, so a
    tiny additive slack absorbs floating-point ties.
    """
    t_upper = np.linspace(0.5 / grid, 0.5, grid)
    gap_upper = np.arcsin(t_upper) - t_upper
    violations = {}
    for name, values in arcsin_gap_upper_bounds(t_upper).items():
        violations[f"upper_{name}"] = int(np.sum(values < gap_upper - slack))
    t_lower = np.linspace(0.0, 1.0, grid)
    gap_lower = np.arcsin(t_lower) - t_lower
    lowers = arcsin_gap_lower_bounds(t_lower)
    violations["lower_arcsin_t_squared_over_6"] = int(
        np.sum(lowers["arcsin_t_squared_over_6"] > gap_lower + slack)
    )
    violations["lower_chain"] = int(
        np.sum(lowers["cubed_t_over_6"] > lowers["arcsin_t_squared_over_6"] + slack)
    )
    violations["total"] = sum(violations.values())
    return violations


def _json_safe(value):
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_json_safe(item) for item in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def results_payload(params: EstimatorParams, pairs, estimates,
                    truths=None, report: LossReport | None = None,
                    budget: float | None = None, extra: dict | None = None) -> dict:
    """JSON-ready estimation results; non-finite floats become strings."""
    payload = {
        "params": params.describe(),
        "pairs": np.asarray(pairs, dtype=np.int64).tolist(),
        "estimates": list(np.asarray(estimates, dtype=np.float64)),
    }
    if truths is not None:
        payload["truths"] = list(np.asarray(truths, dtype=np.float64))
    if report is not None:
        payload["ell_inf"] = report.ell_inf
        payload["l_inf"] = report.l_inf
        payload["worst_pair"] = report.worst_pair
        payload["pair_count"] = report.pair_count
    if budget is not None:
        payload["budget"] = budget
    if extra:
        payload.update(extra)
    return _json_safe(payload)
