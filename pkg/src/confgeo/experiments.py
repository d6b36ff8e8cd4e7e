"""Experiment harness: estimation runs, convergence studies, graph
sandwich trials, carved-cube reports, and the self-test suites.

Every run is a pure function of its configuration and seed; payloads are
JSON-ready dicts with deterministic content.
"""

from __future__ import annotations

import math

import numpy as np

from .domains import (
    DomainModel,
    carved_cube_fixture,
    circle_chord_angle_check,
    hausdorff_moment_check,
)
from .estimator import (
    EstimatorParams,
    _json_safe,
    approximation_error_budget,
    budget_feasible,
    check_arcsin_gap_inequalities,
    estimate_matrix,
    loss,
    sample_loss_pairs,
    select_params,
)
from .factors import (
    ConformalFactor,
    ConstantFactor,
    RadialAffineFactor,
    conformal_reach_bound,
    factor_config,
    perturb_factor,
)
from .geometry import PointCloud, hausdorff_distance
from .graphs import (
    Ball,
    INFINITE_RESOLUTION,
    Knn,
    build_ball_graph,
    build_knn_graph,
    edge_weight,
    edge_weights,
    is_subgraph,
    sandwich_failure_bound,
    sandwich_radii,
)
from .seeding import make_rng
from .shortest_path import dijkstra, dijkstra_matrix

DEFAULT_PAIR_BUDGET = 10_000


def domain_conformal_reach(domain: DomainModel, factor: ConformalFactor) -> float:
    return conformal_reach_bound(domain.reach, factor.kappa, factor.f_min)


def _pair_losses(domain: DomainModel, cloud: PointCloud,
                 params: EstimatorParams, factor: ConformalFactor,
                 pairs: np.ndarray):
    """Estimates, truths and the loss report with coincident pairs dropped."""
    xs = cloud.coords[pairs[:, 0]]
    ys = cloud.coords[pairs[:, 1]]
    truths = domain.truth_many(xs, ys, factor)
    keep = truths > 0
    pairs = pairs[keep]
    truths = truths[keep]
    estimates = estimate_matrix(cloud, params, factor, pairs)
    return estimates, truths, pairs, loss(estimates, truths, pairs)


def run_estimate(cloud: PointCloud, params: EstimatorParams,
                 factor: ConformalFactor, pairs,
                 domain: DomainModel | None = None,
                 seed=0) -> dict:
    """Pairwise estimates, with losses and budget when a truth oracle exists."""
    pairs = np.asarray(pairs, dtype=np.int64)
    estimates = estimate_matrix(cloud, params, factor, pairs)
    truths = None
    report = None
    budget = None
    if domain is not None:
        xs = cloud.coords[pairs[:, 0]]
        ys = cloud.coords[pairs[:, 1]]
        truths = domain.truth_many(xs, ys, factor)
        positive = truths > 0
        if positive.any():
            report = loss(estimates[positive], truths[positive],
                          pairs[positive])
        if isinstance(params.kind, Ball):
            reach = domain_conformal_reach(domain, factor)
            net = domain.reference_net(DEFAULT_PAIR_BUDGET)
            rho = hausdorff_distance(net, cloud)
            budget = approximation_error_budget(params.kind.r, params.q,
                                                reach, rho)
    from .estimator import results_payload

    extra = {"seed": _json_safe(seed), "factor": factor_config(factor)}
    if domain is not None:
        extra["domain"] = domain.name
    return results_payload(params, pairs, estimates, truths, report,
                           budget, extra)


def _fit_loglog_slope(ns, means):
    xs = np.log(np.asarray(ns, dtype=np.float64))
    ys = np.log(np.asarray(means, dtype=np.float64))
    slope, intercept = np.polyfit(xs, ys, deg=1)
    return float(slope), float(intercept)


def run_convergence(domain: DomainModel, factor: ConformalFactor, rule: str,
                    n_grid, trials: int, seed,
                    pair_budget: int = DEFAULT_PAIR_BUDGET,
                    net_resolution: int = 2048) -> dict:
    """Mean loss against sample size with a fitted log-log slope.

    Deterministic given (config, seed); aggregation order is fixed by the
    (n, trial) index.
    """
    n_grid = [int(v) for v in n_grid]
    if sorted(n_grid) != n_grid or len(set(n_grid)) != len(n_grid):
        raise ValueError("the n grid must be strictly increasing")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if rule == "manual":
        raise ValueError("convergence studies need a named parameter rule")
    reach = domain_conformal_reach(domain, factor)
    net = domain.reference_net(net_resolution)
    per_n = []
    for n in n_grid:
        params = select_params(
            rule, n, domain.intrinsic_dim,
            support_scale=domain.support_scale, conformal_reach=reach,
        )
        losses = []
        for trial in range(trials):
            cloud = domain.sample((seed, n, trial), n)
            pairs = sample_loss_pairs(
                n, pair_budget, (seed, n, trial),
                coords=cloud.coords, net_coords=net.coords,
            )
            _, _, _, report = _pair_losses(domain, cloud, params, factor, pairs)
            losses.append(report.ell_inf)
        arr = np.asarray(losses)
        per_n.append({
            "n": n,
            "params": params.describe(),
            "mean_ell_inf": float(arr.mean()),
            "stderr": float(arr.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
            "losses": [float(v) for v in arr],
        })
    payload = {
        "domain": domain.name,
        "factor": factor_config(factor),
        "rule": rule,
        "trials": trials,
        "seed": _json_safe(seed),
        "per_n": per_n,
        "predicted_slope": (
            -2.0 / (3.0 * domain.intrinsic_dim) if rule == "ball_rate2"
            else -1.0 / domain.intrinsic_dim
        ),
    }
    finite = [(entry["n"], entry["mean_ell_inf"]) for entry in per_n
              if entry["mean_ell_inf"] > 0]
    if len(finite) >= 2:
        slope, intercept = _fit_loglog_slope(*zip(*finite))
        payload["slope"] = slope
        payload["intercept"] = intercept
    else:
        payload["slope"] = None
        payload["intercept"] = None
    # soft monotonicity: reported, never asserted
    monotone = True
    for prev, curr in zip(per_n, per_n[1:]):
        if curr["mean_ell_inf"] > prev["mean_ell_inf"] + 2.0 * (
            prev["stderr"] + curr["stderr"]
        ):
            monotone = False
    payload["monotone_within_2se"] = monotone
    return _json_safe(payload)


def run_graph_equivalence(domain: DomainModel, n: int, k: int, eps: float,
                          trials: int, seed) -> dict:
    """Empirical frequency of the ball/k-NN sandwich inclusions."""
    r_minus, r_plus = sandwich_radii(
        k, n, eps, domain.mass_lower, domain.mass_upper, domain.intrinsic_dim
    )
    bound = 1.0 - sandwich_failure_bound(n, k, eps)
    factor = ConstantFactor(1.0)
    lower_hits = 0
    upper_hits = 0
    both_hits = 0
    for trial in range(trials):
        cloud = domain.sample((seed, trial), n)
        knn = build_knn_graph(cloud, k, factor, 2)
        lower = is_subgraph(build_ball_graph(cloud, r_minus, factor, 2), knn)
        upper = is_subgraph(knn, build_ball_graph(cloud, r_plus, factor, 2))
        lower_hits += lower
        upper_hits += upper
        both_hits += lower and upper
    return _json_safe({
        "domain": domain.name, "n": n, "k": k, "eps": eps,
        "trials": trials, "seed": _json_safe(seed),
        "r_minus": r_minus, "r_plus": r_plus,
        "lower_inclusion_freq": lower_hits / trials,
        "upper_inclusion_freq": upper_hits / trials,
        "both_inclusion_freq": both_hits / trials,
        "probability_bound": bound,
        "bound_vacuous": bound < 0,
    })


def run_carved_cube(dim: int, side_scale: float, reach: float, notch: float,
                    mc_samples: int, seed) -> dict:
    """Analytic carved-cube quantities plus the Monte Carlo volume check."""
    fixture = carved_cube_fixture(dim, side_scale, reach, notch)
    fraction, sigma = fixture.carved_fraction(seed, mc_samples)
    return _json_safe({
        "dim": dim, "side_scale": side_scale, "reach": reach, "notch": notch,
        "alpha": fixture.alpha, "seed": _json_safe(seed),
        "pre_carve_distance": fixture.pre_carve_distance,
        "post_carve_distance": fixture.post_carve_distance,
        "distortion": fixture.distortion,
        "distortion_lower_bound": fixture.distortion_lower_bound,
        "tv_upper_bound": fixture.tv_upper_bound,
        "mc_samples": mc_samples,
        "carved_fraction": fraction,
        "carved_fraction_sigma": sigma,
        "fraction_within_bound": fraction <= fixture.tv_upper_bound + 3.0 * sigma,
    })


def run_hausdorff(domain: DomainModel, ns, trials: int, seed,
                  net_resolution: int = 4096) -> dict:
    """Hausdorff moment estimates against their sampling bounds."""
    results = [
        hausdorff_moment_check(domain, int(n), trials, (seed, int(n)),
                               net_resolution=net_resolution)
        for n in ns
    ]
    return _json_safe({
        "domain": domain.name, "trials": trials, "seed": _json_safe(seed),
        "results": results,
        "all_ok": all(r["ok_p1"] and r["ok_p2"] for r in results),
    })


def _floyd_warshall(dense: np.ndarray) -> np.ndarray:
    dist = dense.copy()
    n = dist.shape[0]
    np.fill_diagonal(dist, 0.0)
    for mid in range(n):
        np.minimum(dist, dist[:, mid, None] + dist[None, mid, :], out=dist)
    return dist


def _graph_dense(graph) -> np.ndarray:
    dense = np.full((graph.n, graph.n), np.inf)
    dense[graph.edge_u, graph.edge_v] = graph.edge_w
    dense[graph.edge_v, graph.edge_u] = graph.edge_w
    return dense


def run_selftest(seed=0, inject: str | None = None) -> tuple[dict, bool]:
    """Run the cross-module property suites; returns (payload, all_ok).

    ``inject="weight-asymmetry"`` corrupts one directed weight copy before
    the symmetry check, as a negative control that the check can fail.
    """
    suites = []

    def record(name, ok, detail=""):
        suites.append({"suite": name, "ok": bool(ok), "detail": detail})

    violations = check_arcsin_gap_inequalities()
    record("arcsin-gap-inequalities", violations["total"] == 0,
           f"violations={violations['total']}")

    rng = make_rng(seed, "selftest")
    factor = RadialAffineFactor(base=2.0, axis=0, slope=1.0, f_min=0.5)
    quad_ok = True
    for _ in range(200):
        x, y, x2, y2 = rng.uniform(-1.0, 1.0, size=(4, 3))
        d1 = np.linalg.norm(x - y)
        d2 = np.linalg.norm(x2 - y2)
        if min(d1, d2) < 1e-6:
            continue
        for q in (2, 3, 7):
            lhs = abs(edge_weight(factor, q, x, y) / d1
                      - edge_weight(factor, q, x2, y2) / d2)
            bound = factor.kappa * (np.linalg.norm(x - x2)
                                    + np.linalg.norm(y - y2)) / 2.0
            if lhs > bound + 1e-9:
                quad_ok = False
    record("weight-endpoint-lipschitz", quad_ok)

    shifted = perturb_factor(factor, 0.2)
    shift_ok = True
    for _ in range(200):
        x, y = rng.uniform(-1.0, 1.0, size=(2, 3))
        d = np.linalg.norm(x - y)
        for q in (2, 5, INFINITE_RESOLUTION):
            gap = abs(edge_weight(shifted, q, x, y)
                      - edge_weight(factor, q, x, y))
            if gap > d * 0.2 + 1e-9:
                shift_ok = False
    record("weight-factor-shift", shift_ok)

    gap_ok = True
    for _ in range(100):
        x, y = rng.uniform(-1.0, 1.0, size=(2, 3))
        d = np.linalg.norm(x - y)
        w_inf = edge_weight(factor, INFINITE_RESOLUTION, x, y)
        for q in (2, 3, 5):
            gap = abs(edge_weight(factor, q, x, y) - w_inf)
            if gap > factor.kappa * d * d / (4.0 * (q - 1)) + 1e-9:
                gap_ok = False
    record("weight-resolution-gap", gap_ok)

    dij_ok = True
    for trial in range(5):
        coords = make_rng(seed, "selftest-graphs", trial).uniform(
            0.0, 1.0, size=(40, 2)
        )
        cloud = PointCloud(coords)
        graph = build_ball_graph(cloud, 0.3, ConstantFactor(1.0), 2)
        oracle = _floyd_warshall(_graph_dense(graph))
        for source in (0, 7, 23):
            gap = np.abs(dijkstra(graph, source) - oracle[source])
            gap = gap[np.isfinite(oracle[source])]
            if gap.size and gap.max() > 1e-12:
                dij_ok = False
    record("dijkstra-vs-floyd-warshall", dij_ok)

    cloud = PointCloud(make_rng(seed, "selftest-metric").uniform(
        0.0, 1.0, size=(60, 2)
    ))
    graph = build_ball_graph(cloud, 0.4, ConstantFactor(1.0), 2)
    dmat = dijkstra_matrix(graph, np.arange(cloud.n))
    sym_gap = float(np.nanmax(np.abs(dmat - dmat.T)))
    finite = np.isfinite(dmat).all()
    tri_ok = True
    if finite:
        for mid in range(0, cloud.n, 7):
            if np.any(dmat > dmat[:, mid, None] + dmat[None, mid, :] + 1e-9):
                tri_ok = False
    record("metric-axioms", sym_gap <= 1e-12 and tri_ok,
           f"symmetry_gap={sym_gap:.3e}")

    weights = graph.weights.copy()
    if inject == "weight-asymmetry" and weights.size:
        weights[0] += 0.5
    asym = 0
    for u in range(graph.n):
        nbrs, ws = graph.indices[graph.indptr[u]:graph.indptr[u + 1]], \
            weights[graph.indptr[u]:graph.indptr[u + 1]]
        for v, w in zip(nbrs, ws):
            lo, hi = graph.indptr[v], graph.indptr[v + 1]
            pos = np.searchsorted(graph.indices[lo:hi], u)
            if pos >= hi - lo or graph.indices[lo + pos] != u or \
                    weights[lo + pos] != w:
                asym += 1
    record("weight-symmetry", asym == 0, f"asymmetric_entries={asym}")

    record("circle-chord-angle", circle_chord_angle_check(0.5, 1.0))

    all_ok = all(s["ok"] for s in suites)
    payload = _json_safe({
        "seed": _json_safe(seed),
        "inject": inject,
        "suites": suites,
        "all_ok": all_ok,
    })
    return payload, all_ok
