"""Positive Lipschitz conformal factors with declared (kappa, f_min).

Every factor evaluates pointwise to a value >= ``f_min`` (a configurable
floor is applied where the raw formula could dip below it) and declares a
Lipschitz constant ``kappa``.  Declarations are validated by sampling, not
proved: see :func:`check_declaration`.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .geometry import PointCloud, as_point, pairwise_distances
from .seeding import make_rng


class ConformalFactor:
    """Base class: a positive function of ambient points.

    Subclasses implement :meth:`evaluate_many`; scalar evaluation wraps it.
    ``segment_mean`` optionally returns the exact average of the factor
    along straight segments, used as a closed-form fast path by
    infinite-resolution edge weights.
    """

    kind = "abstract"

    def __init__(self, kappa: float, f_min: float):
        if kappa < 0 or not np.isfinite(kappa):
            raise ValueError("kappa must be finite and >= 0")
        if f_min <= 0:
            raise ValueError("f_min must be positive")
        self.kappa = float(kappa)
        self.f_min = float(f_min)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, point) -> float:
        point = as_point(point)
        return float(self.evaluate_many(point[None, :])[0])

    def __call__(self, point) -> float:
        return self.evaluate(point)

    def segment_mean(self, starts: np.ndarray, ends: np.ndarray):
        """Exact mean of the factor along segments, or None if no closed form."""
        return None


class ConstantFactor(ConformalFactor):
    kind = "constant"

    def __init__(self, value: float):
        if value <= 0:
            raise ValueError("constant factor must be positive")
        super().__init__(kappa=0.0, f_min=float(value))
        self.value = float(value)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.full(points.shape[0], self.value)

    def segment_mean(self, starts, ends):
        starts = np.atleast_2d(starts)
        return np.full(starts.shape[0], self.value)


class RadialAffineFactor(ConformalFactor):
    """Affine function of one coordinate, floored at ``f_min``.

    ``f(x) = max(f_min, base + slope * x[axis])``.  The floor keeps the
    factor positive everywhere; on the region of intended use the raw
    affine value should stay above ``f_min``.
    """

    kind = "radial_affine"

    def __init__(self, base: float, axis: int = 0, slope: float = 1.0,
                 kappa: float | None = None, f_min: float | None = None):
        if axis < 0:
            raise ValueError("axis must be a non-negative coordinate index")
        if f_min is None:
            raise ValueError("radial_affine requires a declared f_min")
        super().__init__(kappa=abs(slope) if kappa is None else kappa,
                         f_min=f_min)
        self.base = float(base)
        self.axis = int(axis)
        self.slope = float(slope)

    def _raw(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.axis >= points.shape[1]:
            raise ValueError(
                f"dimension mismatch: axis {self.axis} outside dim {points.shape[1]}"
            )
        return self.base + self.slope * points[:, self.axis]

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.maximum(self.f_min, self._raw(points))

    def segment_mean(self, starts, ends):
        starts = np.atleast_2d(starts)
        ends = np.atleast_2d(ends)
        v0 = self._raw(starts)
        v1 = self._raw(ends)
        m = self.f_min
        lo = np.minimum(v0, v1)
        hi = np.maximum(v0, v1)
        plain = 0.5 * (v0 + v1)
        # segment crosses the floor: integrate the two linear pieces
        span = hi - lo
        with np.errstate(divide="ignore", invalid="ignore"):
            t_low = np.where(span > 0, (m - lo) / span, 0.0)
        t_low = np.clip(t_low, 0.0, 1.0)
        crossed = m * t_low + 0.5 * (m + hi) * (1.0 - t_low)
        out = np.where(lo >= m, plain, np.where(hi <= m, m, crossed))
        return out


class DensityPowerFactor(ConformalFactor):
    """Negative power of a user-supplied density: ``max(f_min, rho(x)**-beta)``.

    No density estimation is built in; ``density`` is a vectorized callback
    mapping an (m, dim) array to m positive values.
    """

    kind = "density_power"

    def __init__(self, density, beta: float, kappa: float, f_min: float,
                 density_name: str | None = None):
        if beta <= 0:
            raise ValueError("beta must be positive")
        super().__init__(kappa=kappa, f_min=f_min)
        self.density = density
        self.beta = float(beta)
        self.density_name = density_name

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        rho = np.asarray(self.density(points), dtype=np.float64)
        if rho.shape != (points.shape[0],):
            raise ValueError("density callback must return one value per point")
        if np.any(rho <= 0):
            raise ValueError("density values must be positive")
        return np.maximum(self.f_min, rho ** (-self.beta))


class DistanceToMeasureFactor(ConformalFactor):
    """Root-mean-square distance to the k nearest anchor points, floored.

    ``f(x) = max(floor, sqrt(mean of the k smallest squared distances from
    x to the anchors))``.  The raw value is 1-Lipschitz; the floor keeps it
    positive at the anchors themselves.
    """

    kind = "dtm"

    def __init__(self, anchors: PointCloud, k: int, floor: float = 1e-6):
        if not isinstance(anchors, PointCloud):
            anchors = PointCloud(anchors)
        if k < 1 or k > anchors.n:
            raise ValueError(f"k must be in [1, {anchors.n}], got {k}")
        if floor <= 0:
            raise ValueError("floor must be positive")
        super().__init__(kappa=1.0, f_min=float(floor))
        self.anchors = anchors
        self.k = int(k)
        self.floor = float(floor)

    def raw_value(self, points: np.ndarray) -> np.ndarray:
        """The distance-to-measure before flooring (may be zero at anchors)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.anchors.dim:
            raise ValueError(
                f"dimension mismatch: {points.shape[1]} vs {self.anchors.dim}"
            )
        sq = pairwise_distances(points, self.anchors.coords) ** 2
        if self.k < self.anchors.n:
            smallest = np.partition(sq, self.k - 1, axis=1)[:, : self.k]
        else:
            smallest = sq
        return np.sqrt(smallest.mean(axis=1))

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.maximum(self.floor, self.raw_value(points))


class ShiftedFactor(ConformalFactor):
    """A factor plus a constant offset; sup-distance to the base is exact."""

    kind = "shifted"

    def __init__(self, base: ConformalFactor, offset: float):
        super().__init__(kappa=base.kappa, f_min=base.f_min + offset)
        self.base = base
        self.offset = float(offset)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return self.base.evaluate_many(points) + self.offset

    def segment_mean(self, starts, ends):
        inner = self.base.segment_mean(starts, ends)
        if inner is None:
            return None
        return inner + self.offset


def conformal_reach_bound(tau_m: float, kappa: float, f_min: float) -> float:
    """Lower bound on the reach of every conformal geodesic.

    ``min(tau_m / 2, f_min / (8 * kappa))``; the second term is +inf when
    kappa == 0, so constant factors recover ``tau_m / 2``.
    """
    if tau_m <= 0:
        raise ValueError("tau_m must be positive")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if f_min <= 0:
        raise ValueError("f_min must be positive")
    factor_term = math.inf if kappa == 0 else f_min / (8.0 * kappa)
    return min(tau_m / 2.0, factor_term)


def perturb_factor(factor: ConformalFactor, eta: float, seed: int = 0) -> ConformalFactor:
    """A factor at sup-distance exactly ``eta`` from ``factor``.

    Realized as a constant upward shift, which is deterministic; the seed
    argument is accepted for interface stability but does not change the
    result.  Requires ``eta <= f_min / 2``.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if eta > factor.f_min / 2.0:
        raise ValueError(f"eta must be <= f_min/2 = {factor.f_min / 2.0}")
    if eta == 0:
        return factor
    return ShiftedFactor(factor, eta)


def _uniform_density(points: np.ndarray) -> np.ndarray:
    return np.ones(np.atleast_2d(points).shape[0])


def _gaussian_density(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    return np.exp(-0.5 * np.sum(points * points, axis=1))


BUILTIN_DENSITIES = {
    "uniform": _uniform_density,
    "gaussian": _gaussian_density,
}


def factor_from_config(config, base_dir=None) -> ConformalFactor:
    """Build a factor from a JSON-style config dict.

    Shapes: ``{"kind": "constant", "value": 1.0}``,
    ``{"kind": "radial_affine", "base": 2.0, "axis": 0, "slope": 1.0}``,
    ``{"kind": "dtm", "anchors": "<csv path>", "k": 10, "floor": 1e-6}``,
    ``{"kind": "density_power", "beta": 1.0, "density": "<built-in name>"}``.
    Each config may also carry declared ``"kappa"`` and ``"f_min"``.
    """
    if isinstance(config, (str, Path)):
        config = json.loads(Path(config).read_text(encoding="utf-8"))
    if not isinstance(config, dict):
        raise ValueError("factor config must be a JSON object")
    kind = config.get("kind")
    if kind == "constant":
        return ConstantFactor(float(config["value"]))
    if kind == "radial_affine":
        slope = float(config.get("slope", 1.0))
        f_min = config.get("f_min")
        if f_min is None:
            raise ValueError("radial_affine config requires f_min")
        return RadialAffineFactor(
            base=float(config["base"]),
            axis=int(config.get("axis", 0)),
            slope=slope,
            kappa=float(config["kappa"]) if "kappa" in config else None,
            f_min=float(f_min),
        )
    if kind == "dtm":
        anchors = config["anchors"]
        if isinstance(anchors, (str, Path)):
            path = Path(anchors)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            anchors = PointCloud.from_csv(path)
        else:
            anchors = PointCloud(anchors)
        return DistanceToMeasureFactor(
            anchors, k=int(config["k"]), floor=float(config.get("floor", 1e-6))
        )
    if kind == "density_power":
        name = config.get("density", "uniform")
        if name not in BUILTIN_DENSITIES:
            raise ValueError(
                f"unknown built-in density {name!r}; choices: {sorted(BUILTIN_DENSITIES)}"
            )
        if "kappa" not in config or "f_min" not in config:
            raise ValueError("density_power config requires declared kappa and f_min")
        return DensityPowerFactor(
            BUILTIN_DENSITIES[name],
            beta=float(config["beta"]),
            kappa=float(config["kappa"]),
            f_min=float(config["f_min"]),
            density_name=name,
        )
    raise ValueError(f"unknown factor kind: {kind!r}")


def factor_config(factor: ConformalFactor) -> dict:
    """JSON-ready description of a factor (anchors are not serialized)."""
    base = {"kind": factor.kind, "kappa": factor.kappa, "f_min": factor.f_min}
    if isinstance(factor, ConstantFactor):
        base["value"] = factor.value
    elif isinstance(factor, RadialAffineFactor):
        base.update(base_value=factor.base, axis=factor.axis, slope=factor.slope)
    elif isinstance(factor, DensityPowerFactor):
        base.update(beta=factor.beta, density=factor.density_name)
    elif isinstance(factor, DistanceToMeasureFactor):
        base.update(k=factor.k, floor=factor.floor, anchors_n=factor.anchors.n)
    elif isinstance(factor, ShiftedFactor):
        base.update(offset=factor.offset, base_kind=factor.base.kind)
    return base


def check_declaration(factor: ConformalFactor, lower, upper,
                      pairs: int = 10_000, seed: int = 0) -> dict:
    """Sampled validation of the declared (kappa, f_min) inside a box.

    Draws random point pairs uniformly in the box [lower, upper] and checks
    |f(x)-f(y)| <= kappa * ||x-y|| plus the pointwise lower bound.  This is
    evidence, not certification.
    """
    lower = as_point(lower)
    upper = as_point(upper)
    rng = make_rng(seed, "factor-declaration")
    xs = rng.uniform(lower, upper, size=(pairs, lower.size))
    ys = rng.uniform(lower, upper, size=(pairs, lower.size))
    fx = factor.evaluate_many(xs)
    fy = factor.evaluate_many(ys)
    gaps = np.linalg.norm(xs - ys, axis=1)
    keep = gaps > 0
    ratios = np.abs(fx[keep] - fy[keep]) / gaps[keep]
    min_value = float(min(fx.min(), fy.min()))
    max_ratio = float(ratios.max()) if ratios.size else 0.0
    return {
        "lipschitz_ok": bool(max_ratio <= factor.kappa * (1 + 1e-9) + 1e-12),
        "lower_ok": bool(min_value >= factor.f_min - 1e-12),
        "max_lipschitz_ratio": max_ratio,
        "min_value": min_value,
    }
