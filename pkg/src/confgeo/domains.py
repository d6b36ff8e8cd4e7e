"""Synthetic domains with known reach, ball-mass constants, and analytic
geodesic oracles.

Each domain carries a sampler (a pure function of the seed), a dense
reference net standing in for the continuum, and a ground-truth distance
oracle that is independent of the graph estimator: truths come from
closed-form geometry or panel-doubling Gauss-Legendre quadrature refined
to a 1e-10 tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .factors import ConformalFactor, ConstantFactor
from .geometry import PointCloud, as_point, min_distances
from .seeding import make_rng

_TWO_PI = 2.0 * math.pi
_GL_ORDER = 32
_QUAD_TOL = 1e-10
_MAX_PANELS = 4096


def _panel_rule(panels: int):
    """Nodes/weights of composite Gauss-Legendre quadrature on [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(_GL_ORDER)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    offsets = np.arange(panels)[:, None] / panels
    all_nodes = (offsets + nodes[None, :] / panels).reshape(-1)
    all_weights = np.tile(weights / panels, panels)
    return all_nodes, all_weights


def _refine_quadrature(evaluate, tol=_QUAD_TOL):
    """Double quadrature panels until row-wise values stabilize to ``tol``."""
    previous = None
    panels = 1
    while panels <= _MAX_PANELS:
        nodes, weights = _panel_rule(panels)
        values = evaluate(nodes, weights)
        if previous is not None:
            scale = 1.0 + np.abs(values).max(initial=0.0)
            if np.abs(values - previous).max(initial=0.0) <= tol * scale:
                return values
        previous = values
        panels *= 2
    raise ArithmeticError("quadrature failed to reach the requested tolerance")


def segment_factor_mean(factor: ConformalFactor, starts, ends) -> np.ndarray:
    """Mean of the factor along straight segments, row-wise, to 1e-10."""
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    ends = np.atleast_2d(np.asarray(ends, dtype=np.float64))
    if isinstance(factor, ConstantFactor):
        return np.full(starts.shape[0], factor.value)

    def evaluate(nodes, weights):
        m, dim = starts.shape
        pts = starts[:, None, :] + nodes[None, :, None] * (
            ends[:, None, :] - starts[:, None, :]
        )
        vals = factor.evaluate_many(pts.reshape(-1, dim)).reshape(m, nodes.size)
        return vals @ weights

    return _refine_quadrature(evaluate)


def _arc_integrals(factor: ConformalFactor, theta_start, spans) -> np.ndarray:
    """Integral of f(cos t, sin t) over arcs [theta, theta + span]."""
    theta_start = np.atleast_1d(np.asarray(theta_start, dtype=np.float64))
    spans = np.atleast_1d(np.asarray(spans, dtype=np.float64))
    if isinstance(factor, ConstantFactor):
        return factor.value * spans

    def evaluate(nodes, weights):
        angles = theta_start[:, None] + nodes[None, :] * spans[:, None]
        pts = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        vals = factor.evaluate_many(pts.reshape(-1, 2))
        vals = vals.reshape(theta_start.size, nodes.size)
        return (vals @ weights) * spans

    return _refine_quadrature(evaluate)


def circle_truths(theta_a, theta_b, factor: ConformalFactor) -> np.ndarray:
    """Conformal distances on the unit circle: minimum over the two arcs."""
    theta_a = np.atleast_1d(np.asarray(theta_a, dtype=np.float64))
    theta_b = np.atleast_1d(np.asarray(theta_b, dtype=np.float64))
    ccw = np.mod(theta_b - theta_a, _TWO_PI)
    one = _arc_integrals(factor, theta_a, ccw)
    other = _arc_integrals(factor, theta_b, _TWO_PI - ccw)
    return np.minimum(one, other)


def circle_truth(theta_x: float, theta_y: float, factor: ConformalFactor) -> float:
    """Conformal distance between two angles on the unit circle."""
    return float(circle_truths([theta_x], [theta_y], factor)[0])


def sphere_truth(x, y) -> float:
    """Great-circle distance on the unit sphere (induced metric only)."""
    x = as_point(x)
    y = as_point(y)
    if x.size != 3 or y.size != 3:
        raise ValueError("sphere points live in R^3")
    for p in (x, y):
        if abs(np.linalg.norm(p) - 1.0) > 1e-9:
            raise ValueError("point is not on the unit sphere")
    return float(np.arccos(np.clip(np.dot(x, y), -1.0, 1.0)))


def flat_truth(x, y, factor: ConformalFactor) -> float:
    """Conformal distance on a convex flat domain: straight-line integral."""
    x = as_point(x)
    y = as_point(y)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    dist = float(np.linalg.norm(y - x))
    if dist == 0.0:
        return 0.0
    return dist * float(segment_factor_mean(factor, x[None], y[None])[0])


def _require_constant(factor: ConformalFactor | None) -> float:
    if factor is None:
        return 1.0
    if isinstance(factor, ConstantFactor):
        return factor.value
    raise NotImplementedError(
        "analytic conformal truth on the sphere exists only for constant factors"
    )


@dataclass(frozen=True)
class DomainModel:
    """A synthetic domain: sampler, reference net, and distance oracle.

    ``mass_lower``/``mass_upper`` bound the sampling measure's ball masses
    by ``mass_lower * r^d <= mu(B(x, r)) <= mass_upper * r^d``; the support
    scale ``mass_lower ** (-1/d)`` dominates the diameter.
    """

    name: str
    ambient_dim: int
    intrinsic_dim: int
    reach: float
    mass_lower: float
    mass_upper: float
    sampler: callable = field(repr=False)
    net_builder: callable = field(repr=False)
    truth_fn: callable = field(repr=False)
    truth_many_fn: callable | None = field(default=None, repr=False)

    @property
    def support_scale(self) -> float:
        return self.mass_lower ** (-1.0 / self.intrinsic_dim)

    def sample(self, seed, n: int) -> PointCloud:
        if n < 1:
            raise ValueError("n must be >= 1")
        return PointCloud(self.sampler(seed, n))

    def reference_net(self, resolution: int) -> PointCloud:
        if resolution < 2:
            raise ValueError("net resolution must be >= 2")
        return PointCloud(self.net_builder(resolution))

    def truth(self, x, y, factor: ConformalFactor | None = None) -> float:
        return self.truth_fn(x, y, factor)

    def truth_many(self, xs, ys, factor: ConformalFactor | None = None) -> np.ndarray:
        xs = np.atleast_2d(xs)
        ys = np.atleast_2d(ys)
        if self.truth_many_fn is not None:
            return self.truth_many_fn(xs, ys, factor)
        return np.array([self.truth_fn(x, y, factor) for x, y in zip(xs, ys)])


def _circle_sample(seed, n):
    rng = make_rng(seed, "circle")
    theta = rng.uniform(0.0, _TWO_PI, size=n)
    return np.column_stack([np.cos(theta), np.sin(theta)])


def _circle_net(resolution):
    theta = np.linspace(0.0, _TWO_PI, resolution, endpoint=False)
    return np.column_stack([np.cos(theta), np.sin(theta)])


def _circle_truth(x, y, factor):
    x = as_point(x)
    y = as_point(y)
    factor = ConstantFactor(1.0) if factor is None else factor
    return circle_truth(math.atan2(x[1], x[0]), math.atan2(y[1], y[0]), factor)


def _circle_truth_many(xs, ys, factor):
    factor = ConstantFactor(1.0) if factor is None else factor
    ta = np.arctan2(xs[:, 1], xs[:, 0])
    tb = np.arctan2(ys[:, 1], ys[:, 0])
    return circle_truths(ta, tb, factor)


def _sphere_sample(seed, n):
    rng = make_rng(seed, "sphere")
    raw = rng.normal(size=(n, 3))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def _sphere_net(resolution):
    # Fibonacci lattice: deterministic, nearly uniform
    i = np.arange(resolution, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / resolution
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def _sphere_truth(x, y, factor):
    return _require_constant(factor) * sphere_truth(x, y)


def _sphere_truth_many(xs, ys, factor):
    value = _require_constant(factor)
    dots = np.clip(np.sum(xs * ys, axis=1), -1.0, 1.0)
    return value * np.arccos(dots)


def _segment_sample(seed, n):
    rng = make_rng(seed, "segment")
    return rng.uniform(0.0, 1.0, size=(n, 1))


def _segment_net(resolution):
    return np.linspace(0.0, 1.0, resolution)[:, None]


def _flat_truth(x, y, factor):
    factor = ConstantFactor(1.0) if factor is None else factor
    return flat_truth(x, y, factor)


def _flat_truth_many(xs, ys, factor):
    factor = ConstantFactor(1.0) if factor is None else factor
    dists = np.linalg.norm(ys - xs, axis=1)
    out = np.zeros(xs.shape[0])
    moving = dists > 0
    if np.any(moving):
        means = segment_factor_mean(factor, xs[moving], ys[moving])
        out[moving] = dists[moving] * means
    return out


def _square_sample(seed, n):
    rng = make_rng(seed, "square")
    return rng.uniform(0.0, 1.0, size=(n, 2))


def _square_net(resolution):
    side = int(math.ceil(math.sqrt(resolution)))
    axis = np.linspace(0.0, 1.0, side)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([xx.reshape(-1), yy.reshape(-1)])


def unit_circle() -> DomainModel:
    """Unit circle in R^2 (intrinsic dimension 1, reach 1)."""
    return DomainModel(
        name="circle", ambient_dim=2, intrinsic_dim=1, reach=1.0,
        mass_lower=1.0 / _TWO_PI, mass_upper=0.5,
        sampler=_circle_sample, net_builder=_circle_net,
        truth_fn=_circle_truth, truth_many_fn=_circle_truth_many,
    )


def unit_sphere() -> DomainModel:
    """Unit sphere in R^3 (intrinsic dimension 2, reach 1).

    A Euclidean ball of radius r cuts a cap of normalized area exactly
    r^2/4, so both ball-mass constants equal 1/4.
    """
    return DomainModel(
        name="sphere", ambient_dim=3, intrinsic_dim=2, reach=1.0,
        mass_lower=0.25, mass_upper=0.25,
        sampler=_sphere_sample, net_builder=_sphere_net,
        truth_fn=_sphere_truth, truth_many_fn=_sphere_truth_many,
    )


def unit_segment() -> DomainModel:
    """Unit segment [0, 1] (convex, infinite reach)."""
    return DomainModel(
        name="segment", ambient_dim=1, intrinsic_dim=1, reach=math.inf,
        mass_lower=1.0, mass_upper=2.0,
        sampler=_segment_sample, net_builder=_segment_net,
        truth_fn=_flat_truth, truth_many_fn=_flat_truth_many,
    )


def unit_square() -> DomainModel:
    """Unit square [0, 1]^2 (convex, infinite reach)."""
    return DomainModel(
        name="square", ambient_dim=2, intrinsic_dim=2, reach=math.inf,
        mass_lower=0.5, mass_upper=math.pi,
        sampler=_square_sample, net_builder=_square_net,
        truth_fn=_flat_truth, truth_many_fn=_flat_truth_many,
    )


_DOMAIN_BUILDERS = {
    "circle": unit_circle,
    "sphere": unit_sphere,
    "segment": unit_segment,
    "square": unit_square,
}


def get_domain(name: str) -> DomainModel:
    try:
        return _DOMAIN_BUILDERS[name]()
    except KeyError:
        raise ValueError(
            f"unknown domain {name!r}; choices: {sorted(_DOMAIN_BUILDERS)}"
        ) from None


def domain_names() -> list[str]:
    return sorted(_DOMAIN_BUILDERS)


@dataclass(frozen=True)
class CarvedCubeFixture:
    """Flat cube with a ball-shaped notch carved into one edge.

    Two marked points sit where the carving sphere crosses the edge; the
    straight path between them survives in the intact cube but must follow
    the sphere in the carved one, stretching their distance from ``2 *
    notch`` to ``2 * reach * arcsin(notch / reach)``.
    """

    dim: int
    side_scale: float
    reach: float
    notch: float
    alpha: float
    x: np.ndarray
    y: np.ndarray
    center: np.ndarray

    @property
    def half_side(self) -> float:
        return self.alpha * self.side_scale

    @property
    def pre_carve_distance(self) -> float:
        return 2.0 * self.notch

    @property
    def post_carve_distance(self) -> float:
        return 2.0 * self.reach * math.asin(self.notch / self.reach)

    @property
    def distortion(self) -> float:
        t = self.notch / self.reach
        return (math.asin(t) - t) / math.asin(t)

    @property
    def distortion_lower_bound(self) -> float:
        return self.notch ** 2 / (6.0 * self.reach ** 2)

    @property
    def tv_upper_bound(self) -> float:
        beta = 2.0 * self.alpha ** (-self.dim) * (self.dim - 1) ** (
            -(self.dim - 1) / 2.0
        )
        return beta * self.notch ** (2 * self.dim - 1) / (
            self.side_scale ** self.dim * self.reach ** (self.dim - 1)
        )

    def _inside_notch(self, points: np.ndarray) -> np.ndarray:
        gap = points - self.center
        return np.einsum("ij,ij->i", gap, gap) < self.reach ** 2

    def sample_carved(self, seed, n: int) -> PointCloud:
        """Uniform sample of the carved cube by rejection."""
        rng = make_rng(seed, "carved-cube")
        h = self.half_side
        rows = []
        have = 0
        while have < n:
            batch = rng.uniform(-h, h, size=(max(n, 1024), self.dim))
            keep = batch[~self._inside_notch(batch)]
            rows.append(keep)
            have += keep.shape[0]
        return PointCloud(np.vstack(rows)[:n])

    def carved_fraction(self, seed, samples: int) -> tuple[float, float]:
        """Monte Carlo estimate of the carved volume fraction and its
        binomial standard error."""
        rng = make_rng(seed, "carved-volume")
        h = self.half_side
        hits = 0
        remaining = samples
        while remaining > 0:
            batch = min(remaining, 1 << 20)
            pts = rng.uniform(-h, h, size=(batch, self.dim))
            hits += int(self._inside_notch(pts).sum())
            remaining -= batch
        frac = hits / samples
        sigma = math.sqrt(max(frac * (1.0 - frac), 1.0 / samples) / samples)
        return frac, sigma


def carved_cube_fixture(dim: int, side_scale: float, reach: float,
                        notch: float, alpha: float = 0.25) -> CarvedCubeFixture:
    """Build the carved-cube fixture.

    The cube is [-alpha*L, alpha*L]^dim; the carving ball of radius
    ``reach`` is centered outside the cube so that it crosses the top edge
    (all trailing coordinates at the max corner value) at two points
    ``2 * notch`` apart.  Requires ``0 < notch <= min(alpha*L, reach)``.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if side_scale <= 0 or reach <= 0:
        raise ValueError("side_scale and reach must be positive")
    h = alpha * side_scale
    if not 0 < notch <= min(h, reach):
        raise ValueError(
            f"notch must lie in (0, min(alpha*L, reach)] = (0, {min(h, reach)}]"
        )
    lift = math.sqrt((reach ** 2 - notch ** 2) / (dim - 1))
    center = np.full(dim, h + lift)
    center[0] = 0.0
    x = np.full(dim, h)
    x[0] = -notch
    y = np.full(dim, h)
    y[0] = notch
    return CarvedCubeFixture(
        dim=dim, side_scale=float(side_scale), reach=float(reach),
        notch=float(notch), alpha=float(alpha), x=x, y=y, center=center,
    )


def hausdorff_moment_check(domain: DomainModel, n: int, trials: int, seed,
                           net_resolution: int = 4096) -> dict:
    """Monte Carlo first and second moments of the net-to-sample Hausdorff
    distance, against the bound ``2**(3p/2) * mass_lower**(-p/d) *
    (log(n)/n)**(p/d)`` for p in {1, 2}."""
    if n < 8:
        raise ValueError("n must be >= 8")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    net = domain.reference_net(net_resolution)
    values = np.empty(trials)
    for trial in range(trials):
        cloud = domain.sample((seed, trial), n)
        values[trial] = float(
            min_distances(net.coords, cloud.coords).max()
        )
    d = domain.intrinsic_dim
    rate = math.log(n) / n
    out = {"n": n, "trials": trials, "net_resolution": net_resolution}
    for p in (1, 2):
        bound = 2.0 ** (1.5 * p) * domain.mass_lower ** (-p / d) * rate ** (p / d)
        empirical = float(np.mean(values ** p))
        out[f"moment_p{p}"] = empirical
        out[f"bound_p{p}"] = bound
        out[f"ok_p{p}"] = bool(empirical <= bound)
    return out


def circle_chord_angle_check(delta: float, tau: float,
                             tolerance: float = 1e-9) -> bool:
    """Verify the chord-vs-tangent angle identities on a circle of radius tau.

    The angle between the forward chord over an arc step ``delta`` and the
    tangent equals exactly ``delta / (2 tau)``, and the normalized forward
    and backward chords differ by ``2 sin(delta / (2 tau))``, which meets
    the bound ``min(|v+|, |v-|) / tau`` with equality.
    """
    if not 0 < delta <= math.pi / 2.0 * tau:
        raise ValueError("delta must lie in (0, pi*tau/2]")
    t0 = 0.3  # arbitrary; the circle is homogeneous

    def gamma(t):
        return tau * np.array([math.cos(t / tau), math.sin(t / tau)])

    tangent = np.array([-math.sin(t0 / tau), math.cos(t0 / tau)])
    v_plus = gamma(t0 + delta) - gamma(t0)
    v_minus = gamma(t0) - gamma(t0 - delta)
    norm_plus = np.linalg.norm(v_plus)
    norm_minus = np.linalg.norm(v_minus)
    angle = math.acos(
        float(np.clip(np.dot(v_plus / norm_plus, tangent), -1.0, 1.0))
    )
    expected = delta / (2.0 * tau)
    if abs(angle - expected) > tolerance:
        return False
    step_gap = float(np.linalg.norm(v_plus / norm_plus - v_minus / norm_minus))
    if abs(step_gap - 2.0 * math.sin(expected)) > tolerance:
        return False
    bound = min(norm_plus, norm_minus) / tau
    return step_gap <= bound + tolerance
