"""Command-line driver.

Subcommands: estimate, convergence, graph-equiv, carved-cube, hausdorff,
selftest.  Output is deterministic JSON (sorted keys, seeds echoed); exit
codes: 0 success, 1 usage error, 2 I/O error, 3 selftest/acceptance
failure.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import experiments
from .domains import domain_names, get_domain
from .estimator import sample_loss_pairs, select_params
from .factors import ConstantFactor, factor_from_config
from .geometry import PointCloud
from .graphs import parse_resolution
from .seeding import make_rng


class CliUsageError(click.UsageError):
    pass


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_factor(spec: str | None, base_dir=None):
    if spec is None:
        return ConstantFactor(1.0)
    spec = spec.strip()
    try:
        if spec.startswith("{"):
            return factor_from_config(json.loads(spec), base_dir=base_dir)
        return factor_from_config(Path(spec), base_dir=Path(spec).parent)
    except (ValueError, KeyError) as exc:
        raise CliUsageError(f"bad factor config: {exc}") from exc


def _load_cloud(input_path, domain_name, n, seed):
    if (input_path is None) == (domain_name is None):
        raise CliUsageError("pass exactly one of --input or --domain")
    if input_path is not None:
        return PointCloud.from_csv(input_path), None
    domain = get_domain(domain_name)
    if n is None:
        raise CliUsageError("--domain needs --n to sample a cloud")
    return domain.sample(seed, n), domain


def _parse_pairs(spec: str, n: int, seed) -> np.ndarray:
    if spec == "all":
        iu, ju = np.triu_indices(n, k=1)
        return np.column_stack([iu, ju]).astype(np.int64)
    if spec.startswith("random:"):
        count = int(spec.split(":", 1)[1])
        return sample_loss_pairs(n, count, seed)
    path = Path(spec)
    rows = []
    with path.open("r", encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 'i,j'")
            try:
                rows.append((int(fields[0]), int(fields[1])))
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: pair indices must be integers"
                ) from None
    if not rows:
        raise ValueError(f"{path}: no pairs found")
    return np.asarray(rows, dtype=np.int64)


def _build_params(rule, r, k, q, n, d, support_scale, conformal_reach):
    if rule is not None:
        return select_params(rule, n, d, support_scale=support_scale,
                             conformal_reach=conformal_reach,
                             r=r, k=k, q=parse_resolution(q) if q else None)
    if (r is None) == (k is None):
        raise CliUsageError("pass --rule, or exactly one of --r/--k with --q")
    if q is None:
        raise CliUsageError("manual parameters need --q")
    return select_params("manual", n, d, r=r, k=k, q=parse_resolution(q))


@click.group(name="confgeo")
def cli():
    """Estimate conformal geodesic distances from finite point samples."""


@cli.command()
@click.option("--input", "input_path", type=click.Path(), default=None,
              help="point-cloud CSV (one point per line)")
@click.option("--domain", "domain_name",
              type=click.Choice(domain_names()), default=None)
@click.option("--n", type=int, default=None, help="sample size for --domain")
@click.option("--factor", "factor_spec", default=None,
              help="factor config: inline JSON or a path")
@click.option("--rule", type=click.Choice(["ball_rate1", "ball_rate2",
                                           "knn_default"]), default=None)
@click.option("--r", type=float, default=None)
@click.option("--k", type=int, default=None)
@click.option("--q", default=None, help="weight resolution (integer or 'inf')")
@click.option("--pairs", "pairs_spec", default="all",
              help="'all', 'random:N', or a CSV file of i,j pairs")
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None)
def estimate(input_path, domain_name, n, factor_spec, rule, r, k, q,
             pairs_spec, seed, out):
    """Pairwise distance estimates on user data or a synthetic domain."""
    cloud, domain = _load_cloud(input_path, domain_name, n, seed)
    factor = _load_factor(factor_spec)
    reach = None
    scale = None
    if domain is not None:
        scale = domain.support_scale
        reach = experiments.domain_conformal_reach(domain, factor)
    params = _build_params(rule, r, k, q, cloud.n,
                           domain.intrinsic_dim if domain else max(cloud.dim, 1),
                           scale, reach)
    pairs = _parse_pairs(pairs_spec, cloud.n, seed)
    payload = experiments.run_estimate(cloud, params, factor, pairs,
                                       domain=domain, seed=seed)
    _emit(payload, out)
    return 0


@cli.command()
@click.option("--domain", "domain_name", type=click.Choice(domain_names()),
              required=True)
@click.option("--factor", "factor_spec", default=None)
@click.option("--rule", type=click.Choice(["ball_rate1", "ball_rate2",
                                           "knn_default"]),
              default="knn_default")
@click.option("--n-grid", default="500,1000,2000",
              help="comma-separated strictly increasing sample sizes")
@click.option("--trials", type=int, default=5)
@click.option("--seed", type=int, default=0)
@click.option("--pair-budget", type=int, default=experiments.DEFAULT_PAIR_BUDGET)
@click.option("--out", default=None)
def convergence(domain_name, factor_spec, rule, n_grid, trials, seed,
                pair_budget, out):
    """Convergence-rate study with a fitted log-log slope."""
    domain = get_domain(domain_name)
    factor = _load_factor(factor_spec)
    grid = [int(v) for v in n_grid.split(",") if v.strip()]
    payload = experiments.run_convergence(domain, factor, rule, grid, trials,
                                          seed, pair_budget=pair_budget)
    _emit(payload, out)
    return 0


@cli.command(name="graph-equiv")
@click.option("--domain", "domain_name", type=click.Choice(domain_names()),
              default="square")
@click.option("--n", type=int, default=1000)
@click.option("--k", type=int, default=400)
@click.option("--eps", type=float, default=0.5)
@click.option("--trials", type=int, default=200)
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None)
def graph_equiv(domain_name, n, k, eps, trials, seed, out):
    """Monte Carlo check that the k-NN graph sits between two ball graphs."""
    domain = get_domain(domain_name)
    payload = experiments.run_graph_equivalence(domain, n, k, eps, trials, seed)
    _emit(payload, out)
    return 0


@cli.command(name="carved-cube")
@click.option("--d", "dim", type=int, default=3)
@click.option("--side-scale", type=float, default=1.0)
@click.option("--tau", type=float, default=1.0)
@click.option("--epsilon", type=float, required=True)
@click.option("--mc-samples", type=int, default=1_000_000)
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None)
def carved_cube(dim, side_scale, tau, epsilon, mc_samples, seed, out):
    """Carved-cube fixture distances, distortion, and volume check."""
    payload = experiments.run_carved_cube(dim, side_scale, tau, epsilon,
                                          mc_samples, seed)
    _emit(payload, out)
    return 0


@cli.command()
@click.option("--domain", "domain_name", type=click.Choice(domain_names()),
              default="circle")
@click.option("--n", "ns", multiple=True, type=int, default=(200, 1000))
@click.option("--trials", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None)
def hausdorff(domain_name, ns, trials, seed, out):
    """Empirical Hausdorff moments against their sampling bounds."""
    domain = get_domain(domain_name)
    payload = experiments.run_hausdorff(domain, list(ns), trials, seed)
    _emit(payload, out)
    return 0


@cli.command()
@click.option("--seed", type=int, default=0)
@click.option("--inject", type=click.Choice(["weight-asymmetry"]),
              default=None, hidden=True)
@click.option("--out", default=None)
def selftest(seed, inject, out):
    """Run the cross-module property suites; exit 3 on failure."""
    payload, ok = experiments.run_selftest(seed, inject=inject)
    _emit(payload, out)
    for suite in payload["suites"]:
        status = "pass" if suite["ok"] else "FAIL"
        click.echo(f"{status}  {suite['suite']}", err=True)
    return 0 if ok else 3


def main(argv=None) -> int:
    """Entry point with the documented exit codes."""
    try:
        result = cli.main(args=argv, standalone_mode=False)
        return int(result) if isinstance(result, int) else 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
