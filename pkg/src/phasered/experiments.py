"""Experiment drivers: stability sweeps, convergence measurement, tables.

Each driver maps a parameter grid to plain row dictionaries and leaves
formatting to :func:`write_csv`, so the command-line layer and the tests
consume the same data.  Rows are emitted in canonical grid order (deviation
index outer, coupling index inner, system innermost) regardless of how many
workers computed them, and floats are written with 17 significant digits, so
identical configurations produce byte-identical files.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import DomainError, Network, Params, ShapeFn, parse_config
from .reduction import ReductionOrder, assemble
from .stability import (
    FullSystem,
    OrbitNotClosedError,
    StabilityError,
    continue_orbit,
    flow,
    integrate,
    monodromy,
    prmm_sync_closed,
    splay_orbit_delta0,
    sync_orbit,
)

SWEEP_COLUMNS = ("delta", "K", "system", "period", "prmm_re", "prmm_im",
                 "prmm_abs", "converged", "reason")
POINT_COLUMNS = SWEEP_COLUMNS[:-1]
CONVERGENCE_COLUMNS = ("delta", "system", "K", "error", "slope")

DEFAULT_SYSTEMS = ("full", "(1,inf)", "(2,2)")
# largest deviation increment the splay continuation takes in one Newton solve
DELTA_STEP_LIMIT = 0.02

# on-torus sampling for the convergence measurement: settle long enough that
# the radial transient (rate |m|) is below every signal being resolved, but
# short enough that the sampled phase configurations stay spread out
CONV_SETTLE = 12.0
CONV_SAMPLES = 96


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _axis_values(axis) -> tuple[float, ...]:
    """Grid axis: [min, max, steps], explicit values, or a dict form.

    A three-element list is read as a linear range when its last entry is a
    whole number >= 1; use {"values": [...]} when that is ambiguous.  Dicts
    accept {"start", "stop", "steps", "scale": "linear"|"geometric"}.
    """
    if isinstance(axis, dict):
        if "values" in axis:
            vals = np.asarray(axis["values"], dtype=float)
        else:
            start = float(axis["start"])
            stop = float(axis["stop"])
            steps = int(axis["steps"])
            if steps < 1:
                raise DomainError("grid steps must be >= 1")
            scale = axis.get("scale", "linear")
            if scale == "geometric":
                if start <= 0.0 or stop <= 0.0:
                    raise DomainError("geometric grid needs positive bounds")
                vals = np.geomspace(start, stop, steps)
            elif scale == "linear":
                vals = np.linspace(start, stop, steps)
            else:
                raise DomainError(f"unknown grid scale {scale!r}")
    else:
        arr = list(axis)
        if (len(arr) == 3 and float(arr[2]) >= 1
                and float(arr[2]) == int(float(arr[2]))):
            vals = np.linspace(float(arr[0]), float(arr[1]), int(float(arr[2])))
        else:
            vals = np.asarray(arr, dtype=float)
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        raise DomainError("grid values must be finite and non-empty")
    return tuple(float(v) for v in vals)


def _validate_system_name(name: str) -> None:
    if name == "full":
        return
    ReductionOrder.parse(name)  # raises ValueError on junk


@dataclass(frozen=True)
class ExperimentConfig:
    """Immutable bundle shared by every worker of a sweep."""

    params: Params
    shape: ShapeFn
    network: Network
    delta_grid: tuple[float, ...]
    k_grid: tuple[float, ...]
    systems: tuple[str, ...]
    tol: float = 1e-10
    threads: int = 1
    seed: int = 0
    extras: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, cfg: dict, tol: float | None = None,
                  threads: int | None = None,
                  seed: int | None = None) -> "ExperimentConfig":
        p, g, net = parse_config(cfg)
        grid = cfg.get("grid", {})
        if not isinstance(grid, dict):
            raise DomainError("grid must be an object with delta/K axes")
        try:
            delta_grid = _axis_values(grid.get("delta", [0.0, 0.3, 61]))
            k_grid = _axis_values(grid.get("K", [-0.3, 0.3, 61]))
            systems = tuple(str(s) for s in cfg.get("systems", DEFAULT_SYSTEMS))
            for name in systems:
                _validate_system_name(name)
        except (TypeError, ValueError, KeyError) as exc:
            raise DomainError(f"bad experiment config: {exc}") from exc
        if not systems:
            raise DomainError("at least one system is required")
        tol = float(cfg.get("tol", 1e-10)) if tol is None else float(tol)
        if not 0.0 < tol < 1.0:
            raise DomainError("tol must be in (0, 1)")
        threads = int(cfg.get("threads", 1)) if threads is None else int(threads)
        if threads < 1:
            raise DomainError("threads must be >= 1")
        seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
        extras = {key: cfg[key] for key in
                  ("system", "t_final", "samples", "initial_state")
                  if key in cfg}
        return cls(params=p, shape=g, network=net, delta_grid=delta_grid,
                   k_grid=k_grid, systems=systems, tol=tol, threads=threads,
                   seed=seed, extras=extras)


def build_system(name: str, p: Params, shape: ShapeFn, net: Network):
    if name == "full":
        return FullSystem(p, shape, net)
    return assemble(net, p, shape, ReductionOrder.parse(name))


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(stream, columns, rows) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[col]) for col in columns])


def write_table(stream, header, matrix) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in matrix:
        writer.writerow([fmt(v) for v in row])


def _failure_reason(exc: Exception) -> str:
    text = f"{type(exc).__name__}: {exc}"
    return text.replace(",", ";").replace("\n", " ")[:120]


def _blank_row(delta: float, K: float, name: str) -> dict:
    return {"delta": delta, "K": K, "system": name, "period": math.nan,
            "prmm_re": math.nan, "prmm_im": math.nan, "prmm_abs": math.nan,
            "converged": 0, "reason": ""}


# ---------------------------------------------------------------------------
# synchronized-orbit sweep
# ---------------------------------------------------------------------------


def closed_form_covers(order: ReductionOrder, shape: ShapeFn) -> bool:
    if order.a == 1 and order.exact_delta:
        return True
    if order.a == 2 and order.b in (0, 1):
        return True
    return order.a == 2 and order.b == 2 and shape.is_unit_sin


def _numeric_sync_multiplier(system, tol: float):
    orbit = sync_orbit(system)
    try:
        res = monodromy(system, orbit, tol=tol)
    except OrbitNotClosedError:
        # should not trigger (the sync orbit is exact at every deviation),
        # but a shooting polish is the honest fallback if it ever does
        orbit = continue_orbit(system, orbit)
        res = monodromy(system, orbit, tol=tol)
    return res.critical, orbit.period


def sync_rows_at_point(config: ExperimentConfig, delta: float,
                       K: float) -> list[dict]:
    p = config.params.replace(delta=delta, K=K)
    rows = []
    for name in config.systems:
        row = _blank_row(delta, K, name)
        try:
            if name == "full":
                lam, period = _numeric_sync_multiplier(
                    FullSystem(p, config.shape, config.network), config.tol)
            else:
                order = ReductionOrder.parse(name)
                if closed_form_covers(order, config.shape):
                    lam = complex(prmm_sync_closed(order, p, config.shape))
                    period = 2.0 * math.pi / p.omega
                else:
                    lam, period = _numeric_sync_multiplier(
                        assemble(config.network, p, config.shape, order),
                        config.tol)
            row.update(period=period, prmm_re=lam.real, prmm_im=lam.imag,
                       prmm_abs=abs(lam), converged=1)
        except (StabilityError, DomainError) as exc:
            row["reason"] = _failure_reason(exc)
        rows.append(row)
    return rows


def _sync_job(task) -> list[dict]:
    config, delta, K = task
    return sync_rows_at_point(config, delta, K)


def run_sweep_sync(config: ExperimentConfig) -> list[dict]:
    tasks = [(config, delta, K)
             for delta in config.delta_grid for K in config.k_grid]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            chunks = list(pool.map(_sync_job, tasks, chunksize=4))
    else:
        chunks = [_sync_job(task) for task in tasks]
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------------------
# splay-orbit sweep
# ---------------------------------------------------------------------------


def _walk_deviation(config: ExperimentConfig, name: str, K: float,
                    orbit, delta_from: float, delta_to: float):
    """Continue an orbit from one deviation value to another in small steps."""
    span = delta_to - delta_from
    steps = max(1, math.ceil(abs(span) / DELTA_STEP_LIMIT))
    for s in range(1, steps + 1):
        d = delta_from + span * s / steps
        p = config.params.replace(delta=d, K=K)
        system = build_system(name, p, config.shape, config.network)
        orbit = continue_orbit(system, orbit)
    return orbit


def splay_rows_for_k(config: ExperimentConfig, K: float) -> dict:
    """All splay rows for one coupling value, keyed (delta, system)."""
    targets = sorted(set(config.delta_grid))
    out = {}
    for name in config.systems:
        try:
            orbit = splay_orbit_delta0(
                config.params.replace(delta=0.0, K=K), config.network.n,
                reduced=(name != "full"), system=name)
        except (StabilityError, DomainError, ValueError) as exc:
            reason = _failure_reason(exc)
            for delta in targets:
                row = _blank_row(delta, K, name)
                row["reason"] = reason
                out[(delta, name)] = row
            continue
        reached = 0.0
        for delta in targets:
            row = _blank_row(delta, K, name)
            try:
                orbit = _walk_deviation(config, name, K, orbit, reached, delta)
                reached = delta
                p = config.params.replace(delta=delta, K=K)
                system = build_system(name, p, config.shape, config.network)
                res = monodromy(system, orbit, tol=config.tol)
                lam = res.critical
                row.update(period=orbit.period, prmm_re=lam.real,
                           prmm_im=lam.imag, prmm_abs=abs(lam), converged=1)
            except (StabilityError, DomainError) as exc:
                # keep the last good orbit and retry from it at the next value
                row["reason"] = _failure_reason(exc)
            out[(delta, name)] = row
    return out


def _splay_job(task) -> dict:
    config, K = task
    return splay_rows_for_k(config, K)


def run_sweep_splay(config: ExperimentConfig) -> list[dict]:
    if config.network.n != 3:
        raise DomainError(
            "splay sweep is restricted to three oscillators; larger networks "
            "carry a neutral incoherent continuum")
    tasks = [(config, K) for K in config.k_grid]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            by_k = list(pool.map(_splay_job, tasks))
    else:
        by_k = [_splay_job(task) for task in tasks]
    rows = []
    for delta in config.delta_grid:
        for j, K in enumerate(config.k_grid):
            for name in config.systems:
                rows.append(by_k[j][(delta, name)])
    return rows


# ---------------------------------------------------------------------------
# convergence of reductions toward the full dynamics
# ---------------------------------------------------------------------------


def torus_samples(config: ExperimentConfig, p: Params) -> tuple:
    """States of the full system settled onto its attracting torus.

    Each sample starts from unit radii and independent uniform phases; after
    the settle time the radial transient has decayed by exp(m * CONV_SETTLE)
    while the phase configurations remain spread over the torus.
    """
    n = config.network.n
    rng = np.random.default_rng(config.seed)
    full = FullSystem(p, config.shape, config.network)
    states = []
    for _ in range(CONV_SAMPLES):
        x0 = np.concatenate([np.ones(n), rng.uniform(0.0, 2.0 * np.pi, n)])
        states.append(flow(full, x0, CONV_SETTLE, tol=config.tol))
    return full, states


def phase_velocity_error(full, states, reduced) -> float:
    """RMS mismatch between full and reduced phase velocities on the torus.

    The root-mean-square concentrates much faster over the sampled
    configurations than a max would, which keeps the fitted decay order
    insensitive to the seed.
    """
    n = full.n_osc
    sq = [np.mean((full.rhs(x)[n:] - reduced.rhs(x[n:])) ** 2)
          for x in states]
    return float(np.sqrt(np.mean(sq)))


def run_convergence(config: ExperimentConfig) -> list[dict]:
    if any(K <= 0.0 for K in config.k_grid):
        raise DomainError("convergence measurement needs a positive K grid")
    rows = []
    for delta in config.delta_grid:
        cache = [torus_samples(config, config.params.replace(delta=delta,
                                                             K=K))
                 for K in config.k_grid]
        for name in config.systems:
            if name == "full":
                continue
            order = ReductionOrder.parse(name)
            errors = []
            for K, (full, states) in zip(config.k_grid, cache):
                p = config.params.replace(delta=delta, K=K)
                reduced = assemble(config.network, p, config.shape, order)
                errors.append(phase_velocity_error(full, states, reduced))
            slope = float(np.polyfit(np.log(config.k_grid),
                                     np.log(errors), 1)[0])
            for K, err in zip(config.k_grid, errors):
                rows.append({"delta": delta, "system": name, "K": K,
                             "error": err, "slope": slope})
    return rows


# ---------------------------------------------------------------------------
# plain trajectory table
# ---------------------------------------------------------------------------


def run_simulate(config: ExperimentConfig):
    """Integrate one system; returns (header, matrix of table values)."""
    name = str(config.extras.get("system", "full"))
    _validate_system_name(name)
    system = build_system(name, config.params, config.shape, config.network)
    t_final = float(config.extras.get("t_final", 20.0))
    samples = int(config.extras.get("samples", 201))
    if samples < 2 or not math.isfinite(t_final) or t_final <= 0.0:
        raise DomainError("need t_final > 0 and at least two samples")
    n = config.network.n
    if "initial_state" in config.extras:
        x0 = np.asarray(config.extras["initial_state"], dtype=float)
        if x0.shape != (system.dim,):
            raise DomainError(
                f"initial_state must have {system.dim} entries for {name}")
    else:
        rng = np.random.default_rng(config.seed)
        phases = rng.uniform(0.0, 2.0 * np.pi, n)
        x0 = phases if name != "full" else np.concatenate([np.ones(n), phases])
    t_eval = np.linspace(0.0, t_final, samples)
    sol = integrate(system, x0, t_final, tol=config.tol, t_eval=t_eval)
    if name == "full":
        header = (["t"] + [f"R{k+1}" for k in range(n)]
                  + [f"phi{k+1}" for k in range(n)])
    else:
        header = ["t"] + [f"phi{k+1}" for k in range(n)]
    matrix = np.column_stack([sol.t, sol.y.T])
    return header, matrix
