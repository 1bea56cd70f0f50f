"""Command-line front end: ``dvarint run | residuals | order``.

Configuration is a flat ``key = value`` text file (``#`` starts a comment)
plus command-line flags, which win. Model parameters use ``param.<name>``
keys in files and ``--param name=value`` on the command line.

Exit codes: 0 success, 1 configuration error, 2 solver non-convergence
(partial output is still written), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from . import fieldtheory as ft
from . import mechanics as mech
from .models import MECHANICS_MODELS, ModelSpec, make_field, make_mechanics
from .solvers import ConvergenceError, SolverSettings
from .verify import (
    box_form,
    canonical_form,
    fourth_order_form,
    midpoint_form,
    sample_identity_residuals,
    symplectic_growth,
    symplectic_residual_series,
    energy_series,
)
from .series import ResidualSeries

logger = logging.getLogger("dvarint")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

MECHANICS_SCHEMES = mech.SCHEMES
FIELD_SCHEMES = {"leapfrog_field": "lagrangian", "canonical_field": "hamiltonian", "box": "pde"}


class ConfigError(ValueError):
    pass


class IOFailure(OSError):
    pass


@dataclass
class RunConfig:
    model: str = "harmonic"
    params: dict[str, float] = field(default_factory=dict)
    scheme: str = "midpoint"
    tau: float = 0.1
    h: float = 0.625
    steps: int = 100
    extent: int = 64
    initial: str = ""
    tangents: int = 2
    seed: int = 0
    output: str = "-"
    format: str = "csv"
    taus: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    time: float = 10.0
    windows: int = 100
    newton_tol: float = 1e-12
    max_iter: int = 50

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.model, self.params)

    @property
    def settings(self) -> SolverSettings:
        return SolverSettings(tol=self.newton_tol, max_iter=self.max_iter)

    def validate(self) -> "RunConfig":
        try:
            spec = self.spec
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if spec.kind == "mechanics" and self.scheme not in MECHANICS_SCHEMES:
            raise ConfigError(f"scheme {self.scheme!r} does not apply to mechanics model {self.model!r}")
        if spec.kind == "field":
            need = FIELD_SCHEMES.get(self.scheme)
            if need is None:
                raise ConfigError(f"scheme {self.scheme!r} does not apply to field model {self.model!r}")
            if (need == "pde") != self.model.endswith("_bridges"):
                raise ConfigError(f"scheme {self.scheme!r} is incompatible with field model {self.model!r}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError("tau must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if spec.kind == "field" and (self.extent < 2 or not self.h > 0):
            raise ConfigError("field runs need extent >= 2 and h > 0")
        if self.tangents < 0:
            raise ConfigError("tangents must be >= 0")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        return self


_CASTS = {f.name: f.type for f in fields(RunConfig)}


def _cast(key: str, value: str):
    kind = _CASTS[key]
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            return int(value)
        if key == "taus":
            return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]
        return value
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def _apply(cfg: RunConfig, key: str, value: str) -> None:
    key = key.strip().replace("-", "_")
    value = value.strip()
    if key.startswith("param."):
        try:
            cfg.params[key[6:]] = float(value)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}") from None
        return
    if key not in _CASTS or key == "params":
        raise ConfigError(f"unknown config key {key!r}")
    setattr(cfg, key, _cast(key, value))


def read_config_file(path: str, cfg: RunConfig) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        _apply(cfg, k, v)
    return cfg


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _render(columns: list[str], records: list[list], fmt: str, meta: dict) -> str:
    if fmt == "csv":
        lines = [",".join(columns)]
        lines += [",".join(_fmt(v) for v in rec) for rec in records]
        return "\n".join(lines) + "\n"
    rows = [{c: (int(v) if isinstance(v, (int, np.integer)) else float(v)) for c, v in zip(columns, rec)} for rec in records]
    return json.dumps({"meta": meta, "columns": columns, "records": rows}, indent=1) + "\n"


def _write(path: str, text: str) -> None:
    if path in ("", "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dvarint-")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from None


def _meta(cfg: RunConfig) -> dict:
    m = asdict(cfg)
    m.pop("output")
    return m


# ---------------------------------------------------------------------------
# initial data


def _parse_initial(cfg: RunConfig) -> np.ndarray | None:
    text = cfg.initial.strip()
    if not text:
        return None
    try:
        return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])
    except ValueError:
        pass
    try:
        with open(text, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read initial data {text}: {exc}") from None
    try:
        return np.array([float(v) for v in raw.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"initial data file {text} is not numeric") from None


def _mechanics_initial(cfg: RunConfig) -> np.ndarray:
    z0 = _parse_initial(cfg)
    if z0 is None:
        return np.array([0.0, 1.0])
    if z0.shape != (2,):
        raise ConfigError("mechanics initial data is 'p,q'")
    return z0


def _field_initial(cfg: RunConfig, d: int) -> np.ndarray:
    N, h = cfg.extent, cfg.h
    data = _parse_initial(cfg)
    if data is not None:
        if data.size != N * d:
            raise ConfigError(f"field initial data needs {N * d} values, got {data.size}")
        return data.reshape(N, d) if d > 1 else data
    if cfg.model == "sine_gordon_bridges":
        return ft.sine_gordon_pair_row(N, N * h, speed=0.5)[0]
    x = -N * h / 2 + h * np.arange(N)
    u = np.exp(-(x**2))
    if d == 1:
        return u
    w = (np.roll(u, -1) - np.roll(u, 1)) / (2 * h)
    return np.stack([u, np.zeros(N), w], axis=-1)


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunResult:
    columns: list[str]
    records: list[list]
    error: ConvergenceError | None = None
    extra: dict = field(default_factory=dict)


def _tangent_pairs(n: int) -> list[tuple[int, int]]:
    return [(k, k + 1) for k in range(0, n - 1, 2)]


def _run_mechanics(cfg: RunConfig) -> RunResult:
    L, H = make_mechanics(cfg.model, cfg.params)
    system = L if cfg.scheme == "del" else H
    z0 = _mechanics_initial(cfg)
    rng = np.random.default_rng(cfg.seed)
    error = None
    try:
        traj = mech.integrate(cfg.scheme, system, z0, cfg.tau, cfg.steps, cfg.tangents, rng, settings=cfg.settings)
    except ConvergenceError as exc:
        traj, error = exc.partial, exc
    pairs = _tangent_pairs(cfg.tangents)
    columns = ["step", "time", "p0", "q0", "energy"] + [f"omega_{a}{b}" for a, b in pairs]
    areas = [[mech.symplectic_area(x, y) for x, y in zip(traj.tangents[a], traj.tangents[b])] for a, b in pairs]
    records = []
    for k, z in enumerate(traj.states):
        records.append([k, k * cfg.tau, *z, H.H(z), *(w[k] for w in areas)])
    return RunResult(columns, records, error, {"trajectory": traj, "hamiltonian": H, "pairs": pairs})


def _field_energy(model, u, pi, h):
    ux = (np.roll(u, -1) - u) / h
    return float(h * np.sum(0.5 * pi**2 + 0.5 * ux**2 + model.potential(u)))


def _run_field(cfg: RunConfig) -> RunResult:
    model = make_field(cfg.model, cfg.params)
    tau, h, N = cfg.tau, cfg.h, cfg.extent
    records = []
    error = None
    if cfg.scheme == "box":
        sys_ = model.pde
        row0 = _field_initial(cfg, sys_.dim)
        rng = np.random.default_rng(cfg.seed)
        t0 = rng.normal(size=(cfg.tangents, N, sys_.dim))
        pairs = _tangent_pairs(cfg.tangents)
        names = "uvw" if sys_.dim == 3 else [f"z{c}_" for c in range(sys_.dim)]
        columns = ["step", "time"] + [f"{c}{j}" for j in range(N) for c in names] + ["energy"]
        columns += [f"msres_{a}{b}" for a, b in pairs]
        rows, tans = [row0], [t0]
        try:
            for _ in range(cfg.steps):
                nxt = ft.box_step_row(sys_, rows[-1], tau, h, SolverSettings(cfg.newton_tol, cfg.max_iter, least_squares=True))
                tans.append(np.array([ft.box_tangent_row(sys_, rows[-1], nxt, t, tau, h) for t in tans[-1]]).reshape(t0.shape))
                rows.append(nxt)
        except ConvergenceError as exc:
            error = exc
        rows_a, tans_a = np.array(rows), np.array(tans)
        sums = []
        for a, b in pairs:
            r = ft.multisymplectic_residual(sys_, tans_a[:, a], tans_a[:, b], tau, h).values
            sums.append(np.concatenate([[0.0], r.sum(axis=1)]))
        for i, row in enumerate(rows_a):
            e = float(h * np.sum(0.5 * row[:, 1] ** 2 + 0.5 * row[:, 2] ** 2 + model.potential(row[:, 0])))
            records.append([i, i * tau, *row.ravel(), e, *(s[i] for s in sums)])
        return RunResult(columns, records, error, {"rows": rows_a, "tangents": tans_a, "model": model, "pairs": pairs})

    u0 = _field_initial(cfg, 1)
    columns = ["step", "time"] + [f"u{j}" for j in range(N)] + ["energy"]
    us, pis = [u0], [np.zeros(N)]
    try:
        if cfg.scheme == "leapfrog_field":
            prev = u0 - tau * pis[0]
            for _ in range(cfg.steps):
                nxt = ft.field_del_step(model.lagrangian, prev, us[-1], tau, h, cfg.settings)
                prev = us[-1]
                us.append(nxt)
                pis.append((nxt - prev) / tau)
        else:
            for _ in range(cfg.steps):
                u, p = ft.field_canonical_step(model.hamiltonian, us[-1], pis[-1], tau, h, cfg.settings)
                us.append(u)
                pis.append(p)
    except ConvergenceError as exc:
        error = exc
    for i, (u, p) in enumerate(zip(us, pis)):
        records.append([i, i * tau, *u, _field_energy(model, u, p, h)])
    return RunResult(columns, records, error, {"model": model})


def execute(cfg: RunConfig) -> RunResult:
    return _run_mechanics(cfg) if cfg.spec.kind == "mechanics" else _run_field(cfg)


def cmd_run(cfg: RunConfig) -> int:
    cfg.validate()
    result = execute(cfg)
    _write(cfg.output, _render(result.columns, result.records, cfg.format, _meta(cfg)))
    if result.error is not None:
        print(f"error: solver did not converge: {result.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# ---------------------------------------------------------------------------
# residual report

_FORMS = {
    "midpoint": midpoint_form,
    "canonical": canonical_form,
    "del": canonical_form,  # the Euler-Lagrange step and the canonical step coincide
    "order4": fourth_order_form,
}


def _report(cfg: RunConfig) -> tuple[dict, ConvergenceError | None]:
    if cfg.tangents < 2:
        raise ConfigError("residuals needs tangents >= 2")
    result = execute(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    out: dict = {"model": cfg.model, "scheme": cfg.scheme, "tau": cfg.tau, "steps": len(result.records) - 1}
    e_idx = result.columns.index("energy")
    energy = ResidualSeries(np.array([r[e_idx] - result.records[0][e_idx] for r in result.records]))
    if cfg.spec.kind == "mechanics":
        traj, H = result.extra["trajectory"], result.extra["hamiltonian"]
        series = [symplectic_residual_series(traj, p) for p in result.extra["pairs"]]
        out["max_symplectic_residual"] = max(s.max for s in series)
        out["mean_symplectic_residual"] = float(np.mean([s.mean for s in series]))
        growth = symplectic_growth(traj)
        n = len(growth) - 1
        out["symplectic_growth_factor"] = float(growth[-1] ** (1.0 / n)) if n and growth[-1] > 0 else float("nan")
        form = _FORMS.get(cfg.scheme)
        ident = sample_identity_residuals(form(H, cfg.tau), rng, cfg.windows) if form else None
        energy = energy_series(traj, H)
    elif cfg.scheme == "box":
        rows, tans, model = result.extra["rows"], result.extra["tangents"], result.extra["model"]
        series = [ft.multisymplectic_residual(model.pde, tans[:, a], tans[:, b], cfg.tau, cfg.h) for a, b in result.extra["pairs"]]
        out["max_multisymplectic_residual"] = max(s.max for s in series)
        out["mean_multisymplectic_residual"] = float(np.mean([s.mean for s in series]))
        tot = ft.omega_time_totals(model.pde, tans[:, 0], tans[:, 1])
        out["omega0_total_drift"] = float(np.max(np.abs(tot - tot[0])))
        ident = sample_identity_residuals(box_form(model.pde, cfg.tau, cfg.h), rng, cfg.windows)
    else:
        ident = None
    out["identity_windows"] = cfg.windows if ident is not None else 0
    out["max_identity_residual"] = float(np.max(np.abs(ident))) if ident is not None else float("nan")
    out["energy_max_deviation"] = energy.max
    out["energy_slope"] = energy.slope
    return out, result.error


def cmd_residuals(cfg: RunConfig) -> int:
    cfg.validate()
    report, error = _report(cfg)
    if cfg.format == "json":
        text = json.dumps(report, indent=1) + "\n"
    else:
        text = "key,value\n" + "".join(f"{k},{v if isinstance(v, str) else _fmt(v)}\n" for k, v in report.items())
    _write(cfg.output, text)
    if error is not None:
        print(f"error: solver did not converge: {error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# ---------------------------------------------------------------------------
# order study


def harmonic_exact(z0: np.ndarray, omega: float, t: float) -> np.ndarray:
    p0, q0 = z0
    c, s = math.cos(omega * t), math.sin(omega * t)
    return np.array([p0 * c - omega * q0 * s, q0 * c + p0 / omega * s])


def order_study(cfg: RunConfig) -> tuple[list[list], ConvergenceError | None]:
    """Final-time errors against the exact harmonic flow and successive orders."""
    if cfg.model != "harmonic":
        raise ConfigError("order study needs the harmonic model (exact solution)")
    if len(cfg.taus) < 3:
        raise ConfigError("order study needs at least 3 tau values")
    L, H = make_mechanics("harmonic", cfg.params)
    omega = {**MECHANICS_MODELS["harmonic"], **cfg.params}["omega"]
    z0 = _mechanics_initial(cfg)
    rows = []
    for tau in cfg.taus:
        steps = round(cfg.time / tau)
        if steps < 1 or abs(steps * tau - cfg.time) > 1e-9 * cfg.time:
            raise ConfigError(f"tau={tau} does not divide time={cfg.time}")
        system = L if cfg.scheme == "del" else H
        try:
            traj = mech.integrate(cfg.scheme, system, z0, tau, steps, settings=cfg.settings)
        except ConvergenceError as exc:
            return rows, exc
        err = float(np.linalg.norm(traj.states[-1] - harmonic_exact(z0, omega, steps * tau)))
        order = float("nan")
        if rows:
            order = math.log(rows[-1][2] / err) / math.log(rows[-1][0] / tau)
        rows.append([tau, steps, err, order])
    return rows, None


def cmd_order(cfg: RunConfig) -> int:
    cfg.validate()
    rows, error = order_study(cfg)
    _write(cfg.output, _render(["tau", "steps", "error", "order"], rows, cfg.format, _meta(cfg)))
    if error is not None:
        print(f"error: solver did not converge: {error}", file=sys.stderr)
        return EXIT_SOLVER
    if len(rows) >= 2:
        logger.info("observed order %.4f", rows[-1][3])
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {"run": cmd_run, "residuals": cmd_residuals, "order": cmd_order}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dvarint", description="Variational integrators and structure-preservation diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="model parameter")
        for key in _CASTS:
            if key != "params":
                p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    return parser


def configure_logging() -> None:
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("DVARINT_LOG", "quiet").lower(), logging.WARNING
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)


def parse_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        read_config_file(args.config, cfg)
    for key in _CASTS:
        value = getattr(args, key, None)
        if key != "params" and value is not None:
            _apply(cfg, key, value)
    for item in args.param:
        if "=" not in item:
            raise ConfigError(f"--param expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        _apply(cfg, "param." + k, v)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
