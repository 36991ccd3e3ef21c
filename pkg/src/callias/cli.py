"""Command-line front end: ``callias index | verify | witten``.

Exit codes: 0 success, 1 usage or configuration error, 2 computed but not
converged, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import index, potential, verify, witten

SCHEMA = 1
FORMATS = ("text", "csv", "json-lines")
EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENT, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    potential: str | None = None
    n: int | None = None
    d: int | None = None
    degree: int = 31
    radii: list = field(default_factory=list)
    z: list = field(default_factory=list)
    level: int = 1
    out: str | None = None
    format: str = "text"
    tol: float | None = None
    threads: int | None = None
    suite: str | None = None
    kmax: int = 40
    seed: int = 0

    def validate(self) -> None:
        if self.format not in FORMATS:
            raise UsageError(f"format must be one of {', '.join(FORMATS)}")
        if self.degree < 7:
            raise UsageError("quadrature degree must be >= 7")
        if self.command in ("index", "witten") and not self.potential:
            raise UsageError("--potential is required")
        if self.command == "witten" and not self.z:
            raise UsageError("z schedule is empty")
        if self.tol is not None and not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.threads is not None and self.threads < 1:
            raise UsageError("--threads must be >= 1")


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("schedule is empty")
    return vals


def _complex_list(text: str) -> list[complex]:
    try:
        vals = [complex(s.strip().replace(" ", "")) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("schedule is empty")
    return vals


def resolve_potential(spec: str, n: int | None = None, d: int | None = None) -> potential.Potential:
    """``name``, ``name:k=v,...``, ``block:base,l=2`` or a path to a potential file."""
    if os.path.exists(spec):
        p = potential.load_potential(spec)
    else:
        name, _, rest = spec.partition(":")
        items = [s.strip() for s in rest.split(",") if s.strip()]
        bare = [s for s in items if "=" not in s]
        params = potential.parse_params(",".join(s for s in items if "=" in s))
        if bare:
            if name not in ("block", "block_embed") or len(bare) > 1:
                raise UsageError(f"bad potential parameter {bare[0]!r}; expected key=value")
            params["base"] = bare[0]
        if n is not None:
            if name in ("block", "block_embed"):
                params["base"] = potential.builtin(str(params.get("base", "hedgehog")), n=n)
            else:
                params["n"] = n
        try:
            p = potential.builtin(name, **params)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
    if n is not None and p.n != n:
        raise UsageError(f"potential has n={p.n}, requested n={n}")
    if d is not None and p.d != d:
        raise UsageError(f"potential has d={p.d}, requested d={d}")
    return p


def _threads(cfg: RunConfig) -> int | None:
    if cfg.threads is not None:
        return cfg.threads
    env = os.environ.get("CALLIAS_THREADS")
    if env:
        try:
            val = int(env)
        except ValueError:
            raise UsageError(f"CALLIAS_THREADS must be an integer, got {env!r}")
        if val < 1:
            raise UsageError("CALLIAS_THREADS must be >= 1")
        return val
    return None


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonl(records) -> str:
    return "".join(json.dumps({"schema": SCHEMA, **r}, sort_keys=True, separators=(",", ":"),
                              allow_nan=False) + "\n" for r in records)


# ---------------------------------------------------------------------------
# commands


def cmd_index(cfg: RunConfig) -> tuple[str, int]:
    p = resolve_potential(cfg.potential, cfg.n, cfg.d)
    if p.n % 2 == 0:
        raise UsageError("the surface index formula needs odd n")
    tol = 1e-5 if cfg.tol is None else cfg.tol
    rule = index.sphere_rule(p.n, cfg.degree)
    try:
        res = index.callias_index(p, cfg.radii or None, rule, tol=tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    code = EXIT_OK if res.converged and res.integer_distance < tol else EXIT_NONCONVERGENT
    if cfg.format == "text":
        return index.format_text(res), code
    if cfg.format == "csv":
        return index.format_csv(res), code
    recs = [{"kind": "index.radius", "potential": res.label, "radius": float(r), "re": _num(v.real),
             "im": _num(v.imag), "tolerance": index.PLATEAU_TOL} for r, v in res.per_radius]
    recs.append({"kind": "index.summary", "potential": res.label, "index": _num(res.index_real),
                 "imag_residual": _num(res.imag_residual), "integer_distance": _num(res.integer_distance),
                 "tolerance": tol, "converged": res.converged, "method": res.method,
                 "degree": cfg.degree, "notes": list(res.notes)})
    return _jsonl(recs), code


def cmd_verify(cfg: RunConfig) -> tuple[str, int]:
    kwargs = {}
    if cfg.suite == "clifford" and cfg.n is not None:
        if cfg.n < 2:
            raise UsageError("--n must be >= 2")
        kwargs["n_max"] = cfg.n
    if cfg.suite == "counterexample":
        kwargs["k_max"] = cfg.kmax
    if cfg.suite in ("sign", "identities", "kernels", "counterexample"):
        kwargs["seed"] = cfg.seed
    checks = verify.run_suite(cfg.suite, **kwargs)
    code = EXIT_OK if verify.all_passed(checks) else EXIT_VERIFY
    if cfg.format == "text":
        lines = []
        for c in checks:
            bound = "" if c.passed is None else f" (tolerance {c.tolerance:.1e})"
            lines.append(f"{c.status:4s}  {c.name}: {c.value:.6e}{bound}" + (f"  [{c.detail}]" if c.detail else ""))
        nfail = sum(c.passed is False for c in checks)
        lines.append(f"suite {cfg.suite}: {'pass' if nfail == 0 else f'{nfail} failed'}")
        return "\n".join(lines) + "\n", code
    if cfg.format == "csv":
        rows = ["suite,check,status,value,tolerance"]
        for c in checks:
            name = c.name.replace('"', "'")
            rows.append(f'{cfg.suite},"{name}",{c.status},{c.value!r},{c.tolerance!r}')
        return "\n".join(rows) + "\n", code
    recs = []
    for c in checks:
        d = c.as_dict()
        d.update(kind="verify.check", suite=cfg.suite, value=_num(d["value"]), tolerance=_num(d["tolerance"]))
        recs.append(d)
    return _jsonl(recs), code


def cmd_witten(cfg: RunConfig) -> tuple[str, int]:
    p = resolve_potential(cfg.potential, cfg.n, cfg.d)
    try:
        lat, radii = witten.lattice_for_level(p, cfg.level)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    radii = cfg.radii or list(radii)
    tol = witten.SOLVER_TOL if cfg.tol is None else cfg.tol
    try:
        res = witten.witten_trace(lat, radii, cfg.z, tol=tol, workers=_threads(cfg))
    except witten.SolverError as exc:
        return f"solver did not converge: {exc}\n", EXIT_NONCONVERGENT
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    half = p.n / 2
    if cfg.format == "csv":
        return res.to_csv(), EXIT_OK
    if cfg.format == "text":
        lines = [f"potential: {res.label}  level {cfg.level}: N={res.npts}, half-width {res.half_width:g}, "
                 f"method {res.method}"]
        lines.append(f"{'z':>10s} {'f(z)':>14s} {'spread':>10s} {'f(z)(1+z)^(n/2)':>16s}")
        for z in cfg.z:
            f, spread = res.f_curve[complex(z)]
            lines.append(f"{complex(z).real:10.4g} {f:+14.8f} {spread:10.2e} {f * (1 + complex(z).real) ** half:+16.8f}")
        lines.append(f"index estimate (z -> 0 at largest radius): {res.index_estimate:+.6f} "
                     f"+/- {res.index_spread:.2e}")
        if res.index_interchanged is not None:
            lines.append(f"index from (1+z)^(n/2) scaling: {res.index_interchanged:+.6f}")
        for note in res.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n", EXIT_OK
    recs = [{"kind": "witten.trace", "potential": res.label, "level": cfg.level, "radius": float(lam),
             "z_re": complex(z).real, "z_im": complex(z).imag, "re": _num(v.real), "im": _num(v.imag),
             "tolerance": tol} for lam, z, v in res.values]
    for z in cfg.z:
        f, spread = res.f_curve[complex(z)]
        recs.append({"kind": "witten.f", "potential": res.label, "level": cfg.level, "z_re": complex(z).real,
                     "z_im": complex(z).imag, "f": _num(f), "spread": _num(spread),
                     "scaled": _num(f * (1 + complex(z).real) ** half)})
    recs.append({"kind": "witten.summary", "potential": res.label, "level": cfg.level, "npts": res.npts,
                 "half_width": res.half_width, "method": res.method,
                 "index_estimate": _num(res.index_estimate), "spread": _num(res.index_spread),
                 "index_interchanged": None if res.index_interchanged is None else _num(res.index_interchanged),
                 "tolerance": tol, "notes": list(res.notes)})
    return _jsonl(recs), EXIT_OK


COMMANDS = {"index": cmd_index, "verify": cmd_verify, "witten": cmd_witten}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default="text")
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--threads", type=int, help="worker cap (falls back to CALLIAS_THREADS)")
    common.add_argument("--tol", type=float, help="tolerance override")

    pot = argparse.ArgumentParser(add_help=False)
    pot.add_argument("--potential", required=True,
                     help="builtin name, name:key=value,..., block:base,l=2, or a potential file")
    pot.add_argument("--n", type=int, help="space dimension (builtins that take one)")
    pot.add_argument("--d", type=int, help="expected matrix size, checked against the potential")

    parser = _Parser(prog="callias", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_index = sub.add_parser("index", parents=[common, pot], help="surface index formula")
    p_index.add_argument("--degree", type=int, default=31, help="sphere quadrature degree (>= 7)")
    p_index.add_argument("--radii", type=_float_list, help="comma-separated radius schedule")

    p_verify = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p_verify.add_argument("suite", choices=verify.SUITES)
    p_verify.add_argument("--n", type=int, help="largest dimension for the clifford suite")
    p_verify.add_argument("--kmax", type=int, default=40, help="last shell for the counterexample suite")
    p_verify.add_argument("--seed", type=int, default=0)

    p_witten = sub.add_parser("witten", parents=[common, pot], help="lattice regularized trace")
    p_witten.add_argument("--level", type=int, default=1, choices=sorted(witten.LEVELS))
    p_witten.add_argument("--z", type=_complex_list, default=[1.0], help="comma-separated z schedule")
    p_witten.add_argument("--radii", type=_float_list, help="window radii (default per level)")
    p_witten.add_argument("--degree", type=int, default=31, help=argparse.SUPPRESS)
    return parser


def parse_config(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(command=ns.command, format=ns.format, out=ns.out, threads=ns.threads, tol=ns.tol)
    for key in ("potential", "n", "d", "degree", "level", "suite", "kmax", "seed"):
        if getattr(ns, key, None) is not None:
            setattr(cfg, key, getattr(ns, key))
    cfg.radii = list(getattr(ns, "radii", None) or [])
    cfg.z = list(getattr(ns, "z", None) or [])
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        text, code = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"callias: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
