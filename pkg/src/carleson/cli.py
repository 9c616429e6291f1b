"""Command line: generate measures, analyse them, run verification suites, sweep families."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coeffs import UndefinedBetaError, beta_cube
from .energy import carleson_sweep
from .generators import FAMILIES, GeneratorSpec, generate
from .lattice import CubeCatalog, DyadicLattice, default_levels
from .measure import load_measure, save_measure
from .sqfn import constituent
from .suites import SUITES, SuiteParams, run_suite

__all__ = ["RunConfig", "main", "build_parser", "write_table"]


@dataclass
class RunConfig:
    command: str
    measure: str | None = None
    origin: tuple[float, ...] | None = None
    levels: tuple[int, int] | None = None
    A: float = 2.0
    eps: float = 0.05
    delta: float | None = None
    M: int = 6
    nodes_per_octave: int = 16
    suite: str | None = None
    out: str | None = None
    seed: int = 0
    threads: int = 1
    family: str | None = None
    params: dict = field(default_factory=dict)
    kind: str | None = None
    timings: bool = False
    verbose: int = 0

    def __post_init__(self):
        if self.command not in ("generate", "analyze", "verify", "sweep"):
            raise ValueError(f"unknown command {self.command!r}")
        if self.levels is not None:
            lo, hi = (int(v) for v in self.levels)
            if lo > hi:
                raise ValueError(f"empty level range {lo}:{hi}")
            self.levels = (lo, hi)
        if self.origin is not None:
            self.origin = tuple(float(v) for v in self.origin)
        if not self.A > 1:
            raise ValueError("A must exceed 1")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.M < 1 or self.nodes_per_octave < 4 or self.threads < 1:
            raise ValueError("M >= 1, nodes-per-octave >= 4 and threads >= 1 are required")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        for key in ("origin", "levels"):
            if doc.get(key) is not None:
                doc[key] = tuple(doc[key])
        return cls(**doc)


# ---------------------------------------------------------------- output helpers

def write_table(path: Path | None, columns: list[tuple[str, str]], rows: list[tuple], stream=None) -> None:
    """Tab-separated table with a leading schema comment."""
    lines = ["# schema: " + ", ".join(f"{n}:{t}" for n, t in columns), "\t".join(n for n, _ in columns)]
    for row in rows:
        lines.append("\t".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is not None:
        path.write_text(text)
    if stream is not None:
        stream.write(text)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_params(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = _parse_value(v)
    return out


def _parse_levels(text: str | None):
    if text is None:
        return None
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise ValueError(f"--levels expects k0:k1, got {text!r}") from exc


def _out_dir(cfg: RunConfig) -> Path | None:
    if cfg.out is None:
        return None
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------- commands

def cmd_generate(cfg: RunConfig) -> int:
    spec = GeneratorSpec(cfg.family, cfg.params, cfg.params.pop("s", None) if "s" in cfg.params else None)
    mu = generate(spec, cfg.seed)
    if cfg.out is None:
        raise ValueError("generate needs --out")
    save_measure(mu, cfg.out)
    print(f"N\t{mu.n_atoms}\nmass\t{mu.total_mass!r}\nmin_sep\t{mu.min_sep!r}\ndiam\t{mu.diam!r}")
    return 0


def _analyze_row(mu, cat: CubeCatalog, q, cfg: RunConfig):
    mass = cat.mass(q)
    dens = mass / q.side ** mu.s
    if float(mu.s).is_integer():
        try:
            beta = beta_cube(mu, q, int(mu.s)).value
        except UndefinedBetaError:
            beta = float("nan")
    else:
        beta = float("nan")
    rec = constituent(mu, q, cfg.A, cfg.nodes_per_octave)
    jones = beta * beta * dens * dens * mass if math.isfinite(beta) else float("nan")
    return (q.level, ",".join(map(str, q.index)), mass, dens, beta, jones, dens * dens * mass, rec.value,
            int(rec.quad_flag))


def cmd_analyze(cfg: RunConfig) -> int:
    if cfg.measure is None:
        raise ValueError("analyze needs --measure")
    mu = load_measure(cfg.measure)
    lat = DyadicLattice(cfg.origin or (0.0,) * mu.dim)
    if lat.dim != mu.dim:
        raise ValueError("--origin has the wrong dimension")
    levels = cfg.levels or default_levels(mu)
    cat = CubeCatalog(mu, lat, *levels)
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        rows = list(pool.map(lambda q: _analyze_row(mu, cat, q, cfg), cat.cubes))
    columns = [("level", "int"), ("index", "str"), ("I", "float"), ("D", "float"), ("beta", "float"),
               ("jones_term", "float"), ("wolff_term", "float"), ("constituent", "float"), ("quad_flag", "int")]
    out = _out_dir(cfg)
    write_table(out / "cubes.tsv" if out else None, columns, rows, None if out else sys.stdout)
    summary = {"config": cfg.to_dict(), "levels": list(levels), "cubes": len(rows), "n_atoms": mu.n_atoms,
               "total_mass": mu.total_mass,
               "jones_sum": math.fsum(r[5] for r in rows if math.isfinite(r[5])),
               "wolff_sum": math.fsum(r[6] for r in rows),
               "constituent_sum": math.fsum(r[7] for r in rows)}
    if out:
        _json(out / "summary.json", summary)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.suite not in SUITES:
        raise ValueError(f"unknown suite {cfg.suite!r}; expected one of {sorted(SUITES)}")
    params = SuiteParams(seed=cfg.seed, A=cfg.A, eps=cfg.eps, delta=cfg.delta, M=cfg.M,
                         nodes_per_octave=cfg.nodes_per_octave, levels=cfg.levels)
    res = run_suite(cfg.suite, params)
    columns = [("check", "str"), ("value", "float"), ("threshold", "float"), ("provenance", "str"),
               ("verdict", "str"), ("note", "str")]
    rows = [(c.name, c.value, c.threshold, c.provenance, c.verdict, c.note) for c in res.checks]
    out = _out_dir(cfg)
    write_table(out / f"{cfg.suite}.tsv" if out else None, columns, rows, sys.stdout)
    doc = res.summary()
    doc["config"] = cfg.to_dict()
    if not cfg.timings:
        doc.pop("seconds")
    if out:
        _json(out / f"{cfg.suite}.json", doc)
    verdict = "PASS" if res.passed else "FAIL"
    print(f"# {cfg.suite}: {verdict}" + (f" in {res.seconds:.1f} s" if cfg.timings else ""))
    return 0 if res.passed else 1


def _sweep_values(family: str, params: dict) -> tuple[str, list]:
    ranged = [(k, v) for k, v in params.items() if isinstance(v, str) and ":" in v]
    if len(ranged) != 1:
        raise ValueError("sweep needs exactly one parameter given as a range, e.g. generation=3:6 or "
                         "grid_step=0.0625:0.015625:/2")
    key, text = ranged[0]
    parts = text.split(":")
    if len(parts) == 2:
        lo, hi = int(parts[0]), int(parts[1])
        vals = list(range(lo, hi + 1))
    elif len(parts) == 3 and parts[2].startswith("/"):
        lo, hi, div = float(parts[0]), float(parts[1]), float(parts[2][1:])
        vals = []
        v = lo
        while (v >= hi * (1 - 1e-12)) if div > 1 else (v <= hi):
            vals.append(v)
            v = v / div
    else:
        raise ValueError(f"cannot parse range {text!r}")
    if not vals:
        raise ValueError("empty parameter range")
    return key, vals


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.family not in FAMILIES:
        raise ValueError(f"unknown family {cfg.family!r}")
    key, vals = _sweep_values(cfg.family, cfg.params)
    rows = []
    for v in vals:
        params = dict(cfg.params)
        params[key] = v
        s = params.pop("s", None)
        t0 = time.perf_counter()
        mu = generate(GeneratorSpec(cfg.family, params, s), cfg.seed)
        kind = cfg.kind or ("jones" if float(mu.s).is_integer() else "wolff")
        lat = DyadicLattice(cfg.origin or (0.0,) * mu.dim)
        levels = cfg.levels or default_levels(mu)
        res = carleson_sweep(mu, lat, kind, *levels)
        top = res.argmax
        cons = constituent(mu, top, cfg.A, cfg.nodes_per_octave, check=False).value if top is not None else 0.0
        row = [v, mu.n_atoms, kind, res.value, top.label() if top else "", cons]
        if cfg.timings:
            row.append(time.perf_counter() - t0)
        rows.append(tuple(row))
    columns = [(key, "number"), ("N", "int"), ("kind", "str"), ("energy_per_mass", "float"),
               ("argmax_cube", "str"), ("constituent_at_argmax", "float")]
    if cfg.timings:
        columns.append(("seconds", "float"))
    out = _out_dir(cfg)
    write_table(out / "sweep.tsv" if out else None, columns, rows, sys.stdout)
    if out:
        _json(out / "sweep.json", {"config": cfg.to_dict(), "rows": [list(r) for r in rows]})
    return 0


COMMANDS = {"generate": cmd_generate, "analyze": cmd_analyze, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carleson", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--origin", type=lambda t: tuple(float(x) for x in t.split(",")), default=None,
                       help="lattice origin, comma separated")
        p.add_argument("--levels", default=None, help="level range k0:k1")
        p.add_argument("--A", type=float, default=2.0)
        p.add_argument("--eps", type=float, default=0.05)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--M", type=int, default=6)
        p.add_argument("--nodes-per-octave", type=int, default=16)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--timings", action="store_true", help="include wall-clock times (breaks byte-identity)")
        p.add_argument("-v", "--verbose", action="count", default=0)

    g = sub.add_parser("generate", help="write a generated measure to --out")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("params", nargs="*", help="key=value generator parameters (JSON values)")
    common(g)
    a = sub.add_parser("analyze", help="per-cube coefficient, energy and constituent table")
    a.add_argument("--measure", required=True)
    common(a)
    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", required=True, choices=sorted(SUITES))
    common(v)
    w = sub.add_parser("sweep", help="Carleson sweep across one generator parameter")
    w.add_argument("family", choices=FAMILIES)
    w.add_argument("params", nargs="*", help="key=value; exactly one value is a range k0:k1 or a:b:/f")
    w.add_argument("--kind", choices=("jones", "wolff"), default=None)
    common(w)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command, measure=getattr(args, "measure", None), origin=args.origin,
            levels=_parse_levels(args.levels), A=args.A, eps=args.eps, delta=args.delta, M=args.M,
            nodes_per_octave=args.nodes_per_octave, suite=getattr(args, "suite", None), out=args.out,
            seed=args.seed, threads=args.threads, family=getattr(args, "family", None),
            params=_parse_params(getattr(args, "params", []) or []), kind=getattr(args, "kind", None),
            timings=args.timings, verbose=args.verbose)
        return COMMANDS[cfg.command](cfg)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
