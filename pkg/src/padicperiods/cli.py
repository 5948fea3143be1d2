"""Experiment runner: Witt and period consistency suites, cohomology tables.

Every row is one library-level check.  Parameters come from flags, then
PADICPERIODS_* environment variables, then an optional JSON profile file,
then per-command defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .padic_core import PrecisionError, check_prime, default_tau
from .period import (
    PrecisionProfile, epsilon_lift, fil_order, frobenius, kernel_generator, log_ptilde, random_convertible,
    t_element, theta_map,
)
from .phigamma import (
    coboundary_extension, cohomology_dims, duality_pairing, split_test, verify_euler, zoo,
)
from .tilt import make_epsilon, theta_bar
from .witt import (
    IntegerRing, ModRing, RationalRing, StructurePolynomialCache, WittVector, big_witt_reassemble, big_witt_split,
    frobenius_limit_theta, ghost_map, random_big_witt, residue_projection, witt_arith, witt_frobenius,
)

SCHEMA_VERSION = 1
ENV_PREFIX = "PADICPERIODS_"
EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2
# argparse uses 2 for usage errors, which would collide with "inconclusive"
EXIT_CONFIG = 64

COMMANDS = ("witt-demo", "period-check", "cohomology", "euler-table", "duality-check")
COHOMOLOGY_COMMANDS = ("cohomology", "euler-table", "duality-check")

BASE_DEFAULTS = {
    "p": 3, "prec": 6, "witt_length": 4, "level": 3, "fil_depth": 4, "window": 32, "window_max": 128,
    "tau": None, "seed": 0, "samples": 10, "characters": None,
}
COMMAND_DEFAULTS = {
    "cohomology": {"prec": 19},
    "euler-table": {"prec": 19},
    "duality-check": {"prec": 19, "characters": "trivial,omega,char(2,1),char(3,g)"},
}
INT_KEYS = ("p", "prec", "witt_length", "level", "fil_depth", "window", "window_max", "tau", "seed", "samples")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    p: int
    prec: int
    witt_length: int
    level: int
    fil_depth: int
    window: int
    window_max: int
    tau: int
    seed: int
    samples: int
    characters: tuple[str, ...] | None = None

    def __post_init__(self):
        try:
            check_prime(self.p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.prec < 1:
            raise ConfigError("--prec must be positive")
        if not 0 < self.tau < self.prec:
            raise ConfigError(f"--tau must satisfy 0 < tau < prec = {self.prec}")
        if not 1 <= self.witt_length <= 6:
            raise ConfigError("--witt-length must be between 1 and 6")
        if self.samples < 1:
            raise ConfigError("--samples must be positive")
        if self.window < 4 or self.window_max < 2 * self.window:
            raise ConfigError("need --window >= 4 and --window-max >= 2 * window (at least two windows)")
        if self.command == "period-check":
            self.profile()

    @property
    def schedule(self) -> tuple[int, ...]:
        out, L = [], self.window
        while L <= self.window_max:
            out.append(L)
            L *= 2
        return tuple(out)

    def profile(self, tower: str = "cyclotomic") -> PrecisionProfile:
        try:
            return PrecisionProfile(self.p, M=self.prec, fil_depth=self.fil_depth, level=self.level, tower=tower)
        except ValueError as exc:
            raise ConfigError(f"{exc}; try --level >= --fil-depth - 1") from exc

    def echo(self) -> dict:
        out = asdict(self)
        out["characters"] = list(self.characters) if self.characters else None
        out["schedule"] = list(self.schedule)
        return out


@dataclass
class Row:
    id: str
    status: str  # pass, fail or inconclusive
    values: dict = field(default_factory=dict)
    precision_loss: dict | None = None
    window_trace: list | None = None
    ms: float | None = None

    def as_dict(self, timings: bool) -> dict:
        out = {"id": self.id, "status": self.status, "values": self.values, "precision_loss": self.precision_loss}
        if self.window_trace is not None:
            out["window_trace"] = self.window_trace
        out["ms"] = self.ms if timings else None
        return out


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _exhausted(exc: PrecisionError) -> dict:
    kind = "window" if exc.kind == "window-exhausted" else "p-precision"
    return {"reason": kind, "detail": str(exc)}


def _timed(row_id: str, check: Callable[[], Row]) -> Row:
    start = time.perf_counter()
    try:
        row = check()
    except PrecisionError as exc:
        row = Row(row_id, "inconclusive", precision_loss=_exhausted(exc))
    row.ms = round(1000 * (time.perf_counter() - start), 1)
    return row


# ---------------------------------------------------------------------------
# witt-demo


def _random_witt(p: int, n: int, ring, rng, bound: int = 50) -> WittVector:
    return WittVector(p, tuple(ring.scalar(rng.randint(-bound, bound)) for _ in range(n)), ring)


def _ghost_suite(cfg: ExperimentConfig, rng: random.Random) -> Iterable[Row]:
    p, ring = cfg.p, IntegerRing()
    for n in range(1, cfg.witt_length + 1):
        yield _timed(f"integral:n{n}", lambda: Row(
            f"integral:n{n}", _status(StructurePolynomialCache.get(p, n).is_integral()), {"length": n}))
        for op in ("add", "mul"):
            def check(op=op, n=n):
                bad = 0
                for _ in range(cfg.samples):
                    u, v = _random_witt(p, n, ring, rng), _random_witt(p, n, ring, rng)
                    gu, gv = ghost_map(u), ghost_map(v)
                    want = [a + b if op == "add" else a * b for a, b in zip(gu, gv)]
                    bad += ghost_map(witt_arith(u, v, op, method="poly")) != want
                return Row(f"ghost:{op}:n{n}", _status(bad == 0), {"samples": cfg.samples, "mismatches": bad})
            yield _timed(f"ghost:{op}:n{n}", check)
        if n >= 2:
            def frob(n=n):
                bad = 0
                for _ in range(cfg.samples):
                    u = _random_witt(p, n, ring, rng)
                    bad += ghost_map(witt_frobenius(u, method="poly")) != ghost_map(u)[1:]
                return Row(f"ghost:frobenius:n{n}", _status(bad == 0), {"samples": cfg.samples, "mismatches": bad})
            yield _timed(f"ghost:frobenius:n{n}", frob)


def _residue_suite(cfg: ExperimentConfig, rng: random.Random) -> Iterable[Row]:
    p, n = cfg.p, cfg.witt_length
    ring = ModRing(p**cfg.prec)
    for op in ("add", "mul"):
        def check(op=op):
            bad = 0
            for _ in range(cfg.samples):
                u, v = _random_witt(p, n, ring, rng), _random_witt(p, n, ring, rng)
                a, b = residue_projection(u), residue_projection(v)
                bad += residue_projection(witt_arith(u, v, op, method="poly")) != (a + b if op == "add" else a * b)
            return Row(f"residue:{op}", _status(bad == 0), {"samples": cfg.samples, "mismatches": bad,
                                                            "ring": f"Z/{p}^{cfg.prec}"})
        yield _timed(f"residue:{op}", check)


def _theta_consistency(cfg: ExperimentConfig, rng: random.Random) -> Row:
    profile = cfg.profile()

    def check():
        agree, digits = 0, cfg.prec
        for _ in range(cfg.samples):
            x, seq = random_convertible(profile, rng)
            th = theta_map(x)
            digits = min(digits, th.precision)
            agree += th.equals(frobenius_limit_theta(seq))
        return Row("theta:frobenius-limit", _status(agree == cfg.samples),
                   {"samples": cfg.samples, "agree": agree}, {"digits": digits, "loss": cfg.prec - digits})
    return _timed("theta:frobenius-limit", check)


def _big_witt_suite(cfg: ExperimentConfig, rng: random.Random) -> Iterable[Row]:
    p, S, ring = cfg.p, tuple(range(1, 13)), RationalRing()
    for op in ("add", "mul", "roundtrip"):
        def check(op=op):
            bad = 0
            for _ in range(cfg.samples):
                u, v = random_big_witt(S, ring, rng, p), random_big_witt(S, ring, rng, p)
                su = big_witt_split(u, p)
                if op == "roundtrip":
                    bad += big_witt_reassemble(su, S, p, ring) != u
                    continue
                w = u + v if op == "add" else u * v
                sv, sw = big_witt_split(v, p), big_witt_split(w, p)
                bad += any(witt_arith(su[c], sv[c], op) != sw[c] for c in sw)
            return Row(f"big-witt:{op}", _status(bad == 0), {"samples": cfg.samples, "mismatches": bad,
                                                             "truncation_set": "1..12"})
        yield _timed(f"big-witt:{op}", check)


def cmd_witt_demo(cfg: ExperimentConfig) -> list[Row]:
    rng = random.Random(cfg.seed)
    rows = list(_ghost_suite(cfg, rng))
    rows += _residue_suite(cfg, rng)
    rows.append(_theta_consistency(cfg, rng))
    rows += _big_witt_suite(cfg, rng)
    return rows


# ---------------------------------------------------------------------------
# period-check


def _theta_row(row_id: str, value, target, M: int) -> Row:
    ok = value.equals(target)
    return Row(row_id, _status(ok), {"target": str(target)},
               {"digits": value.precision, "loss": M - value.precision})


def cmd_period_check(cfg: ExperimentConfig) -> list[Row]:
    prof = cfg.profile()
    kummer = cfg.profile("kummer")
    M, N = cfg.prec, cfg.fil_depth

    def theta_bar_eps():
        tb = theta_bar(make_epsilon(prof.ring))
        ok = (tb.value - prof.ring.one()).reduce(tb.precision).is_zero()
        return Row("theta-bar:eps", _status(ok), {"target": "1"}, {"digits": tb.precision, "loss": M - tb.precision})

    def fil_t():
        rep = fil_order(t_element(prof))
        return Row("fil-order:t", _status(rep.fil_order == 1), {"fil_order": rep.fil_order, "depth": N})

    def frobenius_t():
        t = t_element(prof)
        rep = fil_order(frobenius(t) - t * cfg.p)
        return Row("frobenius:t", _status(rep.fil_order == N),
                   {"fil_order_of_difference": rep.fil_order, "depth": N})

    def log_branch(branch):
        def check():
            row_id = f"theta:log-ptilde:branch{branch}"
            return _theta_row(row_id, theta_map(log_ptilde(kummer, branch=branch)), branch, M)
        return check

    checks = [
        ("theta-bar:eps", theta_bar_eps),
        ("theta:eps", lambda: _theta_row("theta:eps", theta_map(epsilon_lift(prof)), 1, M)),
        ("theta:kernel-generator", lambda: _theta_row("theta:kernel-generator", theta_map(kernel_generator(prof)), 0, M)),
        ("theta:t", lambda: _theta_row("theta:t", theta_map(t_element(prof)), 0, M)),
        ("fil-order:t", fil_t),
        ("frobenius:t", frobenius_t),
        ("theta:log-ptilde:branch0", log_branch(0)),
        ("theta:log-ptilde:branch1", log_branch(1)),
    ]
    return [_timed(row_id, check) for row_id, check in checks]


# ---------------------------------------------------------------------------
# cohomology tables


def _modules(cfg: ExperimentConfig) -> dict:
    mods = zoo(cfg.p, cfg.prec)
    if not cfg.characters:
        return mods
    missing = [c for c in cfg.characters if c not in mods]
    if missing:
        raise ConfigError(f"unknown modules {missing}; choose from {list(mods)}")
    return {c: mods[c] for c in cfg.characters}


def _euler_rows(cfg: ExperimentConfig, name: str, D) -> list[Row]:
    start = time.perf_counter()
    try:
        rep = cohomology_dims(D, cfg.schedule, cfg.tau)
    except PrecisionError as exc:
        row = Row(f"dims:{name}", "inconclusive", precision_loss=_exhausted(exc))
        row.ms = round(1000 * (time.perf_counter() - start), 1)
        return [row, Row(f"euler:{name}", "inconclusive", precision_loss=_exhausted(exc))]
    ms = round(1000 * (time.perf_counter() - start), 1)
    loss = {"tau": rep.tau, "M": rep.M}
    values = {"rank": D.rank, "dims": list(rep.dims) if rep.dims else None, "monotone": rep.monotone}
    if rep.stabilized:
        dims_row = Row(f"dims:{name}", "pass", values, loss, rep.trace, ms)
    else:
        dims_row = Row(f"dims:{name}", "inconclusive", values,
                       dict(loss, reason="window", detail="the two largest windows disagree"), rep.trace, ms)
    eu = verify_euler(D, rep)
    eu_row = Row(f"euler:{name}", eu.status, {"characteristic": eu.characteristic, "expected": eu.expected},
                 dims_row.precision_loss if eu.status == "inconclusive" else loss)
    return [dims_row, eu_row]


def _duality_rows(cfg: ExperimentConfig, name: str, D) -> list[Row]:
    L = cfg.schedule[1]
    rows = []
    for i in range(3):
        def check(i=i):
            rep = duality_pairing(D, i, L, cfg.tau)
            return Row(f"duality:{name}:H{i}", _status(rep.perfect),
                       {"shape": list(rep.shape), "rank": rep.rank, "window": L}, {"tau": rep.tau, "M": cfg.prec})
        rows.append(_timed(f"duality:{name}:H{i}", check))
    return rows


def _split_rows(cfg: ExperimentConfig) -> list[Row]:
    rng = random.Random(cfg.seed)
    full = zoo(cfg.p, cfg.prec)
    triv, two = full["trivial"], full["char(2,1)"]

    def coboundary_case():
        res = split_test(coboundary_extension(triv, two, rng), triv, two, cfg.window, cfg.tau)
        if res.status == "inconclusive":
            return Row("split:coboundary", "inconclusive", {"split": None}, {"reason": "window", "detail": res.reason})
        return Row("split:coboundary", _status(res.split is True), {"split": res.split, "expected": True})

    def constant_case():
        res = split_test(full["ext(trivial;phi)"], triv, triv, cfg.window, cfg.tau)
        if res.status == "inconclusive":
            return Row("split:ext(trivial;phi)", "inconclusive", {"split": None},
                       {"reason": "window", "detail": res.reason})
        return Row("split:ext(trivial;phi)", _status(res.split is False),
                   {"split": res.split, "expected": False, "obstruction_valuation": res.obstruction})

    return [_timed("split:coboundary", coboundary_case), _timed("split:ext(trivial;phi)", constant_case)]


def cmd_euler_table(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for name, D in _modules(cfg).items():
        rows += _euler_rows(cfg, name, D)
    return rows


def cmd_duality_check(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for name, D in _modules(cfg).items():
        rows += _duality_rows(cfg, name, D)
    return rows


def cmd_cohomology(cfg: ExperimentConfig) -> list[Row]:
    mods = _modules(cfg)
    rows = cmd_euler_table(cfg)
    for name in ("trivial", "omega"):
        if name in mods:
            rows += _duality_rows(cfg, name, mods[name])
    rows += _split_rows(cfg)
    return rows


RUNNERS = {
    "witt-demo": cmd_witt_demo,
    "period-check": cmd_period_check,
    "cohomology": cmd_cohomology,
    "euler-table": cmd_euler_table,
    "duality-check": cmd_duality_check,
}


# ---------------------------------------------------------------------------
# configuration and output


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="padicperiods", description="p-adic period and (phi, Gamma)-module experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--p", type=int)
    parser.add_argument("--prec", type=int, help="p-adic precision M")
    parser.add_argument("--witt-length", dest="witt_length", type=int)
    parser.add_argument("--level", type=int, help="tilt level m")
    parser.add_argument("--fil-depth", dest="fil_depth", type=int)
    parser.add_argument("--window", type=int, help="smallest Robba window L")
    parser.add_argument("--window-max", dest="window_max", type=int)
    parser.add_argument("--tau", type=int, help="rank threshold (default ceil(M/2))")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--characters", help="comma-separated module names from the zoo")
    parser.add_argument("--profile", type=Path, help="JSON file of parameter defaults")
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--tsv", action="store_true")
    parser.add_argument("--out", type=Path, help="write to FILE instead of standard output")
    parser.add_argument("--timings", action="store_true", help="record wall time per row (breaks byte determinism)")
    return parser


def _load_profile(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read profile {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("profile must be a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - set(BASE_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown profile keys {sorted(unknown)}")
    return data


def _split_top_level(text: str) -> list[str]:
    # module names such as char(2,1) contain commas
    parts, depth, cur = [], 0, []
    for ch in text:
        depth += {"(": 1, ")": -1}.get(ch, 0)
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def resolve_config(args: argparse.Namespace, environ=os.environ) -> ExperimentConfig:
    merged: dict[str, Any] = dict(BASE_DEFAULTS)
    merged.update(COMMAND_DEFAULTS.get(args.command, {}))
    merged.update(_load_profile(args.profile))
    for key in BASE_DEFAULTS:
        env = environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            merged[key] = env
        flag = getattr(args, key)
        if flag is not None:
            merged[key] = flag
    try:
        for key in INT_KEYS:
            if merged[key] is not None:
                merged[key] = int(merged[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-integer parameter: {exc}") from exc
    if merged["tau"] is None:
        merged["tau"] = default_tau(merged["prec"])
    chars = merged["characters"]
    if chars is not None and not isinstance(chars, (list, tuple)):
        chars = [c.strip() for c in _split_top_level(str(chars)) if c.strip()]
    merged["characters"] = tuple(chars) if chars else None
    return ExperimentConfig(command=args.command, **merged)


def exit_code(rows: list[Row]) -> int:
    statuses = {r.status for r in rows}
    if "fail" in statuses:
        return EXIT_FAIL
    if "inconclusive" in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def render_json(cfg: ExperimentConfig, rows: list[Row], timings: bool) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "config": cfg.echo(), "rows": [r.as_dict(timings) for r in rows]}
    return json.dumps(doc, indent=2) + "\n"


def render_tsv(rows: list[Row], timings: bool) -> str:
    lines = ["id\tstatus\tvalues\tprecision_loss\tms"]
    for r in rows:
        ms = "" if not timings or r.ms is None else str(r.ms)
        loss = "" if r.precision_loss is None else json.dumps(r.precision_loss, sort_keys=True)
        lines.append(f"{r.id}\t{r.status}\t{json.dumps(r.values, sort_keys=True)}\t{loss}\t{ms}")
    return "\n".join(lines) + "\n"


def render_table(rows: list[Row], timings: bool) -> str:
    width = max([len(r.id) for r in rows] + [2])
    lines = []
    for r in rows:
        vals = ", ".join(f"{k}={v}" for k, v in r.values.items())
        if r.precision_loss and "reason" in r.precision_loss:
            vals += f"  [{r.precision_loss['reason']}: {r.precision_loss.get('detail', '')}]"
        if timings and r.ms is not None:
            vals += f"  ({r.ms} ms)"
        lines.append(f"{r.id:<{width}}  {r.status:<12}  {vals}")
    counts = {s: sum(r.status == s for r in rows) for s in ("pass", "fail", "inconclusive")}
    lines.append(f"{len(rows)} rows: " + ", ".join(f"{n} {s}" for s, n in counts.items()))
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        rows = RUNNERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"padicperiods: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        text = render_json(cfg, rows, args.timings)
    elif args.tsv:
        text = render_tsv(rows, args.timings)
    else:
        text = render_table(rows, args.timings)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return exit_code(rows)


if __name__ == "__main__":
    sys.exit(main())
