"""``lab``: tune maps, run the Denjoy and conjugacy pipelines, merge reports.

Every command reads a configuration (defaults < ``--config`` file < flags),
writes its outputs atomically into ``--out`` and exits with the code of the
first :class:`~circlelab.errors.LabError` raised, printed as one line on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from gmpy2 import mpfr

from . import __version__
from .errors import LabError, NumericalInvariantViolation, PreconditionError, ResourceCapExceeded
from .maps import DEFAULT_ORBIT_CAP, from_descriptor, family
from .numerics import Precision, to_decimal

DEFAULTS = {
    "family": "arnold", "a": "0.5", "a1": "0.4", "a2": "0.2", "target": "golden",
    "depth": 15, "tol": None, "precision": 50, "n_max": 12, "orbit_cap": DEFAULT_ORBIT_CAP,
    "samples": None, "n_orbit": 100_000, "seed": 0, "out": "out",
}
INTS = {"depth", "precision", "n_max", "orbit_cap", "samples", "n_orbit", "seed"}
TUNE_KEYS = ("family", "a", "a1", "a2", "target", "depth", "tol", "precision")
FAMILY_PARAMS = {"rotation": (), "arnold": ("a",), "two_harmonic": ("a1", "a2")}


# -- configuration ------------------------------------------------------------


def read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise PreconditionError(f"cannot read config {path}: {e.strerror}") from None
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PreconditionError(f"config line {ln}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in DEFAULTS:
            raise PreconditionError(f"config line {ln}: unknown key {k!r}")
        out[k] = v
    return out


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    for k in INTS:
        if cfg[k] is not None:
            try:
                cfg[k] = int(cfg[k])
            except (TypeError, ValueError):
                raise PreconditionError(f"{k} must be an integer, got {cfg[k]!r}") from None
    if cfg["family"] not in FAMILY_PARAMS:
        raise PreconditionError(f"unknown family {cfg['family']!r}")
    for k in ("depth", "n_max", "orbit_cap", "n_orbit"):
        if cfg[k] < 1:
            raise PreconditionError(f"{k} must be positive")
    return cfg


def echo(cfg: dict) -> dict:
    """The configuration as written into reports, without the output directory
    and unused family parameters."""
    drop = {"a", "a1", "a2", "out"} - set(FAMILY_PARAMS[cfg["family"]])
    return {k: (v if v is None or isinstance(v, int) else str(v))
            for k, v in sorted(cfg.items()) if k not in drop}


# -- output -------------------------------------------------------------------


_UMASK = os.umask(0)
os.umask(_UMASK)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- commands -----------------------------------------------------------------


def _family(cfg, prec):
    params = [cfg[k] for k in FAMILY_PARAMS[cfg["family"]]]
    return family(cfg["family"], *params, precision=prec)


def _budget(cfg):
    from .rotation import COMPARISON_BUDGET
    return min(COMPARISON_BUDGET, cfg["orbit_cap"])


def cmd_tune(cfg: dict, prec: Precision) -> dict:
    from .rotation import target_fraction, tune_parameter

    fam = _family(cfg, prec)
    target = target_fraction(cfg["target"], precision=prec)
    res = tune_parameter(fam, target, cfg["depth"], cfg["tol"], budget=_budget(cfg))
    out = {
        "version": __version__,
        "config": {k: echo(cfg).get(k) for k in TUNE_KEYS if k in echo(cfg)},
        "descriptor": res.descriptor(),
        "t": to_decimal(res.t),
        "quotients": list(res.quotients[:cfg["depth"]]),
        "quotients_certified": list(res.quotients),
        "rho": to_decimal(res.estimate.value),
        "rho_residual": to_decimal(res.estimate.residual),
        "bracket": [to_decimal(x) for x in res.bracket],
        "iterations": res.iterations,
    }
    write_atomic(Path(cfg["out"]) / "tuned.json", dump(out))
    return out


def _tuned(cfg, prec):
    """The tuned map for ``cfg``: reuse ``tuned.json`` when its configuration matches."""
    path = Path(cfg["out"]) / "tuned.json"
    want = {k: echo(cfg).get(k) for k in TUNE_KEYS if k in echo(cfg)}
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError:
            data = None
        if data and data.get("config") == want:
            return data, from_descriptor(data["descriptor"], prec)
    data = cmd_tune(cfg, prec)
    return data, from_descriptor(data["descriptor"], prec)


def _levels_available(cfg, tuned, cf, n_max):
    certified = len(tuned["quotients_certified"])
    if n_max + 1 > certified:
        raise ResourceCapExceeded(
            f"n_max = {n_max} needs quotients to level {n_max + 1}; "
            f"orbit budget {_budget(cfg)} certifies {certified}", level_reached=certified - 1)
    reach = 0
    while reach + 1 <= n_max and cf.q(reach + 2) + cf.q(reach + 1) <= cfg["orbit_cap"]:
        reach += 1
    if reach < n_max:
        raise ResourceCapExceeded(
            f"n_max = {n_max} exceeds orbit cap {cfg['orbit_cap']}; level reached {reach}",
            level_reached=reach)


def cmd_denjoy(cfg: dict, prec: Precision) -> dict:
    from .denjoy import denjoy_report
    from .rotation import target_fraction

    tuned, T = _tuned(cfg, prec)
    cf = target_fraction(cfg["target"], precision=prec)
    n_max = cfg["n_max"]
    _levels_available(cfg, tuned, cf, n_max)
    rep = denjoy_report(T, cf, n_max, sample_count=cfg["samples"])
    tol = prec.tolerance(12)
    worst = rep.summary["max_identity_residual"]
    out = json.loads(rep.to_json())
    out["descriptor"] = tuned["descriptor"]
    out["residual_tolerance"] = to_decimal(tol)
    out["version"] = __version__
    out["config"] = echo(cfg)
    base = Path(cfg["out"])
    write_atomic(base / "denjoy.csv", rep.to_csv())
    write_atomic(base / "denjoy.json", dump(out))
    if worst > tol:
        raise NumericalInvariantViolation(
            f"exact-relation residual {to_decimal(worst, 6)} above {to_decimal(tol, 6)}")
    return out


def cmd_conjugacy(cfg: dict, prec: Precision) -> dict:
    from .conjugacy import (conjugacy_run, gamma_coherence, holder_scan_text,
                            order_matches_rotation, profile_csv)
    from .rotation import target_fraction

    N = cfg["n_orbit"]
    if N > cfg["orbit_cap"]:
        raise ResourceCapExceeded(f"n_orbit = {N} exceeds orbit cap {cfg['orbit_cap']}")
    tuned, T = _tuned(cfg, prec)
    cf = target_fraction(cfg["target"], precision=prec)
    with prec.context():
        rho = mpfr(tuned["rho"])
        s = conjugacy_run(T, N, rho)
        n_coh = min(cfg["n_max"], len(tuned["quotients_certified"]) - 1)
        while n_coh > 1 and cf.q(n_coh + 1) + cf.q(n_coh) > cfg["orbit_cap"]:
            n_coh -= 1
        coherence = gamma_coherence(T, cf, n_coh, seed=cfg["seed"])
        order_ok = order_matches_rotation(s.profile, rho, min(1000, N))
    out = {
        "version": __version__,
        "config": echo(cfg),
        "descriptor": tuned["descriptor"],
        "N": N,
        "integral_h": to_decimal(s.integral),
        "h_min": to_decimal(s.h_min),
        "h_max": to_decimal(s.h_max),
        "homological_residual": s.homological,
        "commutation_residual": s.commutation,
        "gamma_gap": s.gamma_gap,
        "gamma_coherence": {"levels": n_coh, "seed": cfg["seed"], "max_ratio": coherence},
        "order_matches_rotation": order_ok,
        "holder": {"exponent": s.holder.exponent, "label": s.holder.label,
                   "scales": len(s.holder.scales)},
    }
    base = Path(cfg["out"])
    write_atomic(base / "profile.csv", profile_csv(s.profile))
    write_atomic(base / "holder_scan.txt", holder_scan_text(s.holder))
    write_atomic(base / "conjugacy.json", dump(out))
    return out


REPORT_INPUTS = ("tuned.json", "denjoy.json", "conjugacy.json")


def cmd_report(cfg: dict, prec: Precision) -> dict:
    base = Path(cfg["out"])
    missing = [name for name in REPORT_INPUTS if not (base / name).exists()]
    if missing:
        raise PreconditionError("missing inputs: " + ", ".join(missing))
    parts = {}
    for name in REPORT_INPUTS:
        try:
            parts[name.split(".")[0]] = json.loads((base / name).read_text())
        except json.JSONDecodeError as e:
            raise PreconditionError(f"{name} is not valid JSON: {e.msg}") from None
    for part in parts.values():
        part.pop("version", None)
        part.pop("config", None)
    out = {"version": __version__, "config": echo(cfg), **parts}
    write_atomic(base / "report.json", dump(out))
    return out


COMMANDS = {"tune": cmd_tune, "denjoy": cmd_denjoy, "conjugacy": cmd_conjugacy,
            "report": cmd_report}


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", allow_abbrev=False,
                                 description="circle diffeomorphism experiments")
    ap.add_argument("--version", action="version", version=f"lab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, allow_abbrev=False)
        p.add_argument("--config", help="key=value file; flags take precedence")
        p.add_argument("--family", choices=sorted(FAMILY_PARAMS))
        p.add_argument("--a", help="Arnold amplitude")
        p.add_argument("--a1", help="two-harmonic first amplitude")
        p.add_argument("--a2", help="two-harmonic second amplitude")
        p.add_argument("--target", help="golden, silver or a periodic word like 1,2")
        p.add_argument("--depth", type=int)
        p.add_argument("--tol", dest="tol", help="bisection tolerance in t")
        p.add_argument("--precision", type=int, help="decimal digits")
        p.add_argument("--n-max", dest="n_max", type=int)
        p.add_argument("--orbit-cap", dest="orbit_cap", type=int)
        p.add_argument("--samples", type=int, help="orbit points per S_n (default q_{n+1})")
        p.add_argument("--n-orbit", dest="n_orbit", type=int, help="conjugacy orbit length")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
    return ap


def _fail(e: LabError) -> int:
    msg = " ".join(str(e).split())
    extra = ""
    if getattr(e, "level_reached", None) is not None:
        extra = f" level_reached={e.level_reached}"
    print(f"error code={e.code} exit={e.exit_code}{extra}: {msg}", file=sys.stderr)
    return e.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        prec = Precision(cfg["precision"])
        with prec.context():
            out = COMMANDS[args.command](cfg, prec)
    except LabError as e:
        return _fail(e)
    files = {"tune": "tuned.json", "denjoy": "denjoy.json", "conjugacy": "conjugacy.json",
             "report": "report.json"}
    print(Path(cfg["out"]) / files[args.command])
    return 0 if out is not None else 1


if __name__ == "__main__":
    sys.exit(main())
