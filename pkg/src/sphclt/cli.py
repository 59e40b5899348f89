"""Command-line front end.

    sphclt cg 1 0 1 0 2 0
    sphclt gaunt 1 0 1 0 2 0 2 0
    sphclt convolve --config run.cfg --out results
    sphclt clt-check | simulate | duality | report --config run.cfg

Configuration files hold one ``key = value`` per line; ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy

from . import __version__, angular, cltcheck, harmonics, simulate, spectrum
from .io import csv_text, json_text, sha256

COMMANDS = ("cg", "gaunt", "convolve", "clt-check", "simulate", "duality", "report")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    command: str = "report"
    spectrum: str = "exponential 0.0"
    Lmax: int = 8
    q: int = 2
    l_targets: tuple[int, ...] = (2, 4, 8)
    N: int | None = None
    seed: int = 0
    normalize: bool = True
    kind: str = "hat"
    exp_alpha: float = 0.0
    poly_beta: float = 2.0
    angles: tuple[float, ...] = ()
    cov_l: int | None = None
    args: tuple[str, ...] = ()
    out: str = "sphclt-out"
    format: str = "both"
    threads: int = 1

    def inputs(self) -> dict:
        """Everything that can influence values (threads and paths excluded)."""
        skip = {"threads", "out", "format"}
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}


def _int(v: str) -> int:
    v = v.strip()
    if not v.lstrip("+-").isdigit():
        raise ValueError("expected an integer")
    return int(v)


def _float(v: str) -> float:
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("expected a finite number")
    return x


def _bool(v: str) -> bool:
    t = v.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true or false")


def _int_list(v: str) -> tuple[int, ...]:
    parts = [p for p in v.replace(",", " ").split()]
    if not parts:
        raise ValueError("expected a list of integers")
    return tuple(_int(p) for p in parts)


def _float_list(v: str) -> tuple[float, ...]:
    parts = [p for p in v.replace(",", " ").split()]
    if not parts:
        raise ValueError("expected a list of numbers")
    return tuple(_float(p) for p in parts)


def _spectrum(v: str) -> str:
    spectrum.parse_model(v)
    return " ".join(v.split())


def _kind(v: str) -> str:
    v = v.strip()
    if v not in spectrum.KINDS:
        raise ValueError(f"expected one of {', '.join(spectrum.KINDS)}")
    return v


PARSERS: dict[str, Callable[[str], object]] = {
    "spectrum": _spectrum,
    "Lmax": _int,
    "q": _int,
    "l_targets": _int_list,
    "N": _int,
    "seed": _int,
    "normalize": _bool,
    "kind": _kind,
    "exp_alpha": _float,
    "poly_beta": _float,
    "angles": _float_list,
    "cov_l": _int,
}


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines into a validated :class:`RunConfig`.

    All problems are collected and raised together as :class:`ConfigError`,
    each naming its line.
    """
    cfg = RunConfig(**{f.name: getattr(base, f.name) for f in fields(RunConfig)}) if base else RunConfig()
    errors: list[str] = []
    seen: dict[str, int] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {no}: '{raw.strip()}': expected 'key = value'")
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in PARSERS:
            errors.append(f"line {no}: '{raw.strip()}': unknown key '{key}'")
            continue
        if key in seen:
            errors.append(f"line {no}: '{raw.strip()}': duplicate key (first on line {seen[key]})")
            continue
        seen[key] = no
        try:
            setattr(cfg, key, PARSERS[key](value))
        except ValueError as exc:
            errors.append(f"line {no}: '{raw.strip()}': {exc}")
    errors.extend(_range_errors(cfg, seen))
    if errors:
        raise ConfigError(errors)
    return cfg


def _range_errors(cfg: RunConfig, where: dict[str, int]) -> list[str]:
    def at(key: str) -> str:
        return f"line {where[key]}: " if key in where else ""

    errs = []
    if cfg.q < 1:
        errs.append(f"{at('q')}q must be >= 1")
    if cfg.Lmax < 2:
        errs.append(f"{at('Lmax')}Lmax must be >= 2")
    if cfg.N is not None and cfg.N < 100:
        errs.append(f"{at('N')}N must be >= 100")
    if not 0 <= cfg.seed < 2**64:
        errs.append(f"{at('seed')}seed must be an unsigned 64-bit integer")
    if cfg.q >= 1 and cfg.Lmax >= 0:
        bad = [l for l in cfg.l_targets if not 0 <= l <= cfg.q * cfg.Lmax]
        if bad:
            errs.append(f"{at('l_targets')}l targets {bad} exceed q*Lmax = {cfg.q * cfg.Lmax}")
        if cfg.cov_l is not None and not 0 <= cfg.cov_l <= cfg.q * cfg.Lmax:
            errs.append(f"{at('cov_l')}cov_l exceeds q*Lmax = {cfg.q * cfg.Lmax}")
    if cfg.exp_alpha < 0:
        errs.append(f"{at('exp_alpha')}exp_alpha must be >= 0")
    if cfg.poly_beta < 2:
        errs.append(f"{at('poly_beta')}poly_beta must be >= 2")
    if any(not 0 <= a <= math.pi for a in cfg.angles):
        errs.append(f"{at('angles')}angles must lie in [0, pi]")
    return errs


# ---------------------------------------------------------------------------
# output


class Emitter:
    """Collects artifacts and writes them with a manifest."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.files: dict[str, str] = {}

    def csv(self, name: str, header, rows) -> None:
        if self.cfg.format in ("csv", "both"):
            self.files[name + ".csv"] = csv_text(header, rows)

    def json(self, name: str, obj) -> None:
        if self.cfg.format in ("json", "both"):
            self.files[name + ".json"] = json_text(obj)

    def write(self) -> Path:
        out = Path(self.cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.files.items()):
            (out / name).write_text(text, encoding="utf-8")
        manifest = {
            "command": self.cfg.command,
            "inputs": self.cfg.inputs(),
            "seed": self.cfg.seed,
            "versions": {
                "sphclt": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "outputs": {name: sha256(text) for name, text in sorted(self.files.items())},
        }
        (out / "manifest.json").write_text(json_text(manifest), encoding="utf-8")
        return out


# ---------------------------------------------------------------------------
# commands


def _ints(args: Sequence[str], n: int | None, what: str) -> list[int]:
    try:
        vals = [_int(a) for a in args]
    except ValueError:
        raise ConfigError([f"{what}: arguments must be integers, got {' '.join(args)}"]) from None
    if n is not None and len(vals) != n:
        raise ConfigError([f"{what}: expected {n} integers, got {len(vals)}"])
    return vals


def cmd_cg(cfg: RunConfig, em: Emitter, say) -> None:
    l1, m1, l2, m2, l, m = _ints(cfg.args, 6, "cg")
    for a, b in ((l1, m1), (l2, m2), (l, m)):
        if a < 0 or abs(b) > a:
            raise ConfigError([f"cg: inadmissible index ({a}, {b})"])
    v = angular.cg(l1, m1, l2, m2, l, m)
    say(f"{v} {float(v)!r}")
    em.csv("cg", ["l1", "m1", "l2", "m2", "l", "m", "value", "decimal"], [[l1, m1, l2, m2, l, m, str(v), float(v)]])
    em.json("cg", {"indices": [l1, m1, l2, m2, l, m], "value": str(v), "decimal": float(v)})


def cmd_gaunt(cfg: RunConfig, em: Emitter, say) -> None:
    vals = _ints(cfg.args, None, "gaunt")
    if len(vals) < 6 or len(vals) % 2:
        raise ConfigError(["gaunt: expected pairs 'l m' for at least three harmonics"])
    idx = [(vals[i], vals[i + 1]) for i in range(0, len(vals), 2)]
    for a, b in idx:
        if a < 0 or abs(b) > a:
            raise ConfigError([f"gaunt: inadmissible index ({a}, {b})"])
    closed = harmonics.gaunt_n(idx)
    numeric = harmonics.gaunt_numeric(idx)
    say(f"{closed!r} {numeric!r}")
    flat = " ".join(f"{a}:{b}" for a, b in idx)
    em.csv("gaunt", ["indices", "closed_form", "quadrature"], [[flat, closed, numeric]])
    em.json("gaunt", {"indices": idx, "closed_form": closed, "quadrature": numeric})


def _make(cfg: RunConfig) -> spectrum.PowerSpectrum:
    return spectrum.make_spectrum(cfg.spectrum, cfg.Lmax, normalize=cfg.normalize)


def _emit_convolution(cfg: RunConfig, em: Emitter, s) -> dict:
    q = max(cfg.q, 2)
    tab = spectrum.gkr_convolve(s, q) if cfg.kind == "gkr" else spectrum.hat_convolve(s, q)
    rows = [[k, l, float(tab.get(k)[l])] for k in range(1, q + 1) for l in range(k * s.Lmax + 1)]
    em.csv("spectrum", ["l", "C_l"], [[l, c] for l, c in enumerate(s.values)])
    em.csv("convolution", ["q", "l", "value"], rows)
    law_sums = {k: math.fsum(tab.law(k)) for k in range(1, q + 1)}
    return {
        "spectrum": {"model": s.model, "C_l": list(s.values)},
        "kind": cfg.kind,
        "gamma_star": tab.gamma_star,
        "convolution": [{"q": k, "l": l, "value": v} for k, l, v in rows],
        "law_sums": law_sums,
    }


def cmd_convolve(cfg: RunConfig, em: Emitter, say) -> None:
    s = _make(cfg)
    obj = _emit_convolution(cfg, em, s)
    em.json("convolution", obj)
    say(f"convolution tables q=1..{max(cfg.q, 2)}, l=0..{max(cfg.q, 2) * s.Lmax}")


def _condition_payload(cfg: RunConfig, s, em: Emitter) -> dict:
    if cfg.q < 2:
        raise ConfigError(["clt-check needs q >= 2"])
    rep = cltcheck.clt_condition_check(s, cfg.q, cfg.l_targets)
    main = next(iter(rep.families))
    em.csv("bridge_sup", ["l", "bridge_sup"], list(zip(rep.ls, rep.families[main])))
    em.csv("conditions", ["q", "l", "condition", "value", "label"],
           [[r["q"], r["l"], r["condition"], r["value"], r["label"]] for r in rep.rows()])
    return {"q": rep.q, "conditions": rep.rows(), "verdict": rep.verdict, "log_slopes": rep.slopes}


def cmd_clt_check(cfg: RunConfig, em: Emitter, say) -> None:
    s = _make(cfg)
    obj = _condition_payload(cfg, s, em)
    em.json("conditions", obj)
    say(f"trend: {obj['verdict']}")


def _experiment(cfg: RunConfig) -> simulate.CltExperimentReport:
    ec = simulate.ExperimentConfig(
        spectrum=cfg.spectrum,
        Lmax=cfg.Lmax,
        q=cfg.q,
        l_targets=tuple(cfg.l_targets),
        N=cfg.N if cfg.N is not None else 1000,
        seed=cfg.seed,
        angles=tuple(cfg.angles),
        cov_l=cfg.cov_l,
        threads=cfg.threads,
    )
    return simulate.run_experiment(ec)


def _simulation_payload(cfg: RunConfig, em: Emitter) -> dict:
    rep = _experiment(cfg)
    ls = rep.config.l_targets
    em.csv("samples", ["replicate", "l", "value"],
           [[r, l, float(rep.samples[r, i])] for r in range(rep.samples.shape[0]) for i, l in enumerate(ls)])
    stat_names = ["mean", "mean_se", "variance", "variance_se", "skewness", "skewness_se",
                  "excess_kurtosis", "excess_kurtosis_se", "ks", "ks_se"]
    em.csv("moments", ["l", "theory_variance", "raw_second_moment", "raw_second_moment_se"] + stat_names,
           [[lv.l, lv.theory_variance, lv.raw_second_moment, lv.raw_second_moment_se]
            + [getattr(lv.moments, k) for k in stat_names] for lv in rep.levels])
    if rep.covariance:
        em.csv("covariance", ["l", "angle", "estimate", "se", "target"],
               [[c.l, c.angle, c.estimate, c.se, c.target] for c in rep.covariance])
    return {
        "q": cfg.q,
        "N": rep.config.N,
        "seed": cfg.seed,
        "levels": [
            {"l": lv.l, "theory_variance": lv.theory_variance, "raw_second_moment": lv.raw_second_moment,
             "raw_second_moment_se": lv.raw_second_moment_se, "moments": lv.moments.as_dict()}
            for lv in rep.levels
        ],
        "covariance": [c.__dict__ for c in rep.covariance],
        "kurtosis_trend": cltcheck.trend_label(ls, [abs(lv.moments.excess_kurtosis) for lv in rep.levels]),
    }


def cmd_simulate(cfg: RunConfig, em: Emitter, say) -> None:
    obj = _simulation_payload(cfg, em)
    em.json("simulation", obj)
    for lv in obj["levels"]:
        m = lv["moments"]
        say(f"l={lv['l']} kurtosis={m['excess_kurtosis']:.4f}±{m['excess_kurtosis_se']:.4f} ks={m['ks']:.4f}")


def _duality_payload(cfg: RunConfig, em: Emitter) -> dict:
    se = spectrum.make_spectrum(("exponential", cfg.exp_alpha), cfg.Lmax, normalize=cfg.normalize)
    sp = spectrum.make_spectrum(("polynomial", cfg.poly_beta), cfg.Lmax, normalize=cfg.normalize)
    bad = [l for l in cfg.l_targets if l > 2 * cfg.Lmax]
    if bad:
        raise ConfigError([f"duality: l targets {bad} exceed 2*Lmax = {2 * cfg.Lmax}"])
    rep = cltcheck.duality_scan(se, sp, cfg.l_targets)
    cols = ["l", "exp_bridge_sup", "poly_bridge_sup", "exp_proxy", "poly_proxy"]
    em.csv("duality", cols, [[r[c] for c in cols] for r in rep.rows()])
    return {"rows": rep.rows(), "exp_flag": rep.exp_flag, "poly_flag": rep.poly_flag}


def cmd_duality(cfg: RunConfig, em: Emitter, say) -> None:
    obj = _duality_payload(cfg, em)
    em.json("duality", obj)
    say(f"exponential: {obj['exp_flag']}; polynomial: {obj['poly_flag']}")


def cmd_report(cfg: RunConfig, em: Emitter, say) -> None:
    s = _make(cfg)
    obj: dict = {"convolution": _emit_convolution(cfg, em, s)}
    q = max(cfg.q, 2)
    var = cltcheck.hermite_variance_table(s, q)
    em.csv("variance", ["q", "l", "value"], [[q, l, float(v)] for l, v in enumerate(var.values)])
    obj["variance"] = {"q": q, "values": [float(v) for v in var.values], "moment_total": var.total(),
                       "moment_target": math.factorial(q) * s.pointwise_variance() ** q}
    if cfg.q >= 2:
        obj["conditions"] = _condition_payload(cfg, s, em)
    if all(l <= 2 * cfg.Lmax for l in cfg.l_targets):
        obj["duality"] = _duality_payload(cfg, em)
    grid = harmonics.quadrature_grid(2 * cfg.Lmax)
    th, ph = grid.flat_angles()
    em.csv("grid", ["theta", "phi", "weight"], zip(map(float, th), map(float, ph), map(float, grid.weights)))
    if cfg.N is not None:
        obj["simulation"] = _simulation_payload(cfg, em)
    em.json("report", obj)
    say(f"report written ({len(em.files)} files)")


HANDLERS = {
    "cg": cmd_cg,
    "gaunt": cmd_gaunt,
    "convolve": cmd_convolve,
    "clt-check": cmd_clt_check,
    "simulate": cmd_simulate,
    "duality": cmd_duality,
    "report": cmd_report,
}


def dispatch(cfg: RunConfig, say: Callable[[str], None] = print) -> Path:
    if cfg.command not in HANDLERS:
        raise ConfigError([f"unknown command {cfg.command!r}"])
    em = Emitter(cfg)
    HANDLERS[cfg.command](cfg, em, say)
    return em.write()


# ---------------------------------------------------------------------------
# entry point


def _error_record(kind: str, message: str, details: Sequence[str] = ()) -> str:
    return json.dumps({"error": kind, "message": message, "details": list(details)}, sort_keys=True)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError([message])


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sphclt", description="Angular coupling, convolution spectra and CLT diagnostics.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("args", nargs="*", help="integer indices for cg / gaunt")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", metavar="DIR", default="sphclt-out")
    p.add_argument("--seed", metavar="U64")
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--threads", metavar="N", default="1")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = build_parser().parse_args(argv)
        base = RunConfig(command=ns.command, args=tuple(ns.args), out=ns.out, format=ns.format)
        try:
            base.threads = _int(ns.threads)
        except ValueError:
            raise ConfigError([f"--threads: expected an integer, got {ns.threads!r}"]) from None
        if base.threads < 1:
            raise ConfigError(["--threads must be >= 1"])
        if ns.config:
            try:
                text = Path(ns.config).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError([f"cannot read config {ns.config}: {exc.strerror}"]) from None
            cfg = parse_config(text, base)
        else:
            cfg = parse_config("", base)
        if ns.seed is not None:
            try:
                cfg.seed = _int(ns.seed)
            except ValueError:
                raise ConfigError([f"--seed: expected an unsigned integer, got {ns.seed!r}"]) from None
            if not 0 <= cfg.seed < 2**64:
                raise ConfigError(["--seed must be an unsigned 64-bit integer"])
        dispatch(cfg)
    except ConfigError as exc:
        print(_error_record("config", str(exc), exc.errors), file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, NotImplementedError) as exc:
        print(_error_record("numeric", str(exc)), file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
