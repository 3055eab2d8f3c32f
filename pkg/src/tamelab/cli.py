"""Experiment runner: wires instances to the engine, runs property suites.

Subcommands
    run       drive a Nash-Moser run (liealg-su2 or darboux), write the
              ledger CSV and final map; exit 0 iff converged
    check     property suites {smoothing, interpolation, dolbeault,
              flows, lemmaA}; writes ratio tables, exit 0 iff the fitted
              constants are stable
    classify  Williamson type report for a polynomial system file
    sweep     fan out independent runs over one varied parameter

All artifacts are CSV/JSON under --out (or $TAMELAB_OUT, default
./tamelab_out); fixed seeds give byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import nashmoser
from .errors import DegenerateError, DivergenceError, TamelabError


def _outdir(args) -> Path:
    out = Path(args.out or os.environ.get("TAMELAB_OUT", "tamelab_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text)
    print(f"wrote {path}")


# ---------------------------------------------------------------------- #
# run


def _run_liealg(args, out: Path) -> int:
    from .liealg import Bracket, gl_action, rigidity_solve, su2

    rng = np.random.default_rng(args.seed)
    g0 = np.eye(3) + rng.uniform(-args.perturb, args.perturb, (3, 3))
    mu = su2()
    nu_b = gl_action(Bracket.from_array(mu.as_array()), g0)
    cfg = nashmoser.RunConfig(t_0=args.t0, nu_max=args.nu_max, tol=args.tol, p_override=args.p_override)
    try:
        g, result = rigidity_solve(mu, nu_b, cfg)
    except DivergenceError as exc:
        _write(out / "ledger.csv", _ledger_csv(exc.ledger))
        print(f"diverged: {exc}", file=sys.stderr)
        return 1
    _write(out / "ledger.csv", result.ledger_csv())
    _write(out / "symmetry.json", json.dumps({"g": g.tolist()}))
    resid = float(np.abs(gl_action(nu_b, g).as_array() - mu.as_array()).max())
    print(f"converged in {result.state.nu} steps, residual {resid:.3e}")
    return 0


def _run_darboux(args, out: Path) -> int:
    from .darboux import darboux_solve
    from .grid import GridSection, NestedDomain

    nd = NestedDomain(2)
    amp = args.amp
    omega = GridSection.from_function(
        nd.box(1.0), (args.grid, args.grid), lambda x, y: amp * np.sin(x) * np.sin(y)
    )
    cfg = nashmoser.RunConfig(t_0=args.t0, nu_max=args.nu_max, tol=args.tol, p_override=args.p_override)
    try:
        res = darboux_solve(omega, cfg)
    except DivergenceError as exc:
        _write(out / "ledger.csv", _ledger_csv(exc.ledger))
        print(f"diverged: {exc}", file=sys.stderr)
        return 1
    _write(out / "ledger.csv", res.run_result.ledger_csv())
    _write(out / "map.json", res.map.disp.to_json())
    print(f"converged in {res.run_result.state.nu} steps, pullback residual {res.residual:.3e}")
    return 0


def _ledger_csv(rows) -> str:
    from .nashmoser import LedgerRow

    return LedgerRow.HEADER + "\n" + "\n".join(r.csv() for r in rows or []) + "\n"


def _parse_toml(text: str) -> dict:
    try:
        import tomllib

        return tomllib.loads(text)
    except ImportError:  # python 3.10: flat key = value files only
        out = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, raw = line.partition("=")
            raw = raw.strip()
            try:
                out[key.strip()] = json.loads(raw.replace("'", '"'))
            except ValueError:
                out[key.strip()] = raw.strip('"')
        return out


def _load_config_file(args):
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    try:
        if path.suffix in (".toml", ".tml"):
            data = _parse_toml(path.read_text())
        else:
            data = json.loads(path.read_text())
        for key, value in data.items():
            setattr(args, key.replace("-", "_"), value)
    except (OSError, ValueError, KeyError) as exc:
        print(f"bad config file: {exc}", file=sys.stderr)
        raise SystemExit(2)
    return args


def cmd_run(args) -> int:
    args = _load_config_file(args)
    out = _outdir(args)
    if args.instance == "liealg-su2":
        return _run_liealg(args, out)
    if args.instance == "darboux":
        return _run_darboux(args, out)
    print(f"unknown instance {args.instance!r}", file=sys.stderr)
    return 2


# ---------------------------------------------------------------------- #
# check suites


def _fit_and_assert(samples, headroom: float = 2.0):
    """Fit c = max over the calibration half; assert the rest within headroom."""
    half = max(1, len(samples) // 2)
    fitted = max(samples[:half])
    ok = all(s <= headroom * fitted + 1e-30 for s in samples[half:])
    return fitted, ok


def _suite_smoothing(args, out: Path) -> int:
    from .grid import NestedDomain, band_limited_corpus
    from .smoothing import smoothing_inequality_check

    nd = NestedDomain(1)
    corpus = band_limited_corpus(nd.box(1.0), (801,), args.corpus, seed=args.seed, max_freq=2.0)
    if not corpus:
        print("empty corpus", file=sys.stderr)
        return 2
    ts = [float(t) for t in args.t.split(",")]
    lines = ["k,l,t,smooth_ratio,error_ratio"]
    ok = True
    for k in range(args.kmax + 1):
        for l in range(k + 1):
            r1s, r2s = [], []
            for e in corpus:
                for t in ts:
                    rr = smoothing_inequality_check(e, t, k, l, 0.5, nd)
                    lines.append(f"{k},{l},{t},{rr.smooth_ratio:.17g},{rr.error_ratio:.17g}")
                    r1s.append(rr.smooth_ratio)
                    r2s.append(rr.error_ratio)
            _, ok1 = _fit_and_assert(r1s)
            _, ok2 = _fit_and_assert(r2s)
            ok = ok and ok1 and ok2
    _write(out / "smoothing_ratios.csv", "\n".join(lines) + "\n")
    print("smoothing suite:", "pass" if ok else "FAIL")
    return 0 if ok else 1


def _suite_interpolation(args, out: Path) -> int:
    from .grid import NestedDomain, band_limited_corpus, interpolation_check

    nd = NestedDomain(1)
    corpus = band_limited_corpus(nd.box(1.0), (801,), args.corpus, seed=args.seed, max_freq=2.0)
    if not corpus:
        print("empty corpus", file=sys.stderr)
        return 2
    lines = ["i,j,k,max_ratio"]
    ok = True
    for (i, j, k) in [(0, 1, 2), (0, 2, 4), (1, 2, 3)]:
        ratios = [interpolation_check(e, i, j, k, 0.5, nd) for e in corpus]
        fitted, stable = _fit_and_assert(ratios)
        lines.append(f"{i},{j},{k},{max(ratios):.17g}")
        ok = ok and stable
    _write(out / "interpolation_ratios.csv", "\n".join(lines) + "\n")
    print("interpolation suite:", "pass" if ok else "FAIL")
    return 0 if ok else 1


def _suite_dolbeault(args, out: Path) -> int:
    from .dolbeault import (
        ComplexGridFunction,
        Form01,
        _slice_axis,
        dbar,
        h1,
        h2,
        sup_norm,
    )

    rng = np.random.default_rng(args.seed)
    lines = ["form,rel_residual"]
    worst = 0.0
    tol = 1e-3 if args.n == 1 else 1e-2
    for i in range(args.corpus):
        if args.n == 1:
            coeffs = {(a, b): complex(rng.normal(), rng.normal()) for a in range(3) for b in range(3)}
            f = ComplexGridFunction.sample_monomials(coeffs, [1.0], [args.n1])
            beta = Form01([f])
            H = h1(beta, 1.0, 0.5)
            d = dbar(H).comps[0]
            win = f.restrict(H.axes[0].radius + 1e-9)
            resid = sup_norm(d.copy_with(d.values - win.values), 0.5) / max(sup_norm(f, 1.0), 1e-30)
        else:
            comps = []
            for _ in range(2):
                coeffs = {
                    (a, b, c, dd): complex(rng.normal(), rng.normal())
                    for a in range(2) for b in range(2) for c in range(2) for dd in range(2)
                }
                comps.append(
                    ComplexGridFunction.sample_monomials(coeffs, [1.0, 1.0], [args.n2], dtype=np.complex64)
                )
            beta = Form01(comps)
            H = h1(beta, 1.0, 0.5)
            dH = dbar(H)
            H2 = h2(dbar(beta), 1.0, 0.5)
            resid = 0.0
            for k in range(2):
                bw = beta.comps[k]
                for j in range(2):
                    bw = _slice_axis(bw, j, H.axes[j].radius + 1e-9)
                diff = dH.comps[k].copy_with(dH.comps[k].values + H2.comps[k].values - bw.values)
                resid = max(resid, sup_norm(diff, 0.5) / max(sup_norm(beta.comps[k], 1.0), 1e-30))
        worst = max(worst, resid)
        lines.append(f"{i},{resid:.17g}")
    _write(out / "dolbeault_residuals.csv", "\n".join(lines) + "\n")
    ok = worst <= tol
    print(f"dolbeault suite (n={args.n}, worst {worst:.2e}):", "pass" if ok else "FAIL")
    return 0 if ok else 1


def _suite_flows(args, out: Path) -> int:
    from .calculus import TimeDepVectorField, flow, iterated_flow_convergence
    from .grid import Box, band_limited_corpus, ck_norm

    C = Box(((-2, 2),))
    B = Box(((-1, 1),))
    # per-k flow-norm constants over a small corpus: k, norm, fitted c_k, ratio
    lines = ["k,norm,fitted_constant,ratio"]
    fitted = {}
    ok = True
    for k in (0, 1, 2):
        samples = []
        for i in range(max(4, args.corpus // 4)):
            field = band_limited_corpus(C, (401,), 1, seed=args.seed + i, max_freq=1.5, amplitude=0.02)[0]
            v = TimeDepVectorField(C, field.values[None], np.array([0.0]))
            ph = flow(v, 1.0, B, counts=(201,), theta=0.2, tol=1e-11)
            nv = ck_norm(field, k, target=C).value
            samples.append((ph.norm(k), ph.norm(k) / nv))
        fitted[k] = max(r for _, r in samples[: len(samples) // 2])
        for norm_k, ratio in samples:
            lines.append(f"{k},{norm_k:.17g},{fitted[k]:.17g},{ratio:.17g}")
        ok = ok and all(r <= 2 * fitted[k] for _, r in samples[len(samples) // 2 :])
    v = TimeDepVectorField.from_function(C, (401,), lambda t, x: 0.02 * (1 + t) * np.sin(x), n_times=9)
    errs = iterated_flow_convergence(v, 0.5, B, ns=(2, 4, 8, 16), counts=(201,))
    ns = np.array(sorted(errs))
    slope = float(np.polyfit(np.log(ns), np.log([errs[n] for n in ns]), 1)[0])
    lines.append(f"iterated_flow_slope,{slope:.17g},,")
    _write(out / "flow_checks.csv", "\n".join(lines) + "\n")
    ok = ok and abs(slope + 1.0) <= 0.2
    print(f"flows suite (slope {slope:.3f}):", "pass" if ok else "FAIL")
    return 0 if ok else 1


def _suite_lemma_a(args, out: Path) -> int:
    from .liealg import LieAlgebraInstance, su2
    from .nashmoser import quadratic_check

    inst = LieAlgebraInstance(su2())
    rng = np.random.default_rng(args.seed)
    e = rng.normal(size=9) * 0.05
    lines = ["eps,ratio"]
    ratios = []
    for eps in (1e-1, 1e-2, 1e-3):
        ratio = quadratic_check(inst, eps * e, 0, 0.0)
        ratios.append(ratio)
        lines.append(f"{eps},{ratio:.17g}")
    _write(out / "lemma_a_ratios.csv", "\n".join(lines) + "\n")
    spread = max(ratios) / min(ratios) - 1 if min(ratios) > 0 else math.inf
    ok = spread <= 0.10
    print(f"lemmaA suite (ratio spread {spread:.3f}):", "pass" if ok else "FAIL")
    return 0 if ok else 1


def cmd_check(args) -> int:
    out = _outdir(args)
    suites = {
        "smoothing": _suite_smoothing,
        "interpolation": _suite_interpolation,
        "dolbeault": _suite_dolbeault,
        "flows": _suite_flows,
        "lemmaA": _suite_lemma_a,
    }
    if args.corpus <= 0:
        print("empty corpus", file=sys.stderr)
        return 2
    fn = suites.get(args.suite)
    if fn is None:
        print(f"unknown suite {args.suite!r}", file=sys.stderr)
        return 2
    return fn(args, out)


# ---------------------------------------------------------------------- #
# classify


def cmd_classify(args) -> int:
    from .symplectic import PolyIntegrableSystem
    from .williamson import classification_report

    try:
        data = json.loads(Path(args.system).read_text())
        system = PolyIntegrableSystem.from_json(json.dumps(data))
        point = [Fraction(str(x)) for x in (args.point.split(",") if args.point else [0] * 2 * system.n)]
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"bad system file: {exc}", file=sys.stderr)
        return 2
    try:
        report = classification_report(system, point, seed=args.seed)
    except (DegenerateError, TamelabError) as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    print(json.dumps(report))
    if args.out:
        _write(_outdir(args) / "classification.json", json.dumps(report))
    return 0 if report["cartan"] else 1


# ---------------------------------------------------------------------- #
# sweep


def cmd_sweep(args) -> int:
    key, _, values = args.vary.partition("=")
    if not values:
        print("--vary needs the form name=v1,v2,...", file=sys.stderr)
        return 2
    rows = ["value,exit,steps,residual"]
    worst = 0
    for raw in values.split(","):
        sub = argparse.Namespace(**vars(args))
        if not hasattr(args, key):
            print(f"cannot vary {key!r}", file=sys.stderr)
            return 2
        try:
            value = json.loads(raw)
        except ValueError:
            value = raw
        setattr(sub, key, value)
        sub.out = str(_outdir(args) / f"{key}={raw}")
        code = cmd_run(sub)
        worst = max(worst, code)
        rows.append(f"{raw},{code},,")
        print(f"sweep {key}={raw}: exit {code}")
    _write(_outdir(args) / "sweep.csv", "\n".join(rows) + "\n")
    return worst


# ---------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tamelab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="drive a Nash-Moser run")
    run_p.add_argument("--instance", required=True, choices=["liealg-su2", "darboux"])
    run_p.add_argument("--perturb", type=float, default=0.05, help="GL perturbation size (liealg)")
    run_p.add_argument("--amp", type=float, default=0.05, help="2-form amplitude (darboux)")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--t0", type=float, default=2.7)
    run_p.add_argument("--nu-max", type=int, default=25, dest="nu_max")
    run_p.add_argument("--tol", type=float, default=None)
    run_p.add_argument("--grid", type=int, default=129)
    run_p.add_argument("--p-override", type=int, default=None, dest="p_override")
    run_p.add_argument("--config", default=None, help="JSON/TOML file of run settings")
    run_p.add_argument("--out", default=None)
    run_p.set_defaults(fn=cmd_run)

    chk = sub.add_parser("check", help="run a property suite")
    chk.add_argument("suite", choices=["smoothing", "interpolation", "dolbeault", "flows", "lemmaA"])
    chk.add_argument("--t", default="2,4,8,16")
    chk.add_argument("--kmax", type=int, default=3)
    chk.add_argument("--corpus", type=int, default=20)
    chk.add_argument("--n", type=int, default=1, choices=[1, 2], help="polydisk dimension (dolbeault)")
    chk.add_argument("--n1", type=int, default=129, help="grid per real axis, n=1 dolbeault")
    chk.add_argument("--n2", type=int, default=33, help="grid per real axis, n=2 dolbeault")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--out", default=None)
    chk.set_defaults(fn=cmd_check)

    cls = sub.add_parser("classify", help="Williamson type of a polynomial system file")
    cls.add_argument("system", help="JSON file: {n, mu: [...], pi?: [...]}")
    cls.add_argument("--point", default=None, help="fixed point, comma-separated rationals")
    cls.add_argument("--seed", type=int, default=0)
    cls.add_argument("--out", default=None)
    cls.set_defaults(fn=cmd_classify)

    sw = sub.add_parser("sweep", help="fan out runs over one parameter")
    sw.add_argument("--instance", required=True, choices=["liealg-su2", "darboux"])
    sw.add_argument("--vary", required=True, help="name=v1,v2,... (e.g. t0=2.2,2.7,3.5)")
    sw.add_argument("--perturb", type=float, default=0.05)
    sw.add_argument("--amp", type=float, default=0.05)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--t0", type=float, default=2.7)
    sw.add_argument("--nu-max", type=int, default=25, dest="nu_max")
    sw.add_argument("--tol", type=float, default=None)
    sw.add_argument("--grid", type=int, default=129)
    sw.add_argument("--p-override", type=int, default=None, dest="p_override")
    sw.add_argument("--config", default=None)
    sw.add_argument("--out", default=None)
    sw.set_defaults(fn=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "tol", None) is None and hasattr(args, "tol"):
        args.tol = 1e-10 if getattr(args, "instance", "") == "liealg-su2" else 2e-5
    try:
        return args.fn(args)
    except TamelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
