"""``sketchlra`` command line: gen, approx, bench, verify, lsr, hss and cg.

Every subcommand takes ``--seed``, ``--trials``, ``--config`` and ``--out``.
For ``bench`` the config file is the experiment INI (see ``sketchlra.bench``);
for the other subcommands a section named after the subcommand supplies
option defaults, e.g. ``[approx]`` with ``family = 3-AH``. Exit status is 0
when every assertion passed, 1 when one failed and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, classes, dense, lsr
from .cg import accelerated_cg, cg_solve, gen_concentrated
from .errors import NotConverged, SketchError
from .hss import hss_compress
from .multipliers import MultiplierSpec
from .rand import RngStream, gaussian_matrix
from .rangefinder import range_find
from .testmatrices import InputClass
from .verify import SUITES, run_verifiers

OK, FAILED, USAGE = 0, 1, 2


def _say(*parts):
    print(*parts, flush=True)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _input_matrix(args) -> np.ndarray:
    if args.matrix:
        return dense.read_dmat(args.matrix)
    ic = InputClass(args.input, args.m or args.n, args.n, args.r, args.noise)
    return ic.generate(args.seed)


def cmd_gen(args) -> int:
    ic = InputClass(args.input, args.m or args.n, args.n, args.r, args.noise)
    out = _out_dir(args)
    count = max(1, args.trials or 1)
    for t in range(count):
        M = ic.generate(RngStream(args.seed).child(t) if count > 1 else args.seed)
        name = "M.dmat" if count == 1 else f"M_{t}.dmat"
        dense.write_dmat(out / name, M)
        _say(f"wrote {out / name}  ({M.shape[0]} x {M.shape[1]}, ||M|| = {dense.spectral_norm(M):.4g})")
    return OK


def cmd_approx(args) -> int:
    M = _input_matrix(args)
    norm = dense.spectral_norm(M)
    tau = args.tau * norm
    spec = MultiplierSpec(classes.family(args.family, M.shape[1]), args.l)
    trials = max(1, args.trials or 1)
    fails = 0
    for t in range(trials):
        res = range_find(M, spec, tau, RngStream(args.seed).child(t), power_iters=args.power_iters)
        fails += not res.success
        _say(f"trial {t}: delta = {res.delta:.4g} ({res.delta / norm:.3g} relative), {res.status.value}")
        if t == 0 and args.out:
            res.save(_out_dir(args))
    _say(f"{trials - fails}/{trials} succeeded at tau = {tau:.3g}")
    return OK if fails == 0 else FAILED


def cmd_bench(args) -> int:
    if args.preset:
        cfg = bench.preset(args.preset)
    elif args.config:
        cfg = bench.load_config(args.config)
    else:
        _say("bench needs --config FILE or --preset NAME "
             f"({', '.join(bench.PRESETS)})")
        return USAGE
    changes = {}
    if args.trials:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        cfg = bench.ExperimentConfig(**{**cfg.__dict__, **changes})
    rows = bench.run_experiment(cfg)
    for row in rows:
        _say(f"{row.label:>12}  n={row.n:<5} r={row.r:<3} mean {row.mean:.3e}  std {row.std:.3e}  "
             f"max {row.max:.3e}  success {row.successes}/{row.trials}")
    if args.out:
        formats = [f.strip() for f in args.formats.split(",") if f.strip()]
        for p in bench.emit_outputs(rows, _out_dir(args), formats, stem=args.stem):
            _say(f"wrote {p}")
    bad = bench.band_violations(rows, cfg.band)
    for row in bad:
        _say(f"FAIL: {row.label} n={row.n} r={row.r} mean {row.mean:.3e} outside {cfg.band}")
    unchecked = [row for row in rows if row.frievalds_ok is False]
    for row in unchecked:
        _say(f"FAIL: {row.label} n={row.n} r={row.r} Frievalds estimate disagrees with the error norm")
    return OK if not bad and not unchecked else FAILED


def cmd_verify(args) -> int:
    scale = args.trials / 100 if args.trials else 1.0
    reports = run_verifiers(args.suite, args.seed or 0, scale)
    lines = [line for rep in reports for line in rep.lines()]
    for line in lines:
        _say(line)
    if args.out:
        _write_json(_out_dir(args) / "verify.json",
                    {rep.suite: [c.__dict__ for c in rep.checks] for rep in reports})
    failed = sum(not c.passed for rep in reports for c in rep.checks)
    _say(f"{len(lines) - failed}/{len(lines)} checks passed")
    return OK if failed == 0 else FAILED


def cmd_lsr(args) -> int:
    F = args.sketch if args.sketch in ("gaussian", "hadamard", "countsketch") else \
        MultiplierSpec(classes.family(args.sketch, args.m), args.k)
    trials = max(1, args.trials or 1)
    good = 0
    report = []
    for t in range(trials):
        st = RngStream(args.seed).child(t)
        if args.A:
            A = dense.read_dmat(args.A)
            b = dense.read_dmat(args.b).ravel()
        else:
            A = gaussian_matrix(st.child(0), args.m, args.d)
            b = gaussian_matrix(st.child(1), args.m, 1).ravel()
        k = args.k or 4 * (A.shape[1] + 10)
        sol = lsr.solve_sketched(lsr.LsrProblem(A, b), k, F, st.child(2))
        good += sol.ratio <= args.max_ratio
        report.append({"trial": t, "k": k, "residual": sol.residual, "optimal": sol.opt_residual,
                       "ratio": sol.ratio, "rank_deficient": sol.rank_deficient})
        if t == 0 and args.out:
            dense.write_dmat(_out_dir(args) / "x.dmat", sol.x_tilde.reshape(-1, 1))
    need = trials if trials < 20 else int(np.ceil(0.95 * trials))
    for r in report[:10]:
        _say(f"trial {r['trial']}: residual {r['residual']:.6g}, optimal {r['optimal']:.6g}, ratio {r['ratio']:.4f}")
    _say(f"{good}/{trials} within {args.max_ratio}x of optimal (need {need})")
    if args.out:
        _write_json(_out_dir(args) / "lsr.json", report)
    return OK if good >= need else FAILED


def _spd_input(args):
    if args.matrix:
        return dense.read_dmat(args.matrix)
    return gen_concentrated(args.n, args.r, args.xi, args.seed)


def cmd_hss(args) -> int:
    M = _spd_input(args)
    H = hss_compress(M, args.r, args.xi, args.family, RngStream(args.seed).child(0))
    err = dense.spectral_norm(H.to_dense() - M) / dense.spectral_norm(M)
    n = M.shape[0]
    frac = H.matvec_flops() / (n * (2 * n - 1))
    _say(f"HSS: {len(H.tree)} nodes, leaf size <= {H.leaf_max}, max generator length "
         f"{max(H.rank(t.index) for t in H.tree if t.parent is not None)}")
    _say(f"relative error {err:.3e}, matvec flops {H.matvec_flops()} ({100 * frac:.1f}% of dense)")
    if args.out:
        H.save(_out_dir(args))
    ok = err <= args.tol
    if not ok:
        _say(f"FAIL: relative error above {args.tol:g}")
    return OK if ok else FAILED


def cmd_cg(args) -> int:
    M = _spd_input(args)
    n = M.shape[0]
    b = gaussian_matrix(RngStream(args.seed).child(1), n, 1).ravel()
    try:
        if args.plain:
            res = cg_solve(lambda v: M @ v, b, args.tol, args.max_iters)
            iters, hist, frac = res.iters, res.residual_history, None
            x = res.x
        else:
            res = accelerated_cg(M, b, args.r, args.xi, args.tol, RngStream(args.seed).child(2),
                                 mult_family=args.family, max_iters=args.max_iters)
            iters, hist, frac, x = res.iters, res.residual_history, res.per_iter_fraction, res.x
    except NotConverged as exc:
        _say(f"FAIL: {exc}")
        return FAILED
    true_rel = np.linalg.norm(M @ x - b) / np.linalg.norm(b)
    _say(f"CG: {iters} iterations, recursive residual {hist[-1]:.3e}, true residual {true_rel:.3e}")
    if frac is not None:
        _say(f"per-iteration cost {100 * frac:.1f}% of a dense matvec")
    if args.out:
        out = _out_dir(args)
        dense.write_dmat(out / "x.dmat", x.reshape(-1, 1))
        _write_json(out / "cg.json", {"iterations": iters, "residual_history": hist,
                                      "true_residual": true_rel, "per_iter_fraction": frac})
    ok = true_rel <= 10 * args.tol
    if frac is not None and args.max_fraction is not None:
        ok &= frac < args.max_fraction
    return OK if ok else FAILED


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--trials", type=int, default=None, help="number of seeded repetitions")
    common.add_argument("--config", default=None, help="config file")
    common.add_argument("--out", default=None, help="output directory")

    p = argparse.ArgumentParser(prog="sketchlra", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    def input_opts(sp):
        sp.add_argument("--matrix", help="read the input from a DMAT file")
        sp.add_argument("--input", default="svd", choices=InputClass.KINDS)
        sp.add_argument("--m", type=int, default=None)
        sp.add_argument("--n", type=int, default=256)
        sp.add_argument("--r", type=int, default=8)
        sp.add_argument("--noise", type=float, default=0.0)

    sp = add("gen", cmd_gen, "generate test matrices as DMAT files")
    input_opts(sp)
    sp = add("approx", cmd_approx, "run the range finder on one input")
    input_opts(sp)
    sp.add_argument("--family", default="gaussian", help="multiplier class name")
    sp.add_argument("--l", type=int, default=8)
    sp.add_argument("--tau", type=float, default=1e-4, help="success threshold relative to ||M||")
    sp.add_argument("--power-iters", type=int, default=0)
    sp = add("bench", cmd_bench, "run an experiment table")
    sp.add_argument("--preset", choices=sorted(bench.PRESETS))
    sp.add_argument("--formats", default="csv,plotdata,png")
    sp.add_argument("--stem", default="results")
    sp = add("verify", cmd_verify, "run verifier suites")
    sp.add_argument("suite", nargs="?", default="all", choices=SUITES + ("all",))
    sp = add("lsr", cmd_lsr, "sketched least squares")
    sp.add_argument("--A", help="DMAT coefficient matrix")
    sp.add_argument("--b", help="DMAT right-hand side")
    sp.add_argument("--m", type=int, default=2000)
    sp.add_argument("--d", type=int, default=10)
    sp.add_argument("--k", type=int, default=None, help="sketch size (default 4(d+10))")
    sp.add_argument("--sketch", default="gaussian")
    sp.add_argument("--max-ratio", type=float, default=1.5)
    for name, fn, help_ in (("hss", cmd_hss, "compress to HSS form"),
                            ("cg", cmd_cg, "conjugate gradients with the HSS matvec")):
        sp = add(name, fn, help_)
        sp.add_argument("--matrix", help="read a symmetric positive definite DMAT matrix")
        sp.add_argument("--n", type=int, default=512)
        sp.add_argument("--r", type=int, default=6)
        sp.add_argument("--xi", type=float, default=1e-10)
        sp.add_argument("--family", default="gaussian", choices=("gaussian", "hadamard"))
        sp.add_argument("--tol", type=float, default=1e-6 if name == "hss" else 1e-8)
        if name == "cg":
            sp.add_argument("--max-iters", type=int, default=None)
            sp.add_argument("--max-fraction", type=float, default=0.10)
            sp.add_argument("--plain", action="store_true", help="dense matvec, no compression")
    return p


def _apply_config_section(parser, argv, args):
    """Fill option defaults from the ``[<command>]`` section of ``--config``."""
    if not args.config or args.command == "bench":
        return args
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(args.config):
        raise SketchError(f"cannot read config {args.config}")
    if not cp.has_section(args.command):
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    given = {}
    for key, text in cp[args.command].items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            raise SketchError(f"{args.config}: unknown option {key!r} in [{args.command}]")
        act = known[dest]
        given[dest] = (text.lower() in ("1", "true", "yes", "on")) if act.const is True else \
            (act.type(text) if act.type else text)
    sub.set_defaults(**given)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config_section(parser, argv, args)
        if args.command != "bench" and args.seed is None:
            args.seed = 0
        if args.command == "gen" and args.out is None:
            args.out = "."
        return args.fn(args)
    except (SketchError, ValueError, KeyError, OSError) as exc:
        _say(f"error: {exc}")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
