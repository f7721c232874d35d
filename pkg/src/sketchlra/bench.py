"""Experiment configuration, the table runner and its CSV / plot-data outputs.

Config grammar (INI, one ``[experiment]`` section; ``#`` or ``;`` comments)::

    input        = svd | laplacian | fd | factor_gaussian | adversarial
    sizes        = SIZE ("," SIZE)*      SIZE := n "x" r | m "x" n "x" r
    classes      = NAME ("," NAME)*      names from sketchlra.classes
    l            = r | r+P               oversampling rule
    trials       = INT >= 1              default 100
    seed         = INT >= 0              default 0
    power_iters  = INT >= 0              default 0
    xi           = FLOAT > 0             default 1e-5 (1e-6 for laplacian, fd)
    tau          = FLOAT                 success threshold is tau * xi * ||M||, default 10
    noise        = FLOAT >= 0            factor_gaussian only
    frievalds    = INT >= 0              probes for the estimate check, 0 disables
    timing       = true | false          wall-clock column; off keeps CSVs reproducible
    band         = LOW "," HIGH          optional assertion: every row mean lies in [LOW, HIGH]
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import re
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import classes, dense
from .errors import ConfigError
from .multipliers import FlopCounter, MultiplierSpec, build
from .rand import RngStream
from .rangefinder import frievalds_norm, range_find
from .testmatrices import InputClass, gen_svd_spectrum, svd_factors

FRIEVALDS_FLOOR = 0.1
CSV_HEADER = ("class", "n", "r", "mean", "std", "max", "time_ms", "flops")


@dataclass(frozen=True)
class ExperimentConfig:
    input: str = "svd"
    sizes: tuple = ((256, 256, 8),)
    classes: tuple = classes.SVD_SWEEP
    oversampling: int = 0
    trials: int = 100
    seed: int = 0
    power_iters: int = 0
    xi: float | None = None
    tau: float = 10.0
    noise: float = 0.0
    frievalds: int = 8
    timing: bool = False
    band: tuple | None = None

    def __post_init__(self):
        if self.input not in InputClass.KINDS:
            raise ConfigError(f"unknown input class {self.input!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.power_iters < 0 or self.oversampling < 0 or self.frievalds < 0:
            raise ConfigError("power_iters, oversampling and frievalds must be nonnegative")
        for name in self.classes:
            try:
                classes.family(name, 16)
            except KeyError as exc:
                raise ConfigError(str(exc.args[0])) from None
        for m, n, r in self.sizes:
            if not 1 <= r + self.oversampling <= n or r > m:
                raise ConfigError(f"size {m}x{n} cannot hold l = {r + self.oversampling}")

    @property
    def rank_xi(self) -> float:
        if self.xi is not None:
            return self.xi
        return 1e-6 if self.input in ("laplacian", "fd") else 1e-5

    def input_class(self, m, n, r) -> InputClass:
        return InputClass(self.input, m=m, n=n, r=r, noise=self.noise)


_INT = re.compile(r"^\d+$")


def _parse_size(text, kind):
    parts = text.lower().split("x")
    if not all(_INT.match(p.strip()) for p in parts) or len(parts) not in (2, 3):
        raise ValueError(f"bad size {text!r}; use n x r or m x n x r")
    nums = [int(p) for p in parts]
    if len(nums) == 3 and kind in ("svd", "laplacian") and nums[0] != nums[1]:
        raise ValueError(f"{kind} inputs are square, got {text!r}")
    return (nums[0], *nums) if len(nums) == 2 else tuple(nums)


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_band(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2 or not 0 <= parts[0] <= parts[1]:
        raise ValueError(f"expected 'LOW, HIGH' with 0 <= LOW <= HIGH, got {text!r}")
    return tuple(parts)


def parse_config(text: str) -> ExperimentConfig:
    """Parse the INI text; every error names the offending line."""
    lines = {}
    section_line = None
    for no, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if stripped.startswith("[") and section_line is None:
            section_line = no
        m = re.match(r"^\s*([A-Za-z_]+)\s*[=:]", raw)
        if m:
            lines.setdefault(m.group(1).lower(), no)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    if not parser.has_section("experiment"):
        raise ConfigError("missing [experiment] section", section_line or 1)
    sec = parser["experiment"]
    known = {"input", "sizes", "classes", "l", "trials", "seed", "power_iters", "xi", "tau",
             "noise", "frievalds", "timing", "band"}
    for key in sec:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", lines.get(key))
    kw = {}

    def get(key, conv):
        if key not in sec:
            return
        try:
            kw[key] = conv(sec[key])
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{key}: {exc}", lines.get(key)) from None

    get("input", lambda s: s.strip())
    kind = kw.get("input", "svd")
    get("sizes", lambda s: tuple(_parse_size(p.strip(), kind) for p in s.split(",") if p.strip()))
    # commas inside parentheses belong to the name, as in B(+-1,0)
    get("classes", lambda s: tuple(p.strip() for p in re.split(r",(?![^()]*\))", s) if p.strip()))

    def l_rule(s):
        s = s.replace(" ", "")
        if s == "r":
            return 0
        m = re.match(r"^r\+(\d+)$", s)
        if not m:
            raise ValueError(f"expected 'r' or 'r+P', got {s!r}")
        return int(m.group(1))

    if "l" in sec:
        get("l", l_rule)
        kw["oversampling"] = kw.pop("l")
    for key in ("trials", "seed", "power_iters", "frievalds"):
        get(key, int)
    for key in ("xi", "tau", "noise"):
        get(key, float)
    get("timing", _parse_bool)
    get("band", _parse_band)
    try:
        return ExperimentConfig(**kw)
    except ConfigError as exc:
        msg = str(exc)
        line = next((lines[k] for k in ("classes", "sizes", "trials", "input", "l") if k in lines
                     and k in msg), None)
        if line is None:
            for k in ("classes", "sizes", "input"):
                if k in lines:
                    line = lines[k]
                    break
        raise ConfigError(msg, line) from None


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


_SVD_SIZES = "256x8, 256x32, 512x8, 512x32, 1024x8, 1024x32"
PRESETS = {
    "svd": f"""[experiment]
input = svd
sizes = {_SVD_SIZES}
classes = {", ".join(classes.SVD_SWEEP)}
band = 1e-9, 1e-6
""",
    "laplacian": f"""[experiment]
input = laplacian
sizes = 200x3, 400x3
classes = {", ".join(classes.LAPLACIAN5)}
power_iters = 3
band = 1e-8, 1e-3
""",
    "fd": f"""[experiment]
input = fd
sizes = 88x160x5, 208x400x43, 408x800x64
classes = {", ".join(classes.LAPLACIAN5)}
power_iters = 3
band = 0, 1e-2
""",
    "sums-svd": f"""[experiment]
input = svd
sizes = 1024x32
classes = {", ".join(classes.SUM_CLASSES)}
xi = 1e-6
band = 1e-10, 1e-6
""",
    "sums-laplacian": f"""[experiment]
input = laplacian
sizes = 400x3
classes = {", ".join(classes.SUM_CLASSES)}
xi = 1e-6
""",
    "sums-fd": f"""[experiment]
input = fd
sizes = 408x800x64
classes = {", ".join(classes.SUM_CLASSES)}
xi = 1e-6
""",
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return parse_config(PRESETS[name])


@dataclass(frozen=True)
class TableRow:
    label: str
    n: int
    r: int
    mean: float
    std: float
    max: float
    time_ms: float = 0.0
    flops: float = 0.0
    m: int | None = field(default=None, compare=False)
    successes: int | None = field(default=None, compare=False)
    trials: int | None = field(default=None, compare=False)
    frievalds_ok: bool | None = field(default=None, compare=False)


def _flops_of(mult, m):
    c = FlopCounter()
    mult.apply_right(np.zeros((1, mult.n)), c)
    return c.count * m


def run_experiment(cfg: ExperimentConfig, progress=None) -> list[TableRow]:
    """Mean, spread and maximum of ``||Q Q^T M - M||`` per (size, class).

    Each trial draws a fresh input (SVD inputs of equal n share their factors
    across r) and one independent multiplier per class; everything derives
    from the master seed.
    """
    master = RngStream(cfg.seed)
    xi = cfg.rank_xi
    acc: dict = {}
    groups: dict = {}
    for idx, size in enumerate(cfg.sizes):
        groups.setdefault(size[:2], []).append((idx, size))
    fixed_inputs: dict = {}
    for (m, n), members in groups.items():
        for t in range(cfg.trials):
            trial = master.child(m, n, t)
            factors = svd_factors(n, trial.child(0)) if cfg.input == "svd" else None
            for idx, (_, _, r) in members:
                if cfg.input == "svd":
                    M = gen_svd_spectrum(n, r, factors=factors)
                elif cfg.input in ("laplacian", "fd", "adversarial"):
                    key = (m, n, r)
                    if key not in fixed_inputs:
                        fixed_inputs[key] = cfg.input_class(m, n, r).generate()
                    M = fixed_inputs[key]
                else:
                    M = cfg.input_class(m, n, r).generate(trial.child(1, r))
                norm = dense.spectral_norm(M)
                tau = cfg.tau * xi * norm
                l = r + cfg.oversampling
                for ci, name in enumerate(cfg.classes):
                    stream = trial.child(2, r, ci)
                    spec = MultiplierSpec(classes.family(name, n), l)
                    start = time.perf_counter()
                    mult = build(spec, stream.child(0))
                    res = range_find(M, mult, tau, stream.child(1), power_iters=cfg.power_iters)
                    elapsed = (time.perf_counter() - start) * 1e3
                    ok = True
                    if cfg.frievalds:
                        QtM = res.QtM
                        Q = res.Q
                        est = frievalds_norm(
                            lambda X: M @ X - Q @ (QtM @ X), n, cfg.frievalds, stream.child(2),
                            adjoint=lambda Y: M.conj().T @ Y - QtM.conj().T @ (Q.conj().T @ Y),
                            m=M.shape[0],
                        )
                        slack = 1e-12 * norm + 1e-12 * res.delta
                        ok = est <= res.delta + slack and (
                            est >= FRIEVALDS_FLOOR * res.delta or res.delta <= 1e-14 * norm)
                    a = acc.setdefault((idx, ci), {"d": [], "t": [], "f": 0, "s": 0, "ok": True})
                    a["d"].append(res.delta)
                    a["t"].append(elapsed)
                    a["s"] += res.success
                    a["ok"] &= bool(ok)
                    if t == 0:
                        a["f"] = _flops_of(mult, M.shape[0])
            if progress:
                progress(m, n, t)
    rows = []
    for idx, (m, n, r) in enumerate(cfg.sizes):
        for ci, name in enumerate(cfg.classes):
            a = acc[(idx, ci)]
            d = np.asarray(a["d"])
            rows.append(TableRow(
                name, n, r, float(d.mean()), float(d.std()), float(d.max()),
                float(np.mean(a["t"])) if cfg.timing else 0.0, float(a["f"]),
                m, a["s"], cfg.trials, a["ok"],
            ))
    return rows


# outputs ----------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([row.label, row.n, row.r, _fmt(row.mean), _fmt(row.std), _fmt(row.max),
                    _fmt(row.time_ms), _fmt(row.flops)])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[TableRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    return [TableRow(lab, int(n), int(r), float(mu), float(sd), float(mx), float(tm), float(fl))
            for lab, n, r, mu, sd, mx, tm, fl in reader]


def plot_data(rows) -> str:
    """Whitespace-separated columns ``index class n r log10_mean``."""
    out = ["index class n r log10_mean"]
    labels: dict = {}
    for row in rows:
        idx = labels.setdefault(row.label, len(labels))
        y = math.log10(row.mean) if row.mean > 0 else float("-inf")
        out.append(f"{idx} {row.label} {row.n} {row.r} {y!r}")
    return "\n".join(out) + "\n"


def emit_outputs(rows, out_dir, formats=("csv", "plotdata"), stem: str = "results") -> list[Path]:
    if not rows:
        raise ValueError("nothing to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for f in formats:
        if f == "csv":
            p = out / f"{stem}.csv"
            p.write_text(rows_to_csv(rows))
        elif f == "plotdata":
            p = out / f"{stem}.plotdata"
            p.write_text(plot_data(rows))
        elif f == "png":
            from .plotting import plot_rows

            p = plot_rows(rows, out / f"{stem}.png")
        else:
            raise ValueError(f"unknown output format {f!r}")
        written.append(p)
    return written


def band_violations(rows, band) -> list[TableRow]:
    """Rows whose mean error falls outside ``band``; empty when no band is set."""
    if band is None:
        return []
    lo, hi = band
    return [row for row in rows if not lo <= row.mean <= hi]


def row_fields():
    return [f.name for f in fields(TableRow)]
