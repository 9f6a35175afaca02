"""Command-line interface: configuration parsing, CSV emission and presets.

Configuration files are flat ``key = value`` text; ``#`` starts a comment.
Recognized keys:

    omega, form, r, lambda, c_re_<j>, c_im_<j>    forcing
    initial (bound | custom), initial_file,       initial state
    theta0_re, theta0_im
    T, h, N, k_max, n_k                           solver
    out, preset                                   orchestration

A custom initial state reads ``k, re_Theta0, im_Theta0`` rows (with a
header) from ``initial_file``, resolved relative to the config file.

Exit status is 0 on success, 2 when an acceptance threshold is missed and
1 on any error.
"""

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import acceptance, floquet, forcing, kernel, nongeneric, volterra

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "main",
    "parse_config",
    "read_csv",
    "run_preset",
    "write_csv",
    "write_svg",
]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2

_FLOAT_KEYS = {"omega", "r", "lambda", "theta0_re", "theta0_im", "T", "h", "k_max"}
_INT_KEYS = {"N", "n_k"}
_STR_KEYS = {"form", "initial", "initial_file", "out", "preset"}
_COEFF_PREFIXES = ("c_re_", "c_im_")


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters.

    Attributes
    ----------
    forcing : ForcingSpec or None
        None when the file sets no forcing keys.
    initial : {"bound", "custom"}
    initial_file : str or None
        Absolute path of the custom continuum data.
    theta0 : complex
        Bound amplitude of a custom initial state.
    T, h, N, k_max, n_k
        Solver parameters; ``k_max`` None selects the automatic grid.
    out : str or None
    preset : str or None
    """

    forcing: object = None
    initial: str = "bound"
    initial_file: str = None
    theta0: complex = 0j
    T: float = 50.0
    h: float = 1e-2
    N: int = floquet.N_DEFAULT
    k_max: float = None
    n_k: int = 2048
    out: str = None
    preset: str = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def k_grid(self, spec=None):
        return volterra.default_k_grid(spec or self.forcing, self.n_k, self.k_max)

    def initial_state(self, spec=None):
        """Build the :class:`InitialState` described by the config."""
        if self.initial == "bound":
            return volterra.bound_state(self.k_grid(spec))
        cols = read_csv(self.initial_file)
        try:
            k = cols["k"]
            Th = cols["re_Theta0"] + 1j * cols["im_Theta0"]
        except KeyError as exc:
            raise ConfigError(f"{self.initial_file}: missing column {exc}") from None
        return volterra.InitialState(self.theta0, k, Th)


def _parse_value(key, text, where):
    if key in _STR_KEYS:
        return text
    try:
        if key in _INT_KEYS:
            return int(text)
        return float(text)
    except ValueError:
        kind = "integer" if key in _INT_KEYS else "decimal number"
        raise ConfigError(f"{where}: {key}={text!r} is not a {kind}") from None


def _require(cond, key, value, rule, where):
    if not cond:
        raise ConfigError(f"{where}: {key}={value} out of range ({rule})")


def parse_config(path):
    """Read and validate a flat key/value experiment file.

    Raises
    ------
    ConfigError
        On a syntax error, unknown or duplicate key (reported with line
        numbers), or a value outside its documented range (the message
        names the key).
    """
    path = os.fspath(path)
    values, lines = {}, {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            where = f"{path}:{lineno}"
            if "=" not in text:
                raise ConfigError(f"{where}: expected 'key = value', got {text!r}")
            key, val = (s.strip() for s in text.split("=", 1))
            if not key or not val:
                raise ConfigError(f"{where}: expected 'key = value', got {text!r}")
            known = key in _FLOAT_KEYS | _INT_KEYS | _STR_KEYS or (
                key.startswith(_COEFF_PREFIXES) and key.split("_")[-1].isdigit())
            if not known:
                raise ConfigError(f"{where}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}: duplicate key {key!r} on lines "
                                  f"{lines[key]} and {lineno}")
            values[key] = _parse_value(key, val, where)
            lines[key] = lineno

    def at(key):
        return f"{path}:{lines[key]}"

    for key, v in values.items():
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"{at(key)}: {key}={v} is not finite")
    if "omega" in values:
        _require(values["omega"] > 0, "omega", values["omega"], "must be > 0", at("omega"))
    if "lambda" in values:
        lam = values["lambda"]
        _require(0 < lam < 1, "lambda", lam, "must lie in (0, 1)", at("lambda"))
    for key in ("T", "h"):
        if key in values:
            _require(values[key] > 0, key, values[key], "must be > 0", at(key))
    if "k_max" in values:
        _require(values["k_max"] > 0, "k_max", values["k_max"], "must be > 0", at("k_max"))
    if "N" in values:
        _require(values["N"] >= 1, "N", values["N"], "must be >= 1", at("N"))
    if "n_k" in values:
        _require(values["n_k"] >= 3, "n_k", values["n_k"], "must be >= 3", at("n_k"))
    for key in ("c_re_0", "c_im_0"):
        if key in values and values[key] != 0:
            raise ConfigError(f"{at(key)}: {key} must be 0 (the drive has zero mean)")
    form = values.get("form")
    if form is not None and form not in (forcing.HARMONIC, forcing.GEOMETRIC, "harmonic"):
        raise ConfigError(f"{at('form')}: form={form!r} must be 'harmonic-list' or "
                          f"'geometric'")
    initial = values.get("initial", "bound")
    if initial not in ("bound", "custom"):
        raise ConfigError(f"{at('initial')}: initial={initial!r} must be 'bound' or 'custom'")

    spec = None
    forcing_keys = [k for k in values if k in ("omega", "form", "r", "lambda")
                    or k.startswith(_COEFF_PREFIXES)]
    if forcing_keys:
        if "omega" not in values:
            raise ConfigError(f"{path}: forcing keys given without omega")
        if form == forcing.GEOMETRIC:
            for key in ("r", "lambda"):
                if key not in values:
                    raise ConfigError(f"{path}: geometric form needs {key}")
            _require(values["r"] != 0, "r", values["r"], "must be nonzero", at("r"))
        try:
            spec = forcing.forcing_from_mapping(
                {k: values[k] for k in forcing_keys})
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    initial_file = None
    if initial == "custom":
        if "initial_file" not in values:
            raise ConfigError(f"{path}: initial=custom needs initial_file")
        initial_file = os.path.join(os.path.dirname(os.path.abspath(path)),
                                    values["initial_file"])
        if not os.path.isfile(initial_file):
            raise ConfigError(f"{at('initial_file')}: initial_file {initial_file!r} "
                              f"does not exist")

    kw = {k: values[k] for k in ("T", "h", "N", "k_max", "n_k", "out", "preset")
          if k in values}
    return ExperimentConfig(forcing=spec, initial=initial, initial_file=initial_file,
                            theta0=complex(values.get("theta0_re", 0.0),
                                           values.get("theta0_im", 0.0)),
                            raw=dict(values), **kw)


# -- CSV and SVG emission ------------------------------------------------------

def write_csv(path, header, columns):
    """Write equal-length numeric columns with 17 significant digits."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(header),
               comments="")
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv` into ``{column: ndarray}``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        col = [row[j] for row in body]
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = np.array(col)
    return out


def write_svg(path, x, series, title="", logx=False, logy=False, width=640, height=400):
    """Self-contained SVG line plot of ``series`` (label -> y) against ``x``."""
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    x = np.asarray(x, dtype=float)
    fx = np.log10 if logx else (lambda v: v)
    fy = np.log10 if logy else (lambda v: v)
    curves = []
    for label, y in series.items():
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        curves.append((label, fx(x[ok]), fy(y[ok])))
    xs = np.concatenate([c[1] for c in curves]) if curves else np.zeros(1)
    ys = np.concatenate([c[2] for c in curves]) if curves else np.zeros(1)
    if xs.size == 0:
        xs = ys = np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    m = 50

    def px(v):
        return m + (v - x0) / (x1 - x0) * (width - 2 * m)

    def py(v):
        return height - m - (v - y0) / (y1 - y0) * (height - 2 * m)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" '
             f'fill="none" stroke="black"/>',
             f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle">{title}</text>',
             f'<text x="{m}" y="{height - m / 3}">{x0:.4g}</text>',
             f'<text x="{width - m}" y="{height - m / 3}" text-anchor="end">{x1:.4g}</text>',
             f'<text x="5" y="{height - m}">{y0:.4g}</text>',
             f'<text x="5" y="{m + 10}">{y1:.4g}</text>']
    for i, (label, cx, cy) in enumerate(curves):
        step = max(1, len(cx) // 4000)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(cx[::step], cy[::step]))
        color = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
        parts.append(f'<text x="{width - m - 5}" y="{m + 15 * (i + 1)}" text-anchor="end" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return path


# -- presets -------------------------------------------------------------------

def _preset_fermi(out, jobs, svg):
    res = acceptance.criterion2(jobs)
    m = res.measured or {}
    if "gammas" in m:
        write_csv(os.path.join(out, "fermi_scaling.csv"), ["r", "Gamma", "r_squared"],
                  [acceptance.FERMI_R, m["gammas"], m["r_squared"]])
    return [res]


def _preset_tail(out, jobs, svg):
    results = [acceptance.criterion3(acceptance.TAIL_R),
               acceptance.criterion3(acceptance.TAIL_R_SUPPLEMENTARY)]
    for res in results:
        m = res.measured or {}
        if "t" not in m:
            continue
        dev = np.abs(m["theta"] - m["theta_inf"])
        name = f"tail_r{m['r']:g}"
        write_csv(os.path.join(out, name + ".csv"), ["t", "re_theta", "im_theta", "deviation"],
                  [m["t"], m["theta"].real, m["theta"].imag, dev])
        if svg:
            write_svg(os.path.join(out, name + ".svg"), m["t"][1:], {"|theta - theta_inf|":
                      dev[1:]}, title=f"r = {m['r']:g}", logx=True, logy=True)
    return results


def _g0_rows_csv(path, rows):
    lam, lo, hi, rhs, mono = (np.array(c, dtype=float) for c in zip(*rows))
    write_csv(path, ["lambda", "g0_lower", "g0_upper", "rhs", "monotone"],
              [lam, lo, hi, rhs, mono])
    return lam, lo, hi, rhs


def _preset_figure1(out, jobs, svg):
    def run():
        lam, lo, hi, rhs = _g0_rows_csv(os.path.join(out, "figure1.csv"), acceptance.g0_scan())
        zoom = np.linspace(*acceptance.CF_WIDTH_RANGE, 201)[1:-1]
        _, zlo, zhi, _ = _g0_rows_csv(os.path.join(out, "figure1_zoom.csv"),
                                      acceptance.g0_scan(lams=zoom))
        width = float(np.max(zhi - zlo))
        if svg:
            write_svg(os.path.join(out, "figure1.svg"), lam,
                      {"g0 lower": np.clip(lo, -10, 10), "g0 upper": np.clip(hi, -10, 10),
                       "initial condition": np.clip(rhs, -10, 10)}, title="g0 against lambda")
        return width < acceptance.CF_WIDTH_TOL, (
            f"envelope width {width:.2e} on lambda in {acceptance.CF_WIDTH_RANGE} "
            f"(tol {acceptance.CF_WIDTH_TOL:g})"), dict(width=width)
    return [acceptance.timed("6 (envelope)", "continued-fraction envelope",
                              acceptance.CF_BUDGET, run)]


def _preset_figure2(out, jobs, svg):
    res = acceptance.criterion6()
    lams = np.linspace(0.2, 0.9, 351)
    lam, lo, hi, rhs = _g0_rows_csv(os.path.join(out, "figure2.csv"),
                                    acceptance.g0_scan(lams=lams))
    m = res.measured or {}
    write_csv(os.path.join(out, "figure2_roots.csv"), ["lambda_sp", "lambda_sr"],
              [[m.get("lambda_sp", np.nan)], [m.get("lambda_sr", np.nan)]])
    if svg:
        write_svg(os.path.join(out, "figure2.svg"), lam,
                  {"g0": np.clip(0.5 * (lo + hi), -10, 10),
                   "initial condition": np.clip(rhs, -10, 10)}, title="first intersection")
    return [res]


def _preset_overlap(out, jobs, svg):
    res = acceptance.criterion7()
    m = res.measured or {}
    if "c" in m:
        write_csv(os.path.join(out, "overlap.csv"),
                  ["lambda_s", "s_p", "re_c", "im_c", "remainder_bound"],
                  [[m["lambda_s"]], [m["s_p"]], [m["c"].real], [m["c"].imag],
                   [m["remainder_bound"]]])
    return [res]


PRESETS = {
    "fermi-scaling": _preset_fermi,
    "tail": _preset_tail,
    "figure1": _preset_figure1,
    "figure2": _preset_figure2,
    "overlap": _preset_overlap,
}


def run_preset(name, out=".", jobs=1, svg=False):
    """Run a named preset, write its CSVs and ``summary.txt``.

    Returns
    -------
    (status, results) : (int, list of CriterionResult)
        ``status`` is 0 when every threshold is met, 2 otherwise.
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    os.makedirs(out, exist_ok=True)
    try:
        results = PRESETS[name](out, jobs, svg)
    except (ArithmeticError, ValueError, LookupError) as exc:
        raise RuntimeError(f"preset {name!r} failed: {exc}") from exc
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(f"preset {name}\n")
        for res in results:
            fh.write(res.line + "\n")
    ok = all(r.passed for r in results)
    return (EXIT_OK if ok else EXIT_THRESHOLD), results


# -- subcommands ---------------------------------------------------------------

def _load_config(args):
    if getattr(args, "config", None):
        return parse_config(args.config)
    return ExperimentConfig()


def _out_dir(args, cfg):
    out = args.out or cfg.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _forcing(cfg):
    if cfg.forcing is None:
        raise ConfigError("no forcing given: set omega and coefficients in --config")
    return cfg.forcing


def _override(cfg, args, *keys):
    vals = {}
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            vals[key] = v
    if not vals:
        return cfg
    return ExperimentConfig(**{**{f: getattr(cfg, f) for f in cfg.__dataclass_fields__},
                               **vals})


def cmd_simulate(args):
    cfg = _override(_load_config(args), args, "T", "h", "k_max", "n_k")
    spec = _forcing(cfg)
    out = _out_dir(args, cfg)
    state = cfg.initial_state(spec)
    res = volterra.simulate(spec, state, cfg.T, cfg.h)
    t, th = res.t, res.theta.values
    write_csv(os.path.join(out, "theta.csv"), ["t", "re_theta", "im_theta", "P"],
              [t, th.real, th.imag, res.P])
    write_csv(os.path.join(out, "spectrum.csv"), ["k", "abs_Theta_sq"],
              [res.k_grid, np.abs(res.spectrum) ** 2])
    write_csv(os.path.join(out, "diag.csv"), ["t", "unitarity_residual"],
              [t, res.unitarity_residual])
    if args.svg:
        write_svg(os.path.join(out, "theta.svg"), t, {"P": res.P}, title="survival probability")
    print(f"P(T) = {res.P[-1]:.10g}, max unitarity residual "
          f"{res.max_unitarity_residual:.3e}")
    return EXIT_OK


def cmd_spectrum(args):
    cfg = _override(_load_config(args), args, "T", "h", "k_max", "n_k")
    spec = _forcing(cfg)
    out = _out_dir(args, cfg)
    res = volterra.simulate(spec, cfg.initial_state(spec), cfg.T, cfg.h, diagnostics=False)
    dens = np.abs(res.spectrum) ** 2
    write_csv(os.path.join(out, "spectrum.csv"), ["k", "abs_Theta_sq"], [res.k_grid, dens])
    if args.svg:
        write_svg(os.path.join(out, "spectrum.svg"), res.k_grid, {"|Theta|^2": dens},
                  title=f"continuum density at t = {cfg.T:g}")
    print(f"continuum weight on grid {np.trapezoid(dens, res.k_grid):.10g}")
    return EXIT_OK


def cmd_floquet(args):
    cfg = _override(_load_config(args), args, "N")
    spec = _forcing(cfg)
    out = _out_dir(args, cfg)
    p0 = complex(args.re_p0, args.im_p0)
    sol = floquet.solve_lattice(floquet.build_lattice_system(spec, p0, cfg.N))
    write_csv(os.path.join(out, "lattice.csv"), ["n", "re_y", "im_y"],
              [sol.n, sol.y.real, sol.y.imag])
    rep = floquet.classify_singularities(spec)
    with open(os.path.join(out, "singularities.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "s", "k0", "resonant"])
        w.writerow(["branch", f"{rep.s_r:.17g}", rep.k0, int(rep.resonant)])
        for s in rep.pole_candidates:
            w.writerow(["pole", f"{s:.17g}", "", ""])
    print(f"y_0 = {sol.y0.real:.12g}{sol.y0.imag:+.12g}i (N = {sol.N}, "
          f"converged {sol.converged}); s_r = {rep.s_r:.12g}, k0 = {rep.k0}, "
          f"{len(rep.pole_candidates)} pole candidate(s)")
    return EXIT_OK


def cmd_kernel_table(args):
    out = _out_dir(args, _load_config(args))
    table = kernel.kernel_cell_moments(args.h, args.cells)
    path = os.path.join(out, "kernel_table.csv")
    kernel.write_kernel_table(table, path)
    print(f"wrote {table.cells} cells to {path}")
    return EXIT_OK


def cmd_genericity(args):
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    if args.sequence == "inverse":
        target = lambda n: 1.0 / n  # noqa: E731
    else:
        target = _forcing(cfg)
    rep = forcing.genericity_distance(target, args.N)
    Ns, ds = zip(*rep.history)
    write_csv(os.path.join(out, "genericity.csv"), ["N", "distance"], [Ns, ds])
    print(f"distance {rep.distance:.12g} at N = {rep.N}: {rep.verdict}")
    return EXIT_OK


def cmd_find_lambda(args):
    out = _out_dir(args, _load_config(args))
    s0 = args.s0
    if s0 not in ("sp", "sr"):
        s0 = float(s0)
    rows = acceptance.g0_scan(args.omega, args.r, args.n0, s0)
    _g0_rows_csv(os.path.join(out, "g0_scan.csv"), rows)
    roots = nongeneric.find_lambda_s(args.omega, args.r, s0=s0, n0=args.n0)
    write_csv(os.path.join(out, "roots.csv"), ["lambda", "residual"],
              [roots.roots, roots.residuals])
    if roots.roots:
        print(f"first root lambda_s = {roots.roots[0]:.12g} (s0 = {roots.s0:.12g}, "
              f"n0 = {roots.n0}, residual {roots.residuals[0]:.1e})")
    else:
        print("no root found")
    return EXIT_OK


def cmd_overlap(args):
    out = _out_dir(args, _load_config(args))
    lam, s_p, rel, res = acceptance.overlap_result(args.omega, args.r, args.N)
    write_csv(os.path.join(out, "overlap.csv"),
              ["lambda_s", "s_p", "re_c", "im_c", "remainder_bound"],
              [[lam], [s_p], [res.c.real], [res.c.imag], [res.remainder_bound]])
    print(f"lambda_s = {lam:.12g}, s_p = {s_p:.12g}, c = {res.c.real:.10g}"
          f"{res.c.imag:+.10g}i +- {res.remainder_bound:.1e}")
    return EXIT_OK


def cmd_verify(args):
    out = _out_dir(args, _load_config(args))
    lam = args.lam
    if lam is None:
        lam = nongeneric.find_lambda_s(args.omega, args.r).lambda_s
    rep = nongeneric.verify_incomplete_ionization(args.omega, args.r, lam, args.T, args.h)
    write_csv(os.path.join(out, "plateau.csv"), ["t", "P"], [rep.t, rep.P])
    if args.svg:
        write_svg(os.path.join(out, "plateau.svg"), rep.t, {"P": rep.P},
                  title=f"lambda = {lam:.6g}")
    print(f"lambda = {lam:.12g}: P floor {rep.P_floor:.6g} on the last quarter, band "
          f"{rep.band_early:.4g} -> {rep.band_late:.4g} (stable {rep.band_stable})")
    return EXIT_OK


def cmd_preset(args):
    out = _out_dir(args, _load_config(args))
    status, results = run_preset(args.name, out, args.jobs, args.svg)
    for res in results:
        print(res.line)
    return status


# -- parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Argument errors exit with status 1 (2 is reserved for thresholds)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="flat key=value experiment file")
    parser.add_argument("--out", default=d(None), help="output directory")
    parser.add_argument("--jobs", type=int, default=d(1), help="parallel sweep workers")
    parser.add_argument("--svg", action="store_true", default=d(False),
                        help="also write SVG line plots")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser():
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    p = _Parser(prog="deltawell", description=__doc__.splitlines()[0])
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, **kw):
        sp = sub.add_parser(name, parents=[common], **kw)
        sp.set_defaults(func=func)
        return sp

    for name, func in (("simulate", cmd_simulate), ("spectrum", cmd_spectrum)):
        sp = add(name, func, help=f"time-domain run ({name})")
        sp.add_argument("--T", type=float)
        sp.add_argument("--h", type=float)
        sp.add_argument("--k-max", dest="k_max", type=float)
        sp.add_argument("--n-k", dest="n_k", type=int)

    sp = add("floquet", cmd_floquet, help="lattice solve at p0")
    sp.add_argument("--re-p0", type=float, required=True)
    sp.add_argument("--im-p0", type=float, default=0.0)
    sp.add_argument("--N", type=int)

    sp = add("kernel", None, help="kernel tables")
    ksub = sp.add_subparsers(dest="kernel_command", required=True, parser_class=_Parser)
    kt = ksub.add_parser("table", parents=[common])
    kt.set_defaults(func=cmd_kernel_table)
    kt.add_argument("--h", type=float, required=True)
    kt.add_argument("--cells", type=int, required=True)

    sp = add("genericity", cmd_genericity, help="shift-genericity distance")
    sp.add_argument("--N", type=int, default=50)
    sp.add_argument("--sequence", choices=("config", "inverse"), default="config",
                    help="'inverse' checks C_n = 1/n")

    sp = add("nongeneric", None, help="incomplete-ionization construction")
    nsub = sp.add_subparsers(dest="nongeneric_command", required=True, parser_class=_Parser)

    def family(name, func):
        q = nsub.add_parser(name, parents=[common])
        q.set_defaults(func=func)
        q.add_argument("--omega", type=float, default=acceptance.CF_OMEGA)
        q.add_argument("--r", type=float, default=acceptance.CF_R)
        return q

    q = family("find-lambda", cmd_find_lambda)
    q.add_argument("--n0", type=int, default=acceptance.CF_N0)
    q.add_argument("--s0", default="sp", help="'sp', 'sr' or a number")
    q = family("overlap", cmd_overlap)
    q.add_argument("--N", type=int, default=acceptance.OVERLAP_N)
    q = family("verify", cmd_verify)
    q.add_argument("--T", type=float, default=acceptance.DICHOTOMY_T)
    q.add_argument("--h", type=float, default=acceptance.DICHOTOMY_H)
    q.add_argument("--lambda", dest="lam", type=float, default=None)

    sp = add("preset", cmd_preset, help="reproduce a named experiment")
    sp.add_argument("name", choices=sorted(PRESETS))
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, LookupError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
