"""Command-line front end: configuration, runs, and report emission.

Eight subcommands cover the pipelines: symbol-check (factorization and
reflection-phase residuals), weyl-const (spectral constants by
quadrature), spectrum (assemble + eigensolve + export), weyl-fit
(power-law fits), boundary-exp (eigenfunction boundary decay), zaremba
(Krein pipeline + identity check), dtn-probe (interface symbol on a
strip), singular-probe (log-divergence detector).

Configuration comes from an INI-style file ([section] with key = value
lines) merged with command-line flags, flags winning.  Unknown sections
or keys are rejected before any computation.  Every run emits a
manifest recording the config hash, package and library versions, the
active kernel backend, the seed, and all tolerances; reports are
structured-record text, sequences are `j,value` files, and each
sequence ships with a small plot script.  With --repro set the files
contain no timestamps, so identical configs produce bit-identical
output.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 tolerance violation in --assert mode.

Heavy imports happen inside the handlers so that --jobs can cap the
thread pools through the environment before the numeric stack loads.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys

# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

KNOWN_KEYS = {
    "operator": {"kind", "coeffs", "a", "sigma", "shift", "bc", "mu"},
    "domain": {"kind", "n", "lengths", "radius", "arc", "cap", "sigma_plus", "torus_pad"},
    "grid": {"nodes", "n_r", "n_theta", "h"},
    "task": {
        "xi", "window", "fixed_exponent", "deltas", "decay", "level", "count",
        "band", "threshold", "expect_exponent", "expect_constant",
        "tol", "tol_exponent", "tol_constant", "which", "input", "samples",
    },
    "output": {"directory", "repro", "seed", "jobs", "formats"},
}

_FLAG_DESTS = {
    "op": ("operator", "kind"),
    "coeffs": ("operator", "coeffs"),
    "a": ("operator", "a"),
    "sigma": ("operator", "sigma"),
    "shift": ("operator", "shift"),
    "bc": ("operator", "bc"),
    "mu": ("operator", "mu"),
    "domain": ("domain", "kind"),
    "n": ("domain", "n"),
    "lengths": ("domain", "lengths"),
    "radius": ("domain", "radius"),
    "arc": ("domain", "arc"),
    "cap": ("domain", "cap"),
    "nodes": ("grid", "nodes"),
    "n_r": ("grid", "n_r"),
    "n_theta": ("grid", "n_theta"),
    "h": ("grid", "h"),
    "xi": ("task", "xi"),
    "window": ("task", "window"),
    "fixed_exponent": ("task", "fixed_exponent"),
    "deltas": ("task", "deltas"),
    "decay": ("task", "decay"),
    "level": ("task", "level"),
    "count": ("task", "count"),
    "band": ("task", "band"),
    "threshold": ("task", "threshold"),
    "expect_exponent": ("task", "expect_exponent"),
    "expect_constant": ("task", "expect_constant"),
    "tol": ("task", "tol"),
    "tol_exponent": ("task", "tol_exponent"),
    "tol_constant": ("task", "tol_constant"),
    "which": ("task", "which"),
    "input": ("task", "input"),
    "samples": ("task", "samples"),
    "out": ("output", "directory"),
    "seed": ("output", "seed"),
    "jobs": ("output", "jobs"),
}


class ToleranceFailure(RuntimeError):
    """An --assert bound was violated."""


def _load_config_file(path: str) -> dict:
    from .errors import ConfigurationError

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"config file not found: {path}")
    cfg = {}
    for section in parser.sections():
        if section not in KNOWN_KEYS:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in KNOWN_KEYS[section]:
                raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
            cfg[(section, key)] = value.strip()
    return cfg


def _merge_flags(cfg: dict, args: argparse.Namespace) -> dict:
    merged = dict(cfg)
    for flag, dest in _FLAG_DESTS.items():
        val = getattr(args, flag, None)
        if val is not None:
            merged[dest] = str(val)
    if getattr(args, "repro", False):
        merged[("output", "repro")] = "true"
    return merged


def _config_hash(cfg: dict, subcommand: str) -> str:
    text = subcommand + "\n" + "\n".join(f"{s}.{k}={v}" for (s, k), v in sorted(cfg.items()))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# typed getters ------------------------------------------------------------


def _get(cfg, section, key, default=None):
    return cfg.get((section, key), default)


def _get_float(cfg, section, key, default=None):
    from .errors import ConfigurationError

    raw = cfg.get((section, key))
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{section}.{key} must be a number, got {raw!r}") from exc


def _get_int(cfg, section, key, default=None):
    from .errors import ConfigurationError

    raw = cfg.get((section, key))
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{section}.{key} must be an integer, got {raw!r}") from exc


def _get_floats(cfg, section, key, default=None):
    from .errors import ConfigurationError

    raw = cfg.get((section, key))
    if raw is None:
        return default
    try:
        return [float(p) for p in raw.replace(";", ",").split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"{section}.{key} must be comma-separated numbers") from exc


def _get_bool(cfg, section, key, default=False):
    raw = cfg.get((section, key))
    if raw is None:
        return default
    return raw.strip().lower() in ("1", "true", "yes", "on")


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------


def _build_coeffs(cfg):
    """Coefficient matrix from its text form.

    Accepted: `identity` / `laplacian`, `diag:1,4`, `matrix:2,1;1,2`.
    """
    import numpy as np

    from .errors import ConfigurationError
    from .symbols import SecondOrderCoeffs

    spec = _get(cfg, "operator", "coeffs", "identity")
    n = _get_int(cfg, "domain", "n", None)
    sigma = _get_float(cfg, "operator", "sigma", 0.0)
    if spec in ("identity", "laplacian"):
        dom_n = n if n is not None else _domain_dim(cfg)
        return SecondOrderCoeffs.laplacian(dom_n)
    if spec.startswith("diag:"):
        diag = [float(p) for p in spec[5:].split(",")]
        return SecondOrderCoeffs(len(diag), a=np.diag(diag), sigma=sigma)
    if spec.startswith("matrix:"):
        rows = [[float(p) for p in row.split(",")] for row in spec[7:].split(";")]
        mat = np.asarray(rows, dtype=float)
        if mat.shape[0] != mat.shape[1]:
            raise ConfigurationError("coefficient matrix must be square")
        return SecondOrderCoeffs(mat.shape[0], a=mat, sigma=sigma)
    raise ConfigurationError(f"unknown coefficient form {spec!r}")


def _domain_dim(cfg) -> int:
    kind = _get(cfg, "domain", "kind", "square")
    n = _get_int(cfg, "domain", "n", None)
    if n is not None:
        return n
    return {"interval": 1, "square": 2, "disk": 2, "box": 3, "cube": 3, "ball": 3}.get(kind, 2)


def _build_domain(cfg):
    import numpy as np

    from .errors import ConfigurationError
    from .quadrature import DomainSpec

    kind = _get(cfg, "domain", "kind", "square")
    n = _get_int(cfg, "domain", "n", None)
    if kind == "interval" or (kind == "square" and n == 1):
        return DomainSpec.unit_interval()
    if kind == "square":
        return DomainSpec.unit_square()
    if kind in ("box", "cube") or (kind == "square" and n == 3):
        return DomainSpec.unit_box()
    if kind == "disk":
        arc = _get_floats(cfg, "domain", "arc", [0.0, float(np.pi)])
        if len(arc) != 2:
            raise ConfigurationError("arc needs two angles")
        return DomainSpec.disk(radius=_get_float(cfg, "domain", "radius", 1.0), arc=tuple(arc))
    if kind == "ball":
        return DomainSpec.ball(cap=_get_float(cfg, "domain", "cap", float(np.pi) / 2.0))
    raise ConfigurationError(f"unknown domain kind {kind!r}")


def _assemble_operator(cfg):
    """Assembled (possibly fractional) operator matrix plus its grid."""
    from .discretize import (
        TorusMultiplier,
        assemble_second_order,
        build_grid,
        fractional_restricted,
    )
    from .errors import ConfigurationError

    coeffs = _build_coeffs(cfg)
    domain = _build_domain(cfg)
    nodes = _get_int(cfg, "grid", "nodes", 32)
    grid = build_grid(domain, nodes)
    a = _get_float(cfg, "operator", "a", 1.0)
    bc = _get(cfg, "operator", "bc", "dirichlet")
    if a == 1.0:
        sigma = _get_float(cfg, "operator", "sigma", 0.0) if bc == "mixed" else None
        A = assemble_second_order(coeffs, grid, bc=bc, sigma=sigma)
        return A, grid, coeffs, a
    if bc != "dirichlet":
        raise ConfigurationError("fractional powers are restricted with Dirichlet exterior data")
    mult = TorusMultiplier.from_coeffs(coeffs)
    A = fractional_restricted(mult, a, grid=grid)
    return A, grid, coeffs, a


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _resolve_outdir(cfg, args) -> str:
    if getattr(args, "out", None):
        return args.out
    env = os.environ.get("FRACSPEC_OUT")
    if env:
        return env
    return _get(cfg, "output", "directory", "fracspec-out")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Emitter:
    """Collects report rows, sequences, and tolerances, then writes files."""

    def __init__(self, outdir: str, task: str, cfg: dict, args, repro: bool):
        self.outdir = outdir
        self.task = task
        self.cfg = cfg
        self.args = args
        self.repro = repro
        self.rows: list[tuple[str, str]] = []
        self.tolerances: dict[str, float] = {}
        self.csvs: list[tuple[str, list]] = []

    def row(self, key, value):
        self.rows.append((key, _fmt(value)))

    def tolerance(self, name, value):
        self.tolerances[name] = value

    def sequence(self, name, values):
        self.csvs.append((name, list(values)))

    def write(self):
        os.makedirs(self.outdir, exist_ok=True)
        report_path = os.path.join(self.outdir, f"{self.task}-report.txt")
        with open(report_path, "w") as fh:
            for key, value in self.rows:
                fh.write(f"{key} = {value}\n")
        for name, values in self.csvs:
            csv_path = os.path.join(self.outdir, f"{name}.csv")
            with open(csv_path, "w") as fh:
                fh.write("j,value\n")
                for j, v in enumerate(values, start=1):
                    fh.write(f"{j},{_fmt(float(v))}\n")
            plot_path = os.path.join(self.outdir, f"{name}-plot.py")
            with open(plot_path, "w") as fh:
                fh.write(_plot_script(f"{name}.csv"))
        self._manifest()
        return report_path

    def _manifest(self):
        import platform

        import numpy
        import scipy

        from . import __version__, _accel

        entries = {
            "task": self.task,
            "config_hash": _config_hash(self.cfg, self.task),
            "package_version": __version__,
            "python_version": platform.python_version(),
            "numpy_version": numpy.__version__,
            "scipy_version": scipy.__version__,
            "kernel_backend": "numba" if _accel.NUMBA_ACTIVE else "numpy",
            "seed": _get_int(self.cfg, "output", "seed", 0),
            "jobs": _get_int(self.cfg, "output", "jobs", 0) or "unlimited",
            "repro": str(self.repro).lower(),
        }
        for name, value in sorted(self.tolerances.items()):
            entries[f"tolerance_{name}"] = _fmt(value)
        if not self.repro:
            import datetime

            entries["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        with open(os.path.join(self.outdir, "manifest.txt"), "w") as fh:
            for key in entries:
                fh.write(f"{key} = {entries[key]}\n")


def _plot_script(csv_name: str) -> str:
    return (
        "#!/usr/bin/env python3\n"
        '"""Log-log plot of the exported sequence."""\n'
        "import csv\n"
        "import sys\n"
        "\n"
        "import matplotlib.pyplot as plt\n"
        "\n"
        f"path = sys.argv[1] if len(sys.argv) > 1 else {csv_name!r}\n"
        "with open(path) as fh:\n"
        "    rows = list(csv.DictReader(fh))\n"
        "j = [int(r['j']) for r in rows]\n"
        "v = [abs(float(r['value'])) for r in rows]\n"
        "plt.loglog(j, v, marker='.', linestyle='none')\n"
        "plt.xlabel('j')\n"
        "plt.ylabel('value')\n"
        "plt.grid(True, which='both', alpha=0.3)\n"
        "plt.tight_layout()\n"
        "plt.show()\n"
    )


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_symbol_check(cfg, args, em: Emitter) -> list[str]:
    import numpy as np

    from .symbols import (
        PrincipalSymbol,
        boundary_reduction,
        mu_transmission_residual,
    )

    coeffs = _build_coeffs(cfg)
    n = coeffs.n
    a = _get_float(cfg, "operator", "a", 1.0)
    mu = _get_float(cfg, "operator", "mu", a)
    samples = _get_int(cfg, "task", "samples", 16)
    seed = _get_int(cfg, "output", "seed", 0)
    rng = np.random.default_rng(seed)

    worst_fact = 0.0
    points = []
    normals = []
    for _ in range(samples):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        x = rng.standard_normal(n)
        xi_p = rng.standard_normal(n - 1) if n > 1 else np.zeros(0)
        fact = boundary_reduction(coeffs, x, q, xi_p)
        worst_fact = max(worst_fact, fact.residual)
        points.append(x)
        normals.append(q[:, -1])
    symbol = PrincipalSymbol.from_coeffs(coeffs, power=a)
    worst_trans = mu_transmission_residual(symbol, mu, points, normals)

    em.row("law", "abar_nn (xi_n - kappa+)(xi_n - kappa-) = a(xi', xi_n); p(-N) = exp(i pi (m - 2 mu)) p(N)")
    em.row("coefficients", coeffs.describe())
    em.row("power", a)
    em.row("reflection_order", mu)
    em.row("samples", samples)
    em.row("factorization_residual", worst_fact)
    em.row("transmission_residual", worst_trans)
    # console floor: roundoff-level residuals read as 0; report keeps full precision
    lines = [
        f"factorization residual = {0 if worst_fact < 1e-14 else f'{worst_fact:.6g}'}",
        f"transmission residual = {0 if worst_trans < 1e-14 else f'{worst_trans:.6g}'}",
    ]
    tol = _get_float(cfg, "task", "tol", 1e-8)
    em.tolerance("residual", tol)
    if args.check_tolerances and max(worst_fact, worst_trans) > tol:
        raise ToleranceFailure(f"symbol residuals exceed {tol:g}")
    return lines


def _cmd_weyl_const(cfg, args, em: Emitter) -> list[str]:
    from .quadrature import weyl_constant_dirichlet, weyl_constant_L, weyl_constant_M
    from .symbols import PrincipalSymbol

    which = _get(cfg, "task", "which", "dirichlet")
    level = _get_int(cfg, "task", "level", 0)
    a = _get_float(cfg, "operator", "a", 1.0)
    domain = _build_domain(cfg)
    op_kind = _get(cfg, "operator", "kind", "frac-laplacian")
    coeffs = _build_coeffs(cfg)

    if which == "dirichlet":
        if op_kind == "frac-laplacian":
            symbol = PrincipalSymbol.fractional_laplacian(_domain_dim(cfg), a)
        else:
            symbol = PrincipalSymbol.from_coeffs(coeffs, power=a)
        res = weyl_constant_dirichlet(symbol, domain, level=level)
        em.row("law", "N(t) ~ C' t^(n/(2a)) as t -> infinity")
        name = "C'"
    elif which == "interface-l":
        res = weyl_constant_L(coeffs, domain, level=level)
        em.row("law", "N_L(t) ~ c_L t^(-(n-1)) as t -> 0+")
        name = "c_L"
    elif which == "interface-m":
        res = weyl_constant_M(coeffs, domain, level=level)
        em.row("law", "N_M(t) ~ c_M t^(-(n-1)/2) as t -> 0+")
        name = "c_M"
    else:
        from .errors import ConfigurationError

        raise ConfigurationError(f"unknown constant selector {which!r}")

    value = float(res.value)
    em.row("constant", value)
    em.row("estimated_error", float(res.error))
    em.row("operator", op_kind)
    em.row("power", a)
    em.row("domain", _get(cfg, "domain", "kind", "square"))
    return [f"{name} = {value:.6g}"]


def _cmd_spectrum(cfg, args, em: Emitter) -> list[str]:
    from .eig import sym_eig

    A, grid, coeffs, a = _assemble_operator(cfg)
    spec = sym_eig(A)
    values = spec.values
    count = _get_int(cfg, "task", "count", None)
    if count:
        values = values[:count]
    em.row("law", "lambda_j ascending; Weyl: lambda_j ~ C j^(2a/n)")
    em.row("operator", A.descriptor)
    em.row("power", a)
    em.row("count", int(values.size))
    em.row("lambda_min", float(values[0]))
    em.row("lambda_max", float(values[-1]))
    em.row("h", grid.h)
    em.sequence("spectrum-values", values)
    return [f"computed {values.size} eigenvalues in [{values[0]:.6g}, {values[-1]:.6g}]"]


def _load_csv_values(path):
    import numpy as np

    from .errors import ConfigurationError

    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    except OSError as exc:
        raise ConfigurationError(f"cannot read input sequence: {exc}") from exc
    return data[:, 1] if data.ndim == 2 else data[1:]


def _cmd_weyl_fit(cfg, args, em: Emitter) -> list[str]:
    from .asymptotics import weyl_fit
    from .eig import sym_eig

    source = _get(cfg, "task", "input")
    if source:
        values = _load_csv_values(source)
        label = source
    else:
        A, grid, coeffs, a = _assemble_operator(cfg)
        values = sym_eig(A).values
        label = A.descriptor
    window = _get_floats(cfg, "task", "window")
    window = (int(window[0]), int(window[1])) if window else None
    fixed = _get_float(cfg, "task", "fixed_exponent", None)
    fit = weyl_fit(values, window=window, fixed_exponent=fixed)

    em.row("law", "v_j ~ C j^e on the fit window")
    em.row("source", label)
    em.row("exponent", float(fit.exponent))
    em.row("constant", float(fit.constant))
    em.row("window_lo", fit.window[0])
    em.row("window_hi", fit.window[1])
    em.row("residual", float(fit.residual))
    em.row("fixed_exponent", fit.fixed_exponent)
    em.sequence("weyl-fit-values", values)
    lines = [f"exponent = {fit.exponent:.6g}", f"constant = {fit.constant:.6g}"]

    exp_target = _get_float(cfg, "task", "expect_exponent", None)
    const_target = _get_float(cfg, "task", "expect_constant", None)
    tol_e = _get_float(cfg, "task", "tol_exponent", 0.05)
    tol_c = _get_float(cfg, "task", "tol_constant", 0.15)
    if exp_target is not None:
        em.tolerance("exponent_rel", tol_e)
        em.row("expect_exponent", exp_target)
    if const_target is not None:
        em.tolerance("constant_rel", tol_c)
        em.row("expect_constant", const_target)
    if args.check_tolerances:
        if exp_target is not None and abs(fit.exponent - exp_target) > tol_e * abs(exp_target):
            raise ToleranceFailure(
                f"exponent {fit.exponent:.6g} outside {tol_e:.0%} of {exp_target:.6g}"
            )
        if const_target is not None and abs(fit.constant - const_target) > tol_c * abs(const_target):
            raise ToleranceFailure(
                f"constant {fit.constant:.6g} outside {tol_c:.0%} of {const_target:.6g}"
            )
    return lines


def _cmd_boundary_exp(cfg, args, em: Emitter) -> list[str]:
    import numpy as np
    import scipy.linalg
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    from .asymptotics import boundary_exponent, ratio_trace_check

    A, grid, coeffs, a = _assemble_operator(cfg)
    mat = A.matrix
    if sp.issparse(mat):
        vals, vecs = spla.eigsh(mat.tocsc(), k=1, which="SA")
        u = vecs[:, 0]
    else:
        vals, vecs = scipy.linalg.eigh(np.asarray(mat), subset_by_index=[0, 0])
        u = vecs[:, 0]
    band = _get_floats(cfg, "task", "band")
    band = tuple(band) if band else (2.0 * grid.h, 20.0 * grid.h)
    exponent = boundary_exponent(u, grid, band=band)
    threshold = _get_float(cfg, "task", "threshold", 0.5)
    ratio = ratio_trace_check(u, grid, a, band=band, threshold=threshold)

    em.row("law", "u(x) ~ dist(x)^a near the boundary")
    em.row("power", a)
    em.row("ground_energy", float(vals[0]))
    em.row("exponent", float(exponent))
    em.row("band_lo", float(band[0]))
    em.row("band_hi", float(band[1]))
    em.row("ratio_near_max", float(ratio.near_max))
    em.row("ratio_band_max", float(ratio.max_ratio))
    em.row("ratio_nonvanishing", ratio.nonvanishing)
    lines = [
        f"boundary exponent = {exponent:.6g} (target {a:.6g})",
        f"weighted ratio nonvanishing = {ratio.nonvanishing}",
    ]
    tol = _get_float(cfg, "task", "tol", 0.1)
    em.tolerance("exponent_abs", tol)
    if args.check_tolerances and abs(exponent - a) > tol:
        raise ToleranceFailure(f"boundary exponent {exponent:.6g} not within {tol:g} of {a:g}")
    return lines


def _cmd_zaremba(cfg, args, em: Emitter) -> list[str]:
    import numpy as np

    from .discretize import OperatorMatrix, build_grid
    from .zaremba import (
        disk_interface_spectra,
        krein_from_matrix,
        krein_identity_check,
        krein_term,
    )

    if args.toy:
        # 2-node worked example: interior node coupled to one free
        # boundary node; every quantity is hand-checkable
        toy = OperatorMatrix(
            np.array([[2.0, -1.0], [-1.0, 1.5]]),
            "all",
            meta={"row_sets": {"interior": [0], "sigma_plus": [1]}, "h": 1.0},
        )
        k = krein_from_matrix(toy)
        rep = krein_identity_check(k)
        mu = float(k.mu_exact()[0])
        em.row("law", "nonzero spec(M) = spec(S^-1 (K^T K + I))")
        em.row("mu_1", mu)
        em.row("identity_mismatch", float(rep.max_rel_mismatch))
        em.row("rank_bound_ok", rep.rank_bound_ok)
        return [
            f"M eigenvalue = {mu:.6g}",
            f"identity mismatch = {rep.max_rel_mismatch:.6g}",
        ]

    domain_kind = _get(cfg, "domain", "kind", "square")
    shift_raw = _get(cfg, "operator", "shift", "auto")
    sigma = _get_float(cfg, "operator", "sigma", 0.0)
    tol = _get_float(cfg, "task", "tol", 1e-10)
    em.tolerance("identity_rel", tol)

    if domain_kind == "disk":
        arc = _get_floats(cfg, "domain", "arc", [0.0, float(np.pi)])
        n_r = _get_int(cfg, "grid", "n_r", 64)
        n_theta = _get_int(cfg, "grid", "n_theta", 128)
        shift = 1.0 if shift_raw == "auto" else float(shift_raw)
        d = disk_interface_spectra(n_r, n_theta, arc=tuple(arc),
                                   radius=_get_float(cfg, "domain", "radius", 1.0),
                                   shift=shift, sigma=sigma)
        em.row("law", "mu_j(M) ~ c j^(-2/(n-1)); interface spectra via separation of modes")
        em.row("boundary_nodes", int(d.mu.size))
        em.row("shift", shift)
        em.row("n2_flagged", True)
        em.sequence("zaremba-mu", d.mu)
        em.sequence("zaremba-interface", np.sort(np.linalg.eigvalsh(d.L_weighted)))
        return [f"computed {d.mu.size} interface eigenvalues (disk fast path)"]

    coeffs = _build_coeffs(cfg)
    grid = build_grid(_build_domain(cfg), _get_int(cfg, "grid", "nodes", 16))
    shift = "auto" if shift_raw == "auto" else float(shift_raw)
    k = krein_term(coeffs, sigma, grid, shift=shift)
    rep = krein_identity_check(k)
    mu_w = k.weighted_mu()
    em.row("law", "nonzero spec(M) = spec(S^-1 (K^T K + I)); mu_j(M) ~ c j^(-2/(n-1))")
    em.row("interior_nodes", k.n_interior)
    em.row("boundary_nodes", k.n_boundary)
    em.row("shift", k.shift)
    em.row("sigma", sigma)
    em.row("n2_flagged", bool(k.meta.get("n2_flagged", False)))
    em.row("identity_mismatch", float(rep.max_rel_mismatch))
    em.row("rank_bound_ok", rep.rank_bound_ok)
    em.sequence("zaremba-mu", mu_w)
    em.sequence("zaremba-interface", k.weighted_L_spectrum())
    lines = [
        f"identity mismatch = {rep.max_rel_mismatch:.6g}",
        f"computed {mu_w.size} weighted interface eigenvalues",
    ]
    if args.check_tolerances and rep.max_rel_mismatch > tol:
        raise ToleranceFailure(f"Krein identity mismatch {rep.max_rel_mismatch:.3g} exceeds {tol:g}")
    return lines


def _cmd_dtn_probe(cfg, args, em: Emitter) -> list[str]:
    import numpy as np

    from .zaremba import dtn_symbol_probe

    coeffs = _build_coeffs(cfg)
    xi = _get_floats(cfg, "task", "xi", [1.0, 2.0, 3.0])
    h = _get_float(cfg, "grid", "h", 1.0 / 128.0)
    rep = dtn_symbol_probe(coeffs, xi, h=h)

    em.row("law", "p_dtn(xi') = -kappa0(xi') to principal order")
    em.row("h", h)
    em.row("rows", rep.meta["rows"])
    for k, x in enumerate(rep.xi):
        em.row(f"xi_{k+1}", float(x))
        em.row(f"measured_{k+1}", float(rep.measured[k]))
        em.row(f"predicted_{k+1}", float(rep.predicted[k]))
        em.row(f"rel_error_{k+1}", float(rep.rel_errors[k]))
    worst = float(np.max(rep.rel_errors))
    em.row("max_rel_error", worst)
    tol = _get_float(cfg, "task", "tol", 0.10)
    em.tolerance("symbol_rel", tol)
    if args.check_tolerances and worst > tol:
        raise ToleranceFailure(f"interface symbol off by {worst:.3g} > {tol:g}")
    return [f"max relative symbol error = {worst:.6g} over {len(xi)} frequencies"]


def _cmd_singular_probe(cfg, args, em: Emitter) -> list[str]:
    import numpy as np

    from .asymptotics import log_divergence_probe

    decay = _get(cfg, "task", "decay", "harmonic")
    deltas = _get_floats(cfg, "task", "deltas")
    if deltas is None:
        deltas = np.geomspace(0.3, 1e-3, 25)
    probe = log_divergence_probe(1.0, np.asarray(deltas, dtype=float), decay=decay)

    tol = _get_float(cfg, "task", "tol", 0.05)
    divergent = (not probe.degenerate) and abs(probe.slope - 1.0) <= tol
    em.row("law", "I(delta) ~ ||psi||^2 |log delta| as delta -> 0+")
    em.row("decay", decay)
    em.row("normalized_slope", float(probe.slope))
    em.row("norm_sq", float(probe.norm_sq))
    em.row("degenerate", bool(probe.degenerate))
    em.row("divergent", divergent)
    em.sequence("singular-probe-values", probe.integrals)
    em.tolerance("slope_abs", tol)
    if args.check_tolerances and abs(probe.slope - 1.0) > tol:
        raise ToleranceFailure(f"log slope {probe.slope:.4g} not within {tol:g} of 1")
    return [f"normalized log slope = {probe.slope:.6g} (divergent = {divergent})"]


_HANDLERS = {
    "symbol-check": _cmd_symbol_check,
    "weyl-const": _cmd_weyl_const,
    "spectrum": _cmd_spectrum,
    "weyl-fit": _cmd_weyl_fit,
    "boundary-exp": _cmd_boundary_exp,
    "zaremba": _cmd_zaremba,
    "dtn-probe": _cmd_dtn_probe,
    "singular-probe": _cmd_singular_probe,
}


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracspec",
        description="Spectral pipelines for fractional and mixed-boundary elliptic operators.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="INI-style config file")
        p.add_argument("--out", help="output directory (overrides FRACSPEC_OUT)")
        p.add_argument("--repro", action="store_true", help="omit timestamps for bit-identical reruns")
        p.add_argument("--seed", type=int, help="seed for sampled checks")
        p.add_argument("--jobs", type=int, help="cap worker threads")
        p.add_argument("--assert", dest="check_tolerances", action="store_true",
                       help="exit 4 when a tolerance is violated")
        p.add_argument("--tol", type=float, help="primary tolerance for --assert")

    def operator(p, frac=True):
        p.add_argument("--op", help="operator kind: frac-laplacian | coeffs")
        p.add_argument("--coeffs", help="identity | diag:1,4 | matrix:2,1;1,2")
        if frac:
            p.add_argument("--a", type=float, help="fractional power")
        p.add_argument("--sigma", type=float, help="Robin weight on the free boundary")
        p.add_argument("--shift", help="positivity shift (number or 'auto')")
        p.add_argument("--bc", help="dirichlet | mixed | periodic")

    def domain(p):
        p.add_argument("--domain", help="interval | square | box | disk | ball")
        p.add_argument("--n", type=int, help="ambient dimension")
        p.add_argument("--radius", type=float)
        p.add_argument("--arc", help="free arc angles t0,t1")
        p.add_argument("--cap", type=float)

    def grid(p):
        p.add_argument("--nodes", type=int, help="nodes per axis")
        p.add_argument("--n-r", dest="n_r", type=int, help="radial rings (disk)")
        p.add_argument("--n-theta", dest="n_theta", type=int, help="angular nodes (disk)")
        p.add_argument("--h", type=float, help="grid spacing (strip probe)")

    p = sub.add_parser("symbol-check", help="factorization and reflection-phase residuals")
    common(p); operator(p)
    p.add_argument("--n", type=int, help="ambient dimension")
    p.add_argument("--mu", type=float, help="reflection order (defaults to the power)")
    p.add_argument("--samples", type=int, help="random boundary samples")

    p = sub.add_parser("weyl-const", help="spectral constants by cosphere quadrature")
    common(p); operator(p); domain(p)
    p.add_argument("--which", help="dirichlet | interface-l | interface-m")
    p.add_argument("--level", type=int, help="quadrature refinement level")

    p = sub.add_parser("spectrum", help="assemble, eigensolve, export")
    common(p); operator(p); domain(p); grid(p)
    p.add_argument("--count", type=int, help="export only the first eigenvalues")

    p = sub.add_parser("weyl-fit", help="power-law fit of a spectral sequence")
    common(p); operator(p); domain(p); grid(p)
    p.add_argument("--input", help="fit an existing j,value file instead of assembling")
    p.add_argument("--window", help="fit window j_lo,j_hi")
    p.add_argument("--fixed-exponent", dest="fixed_exponent", type=float)
    p.add_argument("--expect-exponent", dest="expect_exponent", type=float)
    p.add_argument("--expect-constant", dest="expect_constant", type=float)
    p.add_argument("--tol-exponent", dest="tol_exponent", type=float)
    p.add_argument("--tol-constant", dest="tol_constant", type=float)

    p = sub.add_parser("boundary-exp", help="boundary decay rate of the ground eigenfunction")
    common(p); operator(p); domain(p); grid(p)
    p.add_argument("--band", help="distance band lo,hi for the fit")
    p.add_argument("--threshold", type=float, help="near-boundary ratio threshold")

    p = sub.add_parser("zaremba", help="Krein pipeline with identity check")
    common(p); operator(p); domain(p); grid(p)
    p.add_argument("--toy", action="store_true", help="run the 2-node worked example")

    p = sub.add_parser("dtn-probe", help="interface symbol on a flat strip")
    common(p); operator(p); grid(p)
    p.add_argument("--xi", help="tangential frequencies, comma separated")

    p = sub.add_parser("singular-probe", help="log-divergence detector")
    common(p)
    p.add_argument("--decay", help="flat | harmonic")
    p.add_argument("--deltas", help="cutoff sequence, comma separated, decreasing")

    return parser


def execute(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if getattr(args, "jobs", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ[var] = str(args.jobs)

    from .errors import ConfigurationError, NumericError

    try:
        cfg = _load_config_file(args.config) if args.config else {}
        cfg = _merge_flags(cfg, args)
        repro = _get_bool(cfg, "output", "repro", False)
        outdir = _resolve_outdir(cfg, args)
        em = Emitter(outdir, args.subcommand, cfg, args, repro)
        lines = _HANDLERS[args.subcommand](cfg, args, em)
        em.write()
        for line in lines:
            print(line)
        return 0
    except ToleranceFailure as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return 4
    except (ConfigurationError, configparser.Error, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()
