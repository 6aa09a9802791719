"""Configuration-driven parameter sweeps with CSV output.

A sweep is described by a YAML document::

    base:
      fronthaul: {B_F: 6000, L_W: 5000, T_max: 1.0e-3}
      geometry: {radius_m: 100.0, ref_dist_m: 30.0, pathloss_exp: 3.0}
      sizes: {N_U: 2, n_R: 2, n_Uk: 1}
      N0: 1.0
    axes:
      eps_F: [0.1, 0.5, 0.9]
      snr_db: [25.0]
      C_F_bps: [1.0e+8]
      R_F_fixed: grid          # optional: a list of rates or "grid"
    schemes: [mdc, pd]
    n_channels: 50
    base_seed: 0
    trials_mc: 0
    chunk_channels: 10
    solver: {rel_tol: 1.0e-6, max_outer: 100}

Without ``R_F_fixed`` every row holds the rate-searched optimum; with it,
one row per fixed rate.  The SNR is ``P / N0`` with ``N0`` fixed.  Channel
``k`` is drawn from seed ``base_seed + k`` and is shared by every axis point.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml

from . import optimize as opt
from .channel import sample_channel
from .congestion import FronthaulConfig, description_pmf
from .errors import ConfigError, ParameterError
from .sim import simulate_expected_rate

COLUMNS = ("scheme", "eps_F", "snr_db", "C_F_bps", "channel_seed", "R_F",
           "expected_sum_rate", "rate_layer1", "rate_layer2", "p_M0", "p_M1", "p_M2",
           "iterations", "converged", "mc_rate", "mc_stderr", "diagnostics")

SCHEMES = ("mdc", "pd")

_TOP_KEYS = {"base", "axes", "schemes", "n_channels", "base_seed", "trials_mc",
             "chunk_channels", "solver"}
_BASE_KEYS = {"fronthaul", "geometry", "sizes", "N0"}
_FRONTHAUL_KEYS = {"B_F", "L_W", "T_max"}
_GEOMETRY_KEYS = {"radius_m", "ref_dist_m", "pathloss_exp"}
_SIZE_KEYS = {"N_U", "n_R", "n_Uk"}
_AXIS_KEYS = {"eps_F", "snr_db", "C_F_bps", "R_F_fixed"}


@dataclass(frozen=True)
class SweepSpec:
    """Validated sweep description (see the module docstring for the schema)."""

    eps_F: tuple
    snr_db: tuple = (25.0,)
    C_F_bps: tuple = (100e6,)
    R_F_fixed: object = None          # None, "grid" or a tuple of rates
    schemes: tuple = SCHEMES
    n_channels: int = 50
    base_seed: int = 0
    trials_mc: int = 0
    chunk_channels: int = 10
    B_F: int = 6000
    L_W: int = 5000
    T_max: float = 1e-3
    radius_m: float = 100.0
    ref_dist_m: float = 30.0
    pathloss_exp: float = 3.0
    N_U: int = 2
    n_R: int = 2
    n_Uk: tuple = (1, 1)
    N0: float = 1.0
    solver: opt.SolverConfig = field(default_factory=opt.SolverConfig)

    @property
    def fixed_rate(self):
        return self.R_F_fixed is not None

    def fronthaul(self, eps_F, C_F):
        return FronthaulConfig(B_F=self.B_F, L_W=self.L_W, C_F=C_F, T_max=self.T_max,
                               eps=(eps_F, eps_F))

    def rates(self, C_F):
        """Rates evaluated at capacity ``C_F`` (the fixed list or the search grid)."""
        if isinstance(self.R_F_fixed, tuple):
            return np.array(self.R_F_fixed)
        return opt.rate_grid(self.fronthaul(0.0, C_F))

    def channel(self, k, snr_db):
        P = self.N0 * 10.0 ** (snr_db / 10.0)
        return sample_channel(self.n_Uk, self.n_R, P, noise_power=self.N0,
                              radius=self.radius_m, ref_dist=self.ref_dist_m,
                              pathloss_exp=self.pathloss_exp, seed=self.base_seed + k)


@dataclass
class SweepRow:
    """One CSV record; ``key`` orders rows by scheme, axis indices and seed."""

    scheme: str
    eps_F: float
    snr_db: float
    C_F_bps: float
    channel_seed: int
    R_F: float
    expected_sum_rate: float
    rate_layer1: float
    rate_layer2: float
    p_M0: float
    p_M1: float
    p_M2: float
    iterations: int
    converged: bool
    mc_rate: float = math.nan
    mc_stderr: float = math.nan
    diagnostics: str = ""
    key: tuple = field(default=(), compare=False, repr=False)


# ---------------------------------------------------------------------------
# configuration


def _number(value, name, kind=float):
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    try:
        x = float(value)          # YAML 1.1 reads "1e8" as a string
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {value!r}") from None
    if kind is int:
        if x != int(x):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return int(x)
    if not math.isfinite(x):
        raise ConfigError(f"{name}: must be finite")
    return x


def _mapping(doc, name, allowed):
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{name}: expected a mapping")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    return doc


def _axis(doc, name, required=False, default=None):
    if name not in doc:
        if required:
            raise ConfigError(f"axes.{name} is required")
        return default
    vals = doc[name]
    if not isinstance(vals, list):
        vals = [vals]
    if not vals:
        raise ConfigError(f"axes.{name} must not be empty")
    return tuple(_number(v, f"axes.{name}") for v in vals)


def spec_from_dict(doc):
    """Validate a parsed configuration document and build a ``SweepSpec``."""
    doc = _mapping(doc, "config", _TOP_KEYS)
    base = _mapping(doc.get("base"), "base", _BASE_KEYS)
    fh = _mapping(base.get("fronthaul"), "base.fronthaul", _FRONTHAUL_KEYS)
    geo = _mapping(base.get("geometry"), "base.geometry", _GEOMETRY_KEYS)
    sizes = _mapping(base.get("sizes"), "base.sizes", _SIZE_KEYS)
    axes = _mapping(doc.get("axes"), "axes", _AXIS_KEYS)
    kw = {}

    kw["eps_F"] = _axis(axes, "eps_F", required=True)
    if any(not 0.0 <= e < 1.0 for e in kw["eps_F"]):
        raise ConfigError("axes.eps_F values must lie in [0, 1)")
    kw["snr_db"] = _axis(axes, "snr_db", default=(25.0,))
    kw["C_F_bps"] = _axis(axes, "C_F_bps", default=(100e6,))
    if any(c <= 0 for c in kw["C_F_bps"]):
        raise ConfigError("axes.C_F_bps values must be positive")
    if "R_F_fixed" in axes:
        if axes["R_F_fixed"] == "grid":
            kw["R_F_fixed"] = "grid"
        else:
            rates = _axis(axes, "R_F_fixed")
            if any(r <= 0 for r in rates):
                raise ConfigError("axes.R_F_fixed values must be positive")
            kw["R_F_fixed"] = rates

    schemes = doc.get("schemes", list(SCHEMES))
    if not isinstance(schemes, list) or not schemes:
        raise ConfigError("schemes must be a nonempty list")
    if any(s not in SCHEMES for s in schemes) or len(set(schemes)) != len(schemes):
        raise ConfigError(f"schemes must be distinct values from {SCHEMES}")
    kw["schemes"] = tuple(schemes)

    for key, lo in (("n_channels", 1), ("base_seed", 0), ("trials_mc", 0), ("chunk_channels", 1)):
        if key in doc:
            kw[key] = _number(doc[key], key, int)
            if kw[key] < lo:
                raise ConfigError(f"{key} must be >= {lo}")

    for key in ("B_F", "L_W"):
        if key in fh:
            kw[key] = _number(fh[key], f"base.fronthaul.{key}", int)
    if "T_max" in fh:
        kw["T_max"] = _number(fh["T_max"], "base.fronthaul.T_max")
    for key in _GEOMETRY_KEYS:
        if key in geo:
            kw[key] = _number(geo[key], f"base.geometry.{key}")
    if "N0" in base:
        kw["N0"] = _number(base["N0"], "base.N0")

    N_U = _number(sizes.get("N_U", 2), "base.sizes.N_U", int)
    n_R = _number(sizes.get("n_R", 2), "base.sizes.n_R", int)
    n_Uk = sizes.get("n_Uk", 1)
    if isinstance(n_Uk, list):
        n_Uk = tuple(_number(n, "base.sizes.n_Uk", int) for n in n_Uk)
        if len(n_Uk) != N_U:
            raise ConfigError("base.sizes.n_Uk must have N_U entries")
    else:
        n_Uk = (_number(n_Uk, "base.sizes.n_Uk", int),) * max(N_U, 1)
    if N_U < 1 or n_R < 1 or min(n_Uk) < 1:
        raise ConfigError("all sizes must be >= 1")
    kw.update(N_U=N_U, n_R=n_R, n_Uk=n_Uk)

    solver = _mapping(doc.get("solver"), "solver", {f.name for f in fields(opt.SolverConfig)})
    try:
        kw["solver"] = opt.SolverConfig(**{
            k: (v if isinstance(v, bool) else _number(v, f"solver.{k}", type(getattr(opt.DEFAULT_CONFIG, k))))
            for k, v in solver.items()})
    except TypeError as exc:
        raise ConfigError(f"solver: {exc}") from None

    spec = SweepSpec(**kw)
    try:
        for C_F in spec.C_F_bps:
            cfg = spec.fronthaul(0.0, C_F)
            if spec.R_F_fixed is None or spec.R_F_fixed == "grid":
                opt.check_deadline(cfg)
        spec.channel(0, spec.snr_db[0])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    return spec


def load_spec(path):
    """Read and validate a YAML sweep configuration.

    ``OSError`` propagates for unreadable files; malformed or invalid content
    raises ``ConfigError``.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return spec_from_dict(doc)


# ---------------------------------------------------------------------------
# running


def _units(spec):
    """Independent work units ``(snr index, C_F index, channel indices)``.

    The split depends only on the spec, so any worker count reproduces the
    serial output.
    """
    out = []
    for i_s in range(len(spec.snr_db)):
        for i_c in range(len(spec.C_F_bps)):
            for lo in range(0, spec.n_channels, spec.chunk_channels):
                out.append((i_s, i_c, tuple(range(lo, min(lo + spec.chunk_channels, spec.n_channels)))))
    return out


def _row(spec, scheme, sol, ch, cfg, i_e, i_s, i_c, k, i_r):
    pmf = np.zeros(3)
    pmf[:len(sol.pmf)] = sol.pmf
    row = SweepRow(scheme=scheme, eps_F=spec.eps_F[i_e], snr_db=spec.snr_db[i_s],
                   C_F_bps=spec.C_F_bps[i_c], channel_seed=spec.base_seed + k,
                   R_F=float(sol.R_F), expected_sum_rate=float(sol.expected_sum_rate),
                   rate_layer1=float(sol.rate_layer1), rate_layer2=float(sol.rate_layer2),
                   p_M0=float(pmf[0]), p_M1=float(pmf[1]), p_M2=float(pmf[2]),
                   iterations=int(sol.iterations), converged=bool(sol.converged),
                   diagnostics="; ".join(sol.diagnostics),
                   key=(spec.schemes.index(scheme), i_e, i_s, i_c, i_r, k))
    if spec.trials_mc > 0:
        seed = [spec.base_seed, k, spec.schemes.index(scheme), i_e, i_s, i_c, i_r]
        out = simulate_expected_rate(sol, ch, cfg, spec.trials_mc, seed=seed)
        row.mc_rate = out.empirical_expected_rate
        row.mc_stderr = out.std_error_rate
    return row


def run_unit(spec, unit):
    """Solve every scheme, ``eps_F`` and rate for one chunk of channels."""
    i_s, i_c, ks = unit
    C_F = spec.C_F_bps[i_c]
    chans = [spec.channel(k, spec.snr_db[i_s]) for k in ks]
    rates = spec.rates(C_F)
    cfgs = [spec.fronthaul(e, C_F) for e in spec.eps_F]
    # path diversity does not depend on the congestion level: solve once per rate
    pd_R = np.tile(rates, len(ks))
    pd_ch = [c for c in chans for _ in rates]
    corners = "mdc" in spec.schemes and spec.solver.corner_starts
    pd = pd2 = None
    if "pd" in spec.schemes or corners:
        pd = opt.pd_fixed_rf_batch(pd_R, pd_ch, cfgs[0], config=spec.solver)
    if corners:
        pd2 = opt.pd_fixed_rf_batch(2 * pd_R, pd_ch, cfgs[0], config=spec.solver)

    grids = {}
    if "pd" in spec.schemes:
        grids["pd"] = [[opt.rescore(s, cfg) for s in pd] for cfg in cfgs]
    if "mdc" in spec.schemes:
        R = np.tile(pd_R, len(cfgs))
        C = pd_ch * len(cfgs)
        F = [cfg for cfg in cfgs for _ in pd_R]
        tiled = lambda sols: None if sols is None else [s.Omega for s in sols] * len(cfgs)
        sols = opt.cccp_fixed_rf_batch(R, C, F, config=spec.solver, pd_init=tiled(pd),
                                       pd_double=tiled(pd2))
        n = len(pd_R)
        grids["mdc"] = [sols[i * n:(i + 1) * n] for i in range(len(cfgs))]

    rows = []
    nr = len(rates)
    for scheme in spec.schemes:
        for i_e, cfg in enumerate(cfgs):
            flat = grids[scheme][i_e]
            for j, k in enumerate(ks):
                sols = flat[j * nr:(j + 1) * nr]
                if spec.fixed_rate:
                    for i_r, sol in enumerate(sols):
                        rows.append(_row(spec, scheme, sol, chans[j], cfg, i_e, i_s, i_c, k, i_r))
                else:
                    fallback = opt.zero_solution(chans[j], scheme)
                    best = opt.best_of(sols, fallback)
                    rows.append(_row(spec, scheme, best, chans[j], cfg, i_e, i_s, i_c, k, 0))
    return rows


def _run_unit_args(args):
    return run_unit(*args)


def run_sweep(spec, jobs=1):
    """Run every work unit (optionally on ``jobs`` processes) and return sorted rows."""
    units = _units(spec)
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_unit_args, [(spec, u) for u in units]))
    else:
        parts = [run_unit(spec, u) for u in units]
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: r.key)
    return rows


def expected_row_count(spec):
    n = 0
    for C_F in spec.C_F_bps:
        per = len(spec.rates(C_F)) if spec.fixed_rate else 1
        n += per
    return len(spec.schemes) * len(spec.eps_F) * len(spec.snr_db) * n * spec.n_channels


# ---------------------------------------------------------------------------
# CSV


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def emit_csv(rows, path):
    """Write ``rows`` with the fixed column order (UTF-8, LF line endings)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])


_TYPES = {f.name: f.type for f in fields(SweepRow)}


def _parse(name, text):
    kind = _TYPES[name]
    if kind is float:
        return float(text)
    if kind is int:
        return int(text)
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "true"
    return text


def read_csv(path):
    """Parse a sweep CSV back into ``SweepRow`` records."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected header")
        return [SweepRow(**{c: _parse(c, v) for c, v in zip(COLUMNS, rec)}) for rec in reader]


SUMMARY_COLUMNS = ("scheme", "eps_F", "snr_db", "C_F_bps", "R_F_fixed", "n_channels",
                   "mean_expected_sum_rate", "stderr_expected_sum_rate", "mean_R_F",
                   "mean_rate_layer1", "mean_rate_layer2", "mean_mc_rate", "converged_fraction")


def summarize(rows):
    """Average rows over channel seeds for each axis point.

    ``R_F`` is treated as an axis when a channel seed occurs more than once
    for the same scheme and axis point (fixed-rate sweeps).  Returns a list
    of dicts keyed by ``SUMMARY_COLUMNS`` in first-appearance order.
    """
    groups = {}
    for r in rows:
        groups.setdefault((r.scheme, r.eps_F, r.snr_db, r.C_F_bps), []).append(r)
    out = []
    for (scheme, eps, snr, cf), rs in groups.items():
        seeds = [r.channel_seed for r in rs]
        fixed = len(set(seeds)) < len(seeds)
        sub = {}
        for r in rs:
            sub.setdefault(r.R_F if fixed else math.nan, []).append(r)
        for rf, part in sub.items():
            x = np.array([r.expected_sum_rate for r in part])
            mc = np.array([r.mc_rate for r in part])
            out.append({
                "scheme": scheme, "eps_F": eps, "snr_db": snr, "C_F_bps": cf,
                "R_F_fixed": rf, "n_channels": len(part),
                "mean_expected_sum_rate": float(x.mean()),
                "stderr_expected_sum_rate": float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0,
                "mean_R_F": float(np.mean([r.R_F for r in part])),
                "mean_rate_layer1": float(np.mean([r.rate_layer1 for r in part])),
                "mean_rate_layer2": float(np.mean([r.rate_layer2 for r in part])),
                "mean_mc_rate": float(mc.mean()) if not np.isnan(mc).all() else math.nan,
                "converged_fraction": float(np.mean([r.converged for r in part])),
            })
    return out


def emit_summary(summary, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for rec in summary:
            w.writerow([_fmt(rec[c]) for c in SUMMARY_COLUMNS])
