"""Command-line entry point.

Every subcommand writes ``<out>/<name>.json`` holding the run configuration,
an input digest and the result; CSV and ELF3 outputs sit next to it.

Exit codes: 0 when every check holds, 1 when a violation is found, 2 for
usage or configuration errors and 3 when a checker refuses its input.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import presets as _presets
from .errors import (
    BoundaryContaminationError,
    ConfigurationError,
    DomainError,
    FormatError,
    InstabilityError,
    PreconditionError,
)
from .ericksen import EnergyLedger, counterexample_state, evolve, trivial_state, ns_special_case
from .fieldio import read_field, write_field
from .grid import Grid3, ScalarField, TensorField, VectorField, fft, jacobian
from .morrey import (
    REGION_NONPOSITIVE,
    REGION_POSITIVE,
    annulus_profile,
    classify,
    eta_region_map,
    geometric_ladder,
    homogeneous_morrey_norm,
    local_morrey_norm,
    threshold_gamma,
    weighted_lebesgue_norm,
    write_eta_csv,
    write_profile_csv,
)
from .report import RunConfig, digest, file_digest, ladder_base, read_report, write_report
from .spectral import plan_for, poisson_pressure, pressure_q
from .verify import (
    INEQUALITY_TOL,
    LIOUVILLE_TOL,
    RESIDUAL_TOL,
    LocalEnergyProbe,
    SupNormProbe,
    caccioppoli_check,
    embedding_suite,
    global_energy_check,
    improved_sobolev_check,
    liouville_check,
    local_energy_report,
    riesz_battery,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3

CHECKS = ("energy", "local-energy", "caccioppoli", "embedding", "liouville", "sobolev")
STATES = ("trivial", "appendix-a")
NS_ENERGY_TOL = 1e-3
COUPLED_ENERGY_TOL = 5e-3
THRESHOLD_POINTS = 50
THRESHOLD_OFFSET = Fraction(1, 10**6)
SAMPLED_RESIDUAL_TOL = 1e-8
EMBEDDING_BOX = 10.0


class UsageError(ConfigurationError):
    """Malformed command line."""


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Argument handling


def _common(p):
    p.add_argument("--n", type=int)
    p.add_argument("--box", type=float, help="box half-width L")
    p.add_argument("--gamma", help="Morrey weight exponent (a:b:step range for eta-map)")
    p.add_argument("--p", help="integrability exponent (a:b:step range for eta-map)")
    p.add_argument("--radii", help="comma-separated radius ladder")
    p.add_argument("--ladder", help="geometric:BASE radius ladder")
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--dump-spectra", action="store_true", default=None)


def build_parser():
    parser = _Parser(prog="elmorrey", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("eta-map", help="sign map of eta(gamma, p)")
    _common(p)
    p.add_argument("--threshold", type=int, help="points sampled on the sign boundary")

    for name in ("norm", "profile"):
        p = sub.add_parser(name, help=f"Morrey {name} of an ELF3 field")
        _common(p)
        p.add_argument("input", nargs="?")
        p.add_argument("--input", dest="input_flag")
        if name == "norm":
            p.add_argument("--space", choices=("local", "weighted", "homogeneous"))
            p.add_argument("--r", type=float, help="Lebesgue exponent of the homogeneous space")

    p = sub.add_parser("riesz-test", help="Riesz calculus and pressure battery")
    _common(p)
    p.add_argument("--seeds", type=int)

    p = sub.add_parser("pressure", help="reconstruct q from u and v")
    _common(p)
    p.add_argument("--input", dest="input_flag", help="velocity ELF3 file")
    p.add_argument("--director", help="director ELF3 file (default: constant)")
    p.add_argument("--preset")

    p = sub.add_parser("counterexample", help="explicit stationary counterexample")
    _common(p)
    p.add_argument("--report", choices=("liouville",))

    p = sub.add_parser("solve", help="run the time-dependent system from a preset")
    _common(p)
    p.add_argument("--preset", required=False)
    p.add_argument("--snapshot-every", type=int)

    p = sub.add_parser("check", help="checker batteries")
    _common(p)
    p.add_argument("kind", choices=CHECKS)
    p.add_argument("--state", choices=STATES)
    p.add_argument("--R", type=float)
    p.add_argument("--input", dest="input_flag")
    p.add_argument("--preset")
    p.add_argument("--windows", help="t0:t1 pairs, comma-separated")

    p = sub.add_parser("gen", help="write a preset's fields as ELF3")
    _common(p)
    p.add_argument("preset", choices=_presets.PRESETS)
    return parser


def _split_tolerances(argv):
    """Pull ``--tol.NAME VALUE`` and ``--tol.NAME=VALUE`` out of ``argv``."""
    rest, tols = [], {}
    i = 0
    while i < len(argv):
        a = argv[i]
        if a.startswith("--tol."):
            key, eq, val = a[len("--tol."):].partition("=")
            if not eq:
                if i + 1 >= len(argv):
                    raise UsageError(f"{a} needs a value")
                val = argv[i + 1]
                i += 1
            tols[key] = _float(val, a)
        else:
            rest.append(a)
        i += 1
    return rest, tols


def _float(text, what):
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"{what} expects a number, got {text!r}") from None


def read_config_file(path):
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from None
    for ln, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise ConfigurationError(f"{path}:{ln}: expected key=value")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


_CONFIG_TYPES = {
    "n": int, "box": float, "gamma": str, "p": str, "radii": str, "ladder": str,
    "dt": float, "T": float, "out": str, "preset": str, "state": str, "R": float,
    "space": str, "r": float, "report": str, "seeds": int, "threshold": int,
    "windows": str, "snapshot_every": int, "director": str, "input_flag": str,
    "dump_spectra": lambda s: s.lower() in ("1", "true", "yes"),
}


def parse_args(argv):
    """Parse ``argv`` into the namespace and a validated :class:`RunConfig`."""
    rest, tols = _split_tolerances(list(argv))
    ns = build_parser().parse_args(rest)
    if ns.config:
        for key, val in read_config_file(ns.config).items():
            if key.startswith("tol."):
                tols.setdefault(key[4:], _float(val, key))
                continue
            if key == "input":
                key = "input_flag"
            if key not in _CONFIG_TYPES:
                raise ConfigurationError(f"unknown config key {key!r}")
            if getattr(ns, key, None) is None:
                try:
                    setattr(ns, key, _CONFIG_TYPES[key](val))
                except ValueError:
                    raise ConfigurationError(f"bad value for config key {key!r}: {val!r}") from None
    radii = None
    if ns.radii:
        radii = tuple(_float(r, "--radii") for r in ns.radii.split(",") if r.strip())
    target = getattr(ns, "kind", None) or getattr(ns, "preset", None)
    options = {}
    for key in ("space", "r", "report", "state", "R", "seeds", "threshold", "windows",
                "snapshot_every", "director", "preset", "dump_spectra"):
        v = getattr(ns, key, None)
        if v is not None:
            options[key] = v
    inp = getattr(ns, "input", None) or getattr(ns, "input_flag", None)
    if inp is not None:
        options["input"] = str(inp)
    cfg = RunConfig(
        subcommand=ns.subcommand,
        target=target,
        n=ns.n,
        box=ns.box,
        gamma=ns.gamma,
        p=ns.p,
        radii=radii,
        ladder=ns.ladder,
        dt=ns.dt,
        T=ns.T,
        out=ns.out or ".",
        tolerances=tols,
        options=options,
    )
    return ns, cfg


# ---------------------------------------------------------------------------
# Shared helpers


def _radii_for(cfg, grid, top=None):
    if cfg.radii is not None:
        return np.asarray(cfg.radii)
    kw = {} if top is None else {"top": top}
    if cfg.ladder is not None:
        return geometric_ladder(grid.box_half, base=ladder_base(cfg.ladder), **kw)
    return geometric_ladder(grid.box_half, **kw)


def _load(cfg):
    path = cfg.options.get("input")
    if path is None:
        raise UsageError(f"{cfg.subcommand} needs an input ELF3 file")
    if not Path(path).is_file():
        raise ConfigurationError(f"input file {path} does not exist")
    return read_field(path), file_digest(path)


def _out(cfg, name):
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def parse_range(text, what):
    """``a:b:step`` (inclusive) or a single value, as exact fractions."""
    parts = text.split(":")
    try:
        vals = [Fraction(x.strip()) for x in parts]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad {what} range {text!r}") from None
    if len(parts) == 1:
        return vals
    if len(parts) != 3:
        raise UsageError(f"{what} range must be a:b:step, got {text!r}")
    a, b, step = vals
    if step <= 0:
        raise UsageError(f"{what} range step must be positive")
    if b < a:
        raise UsageError(f"{what} range {text!r} is empty")
    count = int((b - a) / step) + 1
    return [a + k * step for k in range(count)]


# ---------------------------------------------------------------------------
# Subcommands; each returns (report name, input digest, body, holds)


def cmd_eta_map(cfg):
    gammas = parse_range(cfg.gamma or "1/10:29/10:1/10", "--gamma")
    ps = parse_range(cfg.p or "3:10:1/2", "--p")
    points = eta_region_map(gammas, ps)
    csv_path = write_eta_csv(points, _out(cfg, "eta_map.csv"))
    anchor = [pt for pt in points if pt.gamma == 1.0 and pt.p == 3.0]
    n_thr = int(cfg.options.get("threshold", THRESHOLD_POINTS))
    if n_thr < 0:
        raise UsageError("--threshold must be non-negative")
    # Sample p in [3, 9/2), where the boundary gamma = 3 - 2p/3 lies in (0, 3].
    boundary = []
    for k in range(n_thr):
        p = 3 + Fraction(3, 2) * Fraction(k, max(n_thr, 1))
        g = threshold_gamma(p)
        on = classify(g, p) if g < 3 else None
        below = classify(g - THRESHOLD_OFFSET, p)
        above = classify(g + THRESHOLD_OFFSET, p)
        ok = below.region == REGION_NONPOSITIVE and above.region == REGION_POSITIVE
        if on is not None:
            ok = ok and on.eta == 0.0 and on.region == REGION_NONPOSITIVE
        boundary.append({"p": float(p), "gamma": float(g), "boundary": bool(ok)})
    anchor_ok = all(pt.eta == 0.0 and pt.region == REGION_NONPOSITIVE for pt in anchor)
    holds = anchor_ok and all(b["boundary"] for b in boundary)
    body = {
        "csv": csv_path.name,
        "rows": len(points),
        "counts": {r: sum(pt.region == r for pt in points) for r in sorted({pt.region for pt in points})},
        "anchor_eta_1_3": anchor[0].eta if anchor else None,
        "anchor_region": anchor[0].region if anchor else None,
        "threshold_points": len(boundary),
        "threshold_all_boundary": all(b["boundary"] for b in boundary),
        "threshold": boundary,
    }
    return "eta_map", digest(cfg.gamma or "", cfg.p or ""), body, holds


def cmd_norm(cfg):
    f, dig = _load(cfg)
    params = cfg.morrey_params()
    space = cfg.options.get("space", "local")
    radii = _radii_for(cfg, f.grid)
    body = {"space": space, "p": params.p, "gamma": params.gamma}
    if space == "weighted":
        value = weighted_lebesgue_norm(f, params.p, params.gamma)
    elif space == "homogeneous":
        r = float(cfg.options.get("r", 4.5))
        hn = homogeneous_morrey_norm(f, params.p, r, radii)
        value = hn.value
        body.update(r=r, center=hn.center, radius=hn.radius, boundary_contaminated=hn.boundary_contaminated)
    else:
        mn = local_morrey_norm(f, params, radii)
        value = mn.value
        prof = annulus_profile(f, params, radii)
        body.update(
            radii=mn.radii, table=mn.table, sharp_table=mn.sharp_table, argmax_radius=mn.argmax_radius,
            edge_flag=mn.edge_flag, boundary_contaminated=mn.boundary_contaminated,
            decay={"a_decaying": prof.decaying, "scaled_decaying": prof.scaled_decaying},
        )
    body["norm"] = value
    return "norm", dig, body, math.isfinite(value)


def cmd_profile(cfg):
    f, dig = _load(cfg)
    params = cfg.morrey_params()
    prof = annulus_profile(f, params, _radii_for(cfg, f.grid), shell_energy=True)
    csv_path = write_profile_csv(prof, _out(cfg, "annulus_profile.csv"))
    body = {
        "csv": csv_path.name,
        "radii": prof.radii,
        "a": prof.values,
        "scaled": prof.scaled_values,
        "decaying": prof.decaying,
        "scaled_decaying": prof.scaled_decaying,
        "shell_energy_sup": prof.shell_energy_sup,
        "boundary_contaminated": prof.boundary_contaminated,
    }
    return "profile", dig, body, True


def cmd_riesz_test(cfg):
    grid = Grid3(cfg.n or 64, cfg.box or math.pi)
    seeds = range(int(cfg.options.get("seeds", 10)))
    tol = {k: cfg.tolerances[k] for k in ("riesz", "riesz_identity", "poisson") if k in cfg.tolerances}
    rep = riesz_battery(grid, seeds, tol)
    return "riesz_test", digest(grid.n, grid.box_half, list(seeds)), rep, rep.holds


def cmd_pressure(cfg):
    name = cfg.options.get("preset")
    if name is not None:
        pre = _presets.preset(name, n=cfg.n, box=cfg.box)
        if pre.stationary:
            raise UsageError("the pressure subcommand needs an evolution preset")
        st = pre.state()
        u, v = st.u, st.v
        dig = digest(u, v)
    else:
        u, dig = _load(cfg)
        if not isinstance(u, VectorField):
            raise ConfigurationError("velocity input must be a vector field")
        dpath = cfg.options.get("director")
        if dpath:
            v = read_field(dpath)
            dig = digest(dig, file_digest(dpath))
        else:
            v = VectorField.from_components(u.grid, (0.0, 0.0, 1.0))
    plan = plan_for(u.grid)
    gv = jacobian(v) if not ns_special_case(v) else TensorField(u.grid, np.zeros((3, 3) + u.grid.shape))
    res = pressure_q(u, gv, plan=plan)
    write_field(_out(cfg, "q.elf3"), res.q)
    body = {"poisson_residual": res.poisson_residual, "rhs_scale": res.rhs_scale,
            "max_q": float(np.abs(res.q.data).max())}
    if ns_special_case(v):
        body["ns_route_difference"] = float(np.abs(poisson_pressure(u, plan=plan).data - res.q.data).max())
    holds = res.poisson_residual <= cfg.tol("poisson", SAMPLED_RESIDUAL_TOL)
    return "pressure", dig, body, holds


def cmd_counterexample(cfg):
    n = cfg.n or 64
    L = cfg.box or 4.5
    grid = Grid3(n, L)
    ce = counterexample_state(grid)
    closed = ce.closed_form_residual()
    ladder = []
    for m in (n // 2, n):
        g = Grid3(m, L)
        c = counterexample_state(g)
        ladder.append({"n": m, "h": g.h, "window": c.state.window, "branches": c.branch_residuals("fd4"),
                       "max": c.max_branch_residual("fd4")})
    decreasing = ladder[1]["max"] < ladder[0]["max"] or ladder[1]["max"] == 0.0
    ratio = ladder[0]["max"] / ladder[1]["max"] if ladder[1]["max"] > 0 else math.inf
    tol = cfg.tol("residual", SAMPLED_RESIDUAL_TOL)
    # fd4 differentiates these polynomial fields exactly, so the ladder mostly
    # measures round-off; convergence is reported but does not gate the exit code.
    body = {
        "closed_form": {"momentum": closed.max_momentum, "director": closed.max_director,
                        "divergence": closed.max_div},
        "sampled_fd4": ladder,
        "refinement_ratio": ratio,
        "converging": bool(decreasing),
        "tol": tol,
    }
    holds = closed.max_total == 0.0 and ladder[1]["max"] <= tol
    if cfg.options.get("report") == "liouville":
        verdict = liouville_check(ce.state, cfg.morrey_params(), _radii_for(cfg, grid),
                                  tol=cfg.tol("liouville", LIOUVILLE_TOL))
        body["liouville"] = verdict
        holds = holds and verdict.holds
    return "counterexample", digest(ce.state.u, ce.state.p, ce.state.v), body, holds


def _spectra(grid, fields):
    """Shell sums of the Fourier power per integer wavenumber shell."""
    k, _, k2 = grid.wavenumbers
    shell = np.rint(np.sqrt(k2) * grid.box_half / math.pi).astype(np.int64)
    w = np.full(grid.n // 2 + 1, 2.0)
    w[0] = w[-1] = 1.0
    out = {}
    for name, data in fields.items():
        spec = fft(data)
        power = (np.abs(spec) ** 2 * w).sum(axis=0) if spec.ndim == 4 else np.abs(spec) ** 2 * w
        out[name] = np.bincount(shell.ravel(), weights=power.ravel()) / grid.n**6
    return out


def cmd_solve(cfg):
    name = cfg.options.get("preset")
    if name is None:
        raise UsageError("solve needs --preset")
    pre = _presets.preset(name, n=cfg.n, box=cfg.box, dt=cfg.dt, T=cfg.T)
    if pre.stationary:
        raise UsageError(f"{name} is a stationary state; use the counterexample subcommand")
    st = pre.state()
    grid = pre.grid
    radii = cfg.radii or default_probe_radii(grid)
    probe = LocalEnergyProbe(radii)
    sup = SupNormProbe()
    steps = pre.solver.steps_for(pre.solver.dt)
    every = int(cfg.options.get("snapshot_every", max(steps // 5, 1)))
    solver = dataclasses.replace(pre.solver, snapshot_every=every)
    try:
        res = evolve(st, solver, probes=[probe, sup])
    except InstabilityError as exc:
        return "solve", digest(st.u, st.v), {"error": str(exc)}, False
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    res.ledger.write_csv(out / "ledger.csv")
    probe.write_csv(out / "local_energy.csv")
    snaps = []
    for i, s in enumerate(res.snapshots):
        for label, f in (("u", s.u), ("v", s.v)):
            fname = f"snap_{i:04d}_{label}.elf3"
            write_field(out / fname, f)
        snaps.append({"index": i, "t": s.t})
    body = {
        "preset": name,
        "ns_only": res.ns_only,
        "dt": res.dt,
        "steps": res.steps,
        "e0": res.ledger.e0,
        "max_defect": res.ledger.max_defect(),
        "max_abs_balance": float(np.abs(res.ledger.balance).max()),
        "max_sup_u_plus_grad_v": sup.max_value,
        "max_divergence": res.max_divergence,
        "max_unit_defect": res.max_unit_defect,
        "cfl_warnings": res.cfl_warnings,
        "probe_radii": list(radii),
        "snapshots": snaps,
    }
    if cfg.options.get("dump_spectra"):
        sp = _spectra(grid, {"u": res.final.u.data, "v": res.final.v.data})
        with (out / "spectra.csv").open("w") as fh:
            fh.write("k,E_u,E_v\n")
            m = max(len(a) for a in sp.values())
            for i in range(m):
                fh.write(f"{i},{sp['u'][i] if i < len(sp['u']) else 0.0!r},{sp['v'][i] if i < len(sp['v']) else 0.0!r}\n")
        body["spectra"] = "spectra.csv"
    return "solve", digest(st.u, st.v, dataclasses.asdict(solver)), body, True


def default_probe_radii(grid):
    return (round(0.45 * grid.box_half, 12), round(0.8 * grid.box_half, 12))


def _solve_outputs(cfg):
    out = Path(cfg.out)
    ledger_path = out / "ledger.csv"
    if not ledger_path.is_file():
        raise ConfigurationError(f"no ledger.csv in {out}; run solve first")
    meta = read_report(out / "solve.json") if (out / "solve.json").is_file() else None
    return out, ledger_path, meta


def _parse_windows(text):
    out = []
    for part in text.split(","):
        a, sep, b = part.partition(":")
        if not sep:
            raise UsageError(f"window {part!r} must be t0:t1")
        out.append((_float(a, "--windows"), _float(b, "--windows")))
    return out


def default_windows(T, dt=0.0):
    """Three windows inside ``[0, T - 4 dt]``, the span a cutoff of width ``4 dt`` can use."""
    S = T - 4.0 * dt
    if not S > 0:
        raise ConfigurationError(f"run too short for local energy windows (T = {T}, dt = {dt})")
    return [(0.1 * S, 0.3 * S), (0.4 * S, 0.6 * S), (0.1 * S, 0.9 * S)]


def _check_energy(cfg):
    out, ledger_path, meta = _solve_outputs(cfg)
    ledger = EnergyLedger.read_csv(ledger_path)
    ns_only = bool(meta["result"]["ns_only"]) if meta else True
    tol = cfg.tol("energy", NS_ENERGY_TOL if ns_only else COUPLED_ENERGY_TOL)
    rep = global_energy_check(ledger, tol)
    body = {"e0": rep.e0, "max_defect": rep.max_defect, "relative_defect": rep.max_defect / rep.e0 if rep.e0 else 0.0,
            "max_abs_balance": rep.max_abs_balance, "tol": tol, "ns_only": ns_only}
    return "check_energy", file_digest(ledger_path), body, rep.holds


def _check_local_energy(cfg):
    out, _, meta = _solve_outputs(cfg)
    path = out / "local_energy.csv"
    if not path.is_file():
        raise ConfigurationError(f"no local_energy.csv in {out}; run solve first")
    probe = LocalEnergyProbe.read_csv(path)
    T = float(probe.times[-1])
    times = np.asarray(probe.times)
    dt = float(np.median(np.diff(times))) if times.size > 1 else T
    windows = _parse_windows(cfg.options["windows"]) if "windows" in cfg.options else default_windows(T, dt)
    rep = local_energy_report(probe, windows, tol=cfg.tol("local", INEQUALITY_TOL))
    body = {"windows": [{"t0": d.t0, "t1": d.t1, "R": d.R, "eps": d.eps, "mu": d.mu, "relative": d.relative}
                        for d in rep.windows],
            "max_relative": rep.max_relative, "tol": rep.tol}
    return "check_local_energy", file_digest(path), body, rep.holds


def _stationary(cfg, default_state="trivial"):
    name = cfg.options.get("state", default_state)
    if name == "appendix-a":
        grid = Grid3(cfg.n or 64, cfg.box or 4.5)
        return counterexample_state(grid).state
    grid = Grid3(cfg.n or 32, cfg.box or 4.5)
    return trivial_state(grid)


def _check_caccioppoli(cfg):
    s = _stationary(cfg)
    R = float(cfg.options.get("R", 2.0))
    rep = caccioppoli_check(s, R, cfg.morrey_params(), tol=cfg.tol("inequality", INEQUALITY_TOL),
                            residual_tol=cfg.tol("residual", RESIDUAL_TOL))
    return "check_caccioppoli", digest(s.u, s.p, s.v), rep, rep.holds


def _check_embedding(cfg):
    grid = Grid3(cfg.n or 64, cfg.box or EMBEDDING_BOX)
    rep = embedding_suite(grid, params=cfg.morrey_params())
    return "check_embedding", digest(grid.n, grid.box_half), rep, rep.holds


def _check_liouville(cfg):
    s = _stationary(cfg, "appendix-a")
    rep = liouville_check(s, cfg.morrey_params(), _radii_for(cfg, s.grid),
                          tol=cfg.tol("liouville", LIOUVILLE_TOL),
                          residual_tol=cfg.tol("residual", RESIDUAL_TOL))
    return "check_liouville", digest(s.u, s.p, s.v), rep, rep.holds


def _check_sobolev(cfg):
    name = cfg.options.get("preset")
    if name is not None:
        pre = _presets.preset(name, n=cfg.n, box=cfg.box)
        u = pre.state().u
        dig = digest(u)
    else:
        u, dig = _load(cfg)
    rep = improved_sobolev_check(u, strict=True)
    holds = not rep.degenerate and math.isfinite(rep.ratio) and not rep.wraparound
    return "check_sobolev", dig, rep, holds


_CHECKERS = {
    "energy": _check_energy,
    "local-energy": _check_local_energy,
    "caccioppoli": _check_caccioppoli,
    "embedding": _check_embedding,
    "liouville": _check_liouville,
    "sobolev": _check_sobolev,
}


def cmd_check(cfg):
    return _CHECKERS[cfg.target](cfg)


def cmd_gen(cfg):
    pre = _presets.preset(cfg.target, n=cfg.n, box=cfg.box)
    st = pre.state()
    files = {"u": st.u, "v": st.v}
    if pre.stationary:
        files["p"] = st.p
    written = []
    for label, f in files.items():
        write_field(_out(cfg, f"{cfg.target}_{label}.elf3"), f)
        written.append(f"{cfg.target}_{label}.elf3")
    body = {"preset": cfg.target, "n": pre.grid.n, "box": pre.grid.box_half, "files": written,
            "description": pre.description}
    return "gen", digest(*files.values()), body, True


COMMANDS = {
    "eta-map": cmd_eta_map,
    "norm": cmd_norm,
    "profile": cmd_profile,
    "riesz-test": cmd_riesz_test,
    "pressure": cmd_pressure,
    "counterexample": cmd_counterexample,
    "solve": cmd_solve,
    "check": cmd_check,
    "gen": cmd_gen,
}


def run(argv):
    """Run one invocation; returns ``(exit code, report path or None)``."""
    _, cfg = parse_args(argv)
    name, dig, body, holds = COMMANDS[cfg.subcommand](cfg)
    path = write_report(_out(cfg, f"{name}.json"), cfg, dig, body, holds)
    return (EXIT_OK if holds else EXIT_VIOLATION), path


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        code, path = run(argv)
    except (ConfigurationError, DomainError, FormatError) as exc:
        print(f"elmorrey: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PreconditionError, BoundaryContaminationError) as exc:
        print(f"elmorrey: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    print(f"{path}: {'holds' if code == EXIT_OK else 'VIOLATION'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
