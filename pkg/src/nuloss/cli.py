"""Config-driven command line driver.

One JSON config describes the experiment; any leaf can be overridden with a
dotted flag, e.g. ``--zones.P=12``.  Commands emit CSV (RFC-4180, '.'
decimal, 17 significant digits) or JSON (UTF-8, stable key order); every
file carries the artifact version and the config hash, so identical configs
produce byte-identical outputs.

Exit codes: 0 success, 1 config/parse error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, coeffs, counterexample as cx, energy, exprlang, modesolve, spectral, zones


class ConfigError(ValueError):
    pass


# --- configuration -----------------------------------------------------------


@dataclass
class DomainConfig:
    length: float = 2.0 * math.pi
    potential: str = "1"
    boundary: str = "periodic"


@dataclass
class CoefficientConfig:
    b: str = "2+sin(log(1/t))"
    nu: object = None  # catalog tag dict or expression string
    T: float = 0.6


@dataclass
class ZonesConfig:
    M: float = 16.0
    P: int = 10


@dataclass
class SolverConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12


@dataclass
class CounterexampleConfig:
    epsilon: float = 0.05
    p: int = 8
    k_max: int = 8
    psi_r: float = 2.0
    a0: int = 1
    c1: object = None  # None -> fitted from the estimate sweep


@dataclass
class OutputConfig:
    dir: str = "out"
    format: str = "csv"


@dataclass
class RunConfig:
    domain: DomainConfig
    coefficient: CoefficientConfig
    zones: ZonesConfig
    solver: SolverConfig
    counterexample: CounterexampleConfig
    output: OutputConfig

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "domain": DomainConfig,
    "coefficient": CoefficientConfig,
    "zones": ZonesConfig,
    "solver": SolverConfig,
    "counterexample": CounterexampleConfig,
    "output": OutputConfig,
}


def load_config(path: str) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"config section {name!r} must be an object")
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(section) - fields
        if unknown:
            raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
        kwargs[name] = cls(**section)
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return RunConfig(**kwargs)


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Dotted-path assignments like --zones.P=12 (leading dashes stripped)."""
    for item in overrides:
        body = item.lstrip("-")
        if "=" not in body:
            raise ConfigError(f"override {item!r} must look like --section.key=value")
        path, value = body.split("=", 1)
        parts = path.split(".")
        if len(parts) != 2 or parts[0] not in _SECTIONS:
            raise ConfigError(f"unknown override target {path!r}")
        section = getattr(cfg, parts[0])
        if not hasattr(section, parts[1]):
            raise ConfigError(f"unknown override key {path!r}")
        current = getattr(section, parts[1])
        parsed: object
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        if isinstance(current, str):
            parsed = value  # expression strings stay verbatim
        elif isinstance(current, bool):
            parsed = bool(parsed)
        elif isinstance(current, int) and not isinstance(parsed, dict):
            parsed = int(parsed)
        elif isinstance(current, float) and not isinstance(parsed, dict):
            parsed = float(parsed)
        setattr(section, parts[1], parsed)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.domain.length <= 0:
        raise ConfigError("domain.length must be positive")
    if cfg.domain.boundary not in ("dirichlet", "periodic"):
        raise ConfigError("domain.boundary must be dirichlet or periodic")
    if cfg.coefficient.T <= 0:
        raise ConfigError("coefficient.T must be positive")
    if cfg.solver.rel_tol <= 0 or cfg.solver.abs_tol <= 0:
        raise ConfigError("solver tolerances must be positive")
    if cfg.zones.M <= 0:
        raise ConfigError("zones.M must be positive")
    if cfg.zones.P < 0 or int(cfg.zones.P) != cfg.zones.P:
        raise ConfigError("zones.P must be a nonnegative integer")
    if cfg.output.format not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    try:
        exprlang.parse(cfg.domain.potential)
        exprlang.parse(cfg.coefficient.b)
    except exprlang.ExprError:
        raise
    ce = cfg.counterexample
    if ce.epsilon <= 0 or ce.p < 2 or ce.k_max < 1 or not (0 < ce.psi_r < math.pi):
        raise ConfigError("counterexample block out of range")


def config_hash(cfg: RunConfig) -> str:
    canon = json.dumps(cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


# --- emission -------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, columns: list[str], rows: list, version: str, digest: str):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# nuloss {version} config={digest}\r\n")
        w = csv.writer(f, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_json(path: Path, payload: dict, version: str, digest: str):
    doc = {"artifact_version": version, "config_hash": digest, **payload}
    with open(path, "w", encoding="utf-8", newline="") as f:
        json.dump(doc, f, sort_keys=True, indent=2, default=float)
        f.write("\n")


# --- shared builders ----------------------------------------------------------------


def build_operator(cfg: RunConfig) -> spectral.MagneticOperator1D:
    return spectral.make_operator(cfg.domain.length, cfg.domain.potential,
                                  cfg.domain.boundary)


def build_nu(cfg: RunConfig) -> coeffs.NuFunction:
    tag = cfg.coefficient.nu if cfg.coefficient.nu is not None else {"kind": "log"}
    return coeffs.nu_from_tag(tag, cfg.coefficient.T)


def build_profile(cfg: RunConfig) -> coeffs.CoefficientProfile:
    return coeffs.profile_from_expr(cfg.coefficient.b, build_nu(cfg))


def zone_params(cfg: RunConfig) -> zones.ZoneParams:
    return zones.ZoneParams(M=cfg.zones.M, P=int(cfg.zones.P))


# --- commands -------------------------------------------------------------------------


def cmd_eigen(cfg: RunConfig, args, outdir: Path, digest: str) -> int:
    op = build_operator(cfg)
    modes = spectral.eigen_modes(op, args.count)
    rows = [(m.eigenvalue, m.lam, m.index, m.kind) for m in modes]
    write_csv(outdir / "eigen.csv", ["eigenvalue", "lambda", "index", "kind"],
              rows, __version__, digest)
    print(f"wrote {outdir / 'eigen.csv'} ({len(rows)} modes)")
    if args.project:
        f_expr = exprlang.parse(args.project)
        f_fn = exprlang.compile_np(f_expr, "x")
        grid = spectral.transform_grid(op, modes[-1].lam)
        coeffs_tab = spectral.forward_transform(f_fn(grid.nodes), modes, op, grid)
        write_csv(outdir / "coefficients.csv", ["lambda", "re", "im"],
                  [(lam, c.real, c.imag)
                   for lam, c in zip(coeffs_tab.lams, coeffs_tab.values)],
                  __version__, digest)
        print(f"wrote {outdir / 'coefficients.csv'}")
    return 0


def cmd_zones(cfg: RunConfig, args, outdir: Path, digest: str) -> int:
    profile = build_profile(cfg)
    zp = zone_params(cfg)
    op = build_operator(cfg)
    if zp.M < op.lambda1:
        raise ConfigError(
            f"zones.M={zp.M} below the smallest mode frequency {op.lambda1}")
    t_grid = profile.T * 2.0 ** (-np.arange(0, args.nt) / 4.0)
    lam_grid = np.geomspace(op.lambda1, args.lam_max, args.nlam)
    triples = zones.zone_map(profile, zp, np.sort(t_grid), lam_grid)
    write_csv(outdir / "zones.csv", ["t", "lambda", "zone"], triples,
              __version__, digest)
    print(f"wrote {outdir / 'zones.csv'} ({len(triples)} points)")
    return 0


def cmd_solve(cfg: RunConfig, args, outdir: Path, digest: str) -> int:
    profile = build_profile(cfg)
    lam = args.lam
    t0 = args.t0 if args.t0 is not None else 1e-10 / lam
    t1 = args.t1 if args.t1 is not None else profile.T
    init = (args.u0 / lam, args.u1)
    traj = modesolve.integrate_mode(profile, lam, t0, t1, init,
                                    rtol=cfg.solver.rel_tol, atol=cfg.solver.abs_tol)
    rows = [(t, u.real, u.imag, ut.real, ut.imag)
            for t, u, ut in zip(traj.ts, traj.us, traj.uts)]
    write_csv(outdir / "trajectory.csv", ["t", "re_u", "im_u", "re_ut", "im_ut"],
              rows, __version__, digest)
    print(f"wrote {outdir / 'trajectory.csv'} ({len(rows)} steps)")
    if args.norms and lam > cfg.zones.M:
        zp = zone_params(cfg)
        tl = coeffs.t_lambda(profile.nu, lam, zp.P)
        res = modesolve.wkb_propagate(profile, lam, tl, profile.T)
        est = modesolve.estimate_fundamental_norm(profile, lam, zp)
        bound = math.exp(est.empirical_c1 * est.nu_at_sep)
        write_csv(outdir / "propagator_norms.csv", ["t", "norm", "bound"],
                  [(float(t), float(n), bound)
                   for t, n in zip(res.sample_ts[::8], res.sample_norms[::8])],
                  __version__, digest)
        print(f"wrote {outdir / 'propagator_norms.csv'}")
    return 0


def _verify_lambda_grid(cfg: RunConfig, args, profile) -> list:
    zp = zone_params(cfg)
    lam_floor = zp.scale * float(profile.nu.value(profile.T)) / profile.T
    lo = max(args.lam_min, 1.05 * lam_floor, zp.M * 2.0)
    hi = max(args.lam_max, lo * 2.0)
    return list(np.geomspace(lo, hi, args.points))


def cmd_verify(cfg: RunConfig, args, outdir: Path, digest: str) -> int:
    profile = build_profile(cfg)
    zp = zone_params(cfg)
    assumptions = coeffs.verify_assumptions(profile)
    write_json(outdir / "assumptions.json", {"assumptions": assumptions.as_dict()},
               __version__, digest)
    if not assumptions.passed:
        print("coefficient fails the admissibility bounds", file=sys.stderr)
        return 2
    lams = _verify_lambda_grid(cfg, args, profile)
    rep = energy.verify_with_refinement(profile, zp, lams,
                                        rtol=cfg.solver.rel_tol)
    write_json(outdir / "energy_report.json", {"report": rep.as_dict()},
               __version__, digest)
    write_csv(outdir / "energy_rows.csv",
              ["lambda", "t_sep", "nu_at_sep", "sup_v", "rhs", "ratio", "c1_row"],
              [(r.lam, r.t_sep, r.nu_at_sep, r.sup_v, r.rhs, r.ratio, r.c1_row)
               for r in rep.rows], __version__, digest)
    print(f"fitted c1 = {rep.fitted_c1:.6g} (refined {rep.refined_c1:.6g}, "
          f"stable={rep.stable})")
    return 0 if rep.passed else 2


def cmd_counterexample(cfg: RunConfig, args, outdir: Path, digest: str) -> int:
    nu = build_nu(cfg)
    ce = cfg.counterexample
    c1 = ce.c1
    if c1 is None:
        # close the loop: the weight constant comes from the estimate sweep
        profile = build_profile(cfg)
        zp = zone_params(cfg)
        lam_floor = zp.scale * float(nu.value(nu.T)) / nu.T
        lo = max(2.0 * zp.M, 1.05 * lam_floor)
        rep = energy.verify_estimate(profile, zp, list(np.geomspace(lo, 16 * lo, 4)),
                                     rtol=1e-8)
        c1 = max(rep.fitted_c1, 0.0)
    family = cx.build_family(eps=ce.epsilon, P=int(cfg.zones.P), p=int(ce.p),
                             nu=nu, T=nu.T, a0=int(ce.a0), k_count=int(ce.k_max),
                             c1=float(c1), psi_r=ce.psi_r)
    table = cx.demonstrate_blowup(family, rtol=cfg.solver.rel_tol)
    manifest = family.as_dict()
    manifest["invariants"] = {
        "whole_periods_integer": True,
        "windows_disjoint": True,
        "monotone_weighted": table.monotone,
        "min_slope_vs_nu": table.min_slope,
    }
    write_json(outdir / "family.json", {"family": manifest}, __version__, digest)
    write_csv(outdir / "blowup.csv",
              ["k", "lambda_k", "t_k", "rho_k", "E0", "ET", "weighted", "log_weighted"],
              [(r.k, r.lam, r.t_k, r.rho_k, r.E0, r.ET, r.weighted, r.weighted_log)
               for r in table.rows], __version__, digest)
    print(f"family of {len(table.rows)} members, c1={c1:.4g}, "
          f"min slope {table.min_slope:.3g}")
    return 0


def cmd_classify(cfg: RunConfig, args, outdir: Path, digest: str) -> int:
    nu = build_nu(cfg)
    label = coeffs.classify_loss(nu)
    write_json(outdir / "classify.json", {"nu_kind": nu.kind, "loss": label},
               __version__, digest)
    print(label)
    return 0


# --- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nuloss",
        description="loss-of-regularity laboratory for an oscillating-coefficient "
                    "hyperbolic equation with a magnetic spatial operator")
    ap.add_argument("command", choices=["eigen", "zones", "solve", "verify",
                                        "counterexample", "classify"])
    ap.add_argument("--config", required=True, help="JSON config path")
    ap.add_argument("--count", type=int, default=20, help="eigen: number of modes")
    ap.add_argument("--nt", type=int, default=41, help="zones: time samples")
    ap.add_argument("--nlam", type=int, default=33, help="zones: frequency samples")
    ap.add_argument("--lam-max", type=float, default=2.0**14)
    ap.add_argument("--lam", type=float, default=2.0**10, help="solve: frequency")
    ap.add_argument("--t0", type=float, default=None)
    ap.add_argument("--t1", type=float, default=None)
    ap.add_argument("--u0", type=float, default=1.0,
                    help="solve: u(t0) * lam (data scale)")
    ap.add_argument("--u1", type=float, default=1.0, help="solve: u_t(t0)")
    ap.add_argument("--lam-min", type=float, default=2.0**10)
    ap.add_argument("--points", type=int, default=5, help="verify: grid size")
    ap.add_argument("--project", type=str, default=None,
                    help="eigen: expression in x to project onto the basis")
    ap.add_argument("--norms", action="store_true",
                    help="solve: also emit propagator norms over the "
                         "high-frequency region")
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    known, overrides = [], []
    for a in argv:
        (overrides if a.startswith("--") and "=" in a and
         a.lstrip("-").split("=", 1)[0].split(".")[0] in _SECTIONS else known).append(a)
    ap = build_parser()
    try:
        args = ap.parse_args(known)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, overrides)
        validate_config(cfg)
    except (ConfigError, exprlang.ExprError, coeffs.CoeffsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    digest = config_hash(cfg)
    outdir = Path(cfg.output.dir)
    outdir.mkdir(parents=True, exist_ok=True)
    handler = {
        "eigen": cmd_eigen, "zones": cmd_zones, "solve": cmd_solve,
        "verify": cmd_verify, "counterexample": cmd_counterexample,
        "classify": cmd_classify,
    }[args.command]
    try:
        return handler(cfg, args, outdir, digest)
    except (cx.CounterexampleError, energy.EnergyError, zones.ZoneError) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, coeffs.CoeffsError, spectral.SpectralError,
            exprlang.ExprError, modesolve.SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
