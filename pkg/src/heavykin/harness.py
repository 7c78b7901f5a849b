"""Sweep orchestration: run the kinetic solvers across a ladder of scaling
parameters, compare against the limiting nonlocal diffusion, and emit a
self-contained report with named pass/fail verdicts.

The deterministic solver is the headline instrument; the particle solver is a
single-epsilon statistical cross-check.  All constants entering verdicts are
measured (or, for the corrector-decay prefactors, fitted at the largest
epsilon and disclosed in the metrics).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig, config_dict
from .corrector import (ProbeFunction, constant_probe, corrector_term_drift_g,
                        corrector_term_drift_rho, corrector_term_qplus,
                        gaussian_packet, modulated_packet)
from .errors import HeavykinError, NumericError, ValidationError
from .grids import DensityField, DiscreteModel, SpatialGrid, VelocityGrid, \
    periodized_gaussian
from .kinetic_fv import KineticRun, auto_vscale, run_kinetic_det
from .kinetic_mc import advance, density_standard_error, estimate_density, \
    init_ensemble
from .model import ModelParams, coercivity_constant, drift, nu0
from .nonlocal_op import assemble, solve_macro

__all__ = ["Verdict", "SweepReport", "run_sweep", "check_apriori",
           "check_coercivity", "check_correctors", "mc_cross_check",
           "build_grids", "probe_from_choice"]


@dataclass
class Verdict:
    """One named pass/fail check with its tolerance and supporting numbers."""

    criterion: str
    passed: bool
    tolerance: str
    metrics: dict = field(default_factory=dict)
    note: str = ""

    def as_dict(self) -> dict:
        return {"criterion": self.criterion, "passed": self.passed,
                "tolerance": self.tolerance, "metrics": _jsonable(self.metrics),
                "note": self.note}


@dataclass
class SweepReport:
    """Everything a sweep produced, re-runnable from the embedded config."""

    version: str
    seed: int
    config: dict
    params: dict
    eps_list: list
    rows: list
    macro: dict
    verdicts: list
    diagnostics: dict = field(default_factory=dict)
    runs: list = field(default_factory=list, repr=False, compare=False)

    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "config": _jsonable(self.config),
            "params": _jsonable(self.params),
            "eps_list": _jsonable(self.eps_list),
            "rows": _jsonable(self.rows),
            "macro": _jsonable(self.macro),
            "verdicts": [v.as_dict() for v in self.verdicts],
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self, *, drop_wall_times: bool = False) -> str:
        payload = self.as_dict()
        if drop_wall_times:
            payload = _strip_wall_times(payload)
        try:
            return json.dumps(payload, indent=2, sort_keys=True,
                              allow_nan=False)
        except ValueError as exc:
            raise NumericError(f"report contains non-finite values: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _strip_wall_times(obj):
    if isinstance(obj, dict):
        return {k: _strip_wall_times(v) for k, v in obj.items()
                if "wall_time" not in k}
    if isinstance(obj, list):
        return [_strip_wall_times(v) for v in obj]
    return obj


def build_grids(cfg: RunConfig) -> tuple[SpatialGrid, VelocityGrid]:
    """Grids implied by a config (resolving the 'auto' velocity policy)."""
    xgrid = SpatialGrid(cfg.nx, cfg.model.domain_length)
    if cfg.vmax_policy == "auto":
        vscale = auto_vscale(cfg.model, cfg.nv, min(cfg.eps_list))
    else:
        vscale = float(cfg.vmax_policy) / (cfg.nv - 1)
    return xgrid, VelocityGrid(cfg.nv, vscale)


def probe_from_choice(cfg: RunConfig) -> ProbeFunction:
    """The weak-formulation probe named by experiment.phi_choice."""
    span = (0.0, cfg.t_final)
    center = 0.5 * cfg.model.domain_length
    if cfg.phi_choice == "gaussian":
        return gaussian_packet(center=center, width=1.0, t_span=span)
    if cfg.phi_choice == "packet":
        return modulated_packet(center=center, width=1.0, t_span=span)
    return constant_probe(1.0, t_span=span)


# ---------------------------------------------------------------------------
# individual checks
# ---------------------------------------------------------------------------


def check_apriori(run: KineticRun, *, slack: float = 0.05) -> Verdict:
    """Energy and density bounds for one kinetic run.

    ||g(t)||^2 <= M ||f_0||^2 eps^gamma and ||rho(t)|| <= ||f_0||, both up to
    a discretization slack (default 5%), at every stored snapshot.
    """
    times = np.asarray(run.times, dtype=float)
    gnorm2 = np.asarray(run.gnorm2, dtype=float)
    if times.size == 0 or gnorm2.size == 0 or not run.f0_norm2 > 0:
        raise ValidationError("run carries no stored norm diagnostics")
    m_const = coercivity_constant(run.params)
    bound = m_const * run.f0_norm2 * run.eps ** run.params.gamma
    g_margin = float(np.max(gnorm2) / bound)
    rho_margin = float(np.max(run.rho_l2) / np.sqrt(run.f0_norm2))
    passed = g_margin <= 1.0 + slack and rho_margin <= 1.0 + slack
    return Verdict(
        criterion="apriori-bounds",
        passed=passed,
        tolerance=f"margins <= {1.0 + slack}",
        metrics={"eps": run.eps, "g_margin": g_margin,
                 "rho_margin": rho_margin, "bound": bound,
                 "gnorm2_over_eps_gamma":
                     float(np.max(gnorm2) / run.eps ** run.params.gamma),
                 "coercivity_M": m_const},
    )


def check_coercivity(params: ModelParams, n_samples: int = 1000, *,
                     nv: int = 129, vscale: float | None = None,
                     seed: int = 2026, tol: float = 1e-10) -> Verdict:
    """Spectral-gap and gain-boundedness inequalities on random data.

    For random nonnegative discrete densities f and random positions x,
    checks  sum_v w Q(f) f / F  <=  -nu0(x)/(2M) ||f - rho F||^2_{L^2(<v>^b/F)}
    and the gain bound  ||Q+(f)/nu||^2_{L^2(nu/F)} <= ||f||^2_{L^2(nu/F)}.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be positive")
    if vscale is None:
        vscale = auto_vscale(params, nv, 1.0)
    dvm = DiscreteModel(params, VelocityGrid(nv, vscale))
    m_const = coercivity_constant(params)
    w, b, f_eq = dvm.vgrid.weights, dvm.bracket_beta, dvm.f_eq
    rng = np.random.default_rng(seed)

    worst_gap = -np.inf
    worst_gain = -np.inf
    for i in range(n_samples):
        x = float(rng.uniform(0.0, params.domain_length))
        kind = i % 4
        if kind == 0:
            f = f_eq * rng.exponential(1.0, size=nv)
        elif kind == 1:
            f = float(rng.exponential(1.0)) * f_eq       # exact kernel element
        elif kind == 2:
            f = np.zeros(nv)
            idx = rng.integers(0, nv, size=int(rng.integers(1, 6)))
            f[idx] = rng.exponential(1.0, size=idx.size)
        else:
            f = f_eq * (1.0 + 0.9 * np.sin(3.0 * dvm.vgrid.u)) \
                * rng.exponential(1.0, size=nv)
        q = dvm.collision_operator(x, f)
        lhs = float(np.sum(w * q * f / f_eq))
        rho = float(dvm.density(f))
        defect = f - rho * f_eq
        quad = float(nu0(params, x) * np.sum(w * b * defect ** 2 / f_eq))
        rhs = -quad / (2.0 * m_const)
        worst_gap = max(worst_gap, (lhs - rhs) / (1.0 + abs(rhs)))

        mb = float(dvm.moment_beta(f))
        gain_sq = float(nu0(params, x)) * mb ** 2 / dvm.c_beta_disc
        f_sq = float(nu0(params, x) * np.sum(w * b * f ** 2 / f_eq))
        worst_gain = max(worst_gain, (gain_sq - f_sq) / (1.0 + abs(f_sq)))

    passed = worst_gap <= tol and worst_gain <= tol
    return Verdict(
        criterion="coercivity",
        passed=passed,
        tolerance=f"relative violations <= {tol:g}",
        metrics={"n_samples": n_samples, "max_gap_violation": worst_gap,
                 "max_gain_violation": worst_gain, "coercivity_M": m_const},
    )


# Decay exponents for the three remainder terms of the weak formulation, as
# functions of gamma and beta; each term is O(eps^s) with the s below.
def _remainder_exponents(params: ModelParams) -> tuple[float, float, float]:
    g, b = params.gamma, params.beta
    free = 1.0 / (1.0 - b)
    s1 = min(0.5 * (2.0 - g), 0.5 * g)
    s2 = min(1.0 - 0.5 * g, free)
    s3 = min(2.0 - g, free)
    return s1, s2, s3


def check_correctors(runs: list[KineticRun], phi: ProbeFunction, *,
                     slope_slack: float = 0.15) -> Verdict:
    """Remainder-term decay across a ladder of runs.

    Each of the three weak-formulation remainders must shrink as eps does,
    with a log-log slope no flatter than its predicted exponent minus the
    slack.  Terms that vanish identically (no drift when the tail index is
    below one, or a constant probe) pass trivially.  Prefactors are fitted at
    the largest eps and disclosed, never assumed.
    """
    if len(runs) < 3:
        raise ValidationError("slope estimation needs at least 3 eps values")
    eps = np.array([r.eps for r in runs], dtype=float)
    if not np.all(np.diff(eps) < 0):
        raise ValidationError("runs must be ordered by strictly decreasing eps")
    params = runs[0].params
    exponents = _remainder_exponents(params)
    names = ("qplus", "drift_g", "drift_rho")
    funcs = (corrector_term_qplus, corrector_term_drift_g,
             corrector_term_drift_rho)

    metrics: dict = {"eps": eps.tolist()}
    passed = True
    for name, func, s_pred in zip(names, funcs, exponents):
        mags = np.array([abs(func(params, r.eps, phi, r)) for r in runs])
        metrics[f"{name}_terms"] = mags.tolist()
        metrics[f"{name}_exponent_predicted"] = s_pred
        if np.max(mags) <= 1e-13:
            metrics[f"{name}_slope"] = None
            metrics[f"{name}_note"] = "identically zero"
            continue
        slope = float(np.polyfit(np.log(eps), np.log(mags), 1)[0])
        metrics[f"{name}_slope"] = slope
        metrics[f"{name}_fitted_prefactor"] = float(mags[0] / eps[0] ** s_pred)
        decreasing = bool(np.all(np.diff(mags) < 0))
        metrics[f"{name}_decreasing"] = decreasing
        if not decreasing or slope < s_pred - slope_slack:
            passed = False
    return Verdict(
        criterion="corrector-decay",
        passed=passed,
        tolerance=f"slopes >= predicted - {slope_slack}; magnitudes decreasing",
        metrics=metrics,
    )


# ---------------------------------------------------------------------------
# the sweep
# ---------------------------------------------------------------------------


def _kinetic_row(cfg: RunConfig, eps: float, xgrid: SpatialGrid,
                 vgrid: VelocityGrid, rho0: np.ndarray,
                 phi: ProbeFunction) -> tuple[dict, KineticRun]:
    started = time.perf_counter()
    cfl = 0.9 if cfg.dt_policy == "cfl" else float(cfg.dt_policy)
    run = run_kinetic_det(
        cfg.model, eps, xgrid=xgrid, vgrid=vgrid, t_final=cfg.t_final,
        snapshot_times=cfg.snapshot_times, scheme_order=cfg.scheme_order,
        cfl=cfl, rho0=rho0, store_phase=True)
    row = {
        "eps": eps,
        "mass_err": float(np.max(np.abs(np.asarray(run.mass) - 1.0))),
        "qplus_term": corrector_term_qplus(cfg.model, eps, phi, run),
        "drift_g_term": corrector_term_drift_g(cfg.model, eps, phi, run),
        "drift_rho_term": corrector_term_drift_rho(cfg.model, eps, phi, run),
        "wall_time": time.perf_counter() - started,
    }
    return row, run


def mc_cross_check(cfg: RunConfig, det_run: KineticRun,
                   bins: int = 64) -> Verdict:
    """Particle cross-check at the largest eps: binned densities must agree
    with the deterministic marginal within three standard errors per bin."""
    eps = det_run.eps
    ens = init_ensemble(cfg.model, cfg.particles, cfg.seed)
    ens = advance(ens, cfg.t_final, eps)
    if det_run.xgrid.nx % bins != 0:
        bins = det_run.xgrid.nx
    fld = estimate_density(ens, bins)
    se = density_standard_error(ens, fld)
    det_binned = det_run.rho[-1].reshape(bins, -1).mean(axis=1)
    diff = np.abs(fld.values - det_binned)
    z = diff / np.maximum(se, 1e-300)
    passed = bool(np.all(diff <= 3.0 * se + 1e-15))
    return Verdict(
        criterion="mc-cross-check",
        passed=passed,
        tolerance="|mc - det| <= 3 SE per bin",
        metrics={"eps": eps, "particles": cfg.particles, "bins": bins,
                 "max_z": float(np.max(z)),
                 "max_abs_diff": float(np.max(diff))},
    )


def run_sweep(cfg: RunConfig, *, threads: int = 1) -> SweepReport:
    """Run the full comparison ladder described by ``cfg``.

    For each eps (strictly decreasing) the deterministic kinetic solver is
    run from a shared initial density; the limiting nonlocal equation is
    solved once on the same grid; the report rows carry the terminal L^2
    errors, bound margins, remainder magnitudes and wall times, and the
    verdict list the named pass/fail checks.  Independent eps runs may be
    executed concurrently; rows are merged in eps order regardless.
    """
    eps_list = [float(e) for e in cfg.eps_list]
    if len(eps_list) != len(set(eps_list)) or \
            any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValidationError("eps list must be strictly decreasing")
    if cfg.snapshot_times is not None and \
            abs(cfg.snapshot_times[-1] - cfg.t_final) > 1e-12:
        raise ValidationError("snapshot_times must end at t_final for the "
                              "terminal comparison")
    if threads < 1:
        raise ValidationError("threads must be positive")

    params = cfg.model
    xgrid, vgrid = build_grids(cfg)
    rho0 = periodized_gaussian(xgrid)
    phi = probe_from_choice(cfg)

    # Limiting equation: solved once, shared by every row.
    macro_started = time.perf_counter()
    op = assemble(params, xgrid)
    macro_run = solve_macro(op, DensityField(xgrid, rho0, provenance="initial"),
                            cfg.t_final)
    macro_final = macro_run.final()
    macro = {
        "nx": xgrid.nx,
        "t_final": cfg.t_final,
        "mass_err": float(abs(macro_run.masses()[-1] - 1.0)),
        "wall_time": time.perf_counter() - macro_started,
    }

    def job(e: float):
        try:
            return _kinetic_row(cfg, e, xgrid, vgrid, rho0, phi)
        except HeavykinError as exc:
            return {"eps": e, "error": f"{type(exc).__name__}: {exc}"}, None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, eps_list))
    else:
        results = [job(e) for e in eps_list]

    rows = []
    runs: list[KineticRun | None] = []
    verdicts: list[Verdict] = []
    for row, run in results:
        if run is not None:
            diff = run.rho[-1] - macro_final.values
            row["error_l2"] = float(np.sqrt(xgrid.dx * np.sum(diff ** 2)))
            apriori = check_apriori(run)
            row["g_margin"] = apriori.metrics["g_margin"]
            row["rho_margin"] = apriori.metrics["rho_margin"]
            row["gnorm2_over_eps_gamma"] = \
                apriori.metrics["gnorm2_over_eps_gamma"]
            verdicts.append(apriori)
        rows.append(row)
        runs.append(run)

    ok_runs = [r for r in runs if r is not None]
    verdicts.append(Verdict(
        criterion="runs-completed",
        passed=len(ok_runs) == len(eps_list),
        tolerance="every eps run finishes",
        metrics={"requested": len(eps_list), "completed": len(ok_runs)},
        note="" if len(ok_runs) == len(eps_list) else "partial report",
    ))

    mass_errs = [row["mass_err"] for row in rows if "mass_err" in row]
    mass_errs.append(macro["mass_err"])
    verdicts.append(Verdict(
        criterion="mass-conservation",
        passed=max(mass_errs) < 1e-9,
        tolerance="|mass - 1| < 1e-9",
        metrics={"max_mass_err": max(mass_errs)},
    ))

    errors = [row["error_l2"] for row in rows if "error_l2" in row]
    if len(errors) >= 2:
        decreasing = all(b < a for a, b in zip(errors, errors[1:]))
        verdicts.append(Verdict(
            criterion="macro-convergence",
            passed=decreasing,
            tolerance="terminal L2 error strictly decreasing in eps",
            metrics={"errors": errors,
                     "ratio_last_first": errors[-1] / errors[0]},
        ))

    diagnostics: dict = {}
    ratios = [row["gnorm2_over_eps_gamma"] for row in rows
              if "gnorm2_over_eps_gamma" in row]
    if len(ratios) >= 2:
        # Measured, not asserted: the rescaled energy should be eps-uniform.
        diagnostics["gnorm2_ratio_spread"] = max(ratios) / min(ratios)

    if len(ok_runs) >= 3 and len(ok_runs) == len(eps_list) \
            and ok_runs[0].times.size >= 3:
        verdicts.append(check_correctors(ok_runs, phi))

    verdicts.append(check_coercivity(params, 200, nv=min(cfg.nv, 129),
                                     seed=cfg.seed))

    if cfg.particles > 0 and runs[0] is not None:
        verdicts.append(mc_cross_check(cfg, runs[0]))

    return SweepReport(
        version=__version__,
        seed=cfg.seed,
        config=config_dict(cfg),
        params=params.as_dict(),
        eps_list=eps_list,
        rows=rows,
        macro=macro,
        verdicts=verdicts,
        diagnostics=diagnostics,
        runs=runs,
    )
