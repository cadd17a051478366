"""Estimator evaluation along trajectories and the convergence/adaptivity driver."""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from virecon import estimators as est
from virecon.benchmarks import benchmark
from virecon.fem import FeFunction, build_space, l2_error, norm
from virecon.mesh import build_structured_mesh, refine, uniform_refine
from virecon.multiplier import (
    ReconstructionData,
    check_orthogonality,
    compute_sigma,
    dual_norm,
    reconstruct_reference,
    reference_pairing,
    restricted_load,
)
from virecon.vi import run_trajectory


@dataclass(eq=False)
class TrajectoryAnalysis:
    """Per-step estimator pieces (index ``n - 1`` for step ``n``) and running bounds."""

    t: np.ndarray
    err: Optional[np.ndarray]
    eta0: np.ndarray
    eta_energy: np.ndarray
    eta_dt: np.ndarray
    sigma_minus_dual: np.ndarray
    sigma_dual: np.ndarray
    sigma_l2: np.ndarray
    comp: np.ndarray
    neg: np.ndarray
    ortho: Optional[np.ndarray]
    integrals: dict
    initial: dict
    totals: np.ndarray
    breakdown: est.EstimatorBreakdown
    eta_dt_skipped: tuple = (1,)

    @property
    def max_error(self):
        return None if self.err is None else float(self.err.max())

    @property
    def effectivity(self):
        if self.err is None or self.max_error == 0.0:
            return None
        return self.breakdown.total / (0.5 * self.max_error)


def _time_derivative_of_f(problem, tau):
    if problem.f_t is not None:
        return problem.f_t
    f = problem.f
    return lambda x, y, t: (f(x, y, t) - f(x, y, t - tau)) / tau


def analyse_trajectory(traj, sigma_mode="lumped", printed=False, coupling="energy",
                       fine_space=None):
    """Evaluate every estimator term at every step and assemble the bounds.

    With ``fine_space`` (a nested refinement) the elliptic reconstruction is
    computed there, the orthogonality residual is recorded (normalized by
    ``1 + ||w_h||_V``) and the negative-part term uses it instead of the
    computable surrogate.
    """
    space, problem, tau = traj.space, traj.problem, traj.tau
    f = problem.f
    fdot = _time_derivative_of_f(problem, tau)
    states = traj.states
    N = len(states) - 1
    cols = {name: np.zeros(N) for name in (
        "eta0", "eta_energy", "eta_dt", "sigma_minus_dual", "sigma_dual", "sigma_l2",
        "comp", "neg")}
    err = np.zeros(N) if problem.exact is not None else None
    ortho = np.zeros(N) if fine_space is not None else None
    traj.sigma = []
    eta0_elem = None
    for n in range(1, N + 1):
        s, prev = states[n], states[n - 1]
        load = restricted_load(space, fine_space, f, s.t) if fine_space is not None else None
        rec = compute_sigma(space, s.w, prev.w, tau, f, s.t, sigma_mode, load=load)
        traj.sigma.append(rec)
        i = n - 1
        eta0_elem, cols["eta0"][i] = est.eta0(space, s.w, rec.wdot, rec.sigma, f, s.t, printed)
        cols["eta_energy"][i] = est.eta_energy(space, s.w, rec.sigma, rec.wdot, f, s.t, printed)
        cols["sigma_minus_dual"][i] = dual_norm(space, rec.minus)
        cols["sigma_dual"][i] = dual_norm(space, rec.sigma)
        cols["sigma_l2"][i] = norm(rec.sigma)
        pairing = None
        if fine_space is not None:
            W = reconstruct_reference(fine_space, ReconstructionData(f, rec.sigma, rec.wdot, s.t))
            ortho[i] = check_orthogonality(W, s.w) / (1.0 + norm(s.w, "H1_semi"))
            pairing = reference_pairing(W, rec.minus, s.chi)
        cols["comp"][i], cols["neg"][i] = est.complementarity_terms(
            rec, s.w, s.chi, cols["eta0"][i], W_pairing=pairing)
        if n >= 2:
            old = traj.sigma[-2]
            wddot = (rec.wdot - old.wdot) / tau
            sdot = (rec.sigma - old.sigma) / tau
            if space.degree >= 2:
                cols["eta_dt"][i] = est.eta1(space, rec.wdot, wddot, sdot, fdot, s.t, printed)[1]
            else:
                cols["eta_dt"][i] = est.eta0(space, rec.wdot, wddot, sdot, fdot, s.t, printed)[1]
        if err is not None:
            err[i] = l2_error(s.w, problem.exact, s.t)

    first = traj.sigma[0]
    w_init = states[0].w
    initial = {
        "init_l2": l2_error(w_init, problem.w0, 0.0),
        "eta0_init": est.eta0(space, w_init, first.wdot, first.sigma, f, 0.0, printed)[1],
    }
    slot = cols["eta0"] if coupling == "eta0" else cols["eta_energy"]
    integrals = {
        "signeg_dual_sq": est.accumulate(cols["sigma_minus_dual"] ** 2, tau),
        "comp": est.accumulate(cols["comp"], tau),
        "neg": est.accumulate(cols["neg"], tau),
        "coupling": est.accumulate(cols["sigma_dual"] * slot, tau),
        "coupling_l2": est.accumulate(cols["sigma_l2"] * slot, tau),
        "eta_dt_sq": est.accumulate(cols["eta_dt"] ** 2, tau),
    }
    totals = np.zeros(N)
    breakdown = None
    for i in range(N):
        acc = {key: integrals[key][i] for key in est.ACCUMULATED_KEYS if key != "eta0"}
        acc["eta0"] = cols["eta0"][i]
        if i == N - 1:
            acc["eta0_elem_sq"] = eta0_elem
        b = est.total_bound(acc, initial, space.degree)
        totals[i] = b.total
        breakdown = b
    return TrajectoryAnalysis(
        t=traj.times[1:], err=err, ortho=ortho, integrals=integrals, initial=initial,
        totals=totals, breakdown=breakdown, **cols)


def dorfler_marking(indicators_sq, theta):
    """Smallest set of elements whose squared indicators reach ``theta`` of the total."""
    order = np.argsort(-indicators_sq, kind="stable")
    csum = np.cumsum(indicators_sq[order])
    if csum[-1] <= 0.0:
        return order[:0]
    count = int(np.searchsorted(csum, theta * csum[-1] * (1 - 1e-14))) + 1
    return np.sort(order[:count])


def top_fraction_share(indicators_sq, fraction=0.1):
    """Share of the total carried by the largest ``fraction`` of indicators."""
    total = indicators_sq.sum()
    if total == 0.0:
        return 0.0
    m = max(1, int(math.ceil(fraction * len(indicators_sq))))
    return float(np.sort(indicators_sq)[::-1][:m].sum() / total)


def time_step(config, mesh, T):
    if config.tau_rule == "fixed":
        return config.tau
    N = max(1, int(math.ceil(T / mesh.max_h ** 2 - 1e-9)))
    return T / N


@dataclass
class LevelRow:
    level: int
    h_max: float
    ndofs: int
    nsteps: int
    err_LinfL2: Optional[float]
    eta0_T: float
    eta_total: float
    term_signeg: float
    term_comp: float
    term_dual: float
    effectivity: Optional[float]
    ortho_resid: Optional[float]
    seconds: Optional[float]


CSV_COLUMNS = ("level", "h_max", "ndofs", "nsteps", "err_LinfL2", "eta0_T", "eta_total",
               "term_signeg", "term_comp", "term_dual", "effectivity", "ortho_resid",
               "seconds")


@dataclass
class LevelResult:
    row: LevelRow
    trajectory: object
    analysis: TrajectoryAnalysis
    wall_seconds: float


@dataclass
class ConvergenceReport:
    config: object
    levels: list = field(default_factory=list)

    @property
    def rows(self):
        return [lv.row for lv in self.levels]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


class ExperimentError(RuntimeError):
    """A module error annotated with the level where it happened."""


def _solve_level(config, problem, mesh, level):
    t0 = time.perf_counter()
    space = build_space(mesh, config.k)
    tau = time_step(config, mesh, config.T)
    traj = run_trajectory(problem, space, tau, config.T)
    fine = None
    if config.verification:
        fine = build_space(uniform_refine(mesh, config.fine_depth), config.k)
    an = analyse_trajectory(traj, sigma_mode=config.sigma_mode,
                            printed=config.residual == "printed",
                            coupling=config.coupling, fine_space=fine)
    seconds = time.perf_counter() - t0
    row = LevelRow(
        level=level, h_max=mesh.max_h, ndofs=space.n_dofs, nsteps=len(traj) - 1,
        err_LinfL2=an.max_error, eta0_T=float(an.eta0[-1]), eta_total=an.breakdown.total,
        term_signeg=float(an.integrals["signeg_dual_sq"][-1]),
        term_comp=float(an.integrals["comp"][-1]),
        term_dual=float(an.integrals["coupling"][-1]),
        effectivity=an.effectivity,
        ortho_resid=None if an.ortho is None else float(an.ortho.max()),
        seconds=seconds if config.record_time else None,
    )
    return LevelResult(row, traj, an, seconds)


def run_experiment(config, echo=None):
    """Run every level of ``config``; returns a :class:`ConvergenceReport`.

    Uniform mode halves the mesh size ``levels - 1`` times.  Adaptive mode
    marks on the final-time per-element eta0 with Doerfler fraction ``theta``
    and stops before a space would exceed ``budget`` dofs.
    """
    problem = benchmark(config.problem)
    report = ConvergenceReport(config)
    mesh = build_structured_mesh(config.n, problem.domain)
    level = 0
    while True:
        try:
            result = _solve_level(config, problem, mesh, level)
        except Exception as exc:
            raise ExperimentError(f"level {level}: {type(exc).__name__}: {exc}") from exc
        report.levels.append(result)
        if echo is not None:
            echo(format_row(result.row, result.wall_seconds))
        level += 1
        if config.refinement == "uniform":
            if level >= config.levels:
                break
            mesh = uniform_refine(mesh)
        else:
            marks = dorfler_marking(result.analysis.breakdown.eta0_elem_sq, config.theta)
            candidate = refine(mesh, marks)
            if len(marks) == 0 or build_space(candidate, config.k).n_dofs > config.budget:
                break
            mesh = candidate
    return report


def format_row(row, wall):
    def fmt(v):
        return "-" if v is None else f"{v:.4e}"
    return (f"level {row.level}: h={row.h_max:.4f} dofs={row.ndofs} steps={row.nsteps} "
            f"err={fmt(row.err_LinfL2)} eta0(T)={fmt(row.eta0_T)} "
            f"total={fmt(row.eta_total)} eff={fmt(row.effectivity)} "
            f"ortho={fmt(row.ortho_resid)} ({wall:.2f}s)")
