"""Acceptance checks shared by ``virecon selftest`` and the pytest gate.

Each ``criterion_N`` returns a :class:`CriterionResult`; nothing here is
tuned per run, tolerances are fixed constants.
"""

import functools
import os
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from virecon import estimators as est
from virecon.config import load_config
from virecon.experiment import run_experiment, top_fraction_share
from virecon.fem import FeFunction, assemble_load, build_space, l2_error
from virecon.linalg import restrict
from virecon.mesh import build_structured_mesh
from virecon.output import csv_text
from virecon.vi import kkt_residuals

HEAT = "problem=heat_smooth\nk=1\nn=4\nlevels=3"
MANUFACTURED = "problem=manufactured_obstacle\nk=1\nn=4\nlevels=3"
PYRAMID = "problem=pyramid_adaptive\nrefinement=adaptive\ntheta=0.5\nbudget=20000"
ORTHO = ("problem=manufactured_obstacle\nk=1\nn=8\nlevels=1\nsigma_mode=consistent\n"
         "verification=true\nfine_depth=2")


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


@functools.lru_cache(maxsize=None)
def _timed_report(text):
    t0 = time.perf_counter()
    report = run_experiment(load_config(text))
    return report, time.perf_counter() - t0


def _report(text):
    return _timed_report(text)[0]


def criterion_1():
    report, seconds = _timed_report(ORTHO)
    ortho = report.levels[0].analysis.ortho
    worst = float(ortho.max())
    ok = worst <= 1e-9 and seconds <= 120.0
    return CriterionResult(1, "orthogonality", ok,
                           f"max normalized residual {worst:.3e} over {len(ortho)} steps "
                           f"(limit 1e-9), {seconds:.1f}s (limit 120s)")


def criterion_2():
    worst = {"feasibility": 0.0, "sign": 0.0, "complementarity": 0.0}
    count = 0
    for text in (HEAT, MANUFACTURED, PYRAMID):
        for level in _report(text).levels:
            for state in level.trajectory.states[1:]:
                gap, lam, comp, scale = kkt_residuals(state)
                worst["feasibility"] = max(worst["feasibility"], -gap / scale)
                worst["sign"] = max(worst["sign"], -lam / scale)
                worst["complementarity"] = max(worst["complementarity"], comp / scale)
                count += 1
    ok = (worst["feasibility"] <= 1e-10 and worst["sign"] <= 1e-9
          and worst["complementarity"] <= 1e-9)
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    return CriterionResult(2, "discrete KKT", ok, f"{count} steps; scaled worst {detail}")


def _unconstrained_heat(traj):
    """Independent backward-Euler heat solve with a sparse direct solver."""
    space, tau = traj.space, traj.tau
    free = space.free
    A = restrict(space.mass / tau + space.stiffness, free).tocsc()
    Mf = restrict(space.mass, free)
    w = traj.states[0].w.coef[free]
    out = []
    for state in traj.states[1:]:
        b = assemble_load(space, traj.problem.f, state.t)[free]
        w = spla.spsolve(A, Mf @ w / tau + b)
        out.append(w)
    return out


def criterion_3():
    t0 = time.perf_counter()
    report = run_experiment(load_config(HEAT))
    seconds = time.perf_counter() - t0
    diff = 0.0
    for level in report.levels:
        traj = level.trajectory
        free = traj.space.free
        for state, ref in zip(traj.states[1:], _unconstrained_heat(traj)):
            diff = max(diff, float(np.abs(state.w.coef[free] - ref).max()))
    final = [l2_error(lv.trajectory.states[-1].w, lv.trajectory.problem.exact,
                      lv.trajectory.states[-1].t) for lv in report.levels]
    ratios = [a / b for a, b in zip(final[:-1], final[1:])]
    ok = diff <= 1e-10 and all(3.4 <= r <= 4.6 for r in ratios) and seconds <= 60.0
    return CriterionResult(3, "heat reduction", ok,
                           f"max dof diff {diff:.2e} (limit 1e-10), final-time error ratios "
                           f"{', '.join(f'{r:.3f}' for r in ratios)} (range [3.4, 4.6]), "
                           f"{seconds:.1f}s (limit 60s)")


def criterion_4():
    report = _report(MANUFACTURED)
    errs = report.column("err_LinfL2")
    ratios = errs[:-1] / errs[1:]
    sig = []
    for level in report.levels:
        traj = level.trajectory
        sig.append(l2_error(traj.sigma[-1].sigma, traj.problem.sigma_exact, traj.states[-1].t))
    mono = all(b < a for a, b in zip(sig[:-1], sig[1:]))
    ok = bool(np.all(ratios >= 1.8)) and mono
    return CriterionResult(4, "manufactured convergence", ok,
                           f"max-error ratios {', '.join(f'{r:.3f}' for r in ratios)} (>= 1.8), "
                           f"sigma L2 errors {', '.join(f'{s:.4f}' for s in sig)} (decreasing)")


def criterion_5():
    eff = _report(MANUFACTURED).column("effectivity")
    spread = float(eff.max() / eff.min())
    ok = bool(np.all(eff >= 1.0)) and spread < 5.0
    return CriterionResult(5, "reliability surrogate", ok,
                           f"effectivities {', '.join(f'{e:.1f}' for e in eff)}, "
                           f"spread {spread:.2f} (< 5)")


def criterion_6():
    space = build_space(build_structured_mesh(4), 1)
    zero = FeFunction(space, np.zeros(space.n_dofs))
    _, z = est.eta0(space, zero, zero, zero, lambda x, y, t: 0.0 * x, 0.0)
    report = _report(HEAT)
    eta = report.column("eta0_T")
    h = report.column("h_max")
    orders = np.log(eta[:-1] / eta[1:]) / np.log(h[:-1] / h[1:])
    ok = z == 0.0 and bool(np.all(orders >= 1.5))
    return CriterionResult(6, "estimator zero/decay", ok,
                           f"zero-data eta0 {z!r}, observed orders "
                           f"{', '.join(f'{o:.3f}' for o in orders)} (>= 1.5)")


def criterion_7():
    one = lambda x, y, t: np.ones_like(x)  # noqa: E731
    mesh = build_structured_mesh(1)
    p1 = build_space(mesh, 1)
    p2 = build_space(mesh, 2)
    z1 = FeFunction(p1, np.zeros(p1.n_dofs))
    z2 = FeFunction(p2, np.zeros(p2.n_dofs))
    e0 = est.eta0(p1, z1, z1, z1, one, 0.0)[1] ** 2
    e1 = est.eta1(p2, z2, z2, z2, one, 0.0)[1] ** 2
    ev = est.eta_energy(p1, z1, z1, z1, one, 0.0) ** 2
    checks = [("eta0^2", e0, 4.0), ("eta1^2", e1, 16.0), ("eta_energy^2", ev, 2.0)]
    ok = all(abs(got - want) <= 1e-12 for _, got, want in checks)
    return CriterionResult(7, "hand-computed estimator values", ok,
                           ", ".join(f"{n} = {g:.15g} (expected {w:g})" for n, g, w in checks))


def criterion_8():
    worst = 0.0
    runs = 0
    for text in (HEAT, MANUFACTURED, PYRAMID):
        report = _report(text)
        if report.config.sigma_mode != "lumped":
            continue
        worst = max(worst, float(report.column("term_signeg").max()))
        runs += 1
    return CriterionResult(8, "lumped sign property", worst <= 1e-8,
                           f"max sigma^- dual integral {worst:.3e} over {runs} runs (<= 1e-8)")


def criterion_9():
    report = _report(PYRAMID)
    final = report.levels[-1]
    share = top_fraction_share(final.analysis.breakdown.eta0_elem_sq, 0.1)
    within = all(r.ndofs <= 20000 for r in report.rows)
    ok = within and share >= 0.5
    return CriterionResult(9, "adaptive localization", ok,
                           f"{len(report.rows)} levels, final dofs {final.row.ndofs} "
                           f"(budget 20000), top-10% share of sum eta0^2 on the final mesh "
                           f"{share:.3f} (>= 0.5)")


def criterion_10():
    old = os.environ.get("VIRECON_THREADS")
    os.environ["VIRECON_THREADS"] = "1"
    try:
        texts = [csv_text(run_experiment(load_config(MANUFACTURED))) for _ in range(2)]
    finally:
        if old is None:
            del os.environ["VIRECON_THREADS"]
        else:
            os.environ["VIRECON_THREADS"] = old
    same = texts[0] == texts[1]
    return CriterionResult(10, "determinism", same,
                           f"two runs {'byte-identical' if same else 'differ'} "
                           f"({len(texts[0])} bytes)")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10)


def run_all(echo=print, checks=CRITERIA):
    results = []
    for check in checks:
        try:
            result = check()
        except Exception as exc:  # report and keep going
            number = int(check.__name__.rsplit("_", 1)[1])
            result = CriterionResult(number, check.__name__, False,
                                     f"raised {type(exc).__name__}: {exc}")
        results.append(result)
        if echo is not None:
            echo(result.line())
    return results
