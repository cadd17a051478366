import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from virecon import estimators as est
from virecon.benchmarks import benchmark
from virecon.errors import InvalidArgument
from virecon.fem import FeFunction, assemble_load, build_space, interpolate, norm
from virecon.linalg import solve_dirichlet
from virecon.mesh import Mesh, build_structured_mesh, uniform_refine
from virecon.multiplier import ReconstructionData, compute_sigma, reconstruct_reference
from virecon.fem import prolong
from virecon.vi import run_trajectory


def one(x, y, t):
    return np.ones_like(x)


def zero(x, y, t):
    return 0.0 * x


def zeros(space):
    return FeFunction(space, np.zeros(space.n_dofs))


def test_affine_has_no_jumps():
    s = build_space(uniform_refine(build_structured_mesh(3)), 1)
    u = interpolate(s, lambda x, y, t: 3 * x - 2 * y + 1)
    assert np.abs(est.jump_residual(u).values).max() <= 1e-13
    s2 = build_space(build_structured_mesh(3), 2)
    q = interpolate(s2, lambda x, y, t: x * x + x * y)
    # normal flux of a global quadratic is continuous
    assert np.abs(est.jump_residual(q).values).max() <= 1e-12


def test_hat_function_jump():
    s = build_space(build_structured_mesh(1), 1)
    coef = np.zeros(4)
    coef[np.flatnonzero(np.all(s.dof_coords == [1.0, 0.0], axis=1))] = 1.0
    jumps = est.jump_residual(FeFunction(s, coef))
    # gradient (1, -1) below the diagonal, 0 above; normal (1, -1)/sqrt(2)
    assert np.allclose(np.abs(jumps.values), np.sqrt(2), atol=1e-14)
    assert jumps.squared_l2()[0] == pytest.approx(np.sqrt(2) * 2, rel=1e-14)


def test_jump_sum_invariant_under_mirroring():
    base = uniform_refine(build_structured_mesh(2))
    mirrored = Mesh.from_triangles(np.column_stack([1 - base.vertices[:, 0], base.vertices[:, 1]]),
                                   base.triangles, domain=base.domain)
    rng = np.random.default_rng(4)
    coef = rng.standard_normal(base.n_vertices)
    totals = []
    for m in (base, mirrored):
        j = est.jump_residual(FeFunction(build_space(m, 1), coef))
        totals.append(np.sum(j.squared_l2() * j.h_e))
    assert totals[0] == pytest.approx(totals[1], rel=1e-13)


def test_eta0_zero_and_hand_value():
    s = build_space(build_structured_mesh(1), 1)
    z = zeros(s)
    assert est.eta0(s, z, z, z, zero, 0.0)[1] == 0.0
    per, total = est.eta0(s, z, z, z, one, 0.0)
    assert total ** 2 == pytest.approx(4.0, abs=1e-12)
    assert np.allclose(per, s.mesh.h_K ** 4 * s.mesh.areas)


def test_eta1_hand_value_and_degree_check():
    s = build_space(build_structured_mesh(1), 2)
    z = zeros(s)
    assert est.eta1(s, z, z, z, zero, 0.0)[1] == 0.0
    total = est.eta1(s, z, z, z, one, 0.0)[1]
    # sum of h_K^6 |K| = 2 * (sqrt 2)^6 * 1/2
    assert total ** 2 == pytest.approx(8.0, abs=1e-12)
    s1 = build_space(build_structured_mesh(1), 1)
    with pytest.raises(InvalidArgument):
        est.eta1(s1, zeros(s1), zeros(s1), zeros(s1), one, 0.0)


def test_eta1_scaling():
    totals = []
    mesh = build_structured_mesh(2)
    for _ in range(2):
        s = build_space(mesh, 2)
        totals.append(est.eta1(s, zeros(s), zeros(s), zeros(s), one, 0.0)[1])
        mesh = uniform_refine(mesh)
    assert totals[0] / totals[1] == pytest.approx(8.0, rel=1e-12)


def test_eta_energy_hand_value():
    s = build_space(build_structured_mesh(1), 1)
    z = zeros(s)
    assert est.eta_energy(s, z, z, z, zero, 0.0) == 0.0
    assert est.eta_energy(s, z, z, z, one, 0.0) ** 2 == pytest.approx(2.0, abs=1e-12)


def test_eta0_decay_fixed_data():
    f = lambda x, y, t: np.sin(np.pi * x) * np.cos(y)  # noqa: E731
    mesh = build_structured_mesh(2)
    totals = []
    for _ in range(3):
        s = build_space(mesh, 1)
        totals.append(est.eta0(s, zeros(s), zeros(s), zeros(s), f, 0.0)[1])
        mesh = uniform_refine(mesh)
    ratios = np.array(totals[:-1]) / totals[1:]
    assert np.all(ratios >= 3.4)


@pytest.mark.parametrize("k", [1, 2])
def test_energy_estimator_bounds_reconstruction_error(k):
    coarse = build_space(build_structured_mesh(4), k)
    fine = build_space(uniform_refine(coarse.mesh, 2), k)
    w = FeFunction(coarse, solve_dirichlet(coarse.stiffness, assemble_load(coarse, one), coarse.free))
    z = zeros(coarse)
    W = reconstruct_reference(fine, ReconstructionData(one, z, z, 0.0))
    err = norm(W - prolong(w, fine), "H1_semi")
    eta = est.eta_energy(coarse, w, z, z, one, 0.0)
    assert eta / err >= 1.0


def test_localization_sum():
    prob = benchmark("manufactured_obstacle")
    s = build_space(build_structured_mesh(8), 1)
    traj = run_trajectory(prob, s, 0.5 / 16, 0.5)
    cur, prev = traj.states[-1], traj.states[-2]
    rec = compute_sigma(s, cur.w, prev.w, traj.tau, prob.f, cur.t)
    per, total = est.eta0(s, cur.w, rec.wdot, rec.sigma, prob.f, cur.t)
    assert np.all(per >= 0)
    assert per.sum() == pytest.approx(total ** 2, rel=1e-13)
    printed = est.eta0(s, cur.w, rec.wdot, rec.sigma, prob.f, cur.t, printed=True)[1]
    assert abs(printed - total) > 1e-6 * total


def test_complementarity_terms():
    prob = benchmark("manufactured_obstacle")
    s = build_space(build_structured_mesh(8), 1)
    traj = run_trajectory(prob, s, 0.5 / 16, 0.5)
    cur, prev = traj.states[-1], traj.states[-2]
    rec = compute_sigma(s, cur.w, prev.w, traj.tau, prob.f, cur.t, "lumped")
    scale = 1 + norm(rec.sigma) * (1 + norm(cur.w))
    comp, neg = est.complementarity_terms(rec, cur.w, cur.chi, 0.3)
    assert neg <= 1e-9 * scale
    # fully active: w = chi gives a zero factor
    comp0, _ = est.complementarity_terms(rec, cur.chi, cur.chi, 0.3)
    assert comp0 <= 1e-14
    assert est.complementarity_terms(rec, cur.w, cur.chi, 0.3, W_pairing=-2.5)[1] == 2.5


def test_complementarity_inactive():
    prob = benchmark("heat_smooth")
    s = build_space(build_structured_mesh(4), 1)
    traj = run_trajectory(prob, s, 0.5 / 8, 0.5)
    cur, prev = traj.states[-1], traj.states[-2]
    rec = compute_sigma(s, cur.w, prev.w, traj.tau, prob.f, cur.t, "consistent")
    comp, neg = est.complementarity_terms(rec, cur.w, cur.chi, 1.0)
    scale = 1 + norm(cur.w - cur.chi)
    assert comp <= 1e-9 * scale and neg <= 1e-9 * scale


def test_accumulate_examples():
    assert est.accumulate(np.ones(4), 0.25)[-1] == pytest.approx(1.0, abs=1e-15)
    assert not np.any(est.accumulate(np.zeros(5), 0.1))
    t = 0.1 * np.arange(1, 11)
    assert est.accumulate(t, 0.1)[-1] == pytest.approx(0.55, abs=1e-14)


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=50),
       st.floats(1e-6, 1.0))
def test_accumulate_monotone(values, tau):
    acc = est.accumulate(values, tau)
    assert np.all(np.diff(acc) >= 0)


ZERO_ACC = {k: 0.0 for k in est.ACCUMULATED_KEYS}
ZERO_INIT = {k: 0.0 for k in est.INITIAL_KEYS}


def test_total_bound_zero_and_single():
    assert est.total_bound(ZERO_ACC, ZERO_INIT, 1).total == 0.0
    acc = dict(ZERO_ACC, signeg_dual_sq=0.09)
    assert est.total_bound(acc, ZERO_INIT, 1).total == pytest.approx(0.3, abs=1e-15)
    b = est.total_bound(dict(ZERO_ACC, eta0=1.0), ZERO_INIT, 2)
    assert b.total == 0.5 and b.regime == "k>=2"


def test_total_bound_errors():
    acc = dict(ZERO_ACC)
    del acc["comp"]
    with pytest.raises(InvalidArgument):
        est.total_bound(acc, ZERO_INIT, 1)
    with pytest.raises(InvalidArgument):
        est.total_bound(dict(ZERO_ACC, neg=-1.0), ZERO_INIT, 1)


@given(st.lists(st.floats(0, 1e3, allow_nan=False), min_size=8, max_size=8))
def test_total_bound_recombines(values):
    keys = est.ACCUMULATED_KEYS + est.INITIAL_KEYS
    parts = dict(zip(keys, values))
    b = est.total_bound({k: parts[k] for k in est.ACCUMULATED_KEYS},
                        {k: parts[k] for k in est.INITIAL_KEYS}, 1)
    assert b.recombine() == pytest.approx(b.total, rel=1e-14, abs=1e-300)
    expected = (np.sqrt(parts["signeg_dual_sq"]) + np.sqrt(parts["comp"]) + np.sqrt(parts["neg"])
                + np.sqrt(parts["coupling"]) + 0.5 * parts["eta0"] + np.sqrt(parts["eta_dt_sq"])
                + 0.5 * parts["init_l2"] + 0.5 * parts["eta0_init"])
    assert b.total == pytest.approx(expected, rel=1e-13, abs=1e-300)
