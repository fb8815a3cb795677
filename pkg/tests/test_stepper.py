import math
import time

import numpy as np
import pytest

from subdiff_cq.experiments import preset_problem, reference_solution
from subdiff_cq.fem1d import Coefficient, Mesh1D, NodalData, assemble_mass, l2_norm
from subdiff_cq.oracle import SineMode, exact_homogeneous, implicit_euler_heat
from subdiff_cq.stepper import (
    SCHEMES,
    Problem,
    run_backward_euler,
    run_corrected_bdf2,
    run_scheme,
    run_vanilla_bdf2,
)


def stationary_problem(alpha, a):
    return Problem(alpha, 1.0, a, f=lambda x, t: np.full(np.shape(x), 2.0 * (2.0 + math.cos(t))),
                   u0=NodalData(lambda x: x * (1.0 - x)))


def sine_problem(alpha):
    return Problem(alpha, 1.0, Coefficient.constant(1.0), u0=SineMode(1))


@pytest.mark.parametrize("scheme", SCHEMES)
def test_zero_data_gives_zero_trajectory(scheme, small_mesh):
    traj = run_scheme(scheme, preset_problem("zero"), small_mesh, 25)
    assert traj.snapshots.shape == (26, small_mesh.n_interior)
    assert not np.any(traj.snapshots)


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9])
def test_reproduces_stationary_solution(scheme, alpha, time_coefficient):
    mesh = Mesh1D(100)
    mass = assemble_mass(mesh)
    u0 = mesh.interior_nodes * (1 - mesh.interior_nodes)
    traj = run_scheme(scheme, stationary_problem(alpha, time_coefficient), mesh, 150)
    assert max(l2_norm(mesh, mass, u - u0) for u in traj.snapshots) <= 1e-9


def test_deterministic(small_mesh):
    p = preset_problem("b", 0.4)
    one = run_corrected_bdf2(p, small_mesh, 70).snapshots
    two = run_corrected_bdf2(p, small_mesh, 70).snapshots
    assert one.tobytes() == two.tobytes()


def test_correction_vanishes_for_compatible_data(small_mesh):
    p = preset_problem("c", 0.5)
    assert run_vanilla_bdf2(p, small_mesh, 90).snapshots.tobytes() == \
        run_corrected_bdf2(p, small_mesh, 90).snapshots.tobytes()


@pytest.mark.parametrize("scheme", SCHEMES)
def test_blocked_history_matches_direct_sum(scheme, small_mesh):
    p = preset_problem("a", 0.3)
    blocked = run_scheme(scheme, p, small_mesh, 300, keep=[]).final
    direct = run_scheme(scheme, p, small_mesh, 300, keep=[], history="direct").final
    np.testing.assert_allclose(blocked, direct, rtol=1e-12, atol=1e-14)


def test_checkpoints(small_mesh):
    p = preset_problem("b", 0.5)
    full = run_corrected_bdf2(p, small_mesh, 20)
    part = run_corrected_bdf2(p, small_mesh, 20, keep=[3, 7])
    assert part.steps.tolist() == [3, 7, 20]
    np.testing.assert_array_equal(part.at_step(7), full.at_step(7))
    np.testing.assert_array_equal(part.final, full.final)
    assert full.times[-1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        run_corrected_bdf2(p, small_mesh, 20, keep=[21])


def test_heat_limit_against_implicit_euler():
    # before the algebraic tail of E_alpha takes over (t <~ 0.3 for the first mode)
    mesh = Mesh1D(100)
    mass = assemble_mass(mesh)
    u = run_backward_euler(sine_problem(0.999).with_(T=0.2), mesh, 200, keep=[]).final
    heat = implicit_euler_heat(mesh, Coefficient.constant(1.0), SineMode(1), 0.2, 200)
    assert l2_norm(mesh, mass, u - heat) / l2_norm(mesh, mass, heat) <= 1e-2


def test_near_heat_order_keeps_fractional_tail():
    # at t = 1, E_0.999(-pi^2) is 2.6 times exp(-pi^2); the scheme must follow the former
    mesh = Mesh1D(100)
    mass = assemble_mass(mesh)
    u = run_backward_euler(sine_problem(0.999), mesh, 400, keep=[]).final
    exact = exact_homogeneous(mesh, 1.0, 0.999, SineMode(1), 1.0, modes=1, semidiscrete=True)
    heat = implicit_euler_heat(mesh, Coefficient.constant(1.0), SineMode(1), 1.0, 400)
    assert l2_norm(mesh, mass, u - exact) < 0.1 * l2_norm(mesh, mass, u - heat)


def test_heat_limit_tracks_the_fractional_order():
    # the gap to the heat equation closes as alpha -> 1
    mesh = Mesh1D(60)
    mass = assemble_mass(mesh)
    heat = implicit_euler_heat(mesh, Coefficient.constant(1.0), SineMode(1), 1.0, 100)
    gaps = [l2_norm(mesh, mass, run_backward_euler(sine_problem(al), mesh, 100, keep=[]).final - heat)
            for al in (0.99, 0.999, 0.9999)]
    assert gaps[0] > gaps[1] > gaps[2]


def observed_orders(errors):
    return [math.log2(e0 / e1) for e0, e1 in zip(errors[:-1], errors[1:])]


def test_orders_against_semidiscrete_oracle():
    mesh = Mesh1D(100)
    mass = assemble_mass(mesh)
    exact = exact_homogeneous(mesh, 1.0, 0.5, SineMode(1), 1.0, modes=1, semidiscrete=True)
    ns = (40, 80, 160)
    errs = {s: [l2_norm(mesh, mass, run_scheme(s, sine_problem(0.5), mesh, n, keep=[]).final - exact)
                for n in ns] for s in SCHEMES}
    assert min(observed_orders(errs["corrected"])) > 1.9
    assert 0.9 < observed_orders(errs["vanilla"])[-1] < 1.1
    assert 0.9 < observed_orders(errs["backward_euler"])[-1] < 1.1


def test_backward_euler_first_order_on_singular_data():
    mesh = Mesh1D(200)
    mass = assemble_mass(mesh)
    p = preset_problem("a", 0.5)
    ref = reference_solution(p, mesh, 5000)
    errs = [l2_norm(mesh, mass, run_backward_euler(p, mesh, n, keep=[]).final - ref) for n in (40, 80, 160)]
    assert observed_orders(errs)[-1] == pytest.approx(1.0, abs=0.1)


def test_problem_validation(time_coefficient):
    with pytest.raises(ValueError):
        Problem(1.0, 1.0, time_coefficient)
    with pytest.raises(ValueError):
        Problem(0.5, 0.0, time_coefficient)
    with pytest.raises(ValueError):
        run_scheme("bdf3", preset_problem("a"), Mesh1D(4), 3)
    with pytest.raises(ValueError):
        run_corrected_bdf2(preset_problem("a"), Mesh1D(4), 0)
    with pytest.raises(ValueError):
        run_corrected_bdf2(preset_problem("a"), Mesh1D(4), 3, history="fast")


@pytest.mark.slow
def test_history_cost_is_quadratic_in_steps():
    mesh = Mesh1D(1000)
    p = preset_problem("a", 0.5)
    ns = [100, 200, 400, 800, 1600]
    best = dict.fromkeys(ns, math.inf)
    # round-robin repeats so a burst of load from other processes hits every N alike;
    # the minimum filters out what remains
    for _ in range(6):
        for n in ns:
            start = time.process_time()
            run_corrected_bdf2(p, mesh, n, keep=[], history="direct")
            best[n] = min(best[n], time.process_time() - start)
    secs = [best[n] for n in ns]
    exponent = np.polyfit(np.log(ns), np.log(secs), 1)[0]
    assert 1.8 <= exponent <= 2.2, (exponent, secs)
