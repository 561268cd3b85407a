"""Convolution-quadrature weights, time march, and energy sum."""

import numpy as np
import pytest

from wavebem.cq import (
    TimeMarchResult,
    bdf_delta,
    contour_radius,
    cq_march,
    cq_weights,
    reconstruct_time_field,
    time_domain_coercivity_sum,
)
from wavebem.mesh import MaterialParams, icosphere
from wavebem.operators import assemble_p0_mass
from wavebem.signals import CausalPulse, point_source_field
from wavebem.solver import NumericsError, TransmissionProblem
from wavebem.tracespace import classify_dofs

SOURCE = (0.0, 0.0, 2.0)


# ---------------------------------------------------------------------------
# generating polynomials and weights
# ---------------------------------------------------------------------------


def test_bdf_delta_values():
    assert bdf_delta("BDF1", 1.0) == 0.0
    assert bdf_delta("BDF2", 1.0) == 0.0
    assert bdf_delta("BDF1", 0.0) == 1.0
    assert bdf_delta("BDF2", 0.0) == 1.5
    z = 0.3 + 0.4j
    assert bdf_delta("BDF2", z) == pytest.approx(1.5 - 2 * z + 0.5 * z * z)
    with pytest.raises(ValueError, match="scheme"):
        bdf_delta("RK4", 1.0)


def test_contour_radius_guards():
    n = 40
    assert contour_radius(n) == pytest.approx(
        np.finfo(float).eps ** (1.0 / (2 * n + 2))
    )
    with pytest.raises(ValueError, match="nonnegative"):
        contour_radius(-1)
    with pytest.raises(ValueError, match="radius"):
        cq_weights("BDF1", lambda s: s, 0.1, 8, lam=1.5)


def test_weights_of_identity_symbol_are_a_unit_impulse():
    w = cq_weights("BDF2", lambda s: 1.0 + 0j, 0.05, 40)
    assert w.shape == (41,)
    assert w[0] == pytest.approx(1.0, abs=1e-8)
    assert np.abs(w[1:]).max() < 1e-8


def test_weights_of_s_are_the_backward_difference():
    dt = 0.05
    w = cq_weights("BDF1", lambda s: s, dt, 40)
    ref = np.zeros(41)
    ref[0], ref[1] = 1.0 / dt, -1.0 / dt
    # aliasing floor of the scaled contour: ~sqrt(eps) relative to 1/dt
    np.testing.assert_allclose(w.real, ref, atol=5e-7)
    np.testing.assert_allclose(w.imag, np.zeros(41), atol=5e-7)


def test_weights_of_inverse_s_integrate_like_implicit_euler():
    # F(s) = 1/s convolved with samples is the BDF1 quadrature of the
    # running integral: y_n = y_{n-1} + dt f_n.
    dt, n = 0.05, 40
    w = cq_weights("BDF1", lambda s: 1.0 / s, dt, n)
    ts = dt * np.arange(n + 1)
    f = np.sin(3 * ts) ** 2
    conv = np.array([np.sum(w[: k + 1].real * f[k::-1]) for k in range(n + 1)])
    rect = dt * np.concatenate([[0.0], np.cumsum(f[1:])])
    np.testing.assert_allclose(conv, rect, atol=1e-6)


def test_weights_of_matrix_symbol_stack_entrywise():
    dt, n = 0.1, 12

    def symbol(s):
        return np.array([[1.0, 1.0 / s], [0.0, s]])

    w = cq_weights("BDF2", symbol, dt, n)
    assert w.shape == (n + 1, 2, 2)
    w_inv = cq_weights("BDF2", lambda s: 1.0 / s, dt, n)
    w_s = cq_weights("BDF2", lambda s: s, dt, n)
    np.testing.assert_allclose(w[:, 0, 1], w_inv, atol=1e-12)
    np.testing.assert_allclose(w[:, 1, 1], w_s, atol=1e-12)
    np.testing.assert_allclose(w[:, 1, 0], np.zeros(n + 1), atol=1e-12)


# ---------------------------------------------------------------------------
# march setup helpers
# ---------------------------------------------------------------------------


def sound_soft_problem(level, horizon, n_steps, onset_steps=0):
    mesh = icosphere(level)
    tags = mesh.part.copy()
    tags[:] = "D"
    mesh.part = tags
    surf = classify_dofs(mesh).surfaces[0]
    dt = horizon / n_steps
    pulse = CausalPulse(onset=onset_steps * dt, decay=0.15, power=8)
    profile = np.zeros(mesh.n_vertices)
    r = np.linalg.norm(mesh.vertices - np.asarray(SOURCE), axis=1)
    profile[surf.global_vertex_ids] = 1.0 / (4 * np.pi * r[surf.global_vertex_ids])

    def g(t):
        return profile * pulse(t)

    problem = TransmissionProblem(
        mesh=mesh,
        mat=MaterialParams(),
        horizon=horizon,
        dt=dt,
        g_dirichlet=g,
    )
    return problem, surf


@pytest.fixture(scope="module")
def causal_march():
    problem, surf = sound_soft_problem(1, 2.0, 32, onset_steps=10)
    return cq_march(problem, contour_oversample=2), problem, surf


# ---------------------------------------------------------------------------
# march guards and fast paths
# ---------------------------------------------------------------------------


def test_zero_data_march_skips_all_solves():
    mesh = icosphere(0)
    problem = TransmissionProblem(
        mesh=mesh, mat=MaterialParams(), horizon=1.0, dt=0.25
    )
    result = cq_march(problem)
    assert result.stats["n_solves"] == 0.0
    np.testing.assert_array_equal(result.traces, np.zeros_like(result.traces))
    assert result.max_residual == 0.0
    assert time_domain_coercivity_sum(result) == 0.0
    assert result.n_steps == 4
    np.testing.assert_allclose(result.times, 0.25 * np.arange(5))


def test_march_rejects_data_that_starts_hot():
    mesh = icosphere(0)
    problem = TransmissionProblem(
        mesh=mesh,
        mat=MaterialParams(),
        horizon=1.0,
        dt=0.25,
        g_dirichlet=lambda t: np.ones(mesh.n_vertices),
    )
    with pytest.raises(ValueError, match="vanish at t = 0"):
        cq_march(problem)


def test_march_rejects_wrong_sample_shape():
    mesh = icosphere(0)
    problem = TransmissionProblem(
        mesh=mesh,
        mat=MaterialParams(),
        horizon=1.0,
        dt=0.25,
        d_neumann=lambda t: np.zeros(3),
    )
    with pytest.raises(ValueError, match="supplier returned shape"):
        cq_march(problem)


def test_march_rejects_bad_oversampling():
    mesh = icosphere(0)
    problem = TransmissionProblem(
        mesh=mesh, mat=MaterialParams(), horizon=1.0, dt=0.25
    )
    with pytest.raises(ValueError, match="oversampling"):
        cq_march(problem, contour_oversample=0)


def test_march_wraps_frequency_failures_with_contour_index():
    # a large sigma0 makes the low-frequency contour points inadmissible
    mesh = icosphere(0)
    pulse = CausalPulse(onset=0.5, decay=0.2, power=4)
    problem = TransmissionProblem(
        mesh=mesh,
        mat=MaterialParams(),
        horizon=4.0,
        dt=0.5,
        g_dirichlet=lambda t: pulse(t) * np.ones(mesh.n_vertices),
        sigma0=100.0,
    )
    with pytest.raises(NumericsError, match="contour point"):
        cq_march(problem)


# ---------------------------------------------------------------------------
# causality and energy of a real march
# ---------------------------------------------------------------------------


def test_march_solution_is_causal(causal_march):
    result, problem, surf = causal_march
    n_d = surf.n_p1
    m0 = assemble_p0_mass(surf).diagonal()
    norms = np.sqrt((result.traces[:, n_d:] ** 2 * m0[None, :]).sum(axis=1))
    peak = norms.max()
    assert peak > 0.0
    # data switches on at step 10; the response through step 8 must stay
    # at the contour aliasing floor (eps-level with doubled length)
    assert norms[:9].max() <= 1e-10 * peak
    assert result.max_residual <= 1e-12
    assert result.stats["n_solves"] == float(2 * 33 // 2 + 1)


def test_march_traces_are_real_and_shaped(causal_march):
    result, problem, surf = causal_march
    assert isinstance(result, TimeMarchResult)
    assert result.traces.shape == (33, surf.n_p1 + surf.n_p0)
    assert result.traces.dtype == np.float64
    assert result.freq_traces.shape[0] == 66
    assert result.scheme == "BDF2"
    assert result.lam == pytest.approx(contour_radius(32))


def test_march_satisfies_discrete_energy_balance(causal_march):
    result, _, _ = causal_march
    # every frequency summand is nonnegative by coercivity, so the damped
    # time-domain energy sum is nonnegative without cancellation tricks
    assert np.all(result.quad_calderon - result.quad_transfer >= -1e-12)
    assert time_domain_coercivity_sum(result) > 0.0


def test_time_field_reconstruction_is_causal(causal_march):
    result, problem, surf = causal_march
    pts = np.array([[0.0, 0.0, 0.3]])
    series = reconstruct_time_field(result, problem.mesh, problem.mat, pts)
    assert series.shape == (33, 1)
    peak = np.abs(series).max()
    assert peak > 0.0
    assert np.abs(series[:9]).max() <= 1e-8 * peak


def test_time_field_of_zero_march_is_zero():
    mesh = icosphere(1)
    problem = TransmissionProblem(
        mesh=mesh, mat=MaterialParams(), horizon=1.0, dt=0.25
    )
    result = cq_march(problem)
    series = reconstruct_time_field(
        result, mesh, MaterialParams(), np.array([[0.0, 0.0, 0.2]])
    )
    np.testing.assert_array_equal(series, np.zeros((5, 1)))
