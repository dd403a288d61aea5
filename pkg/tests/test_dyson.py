from __future__ import annotations

import asyncio

import numpy as np
import pytest

from lib.dyson import (
    SolverOptions,
    apply_superop,
    cumulative_distribution,
    del_residual,
    density_of_states,
    density_profile,
    dM_dz,
    solve_curve,
    solve_del,
    solve_points_async,
    stability_matrix,
    with_overrides,
)
from lib.errors import ConvergenceError, DensityMassError, UsageError
from lib.linearize import SymmetrizedLinearization, product_pencil
from tests.helpers import semicircle_stieltjes

TRIVIAL = SymmetrizedLinearization(np.eye(1), ())


def test_trivial_pencil_gives_inverse_of_one_minus_z() -> None:
    solution = solve_del(TRIVIAL, 1j)

    assert solution.m11 == pytest.approx(1 / (1 - 1j), abs=1e-12)
    assert solution.residual <= 1e-11


@pytest.mark.parametrize("z", [1 + 1j, 0.2 + 0.05j, 2.5 + 0.3j, -1.5 + 2j])
def test_semicircle_matches_closed_form(semicircle_pencil, z: complex) -> None:
    solution = solve_del(semicircle_pencil, z)

    assert solution.m11 == pytest.approx(semicircle_stieltjes(z), abs=1e-8)
    assert solution.residual <= 1e-11
    assert del_residual(semicircle_pencil, solution.M, z) <= 1e-10


def test_solution_has_positive_imaginary_part(anticommutator_minimal) -> None:
    solution = solve_del(anticommutator_minimal, 0.7 + 0.01j)

    imaginary = (solution.M - solution.M.conj().T) / 2j
    assert np.linalg.eigvalsh(imaginary).min() >= -1e-10


def test_semicircle_density_at_centre(semicircle_pencil) -> None:
    assert density_of_states(semicircle_pencil, 1.0, 1e-5) == pytest.approx(1 / np.pi, abs=1e-4)


def test_product_density_matches_marchenko_pastur() -> None:
    assert density_of_states(product_pencil(1), -1.0, 1e-5) == pytest.approx(1 / (2 * np.pi), abs=1e-4)


def test_negative_imaginary_part_is_rejected(semicircle_pencil) -> None:
    with pytest.raises(UsageError, match="Im z >= 0"):
        solve_del(semicircle_pencil, 1 - 0.1j)


def test_iteration_budget_exhaustion_raises_convergence_error(anticommutator_minimal) -> None:
    options = SolverOptions(max_iterations=2, newton=False)

    with pytest.raises(ConvergenceError) as excinfo:
        solve_del(anticommutator_minimal, 0.5 + 0.001j, options)

    assert excinfo.value.exit_code == 2
    assert excinfo.value.detail["z"] == [0.5, 0.001]


def test_warm_start_reuses_previous_solution(semicircle_pencil) -> None:
    first = solve_del(semicircle_pencil, 1 + 0.5j)

    second = solve_del(semicircle_pencil, 1.01 + 0.5j, M0=first.M)

    assert second.warm_started
    assert second.m11 == pytest.approx(semicircle_stieltjes(1.01 + 0.5j), abs=1e-8)


def test_superoperator_and_stability_matrix_shapes(anticommutator_minimal) -> None:
    M = solve_del(anticommutator_minimal, 0.5 + 0.5j).M

    S = apply_superop(anticommutator_minimal, M)
    expected = sum(K @ M @ K for K in anticommutator_minimal.K)
    np.testing.assert_allclose(S, expected, atol=1e-14)
    assert stability_matrix(anticommutator_minimal, M).shape == (9, 9)


def test_derivative_matches_finite_differences(anticommutator_minimal) -> None:
    z, h = 0.4 + 0.3j, 1e-4
    M = solve_del(anticommutator_minimal, z).M
    forward = solve_del(anticommutator_minimal, z + h).M
    backward = solve_del(anticommutator_minimal, z - h).M

    np.testing.assert_allclose(dM_dz(anticommutator_minimal, M, z), (forward - backward) / (2 * h), atol=1e-6)


def test_derivative_of_trivial_pencil_is_m_squared() -> None:
    M = solve_del(TRIVIAL, 2j).M

    np.testing.assert_allclose(dM_dz(TRIVIAL, M), M @ M, atol=1e-14)


def test_curve_keeps_input_order(semicircle_pencil) -> None:
    energies = np.linspace(-0.5, 2.5, 13)

    solutions = solve_curve(semicircle_pencil, energies, 0.1, concurrency=3)

    assert [s.z.real for s in solutions] == pytest.approx(list(energies))
    for energy, solution in zip(energies, solutions):
        assert solution.m11 == pytest.approx(semicircle_stieltjes(complex(energy, 0.1)), abs=1e-8)


def test_points_async_runs_in_event_loop(semicircle_pencil) -> None:
    solutions = asyncio.run(solve_points_async(semicircle_pencil, [1 + 1j, 1 + 2j], concurrency=2))

    assert len(solutions) == 2


def test_density_profile_integrates_to_one(semicircle_pencil) -> None:
    profile = density_profile(semicircle_pencil, np.linspace(-1.5, 3.5, 401), 1e-5)

    assert profile.mass == pytest.approx(1.0, abs=5e-3)
    assert profile.cumulative()[-1] == pytest.approx(profile.mass)
    assert np.all(np.diff(profile.cumulative()) >= -1e-12)
    assert len(profile.rows(energy_shift=-1.0)) == 401
    assert profile.rows(energy_shift=-1.0)[0][0] == pytest.approx(-2.5)


def test_density_profile_rejects_unsorted_grid(semicircle_pencil) -> None:
    with pytest.raises(UsageError, match="strictly increasing"):
        density_profile(semicircle_pencil, [1.0, 0.5, 2.0], 1e-3)


def test_with_overrides_ignores_missing_values() -> None:
    options = with_overrides(SolverOptions(), tol=1e-9, damping=None)

    assert options.tol == 1e-9
    assert options.damping == 0.5


def test_derivative_finite_difference_error_shrinks_quadratically(anticommutator_minimal) -> None:
    z = 0.4 + 0.3j
    M = solve_del(anticommutator_minimal, z).M
    exact = dM_dz(anticommutator_minimal, M, z)

    def central_error(h: float) -> float:
        forward = solve_del(anticommutator_minimal, z + h).M
        backward = solve_del(anticommutator_minimal, z - h).M
        return float(np.abs((forward - backward) / (2 * h) - exact).max())

    order = np.log2(central_error(2e-2) / central_error(1e-2))

    assert order >= 1.8


def test_density_does_not_depend_on_the_linearization(anticommutator_pencil, anticommutator_minimal) -> None:
    grid = np.linspace(-2.0, 4.0, 25)

    standard = density_profile(anticommutator_pencil, grid, 1e-3)
    minimal = density_profile(anticommutator_minimal, grid, 1e-3)

    np.testing.assert_allclose(standard.rho, minimal.rho, atol=1e-8)


def test_cumulative_distribution_of_semicircle(semicircle_pencil) -> None:
    distribution = cumulative_distribution(semicircle_pencil, [0.0, 1.0, 2.5], -2.0, 4.0)

    # x = E - 1: F = 1/2 + x sqrt(4 - x^2) / (4 pi) + arcsin(x / 2) / pi
    expected = [0.5 - np.sqrt(3) / (4 * np.pi) - 1 / 6, 0.5, 0.5 + 1.5 * np.sqrt(1.75) / (4 * np.pi) + np.arcsin(0.75) / np.pi]
    assert list(distribution.values) == pytest.approx(expected, abs=1e-5)
    assert distribution.mass == pytest.approx(1.0, abs=1e-6)


def test_cumulative_distribution_handles_hard_edge() -> None:
    # internal density is the Marchenko-Pastur law reflected at 1, hard edge at E = 1
    distribution = cumulative_distribution(product_pencil(1), [0.0, 1.0], -4.5, 2.0)

    assert distribution.values[0] == pytest.approx(2 / 3 - np.sqrt(3) / (2 * np.pi), abs=1e-4)
    assert distribution.values[1] == pytest.approx(1.0, abs=1e-4)
    assert distribution([0.0, 5.0]).tolist() == pytest.approx([distribution.values[0], 1.0])


@pytest.mark.parametrize("model", ["anticommutator", "product"])
def test_density_carries_unit_mass(model: str, anticommutator_minimal) -> None:
    lin, lower, upper = (anticommutator_minimal, -3.0, 5.0) if model == "anticommutator" else (product_pencil(2), -8.0, 2.0)

    distribution = cumulative_distribution(lin, [], lower, upper)

    assert distribution.mass == pytest.approx(1.0, abs=1e-5)


def test_contour_starting_inside_the_spectrum_fails_mass_check() -> None:
    with pytest.raises(DensityMassError):
        cumulative_distribution(product_pencil(1), [0.5], 0.0, 2.0)
