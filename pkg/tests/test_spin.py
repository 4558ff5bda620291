"""Static spectrum layer: bare and driven Hamiltonians, dressed-state
labeling, sweet-spot search, RF matrix element.

Reference values in this file were computed independently from the
2x2 block reduction (symmetric/antisymmetric basis) before the module
was written; they are frozen here on purpose.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsim.exceptions import BracketError, DegenerateLabelingError
from dsim.spin import (
    A_HF_DEFAULT,
    B_Z_DEFAULT,
    D_GS,
    GAMMA_E,
    NuclearConfig,
    PhysicalConstants,
    bare_spectrum,
    build_bare_hamiltonian,
    build_driven_hamiltonian,
    dressed_spectrum,
    find_sweet_spot_ratio,
    gap_sensitivity,
    ket,
    rf_matrix_element,
)

# closed-form oracles, frozen
EIGS_04_16 = (-0.9489125293076052, 0.4, 1.3489125293076052)
W_DG_04_16 = 1.3489125293076052
W_DG_2_8 = 6.744562646538029
RF_ELEMENT_04_16 = 0.6426205505756499
POP_G0_04_16 = 0.5870388279778491
SWEET_RATIO_CLOSED = 4.06020706051287  # 2**0.75 * (sqrt(2) + 1)


def test_default_constants():
    assert D_GS == 2870.0
    assert GAMMA_E == 2.802
    assert B_Z_DEFAULT == 12.0
    assert A_HF_DEFAULT == 2.16


def test_bare_transition_frequencies():
    sp = bare_spectrum(PhysicalConstants())
    assert sp.w_01 == pytest.approx(2903.624, abs=1e-9)
    assert sp.w_0m1 == pytest.approx(2836.376, abs=1e-9)


def test_bare_hyperfine_shift():
    consts = PhysicalConstants()
    up = bare_spectrum(consts, m_i=1)
    down = bare_spectrum(consts, m_i=-1)
    assert up.w_01 - bare_spectrum(consts).w_01 == pytest.approx(2.16, abs=1e-12)
    assert down.w_01 - bare_spectrum(consts).w_01 == pytest.approx(-2.16, abs=1e-12)


def test_bare_hamiltonian_is_diagonal():
    h = build_bare_hamiltonian(PhysicalConstants(), b=0.3, m_i=1)
    assert np.allclose(h, np.diag(np.diag(h)))


def test_driven_eigenvalues_at_paper_point():
    h = build_driven_hamiltonian(0.4, 1.6)
    eigs = np.linalg.eigvalsh(h)
    assert np.allclose(eigs, EIGS_04_16, atol=1e-12)


def test_driven_hamiltonian_matrix_elements():
    h = build_driven_hamiltonian(0.4, 1.6, b=0.1, phases=(0.3, -0.2))
    assert h[0, 0] == pytest.approx(0.4 + GAMMA_E * 0.1)
    assert h[2, 2] == pytest.approx(0.4 - GAMMA_E * 0.1)
    assert h[1, 1] == 0.0
    assert h[1, 0] == pytest.approx(0.8 * np.exp(0.3j))
    assert h[1, 2] == pytest.approx(0.8 * np.exp(-0.2j))


@given(
    delta=st.floats(-3.0, 3.0),
    omega=st.floats(0.0, 10.0),
    b=st.floats(-0.5, 0.5),
    phi1=st.floats(-math.pi, math.pi),
    phi2=st.floats(-math.pi, math.pi),
)
@settings(max_examples=60, deadline=None)
def test_driven_hamiltonian_hermitian(delta, omega, b, phi1, phi2):
    h = build_driven_hamiltonian(delta, omega, b=b, phases=(phi1, phi2))
    assert np.allclose(h, h.conj().T, atol=1e-14)


def test_dressed_gap_at_both_paper_points():
    assert dressed_spectrum(0.4, 1.6).w_dg == pytest.approx(W_DG_04_16, rel=1e-12)
    assert dressed_spectrum(2.0, 8.0).w_dg == pytest.approx(W_DG_2_8, rel=1e-12)


def test_dressed_dark_state_is_antisymmetric():
    sp = dressed_spectrum(0.4, 1.6)
    anti = np.array([1.0, 0.0, -1.0]) / math.sqrt(2.0)
    assert abs(abs(np.vdot(anti, sp.state_d)) - 1.0) < 1e-12
    assert sp.e_d == pytest.approx(0.4, abs=1e-12)


def test_dressed_ground_state_zero_overlap():
    sp = dressed_spectrum(0.4, 1.6)
    assert abs(sp.state_g[1]) ** 2 == pytest.approx(POP_G0_04_16, abs=1e-12)


def test_dressed_labeling_with_field_offset():
    # a small b must not swap labels; d keeps the largest anti overlap
    sp = dressed_spectrum(0.4, 1.6, b=0.05)
    anti = np.array([1.0, 0.0, -1.0]) / math.sqrt(2.0)
    assert abs(np.vdot(anti, sp.state_d)) > 0.9
    assert sp.e_g <= sp.e_d <= sp.e_e


def test_dressed_degenerate_labeling_error():
    with pytest.raises(DegenerateLabelingError):
        dressed_spectrum(0.4, 0.0)


@given(
    delta=st.floats(0.05, 4.0),
    ratio=st.floats(0.5, 10.0),
)
@settings(max_examples=60, deadline=None)
def test_dressed_scaling_invariance(delta, ratio):
    # the eigenproblem scales uniformly with delta at fixed omega/delta
    base = dressed_spectrum(1.0, ratio)
    scaled = dressed_spectrum(delta, ratio * delta)
    assert scaled.w_dg == pytest.approx(delta * base.w_dg, rel=1e-9)


@given(
    delta=st.floats(0.05, 4.0),
    omega=st.floats(0.1, 12.0),
    b=st.floats(-0.3, 0.3),
)
@settings(max_examples=60, deadline=None)
def test_dressed_states_orthonormal(delta, omega, b):
    sp = dressed_spectrum(delta, omega, b=b)
    basis = np.column_stack([sp.state_g, sp.state_d, sp.state_e])
    assert np.allclose(basis.conj().T @ basis, np.eye(3), atol=1e-10)


def test_gap_sensitivity_first_order_vanishes_at_zero_field():
    # all three levels depend on b only through b^2
    assert abs(gap_sensitivity(0.4, 1.6, 0.0, order=1)) < 1e-7
    assert abs(gap_sensitivity(2.0, 8.0, 0.0, order=1)) < 1e-7


def test_gap_sensitivity_curvature_sign_flip():
    ratio = find_sweet_spot_ratio(0.4)
    below = gap_sensitivity(0.4, 0.95 * ratio * 0.4, 0.0, order=2)
    above = gap_sensitivity(0.4, 1.05 * ratio * 0.4, 0.0, order=2)
    assert below < 0.0 < above


def test_sweet_spot_ratio_matches_closed_form():
    for delta in (0.4, 2.0):
        ratio = find_sweet_spot_ratio(delta)
        assert ratio == pytest.approx(SWEET_RATIO_CLOSED, abs=1e-3)


def test_sweet_spot_bracket_error():
    with pytest.raises(BracketError):
        find_sweet_spot_ratio(0.4, bracket=(8.0, 9.0))


def test_rf_matrix_element_paper_point():
    assert rf_matrix_element(0.4, 1.6) == pytest.approx(RF_ELEMENT_04_16, abs=1e-12)


def test_rf_matrix_element_strong_drive_limit():
    assert rf_matrix_element(0.4, 4000.0) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-6)


def test_rf_matrix_element_ratio_invariance():
    assert rf_matrix_element(0.4, 1.6) == pytest.approx(
        rf_matrix_element(2.0, 8.0), rel=1e-12
    )


def test_nuclear_config_validation():
    with pytest.raises(ValueError):
        NuclearConfig(projections=(0, 0), weights=(0.5, 0.5))
    with pytest.raises(ValueError):
        NuclearConfig(projections=(0,), weights=(0.7,))
    mix = NuclearConfig.mixture()
    assert sum(mix.weights) == pytest.approx(1.0)
    assert NuclearConfig.single(1).projections == (1,)


def test_ket_basis_order():
    # index order is m_s = +1, 0, -1
    assert np.array_equal(ket(+1), np.array([1, 0, 0], complex))
    assert np.array_equal(ket(0), np.array([0, 1, 0], complex))
    assert np.array_equal(ket(-1), np.array([0, 0, 1], complex))
