"""Spin-1 ground-state triplet: operators, bare and dressed spectra.

The basis ordering is {|+1>, |0>, |-1>} throughout the package.  Energies
are in MHz, magnetic fields in Gauss, times in microseconds; propagators
are exp(-2j*pi*H*t), so a 1 MHz splitting advances its relative phase by
2*pi per microsecond.

Two Hamiltonians appear here.  The bare one is the static zero-field
splitting plus Zeeman and hyperfine shifts, diagonal in the basis above:

    H = D*Sz^2 + gamma_e*(B_z + b)*Sz + A_hf*m_I*Sz

The driven one lives in the interaction frame of two microwave tones
addressing |0>-|+1> and |0>-|-1> with common detuning Delta and Rabi
frequency Omega:

    H = sum_{i=+1,-1} (Delta + gamma_e*b*i)|i><i|
        + (Omega/2)(e^{i phi_i}|0><i| + h.c.)

Its eigenstates at b=0 are the dressed triple |g>, |d>, |e|: the
antisymmetric combination (|+1>-|-1>)/sqrt(2) sits at energy Delta and is
labeled |d>, while |0> hybridizes with the symmetric combination through
the coupling c = Omega/sqrt(2), giving

    E_{g,e} = (Delta -+ sqrt(Delta^2 + 2*Omega^2)) / 2.

The gap w_dg = E_d - E_g is the protected-qubit splitting.  Its curvature
with respect to b vanishes at a magic drive ratio Omega/Delta near 4.06,
where the leading field dependence is quartic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .exceptions import BracketError, DegenerateLabelingError

# Default constants, MHz / Gauss units.
D_GS = 2870.0        # zero-field splitting
GAMMA_E = 2.802      # electron gyromagnetic ratio, MHz per Gauss
B_Z_DEFAULT = 12.0   # static bias field, Gauss
A_HF_DEFAULT = 2.16  # hyperfine splitting to the I=1 nucleus, MHz

_EIG_DEGENERACY_TOL = 1e-9


def spin_z() -> np.ndarray:
    """S_z for spin 1 in the {|+1>, |0>, |-1>} basis."""
    return np.diag([1.0, 0.0, -1.0]).astype(complex)


def spin_z2() -> np.ndarray:
    """S_z^2 for spin 1."""
    return np.diag([1.0, 0.0, 1.0]).astype(complex)


def ket(index: int) -> np.ndarray:
    """Basis ket by m_S value: ket(+1), ket(0), ket(-1)."""
    vec = np.zeros(3, complex)
    vec[{+1: 0, 0: 1, -1: 2}[index]] = 1.0
    return vec


def is_hermitian(matrix: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(matrix - matrix.conj().T) <= tol))


@dataclass(frozen=True)
class PhysicalConstants:
    """Static system constants.

    d_gs     zero-field splitting, MHz
    gamma_e  electron gyromagnetic ratio, MHz/G
    b_z      applied bias field along the symmetry axis, G
    a_hf     hyperfine splitting per nuclear projection, MHz
    """

    d_gs: float = D_GS
    gamma_e: float = GAMMA_E
    b_z: float = B_Z_DEFAULT
    a_hf: float = A_HF_DEFAULT

    def __post_init__(self) -> None:
        if self.d_gs <= 0:
            raise ValueError("d_gs must be positive")
        if self.gamma_e <= 0:
            raise ValueError("gamma_e must be positive")
        if self.b_z < 0:
            raise ValueError("b_z must be non-negative")
        # Both transition frequencies must stay positive for every nuclear
        # projection, otherwise the rotating-frame construction is invalid.
        if self.d_gs - self.gamma_e * self.b_z - abs(self.a_hf) <= 0:
            raise ValueError("Zeeman plus hyperfine shift exceeds the zero-field splitting")


@dataclass(frozen=True)
class NuclearConfig:
    """Nuclear spin projections contributing to an ensemble average."""

    projections: tuple[int, ...] = (-1, 0, 1)
    weights: tuple[float, ...] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self) -> None:
        if len(self.projections) != len(self.weights) or not self.projections:
            raise ValueError("projections and weights must be non-empty and equal length")
        if any(p not in (-1, 0, 1) for p in self.projections):
            raise ValueError("projections must lie in {-1, 0, +1}")
        if len(set(self.projections)) != len(self.projections):
            raise ValueError("duplicate nuclear projection")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @classmethod
    def single(cls, m_i: int) -> "NuclearConfig":
        return cls(projections=(m_i,), weights=(1.0,))

    @classmethod
    def mixture(cls) -> "NuclearConfig":
        return cls()


@dataclass(frozen=True)
class BareSpectrum:
    """Bare (undriven) level energies and transition frequencies, MHz."""

    e_plus: float
    e_zero: float
    e_minus: float
    w_01: float    # |0> -> |+1>
    w_0m1: float   # |0> -> |-1>


@dataclass(frozen=True)
class DressedSpectrum:
    """Dressed eigensystem of the driven Hamiltonian.

    Energies satisfy e_g <= e_d <= e_e.  s_overlap is |<s|g>| with
    |s> = (|+1>+|-1>)/sqrt(2); it equals the S_z matrix element between
    |g> and |d> at b=0 and controls the RF gate strength.
    """

    e_g: float
    e_d: float
    e_e: float
    w_dg: float
    w_eg: float
    state_g: np.ndarray
    state_d: np.ndarray
    state_e: np.ndarray
    s_overlap: float


def build_bare_hamiltonian(constants: PhysicalConstants, b: float = 0.0, m_i: int = 0) -> np.ndarray:
    """Static Hamiltonian D*Sz^2 + gamma_e*(B_z+b)*Sz + A_hf*m_I*Sz, MHz."""
    shift = constants.gamma_e * (constants.b_z + b) + constants.a_hf * m_i
    return np.diag([constants.d_gs + shift, 0.0, constants.d_gs - shift]).astype(complex)


def bare_spectrum(constants: PhysicalConstants, b: float = 0.0, m_i: int = 0) -> BareSpectrum:
    h = build_bare_hamiltonian(constants, b, m_i)
    e_plus, e_zero, e_minus = h[0, 0].real, h[1, 1].real, h[2, 2].real
    return BareSpectrum(e_plus, e_zero, e_minus, e_plus - e_zero, e_minus - e_zero)


def build_driven_hamiltonian(
    delta: float,
    omega: float,
    b: float = 0.0,
    phases: tuple[float, float] = (0.0, 0.0),
    gamma_e: float = GAMMA_E,
) -> np.ndarray:
    """Interaction-frame Hamiltonian for symmetric two-tone driving.

    phases are (phi_+1, phi_-1), the phase of each tone relative to its
    rotating frame.  b is the instantaneous field fluctuation in Gauss.
    """
    h = np.zeros((3, 3), complex)
    h[0, 0] = delta + gamma_e * b
    h[2, 2] = delta - gamma_e * b
    h[1, 0] = 0.5 * omega * np.exp(1j * phases[0])
    h[0, 1] = np.conj(h[1, 0])
    h[1, 2] = 0.5 * omega * np.exp(1j * phases[1])
    h[2, 1] = np.conj(h[1, 2])
    return h


def _analytic_reference_states(delta: float, omega: float) -> np.ndarray:
    """Columns (g, d, e) of the b=0 eigenbasis, from the 2x2 block reduction."""
    coupling = omega / np.sqrt(2.0)
    root = np.sqrt(delta * delta + 2.0 * omega * omega)
    lam_g = 0.5 * (delta - root)
    lam_e = 0.5 * (delta + root)
    sym = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
    anti = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    zero = np.array([0.0, 1.0, 0.0])

    def block_state(lam: float) -> np.ndarray:
        vec = coupling * zero + lam * sym
        norm = np.linalg.norm(vec)
        if norm == 0.0:  # omega == 0 and lam == 0
            vec, norm = zero, 1.0
        return vec / norm

    refs = np.empty((3, 3), complex)
    refs[:, 0] = block_state(lam_g)
    refs[:, 1] = anti
    refs[:, 2] = block_state(lam_e)
    return refs


def dressed_spectrum(
    delta: float,
    omega: float,
    b: float = 0.0,
    gamma_e: float = GAMMA_E,
) -> DressedSpectrum:
    """Eigen-decompose the driven Hamiltonian and label states g, d, e.

    Labels follow the analytic b=0 assignment: |d> is the antisymmetric
    combination at energy Delta, |g> and |e> are the lower and upper
    hybridized states.  For b != 0 the numeric eigenvectors are matched to
    those references by maximal overlap.  Raises DegenerateLabelingError
    when eigenvalues coincide within 1e-9 or the overlap assignment is
    ambiguous.
    """
    if omega < 0:
        raise ValueError("omega must be non-negative")
    if omega == 0.0 and b == 0.0:
        raise DegenerateLabelingError("dressed labels undefined with the drive off at b=0")

    h = build_driven_hamiltonian(delta, omega, b, gamma_e=gamma_e)
    energies, vectors = np.linalg.eigh(h)

    scale = max(np.max(np.abs(energies)), 1.0)
    gaps = np.diff(np.sort(energies))
    if np.any(gaps < _EIG_DEGENERACY_TOL * scale):
        raise DegenerateLabelingError("two dressed eigenvalues coincide within 1e-9")

    refs = _analytic_reference_states(delta, omega)
    overlap = np.abs(refs.conj().T @ vectors)  # overlap[label, eigenvector]

    best_perm, best_score, second_score = None, -np.inf, -np.inf
    for perm in itertools.permutations(range(3)):
        score = overlap[0, perm[0]] * overlap[1, perm[1]] * overlap[2, perm[2]]
        if score > best_score:
            best_perm, best_score, second_score = perm, score, best_score
        elif score > second_score:
            second_score = score
    if best_perm is None or best_score - second_score < 1e-9:
        raise DegenerateLabelingError("overlap assignment between dressed labels is ambiguous")

    i_g, i_d, i_e = best_perm
    sym = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
    state_g = vectors[:, i_g].copy()
    state_d = vectors[:, i_d].copy()
    state_e = vectors[:, i_e].copy()
    return DressedSpectrum(
        e_g=float(energies[i_g]),
        e_d=float(energies[i_d]),
        e_e=float(energies[i_e]),
        w_dg=float(energies[i_d] - energies[i_g]),
        w_eg=float(energies[i_e] - energies[i_g]),
        state_g=state_g,
        state_d=state_d,
        state_e=state_e,
        s_overlap=float(np.abs(sym @ state_g)),
    )


def gap_sensitivity(
    delta: float,
    omega: float,
    b0: float = 0.0,
    order: int = 1,
    step: float = 1e-3,
    gamma_e: float = GAMMA_E,
) -> float:
    """Derivative of the gap w_dg with respect to b at b0, MHz/G^order.

    Central differences with one Richardson halving; order 1 or 2.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")

    def gap(b: float) -> float:
        return dressed_spectrum(delta, omega, b, gamma_e=gamma_e).w_dg

    def estimate(h: float) -> float:
        if order == 1:
            return (gap(b0 + h) - gap(b0 - h)) / (2.0 * h)
        return (gap(b0 + h) - 2.0 * gap(b0) + gap(b0 - h)) / (h * h)

    coarse, fine = estimate(step), estimate(step / 2.0)
    return (4.0 * fine - coarse) / 3.0


def find_sweet_spot_ratio(
    delta: float,
    lo: float = 2.0,
    hi: float = 8.0,
    tol: float = 1e-4,
    gamma_e: float = GAMMA_E,
) -> float:
    """Drive ratio Omega/Delta where the gap curvature d^2 w_dg / db^2 vanishes.

    Brackets on [lo, hi] and raises BracketError if the curvature does not
    change sign there.
    """
    if delta <= 0:
        raise ValueError("delta must be positive to define the ratio")
    from scipy.optimize import brentq

    def curvature(ratio: float) -> float:
        return gap_sensitivity(delta, ratio * delta, 0.0, order=2, gamma_e=gamma_e)

    c_lo, c_hi = curvature(lo), curvature(hi)
    if np.sign(c_lo) == np.sign(c_hi):
        raise BracketError(f"curvature does not change sign on [{lo}, {hi}]")
    return float(brentq(curvature, lo, hi, xtol=tol))


def rf_matrix_element(delta: float, omega: float, gamma_e: float = GAMMA_E) -> float:
    """|<d|S_z|g>| at b=0, the dressed-gate coupling strength.

    S_z maps the symmetric combination onto the antisymmetric one with unit
    coefficient, so this equals the s_overlap of the dressed spectrum.  It
    tends to 1/sqrt(2) for Omega >> |Delta| and vanishes as Omega -> 0.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    spec = dressed_spectrum(delta, omega, 0.0, gamma_e=gamma_e)
    return float(np.abs(spec.state_d.conj() @ spin_z() @ spec.state_g))
