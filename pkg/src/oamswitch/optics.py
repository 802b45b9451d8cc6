"""Jones models of the optical elements in the rotation-sensing train.

Element conventions:

* ``dove_jones`` gives the polarization side effect of one Dove prism,
  ``J(alpha) = R(-alpha) diag(1, rho e^{i delta}) R(alpha)`` in the linear
  basis, where ``alpha`` is the angle between the prism axis and the
  polarization frame.  Two prisms whose axes differ by pi/2 cancel:
  ``J(alpha) J(alpha + pi/2) = rho e^{i delta} I``.
* A q-plate of order ``l`` exchanges handedness while displacing OAM:
  ``|L>|k> -> |R>|k+l>`` and ``|R>|k> -> |L>|k-l>``.
* The quarter-wave-plate + Faraday-rotator suite is non-reciprocal.  A single
  forward pass maps circular to linear, ``|R> -> |V>``, ``|L> -> |H>``; the
  reverse traversal maps ``|H> -> |R>``, ``|V> -> |L>``.  Passing forward and
  then backward therefore exchanges handedness instead of undoing itself,
  which is exactly the isolator behaviour the train relies on.
* The roof-prism composite (suite + hollow roof prism + suite) exchanges the
  linear components, ``|V> -> -|H>``, ``|H> -> |V>``, and leaves OAM alone.
  Algebraically it is the pi/2 polarization rotation that re-keys the Dove
  deflections on the return trip so they cancel pairwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .hilbert import (
    CIRCULAR,
    LINEAR,
    H,
    L,
    R,
    V,
    LinearOp,
    compose,
    pol_block_op,
    row_shift,
    rotation_op,
)

__all__ = [
    "JonesMatrix",
    "DovePrismModel",
    "QPlateModel",
    "dove_jones",
    "jones_op",
    "qplate_op",
    "dove_pair_op",
    "qwp_fr_suite_op",
    "hrp_flip_op",
    "control_phase_op",
]


@dataclass(frozen=True)
class JonesMatrix:
    """2x2 polarization transfer matrix tagged with its basis."""

    mat: np.ndarray
    basis: str = LINEAR

    def __post_init__(self) -> None:
        m = np.asarray(self.mat, dtype=complex)
        if m.shape != (2, 2):
            raise DimensionMismatch("Jones matrix must be 2x2")
        if abs(np.linalg.det(m)) > 1.0 + 1e-9:
            raise ValueError("Jones matrix determinant exceeds unit magnitude (gain element)")
        object.__setattr__(self, "mat", m)

    @property
    def unitary(self) -> bool:
        return bool(np.allclose(self.mat.conj().T @ self.mat, np.eye(2), atol=1e-12))


@dataclass(frozen=True)
class DovePrismModel:
    """One Dove prism: axis orientation plus internal-reflection deflection.

    ``delta`` is the s/p retardance (rad) and ``rho`` the s/p amplitude ratio
    of the total internal reflection.  With ``deflection`` False the prism is a
    pure transverse-mode rotator and its Jones matrix is the identity.
    """

    alpha: float = 0.0
    delta: float = 0.2
    rho: float = 0.99
    deflection: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("amplitude ratio rho must lie in (0, 1]")
        if not np.isfinite(self.delta) or not np.isfinite(self.alpha):
            raise ValueError("retardance and orientation must be finite")


@dataclass(frozen=True)
class QPlateModel:
    """Spin-orbit coupling plate of integer topological order ``l >= 1``."""

    l: int

    def __post_init__(self) -> None:
        if int(self.l) != self.l or self.l < 1:
            raise ValueError("q-plate order must be a positive integer")


def _pol_rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


def dove_jones(prism: DovePrismModel, orientation: float | None = None) -> JonesMatrix:
    """Jones matrix of one Dove prism at ``orientation`` (default: its own).

    Identity when the deflection flag is off.
    """
    if not prism.deflection:
        return JonesMatrix(np.eye(2, dtype=complex), LINEAR)
    alpha = prism.alpha if orientation is None else float(orientation)
    core = np.diag([1.0, prism.rho * np.exp(1j * prism.delta)])
    return JonesMatrix(_pol_rotation(-alpha) @ core @ _pol_rotation(alpha), LINEAR)


def jones_op(j: JonesMatrix, label: str = "jones") -> LinearOp:
    """Lift a Jones matrix to an operator on joint states (OAM untouched)."""
    mat = j.mat

    def fn(amp: np.ndarray, window) -> np.ndarray:
        return mat @ amp

    return LinearOp(label, fn=fn, unitary=j.unitary, basis_in=j.basis, basis_out=j.basis)


def qplate_op(q: QPlateModel) -> LinearOp:
    """Handedness-exchanging OAM displacement of a q-plate of order ``l``."""
    l = int(q.l)
    return pol_block_op(
        f"qplate({l})",
        {(R, L): row_shift(+l), (L, R): row_shift(-l)},
        CIRCULAR,
        shift_extent=l,
    )


def dove_pair_op(
    theta_rel: float,
    stationary: DovePrismModel,
    rotatable: DovePrismModel,
    reverse: bool = False,
) -> LinearOp:
    """One Dove-prism pair: stationary prism plus a prism at relative angle.

    The transverse mode rotates by ``2 * theta_rel``; the polarization picks
    up the product of the two prism Jones matrices.  The stationary prism sits
    at its own orientation, the rotatable one at ``alpha + theta_rel``.
    ``reverse`` swaps the traversal order of the two prisms (return trip).
    """
    ops: list[LinearOp] = []
    j_stat = dove_jones(stationary)
    j_rot = dove_jones(rotatable, rotatable.alpha + theta_rel)
    pair = (j_rot, j_stat) if reverse else (j_stat, j_rot)
    for tag, j in zip(("a", "b"), pair):
        if not np.array_equal(j.mat, np.eye(2)):
            ops.append(jones_op(j, label=f"dove-jones-{tag}"))
    ops.append(rotation_op(2.0 * theta_rel))
    return compose(ops, label=f"dove-pair({theta_rel:g})")


# QWP + Faraday rotator suite.  Forward pass converts circular to linear
# (R -> V, L -> H); the reverse traversal is the transposed map H -> R,
# V -> L because the Faraday rotation does not undo itself.

def qwp_fr_suite_op(direction: str) -> LinearOp:
    if direction == "forward":

        def fwd(amp: np.ndarray, window) -> np.ndarray:
            out = np.empty_like(amp)
            out[H] = amp[L]
            out[V] = amp[R]
            return out

        return LinearOp("qwp-fr(fwd)", fn=fwd, basis_in=CIRCULAR, basis_out=LINEAR)
    if direction == "backward":

        def bwd(amp: np.ndarray, window) -> np.ndarray:
            out = np.empty_like(amp)
            out[R] = amp[H]
            out[L] = amp[V]
            return out

        return LinearOp("qwp-fr(bwd)", fn=bwd, basis_in=LINEAR, basis_out=CIRCULAR)
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


def hrp_flip_op() -> LinearOp:
    """Linear-polarization exchange of the roof-prism composite.

    ``|V> -> -|H>``, ``|H> -> |V>``; equal to the pi/2 polarization rotation.
    OAM parity is preserved, so the accumulated geometric phase survives.
    """

    def fn(amp: np.ndarray, window) -> np.ndarray:
        out = np.empty_like(amp)
        out[V] = amp[H]
        out[H] = -amp[V]
        return out

    return LinearOp("hrp-flip", fn=fn, basis_in=LINEAR, basis_out=LINEAR)


def control_phase_op(phase: float) -> LinearOp:
    """Relative phase on the ``|R>`` control component (calibration plate)."""
    ph = np.exp(1j * float(phase))

    def fn(amp: np.ndarray, window) -> np.ndarray:
        out = amp.copy()
        out[R] = ph * out[R]
        return out

    return LinearOp(f"ctrl-phase({phase:g})", fn=fn, basis_in=CIRCULAR, basis_out=CIRCULAR)
