"""Joint polarization-OAM state space on a truncated ladder.

Conventions used throughout the package:

* OAM amplitudes live on a finite window of integer indices
  ``[l_min, l_max]`` with a hard guard band of ``guard`` indices at each
  edge.  Operations never wrap cyclically; amplitude that would enter or
  leave through the guard band raises instead of silently corrupting the
  state.
* Polarization amplitude rows: linear basis ``(0=H, 1=V)``, circular basis
  ``(0=L, 1=R)`` with ``|R> = (|H> - i|V>)/sqrt(2)`` and
  ``|L> = (|H> + i|V>)/sqrt(2)``.
* ``rotation_op(phi)`` multiplies the amplitude at OAM index ``k`` by
  ``exp(-i*k*phi)``; it is the rotation ``exp(-i*phi*Lz)`` with hbar = 1.
* ``shift_op(d)`` raises every OAM index by ``d`` (an angular-momentum
  displacement).  With these two conventions
  ``shift(a) . rot(phi) = exp(+i*a*phi) rot(phi) . shift(a)``,
  which is the commutation phase probed by :func:`weyl_phase_check`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDistribution,
    NonNormalizable,
    ShiftIntoGuardBand,
    SupportInGuardBand,
    UnnormalizedState,
)

__all__ = [
    "LINEAR",
    "CIRCULAR",
    "H",
    "V",
    "L",
    "R",
    "OamWindow",
    "default_window",
    "JointState",
    "make_state",
    "LinearOp",
    "identity_op",
    "rotation_op",
    "shift_op",
    "oam_phase_op",
    "compose",
    "apply",
    "op_matrix",
    "overlap",
    "fidelity",
    "weyl_phase_check",
    "lz_moments",
]

LINEAR = "linear"
CIRCULAR = "circular"

# polarization row indices
H, V = 0, 1          # linear
L, R = 0, 1          # circular

# amplitudes below this are treated as exact zeros by guard-band checks
SUPPORT_ATOL = 1e-12

NORM_ATOL = 1e-10

# change of basis: (aH, aV) -> (aL, aR); row L = (1, -i)/sqrt2, row R = (1, +i)/sqrt2
_LIN_TO_CIRC = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / np.sqrt(2.0)
_CIRC_TO_LIN = _LIN_TO_CIRC.conj().T

_BASIS_CHANGE = {
    (LINEAR, CIRCULAR): _LIN_TO_CIRC,
    (CIRCULAR, LINEAR): _CIRC_TO_LIN,
}

_PURE_POL = {
    "H": (LINEAR, np.array([1.0, 0.0], dtype=complex)),
    "V": (LINEAR, np.array([0.0, 1.0], dtype=complex)),
    "L": (CIRCULAR, np.array([1.0, 0.0], dtype=complex)),
    "R": (CIRCULAR, np.array([0.0, 1.0], dtype=complex)),
}


@dataclass(frozen=True)
class OamWindow:
    """Truncated OAM ladder ``[l_min, l_max]`` with a guard band.

    Indices within ``guard`` of either edge form the guard band; the
    remaining indices are the interior.  States must be supported on the
    interior and shifts must keep them there.
    """

    l_min: int
    l_max: int
    guard: int = 8

    def __post_init__(self) -> None:
        if self.l_min >= self.l_max:
            raise ValueError(f"empty window [{self.l_min}, {self.l_max}]")
        if self.guard < 0:
            raise ValueError("guard must be nonnegative")
        if self.size < 2 * self.guard + 1:
            raise ValueError("window smaller than twice its guard band")

    @property
    def size(self) -> int:
        return self.l_max - self.l_min + 1

    @property
    def interior_min(self) -> int:
        return self.l_min + self.guard

    @property
    def interior_max(self) -> int:
        return self.l_max - self.guard

    def indices(self) -> np.ndarray:
        """All OAM indices of the window, in array order."""
        return np.arange(self.l_min, self.l_max + 1)

    def offset(self, l: int) -> int:
        """Array offset of OAM index ``l``."""
        if not self.l_min <= l <= self.l_max:
            raise DimensionMismatch(f"OAM index {l} outside window [{self.l_min}, {self.l_max}]")
        return l - self.l_min

    def in_interior(self, l: int) -> bool:
        return self.interior_min <= l <= self.interior_max


def default_window(l: int, extent: int = 0, guard: int = 8) -> OamWindow:
    """Window sized for a full switch pass on a probe of given support extent.

    The optical train displaces OAM by at most ``2*l`` away from the probe
    support, so the interior must reach ``extent + 2*l`` on both sides.
    """
    half = 2 * abs(l) + abs(extent) + guard
    return OamWindow(-half, half, guard)


@dataclass(frozen=True)
class JointState:
    """Pure joint state: 2 x N complex amplitudes over (polarization, OAM).

    ``normalized`` is a bookkeeping tag: lossy (non-unitary) operations clear
    it, and moment routines refuse untagged unnormalized input.
    """

    window: OamWindow
    basis: str
    amp: np.ndarray
    normalized: bool = True

    def __post_init__(self) -> None:
        if self.basis not in (LINEAR, CIRCULAR):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.amp.shape != (2, self.window.size):
            raise DimensionMismatch(
                f"amplitude shape {self.amp.shape} does not match window size {self.window.size}"
            )
        self.amp.flags.writeable = False

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def to_basis(self, basis: str) -> "JointState":
        if basis == self.basis:
            return self
        mat = _BASIS_CHANGE[(self.basis, basis)]
        return replace(self, basis=basis, amp=mat @ self.amp)

    def support(self) -> np.ndarray:
        """OAM indices carrying amplitude above the support tolerance."""
        mask = np.abs(self.amp).max(axis=0) > SUPPORT_ATOL
        return self.window.indices()[mask]

    def oam_probabilities(self) -> np.ndarray:
        """Marginal OAM probability over both polarization rows."""
        return np.abs(self.amp[0]) ** 2 + np.abs(self.amp[1]) ** 2


def _pol_vector(pol, basis: str | None):
    if isinstance(pol, str):
        try:
            return _PURE_POL[pol.upper()]
        except KeyError:
            raise ValueError(f"unknown polarization label {pol!r}") from None
    vec = np.asarray(pol, dtype=complex)
    if vec.shape != (2,):
        raise DimensionMismatch("polarization vector must have two components")
    if basis is None:
        raise ValueError("explicit polarization vectors need a basis")
    return basis, vec


def make_state(
    pol,
    oam_dist: Mapping[int, complex] | Iterable[tuple[int, complex]],
    window: OamWindow,
    basis: str | None = None,
) -> JointState:
    """Build a normalized product state ``|pol> (x) |oam>``.

    ``pol`` is one of the labels ``"H" | "V" | "L" | "R"`` or an explicit
    2-vector together with ``basis``.  ``oam_dist`` maps OAM index to a
    (possibly unnormalized) complex amplitude; all support must lie in the
    window interior.
    """
    basis, pvec = _pol_vector(pol, basis)
    items = list(oam_dist.items() if isinstance(oam_dist, Mapping) else oam_dist)
    if not items:
        raise EmptyDistribution("OAM distribution has no entries")
    oam = np.zeros(window.size, dtype=complex)
    for l, a in items:
        l = int(l)
        if abs(a) > SUPPORT_ATOL and not window.in_interior(l):
            raise SupportInGuardBand(
                f"OAM index {l} lies in the guard band of [{window.l_min}, {window.l_max}]"
                f" (interior [{window.interior_min}, {window.interior_max}])"
            )
        oam[window.offset(l)] += a
    nrm = np.linalg.norm(pvec) * np.linalg.norm(oam)
    if nrm <= SUPPORT_ATOL:
        raise NonNormalizable("all amplitudes vanish")
    amp = np.outer(pvec, oam) / nrm
    return JointState(window, basis, amp)


# ---------------------------------------------------------------------------
# linear operators


@dataclass(frozen=True)
class LinearOp:
    """A linear map on joint states.

    Elementary ops carry an ``fn(amp, window) -> amp`` kernel acting on the raw
    2 x N amplitude block; composites carry ``parts`` instead and are applied
    stage by stage.  ``basis_in``/``basis_out`` of ``None`` means the op is
    polarization-basis agnostic (it only touches OAM).
    """

    label: str
    fn: Callable[[np.ndarray, OamWindow], np.ndarray] | None = None
    parts: tuple["LinearOp", ...] = ()
    unitary: bool = True
    shift_extent: int = 0
    basis_in: str | None = None
    basis_out: str | None = None

    def __post_init__(self) -> None:
        if (self.fn is None) == (not self.parts):
            raise ValueError("LinearOp needs exactly one of fn or parts")


def _shift_row(vec: np.ndarray, window: OamWindow, delta: int) -> np.ndarray:
    """Shift one OAM amplitude row by ``delta`` indices, guard-checked."""
    if delta == 0:
        return vec.copy()
    hot = np.nonzero(np.abs(vec) > SUPPORT_ATOL)[0]
    if hot.size:
        idx = hot + window.l_min
        lo, hi = window.interior_min, window.interior_max
        bad = (idx < lo) | (idx > hi) | (idx + delta < lo) | (idx + delta > hi)
        if bad.any():
            culprit = int(idx[bad][0])
            raise ShiftIntoGuardBand(
                f"shift by {delta} moves amplitude at OAM {culprit} through the guard band"
            )
    out = np.zeros_like(vec)
    if delta > 0:
        out[delta:] = vec[:-delta]
    else:
        out[:delta] = vec[-delta:]
    return out


def identity_op(label: str = "identity") -> LinearOp:
    return LinearOp(label, fn=lambda amp, window: amp.copy())


def rotation_op(phi: float) -> LinearOp:
    """Physical rotation by ``phi``: amplitude at OAM ``k`` gains ``e^{-ik phi}``."""
    phi = float(phi)

    def fn(amp: np.ndarray, window: OamWindow) -> np.ndarray:
        return amp * np.exp(-1j * phi * window.indices())[None, :]

    return LinearOp(f"rot({phi:g})", fn=fn)


def shift_op(delta: int) -> LinearOp:
    """OAM ladder displacement ``|k> -> |k + delta>`` on both polarization rows."""
    delta = int(delta)

    def fn(amp: np.ndarray, window: OamWindow) -> np.ndarray:
        return np.stack([_shift_row(amp[0], window, delta), _shift_row(amp[1], window, delta)])

    return LinearOp(f"shift({delta:+d})", fn=fn, shift_extent=abs(delta))


def oam_phase_op(phase_fn: Callable[[np.ndarray], np.ndarray], label: str = "oam-phase") -> LinearOp:
    """Diagonal OAM phase ``|k> -> phase_fn(k)|k>``; phases must be unit modulus."""

    def fn(amp: np.ndarray, window: OamWindow) -> np.ndarray:
        ph = np.asarray(phase_fn(window.indices()), dtype=complex)
        return amp * ph[None, :]

    return LinearOp(label, fn=fn)


def pol_block_op(
    label: str,
    blocks: Mapping[tuple[int, int], Callable[[np.ndarray, OamWindow], np.ndarray]],
    basis: str,
    unitary: bool = True,
    shift_extent: int = 0,
) -> LinearOp:
    """Operator given by polarization blocks: ``out[po] += act(in[pi])``.

    ``blocks`` maps ``(pol_out, pol_in)`` to an action on a single OAM row.
    This covers both control-conditioned OAM evolution (diagonal blocks) and
    spin-orbit coupling elements (off-diagonal blocks).
    """
    items = tuple(blocks.items())

    def fn(amp: np.ndarray, window: OamWindow) -> np.ndarray:
        out = np.zeros_like(amp)
        for (po, pi), act in items:
            out[po] += act(amp[pi], window)
        return out

    return LinearOp(label, fn=fn, unitary=unitary, shift_extent=shift_extent,
                    basis_in=basis, basis_out=basis)


def row_chain(*steps):
    """Compose single-row actions; ``steps`` are applied left to right."""

    def act(vec: np.ndarray, window: OamWindow) -> np.ndarray:
        for s in steps:
            vec = s(vec, window)
        return vec

    return act


def row_shift(delta: int):
    return lambda vec, window: _shift_row(vec, window, delta)


def row_rotation(phi: float):
    return lambda vec, window: vec * np.exp(-1j * phi * window.indices())


def compose(ops: Sequence[LinearOp], label: str | None = None) -> LinearOp:
    """Sequential composition; ``ops[0]`` acts first."""
    ops = tuple(ops)
    if not ops:
        raise ValueError("compose needs at least one operator")
    return LinearOp(
        label or "+".join(op.label for op in ops),
        parts=ops,
        unitary=all(op.unitary for op in ops),
        shift_extent=sum(op.shift_extent for op in ops),
        basis_in=ops[0].basis_in,
        basis_out=ops[-1].basis_out,
    )


def apply(op: LinearOp, state: JointState) -> JointState:
    """Apply an operator, handling polarization-basis bookkeeping.

    The state is converted to the operator's input basis when needed.  For a
    unitary op acting on a normalized state the norm is checked to 1e-10; a
    non-unitary op clears the ``normalized`` tag.
    """
    if op.parts:
        for part in op.parts:
            state = apply(part, state)
        return state
    if op.basis_in is not None and state.basis != op.basis_in:
        state = state.to_basis(op.basis_in)
    new_amp = op.fn(state.amp, state.window)
    if new_amp.shape != state.amp.shape:
        raise DimensionMismatch(f"operator {op.label} changed amplitude shape")
    basis = op.basis_out if op.basis_out is not None else state.basis
    if op.unitary and state.normalized:
        nrm = float(np.linalg.norm(new_amp))
        if abs(nrm - 1.0) > NORM_ATOL:
            raise UnnormalizedState(f"unitary op {op.label} changed the norm to {nrm!r}")
        return JointState(state.window, basis, new_amp, normalized=True)
    return JointState(state.window, basis, new_amp, normalized=False)


def op_matrix(op: LinearOp, window: OamWindow, basis: str = CIRCULAR) -> np.ndarray:
    """Dense matrix of ``op`` on the window, polarization-major ordering.

    Column ``p * N + j`` is the image of the basis state with polarization row
    ``p`` (in ``basis``) and OAM offset ``j``.  Intended for small windows and
    cross-checks; guard violations propagate.
    """
    n = window.size
    mat = np.zeros((2 * n, 2 * n), dtype=complex)
    for p in range(2):
        for j in range(n):
            amp = np.zeros((2, n), dtype=complex)
            amp[p, j] = 1.0
            probe = JointState(window, basis, amp, normalized=True)
            image = apply(op, probe).to_basis(basis)
            mat[:, p * n + j] = image.amp.reshape(-1)
    return mat


# ---------------------------------------------------------------------------
# inner products and moments


def overlap(a: JointState, b: JointState) -> complex:
    """`<a|b>` with both states expressed in ``a``'s basis."""
    if a.window != b.window:
        raise DimensionMismatch("states live on different windows")
    b = b.to_basis(a.basis)
    return complex(np.vdot(a.amp, b.amp))


def fidelity(a: JointState, b: JointState) -> float:
    """``|<a|b>|`` after normalizing both states (global phase ignored)."""
    na, nb = a.norm(), b.norm()
    if na <= SUPPORT_ATOL or nb <= SUPPORT_ATOL:
        raise NonNormalizable("cannot compute fidelity with a zero state")
    return abs(overlap(a, b)) / (na * nb)


def weyl_phase_check(a: int, phi: float, state: JointState) -> complex:
    """Commutation phase between a ladder shift and a rotation.

    Applies ``shift(a) . rot(phi)`` and ``rot(phi) . shift(a)`` to the same
    state and returns ``<psi2|psi1>``, which equals ``exp(i*a*phi)``
    independently of the state.  The state needs interior margin ``>= |a|``.
    """
    psi1 = apply(shift_op(a), apply(rotation_op(phi), state))
    psi2 = apply(rotation_op(phi), apply(shift_op(a), state))
    return overlap(psi2, psi1)


def lz_moments(state: JointState) -> tuple[float, float]:
    """Mean and standard deviation of the OAM index (hbar = 1).

    The polarization factor is traced out.  Raises on unnormalized input.
    """
    if not state.normalized or abs(state.norm() - 1.0) > NORM_ATOL:
        raise UnnormalizedState("lz_moments requires a normalized state")
    p = state.oam_probabilities()
    ls = state.window.indices().astype(float)
    mean = float(np.dot(p, ls))
    var = float(np.dot(p, ls * ls)) - mean * mean
    return mean, float(np.sqrt(max(var, 0.0)))
