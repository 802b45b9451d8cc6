"""Round-trip rotation sensor built from a polarization-controlled OAM switch.

The protocol prepares ``|H>`` times an OAM probe, splits it on a q-plate into
two circular-polarization arms carrying opposite OAM displacements, sends both
arms through a folded stack of Dove-prism pairs (total mode rotation
``2*m*theta`` after the return pass), and recombines on the same q-plate.  The
two arms acquire the ladder-versus-rotation commutation phase with opposite
signs, so the vertical-port probability reads

    P(theta) = (1 - cos(4*m*l*theta + phi0)) / 2

where ``m`` counts rotation passes, ``l`` is the q-plate order and ``phi0`` a
calibration offset.  ``run_roundtrip`` simulates the stage-by-stage pipeline;
``nested_switch_op`` and ``canonical_switch_op`` build the equivalent
control-conditioned operators directly, and ``analytic_reference_states``
provides closed-form stage states for cross-checking the pipeline.

Stage names, in order: ``input``, ``qplate_in``, ``to_linear``,
``rotator_fwd``, ``midpoint_flip``, ``rotator_back``, ``to_circular``,
``qplate_out``, ``readout``.

The midpoint polarization flip is what makes the prism deflection phases
cancel between the two transits.  With ``compensation_on`` False the flip is
deferred to just before the return basis change: the arm routing (hence the
ideal signal) is unchanged, but the deflection phases no longer telescope and
the fringe degrades once ``deflection_on`` is set.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConfigError,
    DegenerateOperatingPoint,
    NonNormalizable,
    StageMismatch,
)
from .hilbert import (
    CIRCULAR,
    LINEAR,
    H,
    L,
    R,
    V,
    JointState,
    LinearOp,
    OamWindow,
    apply,
    compose,
    default_window,
    fidelity,
    identity_op,
    make_state,
    pol_block_op,
    row_chain,
    row_rotation,
    row_shift,
)
from .optics import (
    DovePrismModel,
    QPlateModel,
    control_phase_op,
    dove_pair_op,
    hrp_flip_op,
    qplate_op,
    qwp_fr_suite_op,
)

__all__ = [
    "SwitchParams",
    "OpticsTrain",
    "StageRecord",
    "StateTrace",
    "STAGE_NAMES",
    "run_roundtrip",
    "readout_probability",
    "project_probability",
    "fringe_probability",
    "fringe_visibility",
    "analytic_reference_states",
    "nested_switch_op",
    "canonical_switch_op",
    "EquivalenceReport",
    "equivalence_check",
    "control_reduced",
    "control_purity",
]

STAGE_NAMES = (
    "input",
    "qplate_in",
    "to_linear",
    "rotator_fwd",
    "midpoint_flip",
    "rotator_back",
    "to_circular",
    "qplate_out",
    "readout",
)


@dataclass(frozen=True)
class SwitchParams:
    """Operating point: rotation passes ``m``, q-plate order ``l``, angle, offset.

    ``m`` must be a positive integer (the full pipeline additionally needs it
    even, since each Dove-prism pair contributes two passes).  ``l = 0`` is
    allowed for the abstract operators but not for the optical pipeline.
    """

    m: int
    l: int
    theta: float
    phi0: float = 0.0

    def __post_init__(self) -> None:
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"rotation-pass count m must be a positive integer, got {self.m!r}")
        if int(self.l) != self.l or self.l < 0:
            raise ConfigError(f"q-plate order l must be a nonnegative integer, got {self.l!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "l", int(self.l))
        if not np.isfinite(self.theta) or not -np.pi < self.theta < np.pi:
            raise ConfigError(f"rotation angle must lie in (-pi, pi), got {self.theta!r}")
        if not np.isfinite(self.phi0):
            raise ConfigError("calibration offset phi0 must be finite")

    @property
    def fringe_rate(self) -> int:
        """Phase accumulated per radian of rotation: ``4*m*l``."""
        return 4 * self.m * self.l

    @property
    def fringe_period(self) -> float:
        if self.fringe_rate == 0:
            raise DegenerateOperatingPoint("fringe period undefined at l = 0")
        return 2.0 * np.pi / self.fringe_rate

    def with_theta(self, theta: float) -> "SwitchParams":
        return replace(self, theta=float(theta))


@dataclass(frozen=True)
class OpticsTrain:
    """Hardware configuration of the folded rotation stack.

    ``deflection_on`` enables the polarization side effect of total internal
    reflection inside the Dove prisms; ``compensation_on`` keeps the midpoint
    polarization flip in place (see module docstring).
    """

    stationary: DovePrismModel = DovePrismModel()
    rotatable: DovePrismModel = DovePrismModel()
    deflection_on: bool = False
    compensation_on: bool = True

    @classmethod
    def ideal(cls) -> "OpticsTrain":
        return cls()

    @classmethod
    def deflected(
        cls,
        delta: float = 0.2,
        rho: float = 0.99,
        alpha_stationary: float = 0.0,
        alpha_rotatable: float = 0.0,
        compensation_on: bool = True,
    ) -> "OpticsTrain":
        return cls(
            stationary=DovePrismModel(alpha=alpha_stationary, delta=delta, rho=rho),
            rotatable=DovePrismModel(alpha=alpha_rotatable, delta=delta, rho=rho),
            deflection_on=True,
            compensation_on=compensation_on,
        )

    def effective_prisms(self) -> tuple[DovePrismModel, DovePrismModel]:
        if self.deflection_on:
            return self.stationary, self.rotatable
        return (
            replace(self.stationary, deflection=False),
            replace(self.rotatable, deflection=False),
        )


@dataclass(frozen=True)
class StageRecord:
    name: str
    state: JointState


@dataclass(frozen=True)
class StateTrace:
    """Stage-by-stage record of one pipeline run."""

    params: SwitchParams
    train: OpticsTrain
    records: tuple[StageRecord, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.records)

    @property
    def readout(self) -> JointState:
        return self.records[-1].state

    def state(self, name: str) -> JointState:
        for r in self.records:
            if r.name == name:
                return r.state
        raise StageMismatch(f"trace has no stage named {name!r}; stages are {self.names}")

    def fidelities(self, references) -> dict[str, float]:
        """Fidelity of each referenced stage against this trace."""
        return {name: fidelity(self.state(name), ref) for name, ref in references.items()}


def run_roundtrip(
    params: SwitchParams,
    train: OpticsTrain | None = None,
    input_dist=None,
    window: OamWindow | None = None,
) -> StateTrace:
    """Simulate the full optical round trip on ``|H> (x) |probe>``.

    ``input_dist`` maps OAM index to amplitude (default: the fundamental mode
    ``{0: 1}``).  A window is sized automatically unless one is supplied.
    """
    train = train if train is not None else OpticsTrain()
    if params.m % 2:
        raise ConfigError(
            f"the folded stack needs an even rotation-pass count, got m = {params.m}"
        )
    if params.l < 1:
        raise ConfigError("the optical pipeline needs a q-plate order l >= 1")
    dist = dict(input_dist) if input_dist is not None else {0: 1.0}
    if window is None:
        extent = max(abs(int(k)) for k in dist)
        window = default_window(params.l, extent=extent)
    state = make_state("H", dist, window)
    records = [StageRecord("input", state)]

    stationary, rotatable = train.effective_prisms()
    qplate = qplate_op(QPlateModel(params.l))
    npairs = params.m // 2
    fwd = compose(
        [dove_pair_op(params.theta, stationary, rotatable) for _ in range(npairs)],
        label="rotator-fwd",
    )
    # return transit: pair sequence and intra-pair order both reversed
    bwd = compose(
        [dove_pair_op(params.theta, stationary, rotatable, reverse=True) for _ in range(npairs)],
        label="rotator-back",
    )
    if train.compensation_on:
        midpoint: LinearOp = hrp_flip_op()
        to_circular = qwp_fr_suite_op("backward")
    else:
        midpoint = identity_op("midpoint-pass")
        to_circular = compose(
            [hrp_flip_op(), qwp_fr_suite_op("backward")], label="late-flip+to-circular"
        )

    for name, op in (
        ("qplate_in", qplate),
        ("to_linear", qwp_fr_suite_op("forward")),
        ("rotator_fwd", fwd),
        ("midpoint_flip", midpoint),
        ("rotator_back", bwd),
        ("to_circular", to_circular),
        ("qplate_out", qplate),
    ):
        state = apply(op, state)
        records.append(StageRecord(name, state))

    readout = apply(control_phase_op(params.phi0 + np.pi), state).to_basis(LINEAR)
    records.append(StageRecord("readout", readout))
    return StateTrace(params=params, train=train, records=tuple(records))


def readout_probability(state: JointState) -> float:
    """Vertical-port fraction ``P(V)`` of a (possibly lossy) state."""
    lin = state.to_basis(LINEAR)
    total = float(np.sum(np.abs(lin.amp) ** 2))
    if total <= 1e-300:
        raise NonNormalizable("state has no amplitude left to project")
    return float(np.sum(np.abs(lin.amp[V]) ** 2) / total)


def project_probability(state: JointState, phi0: float = 0.0) -> float:
    """Calibrated vertical-port probability of an uncalibrated output state.

    Expects the state as it leaves the recombining q-plate (or a switch
    operator): the calibration plate advances the ``|R>`` control component by
    ``phi0 + pi`` before the linear-basis projection, which turns the raw
    fringe into ``(1 - cos(4*m*l*theta + phi0)) / 2``.  Do not feed it the
    ``readout`` trace stage; that state is calibrated already.
    """
    calibrated = apply(control_phase_op(float(phi0) + np.pi), state)
    return readout_probability(calibrated)


def fringe_probability(
    params: SwitchParams,
    train: OpticsTrain | None = None,
    input_dist=None,
    window: OamWindow | None = None,
) -> float:
    """Vertical-port probability of one full pipeline run at ``params.theta``."""
    trace = run_roundtrip(params, train, input_dist, window)
    return readout_probability(trace.readout)


def fringe_visibility(
    params: SwitchParams,
    train: OpticsTrain | None = None,
    input_dist=None,
    samples: int = 512,
) -> float:
    """Fringe contrast ``(Pmax - Pmin) / (Pmax + Pmin)`` over one period.

    The angle is scanned from ``params.theta`` across exactly one fringe
    period; each sample is a full pipeline run, so imperfections configured on
    the train show up as reduced contrast.
    """
    if samples < 8:
        raise ConfigError("visibility scan needs at least 8 samples")
    period = params.fringe_period
    probe = dict(input_dist) if input_dist is not None else {0: 1.0}
    extent = max(abs(int(k)) for k in probe)
    window = default_window(params.l, extent=extent)
    ps = [
        fringe_probability(params.with_theta(params.theta + t), train, probe, window)
        for t in np.linspace(0.0, period, samples, endpoint=False)
    ]
    pmax, pmin = max(ps), min(ps)
    if pmax + pmin <= 0.0:
        raise DegenerateOperatingPoint("fringe carries no amplitude over a full period")
    return (pmax - pmin) / (pmax + pmin)


def _displace(vec: np.ndarray, delta: int) -> np.ndarray:
    out = np.zeros_like(vec)
    if delta > 0:
        out[delta:] = vec[:-delta]
    elif delta < 0:
        out[:delta] = vec[-delta:]
    else:
        out[:] = vec
    return out


def analytic_reference_states(
    params: SwitchParams,
    window: OamWindow,
    input_dist=None,
    compensation_on: bool = True,
) -> dict[str, JointState]:
    """Closed-form stage states for an ideal (deflection-free) round trip.

    Built from plain array arithmetic rather than the operator layer, so a
    pipeline trace can be checked against an independent construction.  The
    output-side stages use the commutation identity explicitly: the recombined
    arms differ by ``exp(+-2i*m*l*theta)`` around a common rotated probe.
    """
    m, l, theta, phi0 = params.m, params.l, params.theta, params.phi0
    input_state = make_state("H", dict(input_dist) if input_dist is not None else {0: 1.0}, window)
    probe = input_state.amp[H].copy()
    k = window.indices()
    s2 = 1.0 / np.sqrt(2.0)
    rot_half = np.exp(-1j * m * theta * k)      # one transit: rotation by m*theta
    rot_full = np.exp(-1j * 2.0 * m * theta * k)
    up = _displace(probe, +l)       # arm that took the raising q-plate branch
    down = _displace(probe, -l)

    def joint(basis: str, row0: np.ndarray, row1: np.ndarray) -> JointState:
        return JointState(window, basis, np.stack([row0, row1]))

    refs = {"input": input_state}
    refs["qplate_in"] = joint(CIRCULAR, s2 * down, s2 * up)          # rows (L, R)
    refs["to_linear"] = joint(LINEAR, s2 * down, s2 * up)            # rows (H, V)
    refs["rotator_fwd"] = joint(LINEAR, s2 * rot_half * down, s2 * rot_half * up)
    if compensation_on:
        refs["midpoint_flip"] = joint(LINEAR, -s2 * rot_half * up, s2 * rot_half * down)
        refs["rotator_back"] = joint(LINEAR, -s2 * rot_full * up, s2 * rot_full * down)
    else:
        refs["midpoint_flip"] = refs["rotator_fwd"]
        refs["rotator_back"] = joint(LINEAR, s2 * rot_full * down, s2 * rot_full * up)
    refs["to_circular"] = joint(CIRCULAR, s2 * rot_full * down, -s2 * rot_full * up)

    # both arms land back on the rotated probe, offset by the commutation phase
    phase = 2.0 * m * l * theta
    out_l = -np.exp(-1j * phase) * s2 * rot_full * probe
    out_r = +np.exp(+1j * phase) * s2 * rot_full * probe
    refs["qplate_out"] = joint(CIRCULAR, out_l, out_r)
    cal_r = np.exp(1j * (phi0 + np.pi)) * out_r
    refs["readout"] = joint(LINEAR, s2 * (out_l + cal_r), 1j * s2 * (out_l - cal_r))
    return refs


# ---------------------------------------------------------------------------
# control-conditioned operator forms


def nested_switch_op(params: SwitchParams, dagger: bool = False) -> LinearOp:
    """Arm-resolved switch operator: displace, rotate, displace back.

    Control ``|L>`` conjugates the rotation by the raising displacement,
    ``|R>`` by the lowering one; the two diagonal blocks then differ by the
    phase ``exp(4i*m*l*theta)``.  ``dagger`` builds the inverse.
    """
    l = params.l
    phi = 2.0 * params.m * params.theta * (-1.0 if dagger else 1.0)
    return pol_block_op(
        f"switch-nested(m={params.m}, l={l})" + ("-dagger" if dagger else ""),
        {
            (L, L): row_chain(row_shift(+l), row_rotation(phi), row_shift(-l)),
            (R, R): row_chain(row_shift(-l), row_rotation(phi), row_shift(+l)),
        },
        CIRCULAR,
        shift_extent=l,
    )


def canonical_switch_op(params: SwitchParams, dagger: bool = False) -> LinearOp:
    """Order-conditioned form: displacement and rotation in both orders.

    Control ``|L>`` applies displace-then-rotate, ``|R>`` rotate-then-displace
    with the same net displacement ``+2*l``; the commutation phase between the
    orderings is the same ``exp(4i*m*l*theta)`` fringe as the nested form.
    """
    d = 2 * params.l
    phi = 2.0 * params.m * params.theta
    if dagger:
        blocks = {
            (L, L): row_chain(row_rotation(-phi), row_shift(-d)),
            (R, R): row_chain(row_shift(-d), row_rotation(-phi)),
        }
    else:
        blocks = {
            (L, L): row_chain(row_shift(+d), row_rotation(phi)),
            (R, R): row_chain(row_rotation(phi), row_shift(+d)),
        }
    return pol_block_op(
        f"switch-canonical(m={params.m}, l={params.l})" + ("-dagger" if dagger else ""),
        blocks,
        CIRCULAR,
        shift_extent=d,
    )


def _wrap_angle(x: float) -> float:
    return float((x + np.pi) % (2.0 * np.pi) - np.pi)


@dataclass(frozen=True)
class EquivalenceReport:
    """Readout statistics of the two operator forms on the same probe."""

    prob_nested: float
    prob_canonical: float
    phase_nested: float
    phase_canonical: float

    @property
    def prob_delta(self) -> float:
        return abs(self.prob_nested - self.prob_canonical)

    @property
    def phase_delta(self) -> float:
        return abs(_wrap_angle(self.phase_nested - self.phase_canonical))


def equivalence_check(params: SwitchParams, probe_dist=None) -> EquivalenceReport:
    """Compare the two operator forms on an equal control superposition.

    Both act on ``(|L> + |R>)/sqrt(2) (x) |probe>`` and are read out through
    the same calibrated projection; the report carries the two probabilities
    and the two arm-to-arm phases.
    """
    dist = dict(probe_dist) if probe_dist is not None else {0: 1.0}
    extent = max(abs(int(k)) for k in dist)
    window = default_window(params.l, extent=extent)
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    state = make_state(plus, dist, window, basis=CIRCULAR)

    out = {}
    for tag, op in (
        ("nested", nested_switch_op(params)),
        ("canonical", canonical_switch_op(params)),
    ):
        image = apply(op, state)
        p = project_probability(image, params.phi0)
        ip = complex(np.vdot(image.amp[L], image.amp[R]))
        out[tag] = (p, float(np.angle(ip)))
    return EquivalenceReport(
        prob_nested=out["nested"][0],
        prob_canonical=out["canonical"][0],
        phase_nested=out["nested"][1],
        phase_canonical=out["canonical"][1],
    )


def control_reduced(state: JointState, basis: str = CIRCULAR) -> np.ndarray:
    """Reduced 2x2 control (polarization) density matrix, unit trace."""
    amp = state.to_basis(basis).amp
    rho = amp @ amp.conj().T
    tr = float(np.real(np.trace(rho)))
    if tr <= 1e-300:
        raise NonNormalizable("state has no amplitude left")
    return rho / tr


def control_purity(state: JointState) -> float:
    """Purity of the reduced control state; 1 means the arms fully recombined."""
    rho = control_reduced(state)
    return float(np.real(np.trace(rho @ rho)))
