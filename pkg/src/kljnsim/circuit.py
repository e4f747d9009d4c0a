"""Loop and cable electrical models for the key-exchange wire.

Four variants: an ideal single-node wire, a lumped RLC ladder for a practical
coaxial run (defaults match RG58 datasheet values) at any length, and the
ladder with the shunt-capacitance canceller ("capacitor killer", modeled as
the shunt capacitance removed while series R and L stay).

The ladder is n_segments series (R, L) branches with the shunt capacitance
lumped at the n_segments - 1 interior junctions. Keeping the terminal nodes
free of shunt elements lets a voltage-driven copy of the cable reproduce the
terminal currents exactly, which the model-based defense relies on.

Integration is trapezoidal (A-stable, second order, the SPICE default) with
each run starting from the DC-consistent state for the first input sample, so
no artificial start-up transient leaks into the statistics.

Sign conventions
----------------
Loop: positive current at both ends points along the cable from Bob's end
toward Alice's end; without injection the two end currents are identical, and
an ideal-wire injection makes i_cha - i_chb equal the injected current.
DividerFromInjection: positive direction at each end points from the
injection node outward toward that end, so Eve's injected current shows up
with positive sign at both ends. Conversion is a relabeling: negate Bob's end.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .backend import ladder_scan
from .exceptions import ConfigError, ShapeMismatchError
from .noise import Waveform

# RG58 coaxial per-unit defaults (datasheet-typical; configurable)
RG58_R_PER_M = 0.0365  # ohm/m
RG58_L_PER_M = 250e-9  # H/m
RG58_C_PER_M = 100e-12  # F/m
RG58_G_PER_M = 0.0  # S/m


@dataclass(frozen=True)
class Ideal:
    """Zero-length wire: the whole channel is one node."""


@dataclass(frozen=True)
class Cable:
    length_m: float
    n_segments: int = 10


@dataclass(frozen=True)
class CableWithKiller:
    length_m: float
    n_segments: int = 10


Variant = Ideal | Cable | CableWithKiller


class SignConvention(enum.Enum):
    LOOP = "loop"
    DIVIDER_FROM_INJECTION = "divider_from_injection"


@dataclass(frozen=True)
class LoopConfig:
    """Terminations and wire variant for one loop solve."""

    r_alice: float
    r_bob: float
    variant: Variant = Ideal()
    injection_position: float = 0.5

    def __post_init__(self):
        if self.r_alice <= 0 or self.r_bob <= 0:
            raise ConfigError("termination resistances must be positive")
        if not 0.0 <= self.injection_position <= 1.0:
            raise ConfigError("injection_position must lie in [0, 1]")


@dataclass(frozen=True)
class CableModel:
    """Lumped description of the practical cable."""

    r_per_m: float
    l_per_m: float
    c_per_m: float
    g_per_m: float
    length_m: float
    n_segments: int
    killer_enabled: bool

    @property
    def total_series_resistance(self) -> float:
        return self.r_per_m * self.length_m

    @property
    def total_series_inductance(self) -> float:
        return self.l_per_m * self.length_m

    @property
    def total_shunt_capacitance(self) -> float:
        return self.c_per_m * self.length_m


def build_cable_model(
    length_m: float,
    n_segments: int = 10,
    killer: bool = False,
    *,
    r_per_m: float = RG58_R_PER_M,
    l_per_m: float = RG58_L_PER_M,
    c_per_m: float = RG58_C_PER_M,
    g_per_m: float = RG58_G_PER_M,
    signal_bandwidth_hz: float = 250.0,
) -> CableModel:
    """Build a ladder model, checking that the segmentation is adequate.

    The per-segment RC corner must sit at least 100x above the signal
    bandwidth, otherwise the lumping would be too coarse for the band.
    """
    if length_m <= 0:
        raise ConfigError("length_m must be positive")
    if n_segments < 2:
        raise ConfigError("n_segments must be >= 2")
    if l_per_m <= 0:
        raise ConfigError("l_per_m must be positive")
    if r_per_m < 0 or g_per_m < 0:
        raise ConfigError("per-unit resistance and conductance cannot be negative")
    if killer:
        if g_per_m != 0.0:
            raise ConfigError("killer variant assumes zero shunt conductance")
    else:
        if c_per_m <= 0:
            raise ConfigError(
                "c_per_m must be positive for a plain cable; use killer=True "
                "for the cancelled-capacitance variant"
            )
        r_seg = r_per_m * length_m / n_segments
        c_seg = c_per_m * length_m / n_segments
        if r_seg > 0:
            corner_hz = 1.0 / (2.0 * math.pi * r_seg * c_seg)
            if corner_hz < 100.0 * signal_bandwidth_hz:
                raise ConfigError(
                    f"per-segment RC corner {corner_hz:.3g} Hz is below "
                    f"100 x bandwidth ({100.0 * signal_bandwidth_hz:.3g} Hz); "
                    "increase n_segments"
                )
    return CableModel(
        r_per_m=r_per_m,
        l_per_m=l_per_m,
        c_per_m=c_per_m,
        g_per_m=g_per_m,
        length_m=length_m,
        n_segments=n_segments,
        killer_enabled=killer,
    )


def model_for_variant(variant: Variant) -> CableModel | None:
    """Default cable model for a loop variant (None for the ideal wire)."""
    if isinstance(variant, Ideal):
        return None
    return build_cable_model(
        variant.length_m, variant.n_segments, killer=isinstance(variant, CableWithKiller)
    )


@dataclass
class ChannelSignals:
    """End currents and voltages of one solved exchange period."""

    i_cha: Waveform
    i_chb: Waveform
    u_cha: Waveform
    u_chb: Waveform
    sign_convention: SignConvention = SignConvention.LOOP

    def __post_init__(self):
        ref = self.i_cha
        for w in (self.i_chb, self.u_cha, self.u_chb):
            ref.require_compatible(w)

    def to_convention(self, convention: SignConvention) -> "ChannelSignals":
        """Relabel signs; switching conventions negates Bob's end current."""
        if convention == self.sign_convention:
            return self
        flipped = Waveform(-self.i_chb.samples, self.i_chb.sample_rate_hz)
        return ChannelSignals(self.i_cha, flipped, self.u_cha, self.u_chb, convention)


def divider_fractions(r_a: float, r_b: float) -> tuple[float, float]:
    """Share of a node-injected current flowing toward each termination."""
    if r_a <= 0 or r_b <= 0:
        raise ValueError("resistances must be positive")
    total = r_a + r_b
    return r_b / total, r_a / total


def _check_aligned(*waveforms: Waveform) -> None:
    first = waveforms[0]
    for w in waveforms[1:]:
        first.require_compatible(w)


def solve_ideal_loop(
    u_a: Waveform,
    u_b: Waveform,
    cfg: LoopConfig,
    i_inj: Waveform | None = None,
    convention: SignConvention = SignConvention.LOOP,
) -> ChannelSignals:
    """Closed-form solve of the single-node loop, sample by sample."""
    if not isinstance(cfg.variant, Ideal):
        raise ConfigError("solve_ideal_loop requires the Ideal variant")
    _check_aligned(u_a, u_b, *([i_inj] if i_inj is not None else []))
    g_a, g_b = 1.0 / cfg.r_alice, 1.0 / cfg.r_bob
    r_par = 1.0 / (g_a + g_b)
    inj = i_inj.samples if i_inj is not None else 0.0
    u_ch = (u_a.samples * g_a + u_b.samples * g_b + inj) * r_par
    j_a = (u_a.samples - u_ch) * g_a  # source -> node
    j_b = (u_b.samples - u_ch) * g_b
    fs = u_a.sample_rate_hz
    loop = ChannelSignals(
        i_cha=Waveform(-j_a, fs),
        i_chb=Waveform(np.array(j_b, copy=True), fs),
        u_cha=Waveform(np.array(u_ch, copy=True), fs),
        u_chb=Waveform(np.array(u_ch, copy=True), fs),
        sign_convention=SignConvention.LOOP,
    )
    return loop.to_convention(convention)


@dataclass
class CableState:
    """Dynamic state of the ladder between steps."""

    cap_voltages: np.ndarray
    inductor_currents: np.ndarray
    prev_inputs: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.cap_voltages, self.inductor_currents])


@dataclass(frozen=True)
class _DiscreteSystem:
    """Trapezoid-discretized x' = A x + B u + B_d u'; y = C x + D u."""

    p: np.ndarray
    q_next: np.ndarray
    q_prev: np.ndarray
    c_out: np.ndarray
    d_out: np.ndarray
    dc_gain: np.ndarray  # x_dc = dc_gain @ u for frozen inputs
    n_caps: int
    dt: float

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.q_next.shape[1]


def _discretize(a, b, b_deriv, c, d, dt, n_caps) -> _DiscreteSystem:
    m = a.shape[0]
    h = dt / 2.0
    lhs = np.eye(m) - h * a
    p = np.linalg.solve(lhs, np.eye(m) + h * a)
    q_next = np.linalg.solve(lhs, h * b + b_deriv)
    q_prev = np.linalg.solve(lhs, h * b - b_deriv)
    dc_gain = np.linalg.solve(a, -b)
    return _DiscreteSystem(p, q_next, q_prev, c, d, dc_gain, n_caps, dt)


def _assemble_ladder(model: CableModel, r_a: float, r_b: float, inj_node: int):
    """Forward system: inputs (u_a, u_b, i_inj), outputs loop-convention signals."""
    n = model.n_segments
    n_caps = n - 1
    r_br = model.r_per_m * model.length_m / n
    l_br = model.l_per_m * model.length_m / n
    c_node = model.c_per_m * model.length_m / n_caps
    g_node = model.g_per_m * model.length_m / n_caps
    m = n_caps + n
    a = np.zeros((m, m))
    b = np.zeros((m, 3))
    # cap rows: C dw_k/dt = i_k - i_{k+1} - G w_k + [k == inj] i_inj
    for k in range(1, n):
        row = k - 1
        a[row, n_caps + k - 1] += 1.0 / c_node
        a[row, n_caps + k] -= 1.0 / c_node
        a[row, row] -= g_node / c_node
        if k == inj_node:
            b[row, 2] += 1.0 / c_node
    # branch rows: L di_k/dt = w_{k-1} - w_k - R_k i_k, terminations folded in
    for k in range(1, n + 1):
        row = n_caps + k - 1
        r_k = r_br
        if k == 1:
            r_k += r_a
            b[row, 0] += 1.0 / l_br
        else:
            a[row, k - 2] += 1.0 / l_br
        if k == n:
            r_k += r_b
            b[row, 1] -= 1.0 / l_br
        else:
            a[row, k - 1] -= 1.0 / l_br
        a[row, row] -= r_k / l_br
    c = np.zeros((4, m))
    d = np.zeros((4, 3))
    c[0, n_caps] = -1.0  # i_cha (loop) = -i_1
    c[1, m - 1] = -1.0  # i_chb (loop) = -i_n
    c[2, n_caps] = -r_a  # u_cha = u_a - r_a i_1
    d[2, 0] = 1.0
    c[3, m - 1] = r_b  # u_chb = u_b + r_b i_n
    d[3, 1] = 1.0
    return a, b, np.zeros((m, 3)), c, d, n_caps


def _assemble_killer(model: CableModel, r_a: float, r_b: float, inj_node: int):
    """Killer variant collapsed to two series RL halves split at the injection node.

    Single state: the current in the Alice-side half. The Bob-side half carries
    state + i_inj, whose time derivative enters through the right-half
    inductance; that term is handled exactly by the discretization.
    """
    n = model.n_segments
    left = inj_node / n
    r_tot = model.total_series_resistance
    l_tot = model.total_series_inductance
    r_right = r_tot * (1.0 - left)
    l_right = l_tot * (1.0 - left)
    r_loop = r_a + r_b + r_tot
    a = np.array([[-r_loop / l_tot]])
    b = np.array([[1.0, -1.0, -(r_right + r_b)]]) / l_tot
    b_deriv = np.array([[0.0, 0.0, -l_right / l_tot]])
    c = np.array([[-1.0], [-1.0], [-r_a], [r_b]])
    d = np.array(
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, r_b],
        ]
    )
    return a, b, b_deriv, c, d, 0


def injection_node_index(variant: Variant, injection_position: float) -> int:
    """Interior junction closest to the requested fraction of cable length."""
    if isinstance(variant, Ideal):
        return 0
    n = variant.n_segments
    return int(min(max(round(injection_position * n), 1), n - 1))


class TransientSolver:
    """Per-(model, terminations, dt) trapezoidal stepper for the ladder."""

    def __init__(self, model: CableModel, cfg: LoopConfig, dt: float):
        if isinstance(cfg.variant, Ideal):
            raise ConfigError("the ideal variant has no transient state")
        if dt <= 0:
            raise ConfigError("dt must be positive")
        inj = injection_node_index(cfg.variant, cfg.injection_position)
        if model.killer_enabled:
            parts = _assemble_killer(model, cfg.r_alice, cfg.r_bob, inj)
        else:
            parts = _assemble_ladder(model, cfg.r_alice, cfg.r_bob, inj)
        a, b, b_deriv, c, d, n_caps = parts
        self.model = model
        self.cfg = cfg
        self.system = _discretize(a, b, b_deriv, c, d, dt, n_caps)

    def initial_state(self, u0: np.ndarray | None = None) -> CableState:
        """DC-consistent state for the first input sample (zeros if u0 is None)."""
        sys = self.system
        if u0 is None:
            u0 = np.zeros(sys.n_inputs)
        u0 = np.asarray(u0, dtype=np.float64)
        x = sys.dc_gain @ u0
        return CableState(
            cap_voltages=x[: sys.n_caps].copy(),
            inductor_currents=x[sys.n_caps :].copy(),
            prev_inputs=u0.copy(),
        )

    def _check_state(self, state: CableState) -> np.ndarray:
        x = state.as_vector()
        if x.size != self.system.n_states:
            raise ShapeMismatchError(
                f"state dimension {x.size} does not match solver "
                f"({self.system.n_states} states)"
            )
        return x

    def step(self, state: CableState, inputs: np.ndarray):
        """Advance one sample; returns (new_state, (i_cha, i_chb, u_cha, u_chb)).

        `inputs` are the (u_a, u_b, i_inj) samples at the new time point;
        outputs are reported at that same point, in the Loop convention.
        """
        sys = self.system
        x = self._check_state(state)
        u1 = np.asarray(inputs, dtype=np.float64)
        x1 = sys.p @ x + sys.q_next @ u1 + sys.q_prev @ state.prev_inputs
        y = sys.c_out @ x1 + sys.d_out @ u1
        new_state = CableState(
            cap_voltages=x1[: sys.n_caps].copy(),
            inductor_currents=x1[sys.n_caps :].copy(),
            prev_inputs=u1.copy(),
        )
        return new_state, tuple(y)

    def run(
        self,
        u_a: Waveform,
        u_b: Waveform,
        i_inj: Waveform | None = None,
        initial_state: CableState | None = None,
        convention: SignConvention = SignConvention.LOOP,
    ) -> ChannelSignals:
        """Solve a whole segment and return the four end signals."""
        _check_aligned(u_a, u_b, *([i_inj] if i_inj is not None else []))
        if abs(u_a.sample_rate_hz * self.system.dt - 1.0) > 1e-9:
            raise ShapeMismatchError("waveform sample rate does not match solver dt")
        sys = self.system
        t = len(u_a)
        u = np.zeros((3, t))
        u[0] = u_a.samples
        u[1] = u_b.samples
        if i_inj is not None:
            u[2] = i_inj.samples
        if initial_state is None:
            x0 = sys.dc_gain @ u[:, 0]
        else:
            x0 = self._check_state(initial_state)
        qu = u[:, 1:].T @ sys.q_next.T + u[:, :-1].T @ sys.q_prev.T
        traj = ladder_scan(sys.p, qu, x0)
        y = traj @ sys.c_out.T + u.T @ sys.d_out.T
        fs = u_a.sample_rate_hz
        loop = ChannelSignals(
            i_cha=Waveform(y[:, 0], fs),
            i_chb=Waveform(y[:, 1], fs),
            u_cha=Waveform(y[:, 2], fs),
            u_chb=Waveform(y[:, 3], fs),
            sign_convention=SignConvention.LOOP,
        )
        return loop.to_convention(convention)


@lru_cache(maxsize=128)
def transient_solver(model: CableModel, cfg: LoopConfig, dt: float) -> TransientSolver:
    return TransientSolver(model, cfg, dt)


class EndDrivenCable:
    """The cable alone, driven by recorded terminal voltages (defense model).

    Inputs are (v_alice_end, v_bob_end); outputs are the terminal currents the
    cable would draw, in the Loop convention, i.e. directly comparable with
    the measured i_cha and i_chb.
    """

    def __init__(self, model: CableModel, dt: float):
        if dt <= 0:
            raise ConfigError("dt must be positive")
        n = model.n_segments
        if model.killer_enabled:
            r_tot = model.total_series_resistance
            l_tot = model.total_series_inductance
            a = np.array([[-r_tot / l_tot]])
            b = np.array([[1.0, -1.0]]) / l_tot
            c = np.array([[-1.0], [-1.0]])
            d = np.zeros((2, 2))
            n_caps = 0
            b_deriv = np.zeros((1, 2))
        else:
            n_caps = n - 1
            r_br = model.r_per_m * model.length_m / n
            l_br = model.l_per_m * model.length_m / n
            c_node = model.c_per_m * model.length_m / n_caps
            g_node = model.g_per_m * model.length_m / n_caps
            m = n_caps + n
            a = np.zeros((m, m))
            b = np.zeros((m, 2))
            for k in range(1, n):
                row = k - 1
                a[row, n_caps + k - 1] += 1.0 / c_node
                a[row, n_caps + k] -= 1.0 / c_node
                a[row, row] -= g_node / c_node
            for k in range(1, n + 1):
                row = n_caps + k - 1
                if k == 1:
                    b[row, 0] += 1.0 / l_br
                else:
                    a[row, k - 2] += 1.0 / l_br
                if k == n:
                    b[row, 1] -= 1.0 / l_br
                else:
                    a[row, k - 1] -= 1.0 / l_br
                a[row, row] -= r_br / l_br
            c = np.zeros((2, m))
            d = np.zeros((2, 2))
            c[0, n_caps] = -1.0
            c[1, m - 1] = -1.0
            b_deriv = np.zeros((m, 2))
        self.model = model
        self.system = _discretize(a, b, b_deriv, c, d, dt, n_caps)

    def run(self, v_a: Waveform, v_b: Waveform) -> tuple[Waveform, Waveform]:
        _check_aligned(v_a, v_b)
        if abs(v_a.sample_rate_hz * self.system.dt - 1.0) > 1e-9:
            raise ShapeMismatchError("waveform sample rate does not match solver dt")
        sys = self.system
        u = np.vstack([v_a.samples, v_b.samples])
        x0 = sys.dc_gain @ u[:, 0]
        qu = u[:, 1:].T @ sys.q_next.T + u[:, :-1].T @ sys.q_prev.T
        traj = ladder_scan(sys.p, qu, x0)
        y = traj @ sys.c_out.T + u.T @ sys.d_out.T
        fs = v_a.sample_rate_hz
        return Waveform(y[:, 0], fs), Waveform(y[:, 1], fs)


@lru_cache(maxsize=128)
def end_driven_cable(model: CableModel, dt: float) -> EndDrivenCable:
    return EndDrivenCable(model, dt)


def step_transient(
    model: CableModel,
    cfg: LoopConfig,
    end_voltages: tuple[float, float],
    i_inj_sample: float,
    state: CableState,
    dt: float,
):
    """Single-sample stepping interface over the cached solver.

    `end_voltages` are the two generator voltages at the new time point.
    Returns (new_state, (i_cha, i_chb, u_cha, u_chb)) in the Loop convention.
    """
    solver = transient_solver(model, cfg, dt)
    u = np.array([end_voltages[0], end_voltages[1], i_inj_sample])
    return solver.step(state, u)


def solve_loop(
    u_a: Waveform,
    u_b: Waveform,
    cfg: LoopConfig,
    i_inj: Waveform | None = None,
    convention: SignConvention = SignConvention.LOOP,
    model: CableModel | None = None,
) -> ChannelSignals:
    """Variant dispatcher: closed form for the ideal wire, ladder otherwise."""
    if isinstance(cfg.variant, Ideal):
        return solve_ideal_loop(u_a, u_b, cfg, i_inj, convention)
    if model is None:
        model = model_for_variant(cfg.variant)
    solver = transient_solver(model, cfg, 1.0 / u_a.sample_rate_hz)
    return solver.run(u_a, u_b, i_inj, convention=convention)
