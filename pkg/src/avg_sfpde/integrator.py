"""Time stepping of one path: semi-implicit Euler-Maruyama with history.

The stiff linear part of the operator (the Laplacian diagonal, or the decay
rate of a scalar problem) is treated implicitly per mode; the functional
drift, the nonlinearity, and the noise are explicit.  Brownian increments are
counter-based: path (seed, path_id) keys a Philox stream, and the Gaussian at
(step, mode) is the inverse-CDF image of the stream's raw output at a fixed
position, so block generation, single-step generation, and coupled twin runs
all see bit-identical numbers regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .coefficients import (
    SCALAR_MAPS,
    CoefficientSet,
    eval_diffusion_amplitude,
    eval_drift,
    pow_or_inf,
)
from .delay import DelayMeasure, HistoryBuffer, delay_integral
from .spectral import PdeOperator

AVERAGED = "averaged"


class BlowUpError(RuntimeError):
    """Non-finite state during stepping; carries time and mode index."""

    def __init__(self, t, mode_index, detail=""):
        super().__init__(f"state blew up at t = {t:.6g} (mode {mode_index}) {detail}")
        self.t = t
        self.mode_index = mode_index


# ---------------------------------------------------------------------------
# Counter-based Gaussian increments
# ---------------------------------------------------------------------------

_U64_MASK = (1 << 64) - 1


def _philox(seed: int, path_id: int) -> np.random.Philox:
    key = np.array([seed & _U64_MASK, path_id & _U64_MASK], dtype=np.uint64)
    return np.random.Philox(key=key)


def _raw_to_normal(raw: np.ndarray) -> np.ndarray:
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
    return ndtri(u)


def normal_block(seed: int, path_id: int, n_steps: int, k_w: int) -> np.ndarray:
    """All standard normals of a path as an (n_steps, k_w) array."""
    raw = _philox(seed, path_id).random_raw(n_steps * k_w)
    return _raw_to_normal(raw).reshape(n_steps, k_w)


def normal_at(seed: int, path_id: int, step: int, k_w: int) -> np.ndarray:
    """Standard normals of one step; equals normal_block(...)[step] exactly."""
    bg = _philox(seed, path_id)
    pos = step * k_w
    bg.advance(pos // 4)  # Philox advances in 4-output counter blocks
    skip = pos % 4
    raw = bg.random_raw(skip + k_w)[skip:]
    return _raw_to_normal(raw)


# ---------------------------------------------------------------------------
# Configuration and state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepperConfig:
    dt: float
    T: float
    scheme: str = "semi_implicit_linear"
    noise_modes: int = 1
    seed: int = 0
    eps: float | str = 1.0
    retry_halvings: int = 4

    def __post_init__(self):
        if self.dt <= 0 or self.T < self.dt:
            raise ValueError("need dt > 0 and T >= dt")
        if self.scheme not in ("explicit_em", "semi_implicit_linear"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.eps != AVERAGED and not (isinstance(self.eps, (int, float))
                                         and 0 < self.eps <= 1):
            raise ValueError("eps must lie in (0, 1] or be the 'averaged' sentinel")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-8:
            raise ValueError("T must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class PathState:
    """State of one path between steps (reference implementation of `step`)."""

    buffer: HistoryBuffer
    t: float
    seed: int = 0
    path_id: int = 0
    step_index: int = 0

    def __post_init__(self):
        if abs(self.buffer.head_time - self.t) > 1e-12:
            raise ValueError("buffer head time must equal the state time")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray           # (n_steps + 1, dim)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def sup_sq_distance(self, other: "Trajectory") -> float:
        if self.states.shape != other.states.shape:
            raise ValueError("trajectories live on different grids")
        d = self.states - other.states
        return float(np.max(np.sum(d * d, axis=1)))


# ---------------------------------------------------------------------------
# Delay-term accumulators (O(1) per step, equal to delay_integral on the grid)
# ---------------------------------------------------------------------------

class _ExpDelayAccumulator:
    """Exponential-measure delay integral as an exponential moving average.

    With interval masses m_j = e^{2r t_{j+1}} - e^{2r t_j} the trapezoid value
    at the head factors as V_{n+1} = q V_n + (1 - q)(K_n + K_{n+1})/2 with
    q = e^{-2r dt}; V_0 is the full tail integral at t = 0.
    """

    def __init__(self, initial: HistoryBuffer, mu: DelayMeasure, power: float, dt: float):
        self.power = power
        self.decay = math.exp(-2.0 * mu.rate * dt)
        self.value = delay_integral(initial, 0.0, mu, power)
        self.k_prev = np.linalg.norm(initial.head) ** power

    def advance(self, new_norm: float) -> None:
        k_new = pow_or_inf(new_norm, self.power)
        self.value = self.decay * self.value + (1.0 - self.decay) * 0.5 * (self.k_prev + k_new)
        self.k_prev = k_new


class _PointDelayAccumulator:
    def __init__(self, initial: HistoryBuffer, power: float):
        self.power = power
        self.value = np.linalg.norm(initial.head) ** power

    def advance(self, new_norm: float) -> None:
        self.value = pow_or_inf(new_norm, self.power)


class _GenericDelayAccumulator:
    """Fallback for finite-support measures: re-evaluates the reference
    delay integral on the growing buffer each step (O(window))."""

    def __init__(self, runner, mu, power):
        self.runner = runner
        self.mu = mu
        self.power = power
        self.value = delay_integral(runner.initial, 0.0, mu, power)

    def refresh(self) -> None:
        self.value = delay_integral(self.runner.buffer_view(), self.runner.t, self.mu,
                                    self.power)

    def advance(self, new_norm: float) -> None:  # refreshed after append
        pass


def _make_delay_accumulator(runner, initial, cs, dt):
    power = cs.drift.delay_kernel_power
    if power is None:
        return None
    mu = cs.drift.delay_measure
    if mu.kind == "exponential":
        return _ExpDelayAccumulator(initial, mu, power, dt)
    if mu.kind == "point":
        return _PointDelayAccumulator(initial, power)
    return _GenericDelayAccumulator(runner, mu, power)


# ---------------------------------------------------------------------------
# Path runner
# ---------------------------------------------------------------------------

class PathRunner:
    """Steps one path to the horizon with preallocated storage."""

    def __init__(self, op: PdeOperator, cs: CoefficientSet, cfg: StepperConfig,
                 initial: HistoryBuffer, path_id: int = 0,
                 noise: np.ndarray | None = None):
        self.op = op
        self.cs = cs
        self.cfg = cfg
        self.initial = initial
        self.path_id = path_id
        self.space = cs.space
        self.dim = cs.dim
        n = cfg.n_steps
        self.k_w = cs.noise_dim(cfg.noise_modes)
        stiff = op.stiff_diagonal(self.space)
        if cfg.scheme == "explicit_em" and np.max(stiff) * cfg.dt >= 2.0:
            raise ValueError(
                f"explicit scheme unstable: dt * max stiffness = {np.max(stiff) * cfg.dt:.3g} >= 2")
        self.implicit_factors = 1.0 / (1.0 + cfg.dt * stiff)
        self.stiff = stiff
        self.times = np.arange(n + 1) * cfg.dt
        self.states = np.empty((n + 1, self.dim))
        self.states[0] = initial.head
        self.t = 0.0
        self.n_done = 0
        self.noise = noise if noise is not None \
            else normal_block(cfg.seed, path_id, n, self.k_w)
        self.delay_acc = _make_delay_accumulator(self, initial, cs, cfg.dt)
        self.head_norm_weighted = np.linalg.norm(initial.head)  # Q_n cache
        self.tail_weight = 1.0                                   # e^{-h t_n}
        self.h = initial.h
        self.tail_sup0 = initial.tail.weighted_sup(self.h)
        self.needs_seminorm = bool(cs.drift.seminorm_power)
        self.diag_amplitude = None
        if cs.diffusion.kind == "diagonal":
            modes = np.arange(1, self.dim + 1, dtype=float)
            self.diag_amplitude = cs.diffusion.gain / modes**cs.diffusion.decay

    # -- views ---------------------------------------------------------------
    def buffer_view(self) -> HistoryBuffer:
        return HistoryBuffer(h=self.initial.h, tail=self.initial.tail,
                             times=self.times[: self.n_done + 1],
                             samples=self.states[: self.n_done + 1],
                             horizon=self.initial.horizon)

    def seminorm(self) -> float:
        return max(self.tail_weight * self.tail_sup0, self.head_norm_weighted)

    # -- stepping --------------------------------------------------------------
    def _rhs(self, state, values, t):
        """Explicit part dt-rate: nonlinearity + oscillating functional drift."""
        cs = self.cs
        if self.space is None:
            a_nl = np.zeros(1)
            head_for_drift = state
        else:
            a_nl = self.op.nonlinear_from_values(self.space, values)
            head_for_drift = values
        delay_value = self.delay_acc.value if self.delay_acc is not None else 0.0
        semi = self.seminorm() if self.needs_seminorm else 0.0
        F = cs.compose_drift(head_for_drift, delay_value, semi)
        if self.cfg.eps == AVERAGED:
            xi1 = cs.osc1.mean()
        else:
            xi1 = cs.osc1.scalar_eval(t / self.cfg.eps)
        return a_nl + xi1 * F

    def _noise_term(self, state, values, t, dW):
        cs = self.cs
        if self.cfg.eps == AVERAGED:
            xi2 = cs.osc2.mean()
        else:
            xi2 = cs.osc2.scalar_eval(t / self.cfg.eps)
        g = cs.diffusion
        if g.kind == "diagonal":
            out = np.zeros(self.dim)
            n = min(len(dW), self.dim)
            out[:n] = self.diag_amplitude[:n] * dW[:n]
            return xi2 * out
        if g.kind == "scalar":
            amp = g.gain
            if g.pointwise is not None:
                amp = amp * SCALAR_MAPS[g.pointwise](float(state[0]))
            return xi2 * amp * dW[0] * np.ones(1)
        from .coefficients import POINTWISE_MAPS
        mapped = POINTWISE_MAPS[g.pointwise](values) if g.pointwise is not None \
            else np.ones(self.space.m)
        return xi2 * g.gain * self.space.to_coeffs(mapped) * dW[0]

    def _advance_caches(self, new_state):
        norm = float(np.linalg.norm(new_state))
        if self.delay_acc is not None:
            self.delay_acc.advance(norm)
        decay = math.exp(-self.h * self.cfg.dt)
        self.head_norm_weighted = max(self.head_norm_weighted * decay, norm)
        self.tail_weight *= decay

    def _substep(self, state, t, dt_frac, dW):
        """One (possibly fractional) update from ``state`` at time ``t``."""
        dt = self.cfg.dt * dt_frac
        values = None if self.space is None else self.space.to_values(state)
        rhs = self._rhs(state, values, t)
        noise = self._noise_term(state, values, t, dW)
        if self.cfg.scheme == "semi_implicit_linear":
            if dt_frac == 1.0:
                factors = self.implicit_factors
            else:
                factors = 1.0 / (1.0 + dt * self.stiff)
            return (state + dt * rhs + noise) * factors
        return state + dt * (rhs - self.stiff * state) + noise

    def step_once(self):
        n = self.n_done
        t = self.times[n]
        state = self.states[n]
        dW = self.noise[n] * math.sqrt(self.cfg.dt)
        new_state = self._substep(state, t, 1.0, dW)
        if not np.all(np.isfinite(new_state)):
            new_state = self._retry_with_halving(state, t, dW)
        self.states[n + 1] = new_state
        self.n_done = n + 1
        self.t = self.times[n + 1]
        self._advance_caches(new_state)
        if self.delay_acc is not None and isinstance(self.delay_acc, _GenericDelayAccumulator):
            self.delay_acc.refresh()

    def _retry_with_halving(self, state, t, dW):
        """Deterministic salvage: split the step into 2^j substeps, with the
        Brownian increment divided proportionally, before declaring blow-up."""
        for halvings in range(1, self.cfg.retry_halvings + 1):
            parts = 2**halvings
            frac = 1.0 / parts
            cur = state
            tt = t
            ok = True
            for _ in range(parts):
                cur = self._substep(cur, tt, frac, dW * frac)
                tt += self.cfg.dt * frac
                if not np.all(np.isfinite(cur)):
                    ok = False
                    break
            if ok:
                return cur
        bad = np.where(~np.isfinite(self._substep(state, t, 1.0, dW)))[0]
        raise BlowUpError(t + self.cfg.dt, int(bad[0]) if len(bad) else -1)

    def run(self) -> Trajectory:
        if self._scalar_fast_eligible():
            self._run_scalar_fast()
        else:
            for _ in range(self.cfg.n_steps):
                self.step_once()
        return Trajectory(times=self.times, states=self.states)

    def _scalar_fast_eligible(self) -> bool:
        return (self.space is None
                and self.cs.diffusion.kind == "scalar"
                and not isinstance(self.delay_acc, _GenericDelayAccumulator))

    def _run_scalar_fast(self):
        """Tight float loop for scalar states; mirrors the generic update
        expression term for term so no-delay presets stay bit-identical."""
        cs, cfg = self.cs, self.cfg
        dt = cfg.dt
        sqrt_dt = math.sqrt(dt)
        semi_implicit = cfg.scheme == "semi_implicit_linear"
        factor = float(self.implicit_factors[0])
        stiff = float(self.stiff[0])
        averaged = cfg.eps == AVERAGED
        xi1_fixed = cs.osc1.mean() if averaged else None
        xi2_fixed = cs.osc2.mean() if averaged else None
        osc1, osc2 = cs.osc1.scalar_eval, cs.osc2.scalar_eval
        eps = 1.0 if averaged else cfg.eps
        pw = SCALAR_MAPS[cs.drift.pointwise] if cs.drift.pointwise else None
        pw_gain = cs.drift.pointwise_gain
        gpw = SCALAR_MAPS[cs.diffusion.pointwise] if cs.diffusion.pointwise else None
        g_gain = cs.diffusion.gain
        const = cs.drift.constant
        d_gain = cs.drift.delay_gain
        sem_pow, sem_gain = cs.drift.seminorm_power, cs.drift.seminorm_gain
        acc = self.delay_acc
        h_decay = math.exp(-self.h * dt)
        q_cache = self.head_norm_weighted
        tail_w = self.tail_weight
        noise = self.noise[:, 0]
        times = self.times
        states = self.states
        x = float(states[0, 0])
        for n in range(cfg.n_steps):
            t = times[n]
            extra = (const + d_gain * acc.value) if acc is not None else const
            if sem_pow:
                extra += sem_gain * pow_or_inf(max(tail_w * self.tail_sup0, q_cache), sem_pow)
            F = (extra + pw_gain * pw(x)) if pw is not None else extra
            xi1 = xi1_fixed if averaged else osc1(t / eps)
            rhs = xi1 * F
            amp = (g_gain * gpw(x)) if gpw is not None else g_gain
            xi2 = xi2_fixed if averaged else osc2(t / eps)
            nz = xi2 * amp * (noise[n] * sqrt_dt)
            if semi_implicit:
                x_new = (x + dt * rhs + nz) * factor
            else:
                x_new = x + dt * (rhs - stiff * x) + nz
            if not math.isfinite(x_new):
                # sync caches so the generic retry path sees the live values
                self.head_norm_weighted = q_cache
                self.tail_weight = tail_w
                dW = np.array([noise[n] * sqrt_dt])
                x_new = float(self._retry_with_halving(np.array([x]), t, dW)[0])
            states[n + 1, 0] = x_new
            norm = abs(x_new)
            if acc is not None:
                acc.advance(norm)
            q_cache = max(q_cache * h_decay, norm)
            tail_w *= h_decay
            x = x_new
        self.head_norm_weighted = q_cache
        self.tail_weight = tail_w
        self.n_done = cfg.n_steps
        self.t = times[-1]


# ---------------------------------------------------------------------------
# Spec operations
# ---------------------------------------------------------------------------

def step(state: PathState, op: PdeOperator, cs: CoefficientSet,
         cfg: StepperConfig) -> PathState:
    """Single reference step on a PathState (buffer-backed, O(history)).

    The runner is the batch driver; this is the checkable one-step form.  For
    coefficient sets without a delay term the two are bit-identical; with a
    delay term they agree to rounding (the runner accumulates the delay
    integral incrementally, which regroups the same floating-point sums).
    """
    buf = state.buffer
    t = state.t
    dW = normal_at(cfg.seed, state.path_id, state.step_index, cs.noise_dim(cfg.noise_modes)) \
        * math.sqrt(cfg.dt)
    drift = eval_drift(cs, t, cfg.eps, buf)
    if cs.space is not None:
        values = cs.space.to_values(buf.value_at(t))
        a_nl = op.nonlinear_from_values(cs.space, values)
    else:
        a_nl = np.zeros(1)
    amp = eval_diffusion_amplitude(cs, t, cfg.eps, buf)
    noise = cs.apply_noise(amp, dW)
    stiff = op.stiff_diagonal(cs.space)
    rhs = a_nl + drift
    if cfg.scheme == "semi_implicit_linear":
        # reciprocal multiply, matching the runner's precomputed factors bit for bit
        new = (buf.head + cfg.dt * rhs + noise) * (1.0 / (1.0 + cfg.dt * stiff))
    else:
        new = buf.head + cfg.dt * (rhs - stiff * buf.head) + noise
    if not np.all(np.isfinite(new)):
        bad = np.where(~np.isfinite(new))[0]
        raise BlowUpError(t + cfg.dt, int(bad[0]))
    return PathState(buffer=buf.appended(t + cfg.dt, new), t=t + cfg.dt,
                     seed=cfg.seed, path_id=state.path_id,
                     step_index=state.step_index + 1)


def run_path(op: PdeOperator, cs: CoefficientSet, cfg: StepperConfig,
             initial: HistoryBuffer, path_id: int = 0) -> Trajectory:
    return PathRunner(op, cs, cfg, initial, path_id=path_id).run()


def coupled_run(op: PdeOperator, cs: CoefficientSet, cfg_eps: StepperConfig,
                cfg_avg: StepperConfig, shared_seed: int, path_id: int = 0,
                initial_eps: HistoryBuffer | None = None,
                initial_avg: HistoryBuffer | None = None,
                initial: HistoryBuffer | None = None):
    """Twin runs of the oscillating and averaged systems on one Brownian path.

    Returns (trajectory_eps, trajectory_avg, sup over the grid of the squared
    state distance).  The two configs must share dt, T, and noise dimension.
    """
    if (cfg_eps.dt != cfg_avg.dt or cfg_eps.T != cfg_avg.T
            or cfg_eps.noise_modes != cfg_avg.noise_modes
            or cfg_eps.scheme != cfg_avg.scheme):
        raise ValueError("coupled runs need identical grids, schemes, and noise")
    if cfg_avg.eps != AVERAGED:
        raise ValueError("second config must use the averaged sentinel")
    cfg_eps = replace(cfg_eps, seed=shared_seed)
    cfg_avg = replace(cfg_avg, seed=shared_seed)
    init_e = initial_eps if initial_eps is not None else initial
    init_a = initial_avg if initial_avg is not None else initial
    k_w = cs.noise_dim(cfg_eps.noise_modes)
    noise = normal_block(shared_seed, path_id, cfg_eps.n_steps, k_w)
    traj_e = PathRunner(op, cs, cfg_eps, init_e, path_id, noise=noise).run()
    traj_a = PathRunner(op, cs, cfg_avg, init_a, path_id, noise=noise).run()
    return traj_e, traj_a, traj_e.sup_sq_distance(traj_a)


def khasminskii_freeze(traj: Trajectory, d: float) -> Trajectory:
    """Piecewise-frozen trajectory: value at the left endpoint of each block
    of length d; history (t < 0) is untouched by construction."""
    dt = traj.times[1] - traj.times[0]
    ratio = d / dt
    if d < dt - 1e-12 or abs(ratio - round(ratio)) > 1e-8:
        raise ValueError("block length d must be an integer multiple of dt")
    m = int(round(ratio))
    idx = (np.arange(len(traj.times)) // m) * m
    return Trajectory(times=traj.times.copy(), states=traj.states[idx])
