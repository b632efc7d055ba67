"""Time-domain dynamics of the driven four-level emitter.

Level ordering used everywhere: 0 = ground spin-down, 1 = ground spin-up,
2 = trion spin-down, 3 = trion spin-up. The excitation laser is resonant
with the 0 <-> 2 vertical transition; the same field couples 1 <-> 3 with
detuning ``delta``. Cross transitions (0 <-> 3, 1 <-> 2 driving) are
excluded: they are suppressed by laser polarisation in the side-excitation
geometry. Each trion decays through four channels (vertical / diagonal,
into / out of the waveguide); pure dephasing acts on the trion levels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .params import BranchingBetas, ParamError, betas_from_branching

N_LEVELS = 4
GROUND_DOWN, GROUND_UP, TRION_DOWN, TRION_UP = range(N_LEVELS)

# Free-decay window appended after each pulse; residual trion population
# after 8 lifetimes is below 4e-4.
DECAY_WINDOW_LIFETIMES = 8.0


class IntegrationError(RuntimeError):
    """Master-equation integration failed; message carries solver diagnostics."""


@dataclass(frozen=True)
class LevelSystem:
    """Four-level emitter with per-channel decay rates (1/ns).

    ``ground_splitting`` and ``delta`` are angular frequencies (rad/ns);
    ``delta`` is the detuning of the off-resonant 1 <-> 3 transition from
    the drive. The four decay rates apply to each trion symmetrically
    (vertical preserves the spin branch, diagonal flips it).
    """

    ground_splitting: float
    delta: float
    rate_vertical_wg: float
    rate_vertical_leak: float
    rate_diagonal_wg: float
    rate_diagonal_leak: float
    dephasing: float = 0.0

    @property
    def gamma(self):
        return (
            self.rate_vertical_wg
            + self.rate_vertical_leak
            + self.rate_diagonal_wg
            + self.rate_diagonal_leak
        )

    @property
    def betas(self):
        g = self.gamma
        return BranchingBetas(
            beta_par=self.rate_vertical_wg / g,
            beta_perp=self.rate_diagonal_wg / g,
            beta_par_leak=self.rate_vertical_leak / g,
            beta_perp_leak=self.rate_diagonal_leak / g,
        )

    @classmethod
    def from_rates(cls, gamma, betas, delta, dephasing=0.0, ground_splitting=0.0):
        """Split a total decay rate over the four channels of ``betas``."""
        if gamma <= 0:
            raise ParamError(f"gamma must be positive, got {gamma}")
        return cls(
            ground_splitting=ground_splitting,
            delta=delta,
            rate_vertical_wg=gamma * betas.beta_par,
            rate_vertical_leak=gamma * betas.beta_par_leak,
            rate_diagonal_wg=gamma * betas.beta_perp,
            rate_diagonal_leak=gamma * betas.beta_perp_leak,
            dephasing=dephasing,
        )

    @classmethod
    def from_params(cls, params, beta_total=1.0):
        betas = betas_from_branching(params.branching, beta_total=beta_total)
        return cls.from_rates(params.gamma, betas, params.delta, params.gamma_d)


@dataclass(frozen=True)
class Pulse:
    """Excitation pulse on the driven transition.

    ``duration`` is the full width for a square pulse and the FWHM for a
    gaussian one (truncated at +-3 sigma). The peak Rabi frequency is fixed
    by the pulse area (default pi).
    """

    shape: str
    duration: float
    area: float = math.pi
    carrier_detuning: float = 0.0

    def __post_init__(self):
        if self.shape not in ("square", "gaussian"):
            raise ParamError(f"unknown pulse shape {self.shape!r}")
        if self.duration <= 0:
            raise ParamError(f"pulse duration must be positive, got {self.duration}")

    @property
    def sigma(self):
        return self.duration / (2.0 * math.sqrt(2.0 * math.log(2.0)))

    @property
    def span(self):
        """Time interval (t0, t1) outside of which the drive is zero."""
        if self.shape == "square":
            return (0.0, self.duration)
        return (0.0, 6.0 * self.sigma)

    @property
    def peak_rabi(self):
        if self.shape == "square":
            return self.area / self.duration
        s = self.sigma
        # area of the +-3 sigma truncated gaussian envelope
        norm = s * math.sqrt(2.0 * math.pi) * math.erf(3.0 / math.sqrt(2.0))
        return self.area / norm

    def envelope(self, t):
        """Instantaneous Rabi frequency at time t (rad/ns)."""
        t0, t1 = self.span
        if t < t0 or t > t1:
            return 0.0
        if self.shape == "square":
            return self.peak_rabi
        tc = 0.5 * (t0 + t1)
        return self.peak_rabi * math.exp(-((t - tc) ** 2) / (2.0 * self.sigma**2))


def _collapse_ops(system):
    ops = []

    def proj(i, j, rate):
        m = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
        m[i, j] = 1.0
        return math.sqrt(rate) * m

    ops.append(proj(GROUND_DOWN, TRION_DOWN, system.rate_vertical_wg))
    ops.append(proj(GROUND_DOWN, TRION_DOWN, system.rate_vertical_leak))
    ops.append(proj(GROUND_UP, TRION_DOWN, system.rate_diagonal_wg))
    ops.append(proj(GROUND_UP, TRION_DOWN, system.rate_diagonal_leak))
    ops.append(proj(GROUND_UP, TRION_UP, system.rate_vertical_wg))
    ops.append(proj(GROUND_UP, TRION_UP, system.rate_vertical_leak))
    ops.append(proj(GROUND_DOWN, TRION_UP, system.rate_diagonal_wg))
    ops.append(proj(GROUND_DOWN, TRION_UP, system.rate_diagonal_leak))
    if system.dephasing > 0.0:
        d = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
        d[TRION_DOWN, TRION_DOWN] = 1.0
        d[TRION_UP, TRION_UP] = 1.0
        ops.append(math.sqrt(2.0 * system.dephasing) * d)
    return [op for op in ops if np.any(op)]


def _hamiltonian(system, rabi, carrier_detuning=0.0):
    h = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    h[GROUND_DOWN, TRION_DOWN] = h[TRION_DOWN, GROUND_DOWN] = rabi / 2.0
    h[GROUND_UP, TRION_UP] = h[TRION_UP, GROUND_UP] = rabi / 2.0
    h[TRION_DOWN, TRION_DOWN] = -carrier_detuning
    h[TRION_UP, TRION_UP] = system.delta - carrier_detuning
    h[GROUND_UP, GROUND_UP] = system.ground_splitting
    return h


def _check_density_operator(rho, tol=1e-12):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (N_LEVELS, N_LEVELS):
        raise ParamError(f"density operator must be 4x4, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ParamError("density operator is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise ParamError(f"density operator trace is {np.trace(rho).real}, not 1")
    w = np.linalg.eigvalsh(rho)
    if w.min() < -tol:
        raise ParamError(f"density operator has negative eigenvalue {w.min()}")
    return rho


@dataclass
class TimeSeries:
    times: np.ndarray
    states: np.ndarray  # shape (n_times, 4, 4)
    emissions_trion_down: float = 0.0
    emissions_trion_up: float = 0.0

    def dump_csv(self, path):
        """Write times and row-major density-matrix entries (re, im) to CSV."""
        with open(path, "w", encoding="utf-8") as fh:
            cols = ["time_ns"]
            for i in range(N_LEVELS):
                for j in range(N_LEVELS):
                    cols += [f"re_{i}{j}", f"im_{i}{j}"]
            fh.write("# " + ",".join(cols) + "\n")
            for t, rho in zip(self.times, self.states):
                row = [f"{t:.9g}"]
                for v in rho.ravel():
                    row += [f"{v.real:.9g}", f"{v.imag:.9g}"]
                fh.write(",".join(row) + "\n")


def integrate_master_equation(
    system, pulse, initial, horizon=None, tolerance=1e-9, n_samples=200
):
    """Evolve a density operator under drive plus spontaneous decay.

    Returns a TimeSeries sampled at ``n_samples`` points over the horizon
    (pulse span plus a decay window of 8 lifetimes by default), together
    with the accumulated expected photon-emission numbers from each trion.
    """
    rho0 = _check_density_operator(initial)
    t0, t1 = pulse.span if pulse is not None else (0.0, 0.0)
    if horizon is None:
        horizon = t1 + DECAY_WINDOW_LIFETIMES / system.gamma
    if horizon <= t0:
        raise ParamError(f"horizon {horizon} does not cover the pulse span")

    ls = _collapse_ops(system)
    ldl = sum(l.conj().T @ l for l in ls)
    gamma = system.gamma

    def rhs(t, y):
        rho = y[:16].reshape(N_LEVELS, N_LEVELS)
        rabi = pulse.envelope(t) if pulse is not None else 0.0
        h = _hamiltonian(system, rabi, pulse.carrier_detuning if pulse else 0.0)
        drho = -1j * (h @ rho - rho @ h)
        for l in ls:
            drho += l @ rho @ l.conj().T
        drho += -0.5 * (ldl @ rho + rho @ ldl)
        m_down = gamma * rho[TRION_DOWN, TRION_DOWN]
        m_up = gamma * rho[TRION_UP, TRION_UP]
        return np.concatenate([drho.ravel(), [m_down, m_up]])

    y0 = np.concatenate([rho0.ravel(), [0.0, 0.0]])
    t_eval = np.linspace(t0, horizon, n_samples)
    sol = solve_ivp(
        rhs,
        (t0, horizon),
        y0,
        t_eval=t_eval,
        rtol=tolerance,
        atol=tolerance * 1e-3,
        max_step=(t1 - t0) / 20.0 if t1 > t0 else np.inf,
    )
    if not sol.success:
        raise IntegrationError(f"master-equation integration failed: {sol.message}")
    states = sol.y[:16].T.reshape(-1, N_LEVELS, N_LEVELS)
    return TimeSeries(
        times=sol.t,
        states=states,
        emissions_trion_down=float(sol.y[16, -1].real),
        emissions_trion_up=float(sol.y[17, -1].real),
    )


def _integrate_over_pulse(system, pulse, start_level, tolerance):
    """Lindblad evolution over the pulse span only, with emission counters.

    The free decay after the pulse needs no integration: every remaining
    trion population decays exactly once, so the post-pulse emission tail
    equals the final trion populations.
    """
    ls = _collapse_ops(system)
    ldl = sum(l.conj().T @ l for l in ls)
    gamma = system.gamma
    t0, t1 = pulse.span

    def rhs(t, y):
        rho = y[:16].reshape(N_LEVELS, N_LEVELS)
        h = _hamiltonian(system, pulse.envelope(t), pulse.carrier_detuning)
        drho = -1j * (h @ rho - rho @ h)
        for l in ls:
            drho += l @ rho @ l.conj().T
        drho += -0.5 * (ldl @ rho + rho @ ldl)
        return np.concatenate(
            [
                drho.ravel(),
                [gamma * rho[TRION_DOWN, TRION_DOWN], gamma * rho[TRION_UP, TRION_UP]],
            ]
        )

    y0 = np.zeros(18, dtype=complex)
    y0[start_level * (N_LEVELS + 1)] = 1.0
    sol = solve_ivp(rhs, (t0, t1), y0, rtol=tolerance, atol=1e-14)
    if not sol.success:
        raise IntegrationError(f"pulse integration failed: {sol.message}")
    rho_end = sol.y[:16, -1].reshape(N_LEVELS, N_LEVELS)
    mu_down = sol.y[16, -1].real + rho_end[TRION_DOWN, TRION_DOWN].real
    mu_up = sol.y[17, -1].real + rho_end[TRION_UP, TRION_UP].real
    return rho_end, mu_down, mu_up


def _no_emission_probability(system, pulse, tolerance):
    """Probability that no photon is ever emitted, from the no-jump evolution."""
    ls = _collapse_ops(system)
    ldl = sum(l.conj().T @ l for l in ls)
    t0, t1 = pulse.span

    def rhs(t, y):
        h = _hamiltonian(system, pulse.envelope(t), pulse.carrier_detuning)
        heff = h - 0.5j * ldl
        return -1j * (heff @ y)

    psi0 = np.zeros(N_LEVELS, dtype=complex)
    psi0[GROUND_DOWN] = 1.0
    sol = solve_ivp(rhs, (t0, t1), psi0, rtol=tolerance, atol=1e-14)
    if not sol.success:
        raise IntegrationError(f"no-jump integration failed: {sol.message}")
    psi = sol.y[:, -1]
    # after the pulse the remaining trion amplitude decays away (emits)
    return float(abs(psi[GROUND_DOWN]) ** 2 + abs(psi[GROUND_UP]) ** 2)


@dataclass(frozen=True)
class ExcitationErrors:
    """Per-pulse infidelity contributions of the driving imperfections.

    Each field is the raw event probability weighted by the state-infidelity
    it causes on an equal superposition: a fully orthogonal detected branch
    (re-excitation) contributes p/2, a which-path-marking branch that still
    reaches the target time bin (off-resonant emission) contributes p/4,
    and an undetected branch (incomplete inversion) contributes p/2 as a
    conservative bound. ``total`` is their sum.
    """

    off_resonant: float
    re_excitation: float
    incomplete_inversion: float

    @property
    def total(self):
        return self.off_resonant + self.re_excitation + self.incomplete_inversion


def excitation_error_probability(system, pulse, tolerance=1e-10):
    """Driving-error budget of one excitation pulse.

    Computed from the integrated dynamics: expected emissions beyond the
    first on the driven branch give the re-excitation weight, emissions on
    the detuned branch (starting from the spectator ground state) give the
    off-resonant weight, and the no-jump survival of the ground manifold
    gives the incomplete-inversion weight.
    """
    if abs(pulse.area - math.pi) > 1e-9:
        raise ParamError(f"excitation pulses must have area pi, got {pulse.area}")
    _, mu_down, _ = _integrate_over_pulse(system, pulse, GROUND_DOWN, tolerance)
    p_no = _no_emission_probability(system, pulse, tolerance)
    mu_re = max(mu_down - (1.0 - p_no), 0.0)
    _, _, mu_off = _integrate_over_pulse(system, pulse, GROUND_UP, tolerance)
    return ExcitationErrors(
        off_resonant=mu_off / 4.0,
        re_excitation=mu_re / 2.0,
        incomplete_inversion=p_no / 2.0,
    )


def optimize_pulse_duration(
    system, shape="square", bounds=None, rel_tol=1e-3, n_scan=40, tolerance=1e-9
):
    """Minimize the total per-pulse excitation error over the duration.

    The error landscape carries an oscillatory off-resonant component, so a
    geometric coarse scan brackets the global minimum before a golden-section
    refinement to relative duration tolerance ``rel_tol``.
    """
    if bounds is None:
        bounds = (1.5 / system.delta, 30.0 / system.delta)
    lo, hi = bounds
    if not (0 < lo < hi):
        raise ParamError(f"invalid duration bounds {bounds}")

    def err(duration):
        return excitation_error_probability(
            system, Pulse(shape=shape, duration=duration), tolerance=tolerance
        ).total

    grid = np.geomspace(lo, hi, n_scan)
    vals = [err(t) for t in grid]
    k = int(np.argmin(vals))
    if k == 0 or k == n_scan - 1:
        raise ParamError(
            "no interior minimum within duration bounds "
            f"({lo:.3g}, {hi:.3g}); endpoint error is minimal"
        )

    a, b = grid[k - 1], grid[k + 1]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = err(c), err(d)
    while (b - a) > rel_tol * (a + b) / 2.0:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = err(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = err(d)
    t_opt = c if fc < fd else d
    return {"duration_opt": float(t_opt), "error_min": float(min(fc, fd))}
