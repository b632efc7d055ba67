"""The completely positive map of one protocol cycle.

One cycle takes the spin qubit to spin x one detected time-bin photon:
excitation (early bin) -> emission -> Raman pi flip -> excitation (late
bin) -> emission -> ground rotation R. The detected sector is held as a
finite set of operator summands (4x2 Kraus blocks); re-excitation-type
events that pass post-selection but carry no overlap with the target are
tracked as a scalar orthogonal-error probability, and undetected branches
as a loss probability.

Spin basis: index 0 = spin-down (the optically driven ground state),
index 1 = spin-up. Photon basis: index 0 = early, index 1 = late.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ParamError, betas_from_branching
from .budget import EXC_COEFFICIENT

SPIN_DOWN, SPIN_UP = 0, 1
EARLY, LATE = 0, 1


class ChannelError(ValueError):
    """Inconsistent emission-channel weights."""


@dataclass(frozen=True)
class EmissionChannel:
    """Single-decay branching of the trion, after frequency filtering.

    ``p_detected``       vertical photon into the waveguide (spin preserved)
    ``p_lost_vertical``  vertical photon out of the waveguide (spin preserved)
    ``p_flip_lost``      diagonal photon removed by filter or leak (spin flips)
    ``p_flip_detected``  diagonal waveguide photon reaching the detector when
                         the filter is off; orthogonal to the target packet
    ``indistinguishability``  factor multiplying early-late photon coherence
    """

    p_detected: float
    p_lost_vertical: float
    p_flip_lost: float
    p_flip_detected: float
    indistinguishability: float

    def __post_init__(self):
        total = (
            self.p_detected
            + self.p_lost_vertical
            + self.p_flip_lost
            + self.p_flip_detected
        )
        if abs(total - 1.0) > 1e-9:
            raise ChannelError(f"emission weights must sum to 1, got {total!r}")
        if not (0.0 <= self.indistinguishability <= 1.0):
            raise ChannelError(
                f"indistinguishability must be in [0, 1], got {self.indistinguishability}"
            )


def emission_channel(betas, indistinguishability=1.0, filter_on=True):
    """Map trion occupation to photon fate and final spin state.

    With the frequency filter on, every diagonal photon is removed (lost)
    and flips the spin; with it off, the waveguide-coupled diagonal weight
    reaches the detector as an orthogonal-error photon instead.
    """
    if filter_on:
        flip_lost = betas.beta_perp + betas.beta_perp_leak
        flip_det = 0.0
    else:
        flip_lost = betas.beta_perp_leak
        flip_det = betas.beta_perp
    return EmissionChannel(
        p_detected=betas.beta_par,
        p_lost_vertical=betas.beta_par_leak,
        p_flip_lost=flip_lost,
        p_flip_detected=flip_det,
        indistinguishability=indistinguishability,
    )


@dataclass(frozen=True)
class CycleOptions:
    """Imperfection switches for one protocol cycle.

    ``orthogonal_error_prob``   per-cycle probability of a detected photon
        orthogonal to the target wavepacket (re-excitation double emission,
        unfiltered off-resonant light); a scalar ledger, first-order
        equivalent to enlarging the photonic basis.
    ``off_resonant_prob``       per-pulse which-path marking probability of
        the spectator arm (its branch still reaches the detector but loses
        coherence with the main branch).
    ``quasistatic_detuning``    slowly drifting ground-splitting shift
        (rad/ns), constant over the cycle.
    ``drift_phase``             extra early-late phase imbalance (rad) from
        intra-cycle diffusion; not cancelled by the echo.
    ``echo``                    when False the built-in pi flip refocussing
        is removed from the bookkeeping and the quasistatic detuning
        dephases the full inter-bin delay.
    ``rotation_error_std``      std (rad) of a Gaussian over-rotation of R.
    """

    rotation_angle: float = math.pi
    indistinguishability: float = 1.0
    filter_on: bool = True
    orthogonal_error_prob: float = 0.0
    off_resonant_prob: float = 0.0
    quasistatic_detuning: float = 0.0
    drift_phase: float = 0.0
    echo: bool = True
    half_cycle_time: float = 1.0
    rotation_error_std: float = 0.0


def rotation_matrix(angle):
    """Ground-state Raman rotation about the y axis."""
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass
class CycleMap:
    """Trace-non-increasing map from spin to spin x detected photon.

    ``kraus`` holds 4x2 blocks acting C^2 -> C^2 (x) C^2 with the photon
    index varying fastest (row index = 2*spin + photon). ``orthogonal_prob``
    is the conditional probability that a cycle passing post-selection
    carries an orthogonal photon instead of the coherent output.
    """

    kraus: list = field(default_factory=list)
    orthogonal_prob: float = 0.0

    def detected_weight(self, rho_spin):
        """Probability that the cycle yields a detected coherent output."""
        return float(
            sum(np.trace(k @ rho_spin @ k.conj().T).real for k in self.kraus)
        )

    def weights(self, rho_spin=None):
        """Detected / orthogonal / loss probability split for an input state."""
        if rho_spin is None:
            rho_spin = np.eye(2, dtype=complex) / 2.0
        det = self.detected_weight(rho_spin)
        coherent = det * (1.0 - self.orthogonal_prob)
        orth = det * self.orthogonal_prob
        return {
            "detected": coherent,
            "orthogonal": orth,
            "loss": 1.0 - coherent - orth,
        }

    def choi_matrix(self):
        """Characteristic (Choi) matrix of the detected-sector map, 8x8.

        Block (i, j) of size 4 holds K |i><j| K^dag summed over the operator
        set (input (x) output ordering).
        """
        c = np.zeros((8, 8), dtype=complex)
        for k in self.kraus:
            for i in range(2):
                for j in range(2):
                    c[i * 4 : (i + 1) * 4, j * 4 : (j + 1) * 4] += np.outer(
                        k[:, i], k[:, j].conj()
                    )
        return c


def _ket(spin, photon):
    v = np.zeros(4, dtype=complex)
    v[2 * spin + photon] = 1.0
    return v


def build_cycle_map(betas_or_params, options=None):
    """Compose one excite-emit-flip-excite-emit-rotate round into a CycleMap.

    Accepts either a BranchingBetas or a PhysicalParams; in the latter case
    the branching weights come from ``params.branching`` (unit internal
    efficiency), the photon indistinguishability from the dephasing rate and
    the per-cycle excitation errors from the optimized closed form.
    """
    from .params import (
        BranchingBetas,
        PhysicalParams,
        indistinguishability as indist_fn,
    )

    if options is None:
        options = CycleOptions()

    if isinstance(betas_or_params, PhysicalParams):
        p = betas_or_params
        betas = betas_from_branching(p.branching)
        exc = EXC_COEFFICIENT * p.gamma / p.delta
        options = CycleOptions(
            rotation_angle=options.rotation_angle,
            indistinguishability=indist_fn(p.gamma, p.gamma_d),
            filter_on=options.filter_on,
            orthogonal_error_prob=exc,
            off_resonant_prob=options.off_resonant_prob,
            quasistatic_detuning=options.quasistatic_detuning,
            drift_phase=options.drift_phase,
            echo=options.echo,
            half_cycle_time=p.t_cycle / 2.0,
            rotation_error_std=options.rotation_error_std,
        )
    elif isinstance(betas_or_params, BranchingBetas):
        betas = betas_or_params
    else:
        raise ParamError(
            f"expected BranchingBetas or PhysicalParams, got {type(betas_or_params)}"
        )

    channel = emission_channel(
        betas, options.indistinguishability, filter_on=options.filter_on
    )
    q_det = channel.p_detected
    q_flip = channel.p_flip_lost + channel.p_flip_detected
    p_off = options.off_resonant_prob
    if not (0.0 <= p_off < 1.0):
        raise ParamError(f"off_resonant_prob must be in [0, 1), got {p_off}")
    if not (0.0 <= options.orthogonal_error_prob < 1.0):
        raise ParamError(
            f"orthogonal_error_prob must be in [0, 1), got {options.orthogonal_error_prob}"
        )

    # Quasi-static detuning phase accumulated while an arm sits in spin-up.
    # The arm emitting early spends the late half there; the arm emitting
    # late spends the early half. With the pi flip both halves are equal and
    # the phase is common (the built-in spin echo); without it, one arm
    # dephases over the full inter-bin delay.
    tau = options.half_cycle_time
    if options.echo:
        phase_early_arm = options.quasistatic_detuning * tau + options.drift_phase
        phase_late_arm = options.quasistatic_detuning * tau
    else:
        phase_early_arm = (
            options.quasistatic_detuning * 2.0 * tau + options.drift_phase
        )
        phase_late_arm = 0.0

    amp_main = math.sqrt(q_det * (1.0 - p_off))
    k_main = amp_main * (
        np.exp(1j * phase_early_arm) * np.outer(_ket(SPIN_UP, EARLY), [1, 0])
        + np.exp(1j * phase_late_arm) * np.outer(_ket(SPIN_DOWN, LATE), [0, 1])
    )

    kraus = [k_main]
    # early diagonal decay, then a detected vertical late photon
    if q_flip > 0.0:
        kraus.append(
            math.sqrt(q_flip * q_det) * np.outer(_ket(SPIN_DOWN, LATE), [1, 0])
        )
    # which-path marking of the spectator arm by off-resonant emission
    if p_off > 0.0:
        kraus.append(
            math.sqrt(p_off * q_det) * np.outer(_ket(SPIN_DOWN, LATE), [0, 1])
        )
        kraus.append(
            math.sqrt(p_off * q_det) * np.outer(_ket(SPIN_UP, EARLY), [1, 0])
        )
    # unfiltered diagonal photon: detected but orthogonal; enters the scalar
    # ledger together with any configured re-excitation weight
    orth = options.orthogonal_error_prob + channel.p_flip_detected

    # phonon dephasing of the early-late coherence: scale by I via a photon
    # phase-flip channel, exact for the coherence factor
    ind = channel.indistinguishability
    p_z = (1.0 - ind) / 2.0
    if p_z > 0.0:
        z_photon = np.kron(np.eye(2), np.diag([1.0, -1.0])).astype(complex)
        dephased = []
        for k in kraus:
            dephased.append(math.sqrt(1.0 - p_z) * k)
            dephased.append(math.sqrt(p_z) * (z_photon @ k))
        kraus = dephased

    # ground rotation R, with optional Gaussian over-rotation implemented as
    # the averaged channel (rotation followed by partial y-dephasing)
    u_r = np.kron(rotation_matrix(options.rotation_angle), np.eye(2))
    kraus = [u_r @ k for k in kraus]
    if options.rotation_error_std > 0.0:
        coh = math.exp(-(options.rotation_error_std**2) / 2.0)
        p_y = (1.0 - coh) / 2.0
        y_spin = np.kron(np.array([[0, -1j], [1j, 0]]), np.eye(2)).astype(complex)
        mixed = []
        for k in kraus:
            mixed.append(math.sqrt(1.0 - p_y) * k)
            mixed.append(math.sqrt(p_y) * (y_spin @ k))
        kraus = mixed

    return CycleMap(kraus=kraus, orthogonal_prob=orth)


def ideal_cycle_map(rotation_angle=math.pi):
    """The imperfection-free cycle isometry."""
    from .params import BranchingBetas

    betas = BranchingBetas(
        beta_par=1.0, beta_perp=0.0, beta_par_leak=0.0, beta_perp_leak=0.0
    )
    return build_cycle_map(betas, CycleOptions(rotation_angle=rotation_angle))
