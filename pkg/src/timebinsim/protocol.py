"""Sequential composition of cycle maps into N-photon hybrid states.

State ordering convention: the spin is the first tensor factor, photons
follow in emission order, so after N cycles the density operator lives on
spin (x) photon_1 (x) ... (x) photon_N with dimension 2^(N+1).

Post-selected representation: branches in which a cycle yields no photon
in either time bin are pruned every round; only their probability is kept
(``success_probability``). Detected-but-orthogonal weight is carried as a
scalar alongside the density operator, normalized so that
``trace(rho) + orthogonal_error_mass = 1`` after each round.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .cyclemap import CycleMap, CycleOptions, build_cycle_map, rotation_matrix
from .params import ParamError, PhysicalParams

DEFAULT_PHOTON_CAP = 10


class CapacityError(RuntimeError):
    """Requested photon number exceeds the configured density-operator cap."""


class TargetKind(Enum):
    GHZ = "ghz"
    CLUSTER = "cluster"

    @property
    def rotation_angle(self):
        return math.pi if self is TargetKind.GHZ else math.pi / 2.0


@dataclass(frozen=True)
class NoiseConfig:
    """Quasi-static Overhauser noise plus optional slow intra-cycle drift.

    ``overhauser_sigma`` is the std of the Gaussian ground-splitting shift
    (rad/ns), related to the inhomogeneous dephasing time by
    sigma = sqrt(2) / t2_star. ``drift_diffusion`` (rad^2/ns^3) feeds a
    per-cycle Wiener phase imbalance of variance drift_diffusion *
    t_cycle^3 that the echo does not cancel.
    """

    overhauser_sigma: float
    drift_diffusion: float = 0.0
    sample_count: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ParamError(f"sample_count must be >= 1, got {self.sample_count}")
        if self.overhauser_sigma < 0:
            raise ParamError(f"overhauser_sigma must be >= 0, got {self.overhauser_sigma}")


def drift_diffusion_from_t2(t2, t_cycle, c_model=0.5):
    """Diffusion constant giving per-cycle error c_model*(t_cycle/t2)^2."""
    return 4.0 * c_model / (t2**2 * t_cycle)


@dataclass
class HybridState:
    """Post-selected state of spin (x) N time-bin qubits."""

    rho: np.ndarray
    success_probability: float
    orthogonal_error_mass: float
    photon_count: int

    @property
    def dim(self):
        return self.rho.shape[0]

    def dump(self, path):
        """Textual dump: dimension header, then row-major complex entries."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                f"dim {self.dim} photons {self.photon_count} "
                f"success {self.success_probability:.17g} "
                f"orthogonal {self.orthogonal_error_mass:.17g}\n"
            )
            for row in self.rho:
                fh.write(" ".join(f"{v.real:.17g}{v.imag:+.17g}j" for v in row) + "\n")


def _apply_cycle_kraus(rho, cycle):
    """Apply a CycleMap's detected sector; appends the new photon last."""
    d = rho.shape[0]
    r = d // 2
    t = rho.reshape(2, r, 2, r)
    out = np.zeros((2, 2, r, 2, 2, r), dtype=complex)
    for k in cycle.kraus:
        kt = k.reshape(2, 2, 2)  # [spin_out, photon, spin_in]
        out += np.einsum("api,irjq,bcj->aprbcq", kt, t, kt.conj(), optimize=True)
    # reorder (spin, photon_new, rest | ...) -> (spin, rest, photon_new | ...)
    out = out.transpose(0, 2, 1, 3, 5, 4)
    return out.reshape(2 * d, 2 * d)


def _initial_spin():
    u = rotation_matrix(math.pi / 2.0)
    psi = u @ np.array([1.0, 0.0], dtype=complex)
    return np.outer(psi, psi.conj())


def run_protocol_cycles(cycles, cap=DEFAULT_PHOTON_CAP):
    """Run the protocol with an explicit per-round sequence of cycle maps."""
    n = len(cycles)
    if n > cap:
        raise CapacityError(
            f"{n} photons exceeds the configured cap of {cap} "
            f"(density operator would be {2**(n+1)}-dimensional)"
        )
    rho = _initial_spin()
    orth = 0.0
    success = 1.0
    for cycle in cycles:
        tr_in = float(np.trace(rho).real)
        spin_rho = _trace_out_photons(rho)
        det = cycle.detected_weight(spin_rho / max(tr_in, 1e-300)) * tr_in
        p_o = cycle.orthogonal_prob
        rho = _apply_cycle_kraus(rho, cycle) * (1.0 - p_o)
        # the orthogonal sector keeps taking part in later rounds; its
        # per-round detection probability is taken equal to the coherent one
        d_rate = det / max(tr_in, 1e-300)
        orth = orth * d_rate + p_o * det
        total = float(np.trace(rho).real) + orth
        if total <= 0.0:
            raise ParamError("protocol lost all probability; check the cycle map")
        success *= total
        rho = rho / total
        orth = orth / total
    return HybridState(
        rho=rho,
        success_probability=success,
        orthogonal_error_mass=orth,
        photon_count=n,
    )


def _trace_out_photons(rho):
    d = rho.shape[0]
    r = d // 2
    return np.trace(rho.reshape(2, r, 2, r), axis1=1, axis2=3)


def run_protocol(cycle, n_photons, kind=TargetKind.GHZ, noise=None, cap=DEFAULT_PHOTON_CAP, options=None):
    """Apply initialization and N identical cycles.

    ``cycle`` may be a ready CycleMap or a PhysicalParams from which a map
    with the kind's rotation angle is built. With a NoiseConfig, samples of
    the quasi-static detuning (and drift) are averaged at the density-
    operator level; reproducible for a fixed rng_seed.
    """
    n = int(n_photons)
    if n < 1:
        raise ParamError(f"n_photons must be >= 1, got {n_photons}")
    if isinstance(cycle, CycleMap):
        if noise is not None:
            raise ParamError("noise averaging needs PhysicalParams, not a fixed CycleMap")
        return run_protocol_cycles([cycle] * n, cap=cap)

    if not isinstance(cycle, PhysicalParams):
        raise ParamError(f"expected CycleMap or PhysicalParams, got {type(cycle)}")
    params = cycle
    base = options if options is not None else CycleOptions()
    base = _with_rotation(base, kind.rotation_angle)
    if noise is None:
        return run_protocol_cycles([build_cycle_map(params, base)] * n, cap=cap)

    states = []
    seeds = np.random.SeedSequence(noise.rng_seed).spawn(noise.sample_count)
    for seq in seeds:
        rng = np.random.default_rng(seq)
        cycles = _noisy_cycles(params, n, kind, base, noise, rng)
        states.append(run_protocol_cycles(cycles, cap=cap))
    rho = sum(s.rho for s in states) / len(states)
    orth = sum(s.orthogonal_error_mass for s in states) / len(states)
    succ = sum(s.success_probability for s in states) / len(states)
    return HybridState(rho, succ, orth, n)


def _with_rotation(opts, angle):
    from dataclasses import replace

    return replace(opts, rotation_angle=angle)


def _noisy_cycles(params, n, kind, base, noise, rng):
    from dataclasses import replace

    delta_shift = rng.normal(0.0, noise.overhauser_sigma) if noise.overhauser_sigma else 0.0
    drift_std = (
        math.sqrt(noise.drift_diffusion * params.t_cycle**3)
        if noise.drift_diffusion
        else 0.0
    )
    cycles = []
    for _ in range(n):
        kick = rng.normal(0.0, drift_std) if drift_std else 0.0
        opts = replace(base, quasistatic_detuning=delta_shift, drift_phase=kick)
        cycles.append(build_cycle_map(params, opts))
    return cycles


@lru_cache(maxsize=32)
def ideal_target(n_photons, kind):
    """Statevector output of the imperfection-free protocol."""
    n = int(n_photons)
    if n < 1:
        raise ParamError(f"n_photons must be >= 1, got {n_photons}")
    u_r = rotation_matrix(kind.rotation_angle)
    psi = rotation_matrix(math.pi / 2.0) @ np.array([1.0, 0.0], dtype=complex)
    # ideal cycle isometry: spin-down -> spin-up (x) early, spin-up -> spin-down (x) late
    v = np.zeros((2, 2, 2), dtype=complex)  # [spin_out, photon, spin_in]
    v[1, 0, 0] = 1.0
    v[0, 1, 1] = 1.0
    v = np.einsum("ab,bpi->api", u_r, v)
    for k in range(n):
        r = psi.size // 2
        t = psi.reshape(2, r)
        t = np.einsum("api,ir->arp", v, t)
        psi = t.reshape(-1)
    return psi


def conditional_fidelity(state, target):
    """Overlap with the target within the detected sector."""
    target = np.asarray(target, dtype=complex)
    if target.shape != (state.dim,):
        raise ParamError(
            f"dimension mismatch: state dim {state.dim}, target {target.shape}"
        )
    num = float(np.real(target.conj() @ state.rho @ target))
    den = float(np.trace(state.rho).real) + state.orthogonal_error_mass
    return num / den


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _pauli_string(labels):
    op = np.array([[1.0]], dtype=complex)
    for l in labels:
        op = np.kron(op, _PAULI[l])
    return op


def canonical_stabilizers(n_photons, kind):
    """Unsigned stabilizer generators, in state order (spin, p1..pN).

    The chain underlying both kinds is (p1, ..., pN, spin): photons in
    emission order with the spin at the end.
    """
    n = n_photons
    chain_to_state = list(range(1, n + 1)) + [0]
    gens = []
    if kind is TargetKind.GHZ:
        labels = ["X"] * (n + 1)
        gens.append(("X" * (n + 1), _pauli_string(labels)))
        for j in range(n):
            labels = ["I"] * (n + 1)
            labels[chain_to_state[j]] = "Z"
            labels[chain_to_state[j + 1]] = "Z"
            gens.append(("".join(labels), _pauli_string(labels)))
    else:
        for j in range(n + 1):
            labels = ["I"] * (n + 1)
            labels[chain_to_state[j]] = "X"
            if j > 0:
                labels[chain_to_state[j - 1]] = "Z"
            if j < n:
                labels[chain_to_state[j + 1]] = "Z"
            gens.append(("".join(labels), _pauli_string(labels)))
    return gens


@lru_cache(maxsize=32)
def _frame_signs(n_photons, kind):
    """Signs fixing the local frame of the ideal protocol output."""
    psi = ideal_target(n_photons, kind)
    signs = []
    for label, op in canonical_stabilizers(n_photons, kind):
        val = float(np.real(psi.conj() @ op @ psi))
        if abs(abs(val) - 1.0) > 1e-9:
            raise RuntimeError(
                f"stabilizer {label} is not +-1 on the ideal state ({val}); "
                "frame convention broken"
            )
        signs.append(1.0 if val > 0 else -1.0)
    return tuple(signs)


def stabilizer_expectations(state, kind):
    """Expectations of the N+1 frame-corrected stabilizers."""
    n = state.photon_count
    signs = _frame_signs(n, kind)
    den = float(np.trace(state.rho).real) + state.orthogonal_error_mass
    out = []
    for sign, (label, op) in zip(signs, canonical_stabilizers(n, kind)):
        out.append(sign * float(np.real(np.trace(op @ state.rho))) / den)
    return out


def overhauser_average(params, n_photons, kind, noise, options=None, cap=DEFAULT_PHOTON_CAP):
    """Monte Carlo average of the conditional fidelity over Overhauser noise.

    Each sample draws its own child seed from (rng_seed, sample index), so
    results do not depend on evaluation order.
    """
    base = options if options is not None else CycleOptions()
    base = _with_rotation(base, kind.rotation_angle)
    target = ideal_target(n_photons, kind)
    seeds = np.random.SeedSequence(noise.rng_seed).spawn(noise.sample_count)
    fids = []
    for seq in seeds:
        rng = np.random.default_rng(seq)
        cycles = _noisy_cycles(params, n_photons, kind, base, noise, rng)
        st = run_protocol_cycles(cycles, cap=cap)
        fids.append(conditional_fidelity(st, target))
    fids = np.asarray(fids)
    std_err = float(fids.std(ddof=1) / math.sqrt(len(fids))) if len(fids) > 1 else 0.0
    return {"mean_fidelity": float(fids.mean()), "std_error": std_err}
