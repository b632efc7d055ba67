"""Time-bin measurement model: interferometer bases, finite efficiency,
shot sampling and estimator-based GHZ fidelity extraction.

A photon routed through a single interferometer arm is measured in the
time-bin (Z) basis; interfering the early and late components yields a
phase basis X(phi), with Y = X(pi/2). Finite efficiency eta adds a
no-click element (1 - eta) * identity to every setting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

Z_OUTCOMES = ("early", "late")
PHASE_OUTCOMES = ("plus", "minus")
NO_CLICK = "no_click"


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class BasisSetting:
    """Z or phase basis, with active (deterministic) or passive routing."""

    kind: str  # "Z" or "X"
    phase: float = 0.0
    routing: str = "active"

    def __post_init__(self):
        if self.kind not in ("Z", "X"):
            raise MeasurementError(f"basis kind must be 'Z' or 'X', got {self.kind!r}")
        if not (0.0 <= self.phase < 2.0 * math.pi):
            raise MeasurementError(f"phase must be in [0, 2pi), got {self.phase}")
        if self.routing not in ("active", "passive"):
            raise MeasurementError(f"routing must be active or passive, got {self.routing!r}")

    @classmethod
    def z(cls):
        return cls(kind="Z")

    @classmethod
    def x(cls, phase=0.0):
        return cls(kind="X", phase=phase % (2.0 * math.pi))

    @classmethod
    def y(cls):
        return cls.x(math.pi / 2.0)


@dataclass(frozen=True)
class DetectionRecord:
    shot: int
    qubit: int
    setting: BasisSetting
    outcome: str


def _phase_kets(phi):
    plus = np.array([1.0, np.exp(1j * phi)], dtype=complex) / math.sqrt(2.0)
    minus = np.array([1.0, -np.exp(1j * phi)], dtype=complex) / math.sqrt(2.0)
    return plus, minus


def povm_elements(setting, eta=1.0):
    """Positive operators of one time-bin qubit measurement.

    Returns a list of (outcome label, 2x2 operator); elements sum to the
    identity. Passive routing splits each shot evenly between the Z and
    phase branches.
    """
    if not (0.0 <= eta <= 1.0):
        raise MeasurementError(f"eta must be in [0, 1], got {eta}")
    z_els = [
        ("early", eta * np.diag([1.0, 0.0]).astype(complex)),
        ("late", eta * np.diag([0.0, 1.0]).astype(complex)),
    ]
    plus, minus = _phase_kets(setting.phase)
    x_els = [
        ("plus", eta * np.outer(plus, plus.conj())),
        ("minus", eta * np.outer(minus, minus.conj())),
    ]
    if setting.routing == "passive":
        els = [(lbl, 0.5 * op) for lbl, op in z_els + x_els]
    elif setting.kind == "Z":
        els = z_els
    else:
        els = x_els
    els.append((NO_CLICK, (1.0 - eta) * np.eye(2, dtype=complex)))
    return els


def joint_outcome_distribution(rho, settings, eta=1.0):
    """Exact joint POVM distribution over per-qubit outcome tuples.

    ``settings`` must have one entry per tensor factor of ``rho`` (spin
    first when included). Returns (outcome label tuples, probabilities).
    """
    rho = np.asarray(rho, dtype=complex)
    n = len(settings)
    if rho.shape != (2**n, 2**n):
        raise MeasurementError(
            f"state dimension {rho.shape} does not match {n} settings"
        )
    element_sets = [povm_elements(s, eta) for s in settings]
    labels = [[lbl for lbl, _ in els] for els in element_sets]
    t = rho.reshape((2,) * n + (2,) * n)
    for q, els in enumerate(element_sets):
        ops = np.stack([op for _, op in els])  # (k, 2, 2)
        # Tr(E rho) per qubit: E[i, j] pairs with rho's ket index j and bra
        # index i. After q contractions the outcome axes occupy 0..q-1, so
        # qubit q's ket axis sits at q and its bra axis at n.
        t = np.tensordot(ops, t, axes=[[2, 1], [q, n]])
        # tensordot puts the outcome axis first; rotate it behind previous ones
        t = np.moveaxis(t, 0, q)
    probs = np.real(t.reshape(-1))
    outcomes = list(product(*labels))
    return outcomes, np.clip(probs, 0.0, None)


def sample_measurements(state, settings, shots, seed=0):
    """Draw i.i.d. shots from the joint outcome distribution.

    ``state`` is a HybridState (or density operator); the orthogonal-error
    mass of a HybridState contributes click patterns drawn from the
    maximally mixed photon populations, as its photons still trigger the
    detectors. Deterministic for a fixed seed.
    """
    rho, orth = _as_rho(state)
    outcomes, probs = joint_outcome_distribution(rho, settings, eta=_ETA_DEFAULT)
    if orth > 0.0:
        mixed = np.eye(rho.shape[0], dtype=complex) / rho.shape[0]
        _, p2 = joint_outcome_distribution(mixed, settings, eta=_ETA_DEFAULT)
        probs = probs + orth * p2
    return _sample(outcomes, probs, settings, shots, seed)


_ETA_DEFAULT = 1.0


def sample_measurements_with_eta(state, settings, shots, seed=0, eta=1.0):
    rho, orth = _as_rho(state)
    outcomes, probs = joint_outcome_distribution(rho, settings, eta=eta)
    if orth > 0.0:
        mixed = np.eye(rho.shape[0], dtype=complex) / rho.shape[0]
        _, p2 = joint_outcome_distribution(mixed, settings, eta=eta)
        probs = probs + orth * p2
    return _sample(outcomes, probs, settings, shots, seed)


def _as_rho(state):
    if hasattr(state, "rho"):
        tr = float(np.trace(state.rho).real)
        return state.rho / tr, state.orthogonal_error_mass / tr
    rho = np.asarray(state, dtype=complex)
    return rho / float(np.trace(rho).real), 0.0


def _sample(outcomes, probs, settings, shots, seed):
    if shots < 1:
        raise MeasurementError(f"shots must be >= 1, got {shots}")
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    counts = rng.multinomial(shots, probs)
    combo_indices = np.repeat(np.arange(len(outcomes)), counts)
    # multinomial counts come grouped by outcome; shuffle the shot order so
    # consecutive shots (and hence jackknife blocks) are exchangeable
    rng.shuffle(combo_indices)
    records = []
    for shot_idx, ci in enumerate(combo_indices):
        for q, (out, setting) in enumerate(zip(outcomes[ci], settings)):
            records.append(
                DetectionRecord(shot=shot_idx, qubit=q, setting=setting, outcome=out)
            )
    return records


def records_to_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("shot,setting,qubit,outcome\n")
        for r in records:
            name = r.setting.kind if r.setting.kind == "Z" else f"X({r.setting.phase:.6g})"
            fh.write(f"{r.shot},{name},{r.qubit},{r.outcome}\n")


def ghz_parity_settings(n_qubits):
    """Phase settings phi_k = k pi / n, k = 0..2n-1, for the parity scan."""
    return [
        BasisSetting.x(phase=(k * math.pi / n_qubits) % (2.0 * math.pi))
        for k in range(2 * n_qubits)
    ]


def _group_by_shot(records):
    shots = {}
    for r in records:
        shots.setdefault(r.shot, {})[r.qubit] = r
    return list(shots.values())


def estimate_ghz_fidelity(records_by_setting, n_qubits, target_phase=0.0, n_blocks=20):
    """Population-plus-parity GHZ fidelity with jackknife error bars.

    ``records_by_setting`` maps a setting signature to a record list: key
    "Z" for the all-Z run and keys equal to the parity phases phi_k (k pi /
    n, k = 0..2n-1) for the all-X(phi_k) runs. Shots without a click on
    every qubit are discarded (post-selection). ``target_phase`` is the
    phase of the GHZ coherence of the target state (0 or pi for the
    protocol's frame).
    """
    n = n_qubits
    phases = [(k * math.pi / n) % (2.0 * math.pi) for k in range(2 * n)]
    missing = []
    if "Z" not in records_by_setting:
        missing.append("Z")
    for p in phases:
        if not any(_phase_match(key, p) for key in records_by_setting if key != "Z"):
            missing.append(f"X({p:.6g})")
    if missing:
        raise MeasurementError(f"estimator is missing settings: {missing}")

    z_blocks = _block_statistics(
        records_by_setting["Z"], n, _population_indicator, n_blocks
    )
    parity_blocks = []
    for k, p in enumerate(phases):
        key = next(key for key in records_by_setting if key != "Z" and _phase_match(key, p))
        parity_blocks.append(
            (
                (-1) ** k,
                _block_statistics(records_by_setting[key], n, _parity_value, n_blocks),
            )
        )

    sign = math.cos(target_phase)

    def estimator(drop=None):
        pop = _block_mean(z_blocks, drop)
        amp = 0.0
        for s, blocks in parity_blocks:
            amp += s * _block_mean(blocks, drop)
        amp = sign * amp / (2.0 * n)
        return (pop + amp) / 2.0

    full = estimator()
    jk = [estimator(drop=j) for j in range(n_blocks)]
    jk = np.asarray(jk)
    var = (n_blocks - 1) / n_blocks * np.sum((jk - jk.mean()) ** 2)
    return {"fidelity": float(full), "std_error": float(math.sqrt(var))}


def _phase_match(key, phase, tol=1e-9):
    try:
        return abs(float(key) - phase) < tol
    except (TypeError, ValueError):
        return False


def _population_indicator(outcomes):
    if all(o == "early" for o in outcomes) or all(o == "late" for o in outcomes):
        return 1.0
    return 0.0


def _parity_value(outcomes):
    v = 1.0
    for o in outcomes:
        v *= 1.0 if o == "plus" else -1.0
    return v


def _block_statistics(records, n_qubits, func, n_blocks):
    """Per-block (sum, count) of an all-click shot statistic."""
    shots = _group_by_shot(records)
    sums = np.zeros(n_blocks)
    counts = np.zeros(n_blocks)
    kept = 0
    for sh in shots:
        outs = [sh[q].outcome for q in sorted(sh)]
        if len(outs) != n_qubits or NO_CLICK in outs:
            continue
        b = kept % n_blocks
        sums[b] += func(outs)
        counts[b] += 1.0
        kept += 1
    if kept == 0:
        raise MeasurementError("no all-click shots available for estimation")
    return sums, counts


def sample_stabilizer_expectations(state, kind, shots=2000, seed=0, eta=1.0):
    """Shot-based estimate of the frame-corrected stabilizer expectations.

    Diagnostic cross-check of the exact ``stabilizer_expectations``: each
    generator is measured in its local eigenbasis (Z or X per qubit;
    identity factors are measured in Z and ignored) and the +-1 outcome
    product is averaged over all-click shots.
    """
    from .protocol import _frame_signs, canonical_stabilizers

    n = state.photon_count
    signs = _frame_signs(n, kind)
    estimates = []
    for g, (sign, (label, _)) in enumerate(
        zip(signs, canonical_stabilizers(n, kind))
    ):
        settings = [
            BasisSetting.x(0.0) if c == "X" else BasisSetting.z() for c in label
        ]
        records = sample_measurements_with_eta(
            state, settings, shots, seed=seed + g, eta=eta
        )
        total = 0.0
        count = 0
        for shot in _group_by_shot(records):
            outs = [shot[q].outcome for q in sorted(shot)]
            if NO_CLICK in outs:
                continue
            v = 1.0
            for c, o in zip(label, outs):
                if c == "I":
                    continue
                v *= 1.0 if o in ("early", "plus") else -1.0
            total += v
            count += 1
        if count == 0:
            raise MeasurementError(f"no all-click shots for stabilizer {label}")
        estimates.append(sign * total / count)
    return estimates


def _block_mean(blocks, drop=None):
    sums, counts = blocks
    if drop is None:
        return sums.sum() / counts.sum()
    total = counts.sum() - counts[drop]
    if total <= 0:
        return sums.sum() / counts.sum()
    return (sums.sum() - sums[drop]) / total
