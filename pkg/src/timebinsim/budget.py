"""First-order error budget of the generation protocol.

The conditional infidelity of an N-photon GHZ or cluster state splits into
three non-negative terms:

* ``e_ph``  -- photon dephasing, N (1 - I) / 2,
* ``e_exc`` -- optimized excitation errors, N (sqrt(3) pi / 8) gamma / delta,
* ``e_br``  -- imperfect branching, (N - 1/2) / (2 (B + 1)).

The same expression applies to both target-state kinds. The branching entry
groups the two B-dependent contributions of the underlying expansion so the
three terms sum exactly to the total.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .params import indistinguishability, validate_params

# Coefficient of the optimized square-pulse excitation error, sqrt(3) pi / 8.
EXC_COEFFICIENT = math.sqrt(3.0) * math.pi / 8.0


@dataclass(frozen=True)
class InfidelityBudget:
    e_ph: float
    e_exc: float
    e_br: float

    @property
    def total(self):
        return self.e_ph + self.e_exc + self.e_br


def infidelity_first_order(params, n_photons):
    """First-order conditional infidelity budget for an N-photon state."""
    validate_params(params)
    n = int(n_photons)
    if n < 1:
        raise ValueError(f"n_photons must be >= 1, got {n_photons}")
    ind = indistinguishability(params.gamma, params.gamma_d)
    e_ph = n * (1.0 - ind) / 2.0
    e_exc = n * EXC_COEFFICIENT * params.gamma / params.delta
    e_br = n / (2.0 * (params.branching + 1.0)) - 1.0 / (4.0 * (params.branching + 1.0))
    return InfidelityBudget(e_ph=e_ph, e_exc=e_exc, e_br=e_br)


def per_qubit_infidelity(params):
    """Large-N per-photon slope of the budget, split by error locality.

    single_qubit collects the dephasing and excitation contributions,
    two_qubit the branching contribution 1 / (2 (B + 1)).
    """
    validate_params(params)
    ind = indistinguishability(params.gamma, params.gamma_d)
    single = (1.0 - ind) / 2.0 + EXC_COEFFICIENT * params.gamma / params.delta
    two = 1.0 / (2.0 * (params.branching + 1.0))
    return {"single_qubit": single, "two_qubit": two, "total": single + two}


def t2_drift_error(t_cycle, t2, n_photons, c_model=0.5):
    """Slow-drift error estimate N * c_model * (t_cycle / t2)^2.

    Only the quadratic scaling is physically fixed; ``c_model`` is a model
    constant (default 1/2, a Gaussian-phase-variance convention).
    """
    if t2 <= 0:
        raise ValueError(f"t2 must be positive, got {t2}")
    return n_photons * c_model * (t_cycle / t2) ** 2


def generation_rate(eta, t_cycle, n_photons):
    """Post-selected N-photon state rate eta^N / (N * t_cycle), in GHz.

    Simplest reading of an exponential per-photon outcoupling loss over a
    fixed cycle length; an approximation, not an exact device model.
    """
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    n = int(n_photons)
    if n < 1:
        raise ValueError(f"n_photons must be >= 1, got {n_photons}")
    return eta**n / (n * t_cycle)
