import math

import numpy as np
import pytest

from timebinsim.cyclemap import CycleOptions, build_cycle_map, ideal_cycle_map
from timebinsim.measurement import (
    BasisSetting,
    MeasurementError,
    estimate_ghz_fidelity,
    ghz_parity_settings,
    joint_outcome_distribution,
    povm_elements,
    records_to_csv,
    sample_measurements,
    sample_measurements_with_eta,
    sample_stabilizer_expectations,
)
from timebinsim.params import BranchingBetas, preset
from timebinsim.protocol import (
    TargetKind,
    conditional_fidelity,
    ideal_target,
    run_protocol,
    stabilizer_expectations,
)

VERTICAL_ONLY = BranchingBetas(1.0, 0.0, 0.0, 0.0)


def _ghz_rho(n):
    psi = ideal_target(n, TargetKind.GHZ)
    return np.outer(psi, psi.conj())


def _collect(state, nq, shots, seed0, eta=1.0):
    """Record sets for the GHZ estimator: all-Z plus the 2*nq parity scans."""
    recs = {
        "Z": sample_measurements_with_eta(
            state, [BasisSetting.z()] * nq, shots, seed=seed0, eta=eta
        )
    }
    for k in range(2 * nq):
        phase = (k * math.pi / nq) % (2.0 * math.pi)
        recs[phase] = sample_measurements_with_eta(
            state, [BasisSetting.x(phase)] * nq, shots, seed=seed0 + 1 + k, eta=eta
        )
    return recs


def test_povm_completeness():
    settings = [
        BasisSetting.z(),
        BasisSetting.x(0.0),
        BasisSetting.y(),
        BasisSetting.x(1.3),
        BasisSetting(kind="X", phase=0.5, routing="passive"),
    ]
    for s in settings:
        for eta in (1.0, 0.84, 0.0):
            total = sum(op for _, op in povm_elements(s, eta))
            assert np.allclose(total, np.eye(2), atol=1e-12)


def test_povm_basic_outcomes():
    early = np.array([1.0, 0.0], dtype=complex)
    for lbl, op in povm_elements(BasisSetting.z(), eta=1.0):
        p = float(np.real(early.conj() @ op @ early))
        assert p == pytest.approx(1.0 if lbl == "early" else 0.0)
    plus = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    for lbl, op in povm_elements(BasisSetting.x(0.0), eta=1.0):
        p = float(np.real(plus.conj() @ op @ plus))
        assert p == pytest.approx(1.0 if lbl == "plus" else 0.0)


def test_no_click_probability():
    rng = np.random.default_rng(0)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    for s in (BasisSetting.z(), BasisSetting.x(0.9)):
        for lbl, op in povm_elements(s, eta=0.84):
            if lbl == "no_click":
                assert float(np.real(v.conj() @ op @ v)) == pytest.approx(0.16)


def test_basis_setting_validation():
    with pytest.raises(MeasurementError):
        BasisSetting(kind="W")
    with pytest.raises(MeasurementError):
        BasisSetting(kind="X", phase=7.0)
    with pytest.raises(MeasurementError):
        BasisSetting(kind="Z", routing="magic")


def test_ghz_all_z_patterns():
    rho = _ghz_rho(2)
    outs, probs = joint_outcome_distribution(rho, [BasisSetting.z()] * 3)
    support = {o for o, p in zip(outs, probs) if p > 1e-12}
    assert support == {("early",) * 3, ("late",) * 3}
    assert probs.sum() == pytest.approx(1.0)


def test_sampling_determinism_and_frequencies():
    rho = _ghz_rho(2)
    settings = [BasisSetting.x(0.0)] * 3
    a = sample_measurements(rho, settings, shots=2000, seed=42)
    b = sample_measurements(rho, settings, shots=2000, seed=42)
    assert a == b
    # frequencies against exact probabilities, 5 sigma binomial
    outs, probs = joint_outcome_distribution(rho, settings)
    shots = 100000
    recs = sample_measurements(rho, settings, shots=shots, seed=0)
    counts = {}
    for r in recs:
        counts.setdefault(r.shot, {})[r.qubit] = r.outcome
    freq = {}
    for shot in counts.values():
        combo = tuple(shot[q] for q in sorted(shot))
        freq[combo] = freq.get(combo, 0) + 1
    for o, p in zip(outs, probs):
        sigma = math.sqrt(max(shots * p * (1.0 - p), 1.0))
        assert abs(freq.get(o, 0) - shots * p) < 5.0 * sigma


def test_dimension_mismatch():
    with pytest.raises(MeasurementError):
        joint_outcome_distribution(np.eye(4) / 4.0, [BasisSetting.z()] * 3)


def test_estimator_ideal_ghz():
    st = run_protocol(ideal_cycle_map(), 2)
    nq = 3
    # two photons: the protocol's GHZ coherence phase is 2 pi, i.e. 0
    out = estimate_ghz_fidelity(_collect(st, nq, 20000, 10), nq, target_phase=0.0)
    assert abs(out["fidelity"] - 1.0) <= max(3.0 * out["std_error"], 1e-3)


def test_estimator_dephasing_oracle():
    ind = 0.9
    cm = build_cycle_map(VERTICAL_ONLY, CycleOptions(indistinguishability=ind))
    st = run_protocol(cm, 3)
    nq = 4
    out = estimate_ghz_fidelity(_collect(st, nq, 100000, 20), nq, target_phase=math.pi)
    oracle = (1.0 + ind**3) / 2.0
    assert abs(out["fidelity"] - oracle) < 3.0 * out["std_error"]
    assert out["std_error"] < 0.01


def test_estimator_efficiency_cancels_under_postselection():
    ind = 0.9
    cm = build_cycle_map(VERTICAL_ONLY, CycleOptions(indistinguishability=ind))
    st = run_protocol(cm, 3)
    nq = 4
    full = estimate_ghz_fidelity(_collect(st, nq, 100000, 30), nq, target_phase=math.pi)
    lossy = estimate_ghz_fidelity(
        _collect(st, nq, 100000, 30, eta=0.84), nq, target_phase=math.pi
    )
    assert abs(full["fidelity"] - lossy["fidelity"]) < 3.0 * (
        full["std_error"] + lossy["std_error"]
    )
    assert lossy["std_error"] > full["std_error"]


def test_estimator_missing_settings():
    st = run_protocol(ideal_cycle_map(), 2)
    recs = {"Z": sample_measurements(st, [BasisSetting.z()] * 3, 100, seed=0)}
    with pytest.raises(MeasurementError) as err:
        estimate_ghz_fidelity(recs, 3)
    assert "X(" in str(err.value)


def test_ghz_parity_settings():
    settings = ghz_parity_settings(3)
    assert len(settings) == 6
    assert settings[0].phase == 0.0
    assert settings[1].phase == pytest.approx(math.pi / 3.0)


def test_stabilizer_sampling_diagnostic():
    st = run_protocol(preset("reference"), 2, kind=TargetKind.CLUSTER)
    exact = stabilizer_expectations(st, TargetKind.CLUSTER)
    est = sample_stabilizer_expectations(st, TargetKind.CLUSTER, shots=20000, seed=3)
    for e, s in zip(exact, est):
        assert abs(e - s) < 0.02


def test_records_to_csv(tmp_path):
    st = run_protocol(ideal_cycle_map(), 1)
    recs = sample_measurements(st, [BasisSetting.z(), BasisSetting.x(0.5)], 10, seed=0)
    out = tmp_path / "records.csv"
    records_to_csv(recs, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "shot,setting,qubit,outcome"
    assert len(lines) == 1 + 20
