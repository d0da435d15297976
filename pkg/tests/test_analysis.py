import json
import math

import numpy as np
import pytest

from dmrnn.analysis import (
    MetricsRecord,
    dominant_eigenstates,
    metrics_csv,
    metrics_jsonl,
    qmi,
    qmi_raw,
    trajectory_metrics,
)
from dmrnn.matcore import kron, swap_subsystems
from dmrnn.qstate import maximally_mixed, pure_from_vector, validate_density
from dmrnn.rand import random_density

from conftest import binary_entropy

BELL = pure_from_vector([1, 0, 0, 1])


def test_qmi_examples():
    assert qmi(pure_from_vector([1, 0, 0, 0]), 2, 2) == 0
    assert qmi(BELL, 2, 2) == pytest.approx(2.0, abs=1e-12)
    assert qmi(maximally_mixed(4), 2, 2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        qmi(BELL, 2, 3)


@pytest.mark.parametrize("deg", range(10, 90, 10))
def test_qmi_schmidt_family(deg):
    th = math.radians(deg)
    rho = pure_from_vector([math.cos(th), 0, 0, math.sin(th)])
    assert abs(qmi(rho, 2, 2) - 2 * binary_entropy(math.cos(th) ** 2)) <= 1e-8


def test_qmi_nonnegative_and_symmetric(rng):
    for _ in range(300):
        da, db = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        rho = random_density(da * db, rng, rank=int(rng.integers(1, da * db + 1)))
        assert qmi_raw(rho, da, db) >= -1e-8
        swapped = validate_density(swap_subsystems(rho.mat, da, db))
        assert abs(qmi(rho, da, db) - qmi(swapped, db, da)) <= 1e-10


def test_qmi_zero_for_products(rng):
    for _ in range(50):
        a, b = random_density(2, rng), random_density(3, rng)
        assert qmi(validate_density(kron(a.mat, b.mat)), 2, 3) <= 1e-8


def test_trajectory_metrics_ambiguity():
    traj = [pure_from_vector([1, 0]), maximally_mixed(2), pure_from_vector([0, 1])]
    recs = trajectory_metrics(traj)
    assert [r.t for r in recs] == [0, 1, 2]
    np.testing.assert_allclose([r.vne_bits for r in recs], [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose([r.purity for r in recs], [1, 0.5, 1], atol=1e-12)
    assert all(r.qmi_bits is None for r in recs)
    assert len(trajectory_metrics([maximally_mixed(3)])) == 1
    with pytest.raises(ValueError):
        trajectory_metrics([])


def test_trajectory_metrics_bipartite(rng):
    traj = [random_density(4, rng), pure_from_vector([1, 0, 0, 0]), BELL]
    recs = trajectory_metrics(traj, (2, 2))
    assert recs[-1].qmi_bits == pytest.approx(2.0, abs=1e-12)
    for r in recs:
        assert 0 <= r.vne_bits <= 2 + 1e-8
        assert 0.25 - 1e-8 <= r.purity <= 1 + 1e-8
        assert r.qmi_bits >= -1e-8


def test_dominant_eigenstates():
    psi = np.array([0.6, 0.8j])
    (w, v), = dominant_eigenstates(pure_from_vector(psi), 1)
    assert w == pytest.approx(1.0)
    assert abs(abs(np.vdot(v, psi)) - 1) < 1e-12
    ws = [w for w, _ in dominant_eigenstates(validate_density(np.diag([0.7, 0.2, 0.1])), 2)]
    np.testing.assert_allclose(ws, [0.7, 0.2])
    (w, v), = dominant_eigenstates(pure_from_vector([1, 1]), 1)
    assert w == pytest.approx(1.0)
    np.testing.assert_allclose(v, np.array([1, 1]) / np.sqrt(2), atol=1e-15)
    with pytest.raises(ValueError):
        dominant_eigenstates(maximally_mixed(2), 3)


def test_metrics_export_formats():
    recs = [MetricsRecord(0, 0.0, 1.0, 1.0, 0.1), MetricsRecord(1, 1 / 3, 0.5, 0.5, 2.0)]
    csv = metrics_csv(recs).splitlines()
    assert csv[0] == "t,vne_bits,purity,top_weight,qmi_bits"
    assert csv[2].split(",")[1] == "0.33333333333333331"
    assert float(csv[2].split(",")[1]) == 1 / 3
    lines = metrics_jsonl(recs).splitlines()
    assert json.loads(lines[1]) == {"t": 1, "vne_bits": 1 / 3, "purity": 0.5, "top_weight": 0.5, "qmi_bits": 2.0}
    plain = [MetricsRecord(0, 0.0, 1.0, 1.0)]
    assert metrics_csv(plain).splitlines()[0] == "t,vne_bits,purity,top_weight"
    assert "qmi_bits" not in metrics_jsonl(plain)
