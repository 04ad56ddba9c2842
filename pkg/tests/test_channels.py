"""Channels: Choi validation, built-ins, application, tensor powers."""

import json

import numpy as np
import pytest

from extendicap import channels as ch
from extendicap import qlinalg as ql
from extendicap.errors import ValidationError

from conftest import random_state


def test_identity_channel_choi_is_scaled_bell():
    c = ch.identity_channel(2)
    np.testing.assert_allclose(
        c.choi.entries, 2 * ql.max_entangled(2).entries, atol=1e-14
    )


def test_replacer_channel_validates():
    c = ch.replacer_channel(3)
    np.testing.assert_allclose(
        ql.partial_trace(c.choi, {"B"}).entries, np.eye(3), atol=1e-14
    )


def test_bad_scaling_fails_tp_with_residual():
    # Rescaling the example Choi's first component breaks trace preservation.
    phi = ql.max_entangled(3, labels=("R", "B")).entries
    sigma = np.zeros((9, 9))
    for a, b in ((0, 1), (1, 2), (2, 0)):
        sigma[3 * a + b, 3 * a + b] = 1.0 / 3.0
    bad = 1.0 * phi + (15.0 / 7.0) * sigma
    with pytest.raises(ValidationError, match="trace preserving"):
        ch.channel_from_choi(3, 3, bad)


def test_cp_violation_detected():
    gamma = 2 * ql.max_entangled(2).entries - 0.2 * np.eye(4)
    with pytest.raises(ValidationError, match="completely positive"):
        ch.channel_from_choi(2, 2, gamma)


def test_example_channel_is_valid():
    c = ch.example_channel()
    marg = ql.partial_trace(c.choi, {"B"}).entries
    np.testing.assert_allclose(marg, np.eye(3), atol=1e-12)
    eigs = np.linalg.eigvalsh(c.choi.entries)
    assert eigs[0] >= -1e-12
    assert np.trace(c.choi.entries).real == pytest.approx(3.0, abs=1e-12)
    assert np.linalg.matrix_rank(c.choi.entries, tol=1e-10) <= 4


def test_apply_identity(rng):
    c = ch.identity_channel(3)
    rho = random_state(rng, 3)
    out = ch.apply(c, ql.from_matrix(ql.layout(("A", 3)), rho))
    np.testing.assert_allclose(out.entries, rho, atol=1e-12)


def test_apply_replacer(rng):
    sigma = random_state(rng, 2)
    c = ch.replacer_channel(2, sigma)
    for _ in range(3):
        rho = random_state(rng, 2)
        out = ch.apply(c, ql.from_matrix(ql.layout(("A", 2)), rho))
        np.testing.assert_allclose(out.entries, sigma, atol=1e-12)


def test_apply_example_channel_preserves_state(rng):
    c = ch.example_channel()
    ket0 = np.zeros((3, 3))
    ket0[0, 0] = 1.0
    out = ch.apply(c, ql.from_matrix(ql.layout(("A", 3)), ket0))
    assert out.trace().real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(out.entries)[0] >= -1e-10


def test_apply_matches_kraus(rng):
    for name in ("example29", "identity:2", "replacer:2", "depolarizing:3:0.3"):
        c = ch.named_channel(name)
        rho = random_state(rng, c.dim_in)
        via_choi = ch.apply(c, ql.from_matrix(ql.layout(("A", c.dim_in)), rho)).entries
        via_kraus = ch.apply_kraus(c, rho)
        np.testing.assert_allclose(via_choi, via_kraus, atol=1e-10)


def test_tensor_power_identity_qubit():
    c = ch.identity_channel(2)
    c2 = ch.tensor_power(c, 2)
    assert c2.dim_in == 4 and c2.dim_out == 4
    np.testing.assert_allclose(
        c2.choi.entries, 4 * ql.max_entangled(4).entries, atol=1e-12
    )


def test_tensor_power_n1_is_same():
    c = ch.example_channel()
    assert ch.tensor_power(c, 1) is c


def test_tensor_power_example_validates():
    c2 = ch.tensor_power(ch.example_channel(), 2)
    assert c2.dim_in == 9


def test_dimension_cap(monkeypatch):
    monkeypatch.setenv("EXTENDICAP_DIM_CAP", "10")
    from extendicap.errors import DimensionCapError

    with pytest.raises(DimensionCapError):
        ch.tensor_power(ch.identity_channel(2), 2)


def test_json_roundtrip_bit_identical():
    c = ch.example_channel()
    data = json.loads(json.dumps(ch.channel_to_json(c)))
    c2 = ch.channel_from_json(data)
    np.testing.assert_array_equal(c.choi.entries, c2.choi.entries)


def test_named_channel_errors():
    with pytest.raises(ValidationError):
        ch.named_channel("nonsense")
    with pytest.raises(ValidationError):
        ch.named_channel("depolarizing:2")
