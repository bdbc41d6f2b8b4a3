import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import TABLE1, ef_params
from iptdesign.errors import NetworkValidationError, SingularSystemError
from iptdesign.network import (
    assemble, build, mutual_from_k, parameter_view, series_loss_resistance, shunt_impedance,
    tuned_c0,
)
from iptdesign.solver import solve_steady_state

W400K = 2 * math.pi * 400e3


@pytest.mark.parametrize("k, l_tx, l_rx, expected, tol", [
    (0.0, 140e-6, 50e-6, 0.0, 0.0),
    (1 - 1e-15, 7e-6, 7e-6, 7e-6, 1e-20),
    (0.05, 140e-6, 50e-6, 4.1833e-6, 5e-11),
])
def test_mutual_from_k(k, l_tx, l_rx, expected, tol):
    assert mutual_from_k(k, l_tx, l_rx) == pytest.approx(expected, abs=tol)


@pytest.mark.parametrize("k", [-0.1, 1.0, 1.5])
def test_mutual_rejects_out_of_range(k):
    with pytest.raises(ValueError):
        mutual_from_k(k, 1e-6, 1e-6)


# hand values w*l/q; the quoted four-decimal figures 1.0053 and 0.5006 are truncations
@pytest.mark.parametrize("l, q, expected, quoted", [(140e-6, 350, 1.005310, 1.0053),
                                                    (50e-6, 251, 0.500652, 0.5006),
                                                    (140e-6, 1e300, 0.0, 0.0)])
def test_series_loss_resistance(l, q, expected, quoted):
    r = series_loss_resistance(l, q, W400K)
    assert r == pytest.approx(expected, abs=1e-6)
    assert abs(r - quoted) < 1e-4


@pytest.mark.parametrize("q", [0.0, -3.0])
def test_series_loss_rejects_bad_q(q):
    with pytest.raises(ValueError):
        series_loss_resistance(1e-6, q, W400K)


def test_tuned_c0_resonance_and_inverse():
    assert tuned_c0(140e-6, W400K, 0.0) == pytest.approx(1 / (W400K ** 2 * 140e-6), rel=1e-15)
    # residual reactance implied by C0 = 1.15 nF on the 140 uH coil
    x = W400K * 140e-6 - 1 / (W400K * 1.15e-9)
    assert x == pytest.approx(5.8694, abs=1e-4)
    c0 = tuned_c0(140e-6, W400K, x)
    assert c0 == pytest.approx(1.15e-9, rel=1e-12)
    assert W400K * 140e-6 - 1 / (W400K * c0) == pytest.approx(x, rel=1e-12)


@settings(max_examples=50)
@given(x=st.floats(-1e3, 340.0), dx=st.floats(1e-3, 10.0))
def test_tuned_c0_monotone(x, dx):
    assert tuned_c0(140e-6, W400K, x - dx) < tuned_c0(140e-6, W400K, x)


def test_tuned_c0_rejects_unreachable():
    with pytest.raises(ValueError):
        tuned_c0(140e-6, W400K, W400K * 140e-6)


def test_build_table1(table1_net):
    net = table1_net
    assert net.variant == "class_e"
    assert net.mutual == pytest.approx(4.1833e-6, rel=1e-4)
    assert net.r_tx == pytest.approx(1.0053, abs=1e-4)
    assert net.c1_external == pytest.approx(9.29e-9)
    assert net.f2 is None
    view = parameter_view(net)
    assert view["l1"] == 10e-6
    with pytest.raises(TypeError):
        view["l1"] = 1.0


def test_build_reports_field_errors():
    bad = dict(TABLE1, r_load=-1.0, q_tx=0.0)
    with pytest.raises(NetworkValidationError) as info:
        build("class_e", bad)
    assert set(info.value.field_errors) == {"r_load", "q_tx"}


def test_build_class_ef_without_l2():
    p = ef_params()
    del p["l2"]
    with pytest.raises(NetworkValidationError) as info:
        build("class_ef", p)
    assert "l2" in info.value.field_errors


@pytest.mark.parametrize("variant, extra, field_name", [
    ("class_e", {"l2": 1e-6}, "l2"),
    ("class_e", {"l_f": 1e-6}, "l_f"),
    ("class_ef", {"l1": 1e-6}, "l1"),
])
def test_build_variant_mismatch(variant, extra, field_name):
    base = dict(TABLE1) if variant == "class_e" else ef_params()
    base.update(extra)
    with pytest.raises(NetworkValidationError) as info:
        build(variant, base)
    assert field_name in info.value.field_errors


def test_build_c0_or_x():
    p = dict(TABLE1)
    p["x"] = 5.0
    with pytest.raises(NetworkValidationError):
        build("class_e", p)
    del p["c0"]
    assert build("class_e", p).extra_reactance == pytest.approx(5.0, rel=1e-12)


def test_build_adds_junction_when_not_included():
    p = dict(TABLE1, c1=9.29e-9, c1_includes_junction=False)
    assert build("class_e", p).c1 == pytest.approx(9.49e-9)


def test_class_ef_branch_frequency():
    net = build("class_ef", ef_params())
    assert net.f2 == pytest.approx(400e3 * 2.81675, rel=1e-12)


@pytest.mark.parametrize("N", [1, 5, 30])
@pytest.mark.parametrize("model, blocks", [("exact", 6), ("conductance", 6), ("toeplitz", 7)])
def test_assembled_dimension(table1_net, N, model, blocks):
    sys = assemble(table1_net, N, model)
    assert sys.matrix.shape == (blocks * (2 * N + 1),) * 2
    assert len(set(sys.labels)) == len(sys.labels) == blocks


def test_assembled_dimension_class_ef():
    sys = assemble(build("class_ef", ef_params()), 4)
    assert sys.matrix.shape == (8 * 9, 8 * 9)


def test_reciprocity(table1_net):
    sys = assemble(table1_net, 10)
    np.testing.assert_array_equal(sys.operator("i_tx", "i_rx").entries,
                                  sys.operator("i_rx", "i_tx").entries)
    assert sys.operator("i_tx", "i_rx").is_diagonal()


@pytest.mark.parametrize("variant", ["class_e", "class_ef"])
def test_zero_coupling_decouples(table1_net, variant):
    net = table1_net if variant == "class_e" else build("class_ef", ef_params())
    sys = assemble(net.with_coupling(0.0), 12)
    assert not np.any(sys.operator("i_tx", "i_rx").entries)
    sol = solve_steady_state(sys)
    assert np.all(sol.spectra["i_rx"].coeffs == 0)
    assert sol.p_out == 0.0


def test_assembly_deterministic(table1_net):
    a = assemble(table1_net, 8)
    b = assemble(table1_net, 8)
    assert np.array_equal(a.matrix, b.matrix)
    assert np.array_equal(a.source, b.source)
    assert not a.matrix.flags.writeable


def test_full_coupling_rejected(table1_net):
    from dataclasses import replace
    with pytest.raises(SingularSystemError):
        assemble(replace(table1_net, k=1.0), 4)


def _phasor_input_impedance(net, p, r_sw):
    # textbook single-frequency analysis of the same circuit at order p
    w = net.omega
    if p == 0:
        return r_sw
    jw = 1j * p * w
    z_rx = jw * net.l_rx + net.r_rx + net.r_load + 1 / (jw * net.c_rx)
    z_tx = jw * net.l_tx + net.r_tx + 1 / (jw * net.c0) - (jw * net.mutual) ** 2 / z_rx
    y = 1 / r_sw + jw * net.c1 + 1 / z_tx
    if net.variant == "class_ef":
        y += 1 / (jw * net.l2 + 1 / (jw * net.c2))
    return jw * net.l1 + 1 / y


@pytest.mark.parametrize("variant", ["class_e", "class_ef"])
@pytest.mark.parametrize("model", ["exact", "toeplitz", "conductance"])
def test_fixed_resistance_matches_phasor_analysis(variant, model):
    r_sw, N = 7.5, 6
    base = dict(TABLE1) if variant == "class_e" else ef_params()
    base.update(r_on=r_sw, r_off=r_sw)
    net = build(variant, base)
    sys = assemble(net, N, model)
    n = 2 * N + 1
    B = len(sys.labels)
    # no coupling between different orders
    A = sys.matrix.reshape(B, n, B, n)
    for i in range(n):
        for j in range(n):
            if i != j:
                assert np.max(np.abs(A[:, i, :, j])) < 1e-9 * np.max(np.abs(A))
    for p in range(-N, N + 1):
        sub = A[:, p + N, :, p + N]
        rhs = np.zeros(B, dtype=complex)
        rhs[sys.labels.index("i_in")] = 1.0
        i_in = np.linalg.solve(sub, rhs)[sys.labels.index("i_in")]
        ref = _phasor_input_impedance(net, p, r_sw)
        assert 1 / i_in == pytest.approx(ref, rel=1e-9), p


def test_shunt_models_agree_for_constant_resistance(table1_net):
    from dataclasses import replace
    from iptdesign.harmonic import SwitchProfile
    net = replace(table1_net, switch=SwitchProfile(3.0, 3.0, 0.5))
    ref = shunt_impedance(net, 5, "exact")
    for model in ("toeplitz", "conductance"):
        np.testing.assert_allclose(shunt_impedance(net, 5, model), ref, rtol=1e-9, atol=1e-12)
