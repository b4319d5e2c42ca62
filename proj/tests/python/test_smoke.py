import copy
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mprof


def z2_ball_size(n):
    return sum(1 for a in range(-n, n + 1) for b in range(-n, n + 1) if abs(a) + abs(b) <= n)


@pytest.mark.parametrize("n", range(0, 7))
def test_ball_sizes_match_lattice_count(n):
    assert mprof.growth("Z", n) == 2 * n + 1
    assert mprof.growth("Z^2", n) == z2_ball_size(n)
    assert len(mprof.ball("Z^2", n)) == z2_ball_size(n)


def test_cyclic_certificate_verifies():
    cert = mprof.cyclic_z(4)
    report = mprof.verify(cert)
    assert report["pass"]


def test_tampered_certificate_fails():
    cert = mprof.cyclic_z(3)
    bad = copy.deepcopy(cert)
    a = bad["assignments"]
    a[1]["target"], a[2]["target"] = a[2]["target"], a[1]["target"]
    assert not mprof.verify(bad)["pass"]


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=40))
def test_weakly_sofic_profile_of_z(n):
    point = mprof.weakly_sofic_exact_z(n)
    assert point["exact"] == 2 * n + 1


def test_oracle_small_value():
    r = mprof.sofic_oracle("Z", 1)
    assert r["exact"] == 3
    assert r["refuted_up_to"] == 2


@pytest.mark.parametrize("n", range(1, 12))
def test_rf_growth_of_z(n):
    assert mprof.rf_growth("Z", n)["exact"] == n + 1


def test_folner_exhaustive():
    assert mprof.folner("Z", 1, "exhaustive", r_max=6, size_max=4)["exact"] == 4


def test_amplification_power_against_float_formula():
    delta = math.sqrt(2) / 160 - 1 / (200 * 64)
    assert mprof.amplification_power(8) == math.ceil(math.log(1 / delta) / math.log(1.25))


def test_curve_and_audit():
    fin = mprof.upper_curve("Z", "fin", 1, 5, ["cyclic"])
    assert fin.startswith("n,lower,exact,upper,provenance")
    growth = "n,lower,exact,upper,provenance\n" + "".join(
        f"{n},,{2 * n + 1},,exact:ball\n" for n in range(1, 6)
    )
    ok = mprof.audit([("fin", fin, "Z"), ("growth", growth, "Z")])
    assert ok["violations"] == 0
    planted = "n,lower,exact,upper,provenance\n3,,2,,exact:planted\n"
    assert mprof.audit([("fin", planted, "Z"), ("growth", growth, "Z")])["violations"] > 0


def test_capacity_error():
    with pytest.raises(mprof.CapacityError):
        mprof.rf_growth("Z^2", 2000)
