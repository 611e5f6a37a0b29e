import math

import numpy as np
import pytest

from psc.bifurcation import (ALPHA_REF, BETA_REF, TABLE2, all_reports, branch_slope,
                             classify_branch, fit_cubic_equivariant, lambda_double_prime,
                             lambda_prime, square_coefficients)
from psc.equilibrium import continue_branch
from psc.errors import DataError
from psc.sphere import lm_index

SP = math.sqrt(math.pi)
R2 = math.sqrt(2.0)
R13 = math.sqrt(13.0)

# e² expansions in our real basis; a printed "Re Y_lm" is our Y_lm / sqrt 2
EXPANSIONS = {
    ("O2m", 1): {(0, 0): 0.5 / SP, (2, 0): 1 / (SP * math.sqrt(5))},
    ("O2m", 3): {(0, 0): 1 / (2 * SP), (2, 0): 4 / (3 * math.sqrt(5)) / (2 * SP),
                 (4, 0): 6 / 11 / (2 * SP), (6, 0): 100 / (33 * R13) / (2 * SP)},
    ("Om", 3): {(0, 0): 1 / (2 * SP), (4, 0): -7 / 11 / (2 * SP),
                (4, 4): math.sqrt(70) / 11 / R2 / (2 * SP), (6, 0): 10 / (11 * R13) / (2 * SP),
                (6, 4): 10 * math.sqrt(14) / (11 * R13) / R2 / (2 * SP)},
    ("D6d", 3): {(0, 0): -1 / (2 * SP), (2, 0): math.sqrt(5) / 3 / (2 * SP),
                 (4, 0): -3 / 11 / (2 * SP), (6, 0): 5 / (33 * R13) / (2 * SP),
                 (6, 6): 10 * math.sqrt(7) / math.sqrt(429) / R2 / (2 * SP)},
}


def expected_vector(key):
    ell = key[1]
    out = np.zeros((2 * ell + 1) ** 2)
    for (l, m), c in EXPANSIONS[key].items():
        out[lm_index(l, m)] = c
    return out


@pytest.mark.parametrize("key", [("O2m", 1), ("O2m", 3), ("Om", 3)])
def test_square_expansions_termwise(key):
    got = square_coefficients(key[1], key[0])
    assert np.max(np.abs(got - expected_vector(key))) < 1e-12


def test_d6d_expansion_magnitudes():
    got = square_coefficients(3, "D6d")
    assert np.max(np.abs(np.abs(got) - np.abs(expected_vector(("D6d", 3))))) < 1e-12


@pytest.mark.xfail(strict=True, reason="printed D6d signs of Y00, Y20, Y40, Y60 are flipped; "
                   "<e², Y00> = 1/(2 sqrt pi) > 0 for any unit e")
def test_d6d_expansion_signed():
    got = square_coefficients(3, "D6d")
    assert np.max(np.abs(got - expected_vector(("D6d", 3)))) < 1e-12


def test_y00_coefficient_is_positive_for_every_generator():
    for rep in all_reports():
        assert abs(square_coefficients(rep.ell, rep.group)[0] - 1 / (2 * SP)) < 1e-14


@pytest.mark.parametrize("key", list(TABLE2))
def test_table2_closed_forms(key):
    name, ell = key
    kind, ref = TABLE2[key]
    got = lambda_prime(ell, name) if kind == "lambda_prime" else lambda_double_prime(ell, name)
    assert abs(got - ref) <= 1e-10 * abs(ref)


def test_classification():
    kinds = {(r.group, r.ell): (r.type, r.direction) for r in all_reports()}
    assert kinds[("O2m", 1)] == ("pitchfork", "sub")
    assert kinds[("O2xZ2c", 2)][0] == "transcritical"
    assert all(kinds[(g, 3)] == ("pitchfork", "sub") for g in ("O2m", "Om", "D6d"))
    with pytest.raises(DataError):
        lambda_double_prime(2, "O2xZ2c")


def test_branch_slope_carries_lambda_ell():
    br = continue_branch("O2xZ2c", 2, 0.1, 0.01, l_max=12, s_min=-0.1)
    lp, _ = br.fit(0.1)
    assert abs(lp - branch_slope(2, "O2xZ2c")) < 1e-2 * abs(branch_slope(2, "O2xZ2c"))
    assert abs(lp / lambda_prime(2, "O2xZ2c") - 6.0) < 0.06


def test_pitchfork_curvature_from_continuation():
    br = continue_branch("O2m", 1, 0.1, 0.01, l_max=12, s_min=-0.1)
    _, lpp = br.fit(0.1)
    ref = TABLE2[("O2m", 1)][1]
    assert abs(lpp - ref) < 1e-2 * abs(ref)


def test_cubic_fit_rescaled_rows_reproduce_reference():
    a, b, res = fit_cubic_equivariant(rows="rescaled")
    assert abs(a - ALPHA_REF) < 1e-13 and abs(b - BETA_REF) < 1e-13 and res < 1e-12


def test_cubic_fit_printed_rows_are_inconsistent():
    a, b, res = fit_cubic_equivariant(rows="printed")
    assert res > 1.0
    # the O(2)- row alone is consistent with the reference pair
    assert abs(2 * (18 * ALPHA_REF - BETA_REF) - lambda_double_prime(3, "O2m")) < 1e-13


def test_report_fields():
    rep = classify_branch(4, "OxZ2c")
    d = rep.to_dict()
    assert d["type"] == "transcritical" and d["deviation"] < 1e-12
