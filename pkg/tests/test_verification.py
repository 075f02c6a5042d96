from pathlib import Path

import numpy as np
import pytest
import sympy

from soap_bridge.elliptic import solve_with_source
from soap_bridge.exceptions import InvalidArgument
from soap_bridge.mesh import RectMesh
from soap_bridge.verification import (
    CONVERGENCE_HEADER,
    Z,
    ConvergenceRecord,
    ConvergenceStudy,
    MMSCase,
    SuiteResult,
    bubble_case,
    convergence_study,
    energy_oracle,
    mms_error,
    mms_source,
    observed_order,
    standard_cases,
)


def test_bubble_source_value():
    mesh = RectMesh.create(5, 5)
    F = mms_source(bubble_case(), mesh)
    assert F[2, 2] == pytest.approx(2.5, abs=1e-14)


def test_source_is_linear_in_field():
    mesh = RectMesh.create(9, 9)
    case = bubble_case()
    np.testing.assert_allclose(
        mms_source(MMSCase.create("double", 2 * case.phi_expr, case.v_expr, 1.0), mesh),
        2 * mms_source(case, mesh),
        rtol=1e-14,
        atol=1e-14,
    )


def test_bubble_is_reproduced_exactly():
    mesh = RectMesh.create(17, 17)
    case = bubble_case(sympy.Rational(3, 10) * (1 - Z**2), 1.5)
    phi = solve_with_source(case.coefficients(mesh), mms_source(case, mesh), mesh)
    assert np.max(np.abs(phi.phi - case.exact(mesh))) < 1e-11


def test_manufactured_solution_converges():
    case = standard_cases()[0]
    hs, errors = zip(*(mms_error(case, n) for n in (17, 33, 65)))
    assert observed_order(hs, errors) > 1.9


def test_observed_order():
    assert observed_order([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6.25e-4]) == pytest.approx(2.0)
    assert observed_order([0.1, 0.05], [1e-2, 5e-3]) == pytest.approx(1.0)


def test_study_needs_nested_resolutions():
    with pytest.raises(InvalidArgument):
        convergence_study(lambda c, n: (1.0 / n, 1.0 / n**2), [None], [17, 33])
    with pytest.raises(InvalidArgument):
        convergence_study(lambda c, n: (1.0 / n, 1.0 / n**2), [None], [17, 33, 63])


def test_study_records_pairwise_orders():
    study = convergence_study(
        lambda c, n: (1.0 / (n - 1), c / (n - 1) ** 2), [3.0], [9, 17, 33], names=["synthetic"]
    )
    assert [r.order for r in study.records][0] is None
    assert [r.order for r in study.records][1:] == pytest.approx([2.0, 2.0])
    assert study.observed_orders["synthetic"] == pytest.approx(2.0)
    assert study.failures(1.9) == {}
    assert study.failures(2.5) == {"synthetic": pytest.approx(2.0)}


def test_energy_oracle():
    assert energy_oracle(1.0) == pytest.approx(0.5624, abs=5e-4)
    assert energy_oracle(1e-6) == pytest.approx(0.0, abs=1e-10)


def test_suite_failures_listed():
    study = ConvergenceStudy([], {"a": 2.0, "b": 1.2})
    result = SuiteResult(study, {"a": 1.9, "b": 1.9}, {"trace": 1e-14, "other": 1e-3})
    assert len(result.failures) == 2
    assert result.failures[0].startswith("b:")


def test_convergence_csv(tmp_path: Path):
    study = ConvergenceStudy(
        [ConvergenceRecord("x", 0.5, 0.1, None), ConvergenceRecord("x", 0.25, 0.025, 2.0)],
        {"x": 2.0},
    )
    path = tmp_path / "convergence.csv"
    study.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CONVERGENCE_HEADER)
    assert lines[1].startswith("x,") and lines[1].endswith(",")
    assert len(lines) == 3
