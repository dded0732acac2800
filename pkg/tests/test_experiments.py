import json

import numpy as np
import pytest
from scipy.integrate import quad

from fracshape.errors import ConfigurationError, DomainError
from fracshape.experiments import (
    ANCHORS,
    BENCHES,
    ExperimentReport,
    ball_equivalence_probe,
    inequality_bench,
    run_experiment,
    shrinking_circle,
    shrinking_circle_oracle,
    vanishing_distance_probe,
)


def plain_oracle(q, eps):
    """Direct quadrature in r, independent of the log-variable form."""
    f = lambda r: np.sqrt(2 * np.pi * (r + (r ** (1 - 2 * q) if q else 0.0)))
    val, _ = quad(f, eps, 1.0, epsabs=1e-14, epsrel=1e-12, limit=400, points=[eps * 10, 0.1])
    return val


class TestShrinkingCircle:
    @pytest.mark.parametrize("q", [0.0, 0.6, 1.0, 1.4, 2.0])
    def test_oracle_against_direct_quadrature(self, q):
        for eps in (0.5, 1e-2, 2.0**-12):
            assert shrinking_circle_oracle(q, eps) == pytest.approx(plain_oracle(q, eps), rel=1e-9)

    def test_oracle_limit_closed_form(self):
        # q = 0: int_0^1 sqrt(2 pi r) dr = (2/3) sqrt(2 pi)
        assert shrinking_circle_oracle(0.0, 1e-300) == pytest.approx(2 / 3 * np.sqrt(2 * np.pi), rel=1e-12)

    @pytest.mark.parametrize("q", [0.0, 1.0])
    def test_finite_regime(self, q):
        rep = shrinking_circle(q, m=512, n=16)
        assert rep.passed, rep.assertions
        assert rep.results["max_rel_err"] <= 1e-2
        assert rep.results["limit_estimate"] == pytest.approx(rep.results["limit_oracle"], rel=1e-2)

    def test_critical_order(self):
        rep = shrinking_circle(1.5, m=512, n=16)
        assert rep.assertion("log_regime")["passed"]
        assert rep.results["log_slopes"][-1] == pytest.approx(np.sqrt(2 * np.pi), rel=1e-2)

    def test_growth_regime(self):
        rep = shrinking_circle(1.6, m=512, n=16)
        assert rep.passed
        assert rep.results["growth_slope"] == pytest.approx(-0.1, rel=0.05)

    def test_bad_input(self):
        with pytest.raises(DomainError):
            shrinking_circle(-1.0)
        with pytest.raises(ConfigurationError):
            shrinking_circle(1.0, exponents=(2, 3))


class TestVanishing:
    def test_identity_gives_zero(self):
        rep = vanishing_distance_probe(0.3, amplitude=0.0, levels=3, n0=8, m0=4)
        assert rep.assertion("identity_zero")["passed"]
        assert rep.results["U"] == [0.0, 0.0, 0.0]

    def test_levels_validated(self):
        with pytest.raises(ConfigurationError):
            vanishing_distance_probe(0.3, levels=2)

    def test_report_structure(self):
        rep = vanishing_distance_probe(0.8, levels=3, n0=8, m0=4, max_iter=50)
        rows = rep.results["levels"]
        assert [r["n"] for r in rows] == [8, 16, 32] and [r["m"] for r in rows] == [4, 8, 16]
        assert all(r["U"] <= r["restricted_length"] for r in rows)
        assert {a["name"] for a in rep.assertions} == {"stabilised", "positive_floor"}


class TestBench:
    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            inequality_bench("nope")

    @pytest.mark.parametrize("which", BENCHES)
    def test_small_runs_pass(self, which):
        rep = inequality_bench(which, trials=20, n=128)
        assert rep.passed, rep.assertions

    def test_product_hom_constant_factor(self):
        rep = inequality_bench("product_hom", trials=5, n=64)
        assert rep.assertion("constant_factor_exact")["passed"]

    def test_parallel_matches_serial(self):
        a = inequality_bench("composition", trials=8, n=64, jobs=1)
        b = inequality_bench("composition", trials=8, n=64, jobs=2)
        assert a.to_json() == b.to_json()


class TestBall:
    def test_base_closed_form_and_tiny_ball(self):
        rep = ball_equivalence_probe(2.0, samples=20, rho=1e-6, n=32)
        assert rep.assertion("base_closed_form")["passed"]
        lo, hi = rep.results["interval_doubled"]
        base = rep.results["base_mode_ratios"]
        # a tiny ball reproduces the base-circle ratios of the sampled modes
        assert min(base[:5]) * (1 - 1e-3) <= lo and hi <= max(base[:5]) * (1 + 1e-3)

    def test_mode_trend_recorded(self):
        rep = ball_equivalence_probe(2.0, samples=10, n=32)
        r = rep.results["base_mode_ratios"]
        assert all(a > b for a, b in zip(r[1:4], r[2:5]))

    def test_needs_large_q(self):
        with pytest.raises(DomainError):
            ball_equivalence_probe(1.0)


class TestReport:
    def test_deterministic_bytes(self):
        a = run_experiment("shrinking-circle", q=1.0, n=16, m=64)
        b = run_experiment("shrinking-circle", q=1.0, n=16, m=64)
        assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()

    def test_anchors_attached(self):
        rep = inequality_bench("nesting", trials=3, n=64)
        assert all(a["anchor"] in ANCHORS.values() for a in rep.assertions)

    def test_json_and_csv(self):
        rep = ExperimentReport("x", {"q": 1.0})
        rep.results["v"] = 0.1 + 0.2
        rep.check("ok", True, "anchor")
        rep.plots["s"] = {"x": [1, 2], "y": [3.0, 4.0], "xlabel": "a", "ylabel": "b"}
        data = json.loads(rep.to_json())
        assert data["passed"] and data["results"]["v"] == 0.1 + 0.2 and "runtime" not in data
        assert "result,v,0.30000000000000004" in rep.to_csv()
        assert rep.plot_csv("s") == "a,b\n1,3\n2,4\n"

    def test_unknown_experiment(self):
        with pytest.raises(ConfigurationError, match="available"):
            run_experiment("nope")
