import io
import json
import os
from unittest.mock import MagicMock, patch

import pytest

from ifdp.bench import (
    CSV_FIELDS,
    RunResult,
    Scenario,
    format_table,
    generate_instance,
    loads_config,
    read_config,
    resolve_solver,
    run_benchmark,
    run_instance,
    summarize,
    tight_alpha,
    write_csv,
)
from ifdp.errors import Disconnected, NeverFeasible, ParseError
from ifdp.formulation import earliest_completion


def _result(solver="mfa", status="Feasible", objective=3.0, wall=1.0, reference=3.0, reference_time=2.0):
    return RunResult("s", solver, 0, status, objective, wall, reference=reference, reference_time=reference_time)


# ---------------------------------------------------------------------------
# TestScenario
# ---------------------------------------------------------------------------


class TestScenario:
    def test_names(self):
        assert Scenario("triangle", 3).name == "triangle-F3-fixed"
        assert Scenario("small", 5, alpha=2.0).name == "small-F5-a2"
        assert Scenario("geant", 10, variant="tight").name == "geant-F10-tight"

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="variant"):
            Scenario("small", 3, variant="loose")

    def test_bad_flow_count(self):
        with pytest.raises(ValueError, match="flow_count"):
            Scenario("small", 0)

    def test_bad_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            Scenario("small", 3, alpha=0)

    def test_bad_size_range(self):
        with pytest.raises(ValueError, match="size_range"):
            Scenario("small", 3, alpha=2, size_range=(5, 1))

    def test_unknown_topology(self):
        with pytest.raises(KeyError):
            Scenario("moon", 3)


# ---------------------------------------------------------------------------
# TestGenerateInstance
# ---------------------------------------------------------------------------


class TestGenerateInstance:
    def test_example_flows_returned_as_is(self, triangle):
        assert generate_instance(Scenario("triangle", 3)).flows == triangle.flows

    def test_seeded(self):
        a = generate_instance(Scenario("small", 4, alpha=2.0, seed=7))
        b = generate_instance(Scenario("small", 4, alpha=2.0, seed=7))
        c = generate_instance(Scenario("small", 4, alpha=2.0, seed=8))
        assert a.flows == b.flows
        assert a.flows != c.flows

    def test_sizes_and_deadlines(self):
        inst = generate_instance(Scenario("small", 4, alpha=2.0, seed=1))
        assert inst.flow_count == 4
        for f in range(inst.flow_count):
            fl = inst.flow(f)
            assert fl.size.is_integer() and 1 <= fl.size <= 100
            assert fl.deadline == pytest.approx(2.0 * earliest_completion(inst, f))

    def test_overrides(self):
        inst = generate_instance(Scenario("small", 2, alpha=3.0, capacity=4, units=(1.0,), size_range=(0.5, 1.5)))
        assert all(a.capacity == 4.0 for a in inst.network.arcs)
        assert inst.network.units == (1.0,)
        assert all(0.5 <= fl.size <= 1.5 for fl in inst.flows)

    def test_fixed_needs_alpha(self):
        with pytest.raises(ValueError, match="needs alpha"):
            generate_instance(Scenario("small", 3))

    @patch("ifdp.bench.reachable", return_value=False)
    def test_disconnected(self, mock_reachable):
        with pytest.raises(Disconnected):
            generate_instance(Scenario("small", 1, alpha=2.0))

    def test_tight_alpha_on_triangle(self):
        alpha = tight_alpha(Scenario("triangle", 3, variant="tight"))
        assert 2.0 - 1e-9 <= alpha <= 2.0 + 0.05

    def test_tight_alpha_already_feasible(self):
        inst_scenario = Scenario("triangle", 3, variant="tight")
        with patch("ifdp.bench.phase1", return_value=MagicMock(feasible=True)):
            assert tight_alpha(inst_scenario) == 1.0

    def test_never_feasible(self):
        with patch("ifdp.bench.phase1", return_value=MagicMock(feasible=False)):
            with pytest.raises(NeverFeasible):
                tight_alpha(Scenario("triangle", 3, variant="tight"))

    def test_moderate_scales_tight(self):
        with patch("ifdp.bench.tight_alpha", return_value=2.0):
            inst = generate_instance(Scenario("triangle", 3, variant="moderate"))
        assert inst.flow(0).deadline == pytest.approx(2.6 * 0.5)


# ---------------------------------------------------------------------------
# TestResolveSolver
# ---------------------------------------------------------------------------


class TestResolveSolver:
    @pytest.mark.parametrize("name", ["cga", "mfa", "tsa-2x", "oracle", "edf", "continuous", "mfa-cga"])
    def test_fixed_names(self, name):
        assert callable(resolve_solver(name))

    def test_parametric(self, triangle):
        report, _ = resolve_solver("rtsa-cga(25)")(triangle, None)
        assert report.solver == "rtsa-cga(25)"

    def test_unknown(self):
        with pytest.raises(ValueError, match="Unknown solver"):
            resolve_solver("simplex")


# ---------------------------------------------------------------------------
# TestSummaries
# ---------------------------------------------------------------------------


class TestSummaries:
    def test_gap(self):
        assert _result(objective=3.3).gap_pct == pytest.approx(10.0)
        assert _result(status="NoSolution", objective=None).gap_pct is None
        assert _result(reference=None).gap_pct is None

    def test_rates(self):
        results = [
            _result(),
            _result(status="NoSolution", objective=None),
            _result(status="TimeLimit", objective=None),
            _result(status="Error", objective=None),
        ]
        row = summarize("s", "mfa", results)
        assert row["instances"] == 4
        assert row["failure_pct"] == 75.0
        assert row["infeasible_pct"] == 25.0
        assert row["timeout_pct"] == 25.0
        assert row["gap_pct"] == pytest.approx(0.0)
        assert row["reduction_pct"] is None

    def test_time_reduction_for_hybrids(self):
        row = summarize("s", "mfa-cga", [_result("mfa-cga", wall=1.0, reference_time=2.0)])
        assert row["reduction_pct"] == pytest.approx(50.0)

    def test_empty_cell(self):
        row = summarize("s", "cga", [])
        assert row["failure_pct"] == 0.0
        assert row["time_s"] is None

    def test_csv(self):
        out = io.StringIO()
        write_csv([summarize("s", "mfa", [_result()])], out)
        lines = out.getvalue().splitlines()
        assert lines[0] == ",".join(CSV_FIELDS)
        assert lines[1].startswith("s,mfa,1,0,0,0,0,1,")

    def test_csv_to_path(self, tmp_path):
        path = tmp_path / "rows.csv"
        write_csv([summarize("s", "mfa", [_result()])], str(path))
        assert path.read_text().startswith("scenario,solver")

    def test_table(self):
        text = format_table([summarize("triangle-F3-fixed", "mfa", [_result()])])
        assert "triangle-F3-fixed" in text
        assert "Fail%" in text


# ---------------------------------------------------------------------------
# TestRunBenchmark
# ---------------------------------------------------------------------------


class TestRunBenchmark:
    def test_run_instance(self):
        results = run_instance(Scenario("triangle", 3), ["cga", "mfa", "tsa-1x"])
        by_solver = {r.solver: r for r in results}
        assert by_solver["cga"].reference == pytest.approx(3.0)
        assert by_solver["mfa"].gap_pct == pytest.approx(0.0)
        assert by_solver["tsa-1x"].status == "Infeasible"

    def test_solver_errors_are_failures(self):
        results = run_instance(Scenario("triangle", 3), ["edf"])
        assert results[0].status == "Error"
        assert "PremiseViolated" in results[0].detail
        assert not results[0].solved

    def test_rows_per_solver(self):
        monitor = MagicMock()
        outcome = run_benchmark(
            [Scenario("triangle", 3)], ["cga", "mfa"], instances_per_cell=2, workers=1, monitor=monitor,
        )
        assert [row["solver"] for row in outcome.rows] == ["cga", "mfa"]
        assert all(row["instances"] == 2 for row in outcome.rows)
        assert outcome.rows[1]["failure_pct"] == 0.0
        assert monitor.register.call_count == 2
        assert monitor.record.call_count == 4
        assert [r.seed for r in outcome.results] == [0, 0, 1, 1]

    def test_no_solvers(self):
        assert run_benchmark([Scenario("triangle", 3)], []).rows == []

    def test_session_timeout_aborts(self):
        session = MagicMock()
        session.check_timeout.side_effect = RuntimeError("Session timeout: 61.0 minutes elapsed")
        outcome = run_benchmark([Scenario("triangle", 3)], ["mfa"], session=session)
        assert "Session timeout" in outcome.aborted
        assert outcome.rows == []

    def test_plot_rows(self):
        outcome = run_benchmark(
            [Scenario("triangle", 3)], ["mfa"], instances_per_cell=1, workers=1,
            plot_data=True, gap_sweep=(25,),
        )
        series = {row["series"] for row in outcome.plot_rows}
        assert {"gap_vs_flows", "time_vs_flows", "reduction_vs_p"} <= series
        assert [row["solver"] for row in outcome.rows] == ["mfa"]


# ---------------------------------------------------------------------------
# TestConfig
# ---------------------------------------------------------------------------


class TestConfig:
    CONFIG = {
        "scenarios": [{"topology": "small", "flow_count": 5, "alpha": 2.0, "size_range": [1, 10]}],
        "solvers": ["cga", "mfa", "rtsa-cga(10)"],
        "instances_per_cell": 3,
        "time_limit": 30,
        "output": "out.csv",
    }

    def test_loads(self):
        config = loads_config(json.dumps(self.CONFIG))
        assert config.scenarios[0].size_range == (1, 10)
        assert config.solvers == ("cga", "mfa", "rtsa-cga(10)")
        assert config.instances_per_cell == 3
        assert config.gap_sweep == (5, 10, 15, 20)

    def test_unknown_key(self):
        doc = dict(self.CONFIG, colour="red")
        with pytest.raises(ParseError, match="unknown field"):
            loads_config(json.dumps(doc))

    def test_unknown_scenario_key(self):
        doc = dict(self.CONFIG, scenarios=[{"topology": "small", "flow_count": 5, "depth": 1}])
        with pytest.raises(ParseError) as excinfo:
            loads_config(json.dumps(doc))
        assert excinfo.value.field == "scenarios[0].depth"

    def test_bad_solver(self):
        doc = dict(self.CONFIG, solvers=["simplex"])
        with pytest.raises(ParseError, match="Unknown solver"):
            loads_config(json.dumps(doc))

    def test_bad_scenario(self):
        doc = dict(self.CONFIG, scenarios=[{"topology": "moon", "flow_count": 5}])
        with pytest.raises(ParseError):
            loads_config(json.dumps(doc))

    def test_read(self, tmp_path):
        path = tmp_path / "bench.json"
        path.write_text(json.dumps(self.CONFIG))
        assert read_config(path).output == "out.csv"

    @pytest.mark.parametrize("name", ["smoke.json", "benchmark.json"])
    def test_bundled_configs(self, name):
        path = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs", name)
        config = read_config(path)
        assert config.scenarios
        assert config.output.endswith(".csv")
