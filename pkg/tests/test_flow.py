"""Tests for step sequencing, checkpoints and run reports."""

import json
from pathlib import Path

import pytest

from deskpd.config import Settings
from deskpd.db import validate
from deskpd.errors import BufferMasterMissing, PreconditionViolated, StepFailed
from deskpd.flow import FlowApp, checkpoint_stem, dump_json, format_run_report
from deskpd.models import RunReport, StepReport


def _app(path: Path, **kwargs: object) -> FlowApp:
    return FlowApp(Settings(config_file=path, threads=2, **kwargs))


class TestHelpers:
    """Checkpoint naming and stable JSON."""

    def test_checkpoint_stem(self):
        assert checkpoint_stem("floorplan") == "01_floorplan"
        assert checkpoint_stem("power") == "07_power"

    def test_dump_json_sorted_and_rounded(self):
        text = dump_json({"b": 1.0000000001, "a": [0.1234567891234]})
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": [0.123456789], "b": 1.0}

    def test_format_run_report(self):
        report = RunReport(
            design="top",
            steps=[
                StepReport(
                    name="place", checkpoint="02_place.def", metrics={"hpwl": 12.5}, warnings=["w"]
                )
            ],
            summary={"failed": "cts", "error": "boom"},
        )
        text = format_run_report(report)
        assert text.startswith("design top\n")
        assert "hpwl=12.5" in text
        assert "    warning: w" in text
        assert text.endswith("failed at cts: boom\n")


class TestRunStep:
    """Single steps against checkpoints."""

    def test_floorplan_from_netlist(self, flow_config_file):
        app = _app(flow_config_file(steps=["floorplan"]))
        outcome = app.run_step("floorplan")
        assert outcome.name == "floorplan"
        assert outcome.report.checkpoint == "01_floorplan.def"
        assert outcome.report.metrics["rows"] == len(outcome.design.rows) > 0
        assert outcome.checkpoint.startswith("VERSION")
        path = app.write_step(outcome)
        assert path.name == "01_floorplan.def"
        assert (path.parent / "01_floorplan.json").is_file()
        assert not (path.parent / "01_floorplan.svg").exists()

    def test_svg_written_when_enabled(self, flow_config_file):
        app = _app(flow_config_file(steps=["floorplan"], svg=True))
        path = app.write_step(app.run_step("floorplan"))
        assert (path.parent / "01_floorplan.svg").read_text(encoding="utf-8").count("<svg") == 1

    def test_missing_checkpoint(self, flow_config_file):
        app = _app(flow_config_file())
        with pytest.raises(PreconditionViolated) as info:
            app.run_step("cts")
        assert info.value.step == "cts"
        assert "place" in info.value.requirement

    def test_unknown_step(self, flow_config_file):
        app = _app(flow_config_file())
        with pytest.raises(PreconditionViolated):
            app.run_step("synthesis")

    def test_cts_requires_legal_placement(self, flow_config_file):
        app = _app(flow_config_file())
        floorplan = app.run_step("floorplan")
        with pytest.raises(PreconditionViolated):
            app.run_step("cts", floorplan.checkpoint)

    def test_stepwise_matches_monolithic(self, flow_config_file, tmp_path):
        config = flow_config_file(steps=["floorplan", "place", "cts"])
        app = _app(config)
        report = app.run_flow()
        assert [s.name for s in report.steps] == ["floorplan", "place", "cts"]

        stepwise = _app(config, output_dir=tmp_path / "stepwise")
        checkpoint = None
        for name in ("floorplan", "place", "cts"):
            outcome = stepwise.run_step(name, checkpoint)
            stepwise.write_step(outcome)
            checkpoint = outcome.checkpoint
        monolithic = app.output_dir / "03_cts.def"
        assert checkpoint == monolithic.read_text(encoding="utf-8")


class TestRunFlow:
    """Whole-flow runs, reports and failures."""

    def test_floorplan_only(self, flow_config_file):
        app = _app(flow_config_file(steps=["floorplan"]))
        report = app.run_flow()
        out = app.output_dir
        assert (out / "01_floorplan.def").is_file()
        assert (out / "01_floorplan.json").is_file()
        loaded = app.load_report()
        assert loaded.summary == report.summary
        assert [s.name for s in loaded.steps] == ["floorplan"]
        assert report.summary["completed"] == ["floorplan"]
        assert report.design == "bench50"

    def test_full_flow(self, flow_config_file):
        app = _app(flow_config_file())
        report = app.run_flow()
        out = app.output_dir
        assert [s.name for s in report.steps] == [
            "floorplan", "place", "cts", "opt", "route", "sta", "power"
        ]
        for filename in ("07_power.def", "route.guide", "timing.rpt", "power.rpt", "report.json"):
            assert (out / filename).is_file(), filename
        for key in ("hpwl", "skew", "wns", "overflow", "power_total"):
            assert key in report.summary, key
        assert report.summary["overflow"] == 0
        assert report.summary["wns"] >= 0
        for step in report.steps:
            text = (out / step.checkpoint).read_text(encoding="utf-8")
            assert validate(app.read_checkpoint(text, source=step.checkpoint)) == [], step.name

    def test_large_design_closes_timing(self, flow_config_file):
        """The thousand-gate benchmark routes cleanly and meets its derived clock."""
        app = _app(flow_config_file("bench1k", router={"max_rounds": 20}))
        report = app.run_flow()
        floorplan = report.steps[0].metrics
        assert floorplan["clock_periods"]["clk"] > 4.0
        assert report.summary["overflow"] == 0
        assert report.summary["wns"] >= 0

    def test_deterministic(self, flow_config_file, tmp_path):
        config = flow_config_file(steps=["floorplan", "place", "cts", "opt", "route"])
        first = _app(config, output_dir=tmp_path / "one")
        second = _app(config, output_dir=tmp_path / "two")
        first.run_flow()
        second.run_flow()
        for name in ("01_floorplan", "02_place", "03_cts", "04_opt", "05_route"):
            a = (first.output_dir / f"{name}.def").read_bytes()
            b = (second.output_dir / f"{name}.def").read_bytes()
            assert a == b, name
        guides = [d / "route.guide" for d in (first.output_dir, second.output_dir)]
        assert guides[0].read_bytes() == guides[1].read_bytes()

    def test_failure_writes_partial_report(self, flow_config_file):
        app = _app(flow_config_file(steps=["floorplan", "place", "cts"], cts={"buffer": "NOPE"}))
        with pytest.raises(StepFailed) as info:
            app.run_flow()
        assert info.value.step == "cts"
        assert isinstance(info.value.cause, BufferMasterMissing)
        report = app.load_report()
        assert report.summary["completed"] == ["floorplan", "place"]
        assert report.summary["failed"] == "cts"
        assert "NOPE" in report.summary["error"]
        assert (app.output_dir / "02_place.def").is_file()
        assert not (app.output_dir / "03_cts.def").exists()

    def test_render(self, flow_config_file):
        app = _app(flow_config_file(steps=["floorplan", "place"]))
        app.run_flow()
        svg = app.render(app.output_dir / "02_place.def")
        assert "<svg" in svg and svg.rstrip().endswith("</svg>")
