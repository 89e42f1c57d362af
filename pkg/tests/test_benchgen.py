"""Tests for the synthetic benchmark generator."""

from dataclasses import replace

from deskpd.benchgen import PRESETS, BenchSpec, generate_bench, write_bench
from deskpd.db import validate

SMALL = BenchSpec("small", flip_flops=6, gates=40, inputs=4, outputs=3, period_ns=2.5, seed=3)


class TestGenerateBench:
    """Generated netlists are complete and reproducible."""

    def test_deterministic(self):
        assert generate_bench(SMALL) == generate_bench(SMALL)

    def test_seed_changes_logic(self):
        assert generate_bench(SMALL)[0] != generate_bench(replace(SMALL, seed=4))[0]

    def test_netlist_builds_cleanly(self, make_design):
        verilog, _ = generate_bench(SMALL)
        design = make_design(verilog)
        assert design.name == "small"
        assert not validate(design)
        flops = [inst for inst in design.instances if inst.master.name == "DFFX1"]
        assert len(flops) == 6
        for net in design.nets:
            assert design.driver(net) is not None, net.name
            assert design.loads(net), net.name

    def test_ports(self, make_design):
        design = make_design(generate_bench(SMALL)[0])
        names = {port.name for port in design.ports}
        assert {"clk", "in0", "in3", "out0", "out2"} <= names

    def test_sdc_binds(self, make_design, make_sdc):
        verilog, sdc = generate_bench(SMALL)
        constraints = make_sdc(sdc, make_design(verilog))
        assert [c.name for c in constraints.clocks] == ["clk"]
        assert constraints.clocks[0].period == 2.5

    def test_presets(self):
        assert set(PRESETS) == {"bench50", "bench300", "bench1k"}
        assert PRESETS["bench50"].flip_flops == 50


class TestWriteBench:
    """Files land in the target directory."""

    def test_write(self, tmp_path):
        v_path, s_path = write_bench(SMALL, tmp_path / "gen")
        assert v_path.name == "small.v" and s_path.name == "small.sdc"
        verilog, sdc = generate_bench(SMALL)
        assert v_path.read_text(encoding="utf-8") == verilog
        assert s_path.read_text(encoding="utf-8") == sdc
