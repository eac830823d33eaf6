import pytest

from udsim import (
    BootEvent, ConfigError, DramImage, Halt, Node, NodeConfig, ResultField, assemble, host_collect,
)
from udsim.lane import float_to_bits, pack_evword
from util import handler, run_asm, scratch

SENDER = handler("    movrl CYCLE, ZERO, 0\n    send OB0, X0, 0\n    yieldt",
                 "g:\n    movrl CYCLE, ZERO, 8\n    yieldt\n")
TWO_BY_TWO = NodeConfig(accelerators=2, lanes_per_accelerator=2)


def hop(dst, cfg=TWO_BY_TWO):
    res = run_asm(SENDER, (pack_evword(dst, 0xFF, 1),), config=cfg)
    assert res.ok
    return scratch(res, 8, dst) - scratch(res, 0, 0)


def test_noc_latency_intra_vs_inter():
    assert hop(2) - hop(1) == 30 - 10


def test_noc_latency_configurable():
    cfg = TWO_BY_TWO.with_(noc_latency_intra=25)
    assert hop(1, cfg) - hop(1) == 15


def test_send_to_self():
    assert hop(0) == hop(1)


MEM = handler("    movrl CYCLE, ZERO, 0\n    ev X0, NWID, TID, @g\n    movir X1, 4096\n"
              "    sendm X0, X1, 8, R, X0\n    movrl CYCLE, ZERO, 16\n    yield",
              "g:\n    movrl CYCLE, ZERO, 8\n    yieldt\n")


def test_memory_round_trip_time():
    res = run_asm(MEM)
    assert res.stats.mean_latency == 203
    # same delivery-to-handler offset as a message
    mem_gap = scratch(res, 8) - scratch(res, 0)
    assert mem_gap - hop(1) == 203 - 10 + 2  # sendm sits two instructions later than send


def test_blocking_memory_stalls_the_lane():
    split = run_asm(MEM)
    blocking = run_asm(MEM, config=NodeConfig(accelerators=1, lanes_per_accelerator=2,
                                              split_transaction=False))
    # the instruction after sendm only issues after the response completes
    assert scratch(split, 16) - scratch(split, 0) == 4
    assert scratch(blocking, 16) - scratch(blocking, 0) > 200
    assert blocking.node.lanes[0].stall_cycles > 0


def test_quiescence_reported():
    res = run_asm(MEM)
    assert res.halted is Halt.QUIESCENT and res.ok
    assert res.fault is None


def test_max_cycles_halt():
    spin = handler("L:\n    beq ZERO, ZERO, L\n    yieldt")
    res = run_asm(spin, config=NodeConfig(accelerators=1, lanes_per_accelerator=1, max_cycles=500))
    assert res.halted is Halt.MAX_CYCLES
    assert res.final_cycle == 500


def test_advance_in_slices_matches_run():
    prog = assemble(MEM)
    cfg = NodeConfig(accelerators=1, lanes_per_accelerator=2)
    whole = Node(cfg, prog, DramImage(1 << 20))
    whole.inject([BootEvent(0, "h")])
    a = whole.run()
    sliced = Node(cfg, prog, DramImage(1 << 20))
    sliced.inject([BootEvent(0, "h")])
    steps = 0
    while sliced.advance(37) is None:
        steps += 1
        assert sliced.cycle == 37 * steps
        assert sliced.dram.in_simulation
    assert steps == a.final_cycle // 37
    b = sliced.result()
    assert b.final_cycle == a.final_cycle
    assert b.stats == a.stats


def test_invalid_destination_faults():
    res = run_asm(SENDER, (pack_evword(99, 0xFF, 1),))
    assert res.halted is Halt.FAULT
    assert "invalid destination" in str(res.fault)


def test_boot_errors():
    with pytest.raises(ConfigError, match="unknown label"):
        run_asm(SENDER, boot=[BootEvent(0, "nope")])
    with pytest.raises(ConfigError, match="more than 8"):
        run_asm(SENDER, boot=[BootEvent(0, "h", tuple(range(9)))])
    res = run_asm(SENDER, boot=[BootEvent(7, "h")])
    assert res.halted is Halt.FAULT


@pytest.mark.parametrize("kw", [
    {"accelerators": 0}, {"lanes_per_accelerator": 0}, {"contexts_per_lane": 256},
    {"dispatch_penalty": -1}, {"channel_gbps": 0}, {"stacks": 0},
])
def test_node_config_validation(kw):
    with pytest.raises(ConfigError):
        NodeConfig(**kw)


def test_node_config_dict_round_trip():
    cfg = NodeConfig(accelerators=3, port_gbps=None)
    assert NodeConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        NodeConfig.from_dict({"bogus": 1})
    assert cfg.n_lanes == 192
    assert cfg.accelerator_of(130) == 2


def test_host_collect_dtypes_and_scratch():
    dram = DramImage(1 << 12)
    dram.write_words(0, [5, (1 << 64) - 3, float_to_bits(2.5)])
    res = run_asm(handler("    movir X0, 11\n    movrl X0, ZERO, 64\n    yieldt"))
    spec = [ResultField("u", 0), ResultField("i", 8, dtype="i64"), ResultField("f", 16, dtype="f64"),
            ResultField("pair", 0, 2), ResultField("sp", 64, lane=0)]
    got = host_collect(spec, dram, res.node.lanes)
    assert got == {"u": 5, "i": -3, "f": 2.5, "pair": [5, (1 << 64) - 3], "sp": 11}
    with pytest.raises(ValueError):
        host_collect([ResultField("x", 0, lane=5)], dram, res.node.lanes)


def test_host_collect_refuses_mid_run():
    dram = DramImage(64)
    dram.in_simulation = True
    with pytest.raises(RuntimeError):
        host_collect([ResultField("x", 0)], dram)


def test_stats_summary_fields():
    res = run_asm(MEM)
    s = res.stats
    assert s.total_cycles == res.final_cycle
    assert s.mem_requests == 1 and s.bytes_read == 64
    assert s.threads_created == s.threads_finished == 1
    assert s.invocations == 2
    assert s.n_lanes == 2
    assert 0 < s.lane_utilization[0] <= 1 and s.lane_utilization[1] == 0
    summary = s.summary()
    assert summary["total_cycles"] == res.final_cycle


def test_scratch_init_loaded_before_boot():
    res = run_asm(handler("    movlr X0, ZERO, 8\n    movrl X0, ZERO, 16\n    yieldt"),
                  scratch={0: {8: 42}})
    assert scratch(res, 16) == 42
