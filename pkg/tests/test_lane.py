import pytest
from hypothesis import given, strategies as st

from udsim import BootEvent, NodeConfig, SimFault, assemble
from udsim.lane import (
    ACTIVE, FREE, HOST_SRC, NEW_TID, SUSPENDED, Event, EventWord, Lane, compile_program,
    pack_evword, to_signed,
)
from util import handler, run_asm, scratch

THREE = handler("    movir X0, 1\n    movir X1, 2\n    yieldt")


def make_lane(src, contexts=4, **kw):
    code, entries = compile_program(assemble(src))
    return Lane(0, code, entries, contexts, **kw)


def step_until_idle(lane, start=0, limit=1000):
    c = start
    while lane.runnable() and c < limit:
        lane.step(c)
        lane.out.clear()
        c += 1
    return c


@given(st.integers(0, (1 << 32) - 1), st.integers(0, 255), st.integers(0, 0xFFFF))
def test_event_word_round_trip(lane, tid, label):
    w = pack_evword(lane, tid, label)
    assert w >> 63 == 1
    assert EventWord.unpack(w) == EventWord(lane, tid, label)
    assert EventWord(lane, tid, label).pack() == w


def test_event_word_layout():
    assert pack_evword(3, NEW_TID, 2) == (1 << 63) | (2 << 40) | (0xFF << 32) | 3
    assert EventWord(0, NEW_TID, 0).is_new
    with pytest.raises(ValueError):
        EventWord.unpack(0)


def test_to_signed():
    assert to_signed((1 << 64) - 1) == -1
    assert to_signed(5) == 5


@pytest.mark.parametrize("n", [1, 2, 5])
def test_zero_bubble_back_to_back_dispatch(n):
    # one dispatch cycle up front, then each 3-instruction invocation follows without a gap
    res = run_asm(THREE, boot=[BootEvent(0, "h")] * n)
    assert res.final_cycle == 1 + 3 * n
    lane = res.node.lanes[0]
    assert lane.busy_cycles == 3 * n
    assert lane.dispatch_cycles == 1


def test_no_overlap_costs_a_cycle_per_dispatch():
    cfg = NodeConfig(accelerators=1, lanes_per_accelerator=2, dispatch_overlap=False)
    res = run_asm(THREE, boot=[BootEvent(0, "h")] * 4, config=cfg)
    assert res.final_cycle == 4 * 4


@pytest.mark.parametrize("disp,opnd,nops", [(10, 0, 0), (0, 3, 2), (5, 1, 8)])
def test_dispatch_penalties(disp, opnd, nops):
    cfg = NodeConfig(accelerators=1, lanes_per_accelerator=2, dispatch_penalty=disp,
                     operand_penalty=opnd)
    ops = tuple(range(nops))
    res = run_asm(THREE, boot=[BootEvent(0, "h", ops)] * 3, config=cfg)
    per = disp + opnd * nops
    assert res.final_cycle == 1 + 3 * (3 + per)
    assert res.stats.lane_penalty_cycles[0] == 3 * per


def test_lowest_free_context_is_reused():
    lane = make_lane(handler("    movrl TID, ZERO, 0\n    yieldt"))
    for _ in range(3):
        lane.enqueue(Event(pack_evword(0, NEW_TID, 0)))
    step_until_idle(lane)
    assert lane.read_scratch(0) == 0
    assert lane.threads_created == 3
    assert lane.free == [0, 1, 2, 3]


def test_yield_keeps_context_allocated():
    lane = make_lane(handler("    movrl TID, ZERO, 0\n    yield"), contexts=4)
    for _ in range(3):
        lane.enqueue(Event(pack_evword(0, NEW_TID, 0)))
    step_until_idle(lane)
    assert [c.state for c in lane.contexts] == [SUSPENDED] * 3 + [FREE]
    assert lane.read_scratch(0) == 2
    assert lane.state_counts() == {"SUSPENDED": 3, "FREE": 1}


BYPASS = """\
.event a, b
a:
    movir X3, 5
    yield
b:
    movrl X3, ZERO, 0
    yieldt
"""


def test_bound_event_bypasses_blocked_new_head():
    lane = make_lane(BYPASS, contexts=1)
    lane.enqueue(Event(pack_evword(0, NEW_TID, 0)))
    step_until_idle(lane)
    assert lane.contexts[0].state == SUSPENDED
    # a NEW event (blocked: no free context) ahead of a bound event
    lane.enqueue(Event(pack_evword(0, NEW_TID, 0), (1,)))
    lane.enqueue(Event(pack_evword(0, 0, 1)))
    assert lane.runnable()
    lane.step(100)
    assert lane.active is not None and lane.active.tid == 0
    assert lane.regs[3] == 5  # context state restored
    step_until_idle(lane, 101)
    assert lane.read_scratch(0) == 5
    # the NEW event got the freed context afterwards
    assert lane.threads_created == 2
    assert lane.contexts[0].state == SUSPENDED
    assert lane.queue_depth == 0


def test_event_order_is_fifo_across_queues():
    lane = make_lane(BYPASS, contexts=2)
    lane.enqueue(Event(pack_evword(0, NEW_TID, 0)))
    step_until_idle(lane)
    lane.enqueue(Event(pack_evword(0, 0, 1)))
    lane.enqueue(Event(pack_evword(0, NEW_TID, 0)))
    lane.step(50)
    assert lane.active.tid == 0  # the older bound event goes first


def test_context_exhaustion_deadlock_is_reported():
    cfg = NodeConfig(accelerators=1, lanes_per_accelerator=1, contexts_per_lane=2)
    res = run_asm(handler("    yield"), boot=[BootEvent(0, "h")] * 3, config=cfg)
    assert not res.ok
    assert "deadlock" in str(res.fault)


def test_dangling_binding_faults():
    lane = make_lane(BYPASS)
    lane.enqueue(Event(pack_evword(0, 2, 1)))
    with pytest.raises(SimFault, match="dangling"):
        lane.step(0)


def test_unknown_label_faults():
    lane = make_lane(BYPASS)
    lane.enqueue(Event(pack_evword(0, NEW_TID, 9)))
    with pytest.raises(SimFault, match="unknown event label"):
        lane.step(0)


def test_operands_cleared_between_invocations():
    src = handler("    movrl OB1, ZERO, 0\n    movrl EOPS, ZERO, 8\n    yieldt")
    lane = make_lane(src)
    lane.enqueue(Event(pack_evword(0, NEW_TID, 0), (1, 2)))
    lane.enqueue(Event(pack_evword(0, NEW_TID, 0), (3,)))
    step_until_idle(lane)
    assert lane.read_scratch(0) == 0
    assert lane.read_scratch(8) == 1


def test_gprs_zeroed_for_new_thread():
    src = handler("    movrl X4, ZERO, 0\n    movir X4, 9\n    yieldt")
    lane = make_lane(src)
    for _ in range(2):
        lane.enqueue(Event(pack_evword(0, NEW_TID, 0)))
    step_until_idle(lane)
    assert lane.read_scratch(0) == 0


def test_histograms_and_counters():
    res = run_asm(THREE, boot=[BootEvent(0, "h")] * 4)
    lane = res.node.lanes[0]
    assert lane.inst_hist == {3: 4}
    assert lane.mem_hist == {0: 4}
    assert lane.invocations == 4
    assert lane.threads_finished == 4
    assert lane.events_received == 4


def test_queue_high_water_counted():
    cfg = NodeConfig(accelerators=1, lanes_per_accelerator=1, queue_high_water=2)
    res = run_asm(THREE, boot=[BootEvent(0, "h")] * 5, config=cfg)
    lane = res.node.lanes[0]
    assert lane.queue_max == 5
    assert lane.high_water_events == 3


def test_multi_cycle_block_copy_charges_cycles():
    base = handler("    movir X0, 0\n    movir X1, 512\n    movir X2, {n}\n    bcpy X0, X1, X2\n    yieldt")
    short = run_asm(base.format(n=1)).final_cycle
    long = run_asm(base.format(n=17)).final_cycle
    assert long - short == 16


def test_host_event_source():
    src = handler("    movrl ESRC, ZERO, 0\n    yieldt")
    assert scratch(run_asm(src), 0) == HOST_SRC


def test_active_state_visible_mid_invocation():
    lane = make_lane(THREE)
    lane.enqueue(Event(pack_evword(0, NEW_TID, 0)))
    lane.step(0)
    assert lane.active.state == ACTIVE
    assert not lane.idle()
