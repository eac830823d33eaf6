"""Shared helpers for the test suite."""

from udsim import BootEvent, DramImage, NodeConfig, assemble, run
from udsim.lane import bits_to_float, float_to_bits

SMALL = NodeConfig(accelerators=1, lanes_per_accelerator=2)


def run_asm(source, ops=(), label=None, config=SMALL, dram=None, boot=None, scratch=None):
    """Assemble, boot one event on lane 0 and run to quiescence."""
    prog = assemble(source)
    if boot is None:
        boot = [BootEvent(0, label or prog.handlers[0].name, ops)]
    dram = dram if dram is not None else DramImage(1 << 20)
    res = run(config, prog, dram, boot, scratch)
    return res


def handler(body, extra=""):
    """One-handler program named h, plus optional extra handlers."""
    names = ["h"] + [ln.split(":")[0] for ln in extra.splitlines()
                     if ln.endswith(":") and not ln.startswith(" ")]
    return f".event {', '.join(names)}\nh:\n{body}\n{extra}"


def scratch(res, addr, lane=0):
    return res.node.lanes[lane].read_scratch(addr)


def run_bundle(bundle, config):
    """Run a kernel bundle and return (result, collected value)."""
    dram = DramImage(config.dram_bytes)
    bundle.prepare(dram)
    res = run(config, bundle.program, dram, bundle.boot, bundle.scratch_init)
    value = bundle.collect(dram, res.node.lanes) if res.ok else None
    return res, value


__all__ = ["SMALL", "bits_to_float", "float_to_bits", "handler", "run_asm", "run_bundle",
           "scratch"]
