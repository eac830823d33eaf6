"""Run specifications loaded from YAML files and overridden by command-line flags."""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional

import yaml

from ..fabric import ConfigError, NodeConfig
from .ablation import AblationConfig

_NODE_FIELDS = {f.name: f for f in fields(NodeConfig)}


@dataclass(frozen=True)
class RunSpec:
    node: NodeConfig = field(default_factory=lambda: NodeConfig(accelerators=1, lanes_per_accelerator=8))
    kernel: str = "tc"
    graph: Optional[str] = None  # file path
    gen: Optional[str] = None  # "er:N,M" | "powerlaw:N,ATTACH" | "complete:N" | ...
    graph_format: Optional[str] = None
    source: int = 0
    damping: float = 0.85
    iters: int = 10
    coarse: bool = False
    ablation: str = "full"
    ust_operand_penalty: int = 2  # charged per operand word when UST is ablated
    eds_dispatch_penalty: int = 50  # charged per dispatch when EDS is ablated
    out: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        AblationConfig.point(self.ablation)
        if self.graph is not None and self.gen is not None:
            raise ConfigError("give either graph or gen, not both")

    def resolve(self):
        """Load or generate the graph; raises before any simulation starts."""
        from ..kernels import graph as G
        if self.graph is not None:
            return G.load_graph(self.graph, self.graph_format)
        if self.gen is None:
            raise ConfigError("no graph: set graph (a file) or gen (a generator)")
        return generate(self.gen, self.seed)


def generate(spec: str, seed: int = 0):
    from ..kernels import graph as G
    kind, _, args = spec.partition(":")
    try:
        nums = [int(x) for x in args.split(",")] if args else []
    except ValueError:
        raise ConfigError(f"bad generator arguments in {spec!r}") from None
    table = {
        "er": (2, lambda n, m: G.erdos_renyi(n, m, seed)),
        "powerlaw": (2, lambda n, a: G.power_law(n, a, seed)),
        "complete": (1, G.complete_graph),
        "path": (1, G.path_graph),
        "ring": (1, G.ring_graph),
        "star": (1, G.star_graph),
    }
    if kind not in table:
        raise ConfigError(f"unknown generator {kind!r}; choose from {', '.join(table)}")
    arity, fn = table[kind]
    if len(nums) != arity:
        raise ConfigError(f"generator {kind} takes {arity} integer argument(s)")
    return fn(*nums)


_RUN_FIELDS = {f.name: f for f in fields(RunSpec) if f.name != "node"}


def _coerce(name: str, value, ftype) -> Any:
    t = str(ftype)
    if value is None or ("Optional" in t and str(value).lower() in ("none", "null")):
        return None
    try:
        if "bool" in t:
            if isinstance(value, bool):
                return value
            s = str(value).lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if "float" in t:
            return float(value)
        if "int" in t:
            return int(float(value)) if isinstance(value, str) and "e" in value.lower() else int(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value {value!r} for {name}") from None


def spec_from_dict(d: Dict[str, Any], base: Optional[RunSpec] = None) -> RunSpec:
    """Build a RunSpec from a mapping; node fields may sit under 'node' or at top level."""
    base = base or RunSpec()
    d = dict(d or {})
    node_kw = dict(d.pop("node", None) or {})
    run_kw = {}
    for k, v in d.items():
        if k in _NODE_FIELDS:
            node_kw[k] = v
        elif k in _RUN_FIELDS:
            run_kw[k] = _coerce(k, v, _RUN_FIELDS[k].type)
        else:
            raise ConfigError(f"unknown config key {k!r}")
    for k, v in node_kw.items():
        if k not in _NODE_FIELDS:
            raise ConfigError(f"unknown node config key {k!r}")
        node_kw[k] = _coerce(k, v, _NODE_FIELDS[k].type)
    try:
        node = base.node.with_(**node_kw)
        return replace(base, node=node, **run_kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return data


def add_node_flags(p: argparse.ArgumentParser) -> None:
    """One flag per NodeConfig field, named after the field."""
    g = p.add_argument_group("node configuration")
    for name in _NODE_FIELDS:
        g.add_argument(f"--{name}", dest=f"node__{name}", default=None, metavar="V")


def node_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out = {}
    for k, v in vars(args).items():
        if k.startswith("node__") and v is not None:
            out[k[6:]] = v
    return out
