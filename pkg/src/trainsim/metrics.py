"""Post-run analytics: TOCTOU spread, runtime, sweeps and CSV output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .errors import AnalysisError, ConfigError
from .simnet.engine import RunResult, run
from .simnet.scenario import Scenario, TopologySpec
from .simnet.trace import EventTrace
from .verifier import TallySets

CSV_COLUMNS = ("kind", "d", "n", "height_net", "total_runtime_us", "toctou_sa_us",
               "attest", "fail", "norep")


def _as_trace(obj) -> EventTrace:
    return obj.trace if isinstance(obj, RunResult) else obj


def _check_instance(trace: EventTrace, instance: int) -> None:
    if not any(r.instance == instance for r in trace.of_kind("initiate")):
        raise AnalysisError(f"instance {instance} was never initiated in this trace")


def _spread(times: list[int]) -> int:
    return max(times) - min(times) if times else 0


def toctou_sa(trace, instance: int = 0) -> int:
    """Spread in true time between the earliest and latest benign attestation."""
    trace = _as_trace(trace)
    _check_instance(trace, instance)
    bad = trace.compromised
    times = [r.time for r in trace.of_kind("attest") if r.instance == instance and r.node not in bad]
    if not times:
        raise AnalysisError(f"no benign prover attested in instance {instance}")
    return _spread(times)


def toctou_from_sidecar(sidecar: dict, instance: int = 0) -> int:
    """Same quantity as :func:`toctou_sa`, recomputed from the exported attest-time sidecar."""
    bad = {str(i) for i in sidecar.get("compromised", [])}
    try:
        entries = sidecar["instances"][instance]["attest_times"]
    except (KeyError, IndexError):
        raise AnalysisError(f"sidecar has no instance {instance}") from None
    times = [v["true_time_us"] for k, v in entries.items() if k not in bad]
    if not times:
        raise AnalysisError(f"no benign prover attested in instance {instance}")
    return _spread(times)


def strawman_toctou(trace, instance: int = 0) -> int:
    """TOCTOU spread if every benign prover had attested the moment it accepted the request."""
    trace = _as_trace(trace)
    _check_instance(trace, instance)
    bad = trace.compromised
    times = [r.time for r in trace.of_kind("accept") if r.instance == instance and r.node not in bad]
    if not times:
        raise AnalysisError(f"no benign prover accepted the request in instance {instance}")
    return _spread(times)


def total_runtime(trace, instance: int = 0) -> int:
    trace = _as_trace(trace)
    start = end = None
    for r in trace.of_kind("initiate", "tally"):
        if r.instance != instance:
            continue
        if r.kind == "initiate":
            start = r.time
        else:
            end = r.time
    if start is None:
        raise AnalysisError(f"instance {instance} was never initiated in this trace")
    if end is None:
        raise AnalysisError(f"instance {instance} has no tally")
    return end - start


@dataclass
class InstanceMetrics:
    instance: int
    toctou_sa_us: int | None
    total_runtime_us: int | None
    tally: TallySets | None
    per_node_attest_times: dict[int, int] = field(repr=False, default_factory=dict)

    def to_json(self) -> dict:
        return {"instance": self.instance, "toctou_sa_us": self.toctou_sa_us,
                "total_runtime_us": self.total_runtime_us}


def _or_none(fn, *args):
    try:
        return fn(*args)
    except AnalysisError:
        return None


def instance_metrics(result: RunResult) -> list[InstanceMetrics]:
    out = []
    for o in result.outcomes:
        log = result.trace.attest_log[o.index]
        out.append(InstanceMetrics(
            instance=o.index,
            toctou_sa_us=_or_none(toctou_sa, result.trace, o.index),
            total_runtime_us=_or_none(total_runtime, result.trace, o.index),
            tally=o.tally,
            per_node_attest_times={node: tt for node, (tt, _) in log.items()},
        ))
    return out


@dataclass(frozen=True)
class SweepRow:
    kind: str
    d: int | None
    n: int
    height_net: int
    total_runtime_us: int | None
    toctou_sa_us: int | None
    attest: int
    fail: int
    norep: int

    def as_list(self) -> list:
        return ["" if v is None else v for v in (
            self.kind, self.d, self.n, self.height_net, self.total_runtime_us,
            self.toctou_sa_us, self.attest, self.fail, self.norep)]


def parse_topology_label(label: str) -> tuple[str, int]:
    """``"star"``, ``"line"`` or ``"tree:<degree>"``."""
    if label in ("star", "line"):
        return label, 2
    if label.startswith("tree:"):
        try:
            degree = int(label[5:])
        except ValueError:
            raise ConfigError(f"bad tree degree in {label!r}", "axis") from None
        if not 2 <= degree <= 12:
            raise ConfigError(f"tree degree must be in 2..12, got {degree}", "axis")
        return "tree", degree
    raise ConfigError(f"unknown topology {label!r}; use star, line or tree:<d>", "axis")


def parse_axis(text: str) -> tuple[str, list]:
    """Parse ``n=10,100`` or ``topo=star,tree:2``; repeated values keep their first position."""
    name, sep, rest = text.partition("=")
    if not sep or name not in ("n", "topo"):
        raise ConfigError(f"expected n=... or topo=..., got {text!r}", "axis")
    values: list = []
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if name == "n":
            try:
                value = int(item)
            except ValueError:
                raise ConfigError(f"not an integer: {item!r}", "axis") from None
            if value < 1:
                raise ConfigError(f"n must be >= 1, got {value}", "axis")
        else:
            parse_topology_label(item)
            value = item
        if value not in values:
            values.append(value)
    return name, values


def sweep_point(scenario: Scenario) -> SweepRow:
    result = run(scenario)
    o = result.outcomes[0] if result.outcomes else None
    tally = o.tally if o is not None else None
    topo = result.topology
    return SweepRow(
        kind=topo.kind,
        d=topo.degree,
        n=topo.n,
        height_net=result.timing.height_net,
        total_runtime_us=_or_none(total_runtime, result.trace, 0),
        toctou_sa_us=_or_none(toctou_sa, result.trace, 0),
        attest=len(tally.attest) if tally else 0,
        fail=len(tally.fail) if tally else 0,
        norep=len(tally.norep) if tally else 0,
    )


def sweep_scenarios(base: Scenario, axis: str, values: Iterable) -> list[Scenario]:
    base = base.with_(instances=1, trace_level="summary")
    out = []
    for v in values:
        if axis == "n":
            topo = TopologySpec(base.topology.kind, v, base.topology.degree)
        else:
            kind, degree = parse_topology_label(v)
            topo = TopologySpec(kind, base.topology.n, degree)
        out.append(base.with_(topology=topo))
    return out


def sweep(base: Scenario, axis: str, values: Iterable) -> list[SweepRow]:
    """One single-instance run per axis value, in axis order."""
    return [sweep_point(sc) for sc in sweep_scenarios(base, axis, values)]


def write_csv(rows: Iterable[SweepRow], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow(row.as_list())


def rows_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()
