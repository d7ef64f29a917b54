"""Scenario description and JSON config parsing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import ConfigError, InvalidParameter
from ..messages import Variant
from ..prover import Backend, ForwardTimerMode
from .adversary import AdversaryScript
from .link import LinkModel
from .topology import KINDS, Topology, build_topology


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "star"
    n: int = 10
    degree: int = 2

    def build(self) -> Topology:
        try:
            return build_topology(self.kind, self.n, self.degree)
        except InvalidParameter as exc:
            raise ConfigError(str(exc), "topology") from None

    @property
    def label(self) -> str:
        return f"tree:{self.degree}" if self.kind == "tree" else self.kind


@dataclass(frozen=True)
class Timing:
    """Per-operation budget in microseconds; defaults match the CASU build measurements."""

    t_request: int = 5_000
    t_hash: int = 13_000
    t_report: int = 4_000
    t_mac: int = 29_500
    t_slack: int = 5_000


@dataclass(frozen=True)
class ClockSpec:
    """Per-node clock error drawn uniformly from ``[lo, hi]``.

    ``kind`` is ``"rtc_offset"`` (integer microseconds, variant A) or
    ``"drift"`` (ppm, variant B).
    """

    kind: str = "rtc_offset"
    lo: float = 0
    hi: float = 0


STOP_AFTER = ("tally", "attest")
TRACE_LEVELS = ("full", "summary")


@dataclass(frozen=True)
class Scenario:
    variant: Variant = Variant.A
    topology: TopologySpec = field(default_factory=TopologySpec)
    timing: Timing = field(default_factory=Timing)
    clock: ClockSpec | None = None
    backend: Backend = Backend.CASU
    compromised: frozenset = frozenset()
    adversary: AdversaryScript = field(default_factory=AdversaryScript)
    instances: int = 1
    chain_m: int = 1024
    renewal_k: int | None = 2
    seed: int = 0
    link: LinkModel = field(default_factory=LinkModel)
    sync_tolerance: int | None = None
    forward_timer: ForwardTimerMode = ForwardTimerMode.MAX_DELAY
    height_net: int | None = None  # None: use the topology's height
    instance_gap: int | None = None  # None: t_slack
    stop_after: str = "tally"
    trace_level: str = "full"

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "backend", Backend(self.backend))
        object.__setattr__(self, "forward_timer", ForwardTimerMode(self.forward_timer))
        object.__setattr__(self, "compromised", frozenset(self.compromised))
        if self.clock is None:
            kind = "drift" if self.variant is Variant.B else "rtc_offset"
            object.__setattr__(self, "clock", ClockSpec(kind, 0, 0))
        self.validate()

    def validate(self) -> None:
        if self.topology.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}", "topology.kind")
        if self.topology.n < 1:
            raise ConfigError("n must be >= 1", "topology.n")
        if self.topology.kind == "tree" and not 2 <= self.topology.degree <= 12:
            raise ConfigError("degree must be in 2..12", "topology.degree")
        for name in ("t_request", "t_hash", "t_report", "t_mac", "t_slack"):
            if getattr(self.timing, name) < 0:
                raise ConfigError("must be non-negative", f"timing.{name}_us")
        if self.clock.kind not in ("rtc_offset", "drift"):
            raise ConfigError("unknown clock model", "clock")
        if self.clock.lo > self.clock.hi:
            raise ConfigError("range must be [lo, hi] with lo <= hi", "clock")
        if self.variant is Variant.A and self.clock.kind != "rtc_offset":
            raise ConfigError("variant A provers use an RTC; give rtc_offset_us", "clock")
        if self.variant is Variant.B and self.clock.kind != "drift":
            raise ConfigError("variant B provers use a secure timer; give drift_ppm", "clock")
        if self.clock.kind == "drift" and not -1e5 < self.clock.lo:
            raise ConfigError("drift out of range", "clock")
        bad = [i for i in self.compromised if not 1 <= i <= self.topology.n]
        if bad:
            raise ConfigError(f"unknown prover id {min(bad)}", "compromised")
        if self.instances < 1:
            raise ConfigError("must be >= 1", "instances")
        if self.chain_m < 1:
            raise ConfigError("must be >= 1", "chain_m")
        if self.renewal_k is not None and self.renewal_k < 0:
            raise ConfigError("must be >= 0", "renewal_k")
        if self.stop_after not in STOP_AFTER:
            raise ConfigError(f"must be one of {STOP_AFTER}", "stop_after")
        if self.stop_after == "attest" and self.instances != 1:
            raise ConfigError("stop_after=attest supports a single instance", "stop_after")
        if self.trace_level not in TRACE_LEVELS:
            raise ConfigError(f"must be one of {TRACE_LEVELS}", "trace_level")
        if self.height_net is not None and self.height_net < 0:
            raise ConfigError("must be >= 0", "height_net")
        for rule in self.adversary.rules:
            if rule.action == "inject" and not (0 <= rule.src <= self.topology.n
                                                and 0 <= rule.dst <= self.topology.n):
                raise ConfigError("inject link endpoints must be node ids", "adversary")

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


_TOP_KEYS = {
    "variant", "topology", "timing", "clock", "backend", "compromised", "adversary",
    "instances", "chain_m", "renewal_k", "seed", "link", "sync_tolerance_us",
    "forward_timer", "height_net", "instance_gap_us", "stop_after", "trace_level",
}


def _int(raw, key, where, default):
    value = raw.get(key, default)
    if value is None and default is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("expected an integer", where)
    return value


def _obj(raw, key):
    value = raw.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError("expected an object", key)
    return value


def _no_extra(obj: dict, allowed: set, where: str):
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)}", where)


def scenario_from_dict(raw: dict) -> Scenario:
    """Build a Scenario from a config document; every omitted field takes its default."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _no_extra(raw, _TOP_KEYS, "config")

    variant = raw.get("variant", "A")
    if variant not in ("A", "B"):
        raise ConfigError("must be 'A' or 'B'", "variant")
    variant = Variant(variant)

    topo = _obj(raw, "topology")
    _no_extra(topo, {"kind", "n", "degree"}, "topology")
    kind = topo.get("kind", "star")
    if kind not in KINDS:
        raise ConfigError(f"must be one of {list(KINDS)}", "topology.kind")
    topology = TopologySpec(kind, _int(topo, "n", "topology.n", 10),
                            _int(topo, "degree", "topology.degree", 2))

    tm = _obj(raw, "timing")
    names = ("t_request", "t_hash", "t_report", "t_mac", "t_slack")
    _no_extra(tm, {f"{n}_us" for n in names}, "timing")
    base = Timing()
    timing = Timing(**{n: _int(tm, f"{n}_us", f"timing.{n}_us", getattr(base, n)) for n in names})

    clock = None
    if "clock" in raw:
        ck = _obj(raw, "clock")
        _no_extra(ck, {"rtc_offset_us", "drift_ppm"}, "clock")
        if len(ck) != 1:
            raise ConfigError("give exactly one of rtc_offset_us, drift_ppm", "clock")
        (key, rng), = ck.items()
        if not (isinstance(rng, list) and len(rng) == 2
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rng)):
            raise ConfigError("expected [lo, hi]", f"clock.{key}")
        if key == "rtc_offset_us" and not all(isinstance(v, int) for v in rng):
            raise ConfigError("offsets are integer microseconds", f"clock.{key}")
        clock = ClockSpec("rtc_offset" if key == "rtc_offset_us" else "drift", rng[0], rng[1])

    backend = raw.get("backend", "CASU")
    if backend not in ("RATA", "CASU"):
        raise ConfigError("must be 'RATA' or 'CASU'", "backend")

    comp = raw.get("compromised", [])
    if not isinstance(comp, list) or not all(isinstance(i, int) for i in comp):
        raise ConfigError("expected a list of prover ids", "compromised")

    adversary = AdversaryScript.from_list(raw.get("adversary", []))

    lk = _obj(raw, "link")
    _no_extra(lk, {"bandwidth_bps", "latency_us", "jitter_us", "fifo"}, "link")
    default_link = LinkModel()
    bw = lk.get("bandwidth_bps", default_link.bandwidth_bps)
    if bw is not None and (isinstance(bw, bool) or not isinstance(bw, int) or bw <= 0):
        raise ConfigError("expected a positive integer or null", "link.bandwidth_bps")
    try:
        link = LinkModel(
            bandwidth_bps=bw,
            latency_us=_int(lk, "latency_us", "link.latency_us", default_link.latency_us),
            jitter_us=_int(lk, "jitter_us", "link.jitter_us", default_link.jitter_us),
            fifo=bool(lk.get("fifo", False)),
        )
    except InvalidParameter as exc:
        raise ConfigError(str(exc), "link") from None

    fwd = raw.get("forward_timer", "max_delay")
    if fwd not in ("max_delay", "height_scaled"):
        raise ConfigError("must be 'max_delay' or 'height_scaled'", "forward_timer")

    renewal_k = raw.get("renewal_k", 2)
    if renewal_k is not None and (isinstance(renewal_k, bool) or not isinstance(renewal_k, int)):
        raise ConfigError("expected an integer or null", "renewal_k")

    return Scenario(
        variant=variant,
        topology=topology,
        timing=timing,
        clock=clock,
        backend=Backend(backend),
        compromised=frozenset(comp),
        adversary=adversary,
        instances=_int(raw, "instances", "instances", 1),
        chain_m=_int(raw, "chain_m", "chain_m", 1024),
        renewal_k=renewal_k,
        seed=_int(raw, "seed", "seed", 0),
        link=link,
        sync_tolerance=_int(raw, "sync_tolerance_us", "sync_tolerance_us", None),
        forward_timer=ForwardTimerMode(fwd),
        height_net=_int(raw, "height_net", "height_net", None),
        instance_gap=_int(raw, "instance_gap_us", "instance_gap_us", None),
        stop_after=raw.get("stop_after", "tally"),
        trace_level=raw.get("trace_level", "full"),
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                          str(path)) from None
    return scenario_from_dict(raw)
