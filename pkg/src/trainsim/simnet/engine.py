"""Deterministic discrete-event execution of a scenario.

Events are ordered by ``(time, priority, sequence)``: node timers fire before
frame deliveries at the same instant, which fire before verifier timeouts,
which fire before a new instance starts.  Everything random comes from one
``random.Random(seed)``.

Report relay has a fast path ("express relay").  Once a forwarder has
accepted the current request its ForwardWait window is fully determined, so a
report's climb to the verifier can be computed hop by hop without queueing an
event per hop.  The fast path is only used when no adversary rule can see
reports and links are not FIFO-serialised; any hop whose outcome is not yet
settled falls back to an ordinary delivery event.
"""

from __future__ import annotations

import gc
import heapq
import random
from dataclasses import dataclass, field
from heapq import heappop, heappush

from .. import messages
from ..crypto import H, generate_chain
from ..errors import ChainDepleted, TrainError
from ..messages import TYPE_REPORT, TYPE_REQUEST, Variant, encode
from ..prover import Backend, Broadcast, ClockModel, ProverConfig, ProverNode, ProverState
from ..verifier import DeviceRecord, RenewalEvent, TallySets, TimingParams, Verifier, VerifierPhase
from .adversary import Frame, apply_adversary
from .scenario import Scenario
from .topology import Topology
from .trace import NO_STATE, EventTrace, TraceRecord

PRIO_TIMER, PRIO_DELIVER, PRIO_VERIFIER, PRIO_INIT = range(4)
EV_DELIVER, EV_ATTEST, EV_FWD_EXPIRE, EV_TIMEOUT, EV_INIT, EV_SEND = range(6)

SUMMARY_KINDS = frozenset({"initiate", "accept", "attest", "tally", "renewal", "depleted", "adversary"})

_IDLE = ProverState.IDLE
_FORWARD_WAIT = ProverState.FORWARD_WAIT


def _seed_bytes(seed: int) -> bytes:
    return str(seed).encode()


def chain_root(seed: int) -> bytes:
    return H(b"train-chain-root" + _seed_bytes(seed))


def device_key(seed: int, node: int) -> bytes:
    return H(b"kdev" + _seed_bytes(seed) + node.to_bytes(4, "big"))


def device_lmt(seed: int, node: int) -> bytes:
    return H(b"lmt" + _seed_bytes(seed) + node.to_bytes(4, "big"))


@dataclass
class InstanceOutcome:
    index: int
    started_at: int
    t_attest: int
    t_timeout: int
    hash_ind_new: int
    chain_generation: int
    tallied_at: int | None = None
    tally: TallySets | None = None
    renewal: list[RenewalEvent] = field(default_factory=list)

    @property
    def runtime(self) -> int | None:
        return None if self.tallied_at is None else self.tallied_at - self.started_at


@dataclass
class RunResult:
    scenario: Scenario
    topology: Topology
    timing: TimingParams
    trace: EventTrace
    outcomes: list[InstanceOutcome]
    warnings: list[str]
    verifier: Verifier
    provers: list[ProverNode | None]
    depleted: bool = False

    @property
    def tally(self) -> TallySets | None:
        """Tally of the last completed instance."""
        done = [o for o in self.outcomes if o.tally is not None]
        return done[-1].tally if done else None


def feasibility_warnings(sc: Scenario) -> list[str]:
    """Flag delay budgets the simulated links cannot meet."""
    out = []
    req_size = messages.REQUEST_B_SIZE if sc.variant is Variant.B else messages.REQUEST_A_SIZE
    if sc.renewal_k is not None:
        req_size += messages.RENEWAL_SIZE
    hop = sc.link.worst_hop(req_size)
    if sc.timing.t_request < hop:
        out.append(
            f"t_request_us={sc.timing.t_request} is below the simulated per-hop request cost "
            f"of {hop} us ({req_size}-byte frame); attestation times may be missed"
        )
    rep_size = messages.REPORT_RATA_SIZE if sc.backend is Backend.RATA else messages.REPORT_CASU_SIZE
    rhop = sc.link.worst_hop(rep_size)
    if sc.timing.t_report < rhop:
        out.append(
            f"t_report_us={sc.timing.t_report} is below the simulated per-hop report cost "
            f"of {rhop} us; reports may miss the timeout"
        )
    return out


class Simulation:
    def __init__(self, scenario: Scenario):
        sc = self.scenario = scenario
        topo = self.topology = sc.topology.build()
        n = self.n = topo.n
        height_net = sc.height_net if sc.height_net is not None else topo.height_net
        tm = sc.timing
        self.timing = TimingParams(n, tm.t_request, tm.t_hash, tm.t_report, tm.t_mac, tm.t_slack,
                                   height_net)
        self.rng = random.Random(sc.seed)
        self.warnings = feasibility_warnings(sc)

        chain = generate_chain(chain_root(sc.seed), sc.chain_m)
        cfg = ProverConfig(sc.variant, tm.t_request, tm.t_hash, tm.t_report,
                           self.timing.t_max_delay, sc.chain_m, sc.forward_timer)
        anchor = chain.anchor_position()
        clocks = self._draw_clocks(n)
        nodes: list[ProverNode | None] = [None] * (n + 1)
        registry = {}
        rata = sc.backend is Backend.RATA
        comp = sc.compromised
        heights = topo.height
        for i in range(1, n + 1):
            key = device_key(sc.seed, i)
            lmt = device_lmt(sc.seed, i) if rata else None
            nodes[i] = ProverNode(i, key, anchor, cfg, backend=sc.backend, lmt=lmt,
                                  clock=clocks[i], compromised=i in comp)
            registry[i] = DeviceRecord(key, lmt, heights[i])
        self.nodes = nodes
        self.verifier = Verifier(chain, registry, self.timing, sc.variant,
                                 sync_tolerance=sc.sync_tolerance, renewal_k=sc.renewal_k)

        self.heap: list = []
        self.seq = 0
        self.now = 0
        self.done = False
        self.depleted = False
        self.full = sc.trace_level == "full"
        self.records: list[TraceRecord] = []
        self.late: list[tuple] = []  # records produced ahead of their timestamp
        self.outcomes: list[InstanceOutcome] = []
        self.attest_log: list[dict] = []
        self.hash_instance: dict[bytes, int] = {}
        self.inst = 0
        # per-node forwarding window [att, fwe) in true time, valid once the node adopted a hash
        self.att = [0] * (n + 1)
        self.fwe = [0] * (n + 1)
        self.open_attest = 0
        self.inflight_req = 0
        self.adv = sc.adversary
        self.adv_active = self.adv.active
        self.adv_state = self.adv.new_state()
        self.link = sc.link
        self.link_free: dict[tuple[int, int], int] = {}
        self.express = not sc.link.fifo and not self.adv.touches_reports
        self._hop_cache: dict[int, int] = {}
        self.gap = tm.t_slack if sc.instance_gap is None else sc.instance_gap

    def _draw_clocks(self, n: int) -> list[ClockModel]:
        spec = self.scenario.clock
        rtc = spec.kind == "rtc_offset"
        if spec.lo == spec.hi:
            shared = ClockModel.rtc(int(spec.lo)) if rtc else ClockModel.secure_timer(spec.lo)
            return [shared] * (n + 1)
        rng = self.rng
        clocks = [ClockModel()]
        for _ in range(n):
            if rtc:
                clocks.append(ClockModel.rtc(rng.randint(int(spec.lo), int(spec.hi))))
            else:
                clocks.append(ClockModel.secure_timer(rng.uniform(spec.lo, spec.hi)))
        return clocks

    # bookkeeping

    def _push(self, time: int, prio: int, ev: int, a, b) -> None:
        self.seq += 1
        heappush(self.heap, (time, prio, self.seq, ev, a, b))

    def _rec(self, node, kind, before=NO_STATE, after=NO_STATE, data=None, value=None, inst=None):
        if self.full or kind in SUMMARY_KINDS:
            if not self.full:
                data = None
            self.records.append(TraceRecord(self.now, node, kind, self.inst if inst is None else inst,
                                            before, after, data, value))

    def _rec_at(self, time, node, kind, data=None, value=None, before=NO_STATE, after=NO_STATE):
        if self.full or kind in SUMMARY_KINDS:
            if not self.full:
                data = None
            self.seq += 1
            self.late.append((time, self.seq,
                              TraceRecord(time, node, kind, self.inst, before, after, data, value)))

    def _hop(self, size: int) -> int:
        if self.link.jitter_us:
            return self.link.hop_delay(size, self.rng)
        d = self._hop_cache.get(size)
        if d is None:
            d = self._hop_cache[size] = self.link.hop_delay(size)
        return d

    # transmission

    def _send_at(self, t_send: int, src: int, dst: int, data: bytes) -> None:
        if self.link.fifo and t_send > self.now:
            self._push(t_send, PRIO_DELIVER, EV_SEND, (src, dst), data)
        else:
            self._send(t_send, src, dst, data)

    def _send(self, t_send: int, src: int, dst: int, data: bytes) -> None:
        extra = 0
        if self.adv_active:
            eff = apply_adversary(self.adv, Frame(src, dst, self.inst, t_send, data), self.adv_state)
            if eff.action is not None:
                self._rec_at(t_send, src, "adversary", data=eff.deliver,
                             value=f"{eff.action}:{src}->{dst}")
            for when, copy in eff.copies:
                self._transmit(when, src, dst, copy, 0)
            if eff.deliver is None:
                return
            data = eff.deliver
            extra = eff.extra_delay
        self._transmit(t_send, src, dst, data, extra)

    def _transmit(self, t_send: int, src: int, dst: int, data: bytes, extra: int) -> None:
        size = len(data)
        if self.link.fifo:
            link = (src, dst)
            tx = self.link.tx_time(size)
            start = max(t_send, self.link_free.get(link, 0))
            self.link_free[link] = start + tx
            arrival = start + self._hop(size) + extra
        else:
            arrival = t_send + self._hop(size) + extra
        if data[:1] == b"\x01":
            self.inflight_req += 1
        self._push(arrival, PRIO_DELIVER, EV_DELIVER, dst, (src, data))

    def _is_link(self, a: int, b: int) -> bool:
        parent = self.topology.parent
        return 0 <= b <= self.n and (parent[a] == b or parent[b] == a) and a != b

    def _unicast(self, t_send: int, src: int, dst: int, data: bytes) -> None:
        if not self._is_link(src, dst):
            self._rec_at(t_send, src, "undeliverable", data=data, value=dst)
            return
        if self.express:
            self._express(t_send, src, dst, data)
        else:
            self._send_at(t_send, src, dst, data)

    def _express(self, t_send: int, src: int, dst: int, data: bytes) -> None:
        h = data[18:50]
        size = len(data)
        nodes, att, fwe, parent = self.nodes, self.att, self.fwe, self.topology.parent
        full = self.full
        fixed = None if self.link.jitter_us else self._hop(size)
        while True:
            arrival = t_send + (fixed if fixed is not None else self._hop(size))
            if dst == 0:
                self._push(arrival, PRIO_DELIVER, EV_DELIVER, 0, (src, data))
                return
            node = nodes[dst]
            if node.hash_adopted != h:
                # forwarder has not settled on this instance yet; let the event loop decide
                self._push(arrival, PRIO_DELIVER, EV_DELIVER, dst, (src, data))
                return
            if not att[dst] <= arrival < fwe[dst]:
                if full:
                    self._rec_at(arrival, dst, "discard", data=data, value="not-forwarding")
                return
            nxt = node.id_par
            if nxt != parent[dst] and not self._is_link(dst, nxt):
                self._rec_at(arrival, dst, "undeliverable", data=data, value=nxt)
                return
            if full:
                st = int(_FORWARD_WAIT)
                self._rec_at(arrival, dst, "forward", data=data, before=st, after=st)
            src, dst, t_send = dst, nxt, arrival

    # event handlers

    def _initiate(self, t: int) -> None:
        v = self.verifier
        logged = len(v.renewal_log)
        self.inst = v.instances_run
        try:
            req = v.initiate(t)
        except ChainDepleted as exc:
            self._rec(0, "depleted", value=str(exc))
            self.depleted = True
            self.done = True
            return
        pend = v.pending
        self.hash_instance[pend.hash_new] = pend.index
        out = InstanceOutcome(pend.index, t, pend.t_attest, pend.t_timeout, pend.hash_ind_new,
                              v.generation)
        self.outcomes.append(out)
        self.attest_log.append({})
        data = encode(req)
        self._rec(0, "initiate", data=data, value=pend.hash_ind_new)
        for ev in v.renewal_log[logged:]:
            out.renewal.append(ev)
            self._rec(0, "renewal", value=f"{ev.kind}:{ev.index}")
        for child in self.topology.children[0]:
            self._send_at(t, 0, child, data)
        if self.scenario.stop_after == "attest":
            return  # no reports will be sent, so there is nothing to time out
        self._push(pend.t_timeout, PRIO_VERIFIER, EV_TIMEOUT, pend.index, None)

    def _deliver_prover(self, t: int, i: int, src: int, data: bytes) -> None:
        node = self.nodes[i]
        kind = data[0] if data else None
        if kind == TYPE_REQUEST:
            self.inflight_req -= 1
            before = node.state
            if before is not _IDLE:
                if self.full:
                    self._rec(i, "discard", int(before), int(before), data, "busy")
                return
            try:
                req = messages.decode(data)
            except TrainError:
                self._rec(i, "malformed", data=data)
                return
            clock = node.clock
            actions = node.on_request(req, t + clock.offset_us)
            if not actions:
                if self.full:
                    self._rec(i, "discard", int(before), int(node.state), data, "rejected")
                return
            self._rec(i, "accept", int(before), int(node.state), data, src)
            self._after_accept(t, node, actions)
        elif kind == TYPE_REPORT:
            before = node.state
            if before is not _FORWARD_WAIT:
                if self.full:
                    self._rec(i, "discard", int(before), int(before), data, "not-forwarding")
                return
            try:
                rep = messages.decode(data)
            except TrainError:
                self._rec(i, "malformed", data=data)
                return
            if node.on_report(rep):
                if self.full:
                    self._rec(i, "forward", int(before), int(before), data)
                self._unicast(t, i, node.id_par, data)
            elif self.full:
                self._rec(i, "discard", int(before), int(before), data, "stale-hash")
        else:
            self._rec(i, "ignored", data=data)

    def _after_accept(self, t: int, node: ProverNode, actions: list) -> None:
        i = node.id_dev
        t_ready = t + self.timing.t_hash
        for act in actions:
            if isinstance(act, Broadcast):
                data = encode(act.request)
                for nb in self.topology.neighbors(i):
                    self._send_at(t_ready, i, nb, data)
                continue
            clock = node.clock
            if act.at is not None:
                fire = max(act.at - clock.offset_us, t_ready)
                reading = fire + clock.offset_us
            else:
                fire = t_ready + clock.true_elapsed(act.duration)
                reading = act.duration
            self.att[i] = fire
            self.fwe[i] = fire + self.timing.t_mac + clock.true_elapsed(node.forward_timer_units())
            self.open_attest += 1
            self._push(fire, PRIO_TIMER, EV_ATTEST, i, reading)

    def _attest(self, t: int, i: int, reading: int) -> None:
        node = self.nodes[i]
        before = node.state
        actions = node.on_attest_timer(reading)
        self.open_attest -= 1
        if not actions:
            return
        uni = actions[0]
        data = encode(uni.report)
        inst = self.hash_instance.get(node.hash_adopted, self.inst)
        self.attest_log[inst][i] = (t, reading)
        self._rec(i, "attest", int(before), int(node.state), data, reading, inst)
        if self.scenario.stop_after == "attest":
            return
        self._unicast(t + self.timing.t_mac, i, uni.to, data)
        self._push(self.fwe[i], PRIO_TIMER, EV_FWD_EXPIRE, i, None)

    def _deliver_verifier(self, t: int, src: int, data: bytes) -> None:
        if data[:1] == b"\x01":
            self.inflight_req -= 1
            if self.full:
                self._rec(0, "ignored", data=data)
            return
        try:
            msg = messages.decode(data)
        except TrainError:
            self._rec(0, "malformed", data=data)
            return
        v = self.verifier
        outcome = v.on_report(msg, t)
        if self.full:
            self._rec(0, "verifier_report", data=data, value=outcome)
        if v.phase is VerifierPhase.COLLECT and not v.tally_sets.norep:
            self._tally(t)

    def _tally(self, t: int) -> None:
        v = self.verifier
        pend = v.pending
        logged = len(v.renewal_log)
        sets = v.tally(t)
        out = self.outcomes[pend.index]
        out.tallied_at = t
        out.tally = sets
        for ev in v.renewal_log[logged:]:
            out.renewal.append(ev)
            self._rec(0, "renewal", value=f"{ev.kind}:{ev.index}")
        self._rec(0, "tally", value=f"attest={len(sets.attest)} fail={len(sets.fail)} "
                                    f"norep={len(sets.norep)}")
        if v.instances_run < self.scenario.instances:
            self._push(max(t, pend.t_timeout) + self.gap, PRIO_INIT, EV_INIT, 0, None)
        else:
            self.done = True

    def run(self) -> RunResult:
        # the loop allocates millions of acyclic objects on large topologies; cyclic
        # collection passes over them cost a quarter of the runtime for nothing
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            return self._run()
        finally:
            if was_enabled:
                gc.enable()

    def _run(self) -> RunResult:
        self._push(0, PRIO_INIT, EV_INIT, 0, None)
        for at, src, dst, data in self.adv.injections():
            self.now = at
            self._rec_at(at, src, "adversary", data=data, value=f"inject:{src}->{dst}")
            self._transmit(at, src, dst, data, 0)
        self.now = 0
        heap = self.heap
        stop_at_attest = self.scenario.stop_after == "attest"
        started = False
        while heap and not self.done:
            t, _prio, _seq, ev, a, b = heappop(heap)
            self.now = t
            if ev == EV_DELIVER:
                src, data = b
                if a == 0:
                    self._deliver_verifier(t, src, data)
                else:
                    self._deliver_prover(t, a, src, data)
            elif ev == EV_ATTEST:
                self._attest(t, a, b)
            elif ev == EV_FWD_EXPIRE:
                node = self.nodes[a]
                before = node.state
                node.on_forward_timer()
                if self.full:
                    self._rec(a, "fwd_expire", int(before), int(node.state))
            elif ev == EV_SEND:
                self._send(t, a[0], a[1], b)
            elif ev == EV_TIMEOUT:
                v = self.verifier
                if v.phase is VerifierPhase.COLLECT and v.pending.index == a:
                    self._tally(t)
            elif ev == EV_INIT:
                self._initiate(t)
                started = True
            if stop_at_attest and started and self.open_attest == 0 and self.inflight_req == 0:
                self.done = True
        return self._result()

    def _result(self) -> RunResult:
        records = self.records
        if self.late:
            self.late.sort(key=lambda x: (x[0], x[1]))
            records = list(heapq.merge(records, (r for _, _, r in self.late), key=lambda r: r.time))
        meta = {
            "variant": self.scenario.variant.value,
            "n": self.n,
            "kind": self.topology.kind,
            "degree": self.topology.degree,
            "height_net": self.timing.height_net,
            "compromised": sorted(self.scenario.compromised),
            "seed": self.scenario.seed,
        }
        trace = EventTrace(records, meta, self.attest_log)
        return RunResult(self.scenario, self.topology, self.timing, trace, self.outcomes,
                         self.warnings, self.verifier, self.nodes, self.depleted)


def run(scenario: Scenario) -> RunResult:
    """Execute ``scenario`` to completion and return its trace and tallies."""
    return Simulation(scenario).run()
