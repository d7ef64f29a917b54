"""Verifier-side TRAIN state machine: initiate, collect, tally, chain renewal."""

from __future__ import annotations

import enum
import hmac
from dataclasses import dataclass, field

from . import crypto
from .crypto import HashChain, RenewalPayload
from .errors import ChainDepleted, InvalidParameter, ProtocolError
from .messages import VERIFIER_ID, AttReport, AttRequest, Variant, report_mac_fields


@dataclass(frozen=True, slots=True)
class TimingParams:
    """Delay budget in microseconds, shared by the verifier and every prover."""

    n: int
    t_request: int = 5_000
    t_hash: int = 13_000
    t_report: int = 4_000
    t_mac: int = 29_500
    t_slack: int = 5_000
    height_net: int = 1

    def __post_init__(self):
        for name in ("n", "t_request", "t_hash", "t_report", "t_mac", "t_slack", "height_net"):
            if getattr(self, name) < 0:
                raise InvalidParameter(f"{name} must be non-negative")

    @property
    def t_max_delay(self) -> int:
        """Worst-case (line) report propagation bound: ``n * t_report``."""
        return self.n * self.t_report


def compute_timeout(p: TimingParams) -> int:
    return p.n * (p.t_request + p.t_hash + p.t_report) + p.t_mac + p.t_slack


def compute_attest_time(p: TimingParams, now: int) -> int:
    return p.height_net * (p.t_request + p.t_hash) + p.t_slack + now


def expected_timer_reading(p: TimingParams, depth: int) -> int:
    """t_attest' an honest variant-B prover at ``depth`` reports (its attestWait)."""
    return max(p.height_net - (depth - 1), 0) * (p.t_request + p.t_hash)


class VerifierPhase(enum.Enum):
    IDLE = "Idle"
    INITIATE = "Initiate"
    COLLECT = "Collect"
    TALLY = "Tally"


@dataclass
class TallySets:
    attest: set = field(default_factory=set)
    fail: set = field(default_factory=set)
    norep: set = field(default_factory=set)

    def to_json(self, t_attest: int, toctou_sa_us: int | None) -> dict:
        return {
            "attest": sorted(self.attest),
            "fail": sorted(self.fail),
            "norep": sorted(self.norep),
            "t_attest": t_attest,
            "toctou_sa_us": toctou_sa_us,
        }

    def copy(self) -> "TallySets":
        return TallySets(set(self.attest), set(self.fail), set(self.norep))


@dataclass(frozen=True, slots=True)
class DeviceRecord:
    key: bytes
    lmt: bytes | None = None  # None marks a CASU device
    depth: int = 1


@dataclass(slots=True)
class PendingInstance:
    index: int
    hash_new: bytes
    hash_ind_new: int
    t_attest: int
    t_timeout: int
    started_at: int
    height_net: int


@dataclass(slots=True)
class RenewalPlan:
    new_chain: HashChain
    k: int
    payload: RenewalPayload | None = None
    announce_index: int | None = None
    key_index: int | None = None
    window_ok: bool = True


@dataclass(slots=True)
class RenewalEvent:
    instance: int
    kind: str  # "announced", "confirmed", "deferred"
    index: int


class Verifier:
    """Single verifier serving one attestation instance at a time.

    ``ind_cur`` is the index of the most recently revealed link (``m`` on a
    fresh chain); each instance reveals ``ind_cur - 1``.
    """

    def __init__(
        self,
        chain: HashChain,
        registry: dict[int, DeviceRecord],
        timing: TimingParams,
        variant: Variant = Variant.A,
        *,
        sync_tolerance: int | None = None,
        renewal_k: int | None = None,
    ):
        self.chain = chain
        self.ind_cur = chain.m
        self.registry = registry
        self.timing = timing
        self.variant = Variant(variant)
        self.sync_tolerance = timing.t_slack if sync_tolerance is None else sync_tolerance
        self.renewal_k = renewal_k
        self.phase = VerifierPhase.IDLE
        self.pending: PendingInstance | None = None
        self.tally_sets = TallySets()
        self.renewal_plan: RenewalPlan | None = None
        self.renewal_log: list[RenewalEvent] = []
        self.generation = 0
        self.instances_run = 0
        self._seen: set = set()

    # renewal

    def _next_chain(self) -> HashChain:
        root = crypto.H(b"train-renewal" + self.chain.root)
        return crypto.generate_chain(root, self.chain.m)

    def plan_renewal(self, k: int) -> RenewalPlan:
        """Schedule a switch to a fresh chain, announced with the next revealed link."""
        if k < 0:
            raise InvalidParameter("k must be non-negative")
        if self.ind_cur - 1 < k + 1:
            raise ChainDepleted(f"only {self.ind_cur} links left, need {k + 2}")
        self.renewal_plan = RenewalPlan(self._next_chain(), k)
        return self.renewal_plan

    def _maybe_auto_plan(self) -> None:
        k = self.renewal_k
        if k is None or self.renewal_plan is not None:
            return
        reveal = self.ind_cur - 1
        # announce early enough that k links of the old chain outlive the key reveal
        if k + 1 <= reveal <= 2 * k + 1:
            self.plan_renewal(k)

    def _update_renewal(self, tally: TallySets) -> None:
        plan = self.renewal_plan
        if plan is None or plan.announce_index is None:
            return
        if tally.norep:
            plan.window_ok = False
        if self.pending.hash_ind_new != plan.key_index:
            return
        inst = self.pending.index
        if plan.window_ok:
            self.chain = plan.new_chain
            self.ind_cur = plan.new_chain.m
            self.generation += 1
            self.renewal_log.append(RenewalEvent(inst, "confirmed", plan.key_index))
        else:
            self.renewal_log.append(RenewalEvent(inst, "deferred", plan.key_index))
        self.renewal_plan = None

    # instance lifecycle

    def initiate(self, now: int) -> AttRequest:
        if self.phase is not VerifierPhase.IDLE:
            raise ProtocolError("an attestation instance is already in progress")
        if self.ind_cur == 0:
            raise ChainDepleted("hash chain exhausted and no renewal confirmed")
        self.phase = VerifierPhase.INITIATE
        self._maybe_auto_plan()
        reveal = self.ind_cur - 1
        renewal = None
        plan = self.renewal_plan
        if plan is not None and plan.announce_index is None:
            plan.payload = crypto.build_renewal(self.chain, reveal, plan.new_chain.anchor(), plan.k)
            plan.announce_index = reveal
            plan.key_index = crypto.renewal_key_index(reveal, plan.k)
            renewal = plan.payload
            self.renewal_log.append(RenewalEvent(self.instances_run, "announced", reveal))

        p = self.timing
        t_attest = compute_attest_time(p, now)
        self.pending = PendingInstance(
            index=self.instances_run,
            hash_new=self.chain.link(reveal),
            hash_ind_new=reveal,
            t_attest=t_attest,
            t_timeout=now + compute_timeout(p),
            started_at=now,
            height_net=p.height_net,
        )
        self.tally_sets = TallySets(norep=set(self.registry))
        self._seen = set()
        if self.variant is Variant.B:
            req = AttRequest(Variant.B, VERIFIER_ID, self.pending.hash_new, reveal, t_attest,
                             height_cur=0, height_net=p.height_net, renewal=renewal)
        else:
            req = AttRequest(Variant.A, VERIFIER_ID, self.pending.hash_new, reveal, t_attest,
                             renewal=renewal)
        self.phase = VerifierPhase.COLLECT
        return req

    def expected_t_attest_prime(self, record: DeviceRecord) -> int:
        if self.variant is Variant.B:
            return expected_timer_reading(self.timing, record.depth)
        return self.pending.t_attest

    def on_report(self, rep: AttReport, now: int | None = None) -> str:
        """Process one report; returns "attest", "fail", "duplicate" or a discard reason."""
        if self.phase is not VerifierPhase.COLLECT:
            return "not-collecting"
        pending = self.pending
        if rep.hash_new != pending.hash_new:
            return "stale-hash"
        record = self.registry.get(rep.id_dev)
        if record is None:
            return "unknown-device"
        expected_mac = crypto.mac(
            record.key, report_mac_fields(rep.id_par, rep.t_attest_prime, rep.hash_new, rep.lmt_dev)
        )
        if not hmac.compare_digest(expected_mac, rep.auth_report):
            return "bad-mac"
        if rep.id_dev in self._seen:
            return "duplicate"
        self._seen.add(rep.id_dev)
        sets = self.tally_sets
        late = abs(rep.t_attest_prime - self.expected_t_attest_prime(record)) > self.sync_tolerance
        if late or rep.lmt_dev != record.lmt:
            sets.fail.add(rep.id_dev)
            outcome = "fail"
        else:
            sets.attest.add(rep.id_dev)
            outcome = "attest"
        sets.norep.discard(rep.id_dev)
        return outcome

    def ready_to_tally(self, now: int) -> bool:
        return self.phase is VerifierPhase.COLLECT and (
            not self.tally_sets.norep or now >= self.pending.t_timeout
        )

    def tally(self, now: int | None = None, *, force: bool = False) -> TallySets:
        if self.phase is not VerifierPhase.COLLECT:
            raise ProtocolError("no instance to tally")
        if not force and now is not None and not self.ready_to_tally(now):
            raise ProtocolError("reports outstanding and timeout not reached")
        self.phase = VerifierPhase.TALLY
        result = self.tally_sets.copy()
        self.ind_cur = self.pending.hash_ind_new
        self._update_renewal(result)
        self.instances_run += 1
        self.phase = VerifierPhase.IDLE
        return result
