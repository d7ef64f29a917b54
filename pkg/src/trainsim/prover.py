"""Prover-side TRAIN state machine.

A prover never performs I/O itself: every handler returns a list of actions
(broadcast, unicast, arm a timer) and the simulator carries them out.  The
Verify and Attest states are transient, so between events a node is always in
Idle, AttestWait or ForwardWait.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import crypto
from .crypto import ChainPosition, RenewalPayload, hash_iter, mac
from .errors import InvalidParameter
from .messages import AttReport, AttRequest, Variant, report_mac_fields


class ProverState(enum.IntEnum):
    IDLE = 0
    VERIFY = 1
    ATTEST_WAIT = 2
    ATTEST = 3
    FORWARD_WAIT = 4


class Backend(str, enum.Enum):
    RATA = "RATA"
    CASU = "CASU"


class ForwardTimerMode(str, enum.Enum):
    MAX_DELAY = "max_delay"
    HEIGHT_SCALED = "height_scaled"


@dataclass(frozen=True, slots=True)
class ClockModel:
    """RTC with a fixed offset (variant A) or a drifting secure timer (variant B)."""

    kind: str = "rtc"
    offset_us: int = 0
    drift_ppm: float = 0.0

    @classmethod
    def rtc(cls, offset_us: int = 0) -> "ClockModel":
        return cls("rtc", offset_us=int(offset_us))

    @classmethod
    def secure_timer(cls, drift_ppm: float = 0.0) -> "ClockModel":
        return cls("timer", drift_ppm=float(drift_ppm))

    def rtc_reading(self, true_time: int) -> int:
        return true_time + self.offset_us

    def true_time_of_reading(self, reading: int) -> int:
        return reading - self.offset_us

    def true_elapsed(self, timer_units: int) -> int:
        """True microseconds until a timer of ``timer_units`` expires.

        The timer reads ``true_elapsed * (1 + drift_ppm * 1e-6)``, so a positive
        drift runs fast: +100 ppm reaches a 10 s reading about 1 ms early.
        """
        if self.kind == "rtc" or not self.drift_ppm:
            return timer_units
        return round(timer_units / (1.0 + self.drift_ppm * 1e-6))


@dataclass(frozen=True, slots=True)
class Broadcast:
    request: AttRequest


@dataclass(frozen=True, slots=True)
class Unicast:
    to: int
    report: AttReport


@dataclass(frozen=True, slots=True)
class SetTimer:
    """``at`` is an absolute RTC reading, ``duration`` a count of timer units."""

    purpose: str
    at: int | None = None
    duration: int | None = None


@dataclass(frozen=True, slots=True)
class ProverConfig:
    """Network-wide constants every prover is provisioned with."""

    variant: Variant = Variant.A
    t_request: int = 5_000
    t_hash: int = 13_000
    t_report: int = 4_000
    t_max_delay: int = 40_000
    chain_m: int = 1024
    forward_timer_mode: ForwardTimerMode = ForwardTimerMode.MAX_DELAY


def attest_wait(height_net: int, height_cur: int, t_request: int, t_hash: int) -> int:
    """Timer units a variant-B prover waits after accepting a request (never negative)."""
    return max(height_net - height_cur, 0) * (t_request + t_hash)


def divergent_lmt(lmt: bytes) -> bytes:
    return crypto.H(b"modified-pmem" + lmt)


class ProverNode:
    __slots__ = (
        "id_dev", "key", "config", "position", "fallback", "id_par", "state",
        "backend", "lmt", "compromised", "clock", "hash_adopted", "t_attest",
        "height_cur", "pending_renewal", "renewal_key_index", "renewal_failed",
        "switched",
    )

    def __init__(
        self,
        id_dev: int,
        key: bytes,
        anchor: ChainPosition,
        config: ProverConfig,
        *,
        backend: Backend = Backend.CASU,
        lmt: bytes | None = None,
        clock: ClockModel | None = None,
        compromised: bool = False,
    ):
        backend = Backend(backend)
        if backend is Backend.RATA and lmt is None:
            raise InvalidParameter("RATA prover needs an LMT value")
        self.id_dev = id_dev
        self.key = key
        self.config = config
        self.position = anchor
        self.fallback: ChainPosition | None = None
        self.id_par: int | None = None
        self.state = ProverState.IDLE
        self.backend = backend
        self.lmt = lmt if backend is Backend.RATA else None
        self.compromised = compromised
        self.clock = clock or ClockModel()
        self.hash_adopted: bytes | None = None
        self.t_attest: int | None = None
        self.height_cur: int | None = None
        self.pending_renewal: RenewalPayload | None = None
        self.renewal_key_index: int | None = None
        self.renewal_failed = False
        self.switched = 0

    def __repr__(self):
        return f"ProverNode({self.id_dev}, {self.state.name}, ind={self.position.ind_cur})"

    # request handling

    def on_request(self, req: AttRequest, now: int | None = None) -> list:
        if req.variant == Variant.A:
            return self.handle_request_A(req, now)
        return self.handle_request_B(req)

    def handle_request_A(self, req: AttRequest, now: int) -> list:
        if self.state is not ProverState.IDLE or req.variant != Variant.A:
            return []
        if self.config.variant != Variant.A:
            return []
        if not self._index_fresh(req.hash_ind_new):
            return []
        if now >= req.t_attest:
            return []
        via = self._authenticate(req)
        if via is None:
            return []
        if not self._accept(req, via):
            return []
        self.t_attest = req.t_attest
        self.state = ProverState.ATTEST_WAIT
        return [
            Broadcast(req.replace(id_snd=self.id_dev)),
            SetTimer("attest", at=req.t_attest),
        ]

    def handle_request_B(self, req: AttRequest) -> list:
        if self.state is not ProverState.IDLE or req.variant != Variant.B:
            return []
        if self.config.variant != Variant.B:
            return []
        if not self._index_fresh(req.hash_ind_new):
            return []
        via = self._authenticate(req)
        if via is None:
            return []
        if not self._accept(req, via):
            return []
        self.t_attest = req.t_attest
        self.height_cur = req.height_cur
        wait = attest_wait(req.height_net, req.height_cur, self.config.t_request, self.config.t_hash)
        self.state = ProverState.ATTEST_WAIT
        return [
            Broadcast(req.replace(id_snd=self.id_dev, height_cur=req.height_cur + 1)),
            SetTimer("attest", duration=wait),
        ]

    def _positions(self):
        yield self.position
        if self.fallback is not None:
            yield self.fallback

    def _index_fresh(self, ind: int) -> bool:
        return any(ind < p.ind_cur for p in self._positions())

    def _authenticate(self, req: AttRequest) -> str | None:
        if crypto.verify_link(req.hash_new, req.hash_ind_new, self.position):
            return "current"
        if self.fallback is not None and crypto.verify_link(
            req.hash_new, req.hash_ind_new, self.fallback
        ):
            return "fallback"
        return None

    def _accept(self, req: AttRequest, via: str) -> bool:
        """Update chain state for an authenticated request; False means discard it."""
        new_pos = ChainPosition(req.hash_new, req.hash_ind_new)
        if via == "current":
            if self.pending_renewal is not None and req.hash_ind_new <= self.renewal_key_index:
                key_link = hash_iter(req.hash_new, self.renewal_key_index - req.hash_ind_new)
                if not self.apply_pending_renewal(key_link, old_position=new_pos):
                    return False
            else:
                self.position = new_pos
                self.fallback = None
        else:
            self.fallback = new_pos
        if req.renewal is not None and self.pending_renewal is None:
            if self.fallback is not None:
                # verifier abandoned the previously verified chain; go back to the old one
                self.position, self.fallback = self.fallback, None
            key_index = crypto.renewal_key_index(req.hash_ind_new, req.renewal.switch_margin_k)
            if key_index >= 0:
                self.pending_renewal = req.renewal
                self.renewal_key_index = key_index
        self.id_par = req.id_snd
        self.hash_adopted = req.hash_new
        return True

    def apply_pending_renewal(self, revealed_link: bytes, old_position: ChainPosition | None = None) -> bool:
        """Check the stored renewal payload against the just-revealed key link.

        On success the node moves to the new chain's anchor and keeps the old
        chain as a fallback until the verifier starts revealing from the new one.
        On failure the old position is retained and ``renewal_failed`` is set.
        """
        payload = self.pending_renewal
        if payload is None:
            return False
        self.pending_renewal = None
        self.renewal_key_index = None
        if crypto.verify_renewal(payload, revealed_link):
            self.fallback = old_position or self.position
            self.position = ChainPosition(payload.new_chain_anchor, self.config.chain_m)
            self.switched += 1
            return True
        self.renewal_failed = True
        return False

    # timers and reports

    def report_lmt(self) -> bytes | None:
        if self.backend is not Backend.RATA:
            return None
        return divergent_lmt(self.lmt) if self.compromised else self.lmt

    def on_attest_timer(self, now: int) -> list:
        if self.state is not ProverState.ATTEST_WAIT:
            return []
        self.state = ProverState.ATTEST
        lmt = self.report_lmt()
        fields = report_mac_fields(self.id_par, now, self.hash_adopted, lmt)
        report = AttReport(
            id_dev=self.id_dev,
            id_par=self.id_par,
            t_attest_prime=now,
            hash_new=self.hash_adopted,
            auth_report=mac(self.key, fields),
            lmt_dev=lmt,
        )
        self.state = ProverState.FORWARD_WAIT
        return [Unicast(self.id_par, report), SetTimer("forward", duration=self.forward_timer_units())]

    def forward_timer_units(self) -> int:
        cfg = self.config
        if cfg.forward_timer_mode == ForwardTimerMode.HEIGHT_SCALED and self.height_cur is not None:
            return self.height_cur * cfg.t_report
        return cfg.t_max_delay

    def would_forward(self, hash_new: bytes) -> bool:
        return self.state is ProverState.FORWARD_WAIT and hash_new == self.hash_adopted

    def on_report(self, rep: AttReport) -> list:
        if self.would_forward(rep.hash_new):
            return [Unicast(self.id_par, rep)]
        return []

    def on_forward_timer(self) -> list:
        if self.state is ProverState.FORWARD_WAIT:
            self.state = ProverState.IDLE
        return []
