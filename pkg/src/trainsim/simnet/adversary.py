"""Scripted Dolev-Yao adversary.

The adversary sits on every link and sees only what is in transit: the raw
frame bytes plus public metadata (link endpoints, time, instance number).  It
never receives keys, chain secrets or node state.  A rule may drop, delay,
rewrite, replay or corrupt a frame; ``inject`` rules add frames of the
adversary's own making at a fixed time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .. import messages
from ..crypto import RenewalPayload
from ..errors import ConfigError, InvalidParameter, TrainError

ACTIONS = ("drop", "delay", "modify", "replay", "corrupt", "inject")

_INT_BITS = {
    "id_snd": 32, "hash_ind_new": 32, "t_attest": 64, "height_cur": 32, "height_net": 32,
    "switch_margin_k": 32, "id_dev": 32, "id_par": 32, "t_attest_prime": 64,
}
_BYTE_FIELDS = {"hash_new", "new_chain_anchor", "auth", "auth_report", "lmt_dev"}
_RENEWAL_FIELDS = {"new_chain_anchor", "auth", "switch_margin_k"}
REQUEST_FIELDS = ("id_snd", "hash_new", "hash_ind_new", "t_attest", "height_cur",
                  "height_net", "new_chain_anchor", "auth", "switch_margin_k")
REPORT_FIELDS = ("id_dev", "id_par", "t_attest_prime", "hash_new", "auth_report", "lmt_dev")


@dataclass(frozen=True)
class Frame:
    """A frame in transit, as the adversary observes it."""

    src: int
    dst: int
    instance: int
    time: int
    data: bytes


@dataclass
class Effect:
    deliver: bytes | None
    extra_delay: int = 0
    copies: list = field(default_factory=list)  # (absolute time, bytes) replays to the same dst
    rule: int | None = None
    action: str | None = None


def get_field(msg, name: str):
    if name in _RENEWAL_FIELDS:
        renewal = getattr(msg, "renewal", None)
        return None if renewal is None else getattr(renewal, name)
    return getattr(msg, name, None)


def set_field(msg, name: str, value):
    if name in _RENEWAL_FIELDS:
        r = msg.renewal
        return msg.replace(renewal=RenewalPayload(
            value if name == "new_chain_anchor" else r.new_chain_anchor,
            value if name == "auth" else r.auth,
            value if name == "switch_margin_k" else r.switch_margin_k,
        ))
    return msg.replace(**{name: value})


def _as_bytes(value, where: str) -> bytes:
    if isinstance(value, (bytes, bytearray)):
        return bytes(value)
    if isinstance(value, str):
        try:
            return bytes.fromhex(value)
        except ValueError:
            raise ConfigError("expected a hex string", where) from None
    raise ConfigError("expected a hex string", where)


@dataclass
class Rule:
    action: str
    msg_type: str | None = None  # "req", "rep" or None for any frame
    src: int | None = None
    dst: int | None = None
    instance: int | None = None
    where: dict = field(default_factory=dict)
    field: str | None = None
    value: Any = None
    delta: int | None = None
    xor: bytes | None = None
    delay_us: int = 0
    at_us: int | None = None
    after_us: int | None = None
    offset: int = 0
    data: bytes | None = None
    count: int | None = None

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ConfigError(f"unknown action {self.action!r}", "action")
        if self.msg_type not in (None, "req", "rep"):
            raise ConfigError("type must be 'req' or 'rep'", "match.type")
        if self.action == "modify":
            if self.field not in _INT_BITS and self.field not in _BYTE_FIELDS:
                raise ConfigError(f"unknown field {self.field!r}", "field")
            given = [x is not None for x in (self.value, self.delta, self.xor)]
            if sum(given) != 1:
                raise ConfigError("modify needs exactly one of value, delta, xor", "value")
            if self.field in _BYTE_FIELDS and self.delta is not None:
                raise ConfigError("delta applies to integer fields only", "delta")
            if self.field in _INT_BITS and self.xor is not None:
                raise ConfigError("xor applies to byte fields only", "xor")
        if self.action == "replay" and (self.at_us is None) == (self.after_us is None):
            raise ConfigError("replay needs exactly one of at_us, after_us", "at_us")
        if self.action == "inject":
            if self.at_us is None or self.src is None or self.dst is None or self.data is None:
                raise ConfigError("inject needs at_us, src, dst and bytes", "inject")
        if self.action == "corrupt" and not self.xor:
            raise ConfigError("corrupt needs a non-empty xor mask", "xor")

    @property
    def may_touch_reports(self) -> bool:
        return self.action != "inject" and self.msg_type in (None, "rep")

    @classmethod
    def from_dict(cls, raw: dict) -> "Rule":
        if not isinstance(raw, dict):
            raise ConfigError("rule must be an object")
        raw = dict(raw)
        match = raw.pop("match", {}) or {}
        if not isinstance(match, dict):
            raise ConfigError("must be an object", "match")
        kwargs: dict[str, Any] = {"action": raw.pop("action", None)}
        for key in ("type", "src", "dst", "instance", "where"):
            if key in match:
                kwargs["msg_type" if key == "type" else key] = match.pop(key)
        if "link" in match:
            link = match.pop("link")
            if not (isinstance(link, list) and len(link) == 2):
                raise ConfigError("link must be [src, dst]", "match.link")
            kwargs["src"], kwargs["dst"] = link
        if match:
            raise ConfigError(f"unknown keys {sorted(match)}", "match")
        for key in ("src", "dst"):  # inject names its link at top level
            if key in raw:
                kwargs[key] = raw.pop(key)
        for key in ("field", "value", "delta", "delay_us", "at_us", "after_us", "offset", "count"):
            if key in raw:
                kwargs[key] = raw.pop(key)
        if "xor" in raw:
            kwargs["xor"] = _as_bytes(raw.pop("xor"), "xor")
        if "bytes" in raw:
            kwargs["data"] = _as_bytes(raw.pop("bytes"), "bytes")
        if raw:
            raise ConfigError(f"unknown keys {sorted(raw)}", "rule")
        if kwargs.get("field") in _BYTE_FIELDS and kwargs.get("value") is not None:
            kwargs["value"] = _as_bytes(kwargs["value"], "value")
        where = kwargs.get("where") or {}
        kwargs["where"] = {
            k: (_as_bytes(v, f"where.{k}") if k in _BYTE_FIELDS else v) for k, v in where.items()
        }
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc), "rule") from None

    def matches(self, frame: Frame, decoded) -> bool:
        if self.action == "inject":
            return False
        if self.src is not None and frame.src != self.src:
            return False
        if self.dst is not None and frame.dst != self.dst:
            return False
        if self.instance is not None and frame.instance != self.instance:
            return False
        if self.msg_type is not None:
            want = messages.TYPE_REQUEST if self.msg_type == "req" else messages.TYPE_REPORT
            if not frame.data or frame.data[0] != want:
                return False
        if self.where or self.action == "modify":
            if decoded is None:
                return False
            for name, expected in self.where.items():
                if get_field(decoded, name) != expected:
                    return False
            if self.action == "modify" and get_field(decoded, self.field) is None:
                return False
        return True


@dataclass
class AdversaryScript:
    rules: list[Rule] = field(default_factory=list)

    @classmethod
    def from_list(cls, raw: list) -> "AdversaryScript":
        if not isinstance(raw, list):
            raise ConfigError("must be a list of rules", "adversary")
        rules = []
        for i, item in enumerate(raw):
            try:
                rules.append(Rule.from_dict(item))
            except ConfigError as exc:
                raise ConfigError(str(exc), f"adversary[{i}]") from None
        return cls(rules)

    @property
    def active(self) -> bool:
        return any(r.action != "inject" for r in self.rules)

    @property
    def touches_reports(self) -> bool:
        return any(r.may_touch_reports for r in self.rules)

    def injections(self) -> list[tuple[int, int, int, bytes]]:
        return [(r.at_us, r.src, r.dst, r.data) for r in self.rules if r.action == "inject"]

    def new_state(self) -> list[int]:
        """Per-run application counters, so a script object can be reused across runs."""
        return [0] * len(self.rules)


def _rewrite(rule: Rule, msg):
    old = get_field(msg, rule.field)
    if rule.value is not None:
        new = rule.value
    elif rule.delta is not None:
        new = (old + rule.delta) % (1 << _INT_BITS[rule.field])
    else:
        mask = rule.xor.ljust(len(old), b"\0")[: len(old)]
        new = bytes(a ^ b for a, b in zip(old, mask))
    return messages.encode(set_field(msg, rule.field, new))


def apply_adversary(script: AdversaryScript, frame: Frame, state: list[int] | None = None) -> Effect:
    """Apply the first matching rule to ``frame`` and describe what reaches ``frame.dst``."""
    decoded = None
    needs_decode = any(r.where or r.action == "modify" for r in script.rules)
    if needs_decode:
        try:
            decoded = messages.decode(frame.data)
        except TrainError:
            decoded = None
    for idx, rule in enumerate(script.rules):
        if state is not None and rule.count is not None and state[idx] >= rule.count:
            continue
        if not rule.matches(frame, decoded):
            continue
        if state is not None:
            state[idx] += 1
        act = rule.action
        if act == "drop":
            return Effect(None, rule=idx, action=act)
        if act == "delay":
            return Effect(frame.data, extra_delay=rule.delay_us, rule=idx, action=act)
        if act == "modify":
            try:
                data = _rewrite(rule, decoded)
            except InvalidParameter as exc:
                raise ConfigError(f"modified value does not fit the wire format ({exc})",
                                  f"adversary[{idx}].value") from None
            return Effect(data, rule=idx, action=act)
        if act == "corrupt":
            data = bytearray(frame.data)
            for i, b in enumerate(rule.xor):
                pos = rule.offset + i
                if pos < len(data):
                    data[pos] ^= b
            return Effect(bytes(data), rule=idx, action=act)
        if act == "replay":
            when = rule.at_us if rule.at_us is not None else frame.time + rule.after_us
            return Effect(frame.data, copies=[(max(when, frame.time), frame.data)], rule=idx, action=act)
    return Effect(frame.data)
