"""Builders and decoders for the frequency-modulated (FM) logic family.

An FM bit rides a circular shift register (CSR) of even length L >= 4
whose contents rotate one stage per clock.  A marker 1, planted by the
reset state of a set-type flip-flop at stage L, circulates forever and
fixes the period.  The data bit occupies stage L/2, half a turn away
from the marker, so a tap sees one pulse per L cycles for value 0 and
two pulses for value 1:

    value 0 -> tap frequency f_clk / L      (duty 1/L)
    value 1 -> tap frequency 2 * f_clk / L  (duty 2/L)

A companion CSR of the same length with its set-type stage at L/2
generates the alignment signal SYNC.  Under the RESET protocol (reset
high for exactly cycle 0) SYNC is 1 exactly at cycles congruent to
1 mod L; at those instants every well-formed FM register holds its
marker at stage L and its data bit at stage L/2.

Values are combined at SYNC instants.  Each FM gate is a single LUT
driving the D pin of the stage L/2 + 1 flip-flop of its output
register:

    D(insert stage) = SYNC ? f(data taps) : own stage L/2 value

Off-SYNC the LUT passes the register's own rotation through, so its
output keeps toggling and no net in a composed FM design is ever
constant.  A LUT has six inputs; SYNC and the feedback tap use two,
leaving at most four data taps per gate.  Wider functions must be
composed from a tree of gates (one gate per internal node, latency L
per level).

Construction mutates a single-owner netlist; decoding and duty-cycle
measurement operate on immutable traces and are freely concurrent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .netcore import (
    FfKind,
    NetId,
    Netlist,
    Trace,
    TruthTable,
)

__all__ = [
    "CsrShape",
    "FmSync",
    "FmSignal",
    "FmBit",
    "FmExpr",
    "FmError",
    "MalformedFmError",
    "DATA_INPUT_BUDGET",
    "sync_instants",
    "build_sync",
    "build_fm_csr",
    "build_const_fm",
    "build_std_to_fm",
    "build_fm_gate",
    "compose_fm",
    "build_locking_and",
    "fm_decode",
    "duty_cycle",
]

# LUT inputs available to gate data taps: 6 minus SYNC minus feedback.
DATA_INPUT_BUDGET = 4

# Combiner LUT input layout (fixed convention used across the package).
COMBINER_SYNC_POS = 0
COMBINER_FB_POS = 1
COMBINER_DATA_POS = 2


class FmError(ValueError):
    """Invalid FM construction or decode request."""


class MalformedFmError(FmError):
    """A trace window does not carry a well-formed FM encoding."""


def sync_instants(L: int, n_cycles: int, start: int = 1) -> range:
    """Cycles at which SYNC is high: start, start+L, ... below n_cycles."""
    first = start + (-(start - 1)) % L
    return range(first, n_cycles, L)


@dataclass(frozen=True)
class CsrShape:
    """An L-stage register ring; ``stages[i]`` is the stage i+1 output net.

    ``set_stage`` names the single set-type flip-flop for the standard
    marker rings; it is None for the stage-wise complement rings used by
    power concealment, which flip every flip-flop kind.
    """

    stages: tuple[NetId, ...]
    L: int
    set_stage: int | None

    @property
    def data_tap(self) -> NetId:
        return self.stages[self.L // 2 - 1]

    @property
    def marker_tap(self) -> NetId:
        return self.stages[self.L - 1]


@dataclass(frozen=True)
class FmSync:
    """The alignment generator: a CSR with its set stage at L/2."""

    csr: CsrShape
    tap: NetId
    L: int


@dataclass(frozen=True)
class FmSignal:
    """Handle onto one FM-encoded bit.

    ``data_tap`` is the stage L/2 output; ``combiner_out`` is the LUT
    feeding the insert stage (None for raw rotors); ``data_inputs`` are
    the nets occupying the combiner's data slots.
    """

    csr: CsrShape
    data_tap: NetId
    insert_stage: int
    L: int
    combiner_out: NetId | None
    data_inputs: tuple[NetId, ...]

    @property
    def stages(self) -> tuple[NetId, ...]:
        return self.csr.stages


@dataclass(frozen=True)
class FmBit:
    """A decoded FM value and the tap period it implies (in cycles)."""

    value: int
    period: int


def _check_length(L: int) -> None:
    if L < 4 or L % 2:
        raise FmError(f"CSR length must be even and at least 4, got {L}")


def build_ring(
    netlist: Netlist,
    L: int,
    set_stages: Sequence[int],
    insert_stage: int | None = None,
    ce: NetId | None = None,
) -> list[NetId]:
    """A rotating ring of L flip-flops; stage i feeds stage i+1, L feeds 1.

    Stages listed in ``set_stages`` are set-type (reset to 1), the rest
    reset-type.  ``insert_stage``, if given, is left unwired for the
    caller to drive (normally from a combining LUT).  All flip-flops
    share ``ce`` (tied high when omitted) and the RESET port on ``sr``.
    """
    _check_length(L)
    bad = [s for s in set_stages if not 1 <= s <= L]
    if bad:
        raise FmError(f"set stages out of range: {bad}")
    reset = netlist.reset()
    enable = netlist.const(1) if ce is None else ce
    marks = set(set_stages)
    qs = [
        netlist.add_ff(FfKind.SET if (i + 1) in marks else FfKind.RESET, None, enable, reset)
        for i in range(L)
    ]
    for i in range(L):
        if insert_stage is not None and i + 1 == insert_stage:
            continue
        netlist.set_ff_d(qs[i], qs[i - 1])
    return qs


def build_sync(netlist: Netlist, L: int = 8) -> FmSync:
    """The SYNC generator: marker planted at stage L/2, tapped there.

    After reset the single 1 sits at stage L/2, so the tap is high at
    cycle 1 and every L cycles after.
    """
    _check_length(L)
    qs = build_ring(netlist, L, [L // 2])
    csr = CsrShape(stages=tuple(qs), L=L, set_stage=L // 2)
    return FmSync(csr=csr, tap=qs[L // 2 - 1], L=L)


def build_fm_csr(netlist: Netlist, L: int = 8) -> CsrShape:
    """A free-running FM register holding value 0 (marker only)."""
    _check_length(L)
    qs = build_ring(netlist, L, [L])
    return CsrShape(stages=tuple(qs), L=L, set_stage=L)


def build_const_fm(netlist: Netlist, L: int, value: int) -> CsrShape:
    """A rotor permanently encoding ``value`` (marker, plus data for 1)."""
    _check_length(L)
    marks = [L, L // 2] if value else [L]
    qs = build_ring(netlist, L, marks)
    return CsrShape(stages=tuple(qs), L=L, set_stage=L)


def make_combiner_table(
    n_data: int, branch: Callable[[int, Sequence[int]], int]
) -> TruthTable:
    """Insert-stage LUT table over inputs (sync, feedback, data...).

    Off-SYNC the output is the feedback tap (plain rotation); at SYNC it
    is ``branch(feedback, data_bits)``.
    """
    arity = n_data + 2

    def fn(*bits: int) -> int:
        sync, fb = bits[COMBINER_SYNC_POS], bits[COMBINER_FB_POS]
        if not sync:
            return fb
        return branch(fb, bits[COMBINER_DATA_POS:])

    return TruthTable.from_function(arity, fn)


def _attach_combiner(
    netlist: Netlist,
    sync: FmSync,
    qs: list[NetId],
    table: TruthTable,
    data_inputs: tuple[NetId, ...],
) -> FmSignal:
    L = sync.L
    fb = qs[L // 2 - 1]
    comb = netlist.add_lut((sync.tap, fb, *data_inputs), table)
    netlist.set_ff_d(qs[L // 2], comb)
    csr = CsrShape(stages=tuple(qs), L=L, set_stage=L)
    return FmSignal(
        csr=csr,
        data_tap=fb,
        insert_stage=L // 2 + 1,
        L=L,
        combiner_out=comb,
        data_inputs=data_inputs,
    )


def build_std_to_fm(netlist: Netlist, a: NetId, sync: FmSync) -> FmSignal:
    """Converter from standard logic to FM.

    The insert LUT samples ``a`` at each SYNC instant; the sampled bit
    becomes decodable one full rotation (L cycles) later.
    """
    netlist._require_net(a, "converter input")
    qs = build_ring(netlist, sync.L, [sync.L], insert_stage=sync.L // 2 + 1)
    table = make_combiner_table(1, lambda fb, data: data[0])
    return _attach_combiner(netlist, sync, qs, table, (a,))


def build_fm_gate(
    netlist: Netlist,
    fn: TruthTable,
    inputs: Sequence[FmSignal],
    sync: FmSync,
) -> FmSignal:
    """An FM gate computing ``fn`` over up to four FM inputs.

    One LUT reads SYNC, the output register's own stage L/2 tap, and the
    input registers' data taps; the result lands in stage L/2 + 1 and is
    decodable after one rotation.  Constant functions are rejected: they
    would pin the LUT output and defeat the always-active property.
    """
    inputs = list(inputs)
    k = len(inputs)
    if not 1 <= k <= DATA_INPUT_BUDGET:
        raise FmError(
            f"FM gate takes 1..{DATA_INPUT_BUDGET} inputs (SYNC and feedback "
            f"use the other LUT pins), got {k}; compose wider functions"
        )
    if fn.arity != k:
        raise FmError(f"function arity {fn.arity} does not match {k} inputs")
    if fn.is_constant():
        raise FmError("constant gate functions are rejected (always-idle output)")
    for s in inputs:
        if s.L != sync.L:
            raise FmError(f"mixed CSR lengths: input L={s.L}, sync L={sync.L}")

    qs = build_ring(netlist, sync.L, [sync.L], insert_stage=sync.L // 2 + 1)
    table = make_combiner_table(k, lambda fb, data: fn.eval(data))
    taps = tuple(s.data_tap for s in inputs)
    return _attach_combiner(netlist, sync, qs, table, taps)


@dataclass(frozen=True)
class FmExpr:
    """An internal node of a gate tree: a function over FM operands."""

    table: TruthTable
    args: tuple["FmExpr | FmSignal", ...]

    def depth(self) -> int:
        child = max((a.depth() for a in self.args if isinstance(a, FmExpr)), default=0)
        return child + 1


def compose_fm(netlist: Netlist, expr: FmExpr, sync: FmSync) -> FmSignal:
    """Build one FM gate per internal node of ``expr``.

    Guarantees activity at every gate output because each node's
    function must be non-constant; total latency is depth * L after the
    leaf signals are valid.
    """
    operands: list[FmSignal] = []
    for arg in expr.args:
        if isinstance(arg, FmExpr):
            operands.append(compose_fm(netlist, arg, sync))
        else:
            operands.append(arg)
    return build_fm_gate(netlist, expr.table, operands, sync)


def build_locking_and(netlist: Netlist, a: FmSignal, b: FmSignal, sync: FmSync) -> FmSignal:
    """AND gate that latches FM value 1 permanently once both inputs are 1.

    The insert LUT ORs the conjunction with the register's own data tap
    at each SYNC instant, so a captured 1 re-inserts itself forever; the
    output stays 0 until the inputs are simultaneously 1 at a SYNC
    instant.
    """
    for s in (a, b):
        if s.L != sync.L:
            raise FmError(f"mixed CSR lengths: input L={s.L}, sync L={sync.L}")
    qs = build_ring(netlist, sync.L, [sync.L], insert_stage=sync.L // 2 + 1)
    table = make_combiner_table(2, lambda fb, data: (data[0] & data[1]) | fb)
    return _attach_combiner(netlist, sync, qs, table, (a.data_tap, b.data_tap))


def _resolve_tap(fm: "FmSignal | CsrShape") -> tuple[NetId, int]:
    if isinstance(fm, FmSignal):
        return fm.data_tap, fm.L
    if isinstance(fm, CsrShape):
        return fm.data_tap, fm.L
    raise FmError(f"cannot decode object of type {type(fm).__name__}")


def fm_decode(trace: Trace, fm: "FmSignal | CsrShape", sync_cycle: int) -> FmBit:
    """Read the FM value at a SYNC instant and validate the encoding.

    The amplitude view (data tap sample) must agree with the frequency
    view (rising edges of the tap over the preceding L cycles: one per
    period for value 0, two for value 1); disagreement raises
    :class:`MalformedFmError` instead of silently picking a side.

    ``sync_cycle`` must be a SYNC instant with at least one full period
    of post-reset history (``sync_cycle > L``); steady-state decoding
    conventionally starts at 2L.
    """
    tap, L = _resolve_tap(fm)
    if (sync_cycle - 1) % L:
        raise FmError(f"cycle {sync_cycle} is not a SYNC instant for L={L}")
    if sync_cycle <= L:
        raise FmError(f"decode needs a full period of history (cycle > {L})")
    if sync_cycle >= trace.cycles:
        raise FmError(f"cycle {sync_cycle} is beyond the trace ({trace.cycles} cycles)")
    window = trace.wave(tap)[sync_cycle - L : sync_cycle + 1]
    value = int(window[-1])
    edges = int(((window[1:] == 1) & (window[:-1] == 0)).sum())
    if edges != value + 1:
        raise MalformedFmError(
            f"tap {tap}: sampled {value} but saw {edges} rising edges in one period"
        )
    return FmBit(value=value, period=L // 2 if value else L)


def duty_cycle(trace: Trace, net: NetId, window: tuple[int, int]) -> float:
    """Fraction of cycles in [start, stop) during which the net is 1.

    Exact encodings come out exactly when the window spans whole
    periods: 1/L for FM value 0, 2/L for value 1.
    """
    start, stop = window
    if not 0 <= start < stop <= trace.cycles:
        raise FmError(f"empty or out-of-range window {window}")
    w = trace.wave(net)[start:stop]
    return float(w.sum()) / float(len(w))
