"""Shared builders for the test suite."""

from __future__ import annotations

from fmlab import fmlogic, netcore, trojankit
from fmlab.netcore import Netlist, TruthTable
from fmlab.trojankit import TriggerSpec

SPEC = TriggerSpec(alpha=3, beta=5, gamma=7, delta=11, opcode_width=4)
L = 8


def two_input_gate(table: TruthTable, length: int = L):
    """Converter pair feeding one FM gate; returns (netlist, sync, converters, gate)."""
    nl = Netlist()
    sync = fmlogic.build_sync(nl, length)
    a = nl.add_input("A")
    b = nl.add_input("B")
    ca = fmlogic.build_std_to_fm(nl, a, sync)
    cb = fmlogic.build_std_to_fm(nl, b, sync)
    gate = fmlogic.build_fm_gate(nl, table, [ca, cb], sync)
    return nl, sync, (ca, cb), gate


def trigger_design():
    """Event sync plus locking trigger on a 4-bit opcode bus."""
    nl = Netlist()
    sync = fmlogic.build_sync(nl, L)
    bus = trojankit.add_opcode_bus(nl, SPEC.opcode_width)
    lines = trojankit.build_event_sync(nl, bus, SPEC)
    trigger = trojankit.build_trigger(nl, *lines, sync)
    return nl, sync, bus, lines, trigger


def payload_design(secret: str, mode: trojankit.PayloadMode, jam_pairs: int = 0, jam_seed: int = 0):
    """Trigger + armed quad + transmitter (+ jammer), the payload testbed."""
    from fmlab import sidechannel

    nl = Netlist()
    sync = fmlogic.build_sync(nl, L)
    bus = trojankit.add_opcode_bus(nl, SPEC.opcode_width)
    lines = trojankit.build_event_sync(nl, bus, SPEC)
    trigger = trojankit.build_trigger(nl, *lines, sync)
    carrier = fmlogic.build_std_to_fm(nl, nl.const(0), sync)
    quad = trojankit.build_concealed(nl, carrier, sync, trigger=trigger)
    trojankit.set_payload_mode(quad, mode)
    tx = trojankit.build_payload_transmitter(nl, secret, trigger, quad, sync)
    jam = sidechannel.build_jammer(nl, sync, jam_pairs, jam_seed) if jam_pairs else None
    return nl, sync, trigger, quad, tx, jam


def aligned_payload_run(secret: str, mode: trojankit.PayloadMode, jam_pairs: int = 0,
                        jam_seed: int = 0, extra_cycles: int = 0):
    """Simulate the payload testbed with an aligned trigger insertion.

    Activation lands at SYNC instant 2L + 1; the first transmitted bit's
    period starts at 3L + 2.
    """
    nl, sync, trigger, quad, tx, jam = payload_design(secret, mode, jam_pairs, jam_seed)
    n = 3 * L + 2 + (len(secret) + 2) * L + extra_cycles
    stim = trojankit.opcode_stimulus([SPEC.filler()], SPEC, trojankit.Aligned(), L, total_cycles=n)
    if jam is not None:
        stim = stim.extended(jam.stimulus_waves(n))
    trace = netcore.simulate(nl, stim, n)
    return trace, quad, jam


ACTIVATION_SYNC = 2 * L + 1      # aligned: delta at L+1, decode one period later
FIRST_BIT_START = 3 * L + 2      # first transmitted bit's power window


def quad_period_sums(trace, quad, jam, n_bits: int):
    from fmlab import sidechannel

    scope = list(quad.stage_nets()) + (list(jam.all_nets()) if jam else [])
    pt = sidechannel.power_trace(trace, scope)
    return sidechannel.period_sums(pt, L, FIRST_BIT_START, n_bits)
