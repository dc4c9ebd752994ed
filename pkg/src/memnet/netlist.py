"""SPICE-like netlist export, parsing and a DC self-check.

Dialect (one statement per line, ``*`` starts a comment)::

    V<name> <node> 0 DC <volts>          input source stub
    R<name> <node+> <node-> <ohms>       memory resistor
    X<name> <in> <out> INV VT=<v> VDD=<v>   behavioural threshold inverter

Node names encode tree coordinates: ``in<i>`` primary input ``i``,
``n<L>_<c>`` summing node of cell ``c`` in layer ``L``, ``s<L>_<c>`` its
inverter output.  Ground is ``0``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .circuit import Network, layer_sizes, node_voltages
from .nodal import simulate


class SelfCheckError(RuntimeError):
    pass


class NetlistParseError(ValueError):
    pass


@dataclass
class Netlist:
    resistors: list[tuple[str, str, str, float]] = field(default_factory=list)
    inverters: list[tuple[str, str, str, float, float]] = field(default_factory=list)
    sources: list[tuple[str, str, float]] = field(default_factory=list)
    title: str = "memnet"

    def statements(self) -> Counter:
        """Multiset of statement lines (order-free comparison)."""
        return Counter(self.to_text().splitlines()[1:])

    def to_text(self) -> str:
        lines = [f"* {self.title}"]
        lines += [f"{name} {node} 0 DC {_num(v)}" for name, node, v in self.sources]
        lines += [f"{name} {a} {b} {_num(r)}" for name, a, b, r in self.resistors]
        lines += [f"{name} {i} {o} INV VT={_num(vt)} VDD={_num(vdd)}" for name, i, o, vt, vdd in self.inverters]
        lines.append(".end")
        return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    return format(float(v), ".17g")


def _source_node(layer: int, index: int) -> str:
    return f"in{index}" if layer == 0 else f"s{layer - 1}_{index}"


def to_netlist(net: Network, input_bits=None) -> Netlist:
    """Netlist of ``net``; input stubs carry ``input_bits`` (default all 0)."""
    arch = net.arch
    bits = np.zeros(arch.n_inputs) if input_bits is None else np.asarray(input_bits)
    nl = Netlist(title=f"memnet arch={arch.n_inputs}:{','.join(map(str, arch.fan_ins))} "
                       f"vdd={_num(arch.logic_high)} vt={_num(arch.threshold)}")
    nl.sources = [(f"VIN{i}", f"in{i}", float(b) * arch.logic_high) for i, b in enumerate(bits)]
    for layer, (n, f) in enumerate(zip(layer_sizes(arch), arch.fan_ins)):
        for c in range(n):
            cell = net.cell(layer, c)
            node = f"n{layer}_{c}"
            for i, r in enumerate(cell.input_resistances):
                nl.resistors.append((f"RL{layer}C{c}I{i}", _source_node(layer, c * f + i), node, r))
            nl.resistors.append((f"RL{layer}C{c}O", node, "0", cell.output_resistance))
            nl.inverters.append((f"XL{layer}C{c}", node, f"s{layer}_{c}", arch.threshold, arch.logic_high))
    return nl


def export_netlist(net: Network, input_bits=None) -> str:
    return to_netlist(net, input_bits).to_text()


def parse_netlist(text: str) -> Netlist:
    nl = Netlist()
    lines = text.splitlines()
    if lines and lines[0].startswith("*"):
        nl.title = lines[0][1:].strip()
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("*") or line.lower() == ".end":
            continue
        parts = line.split()
        kind = parts[0][0].upper()
        try:
            if kind == "R" and len(parts) == 4:
                nl.resistors.append((parts[0], parts[1], parts[2], float(parts[3])))
            elif kind == "V" and len(parts) == 5 and parts[3].upper() == "DC":
                if parts[2] != "0":
                    raise ValueError("sources must be ground-referenced")
                nl.sources.append((parts[0], parts[1], float(parts[4])))
            elif kind == "X" and len(parts) == 6 and parts[3].upper() == "INV":
                opts = dict(p.split("=", 1) for p in parts[4:])
                nl.inverters.append((parts[0], parts[1], parts[2], float(opts["VT"]), float(opts["VDD"])))
            else:
                raise ValueError("unrecognised statement")
        except (ValueError, KeyError) as exc:
            raise NetlistParseError(f"line {lineno}: {exc}: {line!r}") from None
    return nl


def netlist_node_voltages(nl: Netlist, input_bits) -> dict[str, float]:
    """Full DC solve of a parsed netlist with the input stubs set from ``input_bits``."""
    vdd = nl.inverters[0][4] if nl.inverters else 1.0
    sources = {node: float(b) * vdd for (_, node, _), b in zip(nl.sources, input_bits)}
    return simulate([(a, b, r) for _, a, b, r in nl.resistors],
                    [(i, o, vt) for _, i, o, vt, _ in nl.inverters], sources, vdd)


def self_check(nl: Netlist, net: Network, inputs, rtol: float = 1e-9) -> float:
    """Compare netlist DC solutions with the simulator on each input vector.

    Returns the worst relative node-voltage error (denominator floored at
    ``1e-12 * logic_high``); raises ``SelfCheckError``
    on any tolerance or output-bit disagreement.
    """
    worst = 0.0
    n_out = layer_sizes(net.arch)[-1]
    last = net.arch.n_layers - 1
    for x in np.atleast_2d(inputs):
        volts = netlist_node_voltages(nl, x)
        sim = node_voltages(net, x)
        for layer, v_layer in enumerate(sim):
            ref = np.array([volts[f"n{layer}_{c}"] for c in range(len(v_layer))])
            # relative error, floored at 1e-12 VDD for nodes sitting at ~0 V
            err = np.abs(ref - v_layer) / np.maximum(np.abs(v_layer), 1e-12 * net.arch.logic_high)
            worst = max(worst, float(err.max()))
        bits_nl = np.array([volts[f"s{last}_{c}"] > 0 for c in range(n_out)], dtype=np.uint8)
        bits_sim = (sim[-1] < net.arch.threshold).astype(np.uint8)
        if not np.array_equal(bits_nl, bits_sim):
            raise SelfCheckError(f"output bits differ on input: {bits_nl} vs {bits_sim}")
    if worst > rtol:
        raise SelfCheckError(f"node voltage mismatch {worst:.3g} exceeds {rtol:g}")
    return worst
