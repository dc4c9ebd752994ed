"""Resistive cells and the crossover-free hierarchical network.

A cell sums its input voltages through resistors ``R_i`` onto a node that is
tied to ground through ``R_o``; an inverter with threshold ``V_T`` turns the
node voltage into a bit::

    V_node = sum(G_i * V_i) / (G_o + sum(G_i)),   G = 1 / R
    bit    = 1 if V_node < V_T else 0

Cells are arranged in layers.  Cell ``k`` of a layer with fan-in ``f`` reads
signals ``[k*f, (k+1)*f)`` of the previous layer, so every signal has exactly
one sink and the wiring is a forest of disjoint trees, one per output bit.

The genome (``Rset``) is a flat float array in layer-major order: layer 0
first, and within a layer cell 0's input resistances followed by its ``R_o``,
then cell 1, and so on.  An infinite resistance is an open circuit (zero
conductance).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised for an architecture or genome that violates its invariants."""


@dataclass(frozen=True)
class CellParams:
    input_resistances: tuple[float, ...]
    output_resistance: float
    threshold: float = 0.5
    logic_high: float = 1.0

    def __post_init__(self):
        if len(self.input_resistances) < 1:
            raise ConfigurationError("cell fan-in must be >= 1")
        rs = np.asarray(self.input_resistances + (self.output_resistance,), dtype=float)
        if np.any(~(rs > 0)):
            raise ConfigurationError("cell resistances must be positive")
        if not 0.0 < self.threshold < self.logic_high:
            raise ConfigurationError("threshold must lie strictly between 0 and logic_high")

    @property
    def fan_in(self) -> int:
        return len(self.input_resistances)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Input count and per-layer fan-ins of a tree network."""

    n_inputs: int
    fan_ins: tuple[int, ...]
    logic_high: float = 1.0
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "fan_ins", tuple(int(f) for f in self.fan_ins))
        if self.n_inputs < 1:
            raise ConfigurationError("n_inputs must be a positive integer")
        if not self.fan_ins:
            raise ConfigurationError("fan_ins must name at least one layer")
        if not 0.0 < self.threshold < self.logic_high:
            raise ConfigurationError("threshold must lie strictly between 0 and logic_high")
        width = self.n_inputs
        for layer, f in enumerate(self.fan_ins):
            if f < 1:
                raise ConfigurationError(f"layer {layer}: fan-in must be >= 1, got {f}")
            if width % f:
                raise ConfigurationError(
                    f"layer {layer}: {width} signals not divisible by fan-in {f}"
                )
            width //= f

    @property
    def n_layers(self) -> int:
        return len(self.fan_ins)

    @property
    def n_outputs(self) -> int:
        return layer_sizes(self)[-1]


# Paper task: 36x36 pixels, 6/6/3 inputs per cell, 12 outputs.
PAPER_ARCH = ArchitectureSpec(1296, (6, 6, 3))


def layer_sizes(arch: ArchitectureSpec) -> list[int]:
    """Number of cells in each layer; the last entry is the output count."""
    sizes = []
    width = arch.n_inputs
    for layer, f in enumerate(arch.fan_ins):
        if width % f:
            raise ConfigurationError(f"layer {layer}: {width} signals not divisible by fan-in {f}")
        width //= f
        sizes.append(width)
    return sizes


def rset_len(arch: ArchitectureSpec) -> int:
    return sum(n * (f + 1) for n, f in zip(layer_sizes(arch), arch.fan_ins))


def layer_offsets(arch: ArchitectureSpec) -> list[int]:
    """Start index of each layer's block in the genome, plus the total length."""
    offsets = [0]
    for n, f in zip(layer_sizes(arch), arch.fan_ins):
        offsets.append(offsets[-1] + n * (f + 1))
    return offsets


def cell_node_voltage(voltages: Sequence[float], cell: CellParams) -> float:
    """DC voltage on the summing node of one cell."""
    v = np.asarray(voltages, dtype=float)
    if v.shape != (cell.fan_in,):
        raise ValueError(f"expected {cell.fan_in} input voltages, got {v.shape[0] if v.ndim else 0}")
    if np.any((v < 0) | (v > cell.logic_high)):
        raise ValueError("input voltages must lie in [0, logic_high]")
    g = 1.0 / np.asarray(cell.input_resistances, dtype=float)
    g_o = 1.0 / cell.output_resistance
    den = g.sum() + g_o
    if den == 0.0:
        return 0.0
    return float(np.dot(g, v) / den)


def cell_output(voltages: Sequence[float], cell: CellParams) -> int:
    return int(cell_node_voltage(voltages, cell) < cell.threshold)


@dataclass(frozen=True, eq=False)
class Network:
    """An architecture bound to a genome.  Immutable once built."""

    arch: ArchitectureSpec
    rset: np.ndarray = field(repr=False)

    def __post_init__(self):
        rset = np.array(self.rset, dtype=float)
        if rset.ndim != 1 or rset.size != rset_len(self.arch):
            raise ConfigurationError(
                f"Rset has {rset.size} values, architecture needs {rset_len(self.arch)}"
            )
        if np.any(~(rset > 0)):
            raise ConfigurationError("Rset values must be positive")
        rset.flags.writeable = False
        object.__setattr__(self, "rset", rset)

    @cached_property
    def conductances(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per layer, ``(G_in[cells, fan_in], G_o[cells])``."""
        layers = []
        offsets = layer_offsets(self.arch)
        for k, (n, f) in enumerate(zip(layer_sizes(self.arch), self.arch.fan_ins)):
            block = 1.0 / self.rset[offsets[k]:offsets[k + 1]].reshape(n, f + 1)
            layers.append((block[:, :f], block[:, f]))
        return layers

    @property
    def n_cells(self) -> int:
        return sum(layer_sizes(self.arch))

    def cell(self, layer: int, index: int) -> CellParams:
        n, f = layer_sizes(self.arch)[layer], self.arch.fan_ins[layer]
        if not 0 <= index < n:
            raise IndexError(f"layer {layer} has {n} cells")
        start = layer_offsets(self.arch)[layer] + index * (f + 1)
        values = self.rset[start:start + f + 1]
        return CellParams(tuple(values[:f]), float(values[f]),
                          self.arch.threshold, self.arch.logic_high)


def build_network(arch: ArchitectureSpec, rset) -> Network:
    return Network(arch, rset)


def node_voltages(net: Network, input_bits) -> list[np.ndarray]:
    """Summing-node voltages of every layer for a batch of inputs.

    ``input_bits`` has shape ``(n_inputs,)`` or ``(batch, n_inputs)``; each
    returned array has the matching leading shape plus the layer's cell count.
    """
    x = np.asarray(input_bits)
    if x.shape[-1] != net.arch.n_inputs:
        raise ValueError(f"expected {net.arch.n_inputs} input bits, got {x.shape[-1]}")
    high = net.arch.logic_high
    v = x.astype(float) * high
    out = []
    for (g, g_o), f in zip(net.conductances, net.arch.fan_ins):
        v = v.reshape(v.shape[:-1] + (g.shape[0], f))
        num = np.einsum("...nf,nf->...n", v, g)
        den = g.sum(axis=1) + g_o
        node = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        out.append(node)
        v = (node < net.arch.threshold) * high
    return out


def forward(net: Network, input_bits) -> np.ndarray:
    """Output code(s) of the network as uint8 bits, last-layer cell order."""
    node = node_voltages(net, input_bits)[-1]
    return (node < net.arch.threshold).astype(np.uint8)


def forward_population(arch: ArchitectureSpec, rsets: np.ndarray, input_bits: np.ndarray) -> np.ndarray:
    """Evaluate many genomes on the same inputs at once.

    ``rsets`` is ``(P, rset_len)`` and ``input_bits`` is ``(B, n_inputs)``;
    returns uint8 codes of shape ``(P, B, n_outputs)``.
    """
    rsets = np.asarray(rsets, dtype=float)
    x = np.asarray(input_bits)
    p, b = rsets.shape[0], x.shape[0]
    high = arch.logic_high
    v = np.broadcast_to(x.astype(float) * high, (p, b, arch.n_inputs))
    offsets = layer_offsets(arch)
    for k, (n, f) in enumerate(zip(layer_sizes(arch), arch.fan_ins)):
        block = 1.0 / rsets[:, offsets[k]:offsets[k + 1]].reshape(p, n, f + 1)
        g, g_o = block[..., :f], block[..., f]
        num = np.einsum("pbnf,pnf->pbn", v.reshape(p, b, n, f), g)
        den = (g.sum(axis=2) + g_o)[:, None, :]
        node = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        v = (node < arch.threshold) * high
    return (v > 0).astype(np.uint8)


@dataclass
class CrossoverReport:
    ok: bool
    n_trees: int = 0
    cells_per_tree: list[int] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)


def wiring(arch: ArchitectureSpec) -> list[np.ndarray]:
    """Sink cell index of every source signal, per layer (contiguous blocks)."""
    width = arch.n_inputs
    sinks = []
    for f in arch.fan_ins:
        sinks.append(np.arange(width) // f)
        width //= f
    return sinks


def check_wiring(n_inputs: int, sinks: Sequence[Sequence[int]], layer_sizes_: Sequence[int]) -> CrossoverReport:
    """Structural crossover check for an explicit wiring description.

    ``sinks[k][s]`` is the cell in layer ``k`` fed by signal ``s`` of layer
    ``k-1`` (layer -1 being the primary inputs).  Every signal must have one
    sink, sink index must be nondecreasing in source index, and the output
    trees must share no cell.
    """
    violations = []
    width = n_inputs
    for k, (layer_sinks, n_cells) in enumerate(zip(sinks, layer_sizes_)):
        s = np.asarray(layer_sinks)
        if s.shape != (width,):
            violations.append(f"layer {k}: {s.size} sink entries for {width} sources")
            width = n_cells
            continue
        if np.any((s < 0) | (s >= n_cells)):
            violations.append(f"layer {k}: sink index out of range")
        bad = np.nonzero(np.diff(s) < 0)[0]
        for i in bad:
            violations.append(f"layer {k}: sources {i} and {i + 1} cross (sinks {s[i]} > {s[i + 1]})")
        unused = np.setdiff1d(np.arange(n_cells), s)
        for c in unused:
            violations.append(f"layer {k}: cell {c} has no inputs")
        width = n_cells

    # Walk each output back to its leaves; a cell claimed by two trees is a
    # shared (crossing) connection.
    owner: dict[tuple[int, int], int] = {}
    cells_per_tree = []
    n_out = layer_sizes_[-1] if len(layer_sizes_) else 0
    if not violations:
        for out in range(n_out):
            frontier = {out}
            count = 0
            for k in range(len(sinks) - 1, -1, -1):
                for c in frontier:
                    key = (k, c)
                    if key in owner and owner[key] != out:
                        violations.append(f"cell {key} shared by output trees {owner[key]} and {out}")
                    owner[key] = out
                count += len(frontier)
                if k:
                    s = np.asarray(sinks[k])
                    frontier = set(np.nonzero(np.isin(s, list(frontier)))[0].tolist())
            cells_per_tree.append(count)
    return CrossoverReport(not violations, n_out if not violations else 0, cells_per_tree, violations)


def assert_no_crossover(arch: ArchitectureSpec) -> CrossoverReport:
    return check_wiring(arch.n_inputs, wiring(arch), layer_sizes(arch))


def output_tree_gene_indices(arch: ArchitectureSpec, output_index: int) -> np.ndarray:
    """Sorted genome positions of every resistor in one output's subtree."""
    sizes = layer_sizes(arch)
    n_out = sizes[-1]
    if not 0 <= output_index < n_out:
        raise IndexError(f"output index {output_index} outside [0, {n_out})")
    offsets = layer_offsets(arch)
    genes = []
    # Cells of layer k belonging to one output form a contiguous run.
    for k, (n, f) in enumerate(zip(sizes, arch.fan_ins)):
        per_tree = n // n_out
        first = output_index * per_tree
        start = offsets[k] + first * (f + 1)
        genes.append(np.arange(start, start + per_tree * (f + 1)))
    return np.concatenate(genes)
