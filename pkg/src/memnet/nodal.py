"""General DC nodal analysis for resistor networks with threshold inverters.

This is deliberately independent of the per-cell divider formula in
:mod:`memnet.circuit`: the whole network is assembled into one conductance
matrix and solved simultaneously.  Inverter inputs draw no current; inverter
outputs are ideal sources whose level follows their input node, found by
fixed-point iteration over the inverter states.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

GROUND = "0"


def solve_dc(resistors: Iterable[tuple[str, str, float]], fixed: Mapping[str, float]) -> dict[str, float]:
    """Node voltages of a linear resistor network.

    ``resistors`` are ``(node_a, node_b, ohms)``; infinite resistance is an
    open circuit.  ``fixed`` pins node voltages (ground is always 0 V).
    Nodes with no conducting path at all are reported at 0 V.
    """
    fixed = {GROUND: 0.0, **fixed}
    res = [(a, b, float(r)) for a, b, r in resistors]
    free = sorted({n for a, b, _ in res for n in (a, b)} - fixed.keys())
    index = {n: i for i, n in enumerate(free)}
    rows, cols, vals = [], [], []
    rhs = np.zeros(len(free))
    for a, b, r in res:
        g = 0.0 if np.isinf(r) else 1.0 / r
        if g == 0.0:
            continue
        for x, y in ((a, b), (b, a)):
            if x not in index:
                continue
            i = index[x]
            rows.append(i)
            cols.append(i)
            vals.append(g)
            if y in index:
                rows.append(i)
                cols.append(index[y])
                vals.append(-g)
            else:
                rhs[i] += g * fixed[y]
    out = dict(fixed)
    if not free:
        return out
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(free), len(free)))
    diag = mat.diagonal()
    # Isolated nodes: pin to 0 V so the system stays nonsingular.
    isolated = np.flatnonzero(diag == 0)
    if isolated.size:
        mat = mat + sp.csr_matrix((np.ones(isolated.size), (isolated, isolated)), shape=mat.shape)
    x = spla.spsolve(mat.tocsc(), rhs) if len(free) > 1 else rhs / mat.toarray()[0]
    out.update(zip(free, np.atleast_1d(x).tolist()))
    return out


def simulate(resistors, inverters: Iterable[tuple[str, str, float]], sources: Mapping[str, float],
             logic_high: float = 1.0, max_rounds: int | None = None) -> dict[str, float]:
    """DC operating point with inverters ``(input_node, output_node, threshold)``.

    Output is ``logic_high`` when the input node is strictly below threshold,
    else 0 V.  Raises ``RuntimeError`` if the inverter states do not settle.
    """
    inverters = list(inverters)
    resistors = list(resistors)
    state = {out: 0.0 for _, out, _ in inverters}
    rounds = max_rounds or len(inverters) + 2
    for _ in range(rounds):
        volts = solve_dc(resistors, {**sources, **state})
        new = {out: (logic_high if volts.get(inp, 0.0) < vt else 0.0) for inp, out, vt in inverters}
        if new == state:
            return volts
        state = new
    raise RuntimeError("inverter states did not settle")
