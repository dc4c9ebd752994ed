"""
Exporting a circuit netlist
===========================

The network is written as SPICE-like text, parsed back, and solved as one
resistive circuit with ideal threshold inverters.  The node voltages must
agree with the cell-by-cell simulator.
"""

import numpy as np

from memnet import PAPER_ARCH, build_network, random_rset
from memnet.netlist import export_netlist, parse_netlist, self_check

rng = np.random.default_rng(3)
net = build_network(PAPER_ARCH, random_rset(PAPER_ARCH, rng=rng))

text = export_netlist(net)
print("\n".join(text.splitlines()[:4]))
print("...")
print("\n".join(text.splitlines()[-3:]))

inputs = rng.integers(0, 2, (10, PAPER_ARCH.n_inputs))
worst = self_check(parse_netlist(text), net, inputs)
print(f"worst relative node-voltage difference over 10 inputs: {worst:.2e}")
