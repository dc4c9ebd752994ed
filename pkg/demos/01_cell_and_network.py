"""
A single cell and the paper-scale network
=========================================

A cell sums its inputs through resistors into one node that is loaded by an
output resistor to ground, then inverts that node voltage against a
threshold.
"""

import numpy as np

from memnet import (PAPER_ARCH, CellParams, assert_no_crossover, build_network, cell_node_voltage,
                    cell_output, forward, layer_sizes, rset_len)

# Two equal input resistors and an equal load: the node sits at 2/3 V when
# both inputs are high and at 1/3 V when only one is.
cell = CellParams(input_resistances=(1.0, 1.0), output_resistance=1.0)
for bits in ([0, 0], [1, 0], [1, 1]):
    v = cell_node_voltage(bits, cell)
    print(f"inputs {bits}  node {v:.4f} V  output bit {cell_output(bits, cell)}")

# The network used throughout: 1296 pixels, fan-ins 6, 6 and 3.
print("cells per layer:", layer_sizes(PAPER_ARCH))
print("resistors (genes):", rset_len(PAPER_ARCH))

# Each output depends on its own three image rows and nothing else.
report = assert_no_crossover(PAPER_ARCH)
print(f"{report.n_trees} independent output trees of {report.cells_per_tree[0]} cells")

# Evaluate a random log-uniform genome on a random image.
rng = np.random.default_rng(0)
net = build_network(PAPER_ARCH, np.exp(rng.uniform(0, np.log(1e4), rset_len(PAPER_ARCH))))
image = rng.integers(0, 2, PAPER_ARCH.n_inputs)
print("output code:", "".join(map(str, forward(net, image))))
