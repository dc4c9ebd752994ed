"""Crossover-free hierarchical resistive memory networks.

Simulation of threshold-inverter resistor trees, their evolutionary training
for deformed-character recognition, evaluation, fault injection and netlist
export.
"""
from .circuit import (
    PAPER_ARCH, ArchitectureSpec, CellParams, ConfigurationError, Network,
    assert_no_crossover, build_network, cell_node_voltage, cell_output, forward,
    layer_sizes, output_tree_gene_indices, rset_len,
)
from .codes import Codebook, decode, extract_main_codes, hamming, min_pairwise_distance
from .evolution import (
    GeneticConfig, RefineConfig, SelectionConfig, TrainedModel, random_rset, train,
)
from .config import load_config
from .harness import (
    FaultModel, TestProtocol, evaluate, fault_sweep, inject_faults, load_model, save_model,
)
from .imaging import (
    TEST_DIST, TRAIN_DIST, DeformationDistribution, DeformationParams, deform, load_glyphs,
    sample_params,
)

__version__ = "0.1.0"
