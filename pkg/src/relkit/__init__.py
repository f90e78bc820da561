"""relkit: a desk-scale workbench for relational-bottleneck architectures.

Subpackages:
    numcore  - float64 tensors, reverse-mode tape, Adam
    relcore  - projections, relation matrices, symbol attention, probes
    archzoo  - six end-to-end architectures (three bottleneck, three baseline)
    ibcalc   - exact discrete information-bottleneck calculator
    taskgen  - seeded generators for the four relational tasks
    harness  - training, evaluation, comparisons, reports, CLI
"""

__version__ = "0.1.0"
