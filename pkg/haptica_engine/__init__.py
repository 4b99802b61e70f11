"""
Haptica Engine - Simulation and experiment side of Haptica.

The engine is responsible for:
- The lumped arm/object contact model and its taxel rendering
- Seeded synthetic dataset generation
- The PCA + nearest-neighbour comparator
- Cross-validation, sweeps and leave-one-condition-out experiments
"""

__version__ = "0.1.0"
