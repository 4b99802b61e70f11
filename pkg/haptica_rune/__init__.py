"""
Haptica Rune - CLI for datasets, models and experiments.

Command-line interface for:
- Dataset generation
- Feature extraction
- Model training and classification
- Experiment runs and report rendering
"""

__version__ = "0.1.0"
