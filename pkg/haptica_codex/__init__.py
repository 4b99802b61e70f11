"""
Haptica Codex - Shared library for all Haptica components.

This package provides the functionality used by the engine and the CLI:
- Taxel-array types and image-level preprocessing
- Contact feature extraction and scaling
- Left-right Gaussian HMMs and classifier banks
- Text formats for trials, features and models
- Configuration management
"""

__version__ = "0.1.0"
