"""PT-Weyl - spectra and phase-space structure of PT-symmetric quantum maps.

This package provides:
- Kicked-rotator and circular-orthogonal-ensemble internal dynamics
- Assembly of the coupled gain/loss map and its PT checks
- Dense spectra, PT pairing, Im E histograms and fractal Weyl power-law fits
- Husimi supports of amplified, neutral and decaying subspaces
- The classical map with coupled regions, trapped sets and box counting
- A seeded sweep harness with CSV/PGM outputs and a run manifest
"""

__version__ = "0.1.0"
__description__ = "Fractal Weyl laws and phase-space supports of PT-symmetric quantum maps"
