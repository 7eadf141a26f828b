"""wclab: a desk-scale numerical laboratory for wireless-cable OTA testing.

Synthesizes probe<->DUT transfer matrices, establishes calibrated
wireless-cable links under error/quantization models, emulates multi-target
sensing channels, and runs the DUT-side range/velocity/angle estimation chain.
"""

__version__ = "0.1.0"
