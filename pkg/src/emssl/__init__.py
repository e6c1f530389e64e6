"""emssl: self-supervised acoustic-to-articulatory inversion.

An inference network learns to drive a waveguide tube synthesizer by
iteratively sampling articulatory parameters for unlabelled audio,
synthesizing, and training on the resulting pairs.  The synthesizer is only
ever evaluated, never differentiated.
"""

__version__ = "0.1.0"

from . import features, metrics, trm
