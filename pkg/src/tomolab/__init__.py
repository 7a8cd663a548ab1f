"""Acoustic tomography on a ring of transducers: Lippmann-Schwinger forward
modelling, near-to-far conversion of ring data and iterative Born-type
reconstruction with filtered Fourier synthesis."""

__version__ = "0.1.0"
