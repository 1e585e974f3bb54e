"""Magnetic pseudodifferential operators on grids: quantization, twisted products, spectra and continuity checks."""
from .continuity import ParamSweep, hausdorff_window, inner_check, outer_check, semicontinuity_diagnostic
from .expr import parse
from .geometry import MagneticField, big_gamma_flux, gamma_flux, poincare_gauge, triangle_flux
from .moyal import diamond, sharp
from .quantize import OperatorMatrix, build_kernel, build_peierls
from .spectral import SpectrumSet, resolvent_norm, spectrum
from .symbols import GridSpec, SymbolFn

__version__ = "0.1.0"

__all__ = [
    "GridSpec", "MagneticField", "OperatorMatrix", "ParamSweep", "SpectrumSet", "SymbolFn",
    "big_gamma_flux", "build_kernel", "build_peierls", "diamond", "gamma_flux", "hausdorff_window",
    "inner_check", "outer_check", "parse", "poincare_gauge", "resolvent_norm", "semicontinuity_diagnostic",
    "sharp", "spectrum", "triangle_flux",
]
