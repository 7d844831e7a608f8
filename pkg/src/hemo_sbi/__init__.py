"""hemo-sbi: 1D hemodynamics simulation and neural posterior estimation of cardiac biomarkers."""

import importlib.metadata

try:
    __version__ = importlib.metadata.version("hemo-sbi")
except importlib.metadata.PackageNotFoundError:  # source checkout without install
    __version__ = "0.0.0+unknown"
