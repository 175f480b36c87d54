"""Phaseless inverse source problem for the Helmholtz equation in a two-layer medium.

Far-field magnitudes are turned into phased data with two reference point
sources per direction, then into Fourier coefficients of the buried source.
"""

from .config import ExperimentConfig, load_config, preset
from .errors import LayeredISPError
from .forward import FarFieldDataset, PhaselessDataset, synthesize_dataset, synthesize_phaseless
from .inversion import CoefficientTable, invert_values, reconstruct
from .lattice import AdmissibleSet, build_admissible_set
from .medium import Direction, Medium, reflection_H, transmission_T
from .metrics import NoiseSpec, add_noise, err_inf, err_l2
from .quadrature import SourceBox, default_orders, tensor_rule
from .retrieval import ReferenceConfig, retrieve_dataset
from .sources import AnalyticSource2D, AnalyticSource3D, FourierSeriesSource

__version__ = "0.1.0"
