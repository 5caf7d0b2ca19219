"""Spiking neural network for wafer map defect-pattern classification."""

from .data import CLASS_NAMES, ClassLabel, Dataset, SplitSpec, WaferMap, load_wfm, save_wfm
from .layers import Network, NetworkConfig
from .lif import LifParams, LifState, SurrogateSpec
from .training import TrainConfig, evaluate, train

__version__ = "0.1.0"
