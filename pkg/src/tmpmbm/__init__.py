"""Multi-target tracking with trajectory measurements over two-step windows."""

from .baseline import baseline_config, baseline_step, strip_measurements
from .association import gate, murty_kbest
from .density import LocalHypothesis, PmbmState, PoissonComponent, estimate, kld_merge_to_pmb, normalize_and_prune
from .filter import FilterConfig, Thresholds, Variant, initial_state, marginalise, predict, step, update
from .gaussian import Gaussian
from .gospa import gospa
from .models import BirthModel, ClutterModel, MeasurementModel, MotionModel
from .trajectory import MeasurementKind, TrajectoryKind, TrajectoryMeasurement, make_measurement

__version__ = "0.1.0"
