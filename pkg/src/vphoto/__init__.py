"""vphoto: a virtual photographer.

Projects perspective views out of panoramas, learns per-aspect aesthetic
scorers from perturbation-generated negatives, optimizes crop, HDR,
saturation and a learned lighting mask one aspect at a time, and ranks the
results on a calibrated aesthetic scale.
"""

__version__ = "0.1.0"

from .raster import RasterImage, load_image, save_png
from .panorama import Panorama, ViewSpec, project, standard_views
from .filters import FilterId
from .dataset import Corpus, TrainingExample
from .scoring import AspectScorer, ScaleMapping
from .pipeline import ModelBundle, PipelineConfig, run_pipeline

__all__ = [
    "RasterImage",
    "load_image",
    "save_png",
    "Panorama",
    "ViewSpec",
    "project",
    "standard_views",
    "FilterId",
    "Corpus",
    "TrainingExample",
    "AspectScorer",
    "ScaleMapping",
    "ModelBundle",
    "PipelineConfig",
    "run_pipeline",
    "__version__",
]
