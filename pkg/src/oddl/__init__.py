"""Online discriminative dictionary learning.

Jointly learns a sparse-coding dictionary and a linear classifier on the
sparse codes with an online block-coordinate descent algorithm.
"""

from .datasets import Dataset, DatasetManifest, load_idx, load_manifest, load_split, load_usps, make_synthetic
from .errors import (
    ChecksumError,
    ConfigError,
    DataError,
    FormatError,
    InvalidInputError,
    ODDLError,
    VersionError,
)
from .estimator import ODDLClassifier
from .inference import EvaluationReport, Model, Prediction, evaluate, predict, predict_patch_ensemble
from .persistence import load_model, save_model
from .preprocessing import SignalNormalizer, extract_face_patches, normalize, one_hot
from .sparse import OMPCoder, batch_omp, compute_gram, omp, reconstruct
from .trainer import ModelState, TrainerConfig, init_classifier, init_dictionary, minibatch_step, train
from .update import (
    Accumulators,
    AugmentedDictionary,
    accumulate,
    augment,
    bcd_sweep,
    bcd_update,
    split,
    surrogate_objective,
)

__version__ = "0.1.0"
