"""Speaker fluency classification from short audio segments.

Fixed-length segmentation, MFCC + ZCR/RMSE/spectral-flux features, and
from-scratch SVM, random forest and MLP classifiers with a seeded
train/test protocol.
"""
__version__ = "0.1.0"

from .audio_io import AudioBuffer, load_canonical, read_wav, resample, write_wav
from .dsp import FeatureConfig, FeatureVector, extract_segment
from .errors import FluencyError
from .segmentation import Dataset, FluencyClass, Segment, build_dataset, load_manifest, segment_fixed

__all__ = [
    "AudioBuffer", "Dataset", "FeatureConfig", "FeatureVector", "FluencyClass", "FluencyError",
    "Segment", "build_dataset", "extract_segment", "load_canonical", "load_manifest", "read_wav",
    "resample", "segment_fixed", "write_wav",
]
