"""Checkerboard-free CycleGAN and spectrum-based fake-image detection.

Images are float64 arrays of shape (H, W, 3) with values in [0, 1].  Config
arguments are dicts with the same keys as the CLI's JSON config sections.
"""

import json

from . import _core
from ._core import ConfigError, CycleGAN as _CycleGAN, Detector, TrainingError
from ._core import analyze_artifacts as _analyze_artifacts
from ._core import fft, load_image, log_spectrum, nyquist_energy_ratio, report_from_counts, save_image

__all__ = [
    "ConfigError",
    "CycleGAN",
    "Detector",
    "TrainingError",
    "analyze_artifacts",
    "fft",
    "load_image",
    "log_spectrum",
    "nyquist_energy_ratio",
    "report_from_counts",
    "run_cli",
    "save_image",
    "synth_image",
    "train_detector",
]


def _dump(config):
    return json.dumps(config or {})


def synth_image(domain, split, index, **spec):
    """One synthetic image; spec keys as in the "dataset" config section."""
    return _core.synth_image(_dump(spec), domain, split, index)


def analyze_artifacts(image, prominence_threshold=1.0):
    return json.loads(_analyze_artifacts(image, prominence_threshold))


def train_detector(real, fake, config=None):
    return _core.train_detector(list(real), list(fake), _dump(config))


def CycleGAN(generator=None, discriminator=None, training=None):
    return _CycleGAN(_dump(generator), _dump(discriminator), _dump(training))


CycleGAN.load = _CycleGAN.load


def run_cli(*args):
    """Runs gan-forensics in-process; returns (exit_code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
