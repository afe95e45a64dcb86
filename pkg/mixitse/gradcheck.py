"""
Finite-difference check of enh_model.backward.

The scalar probed is sum(w * estimates) for a fixed random w, so backward()
receives w as its upstream gradient. Each probed coordinate is compared with
the five-point central difference

    (8 (f(x + h) - f(x - h)) - (f(x + 2h) - f(x - 2h))) / 12h

whose truncation error is O(h^4). The relative error uses
max(|analytic|, |numeric|, 1e-3) as its denominator.
"""
import logging
from collections import OrderedDict

import numpy as np
import torch

from mixitse.audio_io import AudioClip
from mixitse.config import ModelConfig, StftConfig
from mixitse.dsp import stft
from mixitse.enh_model import backward, forward, init_params, run_network, spectrogram_tensor

logger = logging.getLogger(__name__)

PROBE_SAMPLES = 1920
DEFAULT_PROBES = 50
DEFAULT_STEP = 1e-4
TOLERANCE = 1e-4
ERROR_FLOOR = 1e-3


class GradcheckReport(object):
  def __init__(self, errors, probes):
    self.errors = errors
    self.probes = probes

  @property
  def max_rel_error(self):
    return max(self.errors.values()) if self.errors else 0.0

  @property
  def passed(self):
    return self.max_rel_error <= TOLERANCE

  def worst(self):
    return max(self.errors.items(), key=lambda item: item[1])


def relative_error(analytic, numeric):
  return abs(analytic - numeric) / max(abs(analytic), abs(numeric), ERROR_FLOOR)


def central_difference(flat, index, step, objective):
  """Fourth-order central estimate of d objective / d flat[index]; flat is restored afterwards."""
  original = float(flat[index])
  values = {}
  for offset in (-2, -1, 1, 2):
    flat[index] = original + offset * step
    values[offset] = objective()
  flat[index] = original
  return (8.0 * (values[1] - values[-1]) - (values[2] - values[-2])) / (12.0 * step)


def gradient_check(seed=0, model_cfg=None, probes=DEFAULT_PROBES, step=DEFAULT_STEP, corrupt=False):
  """
  Compare analytic and numeric gradients on `probes` coordinates per tensor.

  `corrupt` perturbs the analytic gradient before comparison and exists to
  prove the check can fail.
  """
  model_cfg = model_cfg or ModelConfig.tiny()
  rng = np.random.default_rng(seed)
  params = init_params(model_cfg, seed)
  mixture = stft(AudioClip(rng.standard_normal(PROBE_SAMPLES)), StftConfig())
  inputs = spectrogram_tensor([mixture])

  estimates = forward(params, mixture, model_cfg, record=True)
  weights = torch.from_numpy(rng.standard_normal(tuple(estimates.tensor.shape)))
  grads = backward(estimates, weights)
  if corrupt:
    grads = grads.scaled(1.5)

  def _objective():
    with torch.no_grad():
      return float((run_network(params, inputs, model_cfg)[0] * weights).sum())

  errors = OrderedDict()
  total = 0
  for name, value in params.items():
    flat = value.view(-1)
    analytic = grads[name].reshape(-1)
    worst = 0.0
    for index in rng.choice(flat.numel(), size=min(probes, flat.numel()), replace=False):
      index = int(index)
      numeric = central_difference(flat, index, step, _objective)
      worst = max(worst, relative_error(float(analytic[index]), numeric))
      total += 1
    errors[name] = worst
    logger.debug('gradcheck %s: max relative error %.3e', name, worst)

  report = GradcheckReport(errors, total)
  logger.info('gradcheck probed %d coordinates, max relative error %.3e', total, report.max_rel_error)
  return report
