"""
Toy-scale complex spectral mapping network.

A small U-shaped network over (frequency x time): a stem and `enc_depth`
encoder levels that halve the frequency axis, a bottleneck of
`tcn_repeats` x `tcn_blocks` dilated depthwise temporal blocks with residual
connections, a decoder that mirrors the encoder with skip concatenation, and a
1x1 head emitting (Re, Im) for each of `num_outputs` sources. Channel 1 is the
denoised-speech output. The head also sees the mixture itself, so a scaled
copy of the input is one linear layer away.

Spectra enter divided by SPECTRAL_SCALE and leave multiplied by it: a
unit-RMS waveform then has spectral entries of order one inside the network.

Parameters are plain named float64 tensors; the network is evaluated
functionally over them so the trainer owns every update.
"""
import logging
import math
import threading
from collections import OrderedDict

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from torch.func import functional_call

from mixitse.config import StftConfig
from mixitse.dsp import Spectrogram, analysis_window
from mixitse.exceptions import MissingForwardContext, NonFiniteActivation, ShapeMismatch

logger = logging.getLogger(__name__)

DTYPE = torch.float64
NUM_BINS = StftConfig().num_bins
SPECTRAL_SCALE = float(np.sqrt(np.sum(analysis_window(StftConfig()) ** 2)))


def padded_bins(cfg, bins=NUM_BINS):
  """Frequency bins after zero-padding to a multiple of 2 ** enc_depth."""
  step = 2 ** cfg.enc_depth
  return -(-bins // step) * step


class ConvLevel(nn.Module):
  """3x3 convolution over (frequency, time), ELU, per-channel normalization."""

  def __init__(self, in_channels, out_channels, stride=1, transpose=False):
    super(ConvLevel, self).__init__()
    conv_class = nn.ConvTranspose2d if transpose else nn.Conv2d
    self.conv = conv_class(in_channels, out_channels, 3, stride=(stride, 1), padding=1)
    self.norm = nn.GroupNorm(out_channels, out_channels)

  def forward(self, x, output_size=None):
    if output_size is not None:
      x = self.conv(x, output_size=output_size)
    else:
      x = self.conv(x)
    return self.norm(F.elu(x))


class TemporalBlock(nn.Module):
  def __init__(self, features, hidden, dilation):
    super(TemporalBlock, self).__init__()
    self.in_conv = nn.Conv1d(features, hidden, 1)
    self.in_norm = nn.GroupNorm(hidden, hidden)
    self.depthwise = nn.Conv1d(hidden, hidden, 3, dilation=dilation, padding=dilation, groups=hidden)
    self.depthwise_norm = nn.GroupNorm(hidden, hidden)
    self.out_conv = nn.Conv1d(hidden, features, 1)

  def forward(self, x):
    y = self.in_norm(F.elu(self.in_conv(x)))
    y = self.depthwise_norm(F.elu(self.depthwise(y)))
    return x + self.out_conv(y)


class EnhancementNet(nn.Module):
  def __init__(self, cfg):
    super(EnhancementNet, self).__init__()
    channels = cfg.base_channels
    self.cfg = cfg
    self.stem = ConvLevel(2, channels)
    self.down = nn.ModuleList([ConvLevel(channels, channels, stride=2) for _ in range(cfg.enc_depth)])
    bottleneck = channels * (padded_bins(cfg) // 2 ** cfg.enc_depth)
    self.tcn = nn.Sequential(*[
      TemporalBlock(bottleneck, cfg.tcn_hidden, dilation)
      for _ in range(cfg.tcn_repeats)
      for dilation in cfg.dilations
    ])
    self.up = nn.ModuleList([ConvLevel(2 * channels, channels, stride=2, transpose=True) for _ in range(cfg.enc_depth)])
    self.head = nn.Conv2d(2 * channels + 2, 2 * cfg.num_outputs, 1)

  def forward(self, x):
    batch, _, bins, frames = x.shape
    x = F.pad(x / SPECTRAL_SCALE, (0, 0, 0, padded_bins(self.cfg, bins) - bins))

    h = self.stem(x)
    skips = [h]
    for level in self.down:
      h = level(h)
      skips.append(h)

    _, channels, reduced, _ = h.shape
    h = self.tcn(h.reshape(batch, channels * reduced, frames)).reshape(batch, channels, reduced, frames)

    for level, skip, target in zip(self.up, reversed(skips[1:]), reversed(skips[:-1])):
      h = level(torch.cat([h, skip], 1), output_size=list(target.shape[-2:]))

    out = self.head(torch.cat([h, skips[0], x], 1))[:, :, :bins]
    return out.reshape(batch, self.cfg.num_outputs, 2, bins, frames) * SPECTRAL_SCALE


_local = threading.local()


def network(cfg):
  """One module per config and thread; evaluation swaps the parameters in."""
  templates = getattr(_local, 'templates', None)
  if templates is None:
    templates = _local.templates = {}
  if cfg not in templates:
    net = EnhancementNet(cfg).to(DTYPE)
    for param in net.parameters():
      param.requires_grad_(False)
    templates[cfg] = net
  return templates[cfg]


def fan_in(module):
  receptive = int(np.prod(module.kernel_size))
  if isinstance(module, nn.ConvTranspose2d):
    return module.in_channels * receptive
  return module.in_channels // module.groups * receptive


class Parameters(OrderedDict):
  """Named float64 arrays of the enhancement network, in a fixed order."""

  def count(self):
    return sum(int(value.numel()) for value in self.values())

  def is_finite(self):
    return all(bool(torch.isfinite(value).all()) for value in self.values())

  def clone(self):
    return Parameters((name, value.detach().clone()) for name, value in self.items())

  def zeros_like(self):
    return Parameters((name, torch.zeros_like(value)) for name, value in self.items())

  def scaled(self, factor):
    return Parameters((name, value * factor) for name, value in self.items())


def init_params(cfg, seed):
  """Uniform weights with standard deviation 1/sqrt(fan_in); zero biases; unit norm gains."""
  net = network(cfg)
  generator = torch.Generator().manual_seed(int(seed))
  params = Parameters()
  for name, template in net.named_parameters():
    owner_name, kind = name.rsplit('.', 1)
    owner = net.get_submodule(owner_name)
    if isinstance(owner, nn.GroupNorm):
      value = torch.ones_like(template) if kind == 'weight' else torch.zeros_like(template)
    elif kind == 'bias':
      value = torch.zeros_like(template)
    else:
      bound = math.sqrt(3.0 / fan_in(owner))
      value = (torch.rand(template.shape, generator=generator, dtype=DTYPE) * 2.0 - 1.0) * bound
    params[name] = value
  logger.debug('Initialised %d parameters (%d tensors) with seed %d', params.count(), len(params), seed)
  return params


def parameter_count(cfg):
  """Closed form of the parameter count; asserted against the network in the tests."""
  c = cfg.base_channels
  hidden = cfg.tcn_hidden
  bottleneck = c * (padded_bins(cfg) // 2 ** cfg.enc_depth)
  stem = 2 * c * 9 + c + 2 * c
  down = cfg.enc_depth * (c * c * 9 + c + 2 * c)
  tcn = cfg.tcn_repeats * cfg.tcn_blocks * (2 * bottleneck * hidden + bottleneck + 9 * hidden)
  up = cfg.enc_depth * (2 * c * c * 9 + c + 2 * c)
  head = (2 * c + 2) * 2 * cfg.num_outputs + 2 * cfg.num_outputs
  return stem + down + tcn + up + head


def check_input(inputs, cfg):
  if inputs.dim() != 4 or inputs.shape[1] != 2 or inputs.shape[2] != NUM_BINS:
    raise ShapeMismatch('network input must be (batch, 2, %d, frames), got %s' % (NUM_BINS, tuple(inputs.shape)))
  if inputs.shape[3] < cfg.min_frames:
    raise ShapeMismatch('%d frames is below the receptive-field minimum of %d' % (inputs.shape[3], cfg.min_frames))


def run_network(params, inputs, cfg):
  """(batch, 2, F, K) mixture tensor -> (batch, M, 2, F, K) source estimates."""
  check_input(inputs, cfg)
  net = network(cfg)
  expected = [(name, tuple(value.shape)) for name, value in net.named_parameters()]
  if [(name, tuple(value.shape)) for name, value in params.items()] != expected:
    raise ShapeMismatch('parameters do not match the network for %r' % (cfg,))
  out = functional_call(net, dict(params), (inputs,), strict=True)
  if not bool(torch.isfinite(out).all()):
    raise NonFiniteActivation('network produced NaN or Inf activations')
  return out


def spectrogram_tensor(specs):
  """Stack Spectrograms into a (batch, 2, F, K) tensor of (Re, Im)."""
  return torch.from_numpy(np.stack([np.stack([spec.data.real, spec.data.imag]) for spec in specs]))


class ForwardContext(object):
  def __init__(self, leaves, output):
    self.leaves = leaves
    self.output = output


class SourceEstimates(object):
  """M complex estimates; `tensor` is (M, 2, F, K) with (Re, Im) on axis 1."""

  def __init__(self, tensor, length, stft_cfg, context=None):
    self.tensor = tensor.detach()
    self.length = length
    self.stft_cfg = stft_cfg
    self.context = context

  @property
  def num_outputs(self):
    return self.tensor.shape[0]

  @property
  def specs(self):
    data = self.tensor.numpy()
    return [Spectrogram(data[m, 0] + 1j * data[m, 1], self.length, self.stft_cfg) for m in range(self.num_outputs)]

  @property
  def speech(self):
    return self.specs[0]


def forward(params, mixture, cfg, record=False):
  """
  Evaluate the network on one mixture Spectrogram.

  With record=True the returned estimates carry the autograd context that
  backward() needs.
  """
  inputs = spectrogram_tensor([mixture])
  if record:
    leaves = Parameters((name, value.detach().clone().requires_grad_(True)) for name, value in params.items())
    out = run_network(leaves, inputs, cfg)
    return SourceEstimates(out[0], mixture.length, mixture.config, ForwardContext(leaves, out))
  with torch.no_grad():
    out = run_network(params, inputs, cfg)
  return SourceEstimates(out[0], mixture.length, mixture.config)


def backward(estimates, upstream):
  """
  Reverse-mode gradients of a scalar loss given dL/d(estimates).

  `upstream` is (M, 2, F, K) real, or (M, F, K) complex holding
  dL/dRe + 1j * dL/dIm. Returns a Parameters map of gradients.
  """
  context = estimates.context
  if context is None:
    raise MissingForwardContext('estimates were produced without record=True')
  upstream = torch.as_tensor(upstream)
  if upstream.is_complex():
    upstream = torch.stack([upstream.real, upstream.imag], 1)
  upstream = upstream.to(DTYPE)
  if tuple(upstream.shape) != tuple(estimates.tensor.shape):
    raise ShapeMismatch('upstream gradient of shape %s does not match estimates %s' % (
      tuple(upstream.shape), tuple(estimates.tensor.shape)))
  leaves = list(context.leaves.values())
  grads = torch.autograd.grad(context.output, leaves, grad_outputs=upstream[None], retain_graph=True, allow_unused=True)
  return Parameters(
    (name, grad if grad is not None else torch.zeros_like(leaf))
    for (name, leaf), grad in zip(context.leaves.items(), grads))
