"""
Training loop.

An epoch is `steps_per_epoch` freshly sampled batches. After each epoch the
model is checkpointed and scored on a fixed validation set: the validation
loss drives the plateau rule (lr halved after `plateau_patience` epochs
without improvement, counter reset after every halving) and the validation
SNR improvement picks the best checkpoint, ties going to the earliest epoch.
"""
import csv
import logging
import math
import os
from collections import OrderedDict

import numpy as np
import simplejson as json
import torch
from torch.optim.lr_scheduler import ReduceLROnPlateau

from mixitse.audio_io import AudioClip, Manifest
from mixitse.checkpoint import save_checkpoint
from mixitse.config import StftConfig
from mixitse.dsp import stft
from mixitse.enh_model import DTYPE, Parameters, init_params, run_network, spectrogram_tensor
from mixitse.exceptions import (
  ConfigError, DivergedLoss, IoFailure, NonFiniteActivation, NonFiniteGradient, ShapeMismatch, SilentSignal,
  WrongKind)
from mixitse.mixer import CLEAN_TARGET, MixtureSampler, MixtureSources, sample_example, signal_power
from mixitse.mixit_loss import batch_csm_loss, supervised_loss
from mixitse.postproc import enhance_clip, snri_db

logger = logging.getLogger(__name__)

VALIDATION_STREAM = 2
HOLDOUT_FRACTION = 0.1
SWEEP_FIELDS = ('max_clean', 'max_noisy', 'clean_ratio')


class TrainState(object):
  """Trainable leaves, the Adam optimizer and plateau scheduler driving them, and run counters."""

  def __init__(self, params, cfg):
    self.params = Parameters(
      (name, value.detach().clone().to(DTYPE).requires_grad_(True)) for name, value in params.items())
    self.cfg = cfg
    self.optimizer = torch.optim.Adam(
      list(self.params.values()), lr=cfg.lr, betas=(cfg.adam_beta1, cfg.adam_beta2), eps=cfg.adam_eps)
    self.scheduler = ReduceLROnPlateau(
      self.optimizer, mode='min', factor=cfg.lr_factor, patience=cfg.plateau_patience - 1, threshold=0.0)
    self.step = 0
    self.epoch = 0
    self.plateau_events = 0
    self.best_snri = None
    self.best_epoch = None
    self.best_checkpoint = None

  @property
  def lr(self):
    return float(self.optimizer.param_groups[0]['lr'])

  @property
  def epochs_since_improvement(self):
    return self.scheduler.num_bad_epochs

  def moments(self):
    """First and second Adam moments keyed like params; zeros before the first step."""
    first, second = Parameters(), Parameters()
    for name, param in self.params.items():
      state = self.optimizer.state.get(param, {})
      first[name] = state['exp_avg'].clone() if 'exp_avg' in state else torch.zeros_like(param.detach())
      second[name] = state['exp_avg_sq'].clone() if 'exp_avg_sq' in state else torch.zeros_like(param.detach())
    return first, second

  def snapshot(self):
    return self.params.clone()

  def plateau_step(self, val_loss):
    """Feed one epoch's validation loss to the plateau rule; True when lr was halved."""
    before = self.lr
    self.scheduler.step(val_loss)
    if self.lr < before:
      self.plateau_events += 1
      logger.info('Validation loss stalled for %d epochs, lr %.3g -> %.3g', self.cfg.plateau_patience, before, self.lr)
      return True
    return False


def adam_step(state, grads):
  if list(grads.keys()) != list(state.params.keys()):
    raise ShapeMismatch('gradient names do not match the parameters')
  for name, grad in grads.items():
    if tuple(grad.shape) != tuple(state.params[name].shape):
      raise ShapeMismatch('gradient for %s has shape %s, expected %s' % (
        name, tuple(grad.shape), tuple(state.params[name].shape)))
    if not bool(torch.isfinite(grad).all()):
      raise NonFiniteGradient('gradient for %s contains NaN or Inf' % name)
  for name, param in state.params.items():
    param.grad = grads[name].detach().to(DTYPE).clone()
  state.optimizer.step()
  state.optimizer.zero_grad(set_to_none=True)
  state.step += 1
  return state


def clip_gradients(grads, max_norm):
  """Rescale to a global L2 norm of at most max_norm; returns (grads, norm before clipping)."""
  norm = float(torch.linalg.vector_norm(torch.stack([torch.linalg.vector_norm(g) for g in grads.values()])))
  if not math.isfinite(norm):
    raise NonFiniteGradient('gradient norm is %r' % norm)
  if norm > max_norm:
    return grads.scaled(max_norm / norm), norm
  return grads, norm


def example_tensors(example, stft_cfg):
  """(2, F, K) mixture and (2, 2, F, K) references, all divided by the mixture RMS."""
  power = signal_power(example.input)
  if power == 0:
    raise SilentSignal('silent mixture in %r' % example)
  rms = math.sqrt(power)

  def _spec(clip):
    return stft(AudioClip(clip.samples / rms, clip.sample_rate), stft_cfg)

  return spectrogram_tensor([_spec(example.input)])[0], spectrogram_tensor([_spec(ref) for ref in example.refs])


def prepare_batch(examples, stft_cfg):
  pairs = [example_tensors(example, stft_cfg) for example in examples]
  return torch.stack([inputs for inputs, _ in pairs]), torch.stack([refs for _, refs in pairs])


def compute_loss(params, inputs, refs, model_cfg, train_cfg):
  estimates = run_network(params, inputs, model_cfg)
  if train_cfg.supervised:
    return supervised_loss(refs, estimates)
  return batch_csm_loss(refs, estimates, train_cfg.loss_mode)


def train_step(state, examples, model_cfg, train_cfg, stft_cfg):
  """One Adam update on a batch; returns the batch loss."""
  inputs, refs = prepare_batch(examples, stft_cfg)
  try:
    loss = compute_loss(state.params, inputs, refs, model_cfg, train_cfg).total
  except NonFiniteActivation as ex:
    raise DivergedLoss('step %d: %s' % (state.step + 1, ex))
  value = loss.detach().item()
  if not math.isfinite(value):
    raise DivergedLoss('step %d: training loss is %r' % (state.step + 1, value))

  grads = Parameters(zip(state.params.keys(), torch.autograd.grad(loss, list(state.params.values()))))
  grads, norm = clip_gradients(grads, train_cfg.grad_clip)
  if norm > train_cfg.grad_clip:
    logger.debug('Step %d: clipped gradient norm %.4g to %.4g', state.step + 1, norm, train_cfg.grad_clip)
  adam_step(state, grads)
  return value


def _load_manifest(path):
  return Manifest.load(path) if path else None


def hold_out(manifest, pool):
  """Split off the last HOLDOUT_FRACTION of a manifest (at least one clip); returns (train, held_out)."""
  if manifest is None or len(manifest) < 2:
    logger.warning('Only %d %s clips: validation shares them with training', len(manifest or []), pool)
    return manifest, manifest
  count = max(1, int(round(len(manifest) * HOLDOUT_FRACTION)))
  return Manifest(manifest.entries[:-count]), Manifest(manifest.entries[-count:])


class CorpusSplit(object):
  """Training and validation pools for one run."""

  def __init__(self, clean, noise, noisy, val_clean, val_noise):
    self.clean = clean
    self.noise = noise
    self.noisy = noisy
    self.val_clean = val_clean
    self.val_noise = val_noise

  def training_sources(self, sampler_cfg):
    return MixtureSources.from_manifests(self.clean, self.noise, self.noisy, sampler_cfg)


def split_corpus(manifests):
  """
  Load the manifests of a run. Explicit val_clean / val_noise manifests are
  used as they are; otherwise the tail of the clean and noise manifests is
  held out, so validation never sees a training clip.
  """
  clean = _load_manifest(manifests.clean)
  noise = _load_manifest(manifests.noise)
  if manifests.val_clean:
    val_clean = _load_manifest(manifests.val_clean)
  else:
    clean, val_clean = hold_out(clean, 'clean')
  if manifests.val_noise:
    val_noise = _load_manifest(manifests.val_noise)
  else:
    noise, val_noise = hold_out(noise, 'noise')
  return CorpusSplit(clean, noise, _load_manifest(manifests.noisy), val_clean, val_noise)


def build_validation_set(split, sampler_cfg, size):
  """Clean-target examples drawn from their own seeded stream; the same set every epoch."""
  cfg = sampler_cfg.replace(clean_ratio=1.0, simu_target='clean', max_clean=None, max_noisy=None)
  sources = MixtureSources.from_manifests(clean=split.val_clean, noise=split.val_noise, cfg=cfg)
  rng = np.random.default_rng([sampler_cfg.seed, VALIDATION_STREAM])
  return [sample_example(sources, cfg, rng) for _ in range(size)]


def validate_snri(params, val_set, model_cfg, stft_cfg=None, enhance=enhance_clip):
  """Mean SNR improvement of channel 1 over the unprocessed mixture, in dB."""
  if not val_set:
    raise WrongKind('validation needs at least one clean-target example')
  for example in val_set:
    if example.kind != CLEAN_TARGET:
      raise WrongKind('validation examples need a clean reference, got %s' % example.kind)
  scores = [
    snri_db(example.speech, enhance(params, example.input, model_cfg, stft_cfg), example.input)
    for example in val_set
  ]
  return float(np.mean(scores))


def validation_loss(params, val_set, model_cfg, train_cfg, stft_cfg):
  total = 0.0
  with torch.no_grad():
    for start in range(0, len(val_set), train_cfg.batch_size):
      chunk = val_set[start:start + train_cfg.batch_size]
      inputs, refs = prepare_batch(chunk, stft_cfg)
      total += float(compute_loss(params, inputs, refs, model_cfg, train_cfg).total) * len(chunk)
  return total / len(val_set)


class TrainResult(object):
  def __init__(self, best_checkpoint, metrics_path, best_epoch, best_snri, rows, step_losses):
    self.best_checkpoint = best_checkpoint
    self.metrics_path = metrics_path
    self.best_epoch = best_epoch
    self.best_snri = best_snri
    self.rows = rows
    self.step_losses = step_losses

  def __repr__(self):
    return 'TrainResult(best epoch %s, %s)' % (self.best_epoch, self.best_checkpoint)


def _sidecar(state, model_cfg, sampler_cfg, train_cfg, stft_cfg):
  return {
    'epoch': state.epoch,
    'step': state.step,
    'lr': state.lr,
    'model': model_cfg.to_dict(),
    'sampler': sampler_cfg.to_dict(),
    'train': train_cfg.to_dict(),
    'stft': stft_cfg.to_dict(),
  }


def _write_json(path, data):
  try:
    with open(path, 'w') as handle:
      handle.write(json.dumps(data, sort_keys=True, indent=2))
  except OSError as ex:
    raise IoFailure('cannot write %s: %s' % (path, ex))


def train(manifests, model_cfg, sampler_cfg, train_cfg, out_dir, stft_cfg=None):
  """
  Run a full training job into out_dir.

  Writes checkpoints/epoch_NNN.mxc (epoch 0 is the initialisation),
  metrics.jsonl with one {epoch, train_loss, val_loss, val_snri_db, lr} row
  per epoch and best.json. Returns a TrainResult.
  """
  stft_cfg = stft_cfg or StftConfig()
  torch.use_deterministic_algorithms(True)
  checkpoint_dir = os.path.join(out_dir, 'checkpoints')
  try:
    os.makedirs(checkpoint_dir, exist_ok=True)
  except OSError as ex:
    raise IoFailure('cannot create %s: %s' % (checkpoint_dir, ex))

  split = split_corpus(manifests)
  sampler = MixtureSampler(split.training_sources(sampler_cfg), sampler_cfg)
  val_set = build_validation_set(split, sampler_cfg, train_cfg.val_size)
  state = TrainState(init_params(model_cfg, train_cfg.seed), train_cfg)

  def _checkpoint(name):
    path = os.path.join(checkpoint_dir, name)
    return save_checkpoint(state.snapshot(), path, _sidecar(state, model_cfg, sampler_cfg, train_cfg, stft_cfg))

  state.best_checkpoint = _checkpoint('epoch_000.mxc')
  state.best_epoch = 0
  metrics_path = os.path.join(out_dir, 'metrics.jsonl')
  rows = []
  step_losses = []
  logger.info(
    'Training %d parameters for %d epochs x %d steps (batch %d, lr %g)',
    state.params.count(), train_cfg.epochs, train_cfg.steps_per_epoch, train_cfg.batch_size, train_cfg.lr)

  try:
    metrics = open(metrics_path, 'w')
  except OSError as ex:
    raise IoFailure('cannot write %s: %s' % (metrics_path, ex))
  with metrics:
    for epoch in range(1, train_cfg.epochs + 1):
      state.epoch = epoch
      lr = state.lr
      losses = []
      for _ in range(train_cfg.steps_per_epoch):
        try:
          losses.append(train_step(state, sampler.batch(train_cfg.batch_size), model_cfg, train_cfg, stft_cfg))
        except (DivergedLoss, NonFiniteGradient):
          dump = os.path.join(out_dir, 'diverged.mxc')
          save_checkpoint(state.snapshot(), dump, _sidecar(state, model_cfg, sampler_cfg, train_cfg, stft_cfg))
          logger.error('Training diverged at epoch %d step %d, state dumped to %s', epoch, state.step + 1, dump)
          raise
        if state.step % train_cfg.log_every == 0:
          logger.debug('Epoch %d step %d: loss %.5f', epoch, state.step, losses[-1])
      step_losses.extend(losses)

      params = state.snapshot()
      val_loss = validation_loss(params, val_set, model_cfg, train_cfg, stft_cfg)
      val_snri = validate_snri(params, val_set, model_cfg, stft_cfg)
      row = OrderedDict([
        ('epoch', epoch),
        ('train_loss', float(np.mean(losses))),
        ('val_loss', val_loss),
        ('val_snri_db', val_snri),
        ('lr', lr),
      ])
      rows.append(row)
      metrics.write(json.dumps(row) + '\n')
      metrics.flush()

      checkpoint = _checkpoint('epoch_%03d.mxc' % epoch)
      if state.best_snri is None or val_snri > state.best_snri:
        state.best_snri = val_snri
        state.best_epoch = epoch
        state.best_checkpoint = checkpoint
      logger.info(
        'Epoch %d: train loss %.5f, val loss %.5f, val SNRi %.2f dB, lr %g',
        epoch, row['train_loss'], val_loss, val_snri, lr)
      state.plateau_step(val_loss)

  _write_json(os.path.join(out_dir, 'best.json'), {
    'epoch': state.best_epoch,
    'checkpoint': os.path.relpath(state.best_checkpoint, out_dir),
    'val_snri_db': state.best_snri,
  })
  logger.info('Best checkpoint: %s (epoch %d)', state.best_checkpoint, state.best_epoch)
  return TrainResult(state.best_checkpoint, metrics_path, state.best_epoch, state.best_snri, rows, step_losses)


def train_run(run_cfg, out_dir):
  """train() over a RunConfig, echoing the resolved config next to the outputs."""
  try:
    os.makedirs(out_dir, exist_ok=True)
  except OSError as ex:
    raise IoFailure('cannot create %s: %s' % (out_dir, ex))
  try:
    with open(os.path.join(out_dir, 'resolved_config.json'), 'w') as handle:
      handle.write(run_cfg.to_json())
  except OSError as ex:
    raise IoFailure('cannot write resolved config to %s: %s' % (out_dir, ex))
  return train(run_cfg.manifests, run_cfg.model, run_cfg.sampler, run_cfg.train, out_dir, run_cfg.stft)


def sweep(run_cfg, field, values, out_dir):
  """One training run per value of a sampler field, all with the same seeds; writes sweep.csv."""
  if field not in SWEEP_FIELDS:
    raise ConfigError('sweep field must be one of %s, got %r' % (', '.join(SWEEP_FIELDS), field))
  results = []
  for value in values:
    sampler_cfg = run_cfg.sampler.replace(**{field: value})
    run_dir = os.path.join(out_dir, '%s_%s' % (field, value))
    logger.info('Sweep run %s = %s into %s', field, value, run_dir)
    result = train_run(run_cfg.replace(sampler=sampler_cfg), run_dir)
    results.append((value, result))

  path = os.path.join(out_dir, 'sweep.csv')
  try:
    with open(path, 'w', newline='') as handle:
      writer = csv.writer(handle)
      writer.writerow(['value', 'best_epoch', 'best_val_snri_db', 'best_checkpoint'])
      for value, result in results:
        writer.writerow([value, result.best_epoch, result.best_snri, os.path.relpath(result.best_checkpoint, out_dir)])
  except OSError as ex:
    raise IoFailure('cannot write %s: %s' % (path, ex))
  return path, results
