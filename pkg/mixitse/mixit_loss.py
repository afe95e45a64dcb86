"""
Constrained mixture-invariant complex spectral mapping loss.

The estimates S (M x F x K, complex) are remixed by a binary 2 x M matrix A
with one-hot columns and compared to the references X = [x1; x2] with an L1
term on the real parts, the imaginary parts and the magnitudes (|X| against
A|S|). Channel 1 always belongs to the speech row, which may also take one
more channel; the noise row takes the rest and is never empty.

Each L1 term is the mean over the 2 x F x K entries. In per_term mode every
term is minimized over A on its own; in joint mode one A minimizes the sum.
Ties go to the earliest matrix in enumeration order and gradients flow through
the selected matrix only.
"""
import numpy as np
import torch

from mixitse.dsp import Spectrogram
from mixitse.exceptions import ConfigError, ShapeMismatch, UnsupportedOutputs

PER_TERM = 'per_term'
JOINT = 'joint'
MODES = (PER_TERM, JOINT)
TERMS = ('re', 'im', 'mag')

SUPPORTED_OUTPUTS = (2, 3)


class MixingMatrix(object):
  def __init__(self, entries):
    entries = np.array(entries, dtype=np.int64)
    if entries.ndim != 2 or entries.shape[0] != 2:
      raise ShapeMismatch('a mixing matrix is 2 x M, got shape %s' % (entries.shape,))
    if not np.all((entries == 0) | (entries == 1)) or not np.all(entries.sum(axis=0) == 1):
      raise ShapeMismatch('every mixing matrix column must be one-hot: %s' % entries.tolist())
    entries.setflags(write=False)
    self.entries = entries

  @property
  def num_outputs(self):
    return self.entries.shape[1]

  @property
  def speech_channels(self):
    return tuple(int(m) + 1 for m in np.flatnonzero(self.entries[0]))

  @property
  def noise_channels(self):
    return tuple(int(m) + 1 for m in np.flatnonzero(self.entries[1]))

  def tensor(self):
    return torch.from_numpy(self.entries.astype(np.float64))

  def to_list(self):
    return self.entries.tolist()

  def __eq__(self, other):
    return isinstance(other, MixingMatrix) and np.array_equal(self.entries, other.entries)

  def __ne__(self, other):
    return not self == other

  def __hash__(self):
    return hash(self.entries.tobytes() + bytes(self.entries.shape))

  def __str__(self):
    return str(self.to_list())

  def __repr__(self):
    return 'MixingMatrix(%s)' % self.to_list()


def enumerate_allowed(num_outputs):
  """Speech row = channel 1 alone or with one other channel; noise row = the rest, non-empty."""
  if num_outputs not in SUPPORTED_OUTPUTS:
    raise UnsupportedOutputs('mixing matrices are defined for %s outputs, not %r' % (
      ' or '.join(str(m) for m in SUPPORTED_OUTPUTS), num_outputs))
  allowed = []
  for extra in [()] + [(m,) for m in range(1, num_outputs)]:
    speech = (0,) + extra
    noise = [m for m in range(num_outputs) if m not in speech]
    if not noise:
      continue
    entries = np.zeros((2, num_outputs), dtype=np.int64)
    entries[0, list(speech)] = 1
    entries[1, noise] = 1
    allowed.append(MixingMatrix(entries))
  return allowed


def _as_tensor(values):
  if isinstance(values, torch.Tensor):
    return values.to(torch.float64)
  return torch.as_tensor(np.asarray(values, dtype=np.float64))


def l1_term(refs, ests, matrix):
  """Mean |refs - A ests| over the 2 x F x K entries."""
  refs = _as_tensor(refs)
  ests = _as_tensor(ests)
  if refs.dim() != 3 or refs.shape[0] != 2 or ests.dim() != 3 or ests.shape[1:] != refs.shape[1:]:
    raise ShapeMismatch('refs %s and ests %s do not line up' % (tuple(refs.shape), tuple(ests.shape)))
  if ests.shape[0] != matrix.num_outputs:
    raise ShapeMismatch('%d estimates for a 2 x %d mixing matrix' % (ests.shape[0], matrix.num_outputs))
  mixed = torch.einsum('im,mfk->ifk', matrix.tensor(), ests)
  return (refs - mixed).abs().mean()


def _magnitude(ri):
  return torch.complex(ri.select(-3, 0), ri.select(-3, 1)).abs()


def per_matrix_terms(ref_ri, est_ri, matrices):
  """
  L1 values of every term under every matrix.

  ref_ri is (B, 2, 2, F, K) and est_ri is (B, M, 2, F, K), with (Re, Im) on
  axis 2. Returns (B, 3, len(matrices)) ordered (re, im, mag).
  """
  if ref_ri.dim() != 5 or est_ri.dim() != 5 or ref_ri.shape[1:3] != (2, 2) or est_ri.shape[2] != 2:
    raise ShapeMismatch('unexpected loss input shapes %s and %s' % (tuple(ref_ri.shape), tuple(est_ri.shape)))
  if ref_ri.shape[0] != est_ri.shape[0] or ref_ri.shape[3:] != est_ri.shape[3:]:
    raise ShapeMismatch('references %s and estimates %s disagree' % (tuple(ref_ri.shape), tuple(est_ri.shape)))
  stacked = torch.stack([matrix.tensor() for matrix in matrices]).to(est_ri.dtype)
  mixed = torch.einsum('aim,bmcfk->baicfk', stacked, est_ri)
  re = (ref_ri[:, None, :, 0] - mixed[:, :, :, 0]).abs().mean(dim=(2, 3, 4))
  im = (ref_ri[:, None, :, 1] - mixed[:, :, :, 1]).abs().mean(dim=(2, 3, 4))
  mixed_mag = torch.einsum('aim,bmfk->baifk', stacked, _magnitude(est_ri))
  mag = (_magnitude(ref_ri)[:, None] - mixed_mag).abs().mean(dim=(2, 3, 4))
  return torch.stack([re, im, mag], 1)


class LossBreakdown(object):
  """Per-example term values (B, 3) and the chosen matrix for each term."""

  def __init__(self, terms, chosen=None):
    self.terms = terms
    self.chosen = chosen

  @property
  def total(self):
    return self.terms.sum(dim=1).mean()

  @property
  def re_term(self):
    return self.terms[:, 0].mean()

  @property
  def im_term(self):
    return self.terms[:, 1].mean()

  @property
  def mag_term(self):
    return self.terms[:, 2].mean()

  @property
  def chosen_A(self):
    """Matrices picked for the first example, one per term (identical in joint mode)."""
    return self.chosen[0] if self.chosen else None

  def to_dict(self):
    return {
      'total': float(self.total),
      're_term': float(self.re_term),
      'im_term': float(self.im_term),
      'mag_term': float(self.mag_term),
    }


def batch_csm_loss(ref_ri, est_ri, mode=PER_TERM):
  if mode not in MODES:
    raise ConfigError('loss mode must be one of %s, got %r' % (', '.join(MODES), mode))
  matrices = enumerate_allowed(est_ri.shape[1])
  per_a = per_matrix_terms(ref_ri, est_ri, matrices)
  if mode == PER_TERM:
    index = per_a.argmin(dim=-1)
  else:
    index = per_a.sum(dim=1).argmin(dim=-1)[:, None].expand(-1, len(TERMS))
  terms = per_a.gather(-1, index[..., None]).squeeze(-1)
  chosen = [[matrices[i] for i in row] for row in index.tolist()]
  return LossBreakdown(terms, chosen)


def supervised_loss(ref_ri, est_ri):
  """Channel 1 regressed straight onto the clean reference with the same three L1 terms."""
  speech = est_ri[:, 0]
  clean = ref_ri[:, 0]
  re = (clean[:, 0] - speech[:, 0]).abs().mean(dim=(1, 2))
  im = (clean[:, 1] - speech[:, 1]).abs().mean(dim=(1, 2))
  mag = (_magnitude(clean) - _magnitude(speech)).abs().mean(dim=(1, 2))
  return LossBreakdown(torch.stack([re, im, mag], 1))


def _ri(values):
  if isinstance(values, Spectrogram):
    return torch.from_numpy(np.stack([values.data.real, values.data.imag]))
  if isinstance(values, torch.Tensor):
    return values.to(torch.float64)
  values = np.asarray(values)
  if np.iscomplexobj(values):
    return torch.from_numpy(np.stack([values.real, values.imag], axis=-3).astype(np.float64))
  return torch.from_numpy(values.astype(np.float64))


def csm_loss(ref_specs, est, mode=PER_TERM):
  """
  Loss for one example.

  ref_specs is the pair (x1, x2) as Spectrograms or complex F x K arrays; est
  is SourceEstimates, an (M, 2, F, K) real tensor, or an M x F x K complex
  array.
  """
  ref_ri = torch.stack([_ri(spec) for spec in ref_specs])
  if hasattr(est, 'tensor'):
    est_ri = est.tensor.to(torch.float64)
  else:
    est_ri = _ri(est)
  if est_ri.dim() != 4 or est_ri.shape[1] != 2:
    raise ShapeMismatch('estimates must be (M, 2, F, K), got %s' % (tuple(est_ri.shape),))
  return batch_csm_loss(ref_ri[None], est_ri[None], mode)
