"""
MXC1 checkpoints.

    magic "MXC1" | version u32 | tensor count u32 |
    per tensor: name length u16, UTF-8 name, rank u8, dims u32 x rank,
                little-endian float64 data

All integers are little-endian. A JSON sidecar next to the checkpoint
(`<path>.json`) carries the configs and counters of the run that wrote it.
"""
import logging
import os
import struct

import numpy as np
import simplejson as json
import torch

from mixitse.enh_model import Parameters
from mixitse.exceptions import CorruptFile, IoFailure

logger = logging.getLogger(__name__)

MAGIC = b'MXC1'
VERSION = 1


def encode_checkpoint(params):
  chunks = [MAGIC, struct.pack('<II', VERSION, len(params))]
  for name, value in params.items():
    encoded_name = name.encode('utf-8')
    array = value.detach().cpu().numpy()
    chunks.append(struct.pack('<H', len(encoded_name)))
    chunks.append(encoded_name)
    chunks.append(struct.pack('<B', array.ndim))
    chunks.append(struct.pack('<%dI' % array.ndim, *array.shape))
    chunks.append(np.ascontiguousarray(array, dtype='<f8').tobytes())
  return b''.join(chunks)


class _Reader(object):
  def __init__(self, payload):
    self.payload = payload
    self.offset = 0

  def take(self, size):
    if self.offset + size > len(self.payload):
      raise CorruptFile('checkpoint truncated at byte %d' % self.offset)
    chunk = self.payload[self.offset:self.offset + size]
    self.offset += size
    return chunk

  def unpack(self, fmt):
    return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(payload):
  reader = _Reader(payload)
  if reader.take(4) != MAGIC:
    raise CorruptFile('not an MXC1 checkpoint')
  version, count = reader.unpack('<II')
  if version != VERSION:
    raise CorruptFile('unsupported checkpoint version %d' % version)
  params = Parameters()
  for _ in range(count):
    (name_len,) = reader.unpack('<H')
    name = reader.take(name_len).decode('utf-8')
    (rank,) = reader.unpack('<B')
    dims = reader.unpack('<%dI' % rank)
    size = int(np.prod(dims)) if rank else 1
    data = np.frombuffer(reader.take(8 * size), dtype='<f8').astype(np.float64).reshape(dims)
    params[name] = torch.from_numpy(data)
  if reader.offset != len(payload):
    raise CorruptFile('%d trailing bytes after the last tensor' % (len(payload) - reader.offset))
  return params


def sidecar_path(path):
  return path + '.json'


def save_checkpoint(params, path, sidecar=None):
  try:
    with open(path, 'wb') as handle:
      handle.write(encode_checkpoint(params))
    if sidecar is not None:
      with open(sidecar_path(path), 'w') as handle:
        handle.write(json.dumps(dict(sidecar, format='MXC1'), sort_keys=True, indent=2))
  except OSError as ex:
    raise IoFailure('cannot write checkpoint %s: %s' % (path, ex))
  logger.debug('Saved checkpoint %s (%d tensors)', path, len(params))
  return path


def load_checkpoint(path):
  try:
    with open(path, 'rb') as handle:
      payload = handle.read()
  except OSError as ex:
    raise IoFailure('cannot read checkpoint %s: %s' % (path, ex))
  return decode_checkpoint(payload)


def load_sidecar(path):
  side = sidecar_path(path)
  if not os.path.exists(side):
    return None
  try:
    with open(side, 'r') as handle:
      return json.load(handle)
  except (OSError, json.JSONDecodeError) as ex:
    raise CorruptFile('bad checkpoint sidecar %s: %s' % (side, ex))
