import json
import struct

import numpy as np
from bitarray import bitarray

from . import cfg
from .exceptions import DecodeError, InvalidDomain, VersionMismatch
from .grids import DomainSpec, SampledField


HEADER_SIZE = struct.calcsize(cfg.FIELD_HEADER)


def header(chain):
    """``(version, n, descriptor_length)`` of a field record."""
    if not isinstance(chain, bytes):
        raise TypeError
    if len(chain) < HEADER_SIZE:
        raise DecodeError('record shorter than its header')
    magic, version, n, length = struct.unpack_from(cfg.FIELD_HEADER, chain)
    if magic != cfg.FIELD_MAGIC:
        raise DecodeError('bad magic {!r}'.format(magic))
    if version != cfg.FIELD_FORMAT_VERSION:
        raise VersionMismatch('record version {}, expected {}'.format(
            version, cfg.FIELD_FORMAT_VERSION))
    return version, n, length


def descriptor(chain):
    _, n, length = header(chain)
    raw = chain[HEADER_SIZE:HEADER_SIZE + length]
    if len(raw) != length:
        raise DecodeError('truncated descriptor')
    try:
        desc = json.loads(raw.decode('utf-8'))
    except (UnicodeDecodeError, ValueError) as error:
        raise DecodeError(str(error))
    if desc.get('domain', {}).get('background', {}).get('n') != n:
        raise DecodeError('descriptor dimension does not match the header')
    return desc


def flags(chain, count):
    if not isinstance(chain, bytes):
        raise TypeError
    if len(chain) != (2 * count + 7) // 8:
        raise DecodeError('flag block has {} bytes for {} nodes'.format(len(chain), count))
    bits = bitarray(endian='little')
    bits.frombytes(chain)
    mask = np.array(bits.tolist()[:2 * count], dtype=bool)
    return mask[:count], mask[count:]


def field_record(chain):
    """
    Field and descriptor of a field record.

    :rtype: ``(SampledField, dict)``

    raises:
        * VersionMismatch: For another format version.
        * DecodeError: For a bad magic, truncated or inconsistent blocks.
    """
    desc = descriptor(chain)
    _, _, length = header(chain)
    shape = tuple(int(k) for k in desc['shape'])
    if not shape or any(k < 1 for k in shape):
        raise DecodeError('bad grid shape {}'.format(shape))
    count = int(np.prod(shape))
    pos = HEADER_SIZE + length
    blocks = []
    for size in shape + (count,):
        end = pos + 8 * size
        if end > len(chain):
            raise DecodeError('truncated sample block')
        blocks.append(np.frombuffer(chain[pos:end], dtype='<f8').astype(float))
        pos = end
    excised, fixed = flags(chain[pos:], count)
    try:
        domain = DomainSpec.from_descriptor(desc['domain'])
    except (KeyError, TypeError, ValueError, InvalidDomain) as error:
        raise DecodeError('bad domain descriptor: {}'.format(error))
    if domain.symmetry != desc['geometry']:
        raise DecodeError('geometry {!r} does not match the domain'.format(desc['geometry']))
    coords = tuple(blocks[:-1])
    field = SampledField(domain, coords, blocks[-1].reshape(shape), excised.reshape(shape),
                         fixed.reshape(shape), desc.get('diagnostics') or {})
    return field, desc
