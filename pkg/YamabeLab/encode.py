import json
import struct

import numpy as np
from bitarray import bitarray

from . import cfg
from .exceptions import EncodeError
from .grids import SampledField


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def descriptor(field, key=None):
    if not isinstance(field, SampledField):
        raise TypeError
    return {'domain': field.domain.descriptor(),
            'geometry': field.geometry,
            'shape': list(field.shape),
            'diagnostics': _plain(field.diagnostics),
            'key': _plain(key)}


def header(n, desc_bytes):
    if not isinstance(n, int) or not isinstance(desc_bytes, bytes):
        raise TypeError
    if n > 0xFFFF or len(desc_bytes) > 0xFFFFFFFF:
        raise EncodeError
    return struct.pack(cfg.FIELD_HEADER, cfg.FIELD_MAGIC, cfg.FIELD_FORMAT_VERSION, n,
                       len(desc_bytes))


def flags(excised, fixed):
    bits = bitarray(endian='little')
    bits.extend(np.ravel(excised).astype(bool).tolist())
    bits.extend(np.ravel(fixed).astype(bool).tolist())
    return bits.tobytes()


def field_record(field, key=None):
    """
    Bytes of a field record: header, JSON descriptor, coordinate blocks,
    samples and packed node flags.

    :param key: JSON-compatible data stored with the descriptor, used by the
        cache to match solver parameters.
    """
    desc = descriptor(field, key)
    try:
        desc_bytes = json.dumps(desc, sort_keys=True, separators=(',', ':')).encode('utf-8')
    except (TypeError, ValueError) as error:
        raise EncodeError(str(error))
    chain = bytearray(header(int(field.n), desc_bytes))
    chain.extend(desc_bytes)
    for c in field.coords:
        chain.extend(np.asarray(c, dtype='<f8').tobytes())
    chain.extend(np.ascontiguousarray(field.values, dtype='<f8').tobytes())
    chain.extend(flags(field.excised, field.fixed))
    return bytes(chain)
