import hashlib
import logging
import pathlib
from datetime import datetime

import numpy as np


def makeSimpleLogger(name, level=logging.INFO):
    logger = logging.getLogger(name)
    if logger.handlers:  # prevent multiple handlers
        return logger

    logger.setLevel(level)
    ch = logging.StreamHandler()
    fmt = '[%(asctime)s] - %(levelname)8s - ' '%(name)14s - ' '%(filename)16s:%(lineno)-4d - ' '%(message)s'
    formatter = logging.Formatter(fmt)
    ch.setFormatter(formatter)
    logger.addHandler(ch)
    return logger


log = makeSimpleLogger('redlab')
logd = log.getChild('data')


def set_log_level(level):
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())

    log.setLevel(level)


def isoformat(datetime_instance, timespec='auto'):
    kwargs = {}
    if isinstance(datetime_instance, datetime):
        # don't pass timespec if type is not date not datetime
        kwargs['timespec'] = timespec

    return datetime_instance.isoformat(**kwargs).replace('.', ',').replace('+00:00', 'Z')


def derive_rng(seed, *keys):
    """Generator seeded from ``(seed, *keys)``.

    Every random draw in the package goes through here so that parallel and
    serial schedules of the same jobs see the same streams.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed, *keys):
    return int(derive_rng(seed, *keys).integers(0, 2**63 - 1))


def file_digest(path):
    h = hashlib.sha256()
    with open(pathlib.Path(path), 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            h.update(chunk)

    return h.hexdigest()
