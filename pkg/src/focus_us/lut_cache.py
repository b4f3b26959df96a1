"""On-disk cache of Q tables keyed by their content fingerprint."""

import logging
import os
import threading

import numpy as np

from .exceptions import CacheCollisionError
from .fdbf import build_q_table, lut_fingerprint
from .io import load_q_table, read_q_header, save_q_table

logger = logging.getLogger(__name__)

KEY_CHARS = 16


class LutCache:
    """Directory of ``q_<key>.qtb`` files.

    The file name uses the first :data:`KEY_CHARS` hex digits of the table
    fingerprint.  A file whose stored fingerprint or parameters differ from
    the request is a collision and raises :class:`CacheCollisionError`
    instead of being reused.
    """

    def __init__(self, directory):
        self.directory = directory
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def path_for(self, fingerprint):
        return os.path.join(self.directory, f"q_{fingerprint[:KEY_CHARS]}.qtb")

    def _check(self, path, fingerprint, theta, band, n1, n2, n_grid, fs, n_samples):
        h = read_q_header(path)
        same = (
            h["fingerprint"] == fingerprint
            and h["theta"] == theta
            and h["band_start"] == int(band[0])
            and h["K"] == len(band)
            and (h["n1"], h["n2"], h["n_grid"], h["n_samples"]) == (n1, n2, n_grid, n_samples)
            and h["fs"] == fs
            and not h["mf_integrated"]
        )
        if not same:
            raise CacheCollisionError(
                f"{path}: cache entry was built from different parameters "
                f"(stored fingerprint {h['fingerprint'][:KEY_CHARS]}..., requested {fingerprint[:KEY_CHARS]}...)"
            )

    def lookup(self, geometry, theta, band, n1, n2, n_grid, fs, n_samples):
        """Return the cached table or ``None``."""
        fp = lut_fingerprint(geometry, theta, band, n1, n2, n_grid, fs, n_samples)
        path = self.path_for(fp)
        if not os.path.exists(path):
            with self._lock:
                self.misses += 1
            return None
        self._check(path, fp, theta, band, n1, n2, n_grid, fs, n_samples)
        with self._lock:
            self.hits += 1
        return load_q_table(path, geometry)

    def store(self, q):
        """Write ``q`` (without the matched filter) and return the file path."""
        os.makedirs(self.directory, exist_ok=True)
        path = self.path_for(q.fingerprint)
        tmp = f"{path}.tmp{os.getpid()}.{threading.get_ident()}"
        save_q_table(q, tmp)
        os.replace(tmp, path)
        return path

    def get_or_build(self, geometry, theta, band, n1, n2, n_grid, fs, n_samples, rebuild=False):
        """Return ``(table, built)``; builds and stores on a miss or when ``rebuild``."""
        if not rebuild:
            q = self.lookup(geometry, theta, band, n1, n2, n_grid, fs, n_samples)
            if q is not None:
                return q, False
        q = build_q_table(geometry, theta, np.asarray(band), n1, n2, n_grid, fs, n_samples)
        self.store(q)
        return q, True
