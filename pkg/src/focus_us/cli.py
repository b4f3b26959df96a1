"""Command-line experiment driver.

``focus-us run --config exp.cfg --out results/`` synthesizes the configured
scene once, beamforms every scan line with each requested method, and writes
beam lines, B-mode images, PSF and complexity CSVs plus a manifest.
``focus-us build-luts`` only populates the Q-table cache.

Exit codes: 0 success, 1 configuration error, 2 numerical failure (non-finite
values), 3 I/O error (including LUT cache collisions).
"""

import argparse
import logging
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import load_config
from .exceptions import CacheCollisionError, ConfigError, InvalidParameterError, MeasurementError, NumericalError
from .fdbf import build_q_table, compute_channel_spectra, focus_beamform, integrate_mf, mf_spectrum, reconstruct_time
from .imaging import scan_convert, write_image_csv, write_pgm
from .io import save_beam_line, save_frame
from .lut_cache import LutCache
from .metrics import complexity_model, measure_axial_psf, measure_lateral_psf, scaled_sizes, write_complexity_csv, write_psf_csv
from .scene import synthesize_channels, uniform_linear_array
from .tdbf import beamform_post_compression, beamform_pre_compression, compress_channels
from .validation import check_finite
from .waveform import make_linear_fm

logger = logging.getLogger("focus_us")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class Manifest:
    """Tab-separated record of every output file; appends are serialized."""

    def __init__(self, path, config_digest):
        self.path = path
        self.digest = config_digest
        self._lock = threading.Lock()
        with open(path, "w") as fh:
            fh.write("file\tconfig_sha256\tmethod\tparams\n")

    def add(self, file, method, **params):
        rel = os.path.relpath(file, os.path.dirname(self.path))
        text = ";".join(f"{k}={v}" for k, v in params.items() if v is not None)
        with self._lock, open(self.path, "a") as fh:
            fh.write(f"{rel}\t{self.digest}\t{method}\t{text}\n")


def setup(cfg):
    pulse = make_linear_fm(cfg.f0, cfg.B, cfg.Tp, cfg.fs, cfg.window, cfg.taper)
    geometry = uniform_linear_array(cfg.M, cfg.pitch, cfg.c)
    frame = synthesize_channels(geometry, cfg.phantom, pulse, cfg.fs, cfg.T, cfg.noise_rms, cfg.seed)
    return pulse, geometry, frame


def _cache(cfg, out):
    return LutCache(cfg.lut_cache or os.path.join(out, "lut_cache"))


def _tables_for_theta(cache, geometry, theta, spectra_by_window, rebuild):
    """Q tables for every window at one angle, built once at the widest window."""
    order = sorted(spectra_by_window, key=lambda w: -(w[1] + w[2]))
    widest = order[0]
    sp = spectra_by_window[widest]
    out, log = {}, []
    t0 = time.perf_counter()
    big, built = cache.get_or_build(geometry, theta, sp.band, widest[1], widest[2], sp.n_grid, sp.fs, sp.n_samples, rebuild)
    out[widest] = big
    log.append((widest, built, time.perf_counter() - t0, big.entries.nbytes))
    for w in order[1:]:
        t0 = time.perf_counter()
        spw = spectra_by_window[w]
        q = None if rebuild else cache.lookup(geometry, theta, spw.band, w[1], w[2], spw.n_grid, spw.fs, spw.n_samples)
        built = q is None
        if built:
            if w[1] > widest[1] or w[2] > widest[2]:
                q = build_q_table(geometry, theta, spw.band, w[1], w[2], spw.n_grid, spw.fs, spw.n_samples)
            else:
                q = big.subtable(spw.band, w[1], w[2], geometry)
            cache.store(q)
        out[w] = q
        log.append((w, built, time.perf_counter() - t0, q.entries.nbytes))
    return out, log


def _focus_spectra(cfg, frame, pulse):
    return {w: compute_channel_spectra(frame, pulse, cfg.band_threshold_db, w[1], w[2]) for w in cfg.windows()}


def build_luts(cfg, out, workers=1, rebuild=False, echo=print):
    """Populate the LUT cache for every (angle, window); returns ``(built, cached)`` counts."""
    pulse, geometry, frame = setup(cfg)
    spectra = _focus_spectra(cfg, frame, pulse)
    if any(sp.empty for sp in spectra.values()):
        raise NumericalError("no signal band found: the synthesized frame is all zeros")
    cache = _cache(cfg, out)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda th: _tables_for_theta(cache, geometry, th, spectra, rebuild), cfg.thetas))
    built = cached = 0
    for th, (_, log) in zip(cfg.thetas, results):
        for w, was_built, secs, nbytes in log:
            built += was_built
            cached += not was_built
            state = "built" if was_built else "cached"
            echo(f"theta={th:+.5f} n_q={w[0]} ({w[1]},{w[2]}) {state} in {secs:.3f} s, {nbytes} bytes")
    return built, cached


def _psf_reports(cfg, lines, method, n_q):
    fs = lines[0].fs
    P = cfg.fs / cfg.f_ref
    thetas = np.array([ln.theta for ln in lines])
    half = int(round(2 * cfg.psf_window_mm * 1e-3 / cfg.c * fs))
    reports = []
    for s in sorted(cfg.phantom.scatterers, key=lambda s: (s.r, s.theta)):
        centre = int(round(2 * s.r / cfg.c * fs))
        if centre >= lines[0].n_samples:
            continue
        line = lines[int(np.argmin(np.abs(thetas - s.theta)))]
        try:
            rep = measure_axial_psf(line, cfg.c, window=(centre - half, centre + half + 1), method=method)
        except MeasurementError as exc:
            logger.warning("axial PSF for r=%g failed: %s", s.r, exc)
            continue
        if len(lines) > 1:
            # neighbours within the axial window would otherwise share one profile
            gaps = [abs(o.theta - s.theta) for o in cfg.phantom.scatterers if o is not s and abs(o.r - s.r) * 1e3 <= cfg.psf_window_mm]
            span = None if not gaps or min(gaps) == 0 else (s.theta - min(gaps) / 2, s.theta + min(gaps) / 2)
            try:
                rep = rep.merge(measure_lateral_psf(lines, s.r * 1e3, cfg.c, method=method, theta_span=span))
            except MeasurementError as exc:
                logger.warning("lateral PSF for r=%g failed: %s", s.r, exc)
        reports.append(rep.merge(type(rep)(method=method, depth_mm=s.r * 1e3, n_q=n_q, P=P)))
    return reports


def _complexity_reports(cfg, spectra, log_base):
    reports = []
    for i, P in enumerate(cfg.P):
        N_s, N_h = scaled_sizes(P, cfg.T, cfg.f_ref, cfg.D)
        if cfg.complexity_N_h:
            N_h = cfg.complexity_N_h[i]
        for w in cfg.windows():
            K = cfg.complexity_K if cfg.complexity_K is not None else spectra[w].G + w[0] - 1
            reports.append(complexity_model(cfg.M, N_s, N_h, K, w[0], log_base, P=P))
    return reports


def run_experiment(cfg, out, workers=1, log_base=None, rebuild=False, echo=print):
    """Run every configured method; returns the list of files written."""
    if not cfg.methods:
        logger.warning("empty method list: nothing to do")
        return []
    log_base = log_base or cfg.log_base
    os.makedirs(out, exist_ok=True)
    manifest = Manifest(os.path.join(out, "manifest.tsv"), cfg.digest)
    files = []

    pulse, geometry, frame = setup(cfg)
    check_finite("channel data", frame.data)
    path = os.path.join(out, "channels.bin")
    save_frame(frame, path)
    manifest.add(path, "scene", M=cfg.M, N_s=frame.n_samples, fs=repr(cfg.fs), seed=cfg.seed)
    files.append(path)

    runs = []
    pool = ThreadPoolExecutor(max_workers=workers)
    try:
        if "pre" in cfg.methods:
            comp = compress_channels(frame, pulse)
            lines = list(pool.map(lambda th: beamform_pre_compression(frame, geometry, th, pulse, compressed=comp), cfg.thetas))
            runs.append(("pre", None, {}, lines))
        if "post" in cfg.methods:
            lines = list(pool.map(lambda th: beamform_post_compression(frame, geometry, th, pulse), cfg.thetas))
            runs.append(("post", None, {}, lines))
        spectra = _focus_spectra(cfg, frame, pulse)
        if "focus" in cfg.methods:
            if any(sp.empty for sp in spectra.values()):
                raise NumericalError("no signal band found: the synthesized frame is all zeros")
            cache = _cache(cfg, out)
            t0 = time.perf_counter()
            tables = list(pool.map(lambda th: _tables_for_theta(cache, geometry, th, spectra, rebuild)[0], cfg.thetas))
            echo(f"LUTs ready in {time.perf_counter() - t0:.2f} s ({cache.hits} cache hits, {cache.misses} misses)")
            for w in cfg.windows():
                sp = spectra[w]
                h = mf_spectrum(pulse, sp.n_grid)

                def one(i, sp=sp, h=h, w=w):
                    q = integrate_mf(tables[i][w], h)
                    return reconstruct_time(focus_beamform(sp, q), frame.n_samples)

                lines = list(pool.map(one, range(len(cfg.thetas))))
                runs.append(("focus", w[0], {"n1": w[1], "n2": w[2], "K": sp.band.size}, lines))
    finally:
        pool.shutdown()

    psf = []
    for method, n_q, extra, lines in runs:
        label = method if n_q is None else f"{method}_nq{n_q}"
        for ln in lines:
            check_finite(f"{label} beam line", ln.samples)
        ldir = os.path.join(out, "lines", label)
        os.makedirs(ldir, exist_ok=True)
        for i, ln in enumerate(lines):
            path = os.path.join(ldir, f"line_{i:03d}.bin")
            save_beam_line(ln, path)
            manifest.add(path, method, theta=repr(ln.theta), n_q=n_q, **extra)
            files.append(path)
        if len(lines) >= 2:
            image = scan_convert(lines, cfg.dynamic_range, cfg.pixel_pitch_mm, cfg.c)
            os.makedirs(os.path.join(out, "images"), exist_ok=True)
            for ext, writer in (("pgm", write_pgm), ("csv", write_image_csv)):
                path = os.path.join(out, "images", f"{label}.{ext}")
                writer(image, path)
                manifest.add(path, method, n_q=n_q, dynamic_range=cfg.dynamic_range, pixel_pitch_mm=cfg.pixel_pitch_mm)
                files.append(path)
        psf.extend(_psf_reports(cfg, lines, method, n_q))

    path = os.path.join(out, "psf.csv")
    write_psf_csv(psf, path)
    manifest.add(path, "psf", rows=len(psf))
    files.append(path)
    if cfg.P:
        path = os.path.join(out, "complexity.csv")
        write_complexity_csv(_complexity_reports(cfg, spectra, log_base), path)
        manifest.add(path, "complexity", log_base=log_base)
        files.append(path)
    files.append(manifest.path)
    return files


def build_parser():
    p = argparse.ArgumentParser(prog="focus-us", description=__doc__.split("\n\n")[0])
    p.add_argument("command", nargs="?", choices=("run", "build-luts"), default="run")
    p.add_argument("--config", required=True, help="experiment config file (key = value lines)")
    p.add_argument("--out", default="focus_out", help="output directory")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="scan-line worker threads")
    p.add_argument("--log-base", choices=("2", "e"), default=None, help="logarithm base of the complexity model")
    p.add_argument("--rebuild-luts", action="store_true", help="ignore cached Q tables and rebuild them")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = load_config(args.config)
        if args.command == "build-luts":
            built, cached = build_luts(cfg, args.out, args.workers, args.rebuild_luts)
            print(f"{built} tables built, {cached} cache hits")
        else:
            files = run_experiment(cfg, args.out, args.workers, args.log_base, args.rebuild_luts)
            print(f"wrote {len(files)} files to {args.out}")
    except (ConfigError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CacheCollisionError as exc:
        print(f"LUT cache error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
