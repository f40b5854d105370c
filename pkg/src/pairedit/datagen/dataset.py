"""Generation and loading of on-disk sample pair datasets.

Layout of a dataset directory::

    pair_00000/
        source.ppm
        target.ppm
        signal.pgm | signal.ppm | signal.txt
        corr_res8.bin      # one file per token stride in pixels
        meta.txt
"""
import logging
import os
import re
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from pairedit.datagen.correspondence import build_correspondence
from pairedit.datagen.pairs import PairDecision, find_training_pair, moving_magnitude
from pairedit.datagen.render import RenderedScene
from pairedit.datagen.signals import sample_drag_points, sketch_from_flow, softmax_splat
from pairedit.interfaces.enums import FlowDirection, SignalType
from pairedit.interfaces.parameters import DataParameter
from pairedit.interfaces.sample_pair import EditSignal, FlowField, SamplePair, TrackSet
from pairedit.utilities.atomic import atomic_write
from pairedit.utilities.binary_formats import load_correspondence, save_correspondence
from pairedit.utilities.netpbm import quantize, read_drag_points, read_pnm, write_drag_points, write_pnm

log = logging.getLogger("DataGen")

_CORRESPONDENCE_FILE = re.compile(r"corr_res(\d+)\.bin")


def pair_directory(root: str | os.PathLike, index: int) -> Path:
    """Directory of the pair with the given index."""
    return Path(root) / f"pair_{index:05d}"


def extract_signal(
    kind: SignalType,
    source: np.ndarray,
    flow_t2s: FlowField,
    flow_s2t: FlowField,
    tracks: TrackSet,
    rng: np.random.Generator,
    params: DataParameter,
) -> EditSignal:
    """Extract an editing signal of the requested kind from the motion of a pair."""
    match SignalType(kind):
        case SignalType.SKETCH:
            return EditSignal.sketch(sketch_from_flow(flow_t2s, params.sketch_threshold))
        case SignalType.DRAG:
            k = int(rng.integers(params.min_drag_points, params.max_drag_points + 1))
            return EditSignal.drag(sample_drag_points(flow_t2s, tracks, k, rng))
        case SignalType.COARSE:
            return EditSignal.coarse(quantize(softmax_splat(source, flow_s2t)))
    raise ValueError(f"Unknown signal type {kind}")


def build_sample_pair(
    rendered: RenderedScene,
    decision: PairDecision,
    kind: SignalType,
    strides: Sequence[int],
    rng: np.random.Generator,
    params: DataParameter,
) -> SamplePair:
    """Assemble a sample pair from an accepted frame pair of a rendered scene."""
    src, tgt = decision.source_index, decision.target_index
    flow_t2s = rendered.flow(src, tgt, FlowDirection.TARGET_TO_SOURCE)
    flow_s2t = rendered.flow(src, tgt, FlowDirection.SOURCE_TO_TARGET)
    tracks = rendered.tracks(src, tgt)
    source, target = rendered.frames[src], rendered.frames[tgt]
    signal = extract_signal(kind, source, flow_t2s, flow_s2t, tracks, rng, params)
    meta = {
        "source_frame": src,
        "target_frame": tgt,
        "interval": decision.interval,
        "signal": SignalType(kind).value,
        "image_size": f"{rendered.shape[0]}x{rendered.shape[1]}",
        "mean_flow_magnitude": round(moving_magnitude(flow_t2s), 6),
        "object_count": len(rendered.scene.objects),
    }
    return SamplePair(
        source=source,
        target=target,
        signal=signal,
        correspondences=build_correspondence(tracks, strides),
        flow_t2s=flow_t2s,
        flow_s2t=flow_s2t,
        tracks=tracks,
        meta=meta,
    )


def generate_pair(
    index: int, seed: int, kind: SignalType, strides: Sequence[int], params: DataParameter
) -> SamplePair:
    """Generate pair ``index`` of the dataset with the given seed.

    The scene and frame pair come from the stream ``[seed, index]``, the signal from
    ``[seed, index, 1]``, so all signal types share images and correspondences.
    """
    rendered, decision = find_training_pair(np.random.default_rng([seed, index]), params)
    pair = build_sample_pair(rendered, decision, kind, strides, np.random.default_rng([seed, index, 1]), params)
    pair.meta = {"seed": seed, "index": index, **pair.meta}
    return pair


def write_pair(directory: str | os.PathLike, pair: SamplePair) -> None:
    """Write a sample pair into its directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_pnm(directory / "source.ppm", pair.source)
    write_pnm(directory / "target.ppm", pair.target)
    signal_path = directory / f"signal{pair.signal.kind.file_suffix}"
    if pair.signal.points is not None:
        write_drag_points(signal_path, pair.signal.points)
    else:
        write_pnm(signal_path, pair.signal.raster)  # type: ignore
    for stride, corr in sorted(pair.correspondences.items()):
        save_correspondence(directory / f"corr_res{stride}.bin", corr)
    with atomic_write(directory / "meta.txt", "w") as file:
        file.writelines(f"{key} = {value}\n" for key, value in pair.meta.items())


def generate_dataset(
    root: str | os.PathLike,
    num_pairs: int,
    kind: SignalType,
    strides: Sequence[int],
    params: DataParameter | None = None,
    seed: int = 0,
) -> list[Path]:
    """Generate ``num_pairs`` pairs into ``root``.

    Output is byte-identical for identical arguments.

    Returns
    -------
        Pair directories in index order

    Raises
    ------
    ValueError
        Non-positive pair count or token strides which do not divide the image size.
    """
    params = params or DataParameter()
    if num_pairs < 1:
        raise ValueError(f"At least one pair required, got {num_pairs}")
    for stride in strides:
        if stride < 1 or params.image_height % stride or params.image_width % stride:
            raise ValueError(f"Token stride {stride} does not divide {params.image_height}x{params.image_width}")
    Path(root).mkdir(parents=True, exist_ok=True)
    directories = []
    for index in range(num_pairs):
        pair = generate_pair(index, seed, kind, strides, params)
        directory = pair_directory(root, index)
        write_pair(directory, pair)
        directories.append(directory)
        log.debug("Wrote %s (frames %s -> %s)", directory.name, pair.meta["source_frame"], pair.meta["target_frame"])
    log.info("Generated %d %s pairs in %s", num_pairs, SignalType(kind).value, root)
    return directories


def read_meta(path: str | os.PathLike) -> dict[str, str]:
    """Parse a ``key = value`` meta file."""
    meta = {}
    with open(path, encoding="utf-8") as file:
        for line in file:
            if "=" in line:
                key, value = line.split("=", 1)
                meta[key.strip()] = value.strip()
    return meta


def load_pair(directory: str | os.PathLike) -> SamplePair:
    """Load and validate one pair directory.

    Raises
    ------
    FileNotFoundError
        Images or signal missing.
    ValueError
        Invalid images, signal or correspondences.
    """
    directory = Path(directory)
    source = read_pnm(directory / "source.ppm")
    target = read_pnm(directory / "target.ppm")
    height, width = source.shape[1:]
    signals = [directory / f"signal{kind.file_suffix}" for kind in SignalType]
    present = [path for path in signals if path.exists()]
    if len(present) != 1:
        raise FileNotFoundError(f"Expected exactly one signal file in {directory}, found {len(present)}")
    signal_path = present[0]
    match signal_path.suffix:
        case ".txt":
            signal = EditSignal.drag(read_drag_points(signal_path, height, width))
        case ".pgm":
            signal = EditSignal.sketch(read_pnm(signal_path))
        case _:
            signal = EditSignal.coarse(read_pnm(signal_path))

    correspondences = {}
    for path in sorted(directory.glob("corr_res*.bin")):
        match = _CORRESPONDENCE_FILE.fullmatch(path.name)
        if match is None:
            continue
        stride = int(match.group(1))
        correspondences[stride] = load_correspondence(path, height // stride, width // stride)
    meta_path = directory / "meta.txt"
    meta: dict[str, Any] = read_meta(meta_path) if meta_path.exists() else {}
    return SamplePair(source, target, signal, correspondences, meta=meta)


def load_dataset(root: str | os.PathLike, kind: SignalType | None = None) -> list[SamplePair]:
    """Load every pair of a dataset directory, re-validating each one.

    Raises
    ------
    FileNotFoundError
        Directory missing or without pairs.
    ValueError
        Invalid pair or signal type different from ``kind``.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"Dataset directory not found: {root}")
    directories = sorted(path for path in root.glob("pair_*") if path.is_dir())
    if not directories:
        raise FileNotFoundError(f"No pair directories in {root}")
    pairs = []
    for directory in directories:
        try:
            pair = load_pair(directory)
        except ValueError as exc:
            raise ValueError(f"Invalid pair {directory}: {exc}") from exc
        if kind is not None and pair.signal.kind is not SignalType(kind):
            expected = SignalType(kind).value
            raise ValueError(f"Dataset {root} holds {pair.signal.kind.value} signals, expected {expected}")
        pairs.append(pair)
    log.info("Loaded %d pairs from %s", len(pairs), root)
    return pairs
