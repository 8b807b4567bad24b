"""Formant tracks, the channel quantizer, the L0 spike encoder and corpora.

The input front end maps three formant trajectories (frequency/amplitude
pairs over time) onto a 32-channel, 125 Hz-band amplitude grid, then drives
one LIF cell per channel to produce the layer-0 spike raster.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LifParams, LifState, lif_step

N_CHANNELS = 32
BAND_HZ = 125.0
F_MAX_HZ = N_CHANNELS * BAND_HZ
DT = 0.015
TOTAL_DURATION = 1.5
WORD_DURATION = 0.4
DEFAULT_INPUT_GAIN = 1.5
N_CLASSES = 11

RASTER_FORMAT = "tdekws-raster-v1"
FORMANT_CSV_HEADER = ["class_id", "t_sec", "f1", "a1", "f2", "a2", "f3", "a3"]


class FormatError(ValueError):
    """A data file violates its declared format."""


def default_encoder_params(dt: float = DT) -> LifParams:
    """Input-layer cell constants: tau_syn = 8 ms, tau_mem = 2 ms."""
    return LifParams.from_time_constants(dt=dt, tau_syn=0.008, tau_mem=0.002)


def channel_of(freq_hz: float, n_channels: int = N_CHANNELS,
               band_hz: float = BAND_HZ) -> int:
    """Frequency-to-channel map: 125 Hz bands from 0 Hz, clamped at the top."""
    if freq_hz < 0.0:
        raise ValueError(f"frequency must be non-negative, got {freq_hz}")
    return min(int(freq_hz // band_hz), n_channels - 1)


@dataclass
class FormantTrack:
    """Three formant trajectories of one utterance, sampled on a uniform grid.

    frames is [n_frames, 6] with columns f1, a1, f2, a2, f3, a3; frequencies
    in Hz, amplitudes in [0, 1].
    """

    class_id: int
    frames: np.ndarray
    frame_dt: float

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if self.frames.ndim != 2 or self.frames.shape[1] != 6:
            raise ValueError(f"frames must be [n, 6], got shape {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise ValueError("a track needs at least one frame")
        if self.frame_dt <= 0.0:
            raise ValueError(f"frame_dt must be positive, got {self.frame_dt}")
        freqs = self.frames[:, 0::2]
        amps = self.frames[:, 1::2]
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("frames contain non-finite values")
        if np.any(freqs < 0.0):
            raise ValueError("negative formant frequency")
        if np.any((amps < 0.0) | (amps > 1.0)):
            raise ValueError("amplitudes must lie in [0, 1]")

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def total_duration(self) -> float:
        return self.n_frames * self.frame_dt


@dataclass
class AmplitudeGrid:
    """Per-channel drive amplitudes over time, [n_channels, n_steps]."""

    values: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-d, got shape {self.values.shape}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass
class SpikeRaster:
    """Binary spike trains, [n_neurons, n_steps]."""

    spikes: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        spikes = np.asarray(self.spikes)
        if spikes.ndim != 2:
            raise ValueError(f"spikes must be 2-d, got shape {spikes.shape}")
        if not np.all((spikes == 0) | (spikes == 1)):
            raise ValueError("spike raster entries must be 0 or 1")
        self.spikes = spikes.astype(np.uint8)
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n_neurons(self) -> int:
        return int(self.spikes.shape[0])

    @property
    def n_steps(self) -> int:
        return int(self.spikes.shape[1])

    def as_float(self) -> np.ndarray:
        return self.spikes.astype(np.float64)


@dataclass
class Dataset:
    """Labeled spike rasters, all sharing one dt and step count."""

    rasters: list[SpikeRaster]
    labels: list[int]
    n_classes: int
    provenance: str = ""
    tracks: list[FormantTrack] | None = None

    def __post_init__(self) -> None:
        if len(self.rasters) != len(self.labels):
            raise ValueError("rasters and labels must have equal length")
        if len(self.rasters) == 0:
            raise ValueError("dataset must contain at least one sample")
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        shape = self.rasters[0].spikes.shape
        dt = self.rasters[0].dt
        for r in self.rasters:
            if r.spikes.shape != shape or r.dt != dt:
                raise ValueError("all rasters must share shape and dt")
        for lbl in self.labels:
            if not 0 <= lbl < self.n_classes:
                raise ValueError(f"label {lbl} outside [0, {self.n_classes})")

    def __len__(self) -> int:
        return len(self.rasters)

    def __iter__(self):
        return iter(zip(self.rasters, self.labels))

    @property
    def dt(self) -> float:
        return self.rasters[0].dt

    @property
    def n_steps(self) -> int:
        return self.rasters[0].n_steps

    @property
    def n_neurons(self) -> int:
        return self.rasters[0].n_neurons

    def class_counts(self) -> np.ndarray:
        counts = np.zeros(self.n_classes, dtype=np.int64)
        for lbl in self.labels:
            counts[lbl] += 1
        return counts

    def subset(self, indices) -> "Dataset":
        return Dataset(
            rasters=[self.rasters[i] for i in indices],
            labels=[self.labels[i] for i in indices],
            n_classes=self.n_classes,
            provenance=self.provenance,
        )

    def stacked(self) -> np.ndarray:
        """All rasters as one float array [n_samples, n_neurons, n_steps]."""
        return np.stack([r.spikes for r in self.rasters]).astype(np.float64)


def quantize_to_channels(
    track: FormantTrack,
    dt: float = DT,
    n_channels: int = N_CHANNELS,
    band_hz: float = BAND_HZ,
) -> AmplitudeGrid:
    """Resample a formant track onto the channel grid (nearest frame in time).

    When two formants land on the same channel at the same step, the larger
    amplitude wins.
    """
    n_steps = round(track.total_duration / dt)
    if n_steps < 1:
        raise ValueError("track is shorter than one output step")
    values = np.zeros((n_channels, n_steps))
    for t in range(n_steps):
        frame_idx = min(int(round(t * dt / track.frame_dt)), track.n_frames - 1)
        frame = track.frames[frame_idx]
        for k in range(3):
            freq, amp = frame[2 * k], frame[2 * k + 1]
            if amp <= 0.0:
                continue
            ch = channel_of(freq, n_channels, band_hz)
            if amp > values[ch, t]:
                values[ch, t] = amp
    return AmplitudeGrid(values=values, dt=dt)


def encode_l0(
    grid: AmplitudeGrid,
    params: LifParams | None = None,
    input_gain: float = DEFAULT_INPUT_GAIN,
) -> SpikeRaster:
    """Drive one LIF cell per channel with gain * amplitude; collect spikes."""
    if params is None:
        params = default_encoder_params(grid.dt)
    if input_gain <= 0.0:
        raise ValueError(f"input_gain must be positive, got {input_gain}")
    n_channels, n_steps = grid.values.shape
    state = LifState.zeros(n_channels)
    spikes = np.zeros((n_channels, n_steps), dtype=np.uint8)
    for t in range(n_steps):
        state, s = lif_step(state, params, input_gain * grid.values[:, t])
        spikes[:, t] = s.astype(np.uint8)
    return SpikeRaster(spikes=spikes, dt=grid.dt)


# --- synthetic corpus -------------------------------------------------------
#
# Eleven word templates over a 400 ms window. Class identity is carried
# mostly by temporal order: four template pairs visit identical channel sets
# with reversed or swapped timing, so per-channel spike counts are nearly
# uninformative within those pairs, while three singleton classes are also
# spatially distinct. Bursts are separated by short silent gaps.

WORD_STEPS = 27  # 400 ms window on the 15 ms grid

_SLOTS4 = ((0, 5), (7, 5), (14, 5), (21, 5))
_SLOTS3 = ((0, 7), (9, 7), (18, 7))
_HALVES = ((0, 12), (14, 12))
_FULL = ((0, WORD_STEPS),)


@dataclass(frozen=True)
class _Burst:
    start: int
    length: int
    ch_from: int
    ch_to: int


def _seq(slots, channels) -> tuple[_Burst, ...]:
    return tuple(
        _Burst(start, length, ch, ch) for (start, length), ch in zip(slots, channels)
    )


def _flat(ch: int) -> tuple[_Burst, ...]:
    return (_Burst(0, WORD_STEPS, ch, ch),)


def _sweep(slot, ch_from: int, ch_to: int) -> tuple[_Burst, ...]:
    return (_Burst(slot[0], slot[1], ch_from, ch_to),)


# per class: (F1 bursts, F2 bursts, F3 bursts)
KEYWORD_TEMPLATES: tuple[tuple[tuple[_Burst, ...], ...], ...] = (
    (_flat(3), _seq(_SLOTS4, (10, 12, 14, 16)), _flat(20)),   # 0 rising F2 steps
    (_flat(3), _seq(_SLOTS4, (16, 14, 12, 10)), _flat(20)),   # 1 falling F2 steps
    (_seq(_SLOTS3, (2, 4, 6)), _flat(12), _flat(22)),         # 2 rising F1 steps
    (_seq(_SLOTS3, (6, 4, 2)), _flat(12), _flat(22)),         # 3 falling F1 steps
    (_seq(_SLOTS3, (2, 4, 6)), _seq(_SLOTS3, (16, 14, 12)), _flat(24)),  # 4 converging
    (_seq(_SLOTS3, (6, 4, 2)), _seq(_SLOTS3, (12, 14, 16)), _flat(24)),  # 5 diverging
    (_sweep(_HALVES[0], 3, 5), _sweep(_HALVES[1], 14, 12), _flat(19)),   # 6 F1 then F2
    (_sweep(_HALVES[1], 3, 5), _sweep(_HALVES[0], 14, 12), _flat(19)),   # 7 F2 then F1
    (_flat(5), _flat(11), _flat(23)),                          # 8 steady
    ((_Burst(0, 5, 3, 3), _Burst(21, 5, 3, 3)), _flat(15), _flat(21)),  # 9 double F1
    (_flat(7), _flat(9), _seq(_SLOTS3, (24, 22, 20))),         # 10 falling F3 steps
)

_BASE_AMP = 0.9


def _channel_center(ch: float, band_hz: float = BAND_HZ) -> float:
    return (ch + 0.5) * band_hz


def _formant_at(bursts: tuple[_Burst, ...], step: int) -> tuple[float, float]:
    """(channel, amplitude) of one formant at a word step; silent between bursts.

    Outside any burst the frequency holds the nearest burst's edge channel so
    trajectories stay defined while amplitude gates the energy.
    """
    for b in bursts:
        if b.start <= step < b.start + b.length:
            if b.length > 1:
                frac = (step - b.start) / (b.length - 1)
            else:
                frac = 0.0
            return b.ch_from + (b.ch_to - b.ch_from) * frac, _BASE_AMP
    for b in bursts:
        if step < b.start:
            return float(b.ch_from), 0.0
    return float(bursts[-1].ch_to), 0.0


def template_track(
    class_id: int,
    onset: float = 0.0,
    total_duration: float = TOTAL_DURATION,
    frame_dt: float = DT,
    freq_shift_hz=(0.0, 0.0, 0.0),
    amp_scale=(1.0, 1.0, 1.0),
) -> FormantTrack:
    """Build the formant track of one keyword template at a given onset."""
    if not 0 <= class_id < len(KEYWORD_TEMPLATES):
        raise ValueError(f"class_id must be in [0, {len(KEYWORD_TEMPLATES)})")
    word_duration = WORD_STEPS * frame_dt
    if not 0.0 <= onset <= total_duration - word_duration:
        raise ValueError(f"onset {onset} leaves the word outside the utterance")
    template = KEYWORD_TEMPLATES[class_id]
    n_frames = round(total_duration / frame_dt)
    frames = np.zeros((n_frames, 6))
    for k in range(n_frames):
        x = k * frame_dt - onset
        step = int(x / frame_dt + 1e-9) if x >= 0.0 else -1
        for j, bursts in enumerate(template):
            if 0 <= step < WORD_STEPS:
                ch, amp = _formant_at(bursts, step)
            else:
                edge = bursts[0].ch_from if step < 0 else bursts[-1].ch_to
                ch, amp = float(edge), 0.0
            freq = _channel_center(ch) + freq_shift_hz[j]
            freq = min(max(freq, 0.0), F_MAX_HZ - 1e-6)
            frames[k, 2 * j] = freq
            frames[k, 2 * j + 1] = min(max(amp * amp_scale[j], 0.0), 1.0)
    return FormantTrack(class_id=class_id, frames=frames, frame_dt=frame_dt)


def generate_synthetic_dataset(
    seed: int,
    reps_per_class: int = 40,
    n_classes: int = N_CLASSES,
    total_duration: float = TOTAL_DURATION,
    dt: float = DT,
    input_gain: float = DEFAULT_INPUT_GAIN,
    freq_jitter_hz: float = BAND_HZ,
    amp_jitter: float = 0.1,
    keep_tracks: bool = True,
) -> Dataset:
    """Seeded corpus of encoded keywords with onset, frequency and amplitude
    jitter. Identical seeds give identical datasets."""
    if reps_per_class < 1:
        raise ValueError(f"reps_per_class must be >= 1, got {reps_per_class}")
    if not 1 <= n_classes <= len(KEYWORD_TEMPLATES):
        raise ValueError(
            f"n_classes must be in [1, {len(KEYWORD_TEMPLATES)}], got {n_classes}"
        )
    rng = np.random.default_rng(seed)
    params = default_encoder_params(dt)
    word_duration = WORD_STEPS * dt
    max_onset = total_duration - word_duration
    rasters: list[SpikeRaster] = []
    labels: list[int] = []
    tracks: list[FormantTrack] = []
    for class_id in range(n_classes):
        for _ in range(reps_per_class):
            onset = rng.uniform(0.0, max_onset)
            shifts = tuple(rng.uniform(-freq_jitter_hz, freq_jitter_hz)
                           for _ in range(3))
            scales = tuple(rng.uniform(1.0 - amp_jitter, 1.0 + amp_jitter)
                           for _ in range(3))
            track = template_track(
                class_id,
                onset=onset,
                total_duration=total_duration,
                frame_dt=dt,
                freq_shift_hz=shifts,
                amp_scale=scales,
            )
            grid = quantize_to_channels(track, dt=dt)
            rasters.append(encode_l0(grid, params, input_gain))
            labels.append(class_id)
            if keep_tracks:
                tracks.append(track)
    return Dataset(
        rasters=rasters,
        labels=labels,
        n_classes=n_classes,
        provenance=f"synthetic seed={seed} reps={reps_per_class}",
        tracks=tracks if keep_tracks else None,
    )


def encode_tracks(
    tracks: list[FormantTrack],
    dt: float = DT,
    input_gain: float = DEFAULT_INPUT_GAIN,
    provenance: str = "tracks",
) -> Dataset:
    """Quantize and encode externally supplied formant tracks."""
    if not tracks:
        raise ValueError("no tracks given")
    params = default_encoder_params(dt)
    rasters = [
        encode_l0(quantize_to_channels(t, dt=dt), params, input_gain) for t in tracks
    ]
    labels = [t.class_id for t in tracks]
    return Dataset(
        rasters=rasters,
        labels=labels,
        n_classes=max(labels) + 1,
        provenance=provenance,
        tracks=list(tracks),
    )


# --- file formats -----------------------------------------------------------


def save_raster_file(path, dataset: Dataset) -> None:
    """Write `tdekws-raster-v1`: a header line, then one line per sample of
    the form `class_id neuron:t neuron:t ...` with events in raster order."""
    n_neurons, n_steps = dataset.n_neurons, dataset.n_steps
    with open(path, "w") as f:
        f.write(f"{RASTER_FORMAT} {n_neurons} {n_steps} {dataset.dt!r}\n")
        for raster, label in dataset:
            neurons, times = np.nonzero(raster.spikes)
            events = " ".join(f"{n}:{t}" for n, t in zip(neurons, times))
            f.write(f"{label} {events}".rstrip() + "\n")


def load_raster_file(path) -> Dataset:
    with open(path) as f:
        header = f.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 4 or parts[0] != RASTER_FORMAT:
            raise FormatError(f"line 1: expected '{RASTER_FORMAT} n T dt' header")
        try:
            n_neurons, n_steps, dt = int(parts[1]), int(parts[2]), float(parts[3])
        except ValueError as exc:
            raise FormatError(f"line 1: bad header field ({exc})") from None
        rasters: list[SpikeRaster] = []
        labels: list[int] = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            try:
                label = int(fields[0])
            except ValueError:
                raise FormatError(f"line {lineno}: bad class id {fields[0]!r}") from None
            if label < 0:
                raise FormatError(f"line {lineno}: negative class id {label}")
            spikes = np.zeros((n_neurons, n_steps), dtype=np.uint8)
            for token in fields[1:]:
                try:
                    n_str, t_str = token.split(":")
                    n, t = int(n_str), int(t_str)
                except ValueError:
                    raise FormatError(
                        f"line {lineno}: bad event {token!r}, expected neuron:t"
                    ) from None
                if not (0 <= n < n_neurons and 0 <= t < n_steps):
                    raise FormatError(
                        f"line {lineno}: event {token!r} outside "
                        f"[{n_neurons} x {n_steps}]"
                    )
                spikes[n, t] = 1
            rasters.append(SpikeRaster(spikes=spikes, dt=dt))
            labels.append(label)
    if not rasters:
        raise FormatError("raster file contains no samples")
    return Dataset(
        rasters=rasters,
        labels=labels,
        n_classes=max(labels) + 1,
        provenance=f"raster-file:{path}",
    )


def save_formant_csv(path, tracks: list[FormantTrack]) -> None:
    """Write tracks as CSV rows class_id,t_sec,f1,a1,f2,a2,f3,a3; a track's
    rows are consecutive with t_sec restarting at 0."""
    if not tracks:
        raise ValueError("no tracks to write")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(FORMANT_CSV_HEADER)
        for track in tracks:
            for k in range(track.n_frames):
                row = [track.class_id, repr(k * track.frame_dt)]
                row.extend(repr(float(v)) for v in track.frames[k])
                writer.writerow(row)


def load_formant_csv(path) -> list[FormantTrack]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty formant CSV") from None
        if [h.strip() for h in header] != FORMANT_CSV_HEADER:
            raise FormatError(
                f"line 1: expected header {','.join(FORMANT_CSV_HEADER)}"
            )
        tracks: list[FormantTrack] = []
        cur_class: int | None = None
        cur_times: list[float] = []
        cur_frames: list[list[float]] = []

        def flush(lineno: int) -> None:
            nonlocal cur_class, cur_times, cur_frames
            if cur_class is None:
                return
            if len(cur_times) < 2:
                raise FormatError(
                    f"line {lineno}: track with fewer than 2 frames"
                )
            deltas = np.diff(cur_times)
            frame_dt = deltas[0]
            if frame_dt <= 0 or np.any(np.abs(deltas - frame_dt) > 1e-9):
                raise FormatError(
                    f"line {lineno}: non-uniform frame times in track"
                )
            tracks.append(
                FormantTrack(
                    class_id=cur_class,
                    frames=np.array(cur_frames),
                    frame_dt=float(frame_dt),
                )
            )
            cur_class, cur_times, cur_frames = None, [], []

        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 8:
                raise FormatError(f"line {lineno}: expected 8 fields, got {len(row)}")
            try:
                class_id = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
            t_sec, frame = values[0], values[1:]
            starts_new = (
                cur_class is None
                or class_id != cur_class
                or (cur_times and t_sec <= cur_times[-1])
            )
            if starts_new and cur_class is not None:
                flush(lineno)
            if cur_class is None:
                cur_class = class_id
            cur_times.append(t_sec)
            cur_frames.append(frame)
        flush(lineno="end")
    if not tracks:
        raise FormatError("formant CSV contains no tracks")
    return tracks
