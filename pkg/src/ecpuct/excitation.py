"""Barker-coded excitation signals, matched filters and the virtual probing signal."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

# One fixed sign/orientation per order, leading element +1.
BARKER_CODES = {
    2: (1, 1),
    3: (1, 1, -1),
    4: (1, 1, -1, 1),
    5: (1, 1, 1, -1, 1),
    7: (1, 1, 1, -1, -1, 1, -1),
    11: (1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1),
    13: (1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1),
}


@dataclass(frozen=True)
class BitSequence:
    """Unexpanded binary code, every element +1 or -1."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (1, -1) for b in self.bits):
            raise ValueError("bits must all be +1 or -1")

    @property
    def order(self) -> int:
        return len(self.bits)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=float)


@dataclass(frozen=True, eq=False)
class ExcitationSignal:
    """Sampled drive waveform.

    ``samples`` holds either the unipolar on/off heater modulation ({0, 1})
    or the bipolar correlation reference ({-1, +1}).
    """

    samples: np.ndarray
    sample_rate: float
    bit_duration: float
    bits: BitSequence
    polarity: str = "bipolar"

    @property
    def duration(self) -> float:
        return self.bits.order * self.bit_duration

    @property
    def samples_per_bit(self) -> int:
        return int(round(self.bit_duration * self.sample_rate))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def bipolar(self) -> np.ndarray:
        """The zero-mean (+/-1) form of the code, whatever the drive polarity."""
        return np.repeat(self.bits.as_array(), self.samples_per_bit)

    def excited_bandwidth(self, fraction: float = 0.5) -> float:
        """Frequency (Hz) below which ``fraction`` of the DC-removed spectral energy lies."""
        x = self.samples - self.samples.mean()
        power = np.abs(np.fft.rfft(x)) ** 2
        freqs = np.fft.rfftfreq(x.size, d=1.0 / self.sample_rate)
        cum = np.cumsum(power) / power.sum()
        return float(freqs[np.searchsorted(cum, fraction)])


@dataclass(frozen=True, eq=False)
class MatchedFilter:
    samples: np.ndarray
    sample_rate: float
    code_order: int | None = None


def barker_code(order: int) -> BitSequence:
    """Return the canonical Barker sequence of the given order.

    Raises
    ------
    ValueError
        If no Barker code of that length exists.
    """
    if order not in BARKER_CODES:
        valid = ", ".join(str(k) for k in sorted(BARKER_CODES))
        raise ValueError(f"no Barker code of order {order}; valid orders are {valid}")
    return BitSequence(BARKER_CODES[order])


def expand_code(bits: BitSequence, bit_duration: float, sample_rate: float,
                polarity: str = "bipolar") -> ExcitationSignal:
    """Pad every bit into a run of ``bit_duration * sample_rate`` identical samples.

    ``polarity="unipolar"`` maps -1 to 0, which is the on/off modulation of the
    induction heater; ``"bipolar"`` keeps the +/-1 levels.
    """
    if polarity not in ("bipolar", "unipolar"):
        raise ValueError(f"polarity must be 'bipolar' or 'unipolar', got {polarity!r}")
    spb = bit_duration * sample_rate
    n = int(round(spb))
    if n < 1 or abs(spb - n) > 1e-9 * max(1.0, spb):
        raise ValueError(
            f"bit_duration * sample_rate = {spb:g} samples per bit; must be a positive integer")
    samples = np.repeat(bits.as_array(), n)
    if polarity == "unipolar":
        samples = (samples + 1.0) / 2.0
    return ExcitationSignal(samples, float(sample_rate), float(bit_duration), bits, polarity)


def excitation_from_samples(samples, sample_rate: float) -> ExcitationSignal:
    """Wrap an arbitrary real waveform, treating every sample as one bit.

    The bipolar reference of such a signal is the waveform itself, so the
    matched-filter machinery works for non-Barker test signals too.
    """
    samples = np.asarray(samples, dtype=float)
    signal = ExcitationSignal(samples, float(sample_rate), 1.0 / sample_rate,
                              BitSequence(tuple(1 for _ in samples)), "arbitrary")
    return signal


def _reference(s: ExcitationSignal) -> np.ndarray:
    if s.polarity == "arbitrary":
        return s.samples
    return s.bipolar()


def matched_filter(s: ExcitationSignal) -> MatchedFilter:
    """Time-reversed bipolar reference of ``s``."""
    ref = _reference(s)
    if ref.size == 0:
        raise ValueError("cannot build a matched filter for an empty signal")
    order = None if s.polarity == "arbitrary" else s.bits.order
    return MatchedFilter(ref[::-1].copy(), s.sample_rate, order)


def virtual_delta(s: ExcitationSignal, psi: MatchedFilter) -> tuple[np.ndarray, np.ndarray]:
    """Convolve the reference with its matched filter.

    Returns ``(lags, values)``: the full linear convolution normalised by the
    reference energy so that the main peak is 1, with lag 0 at that peak.
    """
    if s.sample_rate != psi.sample_rate:
        raise ValueError(f"sample rate mismatch: {s.sample_rate} Hz vs {psi.sample_rate} Hz")
    ref = _reference(s)
    energy = float(ref @ ref)
    if energy == 0.0:
        raise ValueError("signal has zero energy")
    values = np.convolve(ref, psi.samples) / energy
    lags = np.arange(values.size) - (psi.samples.size - 1)
    return lags, values


def peak_sidelobe_ratio(values: np.ndarray, lags: np.ndarray, mainlobe_halfwidth: int = 0) -> float:
    """Main-peak to largest-sidelobe amplitude ratio of a compressed pulse.

    Samples with ``|lag| <= mainlobe_halfwidth`` are counted as main lobe.
    """
    peak = np.abs(values[lags == 0]).max()
    side = np.abs(values[np.abs(lags) > mainlobe_halfwidth])
    return float(peak / side.max()) if side.size and side.max() > 0 else np.inf


def spectrum_band_energy(s: ExcitationSignal, f_lo: float, f_hi: float) -> float:
    """Fraction of the DC-removed spectral energy of ``s`` within [f_lo, f_hi]."""
    nyquist = s.sample_rate / 2.0
    if not (0.0 <= f_lo < f_hi <= nyquist):
        raise ValueError(f"need 0 <= f_lo < f_hi <= {nyquist:g} Hz, got [{f_lo:g}, {f_hi:g}]")
    x = s.samples - s.samples.mean()
    power = np.abs(np.fft.rfft(x)) ** 2
    total = power.sum()
    if total == 0.0:
        return 0.0
    freqs = np.fft.rfftfreq(x.size, d=1.0 / s.sample_rate)
    band = (freqs >= f_lo) & (freqs <= f_hi)
    return float(power[band].sum() / total)


def write_signal_csv(path, s: ExcitationSignal) -> None:
    """Two-column ``time_s,amplitude`` CSV with LF line endings."""
    with open(Path(path), "w", newline="\n") as fh:
        fh.write("time_s,amplitude\n")
        for t, a in zip(s.times, s.samples):
            fh.write(f"{t:.6f},{a:.9g}\n")
