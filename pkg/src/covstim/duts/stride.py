"""Stride-pattern detector: classifies 16-value windows of a 32-bit stream.

A window has a single stride when all 15 consecutive differences are equal,
and a double stride when the differences alternate between two distinct
values, the first difference giving the first stride. Differences wrap in
signed 32-bit arithmetic. Strides in [-16, 15] hit dedicated bins; windows
whose stride (or both alternating strides) fall outside that range hit
overflow bins. A window with one alternating stride in range and one out of
range hits nothing. Transition bins fire when the two adjacent disjoint
16-value windows ending at the newest input change pattern category.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

from covstim.coverage import BinDescriptor, CoveragePlan, Difficulty
from covstim.duts import FORMAT_INTEGERS

WINDOW = 16
STRIDE_MIN = -16
STRIDE_MAX = 15
_MASK = 0xFFFFFFFF
_WRAP = 2**32
_HALF = 2**31


@dataclass(frozen=True)
class Single:
    stride: int


@dataclass(frozen=True)
class Double:
    stride1: int
    stride2: int


@dataclass(frozen=True)
class SingleOverflow:
    sign: str  # "pos" | "neg"


@dataclass(frozen=True)
class DoubleOverflow:
    sign1: str
    sign2: str


PatternClass = Optional[Union[Single, Double, SingleOverflow, DoubleOverflow]]

_TRANSITION_BIN = {
    ("none", "single"): "no_to_single",
    ("none", "double"): "no_to_double",
    ("single", "double"): "single_to_double",
    ("double", "single"): "double_to_single",
}


def _signed_diff(after: int, before: int) -> int:
    d = (after - before) & _MASK
    return d - _WRAP if d >= _HALF else d


def _sign(c: int) -> str:
    return "pos" if c > 0 else "neg"


def _in_range(c: int) -> bool:
    return STRIDE_MIN <= c <= STRIDE_MAX


def _classify_diffs(diffs: Sequence[int]) -> PatternClass:
    """Classify from the 15 consecutive differences of a window."""
    c1 = diffs[0]
    for i in range(1, 15):
        if diffs[i] != c1:
            break
    else:
        if _in_range(c1):
            return Single(c1)
        return SingleOverflow(_sign(c1))
    c2 = diffs[1]
    if c2 == c1:
        return None
    for i in range(2, 15):
        if diffs[i] != (c1 if i % 2 == 0 else c2):
            return None
    if _in_range(c1) and _in_range(c2):
        return Double(c1, c2)
    if not _in_range(c1) and not _in_range(c2):
        return DoubleOverflow(_sign(c1), _sign(c2))
    return None  # mixed: one stride in range, one out


def classify_window(values: Sequence[int]) -> PatternClass:
    """Classify exactly 16 unsigned 32-bit values."""
    if len(values) != WINDOW:
        raise ValueError(f"window must have exactly {WINDOW} values, got {len(values)}")
    diffs = [_signed_diff(values[i + 1], values[i]) for i in range(WINDOW - 1)]
    return _classify_diffs(diffs)


def _category(cls: PatternClass) -> str:
    if cls is None:
        return "none"
    if isinstance(cls, (Single, SingleOverflow)):
        return "single"
    return "double"


def _pattern_bin(cls: PatternClass) -> Optional[str]:
    if cls is None:
        return None
    if isinstance(cls, Single):
        return f"single_stride_{cls.stride:+03d}"
    if isinstance(cls, Double):
        return f"double_stride_{cls.stride1:+03d}_{cls.stride2:+03d}"
    if isinstance(cls, SingleOverflow):
        return f"single_overflow_{cls.sign}"
    return f"double_overflow_{cls.sign1[0]}{cls.sign2[0]}"


@lru_cache(maxsize=1)
def stride_plan() -> CoveragePlan:
    bins = []
    for c in range(STRIDE_MIN, STRIDE_MAX + 1):
        bins.append(
            BinDescriptor(
                id=f"single_stride_{c:+03d}",
                description=(
                    f"a window of 16 values whose 15 consecutive differences "
                    f"all equal {c} (signed 32-bit wrapping arithmetic)"
                ),
                difficulty=Difficulty.EASIER,
                group="single_stride",
            )
        )
    for c1 in range(STRIDE_MIN, STRIDE_MAX + 1):
        for c2 in range(STRIDE_MIN, STRIDE_MAX + 1):
            if c1 == c2:
                continue
            bins.append(
                BinDescriptor(
                    id=f"double_stride_{c1:+03d}_{c2:+03d}",
                    description=(
                        f"a window of 16 values whose consecutive differences "
                        f"alternate {c1}, {c2}, {c1}, ... starting with {c1}"
                    ),
                    difficulty=Difficulty.HARDER,
                    group="double_stride",
                )
            )
    for sign, word in (("pos", "positive"), ("neg", "negative")):
        bins.append(
            BinDescriptor(
                id=f"single_overflow_{sign}",
                description=(
                    f"a single-stride window whose stride is {word} and outside "
                    f"[{STRIDE_MIN}, {STRIDE_MAX}]"
                ),
                difficulty=Difficulty.HARDER,
                group="overflow",
            )
        )
    for s1 in ("p", "n"):
        for s2 in ("p", "n"):
            w1 = "positive" if s1 == "p" else "negative"
            w2 = "positive" if s2 == "p" else "negative"
            bins.append(
                BinDescriptor(
                    id=f"double_overflow_{s1}{s2}",
                    description=(
                        f"a double-stride window with both alternating strides "
                        f"outside [{STRIDE_MIN}, {STRIDE_MAX}]: the first stride "
                        f"{w1}, the second {w2}"
                    ),
                    difficulty=Difficulty.HARDER,
                    group="overflow",
                )
            )
    transitions = {
        "no_to_single": "a 16-value window with no stride pattern immediately "
        "followed by a single-stride window",
        "no_to_double": "a 16-value window with no stride pattern immediately "
        "followed by a double-stride window",
        "single_to_double": "a single-stride window immediately followed by a "
        "double-stride window",
        "double_to_single": "a double-stride window immediately followed by a "
        "single-stride window",
    }
    for bin_id, desc in transitions.items():
        bins.append(
            BinDescriptor(
                id=bin_id,
                description=desc + " (the two adjacent 16-value windows)",
                difficulty=Difficulty.HARDER,
                group="transition",
            )
        )
    return CoveragePlan("stride", bins)


class StrideMonitor:
    """Feeds a 32-bit value stream through sliding-window classification.

    Windows are evaluated at every input once 16 values have arrived; the
    transition check compares the classification of the disjoint older window
    (inputs n-31..n-16) against the newest (n-15..n), reusing the cached
    classification from 16 inputs ago.
    """

    kind = "stride"
    stimulus_format = FORMAT_INTEGERS

    def __init__(self) -> None:
        self.plan = stride_plan()
        self.reset()

    def reset(self) -> None:
        self._diffs: list[int] = []  # last 31 consecutive differences
        self._last_value: Optional[int] = None
        self._count = 0
        self._recent_classes: list[PatternClass] = []  # windows ending at n-16..n

    def feed(self, stimulus: int) -> list[str]:
        value = stimulus & _MASK
        if self._last_value is not None:
            self._diffs.append(_signed_diff(value, self._last_value))
            if len(self._diffs) > 31:
                del self._diffs[0]
        self._last_value = value
        self._count += 1
        if self._count < WINDOW:
            return []
        cls = _classify_diffs(self._diffs[-15:])
        self._recent_classes.append(cls)
        if len(self._recent_classes) > WINDOW + 1:
            del self._recent_classes[0]
        bins = []
        b = _pattern_bin(cls)
        if b is not None:
            bins.append(b)
        if self._count >= 2 * WINDOW:
            older = self._recent_classes[0]
            t = _TRANSITION_BIN.get((_category(older), _category(cls)))
            if t is not None:
                bins.append(t)
        return bins

    def extras(self) -> dict:
        return {}
