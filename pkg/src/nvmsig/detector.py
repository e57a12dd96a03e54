"""End-user verdicts: who made a chip, whether it was used, and where.

All three checks ride on latency elevation.  Manufacturer identification
feeds a ~100-cycle probe to a trained classifier; recycled detection
compares the probe median against the class's fresh mean; localization
flags spatial-map addresses elevated above the chip-wide median.
"""

import io
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .chipsim import ChipClassSpec, SpatialLatencyMap
from .classifiers import TrainedModel, predict_detail
from .errors import ParseError, ValidationError
from .protocol import Side, latency_stats

USED_THRESHOLD = 1.3
FRESH_THRESHOLD = 1.1
DEFAULT_FLAG_RATIO = 1.5
_FRESH_WINDOW = 50


class RecycledVerdict(Enum):
    FRESH = "FRESH"
    USED = "USED"
    INDETERMINATE = "INDETERMINATE"


class UsedRegion(NamedTuple):
    start_addr: int
    end_addr: int
    peak_ratio: float


@dataclass(frozen=True)
class FreshBaseline:
    """Per-class fresh-latency statistics (mean and stdev in µs)."""
    mean: dict
    stdev: dict

    def for_tag(self, tag: int):
        tag = int(tag)
        if tag not in self.mean:
            raise ValidationError(f"no fresh baseline for class tag {tag}")
        return self.mean[tag], self.stdev[tag]


def baseline_from_catalog(specs) -> FreshBaseline:
    """Noise-free baseline: the fresh mean is each class's base latency."""
    specs = [specs] if isinstance(specs, ChipClassSpec) else list(specs)
    return FreshBaseline({s.class_tag: s.base_latency_us for s in specs},
                         {s.class_tag: 0.0 for s in specs})


def baseline_from_simulation(specs, chips: int = 2, locations: int = 5,
                             seed: int = 0) -> FreshBaseline:
    """Measured baseline: mean/stdev over each class's first 50 cycles."""
    stats = latency_stats(specs, chips=chips, locations=locations,
                          checkpoints=[_FRESH_WINDOW], span=_FRESH_WINDOW,
                          seed=seed)
    mean, stdev = {}, {}
    for w in stats:
        if w.side is Side.BEFORE:
            mean[w.class_tag] = w.mean
            stdev[w.class_tag] = w.stdev
    return FreshBaseline(mean, stdev)


def _check_probe(probe) -> np.ndarray:
    probe = np.asarray(probe, dtype=np.float64)
    if probe.ndim != 1 or probe.size == 0:
        raise ValidationError("probe must be a non-empty 1-D latency vector")
    if not np.all(np.isfinite(probe)) or np.any(probe <= 0):
        raise ValidationError("probe latencies must be positive and finite")
    return probe


def identify_manufacturer(probe, model: TrainedModel):
    """(tag, {tag: score}): classify one probe and show the evidence.

    Scores are neighbor votes (knn), leaf training counts (tree), or
    pairwise votes (svm).  Pure function of (probe, model).
    """
    probe = _check_probe(probe)
    if probe.size != model.expected_arity:
        raise ValidationError(
            f"probe has {probe.size} values, model expects "
            f"{model.expected_arity}")
    pred, scores, tags = predict_detail(model, probe[None, :])
    detail = {int(t): float(s) for t, s in zip(tags, scores[0])}
    return int(pred[0]), detail


def detect_recycled(probe, predicted_class: int, baseline: FreshBaseline,
                    used_threshold: float = USED_THRESHOLD,
                    fresh_threshold: float = FRESH_THRESHOLD):
    """(verdict, elevation_ratio) for a probe against its class baseline.

    elevation_ratio = median(probe) / fresh mean.  The verdict is monotone
    in the ratio: USED at or above `used_threshold`, FRESH at or below
    `fresh_threshold`, INDETERMINATE in the band between.
    """
    probe = _check_probe(probe)
    if not 0 < fresh_threshold < used_threshold:
        raise ValidationError("need 0 < fresh_threshold < used_threshold")
    fresh_mean, _ = baseline.for_tag(predicted_class)
    if fresh_mean <= 0:
        raise ValidationError(f"baseline mean for tag {predicted_class} "
                              "must be positive")
    ratio = float(np.median(probe)) / fresh_mean
    if ratio >= used_threshold:
        return RecycledVerdict.USED, ratio
    if ratio <= fresh_threshold:
        return RecycledVerdict.FRESH, ratio
    return RecycledVerdict.INDETERMINATE, ratio


def locate_used_regions(latency_map: SpatialLatencyMap,
                        flag_ratio: float = DEFAULT_FLAG_RATIO):
    """Merge addresses elevated >= flag_ratio x map median into regions.

    The chip-wide median is the baseline, so the rule is invariant under
    uniform scaling of the map.  Flagged addresses separated by a gap of
    at most one unflagged address join the same region; each region
    reports its peak elevation ratio.
    """
    lat = np.asarray(latency_map.latencies, dtype=np.float64)
    if lat.ndim != 1 or lat.size == 0:
        raise ValidationError("latency map is empty")
    if not np.all(np.isfinite(lat)) or np.any(lat <= 0):
        raise ValidationError("map latencies must be positive and finite")
    if flag_ratio <= 1.0:
        raise ValidationError("flag_ratio must be > 1")
    base = float(np.median(lat))
    flagged = np.nonzero(lat >= flag_ratio * base)[0]
    regions = []
    for addr in flagged:
        if regions and addr - regions[-1][1] <= 2:
            regions[-1][1] = int(addr)
        else:
            regions.append([int(addr), int(addr)])
    return [UsedRegion(s, e, float(lat[s:e + 1].max() / base))
            for s, e in regions]


@dataclass
class DetectionReport:
    predicted_class_tag: Optional[int]
    predicted_class_label: str
    recycled_verdict: RecycledVerdict
    elevation_ratio: float
    used_regions: list = field(default_factory=list)

    def __post_init__(self):
        ends = [-2]
        for r in self.used_regions:
            if r.start_addr <= ends[-1] or r.start_addr > r.end_addr:
                raise ValidationError("used regions must be sorted and disjoint")
            ends.append(r.end_addr)

    def to_text(self) -> str:
        out = io.StringIO()
        tag = "?" if self.predicted_class_tag is None else self.predicted_class_tag
        out.write(f"predicted class: {tag} ({self.predicted_class_label})\n")
        out.write(f"recycled verdict: {self.recycled_verdict.value}\n")
        out.write(f"elevation ratio: {self.elevation_ratio:.4f}\n")
        if not self.used_regions:
            out.write("used regions: none\n")
        else:
            out.write("used regions (start, end, peak ratio):\n")
            for r in self.used_regions:
                out.write(f"  {r.start_addr} {r.end_addr} {r.peak_ratio:.4f}\n")
        return out.getvalue()

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("field,value\n")
        tag = "" if self.predicted_class_tag is None else self.predicted_class_tag
        out.write(f"predicted_class_tag,{tag}\n")
        out.write(f"predicted_class_label,{self.predicted_class_label}\n")
        out.write(f"recycled_verdict,{self.recycled_verdict.value}\n")
        out.write(f"elevation_ratio,{self.elevation_ratio:.6f}\n")
        out.write("# used_regions\n")
        out.write("start_addr,end_addr,peak_ratio\n")
        for r in self.used_regions:
            out.write(f"{r.start_addr},{r.end_addr},{r.peak_ratio:.6f}\n")
        return out.getvalue()


def diagnose_probe(probe, model: TrainedModel, baseline: FreshBaseline,
                   used_threshold: float = USED_THRESHOLD,
                   fresh_threshold: float = FRESH_THRESHOLD) -> DetectionReport:
    """Identification plus recycled check for one probe; no spatial scan."""
    tag, _ = identify_manufacturer(probe, model)
    verdict, ratio = detect_recycled(probe, tag, baseline,
                                     used_threshold, fresh_threshold)
    return DetectionReport(tag, model.label_of(tag), verdict, ratio)


# ------------------------------------------------------------------- map I/O

def save_map(latency_map: SpatialLatencyMap, path) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("addr,latency_us\n")
        for addr, lat in enumerate(latency_map.latencies):
            fh.write(f"{addr},{lat:.6f}\n")
    os.replace(tmp, path)


def load_map(path) -> SpatialLatencyMap:
    """Two-column CSV (addr, latency_us) covering every address exactly once."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "addr,latency_us":
        raise ParseError("expected header 'addr,latency_us'", line=1)
    pairs = {}
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError("expected 2 columns", line=ln)
        try:
            addr, lat = int(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError("bad addr or latency", line=ln) from None
        if addr in pairs:
            raise ParseError(f"duplicate address {addr}", line=ln)
        pairs[addr] = lat
    if not pairs:
        raise ParseError("map file has no data rows", line=1)
    n = max(pairs) + 1
    if sorted(pairs) != list(range(n)):
        raise ValidationError(f"map must cover addresses 0..{n - 1} "
                              "with no holes")
    return SpatialLatencyMap(np.array([pairs[a] for a in range(n)]))
