"""Seeded generative model of NVM program/erase latency under wear.

Each chip class is described by a small parameter set (base latency, a
power-law drift term, an optional one-time step, and three variability
sigmas).  Latency at a location with cumulative cycle count ``w`` is

    L = base * chip_factor * loc_factor(addr)
             * (1 + a * (w / c_ref)**b) * step(w) * exp(eps)

with ``eps ~ Normal(0, noise_sigma**2)`` keyed by (chip_seed, addr, w),
quantized to 0.01 us.  Keying the noise on the wear counter rather than a
stream position makes sampling order irrelevant: a trace can be replayed
from (class, seed, addr) metadata alone.

The builtin catalog is synthetic.  Class tags, manufacturers, capacities
and technologies mirror a real nine-chip survey; every numeric curve
parameter is a calibration constant chosen so the classes are distinct but
not trivially separable, and location counts are desk-scale rather than
full chip capacities.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

from ._rng import hashed_normal
from .errors import ParseError, ValidationError

__all__ = [
    "Technology",
    "OpKind",
    "ChipClassSpec",
    "ChipInstance",
    "SpatialLatencyMap",
    "BUILTIN_CATALOG",
    "load_catalog",
    "dump_catalog",
    "new_chip",
    "latency_sample",
    "latency_block",
    "cycle_location",
    "full_chip_scan",
    "expected_latency",
    "mean_latency_curve",
]

QUANTUM_US = 0.01  # measurement resolution of the emulated rig

# hash-stream tags so chip factors, location factors and read noise never
# collide even for equal seeds
_TAG_CHIP = 0x11
_TAG_LOC = 0x22
_TAG_NOISE = 0x33

_FACTOR_FLOOR = 0.05  # keeps multiplicative factors positive for any sigma


class Technology(enum.Enum):
    NOR_FLASH = "NOR_FLASH"
    CBRAM = "CBRAM"
    RRAM = "RRAM"


class OpKind(enum.Enum):
    SECTOR_ERASE = "SECTOR_ERASE"
    PAGE_WRITE = "PAGE_WRITE"


@dataclass(frozen=True)
class ChipClassSpec:
    """Latency/degradation parameterization of one chip class."""

    class_tag: int
    manufacturer: str
    capacity_label: str
    technology: Technology
    op_kind: OpKind
    num_locations: int
    base_latency_us: float
    drift_amplitude: float
    drift_exponent: float
    drift_ref_cycles: int
    noise_sigma: float
    chip_sigma: float
    loc_sigma: float
    step_cycles: int | None = None
    step_factor: float | None = None

    def __post_init__(self):
        if not 0 <= self.class_tag <= 8:
            raise ValidationError(f"class_tag must be in 0..8, got {self.class_tag}")
        if self.base_latency_us <= 0:
            raise ValidationError("base_latency_us must be positive")
        if self.num_locations < 64:
            raise ValidationError("num_locations must be >= 64")
        if self.drift_amplitude < 0:
            raise ValidationError("drift_amplitude must be >= 0")
        if not 0 < self.drift_exponent <= 2:
            raise ValidationError("drift_exponent must be in (0, 2]")
        if self.drift_ref_cycles < 1:
            raise ValidationError("drift_ref_cycles must be positive")
        for name in ("noise_sigma", "chip_sigma", "loc_sigma"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if (self.step_cycles is None) != (self.step_factor is None):
            raise ValidationError("step_cycles and step_factor must be set together")
        if self.step_cycles is not None and self.step_cycles < 1:
            raise ValidationError("step_cycles must be positive")
        if self.step_factor is not None and self.step_factor < 1:
            raise ValidationError("step_factor must be >= 1")
        if self.technology is Technology.NOR_FLASH:
            if self.op_kind is not OpKind.SECTOR_ERASE:
                raise ValidationError("NOR_FLASH classes use SECTOR_ERASE")
        elif self.op_kind is not OpKind.PAGE_WRITE:
            raise ValidationError("CBRAM/RRAM classes use PAGE_WRITE")

    @property
    def label(self) -> str:
        return f"{self.manufacturer} {self.capacity_label} {self.technology.value}"


def _spec(tag, manufacturer, capacity, tech, n_loc, base, a, b, c_ref,
          noise, chip, loc, step_cycles=None, step_factor=None):
    op = OpKind.SECTOR_ERASE if tech is Technology.NOR_FLASH else OpKind.PAGE_WRITE
    return ChipClassSpec(
        class_tag=tag, manufacturer=manufacturer, capacity_label=capacity,
        technology=tech, op_kind=op, num_locations=n_loc,
        base_latency_us=base, drift_amplitude=a, drift_exponent=b,
        drift_ref_cycles=c_ref, noise_sigma=noise, chip_sigma=chip,
        loc_sigma=loc, step_cycles=step_cycles, step_factor=step_factor,
    )


# Synthetic defaults.  Curve constraints observed here:
#  - drift is negligible below ~100 cycles (fresh probes stay fresh),
#  - every class clears a 1.6x mean elevation by 10k cycles,
#  - no class sits inside the ambiguous 1.42x-1.60x elevation band at the
#    canonical used-location cycle counts (1k/5k/10k/20k/30k/50k),
#  - Macronix 64/128Mb and the two Fujitsu RRAM parts are deliberately
#    close at low wear so classification stays below 100%.
BUILTIN_CATALOG: tuple[ChipClassSpec, ...] = (
    _spec(0, "Macronix", "4Mb", Technology.NOR_FLASH, 128, 399.7, 1.500, 1.118, 10000, 0.020, 0.006, 0.004),
    _spec(1, "Macronix", "64Mb", Technology.NOR_FLASH, 1024, 300.0, 0.650, 1.400, 10000, 0.021, 0.006, 0.004),
    _spec(2, "Macronix", "128Mb", Technology.NOR_FLASH, 2048, 303.0, 1.350, 0.967, 10000, 0.019, 0.006, 0.004),
    _spec(3, "Micron", "128Mb", Technology.NOR_FLASH, 2048, 459.7, 0.884, 1.376, 10000, 0.021, 0.006, 0.004, 20000, 1.15),
    _spec(4, "Winbond", "8Mb", Technology.NOR_FLASH, 256, 174.2, 1.475, 1.197, 10000, 0.020, 0.006, 0.004),
    _spec(5, "Microchip", "2Mb", Technology.NOR_FLASH, 64, 155.0, 1.494, 1.226, 10000, 0.019, 0.006, 0.004),
    _spec(6, "Adesto", "256kb", Technology.CBRAM, 128, 68.0, 0.678, 1.143, 10000, 0.022, 0.006, 0.004),
    _spec(7, "Fujitsu", "4Mb", Technology.RRAM, 1024, 92.0, 0.767, 1.386, 10000, 0.020, 0.006, 0.004),
    _spec(8, "Fujitsu", "8Mb", Technology.RRAM, 2048, 98.0, 1.426, 1.114, 10000, 0.020, 0.006, 0.004),
)

_CATALOG_FIELDS = [
    "class_tag", "manufacturer", "capacity_label", "technology", "op_kind",
    "num_locations", "base_latency_us", "drift_amplitude", "drift_exponent",
    "drift_ref_cycles", "noise_sigma", "chip_sigma", "loc_sigma",
    "step_cycles", "step_factor",
]


def dump_catalog(specs, path=None) -> str:
    """Render a catalog as CSV; write it to `path` when given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CATALOG_FIELDS)
    for s in specs:
        w.writerow([
            s.class_tag, s.manufacturer, s.capacity_label,
            s.technology.value, s.op_kind.value, s.num_locations,
            repr(s.base_latency_us), repr(s.drift_amplitude),
            repr(s.drift_exponent), s.drift_ref_cycles,
            repr(s.noise_sigma), repr(s.chip_sigma), repr(s.loc_sigma),
            "" if s.step_cycles is None else s.step_cycles,
            "" if s.step_factor is None else repr(s.step_factor),
        ])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def load_catalog(path="builtin") -> list[ChipClassSpec]:
    """Load a chip-class catalog from a CSV file, or the builtin one."""
    if path == "builtin":
        return list(BUILTIN_CATALOG)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty catalog file", line=1)
    header = next(csv.reader([lines[0]]))
    if header != _CATALOG_FIELDS:
        raise ParseError(f"bad catalog header, expected {','.join(_CATALOG_FIELDS)}", line=1)
    specs: list[ChipClassSpec] = []
    seen: set[int] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        row = next(csv.reader([raw]))
        if len(row) != len(_CATALOG_FIELDS):
            raise ParseError(f"expected {len(_CATALOG_FIELDS)} fields, got {len(row)}", line=lineno)
        rec = dict(zip(_CATALOG_FIELDS, row))
        try:
            spec = ChipClassSpec(
                class_tag=int(rec["class_tag"]),
                manufacturer=rec["manufacturer"],
                capacity_label=rec["capacity_label"],
                technology=Technology(rec["technology"]),
                op_kind=OpKind(rec["op_kind"]),
                num_locations=int(rec["num_locations"]),
                base_latency_us=float(rec["base_latency_us"]),
                drift_amplitude=float(rec["drift_amplitude"]),
                drift_exponent=float(rec["drift_exponent"]),
                drift_ref_cycles=int(rec["drift_ref_cycles"]),
                noise_sigma=float(rec["noise_sigma"]),
                chip_sigma=float(rec["chip_sigma"]),
                loc_sigma=float(rec["loc_sigma"]),
                step_cycles=int(rec["step_cycles"]) if rec["step_cycles"] else None,
                step_factor=float(rec["step_factor"]) if rec["step_factor"] else None,
            )
        except (ValueError, ValidationError) as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if spec.class_tag in seen:
            raise ValidationError(f"duplicate class_tag {spec.class_tag}")
        seen.add(spec.class_tag)
        specs.append(spec)
    return specs


@dataclass
class ChipInstance:
    """One simulated chip: frozen draw of factors plus a mutable wear map.

    Not safe for concurrent mutation; advance-free sampling may run in
    parallel across addresses.
    """

    spec: ChipClassSpec
    chip_seed: int
    chip_factor: float
    loc_factor: np.ndarray
    wear: np.ndarray = field(repr=False)

    @property
    def class_tag(self) -> int:
        return self.spec.class_tag


def new_chip(spec: ChipClassSpec, chip_seed: int) -> ChipInstance:
    """Instantiate a fresh chip; deterministic in (spec, chip_seed)."""
    chip_z = float(hashed_normal(_TAG_CHIP, chip_seed))
    chip_factor = max(1.0 + spec.chip_sigma * chip_z, _FACTOR_FLOOR)
    loc_z = hashed_normal(_TAG_LOC, chip_seed, np.arange(spec.num_locations))
    loc_factor = np.maximum(1.0 + spec.loc_sigma * loc_z, _FACTOR_FLOOR)
    wear = np.zeros(spec.num_locations, dtype=np.int64)
    return ChipInstance(spec=spec, chip_seed=chip_seed,
                        chip_factor=chip_factor, loc_factor=loc_factor, wear=wear)


def _check_addr(chip: ChipInstance, addr: int) -> None:
    if not 0 <= addr < chip.spec.num_locations:
        raise ValidationError(
            f"address {addr} out of range 0..{chip.spec.num_locations - 1}")


def _drift(spec: ChipClassSpec, wear):
    wear = np.asarray(wear, dtype=np.float64)
    d = 1.0 + spec.drift_amplitude * (wear / spec.drift_ref_cycles) ** spec.drift_exponent
    if spec.step_cycles is not None:
        d = d * np.where(wear >= spec.step_cycles, spec.step_factor, 1.0)
    return d


def _latency_at(chip: ChipInstance, addr, wear) -> np.ndarray:
    """Quantized latencies for (addr, wear) arrays; pure, no state change."""
    spec = chip.spec
    noiseless = (spec.base_latency_us * chip.chip_factor
                 * chip.loc_factor[addr] * _drift(spec, wear))
    if spec.noise_sigma > 0:
        eps = spec.noise_sigma * hashed_normal(_TAG_NOISE, chip.chip_seed, addr, wear)
        noiseless = noiseless * np.exp(eps)
    # divide (not multiply by QUANTUM_US) so the result is bit-identical to
    # parsing the same value back from decimal text
    return np.round(noiseless / QUANTUM_US) / (1.0 / QUANTUM_US)


def latency_sample(chip: ChipInstance, addr: int, advance: bool = True) -> float:
    """One latency measurement at `addr`; increments wear when `advance`."""
    _check_addr(chip, addr)
    lat = float(_latency_at(chip, addr, chip.wear[addr]))
    if advance:
        chip.wear[addr] += 1
    return lat


def latency_block(chip: ChipInstance, addr: int, n: int, advance: bool = True) -> np.ndarray:
    """`n` consecutive advancing measurements at one address, vectorized.

    Equivalent to calling latency_sample `n` times with advance=True; with
    advance=False the wear map is left untouched (a what-if replay).
    """
    _check_addr(chip, addr)
    if n < 1:
        raise ValidationError("n must be >= 1")
    wears = chip.wear[addr] + np.arange(n, dtype=np.int64)
    lat = _latency_at(chip, addr, wears)
    if advance:
        chip.wear[addr] += n
    return lat


def cycle_location(chip: ChipInstance, addr: int, n: int) -> None:
    """Fast-forward wear at `addr` by `n` cycles without sampling."""
    _check_addr(chip, addr)
    if n < 0:
        raise ValidationError("cycle count must be >= 0")
    chip.wear[addr] += n


@dataclass
class SpatialLatencyMap:
    """One latency per address over a whole chip."""

    latencies: np.ndarray
    class_tag: int | None = None

    def __len__(self) -> int:
        return len(self.latencies)


def full_chip_scan(chip: ChipInstance) -> SpatialLatencyMap:
    """One advancing operation on every location, in address order."""
    addrs = np.arange(chip.spec.num_locations)
    lat = _latency_at(chip, addrs, chip.wear)
    chip.wear += 1
    return SpatialLatencyMap(latencies=lat, class_tag=chip.class_tag)


def expected_latency(chip: ChipInstance, addr, wear) -> np.ndarray:
    """Noise-free latency for (addr, wear): the deterministic model part.

    Ground truth for elevation checks; not quantized.
    """
    spec = chip.spec
    return (spec.base_latency_us * chip.chip_factor
            * chip.loc_factor[np.asarray(addr)] * _drift(spec, wear))


def mean_latency_curve(spec: ChipClassSpec, wears) -> np.ndarray:
    """Class-mean trajectory (unit chip/location factors, no noise)."""
    return spec.base_latency_us * _drift(spec, wears)
