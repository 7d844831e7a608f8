"""Reading network and heart-function files with unit-suffixed keys."""

from __future__ import annotations

import json
import logging
from importlib import resources
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from hemo_sbi.core.exceptions import NetworkConfigError
from hemo_sbi.schemas.network import (
    ArterialNetwork,
    ArterySegment,
    BloodProperties,
    HeartFunction,
    WindkesselBed,
)
from hemo_sbi.services.units import convert_fields

logger = logging.getLogger(__name__)

_SEGMENT_PASSTHROUGH = frozenset({"id", "name", "children", "terminal_bed"})
_BED_PASSTHROUGH = frozenset({"id"})
_TOP_LEVEL = frozenset({"blood", "segments", "beds", "root", "description"})


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise NetworkConfigError(f"File not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise NetworkConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _as_objects(raw: Any, key: str) -> list[dict[str, Any]]:
    """Accept either a list of objects or an id-keyed mapping."""
    if isinstance(raw, dict):
        return [{"id": k, **v} for k, v in raw.items()]
    if isinstance(raw, list) and all(isinstance(v, dict) for v in raw):
        return raw
    raise NetworkConfigError(f"'{key}' must be a list of objects or a mapping")


def network_from_dict(data: dict[str, Any]) -> ArterialNetwork:
    """Build an :class:`ArterialNetwork` from parsed JSON, converting to SI."""
    unknown = set(data) - _TOP_LEVEL
    if unknown:
        raise NetworkConfigError(f"Unknown top-level keys: {', '.join(sorted(unknown))}")
    if "segments" not in data or "root" not in data:
        raise NetworkConfigError("Network file needs 'segments' and 'root'")
    try:
        blood = BloodProperties(**convert_fields(data.get("blood", {}), passthrough=frozenset()))
        segments: dict[str, ArterySegment] = {}
        for raw in _as_objects(data["segments"], "segments"):
            seg = ArterySegment(**convert_fields(raw, passthrough=_SEGMENT_PASSTHROUGH))
            if seg.id in segments:
                raise NetworkConfigError(f"Duplicate segment id '{seg.id}'")
            segments[seg.id] = seg
        beds: dict[str, WindkesselBed] = {}
        for raw in _as_objects(data.get("beds", []), "beds"):
            bed = WindkesselBed(**convert_fields(raw, passthrough=_BED_PASSTHROUGH))
            if bed.id in beds:
                raise NetworkConfigError(f"Duplicate bed id '{bed.id}'")
            beds[bed.id] = bed
        return ArterialNetwork(segments=segments, root=str(data["root"]), beds=beds, blood=blood)
    except ValidationError as exc:
        raise NetworkConfigError(_summarize(exc)) from exc


def load_network(path: Path) -> ArterialNetwork:
    """Load a network file (see ``docs/network-format.md``)."""
    data = _read_json(path)
    if not isinstance(data, dict):
        raise NetworkConfigError(f"{path}: top level must be an object")
    net = network_from_dict(data)
    logger.info("Loaded network %s: %d segments, %d beds", path, len(net.segments), len(net.beds))
    return net


def load_reference_network() -> ArterialNetwork:
    """Return the bundled five-segment reference network."""
    text = resources.files("hemo_sbi.data").joinpath("reference_network.json").read_text(
        encoding="utf-8"
    )
    return network_from_dict(json.loads(text))


def network_to_dict(net: ArterialNetwork) -> dict[str, Any]:
    """Serialize *net* with plain SI keys; :func:`network_from_dict` reads it back."""
    return {
        "root": net.root,
        "blood": net.blood.model_dump(),
        "segments": [
            {**seg.model_dump(exclude={"children"}), "children": list(seg.children)}
            for seg in net.segments.values()
        ],
        "beds": [bed.model_dump() for bed in net.beds.values()],
    }


def heart_function_from_dict(data: dict[str, Any]) -> HeartFunction:
    """Build a :class:`HeartFunction` from unit-suffixed JSON."""
    try:
        return HeartFunction(**convert_fields(data, passthrough=frozenset()))
    except ValidationError as exc:
        raise NetworkConfigError(_summarize(exc)) from exc


def load_heart_function(path: Path) -> HeartFunction:
    """Load a heart-function file, e.g. ``{"heart_rate_bpm": 75, ...}``."""
    data = _read_json(path)
    if not isinstance(data, dict):
        raise NetworkConfigError(f"{path}: top level must be an object")
    return heart_function_from_dict(data)


def _summarize(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)
