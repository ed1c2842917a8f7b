"""Fixed category taxonomies for buildings and land use.

Category ordering is alphabetical and must never change: one-hot indices
derived from these tuples are baked into encoded datasets and checkpoints.
"""

from __future__ import annotations

BUILDING_CATEGORIES: tuple[str, ...] = (
    "apartment",
    "church",
    "garage",
    "house",
    "industrial",
    "office building",
    "retail",
    "roof",
)

LANDUSE_CATEGORIES: tuple[str, ...] = (
    "commercial",
    "residential",
    "public",
    "industrial",
)

NUM_BUILDING_CATEGORIES = len(BUILDING_CATEGORIES)
NUM_LANDUSE_CATEGORIES = len(LANDUSE_CATEGORIES)

BUILDING_INDEX: dict[str, int] = {name: i for i, name in enumerate(BUILDING_CATEGORIES)}
LANDUSE_INDEX: dict[str, int] = {name: i for i, name in enumerate(LANDUSE_CATEGORIES)}


def building_index(name: str) -> int:
    try:
        return BUILDING_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown building category: {name!r}") from None


def landuse_index(name: str) -> int:
    try:
        return LANDUSE_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown land-use category: {name!r}") from None
