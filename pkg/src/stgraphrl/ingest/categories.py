from __future__ import annotations

import csv
import io
from collections.abc import Mapping
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType

POI_CLASSES: tuple[str, ...] = (
    "residential areas",
    "education",
    "food places",
    "transportation",
    "medical",
    "offices/workplaces",
    "personal services",
    "government offices",
    "outdoor and recreation places",
    "others",
)
OTHERS_CLASS = "others"


class CategoryMapError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class CategoryMap:
    class_names: tuple[str, ...]
    mapping: Mapping[str, int]

    def __post_init__(self) -> None:
        if OTHERS_CLASS not in self.class_names:
            raise CategoryMapError("a category map needs an 'others' class")
        if len(set(self.class_names)) != len(self.class_names):
            raise CategoryMapError("class names must be unique")
        if any(not 0 <= index < len(self.class_names) for index in self.mapping.values()):
            raise CategoryMapError("mapping points outside the class list")
        normalized = {raw.casefold(): index for raw, index in self.mapping.items()}
        for index, name in enumerate(self.class_names):
            normalized.setdefault(name.casefold(), index)
        object.__setattr__(self, "mapping", MappingProxyType(normalized))

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def others_index(self) -> int:
        return self.class_names.index(OTHERS_CLASS)

    @classmethod
    def from_table(
        cls,
        text: str,
        *,
        class_names: tuple[str, ...] = POI_CLASSES,
        delimiter: str = ",",
    ) -> CategoryMap:
        """Parse a two-column raw-category → class-name table; ``#`` lines are comments."""
        mapping: dict[str, int] = {}
        lines = (line for line in io.StringIO(text) if line.strip() and not line.startswith("#"))
        for row in csv.reader(lines, delimiter=delimiter):
            if len(row) != 2:
                raise CategoryMapError(f"category map rows need two columns, got {row!r}")
            raw, class_name = (value.strip() for value in row)
            if class_name not in class_names:
                raise CategoryMapError(f"unknown class name {class_name!r} for {raw!r}")
            mapping[raw] = class_names.index(class_name)
        return cls(class_names=class_names, mapping=mapping)

    @classmethod
    def load(cls, path: Path, *, delimiter: str = ",") -> CategoryMap:
        return cls.from_table(path.read_text(encoding="utf-8"), delimiter=delimiter)


def default_category_map() -> CategoryMap:
    table = resources.files("stgraphrl.ingest").joinpath("data/category_map.csv")
    return CategoryMap.from_table(table.read_text(encoding="utf-8"))


def map_category(raw_category: str | None, category_map: CategoryMap) -> int:
    if raw_category is None or not raw_category.strip():
        return category_map.others_index
    return category_map.mapping.get(raw_category.strip().casefold(), category_map.others_index)
